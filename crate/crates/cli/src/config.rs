//! Experiment configuration: one TOML file, optionally pulling in other files
//! through a top-level `include = [...]` list.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use ftsbench_core::dgm::TrainConfig;
use ftsbench_core::generators::{presets, GeneratorSpec};
use ftsbench_core::har::{BacktestConfig, MarketConfig};
use ftsbench_core::io::{read_text, sha256_hex};
use ftsbench_core::parametric::{FitSchedule, LawKind};
use ftsbench_core::rng;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every stream in the run is derived from it.
    #[serde(default)]
    pub seed: u64,
    /// Replicate labels.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_splits")]
    pub splits: [f64; 3],
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    pub datasets: Vec<DatasetConfig>,
    pub models: Vec<ModelConfig>,
    #[serde(default)]
    pub evaluation: EvaluationSettings,
    #[serde(default)]
    pub backtest: Option<BacktestSettings>,
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

fn default_splits() -> [f64; 3] {
    [0.6, 0.2, 0.2]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    /// Preset family (`ngarch`, `ngarch_plus`, `heston`, `heston_plus`).
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub instruments: Option<usize>,
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default)]
    pub segments: Option<usize>,
    /// Inline generator spec (usually brought in by an include).
    #[serde(default)]
    pub spec: Option<GeneratorSpec>,
}

impl DatasetConfig {
    /// Generator spec for one replicate; the spec seed is replaced by `seed`.
    pub fn resolve(&self, seed: u64) -> Result<GeneratorSpec, CliError> {
        let mut spec = match (&self.preset, &self.spec) {
            (Some(p), None) => {
                let n = self.instruments.unwrap_or(5);
                let t = self.steps.unwrap_or(5000);
                let k = self.segments.unwrap_or(3);
                if n == 0 || t == 0 || k == 0 || k > t {
                    return Err(CliError::Config(format!("dataset {}: instruments, steps and segments must be positive with segments <= steps", self.name)));
                }
                presets::by_name(p, n, t, k, seed)
                    .ok_or_else(|| CliError::Config(format!("dataset {}: unknown preset {p:?}", self.name)))?
            }
            (None, Some(s)) => s.clone(),
            _ => return Err(CliError::Config(format!("dataset {}: give exactly one of `preset` or `spec`", self.name))),
        };
        spec.seed = seed;
        spec.validate().map_err(|e| CliError::Config(format!("dataset {}: {e}", self.name)))?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Realized continuation of each condition.
    Replay,
    Constant,
    /// DCC-GARCH fitted once on the training split.
    Dcc,
    /// DCC-GARCH refitted on every conditioning window.
    DccRolling,
    Gmmn,
    Rcgan,
    /// Freshly initialized generators, for before/after comparisons.
    GmmnUntrained,
    RcganUntrained,
}

impl ModelKind {
    pub fn needs_fit(self) -> bool {
        matches!(self, ModelKind::Dcc | ModelKind::DccRolling)
    }

    pub fn needs_training(self) -> bool {
        matches!(self, ModelKind::Gmmn | ModelKind::Rcgan | ModelKind::GmmnUntrained | ModelKind::RcganUntrained)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    pub kind: ModelKind,
    #[serde(default)]
    pub law: Option<LawKind>,
    #[serde(default)]
    pub schedule: Option<FitSchedule>,
    #[serde(default)]
    pub train: Option<TrainConfig>,
    /// Output of the constant sampler.
    #[serde(default)]
    pub value: Option<f64>,
}

impl ModelConfig {
    pub fn train_config(&self) -> TrainConfig {
        self.train.clone().unwrap_or_else(|| match self.kind {
            ModelKind::Rcgan | ModelKind::RcganUntrained => TrainConfig::rcgan(),
            _ => TrainConfig::gmmn(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSettings {
    pub batch: usize,
    pub stride: usize,
    pub jaccard: bool,
    pub jaccard_batch: usize,
    pub jaccard_stride: usize,
    pub bootstraps: usize,
}

impl Default for EvaluationSettings {
    fn default() -> Self {
        Self { batch: 50, stride: 1, jaccard: false, jaccard_batch: 10, jaccard_stride: 5, bootstraps: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForecasterConfig {
    Har,
    HarNetwork { threshold: f64 },
    /// HAR with features from a roster model's sampled futures.
    HarGenerative { model: String, batch: usize },
    Oracle,
    NoSignal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BacktestSettings {
    pub forecasters: Vec<ForecasterConfig>,
    /// First traded day of the full panel; defaults to the start of the test split.
    #[serde(default)]
    pub first_day: Option<usize>,
    #[serde(default)]
    pub market: MarketConfig,
    #[serde(default)]
    pub config: BacktestConfig,
}

impl ExperimentConfig {
    /// Loads a config file, resolving includes relative to each including file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let table = load_table(path, &mut Vec::new())?;
        let cfg: Self = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let err = |m: String| Err(CliError::Config(m));
        if self.seeds.is_empty() {
            return err("at least one seed is required".into());
        }
        if self.models.is_empty() {
            return err("the model roster is empty".into());
        }
        if self.datasets.is_empty() {
            return err("no datasets configured".into());
        }
        unique("seed", self.seeds.iter().map(|s| s.to_string()))?;
        unique("dataset", self.datasets.iter().map(|d| d.name.clone()))?;
        unique("model", self.models.iter().map(|m| m.name.clone()))?;
        for name in self.datasets.iter().map(|d| &d.name).chain(self.models.iter().map(|m| &m.name)) {
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c)) || name.starts_with('.') {
                return err(format!("name {name:?} must be nonempty and use [A-Za-z0-9_.-]"));
            }
        }
        let sum: f64 = self.splits.iter().sum();
        if self.splits.iter().any(|f| !(0.0..=1.0).contains(f)) || (sum - 1.0).abs() > 1e-9 || self.splits[2] <= 0.0 {
            return err(format!("splits {:?} must be fractions summing to 1 with a test share", self.splits));
        }
        for d in &self.datasets {
            d.resolve(0)?;
        }
        for m in &self.models {
            if m.kind.needs_training() {
                m.train_config().validate().map_err(|e| CliError::Config(format!("model {}: {e}", m.name)))?;
            }
            if m.kind == ModelKind::Constant && m.value.is_none() {
                return err(format!("model {}: constant sampler needs `value`", m.name));
            }
        }
        let e = &self.evaluation;
        if e.batch == 0 || e.stride == 0 || e.jaccard_batch == 0 || e.jaccard_stride == 0 || e.bootstraps == 0 {
            return err("evaluation sizes must be positive".into());
        }
        if let Some(b) = &self.backtest {
            if b.forecasters.is_empty() {
                return err("backtest needs at least one forecaster".into());
            }
            for f in &b.forecasters {
                if let ForecasterConfig::HarGenerative { model, batch } = f {
                    if *batch == 0 || !self.models.iter().any(|m| &m.name == model) {
                        return err(format!("backtest forecaster refers to unknown model {model:?} or has zero batch"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Hash of the canonical rendering of the resolved config (output
    /// directory excluded).
    pub fn hash(&self) -> String {
        let cfg = Self { out_dir: None, ..self.clone() };
        sha256_hex(toml::to_string(&cfg).expect("config serializes").as_bytes())
    }

    /// Seed of one dataset replicate.
    pub fn dataset_seed(&self, dataset: &str, replicate: u64) -> u64 {
        rng::derive(self.seed, &["dataset", dataset, &replicate.to_string()])
    }

    /// Seed of one (model, dataset, replicate) cell; independent of the rest of the roster.
    pub fn model_seed(&self, model: &str, dataset: &str, replicate: u64) -> u64 {
        rng::derive(self.seed, &["model", model, dataset, &replicate.to_string()])
    }

    /// Seed shared by all models scored on one replicate.
    pub fn stage_seed(&self, stage: &str, dataset: &str, replicate: u64) -> u64 {
        rng::derive(self.seed, &[stage, dataset, &replicate.to_string()])
    }

    pub fn model(&self, name: &str) -> Option<&ModelConfig> {
        self.models.iter().find(|m| m.name == name)
    }
}

fn unique(what: &str, names: impl Iterator<Item = String>) -> Result<(), CliError> {
    let mut seen = BTreeSet::new();
    for n in names {
        if !seen.insert(n.clone()) {
            return Err(CliError::Config(format!("duplicate {what} {n:?}")));
        }
    }
    Ok(())
}

fn load_table(path: &Path, stack: &mut Vec<PathBuf>) -> Result<Table, CliError> {
    let canonical = path
        .canonicalize()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if stack.contains(&canonical) {
        return Err(CliError::Config(format!("include cycle through {}", path.display())));
    }
    let text = read_text(path).map_err(|e| CliError::Config(e.to_string()))?;
    let mut table: Table = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let includes = match table.remove("include") {
        None => Vec::new(),
        Some(Value::Array(items)) => items
            .into_iter()
            .map(|v| match v {
                Value::String(s) => Ok(s),
                other => Err(CliError::Config(format!("{}: include entries must be strings, found {other}", path.display()))),
            })
            .collect::<Result<_, _>>()?,
        Some(other) => return Err(CliError::Config(format!("{}: `include` must be a list, found {other}", path.display()))),
    };
    stack.push(canonical);
    let base = path.parent().unwrap_or(Path::new("."));
    let mut merged = Table::new();
    for inc in includes {
        let sub = load_table(&base.join(inc), stack)?;
        merge(&mut merged, sub);
    }
    stack.pop();
    merge(&mut merged, table);
    Ok(merged)
}

/// Later tables win for scalars, nested tables merge, arrays concatenate.
fn merge(into: &mut Table, from: Table) {
    for (k, v) in from {
        match (into.get_mut(&k), v) {
            (Some(Value::Table(a)), Value::Table(b)) => merge(a, b),
            (Some(Value::Array(a)), Value::Array(b)) => a.extend(b),
            (_, v) => {
                into.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [[datasets]]
        name = "ng"
        preset = "ngarch"
        instruments = 3
        steps = 600
        segments = 1

        [[models]]
        name = "replay"
        kind = "replay"
    "#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.seeds, vec![0, 1, 2, 3, 4]);
        assert_eq!(c.splits, [0.6, 0.2, 0.2]);
        assert_eq!(c.evaluation, EvaluationSettings::default());
    }

    #[test]
    fn empty_roster_rejected() {
        let datasets = MINIMAL.split("[[models]]").next().unwrap();
        let text = format!("models = []\n{datasets}");
        assert!(matches!(ExperimentConfig::parse(&text), Err(CliError::Config(m)) if m.contains("roster")));
    }

    #[test]
    fn no_seeds_rejected() {
        let text = format!("seeds = []\n{MINIMAL}");
        assert!(ExperimentConfig::parse(&text).is_err());
    }

    #[test]
    fn degenerate_dataset_sizes_rejected() {
        for (line, bad) in [("segments = 1", "segments = 0"), ("segments = 1", "segments = 700"), ("instruments = 3", "instruments = 0")] {
            let text = MINIMAL.replace(line, bad);
            assert!(matches!(ExperimentConfig::parse(&text), Err(CliError::Config(_))), "{bad}");
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::parse(&format!("colour = 1\n{MINIMAL}")).is_err());
    }

    #[test]
    fn seeds_independent_of_roster() {
        let a = ExperimentConfig::parse(MINIMAL).unwrap();
        let mut b = a.clone();
        b.models.push(ModelConfig { name: "zero".into(), kind: ModelKind::Constant, law: None, schedule: None, train: None, value: Some(0.0) });
        assert_eq!(a.model_seed("replay", "ng", 3), b.model_seed("replay", "ng", 3));
        assert_ne!(a.model_seed("replay", "ng", 3), a.model_seed("replay", "ng", 4));
        assert_ne!(a.model_seed("replay", "ng", 3), a.model_seed("zero", "ng", 3));
    }

    #[test]
    fn includes_merge_and_cycles_fail() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("data");
        std::fs::create_dir(&data).unwrap();
        std::fs::write(data.join("sets.toml"), "seed = 9\n[[datasets]]\nname = \"a\"\npreset = \"heston\"\nsteps = 600\nsegments = 1\n").unwrap();
        std::fs::write(
            dir.path().join("main.toml"),
            "include = [\"data/sets.toml\"]\nseed = 4\n[[datasets]]\nname = \"b\"\npreset = \"ngarch\"\nsteps = 600\nsegments = 1\n[[models]]\nname = \"r\"\nkind = \"replay\"\n",
        )
        .unwrap();
        let c = ExperimentConfig::load(&dir.path().join("main.toml")).unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.datasets.iter().map(|d| d.name.as_str()).collect::<Vec<_>>(), ["a", "b"]);

        std::fs::write(dir.path().join("x.toml"), "include = [\"y.toml\"]\n").unwrap();
        std::fs::write(dir.path().join("y.toml"), "include = [\"x.toml\"]\n").unwrap();
        let e = ExperimentConfig::load(&dir.path().join("x.toml")).unwrap_err();
        assert!(e.to_string().contains("cycle"));
    }

    #[test]
    fn missing_include_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("m.toml"), "include = [\"nope.toml\"]\n").unwrap();
        assert!(matches!(ExperimentConfig::load(&dir.path().join("m.toml")), Err(CliError::Config(_))));
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::parse(MINIMAL).unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }
}

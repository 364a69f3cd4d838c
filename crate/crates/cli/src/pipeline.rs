//! Stage scheduler. Every stage is a set of independent cells; a cell is
//! skipped when the previous manifest holds a successful record with the same
//! input key and all of its artifacts still hash-match.

use std::path::{Path, PathBuf};
use std::time::Instant;

use ftsbench_core::dgm::{train_gmmn, train_rcgan, untrained_gmmn, untrained_rcgan, ArFnnModel, ModelMeta};
use ftsbench_core::evaluation::{
    jaccard_curve, score_model, ConditionalSampler, ConstantSampler, JaccardConfig, MetricTable, ReplaySampler, ScoreConfig,
};
use ftsbench_core::generators::{build_dataset, split_dataset, split_lengths};
use ftsbench_core::har::{run_backtest, BacktestConfig, Forecaster, SyntheticMarket};
use ftsbench_core::io::{read_panel, read_text, sha256_hex, write_panel, write_text};
use ftsbench_core::parametric::{fit_dcc, rolling_refit, DccSampler, FitDocument, FitSchedule, LawKind, RollingDccSampler, RollingFit};
use ftsbench_core::ReturnPanel;
use ftsbench_numeric::DenseMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ForecasterConfig, ModelConfig, ModelKind};
use crate::manifest::{artifact, artifact_matches, CellRecord, CellStatus, RunManifest};
use crate::report::emit_report;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, clap::ValueEnum)]
pub enum Stage {
    Generate,
    Fit,
    Train,
    Evaluate,
    Backtest,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 6] = [Stage::Generate, Stage::Fit, Stage::Train, Stage::Evaluate, Stage::Backtest, Stage::Report];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Generate => "generate",
            Stage::Fit => "fit",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Backtest => "backtest",
            Stage::Report => "report",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Worker threads; `None` uses all cores.
    pub jobs: Option<usize>,
    /// Last stage to execute (all earlier stages run first).
    pub until: Stage,
    pub quiet: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub executed: usize,
    pub skipped: usize,
    pub failed: usize,
}

type CellFn<'a> = Box<dyn Fn() -> Result<Vec<String>, String> + Send + Sync + 'a>;

struct Cell<'a> {
    id: String,
    stage: Stage,
    /// `Err` when an upstream cell is unusable.
    key: Result<String, String>,
    run: CellFn<'a>,
}

/// Hex SHA-256 over newline-joined parts.
fn key_of(parts: &[&str]) -> String {
    sha256_hex(parts.join("\n").as_bytes())
}

fn to_toml<T: Serialize>(v: &T) -> String {
    toml::to_string(v).expect("config fragment serializes")
}

/// Rolling per-window fits as stored on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RollingFile {
    fits: Vec<RollingEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RollingEntry {
    start: usize,
    carried: bool,
    fit: FitDocument,
}

pub fn dataset_dir(dataset: &str, replicate: u64) -> String {
    format!("data/{dataset}/r{replicate}")
}

pub fn panel_path(dataset: &str, replicate: u64) -> String {
    format!("{}/panel.csv", dataset_dir(dataset, replicate))
}

pub fn model_dir(dataset: &str, replicate: u64, model: &str) -> String {
    format!("models/{dataset}/r{replicate}/{model}")
}

pub fn score_path(dataset: &str, replicate: u64, model: &str) -> String {
    format!("scores/{dataset}/r{replicate}/{model}.csv")
}

pub fn jaccard_path(dataset: &str, replicate: u64, model: &str) -> String {
    format!("jaccard/{dataset}/r{replicate}/{model}.csv")
}

pub fn backtest_dir(dataset: &str, replicate: u64) -> String {
    format!("backtest/{dataset}/r{replicate}")
}

pub fn weights_path(dataset: &str, replicate: u64, model: &str) -> String {
    format!("{}/weights.bin", model_dir(dataset, replicate, model))
}

fn cell_id(stage: Stage, dataset: &str, replicate: u64, model: Option<&str>) -> String {
    match model {
        Some(m) => format!("{}/{dataset}/r{replicate}/{m}", stage.name()),
        None => format!("{}/{dataset}/r{replicate}", stage.name()),
    }
}

/// Joined artifact hashes of successful upstream cells.
fn upstream(manifest: &RunManifest, ids: &[String]) -> Result<String, String> {
    let mut parts = Vec::new();
    for id in ids {
        match manifest.cell(id) {
            Some(c) if c.status == CellStatus::Ok => {
                parts.push(id.clone());
                parts.extend(c.artifacts.iter().map(|a| format!("{}={}", a.path, a.sha256)));
            }
            Some(_) => return Err(format!("upstream cell {id} failed")),
            None => return Err(format!("upstream cell {id} has not run")),
        }
    }
    Ok(parts.join("\n"))
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    out: &'a Path,
}

impl<'a> Ctx<'a> {
    fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    fn write(&self, rel: &str, text: &str) -> Result<(), String> {
        write_text(&self.path(rel), text).map_err(|e| e.to_string())
    }

    fn panel(&self, dataset: &str, replicate: u64) -> Result<ReturnPanel, String> {
        read_panel(&self.path(&panel_path(dataset, replicate))).map_err(|e| e.to_string())
    }

    fn splits(&self, dataset: &str, replicate: u64) -> Result<(ReturnPanel, ReturnPanel, ReturnPanel), String> {
        split_dataset(&self.panel(dataset, replicate)?, self.cfg.splits).map_err(|e| e.to_string())
    }

    fn train_config(&self, model: &ModelConfig, dataset: &str, replicate: u64) -> ftsbench_core::dgm::TrainConfig {
        let mut t = model.train_config();
        t.seed = self.cfg.model_seed(&model.name, dataset, replicate);
        t
    }

    /// Sampler for `model`; `scored` is the panel whose rows the sampler's
    /// `start` argument indexes.
    fn sampler<'p>(&self, model: &ModelConfig, dataset: &str, replicate: u64, scored: &'p DenseMatrix) -> Result<Box<dyn ConditionalSampler + 'p>, String> {
        let dir = model_dir(dataset, replicate, &model.name);
        Ok(match model.kind {
            ModelKind::Replay => Box::new(ReplaySampler::new(scored)),
            ModelKind::Constant => Box::new(ConstantSampler { value: model.value.unwrap_or(0.0) }),
            ModelKind::Dcc => {
                let text = read_text(&self.path(&format!("{dir}/fit.toml"))).map_err(|e| e.to_string())?;
                let fit = FitDocument::parse_fit(&text).map_err(|e| e.to_string())?;
                Box::new(DccSampler { name: model.name.clone(), fit })
            }
            ModelKind::DccRolling => {
                let text = read_text(&self.path(&format!("{dir}/rolling.toml"))).map_err(|e| e.to_string())?;
                let file: RollingFile = toml::from_str(&text).map_err(|e| e.to_string())?;
                let fits = file
                    .fits
                    .into_iter()
                    .map(|e| Ok(RollingFit { start: e.start, carried: e.carried, fit: e.fit.into_fit().map_err(|e| e.to_string())? }))
                    .collect::<Result<Vec<_>, String>>()?;
                Box::new(RollingDccSampler::new(&model.name, fits).map_err(|e| e.to_string())?)
            }
            _ => {
                let (m, _) = ArFnnModel::load(&self.path(&weights_path(dataset, replicate, &model.name))).map_err(|e| e.to_string())?;
                Box::new(m)
            }
        })
    }

    fn generate(&self, dataset: usize, replicate: u64) -> Result<Vec<String>, String> {
        let d = &self.cfg.datasets[dataset];
        let spec = d.resolve(self.cfg.dataset_seed(&d.name, replicate)).map_err(|e| e.to_string())?;
        let panel = build_dataset(&spec).map_err(|e| e.to_string())?;
        split_dataset(&panel, self.cfg.splits).map_err(|e| e.to_string())?;
        let rel = panel_path(&d.name, replicate);
        write_panel(&self.path(&rel), &panel, Some(&spec)).map_err(|e| e.to_string())?;
        let dir = dataset_dir(&d.name, replicate);
        Ok(["panel.csv", "panel.variance", "panel.jumps", "panel.regime", "panel.manifest.toml"]
            .iter()
            .map(|f| format!("{dir}/{f}"))
            .collect())
    }

    fn fit(&self, dataset: &str, replicate: u64, model: &ModelConfig) -> Result<Vec<String>, String> {
        let (train, _, test) = self.splits(dataset, replicate)?;
        let law = model.law.unwrap_or(LawKind::Normal);
        let dir = model_dir(dataset, replicate, &model.name);
        if model.kind == ModelKind::Dcc {
            let fit = fit_dcc(&train.returns, law).map_err(|e| e.to_string())?;
            let rel = format!("{dir}/fit.toml");
            self.write(&rel, &FitDocument::from_fit(&fit).to_toml())?;
            Ok(vec![rel])
        } else {
            let schedule = model.schedule.unwrap_or_else(|| FitSchedule::rolling(ftsbench_core::generators::WINDOW));
            let fits = rolling_refit(&test.returns, &schedule, law).map_err(|e| e.to_string())?;
            let file = RollingFile {
                fits: fits.iter().map(|f| RollingEntry { start: f.start, carried: f.carried, fit: FitDocument::from_fit(&f.fit) }).collect(),
            };
            let rel = format!("{dir}/rolling.toml");
            self.write(&rel, &to_toml(&file))?;
            Ok(vec![rel])
        }
    }

    fn train(&self, dataset: &str, replicate: u64, model: &ModelConfig) -> Result<Vec<String>, String> {
        let (train, validation, _) = self.splits(dataset, replicate)?;
        let tc = self.train_config(model, dataset, replicate);
        let e = |e: ftsbench_core::dgm::DgmError| e.to_string();
        let (mut generator, history, best) = match model.kind {
            ModelKind::Gmmn => {
                let t = train_gmmn(&train.returns, &validation.returns, &tc).map_err(e)?;
                (t.model, t.history, Some(t.best_step))
            }
            ModelKind::Rcgan => {
                let t = train_rcgan(&train.returns, &validation.returns, &tc).map_err(e)?;
                (t.model, t.history, Some(t.best_step))
            }
            ModelKind::GmmnUntrained => (untrained_gmmn(&train.returns, &tc).map_err(e)?, Vec::new(), None),
            ModelKind::RcganUntrained => (untrained_rcgan(&train.returns, &tc).map_err(e)?.0, Vec::new(), None),
            other => return Err(format!("{other:?} is not trainable")),
        };
        generator.name = model.name.clone();
        let rel = weights_path(dataset, replicate, &model.name);
        let meta = ModelMeta::for_model(&generator, Some(tc), history, best);
        generator.save(&self.path(&rel), &meta).map_err(e)?;
        Ok(vec![rel.clone(), rel.replace("weights.bin", "weights.toml")])
    }

    fn evaluate(&self, dataset: &str, replicate: u64, model: &ModelConfig) -> Result<Vec<String>, String> {
        let (_, _, test) = self.splits(dataset, replicate)?;
        let sampler = self.sampler(model, dataset, replicate, &test.returns)?;
        let ev = &self.cfg.evaluation;
        let seed = self.cfg.stage_seed("evaluate", dataset, replicate);
        let sc = ScoreConfig { batch: ev.batch, stride: ev.stride, seed, ..ScoreConfig::default() };
        let mut column = score_model(&test.returns, sampler.as_ref(), &sc).map_err(|e| e.to_string())?;
        column.model = model.name.clone();
        let rel = score_path(dataset, replicate, &model.name);
        self.write(&rel, &MetricTable::from_columns(&[column]).to_csv())?;
        let mut out = vec![rel];
        if ev.jaccard {
            let jc = JaccardConfig { batch: ev.jaccard_batch, stride: ev.jaccard_stride, bootstraps: ev.bootstraps, seed, ..JaccardConfig::default() };
            let curve = jaccard_curve(&test.returns, sampler.as_ref(), &jc).map_err(|e| e.to_string())?;
            let rel = jaccard_path(dataset, replicate, &model.name);
            self.write(&rel, &curve.to_csv(&model.name))?;
            out.push(rel);
        }
        Ok(out)
    }

    fn backtest(&self, dataset: &str, replicate: u64) -> Result<Vec<String>, String> {
        let settings = self.cfg.backtest.as_ref().ok_or("no backtest configured")?;
        let panel = self.panel(dataset, replicate)?;
        let [a, b, _] = split_lengths(panel.steps(), self.cfg.splits).map_err(|e| e.to_string())?;
        let seed = self.cfg.stage_seed("backtest", dataset, replicate);
        let market_cfg = ftsbench_core::har::MarketConfig { seed, ..settings.market.clone() };
        let market = SyntheticMarket::build(&panel.variance, &market_cfg).map_err(|e| e.to_string())?;
        let samplers: Vec<Option<Box<dyn ConditionalSampler + '_>>> = settings
            .forecasters
            .iter()
            .map(|f| match f {
                ForecasterConfig::HarGenerative { model, .. } => {
                    let m = self.cfg.model(model).ok_or_else(|| format!("unknown model {model}"))?;
                    if m.kind == ModelKind::DccRolling {
                        return Err(format!("{model}: rolling fits are tied to the scored split and cannot drive the backtest"));
                    }
                    self.sampler(m, dataset, replicate, &panel.returns).map(Some)
                }
                _ => Ok(None),
            })
            .collect::<Result<_, String>>()?;
        let forecasters: Vec<Forecaster> = settings
            .forecasters
            .iter()
            .zip(&samplers)
            .map(|(f, s)| match f {
                ForecasterConfig::Har => Forecaster::Har,
                ForecasterConfig::HarNetwork { threshold } => Forecaster::HarNetwork { threshold: *threshold },
                ForecasterConfig::HarGenerative { batch, .. } => Forecaster::HarGenerative { sampler: s.as_deref().expect("built above"), batch: *batch },
                ForecasterConfig::Oracle => Forecaster::Oracle,
                ForecasterConfig::NoSignal => Forecaster::NoSignal,
            })
            .collect();
        let bc = BacktestConfig { seed, ..settings.config.clone() };
        let first_day = settings.first_day.unwrap_or(a + b);
        let result = run_backtest(&panel.returns, &market, &forecasters, &panel.variance, first_day, &bc).map_err(|e| e.to_string())?;
        let dir = backtest_dir(dataset, replicate);
        let g = &result.grid;
        let mut out = Vec::new();
        for (name, rows) in [("long_short", &g.long_short), ("long_only", &g.long_only), ("short_only", &g.short_only)] {
            let rel = format!("{dir}/{name}.csv");
            self.write(&rel, &g.to_csv(rows))?;
            out.push(rel);
        }
        let mut daily = String::from("forecaster,size,day,pnl\n");
        for (f, per_size) in g.forecasters.iter().zip(&result.daily) {
            for (size, series) in g.sizes.iter().zip(per_size) {
                for (day, v) in result.days.iter().zip(series) {
                    daily.push_str(&format!("{f},{size},{day},{}\n", ftsbench_core::io::fmt_f64(*v)));
                }
            }
        }
        let rel = format!("{dir}/daily.csv");
        self.write(&rel, &daily)?;
        out.push(rel);
        let rel = format!("{dir}/ledger.csv");
        self.write(&rel, &result.ledger_csv())?;
        out.push(rel);
        Ok(out)
    }
}

fn plan<'a>(ctx: &'a Ctx<'a>, stage: Stage, manifest: &RunManifest) -> Vec<Cell<'a>> {
    let cfg = ctx.cfg;
    let version = env!("CARGO_PKG_VERSION");
    let mut cells = Vec::new();
    let gen_id = |d: &str, r: u64| cell_id(Stage::Generate, d, r, None);
    for (di, d) in cfg.datasets.iter().enumerate() {
        for &r in &cfg.seeds {
            let name = d.name.as_str();
            match stage {
                Stage::Generate => {
                    let key = d.resolve(cfg.dataset_seed(name, r)).map(|s| key_of(&["generate", version, &s.to_toml(), &format!("{:?}", cfg.splits)]));
                    cells.push(Cell {
                        id: gen_id(name, r),
                        stage,
                        key: key.map_err(|e| e.to_string()),
                        run: Box::new(move || ctx.generate(di, r)),
                    });
                }
                Stage::Fit | Stage::Train | Stage::Evaluate => {
                    for m in &cfg.models {
                        let wanted = match stage {
                            Stage::Fit => m.kind.needs_fit(),
                            Stage::Train => m.kind.needs_training(),
                            _ => true,
                        };
                        if !wanted {
                            continue;
                        }
                        let mut deps = vec![gen_id(name, r)];
                        let mut parts = vec![stage.name().to_string(), version.to_string(), to_toml(m), format!("{:?}", cfg.splits)];
                        match stage {
                            Stage::Train => parts.push(to_toml(&ctx.train_config(m, name, r))),
                            Stage::Evaluate => {
                                parts.push(to_toml(&cfg.evaluation));
                                parts.push(cfg.stage_seed("evaluate", name, r).to_string());
                                if m.kind.needs_fit() {
                                    deps.push(cell_id(Stage::Fit, name, r, Some(&m.name)));
                                }
                                if m.kind.needs_training() {
                                    deps.push(cell_id(Stage::Train, name, r, Some(&m.name)));
                                }
                            }
                            _ => {}
                        }
                        let key = upstream(manifest, &deps).map(|up| {
                            parts.push(up);
                            key_of(&parts.iter().map(String::as_str).collect::<Vec<_>>())
                        });
                        let run: CellFn = match stage {
                            Stage::Fit => Box::new(move || ctx.fit(name, r, m)),
                            Stage::Train => Box::new(move || ctx.train(name, r, m)),
                            _ => Box::new(move || ctx.evaluate(name, r, m)),
                        };
                        cells.push(Cell { id: cell_id(stage, name, r, Some(&m.name)), stage, key, run });
                    }
                }
                Stage::Backtest => {
                    let Some(b) = &cfg.backtest else { continue };
                    let mut deps = vec![gen_id(name, r)];
                    for f in &b.forecasters {
                        if let ForecasterConfig::HarGenerative { model, .. } = f {
                            if let Some(m) = cfg.model(model) {
                                if m.kind.needs_fit() {
                                    deps.push(cell_id(Stage::Fit, name, r, Some(model)));
                                }
                                if m.kind.needs_training() {
                                    deps.push(cell_id(Stage::Train, name, r, Some(model)));
                                }
                            }
                        }
                    }
                    let key = upstream(manifest, &deps)
                        .map(|up| key_of(&["backtest", version, &to_toml(b), &format!("{:?}", cfg.splits), &cfg.stage_seed("backtest", name, r).to_string(), &up]));
                    cells.push(Cell { id: cell_id(stage, name, r, None), stage, key, run: Box::new(move || ctx.backtest(name, r)) });
                }
                Stage::Report => {}
            }
        }
    }
    cells
}

fn execute(cells: Vec<Cell>, previous: Option<&RunManifest>, manifest: &mut RunManifest, out: &Path, quiet: bool) -> (usize, usize, usize) {
    let results: Vec<(CellRecord, bool)> = cells
        .into_par_iter()
        .map(|cell| {
            let key = match cell.key {
                Ok(k) => k,
                Err(e) => {
                    let rec = CellRecord { id: cell.id, stage: cell.stage.name().into(), key: String::new(), status: CellStatus::Failed, error: Some(e), seconds: 0.0, artifacts: vec![] };
                    return (rec, false);
                }
            };
            if let Some(prev) = previous.and_then(|p| p.cell(&cell.id)) {
                if prev.key == key && prev.status == CellStatus::Ok && prev.artifacts.iter().all(|a| artifact_matches(out, a)) {
                    return (prev.clone(), true);
                }
            }
            let started = Instant::now();
            let outcome = (cell.run)().and_then(|paths| paths.iter().map(|p| artifact(out, p).map_err(|e| e.to_string())).collect::<Result<Vec<_>, _>>());
            let seconds = (started.elapsed().as_secs_f64() * 1000.0).round() / 1000.0;
            let rec = match outcome {
                Ok(artifacts) => CellRecord { id: cell.id, stage: cell.stage.name().into(), key, status: CellStatus::Ok, error: None, seconds, artifacts },
                Err(e) => CellRecord { id: cell.id, stage: cell.stage.name().into(), key, status: CellStatus::Failed, error: Some(e), seconds, artifacts: vec![] },
            };
            (rec, false)
        })
        .collect();
    let (mut executed, mut skipped, mut failed) = (0, 0, 0);
    for (rec, was_skipped) in results {
        if !quiet {
            let state = match (&rec.status, was_skipped) {
                (CellStatus::Failed, _) => format!("FAILED: {}", rec.error.as_deref().unwrap_or("")),
                (_, true) => "cached".to_string(),
                _ => format!("ok ({:.1}s)", rec.seconds),
            };
            eprintln!("[{}] {} {state}", rec.stage, rec.id);
        }
        if was_skipped {
            skipped += 1;
        } else {
            executed += 1;
        }
        if rec.status == CellStatus::Failed {
            failed += 1;
        }
        manifest.upsert(rec);
    }
    (executed, skipped, failed)
}

/// Runs every stage up to `opts.until`, writing artifacts and the manifest
/// under `opts.out_dir`.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    cfg.validate()?;
    std::fs::create_dir_all(&opts.out_dir).map_err(|e| CliError::Io(format!("{}: {e}", opts.out_dir.display())))?;
    let previous = RunManifest::read(&opts.out_dir).ok();
    let mut manifest = RunManifest::new(&cfg.hash());
    // records of stages not run this time stay available for caching
    if let Some(prev) = &previous {
        let later = |c: &&CellRecord| Stage::ALL.iter().any(|s| s.name() == c.stage && *s > opts.until);
        for c in prev.cells.iter().filter(later) {
            manifest.upsert(c.clone());
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let ctx = Ctx { cfg, out: &opts.out_dir };
    let (mut executed, mut skipped, mut failed) = (0, 0, 0);
    for stage in Stage::ALL.into_iter().filter(|&s| s <= opts.until) {
        let counts = if stage == Stage::Report {
            report_cell(cfg, &mut manifest, previous.as_ref(), opts)
        } else {
            let cells = plan(&ctx, stage, &manifest);
            pool.install(|| execute(cells, previous.as_ref(), &mut manifest, &opts.out_dir, opts.quiet))
        };
        executed += counts.0;
        skipped += counts.1;
        failed += counts.2;
    }
    manifest.write(&opts.out_dir)?;
    Ok(RunOutcome { manifest, executed, skipped, failed })
}

fn report_cell(cfg: &ExperimentConfig, manifest: &mut RunManifest, previous: Option<&RunManifest>, opts: &RunOptions) -> (usize, usize, usize) {
    let id = "report".to_string();
    let inputs: Vec<String> = manifest
        .cells
        .iter()
        .filter(|c| c.stage == "evaluate" || c.stage == "backtest")
        .map(|c| format!("{} {:?} {}", c.id, c.status, c.artifacts.iter().map(|a| a.sha256.as_str()).collect::<Vec<_>>().join(",")))
        .collect();
    let key = key_of(&["report", env!("CARGO_PKG_VERSION"), &cfg.hash(), &inputs.join("\n")]);
    if let Some(prev) = previous.and_then(|p| p.cell(&id)) {
        if prev.key == key && prev.status == CellStatus::Ok && prev.artifacts.iter().all(|a| artifact_matches(&opts.out_dir, a)) {
            if !opts.quiet {
                eprintln!("[report] report cached");
            }
            manifest.upsert(prev.clone());
            return (0, 1, 0);
        }
    }
    let started = Instant::now();
    let outcome = emit_report(cfg, manifest, &opts.out_dir)
        .and_then(|paths| paths.iter().map(|p| artifact(&opts.out_dir, p)).collect::<Result<Vec<_>, _>>());
    let seconds = (started.elapsed().as_secs_f64() * 1000.0).round() / 1000.0;
    let rec = match outcome {
        Ok(artifacts) => CellRecord { id, stage: "report".into(), key, status: CellStatus::Ok, error: None, seconds, artifacts },
        Err(e) => CellRecord { id, stage: "report".into(), key, status: CellStatus::Failed, error: Some(e.to_string()), seconds, artifacts: vec![] },
    };
    let failed = usize::from(rec.status == CellStatus::Failed);
    if !opts.quiet {
        eprintln!("[report] report {}", rec.error.as_deref().map_or("ok".to_string(), |e| format!("FAILED: {e}")));
    }
    manifest.upsert(rec);
    (1, 0, failed)
}

//! The checked-in fuzz seeds double as parser regression inputs.

use std::path::PathBuf;

use ftsbench_cli::{ExperimentConfig, RunManifest};

fn text(target: &str, file: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target).join(file);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn config_seeds_parse() {
    let small = ExperimentConfig::parse(&text("experiment_config", "small.toml")).unwrap();
    assert_eq!(small.models.len(), 2);
    let bt = ExperimentConfig::parse(&text("experiment_config", "backtest.toml")).unwrap();
    assert_eq!(bt.backtest.as_ref().map(|b| b.forecasters.len()), Some(5));
    assert!(ExperimentConfig::parse(&text("experiment_config", "zero_segments.toml")).is_err());
}

#[test]
fn manifest_seed_round_trips() {
    let m = RunManifest::from_toml(&text("run_manifest", "manifest.toml")).unwrap();
    assert!(m.failed().is_empty());
    assert_eq!(RunManifest::from_toml(&m.to_toml()).unwrap(), m);
}

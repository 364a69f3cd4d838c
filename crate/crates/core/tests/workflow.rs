use ftsbench_core::dgm::{untrained_gmmn, ArFnnModel, ModelMeta, TrainConfig};
use ftsbench_core::evaluation::{score_model, ConditionalSampler, ConstantSampler, ReplaySampler, ScoreConfig, MEASURES};
use ftsbench_core::generators::{build_dataset, presets, split_dataset};
use ftsbench_core::har::{run_backtest, BacktestConfig, Forecaster, MarketConfig, SyntheticMarket};
use ftsbench_core::io::{read_panel, write_panel};
use ftsbench_core::parametric::{fit_dcc, DccSampler, FitDocument, LawKind};

fn panel(seed: u64) -> ftsbench_core::ReturnPanel {
    build_dataset(&presets::ngarch_plus(4, 1200, 2, seed)).unwrap()
}

#[test]
fn panels_survive_disk_round_trip() {
    let spec = presets::heston_plus(3, 500, 2, 8);
    let p = build_dataset(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("panel.csv");
    write_panel(&path, &p, Some(&spec)).unwrap();
    let back = read_panel(&path).unwrap();
    assert_eq!(back.returns, p.returns);
    assert_eq!(back.variance, p.variance);
    assert_eq!(back.jumps, p.jumps);
    assert_eq!(back.regime, p.regime);
    assert_eq!(back.spec_hash, p.spec_hash);

    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, text.replacen('1', "2", 1)).unwrap();
    assert!(read_panel(&path).is_err());
}

#[test]
fn same_seed_same_panel_other_seed_differs() {
    assert_eq!(panel(1).returns, panel(1).returns);
    assert_ne!(panel(1).returns, panel(2).returns);
}

#[test]
fn replay_scores_zero_and_constant_scores_positive() {
    let (_, _, test) = split_dataset(&panel(3), [0.6, 0.2, 0.2]).unwrap();
    let cfg = ScoreConfig { batch: 3, stride: 20, ..ScoreConfig::default() };
    let replay = score_model(&test.returns, &ReplaySampler::new(&test.returns), &cfg).unwrap();
    assert_eq!(replay.values, [Some(0.0); 10]);
    let flat = score_model(&test.returns, &ConstantSampler { value: 0.0 }, &cfg).unwrap();
    let std = MEASURES.iter().position(|m| m.label() == "Std").unwrap();
    assert!(flat.values[std].unwrap() > 0.0);
}

#[test]
fn persisted_fit_samples_like_the_original() {
    let (train, _, test) = split_dataset(&panel(4), [0.6, 0.2, 0.2]).unwrap();
    let fit = fit_dcc(&train.returns, LawKind::Normal).unwrap();
    let reloaded = FitDocument::parse_fit(&FitDocument::from_fit(&fit).to_toml()).unwrap();
    let a = DccSampler { name: "a".into(), fit };
    let b = DccSampler { name: "b".into(), fit: reloaded };
    let cond = test.window(0, 40);
    let x = a.sample(0, &cond, 40, 4, 11).unwrap();
    let y = b.sample(0, &cond, 40, 4, 11).unwrap();
    for (p, q) in x.iter().zip(&y) {
        assert!(p.max_abs_diff(q).unwrap() < 1e-12);
    }
}

#[test]
fn saved_generator_reloads_bit_identically() {
    let (train, _, test) = split_dataset(&panel(5), [0.6, 0.2, 0.2]).unwrap();
    let cfg = TrainConfig { hidden: 8, residual_blocks: 1, ..TrainConfig::gmmn() };
    let model = untrained_gmmn(&train.returns, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("weights.bin");
    model.save(&path, &ModelMeta::for_model(&model, Some(cfg), Vec::new(), None)).unwrap();
    let (back, meta) = ArFnnModel::load(&path).unwrap();
    assert_eq!(back, model);
    assert_eq!(meta.instruments, 4);
    let cond = test.window(10, 40);
    assert_eq!(model.sample(0, &cond, 40, 2, 3).unwrap(), back.sample(0, &cond, 40, 2, 3).unwrap());
}

#[test]
fn backtest_ledger_adds_up_to_daily_pnl() {
    let p = build_dataset(&presets::ngarch_plus(12, 700, 2, 6)).unwrap();
    let market = SyntheticMarket::build(&p.variance, &MarketConfig::default()).unwrap();
    let (train, _, _) = split_dataset(&p, [0.6, 0.2, 0.2]).unwrap();
    let fit = fit_dcc(&train.returns, LawKind::Normal).unwrap();
    let dcc = DccSampler { name: "DCC".into(), fit };
    let cfg = BacktestConfig { sizes: vec![2, 5], lookback: 60, lambda: Some(0.01), ledger_sizes: vec![5], ..BacktestConfig::default() };
    let forecasters = [Forecaster::Har, Forecaster::HarGenerative { sampler: &dcc, batch: 3 }, Forecaster::Oracle];
    let res = run_backtest(&p.returns, &market, &forecasters, &p.variance, 600, &cfg).unwrap();
    assert_eq!(res.grid.forecasters, vec!["HAR", "HAR+DCC", "Oracle"]);
    assert_eq!(res.days.len(), 99);
    for (f, name) in res.grid.forecasters.iter().enumerate() {
        for (k, &day) in res.days.iter().enumerate() {
            let legs: Vec<_> = res.ledger.iter().filter(|l| &l.forecaster == name && l.day == day && l.size == 5).collect();
            assert_eq!(legs.len(), 10);
            let total: f64 = legs.iter().map(|l| l.net()).sum();
            assert!((total - res.daily[f][1][k]).abs() < 1e-12);
        }
        let mean = res.daily[f][1].iter().sum::<f64>() / res.days.len() as f64;
        assert!((mean - res.grid.long_short[f][1]).abs() < 1e-12);
    }
}

use ftsbench_numeric::DenseMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::basket::rank_and_build_basket;
use super::features::{generative_features, network_feature, rv_features, HarFeatures, RvProxy, MONTH};
use super::market::{straddle_pnl_components, SyntheticMarket, TRADING_DAYS};
use super::ridge::{fit_har_ridge_aged, select_lambda, LAMBDA_GRID};
use super::HarError;
use crate::evaluation::ConditionalSampler;
use crate::generators::WINDOW;
use crate::io::fmt_f64;
use crate::rng;

pub const BASKET_SIZES: [usize; 5] = [5, 10, 15, 20, 25];

/// Strategies whose forecasts are ranked against implied vol.
#[derive(Clone, Copy)]
pub enum Forecaster<'a> {
    /// Daily/weekly/monthly lags.
    Har,
    /// Lags plus the correlation-network neighbour feature.
    HarNetwork { threshold: f64 },
    /// Lags plus expected RV over sampled futures.
    HarGenerative { sampler: &'a dyn ConditionalSampler, batch: usize },
    /// True next-day volatility of the simulator.
    Oracle,
    /// Implied vol itself: every ratio is 1.
    NoSignal,
}

impl Forecaster<'_> {
    pub fn name(&self) -> String {
        match self {
            Forecaster::Har => "HAR".into(),
            Forecaster::HarNetwork { .. } => "HAR+Net".into(),
            Forecaster::HarGenerative { sampler, .. } => format!("HAR+{}", sampler.name()),
            Forecaster::Oracle => "Oracle".into(),
            Forecaster::NoSignal => "NoSignal".into(),
        }
    }

    fn uses_har(&self) -> bool {
        !matches!(self, Forecaster::Oracle | Forecaster::NoSignal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestConfig {
    pub sizes: Vec<usize>,
    /// Training rows (days) of each daily refit.
    pub lookback: usize,
    pub half_life: f64,
    /// `None` selects λ from the grid on the days before the first trade.
    pub lambda: Option<f64>,
    pub lambda_grid: Vec<f64>,
    pub proxy: RvProxy,
    pub network_normalize: bool,
    /// Legs whose strike is further than this from the forward are skipped.
    pub max_strike_bps: f64,
    /// Basket sizes whose legs are written to the ledger.
    pub ledger_sizes: Vec<usize>,
    pub seed: u64,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            sizes: BASKET_SIZES.to_vec(),
            lookback: 252,
            half_life: 63.0,
            lambda: None,
            lambda_grid: LAMBDA_GRID.to_vec(),
            proxy: RvProxy::Absolute,
            network_normalize: true,
            max_strike_bps: 50.0,
            ledger_sizes: vec![5],
            seed: 0,
        }
    }
}

/// One traded leg.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerRow {
    pub day: usize,
    pub forecaster: String,
    pub size: usize,
    pub instrument: usize,
    pub weight: f64,
    pub gamma_pnl: f64,
    pub theta_pnl: f64,
}

impl LedgerRow {
    pub fn net(&self) -> f64 {
        self.gamma_pnl + self.theta_pnl
    }
}

/// Mean PnL per day, forecaster rows × basket-size columns.
#[derive(Debug, Clone, PartialEq)]
pub struct PnlGrid {
    pub forecasters: Vec<String>,
    pub sizes: Vec<usize>,
    pub long_short: Vec<Vec<f64>>,
    pub long_only: Vec<Vec<f64>>,
    pub short_only: Vec<Vec<f64>>,
}

impl PnlGrid {
    pub fn to_csv(&self, which: &[Vec<f64>]) -> String {
        let mut out = String::from("forecaster");
        for n in &self.sizes {
            out.push_str(&format!(",{n}"));
        }
        out.push('\n');
        for (name, row) in self.forecasters.iter().zip(which) {
            out.push_str(name);
            for v in row {
                out.push(',');
                out.push_str(&fmt_f64(*v));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct BacktestResult {
    pub grid: PnlGrid,
    /// Daily long/short PnL, `[forecaster][size][day]`.
    pub daily: Vec<Vec<Vec<f64>>>,
    pub days: Vec<usize>,
    /// λ per forecaster (`None` for forecasters without a regression).
    pub lambdas: Vec<Option<f64>>,
    pub ledger: Vec<LedgerRow>,
}

impl BacktestResult {
    pub fn ledger_csv(&self) -> String {
        let mut out = String::from("day,forecaster,size,instrument,side,weight,gamma_pnl,theta_pnl,net_pnl\n");
        for r in &self.ledger {
            let side = if r.weight > 0.0 { "long" } else { "short" };
            out.push_str(&format!(
                "{},{},{},{},{side},{},{},{},{}\n",
                r.day,
                r.forecaster,
                r.size,
                r.instrument,
                fmt_f64(r.weight),
                fmt_f64(r.gamma_pnl),
                fmt_f64(r.theta_pnl),
                fmt_f64(r.net())
            ));
        }
        out
    }
}

/// Two-sided one-sample t-test of mean zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub mean: f64,
    pub t: f64,
    pub p_value: f64,
    pub n: usize,
}

pub fn t_test(samples: &[f64]) -> Option<TTest> {
    let n = samples.len();
    if n < 2 {
        return None;
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if !(var > 0.0) {
        return None;
    }
    let t = mean / (var / n as f64).sqrt();
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).ok()?;
    Some(TTest { mean, t, p_value: 2.0 * (1.0 - dist.cdf(t.abs())), n })
}

/// Features of every instrument on every day in `days`.
fn feature_table(
    returns: &DenseMatrix,
    forecaster: &Forecaster,
    days: std::ops::Range<usize>,
    cfg: &BacktestConfig,
) -> Result<Vec<Vec<Vec<f64>>>, HarError> {
    let n = returns.cols();
    let columns: Vec<Vec<f64>> = (0..n).map(|i| returns.column(i)).collect();
    days.into_par_iter()
        .map(|t| {
            let lags = columns
                .iter()
                .map(|c| rv_features(c, t, cfg.proxy))
                .collect::<Result<Vec<_>, _>>()?;
            let condition = || DenseMatrix::from_fn(n, WINDOW, |i, k| returns[(t + 1 - WINDOW + k, i)]);
            let net = match forecaster {
                Forecaster::HarNetwork { threshold } => {
                    let weekly: Vec<f64> = lags.iter().map(|l| l.1).collect();
                    Some(network_feature(&weekly, &condition(), *threshold, cfg.network_normalize)?)
                }
                _ => None,
            };
            let generative = match forecaster {
                Forecaster::HarGenerative { sampler, batch } => {
                    let seed = rng::split(rng::derive(cfg.seed, &["backtest", "generative"]), t as u64);
                    let paths = sampler
                        .sample(t + 1 - WINDOW, &condition(), WINDOW, *batch, seed)
                        .map_err(|e| HarError::Sampler(e.to_string()))?;
                    Some(generative_features(&paths, n, cfg.proxy))
                }
                _ => None,
            };
            Ok((0..n)
                .map(|i| {
                    HarFeatures {
                        rv_d: lags[i].0,
                        rv_w: lags[i].1,
                        rv_m: lags[i].2,
                        rv_net: net.as_ref().map(|v| v[i]),
                        generative: generative.as_ref().map(|g| g[i]),
                    }
                    .row()
                })
                .collect())
        })
        .collect()
}

/// Pooled regression rows for days `from..to` (feature day `s`, target the
/// daily proxy of day `s+1`), aged relative to `to − 1`.
fn pooled_rows(
    table: &[Vec<Vec<f64>>],
    offset: usize,
    targets: &DenseMatrix,
    from: usize,
    to: usize,
) -> (Vec<Vec<f64>>, Vec<f64>, Vec<usize>) {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    let mut ages = Vec::new();
    for s in from..to {
        for (i, x) in table[s - offset].iter().enumerate() {
            rows.push(x.clone());
            y.push(targets[(s + 1, i)]);
            ages.push(to - 1 - s);
        }
    }
    (rows, y, ages)
}

/// Trades days `first_day..` of `returns` (each day's basket is formed at
/// the close of day `t` and earns the move to `t+1`).
pub fn run_backtest(
    returns: &DenseMatrix,
    market: &SyntheticMarket,
    forecasters: &[Forecaster],
    true_variance: &DenseMatrix,
    first_day: usize,
    cfg: &BacktestConfig,
) -> Result<BacktestResult, HarError> {
    let (t_len, n) = returns.shape();
    if market.instruments() != n || market.days() + 1 != t_len || true_variance.shape() != returns.shape() {
        return Err(HarError::Invalid("returns, market and variance shapes disagree".into()));
    }
    if cfg.sizes.is_empty() || cfg.sizes.contains(&0) || !(cfg.half_life > 0.0) || cfg.lookback == 0 {
        return Err(HarError::Invalid(format!("backtest config {cfg:?}")));
    }
    let needs_har = forecasters.iter().any(|f| f.uses_har());
    // first feature day used by the regressions; features need a full condition window
    let lambda_days = if cfg.lambda.is_none() { 2 * cfg.lookback + 1 } else { cfg.lookback };
    let needed = if needs_har { lambda_days + WINDOW.max(MONTH) - 1 } else { 0 };
    if first_day < needed || first_day + 1 >= t_len {
        return Err(HarError::InsufficientHistory { t: first_day, needed });
    }
    let offset = first_day.saturating_sub(lambda_days);
    let days: Vec<usize> = (first_day..t_len - 1).collect();
    let targets = DenseMatrix::from_fn(t_len, n, |t, i| cfg.proxy.over(&[returns[(t, i)]]));
    let tradable: Option<Vec<Vec<bool>>> = market
        .strike_bps
        .as_ref()
        .map(|m| days.iter().map(|&t| (0..n).map(|i| m[(t, i)] <= cfg.max_strike_bps).collect()).collect());

    let mut grid = PnlGrid {
        forecasters: forecasters.iter().map(|f| f.name()).collect(),
        sizes: cfg.sizes.clone(),
        long_short: Vec::new(),
        long_only: Vec::new(),
        short_only: Vec::new(),
    };
    let mut daily = Vec::new();
    let mut lambdas = Vec::new();
    let mut ledger = Vec::new();

    for forecaster in forecasters {
        let name = forecaster.name();
        let predictions: Vec<Vec<f64>> = if forecaster.uses_har() {
            let table = feature_table(returns, forecaster, offset..t_len - 1, cfg)?;
            let lambda = match cfg.lambda {
                Some(l) => l,
                None => {
                    let split = first_day - cfg.lookback;
                    let (rows, y, ages) = pooled_rows(&table, offset, &targets, split - cfg.lookback - 1, split - 1);
                    let (vr, vy, _) = pooled_rows(&table, offset, &targets, split, first_day - 1);
                    select_lambda(&rows, &y, &ages, &vr, &vy, cfg.half_life, &cfg.lambda_grid)?
                }
            };
            lambdas.push(Some(lambda));
            days.par_iter()
                .map(|&t| {
                    // rows whose target day s+1 is known at the close of t
                    let (rows, y, ages) = pooled_rows(&table, offset, &targets, t - cfg.lookback, t);
                    let model = fit_har_ridge_aged(&rows, &y, &ages, lambda, cfg.half_life)?;
                    Ok(table[t - offset].iter().map(|x| model.predict(x)).collect())
                })
                .collect::<Result<_, HarError>>()?
        } else {
            lambdas.push(None);
            days.iter()
                .map(|&t| match forecaster {
                    Forecaster::Oracle => (0..n).map(|i| (true_variance[(t + 1, i)].max(0.0) * TRADING_DAYS).sqrt()).collect(),
                    _ => market.implied.row(t).to_vec(),
                })
                .collect()
        };

        let mut ls_row = Vec::new();
        let mut long_row = Vec::new();
        let mut short_row = Vec::new();
        let mut per_size = Vec::new();
        for &size in &cfg.sizes {
            let mut ls = Vec::with_capacity(days.len());
            let (mut long_sum, mut short_sum) = (0.0, 0.0);
            for (k, &t) in days.iter().enumerate() {
                let filter = tradable.as_ref().map(|f| f[k].as_slice());
                let basket = rank_and_build_basket(&predictions[k], market.implied.row(t), filter, size).map_err(|e| match e {
                    HarError::TooFewTradable { tradable, needed, .. } => HarError::TooFewTradable { day: t, tradable, needed },
                    other => other,
                })?;
                let (mut long, mut short) = (0.0, 0.0);
                for &(i, w) in basket.long.iter().chain(&basket.short) {
                    let leg = market.straddle(t, i);
                    let (gamma_pnl, theta_pnl) = straddle_pnl_components(&leg, returns[(t + 1, i)], w)?;
                    if w > 0.0 {
                        long += gamma_pnl + theta_pnl;
                    } else {
                        short += gamma_pnl + theta_pnl;
                    }
                    if cfg.ledger_sizes.contains(&size) {
                        ledger.push(LedgerRow { day: t, forecaster: name.clone(), size, instrument: i, weight: w, gamma_pnl, theta_pnl });
                    }
                }
                long_sum += long;
                short_sum += short;
                ls.push(long + short);
            }
            let d = days.len() as f64;
            ls_row.push(ls.iter().sum::<f64>() / d);
            long_row.push(long_sum / d);
            short_row.push(short_sum / d);
            per_size.push(ls);
        }
        grid.long_short.push(ls_row);
        grid.long_only.push(long_row);
        grid.short_only.push(short_row);
        daily.push(per_size);
    }
    Ok(BacktestResult { grid, daily, days, lambdas, ledger })
}

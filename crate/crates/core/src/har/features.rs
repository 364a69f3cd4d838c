use ftsbench_numeric::DenseMatrix;
use serde::{Deserialize, Serialize};

use super::market::TRADING_DAYS;
use super::HarError;
use crate::evaluation::{correlation_values, EvalError};

pub const WEEK: usize = 5;
pub const MONTH: usize = 22;

/// Daily realized-volatility proxy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RvProxy {
    /// `|r|·√252`, averaged over the horizon.
    #[default]
    Absolute,
    /// `√(252·mean r²)` over the horizon.
    Squared,
}

impl RvProxy {
    /// Annualized RV over a slice of daily returns.
    pub fn over(self, returns: &[f64]) -> f64 {
        if returns.is_empty() {
            return 0.0;
        }
        let n = returns.len() as f64;
        match self {
            RvProxy::Absolute => returns.iter().map(|r| r.abs()).sum::<f64>() / n * TRADING_DAYS.sqrt(),
            RvProxy::Squared => (returns.iter().map(|r| r * r).sum::<f64>() / n * TRADING_DAYS).sqrt(),
        }
    }
}

/// One instrument's regressors for one day.
#[derive(Debug, Clone, PartialEq)]
pub struct HarFeatures {
    pub rv_d: f64,
    pub rv_w: f64,
    pub rv_m: f64,
    pub rv_net: Option<f64>,
    /// Expected daily, weekly and monthly RV over generated futures.
    pub generative: Option<[f64; 3]>,
}

impl HarFeatures {
    pub fn row(&self) -> Vec<f64> {
        let mut v = vec![self.rv_d, self.rv_w, self.rv_m];
        v.extend(self.rv_net);
        if let Some(g) = self.generative {
            v.extend_from_slice(&g);
        }
        v
    }
}

/// Daily, weekly and monthly RV ending at (and including) index `t`.
pub fn rv_features(returns: &[f64], t: usize, proxy: RvProxy) -> Result<(f64, f64, f64), HarError> {
    if t + 1 < MONTH || t >= returns.len() {
        return Err(HarError::InsufficientHistory { t, needed: MONTH });
    }
    let tail = |len: usize| &returns[t + 1 - len..=t];
    Ok((proxy.over(tail(1)), proxy.over(tail(WEEK)), proxy.over(tail(MONTH))))
}

/// Neighbour RV on the correlation graph of `condition` (`N × w`): an edge
/// joins instruments whose correlation exceeds `threshold`. With
/// `normalize` the sum is divided by the degree; isolated nodes get 0.
pub fn network_feature(rv: &[f64], condition: &DenseMatrix, threshold: f64, normalize: bool) -> Result<Vec<f64>, HarError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(HarError::InvalidThreshold(threshold));
    }
    let n = condition.rows();
    if rv.len() != n {
        return Err(HarError::Invalid(format!("{} RV values for {n} instruments", rv.len())));
    }
    let corr = correlation_values(condition).map_err(|e| match e {
        EvalError::ZeroVarianceInstrument(i) => HarError::DegenerateWindow(i),
        other => HarError::Invalid(other.to_string()),
    })?;
    let mut sum = vec![0.0; n];
    let mut degree = vec![0usize; n];
    let mut p = 0;
    for i in 1..n {
        for j in 0..i {
            if corr[p] > threshold {
                sum[i] += rv[j];
                sum[j] += rv[i];
                degree[i] += 1;
                degree[j] += 1;
            }
            p += 1;
        }
    }
    Ok((0..n)
        .map(|i| match (degree[i], normalize) {
            (0, _) => 0.0,
            (d, true) => sum[i] / d as f64,
            (_, false) => sum[i],
        })
        .collect())
}

/// Per-instrument expected RV over the first 1, 5 and 22 steps of each
/// generated path (`N × h`), averaged over the batch. Paths shorter than a
/// horizon use all their steps.
pub fn generative_features(paths: &[DenseMatrix], instruments: usize, proxy: RvProxy) -> Vec<[f64; 3]> {
    let mut out = vec![[0.0; 3]; instruments];
    if paths.is_empty() {
        return out;
    }
    for p in paths {
        for (i, acc) in out.iter_mut().enumerate().take(p.rows()) {
            let row = p.row(i);
            for (k, len) in [1, WEEK, MONTH].into_iter().enumerate() {
                acc[k] += proxy.over(&row[..len.min(row.len())]);
            }
        }
    }
    let b = paths.len() as f64;
    for acc in &mut out {
        for v in acc.iter_mut() {
            *v /= b;
        }
    }
    out
}

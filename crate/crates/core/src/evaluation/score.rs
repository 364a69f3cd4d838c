use ftsbench_numeric::DenseMatrix;
use rayon::prelude::*;

use super::{correlation_values, emd1d_squared, moments, rolling_window, ConditionalSampler, EvalError};
use crate::generators::{window_count, WINDOW};
use crate::panel::window_of;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Measure {
    Corr,
    Kurt,
    Mean,
    Skew,
    Std,
    CorrR,
    KurtR,
    MeanR,
    SkewR,
    StdR,
}

/// Row order of the metric tables.
pub const MEASURES: [Measure; 10] = [
    Measure::Corr,
    Measure::Kurt,
    Measure::Mean,
    Measure::Skew,
    Measure::Std,
    Measure::CorrR,
    Measure::KurtR,
    Measure::MeanR,
    Measure::SkewR,
    Measure::StdR,
];

impl Measure {
    pub fn label(self) -> &'static str {
        match self {
            Measure::Corr => "Corr",
            Measure::Kurt => "Kurt",
            Measure::Mean => "Mean",
            Measure::Skew => "Skew",
            Measure::Std => "Std",
            Measure::CorrR => "Corr^R",
            Measure::KurtR => "Kurt^R",
            Measure::MeanR => "Mean^R",
            Measure::SkewR => "Skew^R",
            Measure::StdR => "Std^R",
        }
    }

    pub fn index(self) -> usize {
        MEASURES.iter().position(|&m| m == self).expect("listed")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScoreConfig {
    pub condition: usize,
    pub horizon: usize,
    pub batch: usize,
    /// Score every `stride`-th conditioning window.
    pub stride: usize,
    pub seed: u64,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self { condition: WINDOW, horizon: WINDOW, batch: 50, stride: 1, seed: 0 }
    }
}

/// One model's EMD per measure; `None` where a distribution was empty.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreColumn {
    pub model: String,
    pub values: [Option<f64>; 10],
    pub windows: usize,
    pub failures: usize,
    /// Windows whose generated correlations were skipped for a zero-variance path.
    pub degenerate_paths: usize,
}

impl ScoreColumn {
    /// More than 1% of windows failed to sample.
    pub fn flagged(&self) -> bool {
        self.failures * 100 > self.windows
    }

    pub fn get(&self, m: Measure) -> Option<f64> {
        self.values[m.index()]
    }

    /// Mean of the available measures.
    pub fn mean_value(&self) -> Option<f64> {
        let v: Vec<f64> = self.values.iter().flatten().copied().collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

#[derive(Debug, Default)]
struct Pools {
    values: [Vec<f64>; 10],
    degenerate: usize,
}

impl Pools {
    fn push_moments(&mut self, series: &[f64], rolling: bool) {
        let off = if rolling { 5 } else { 0 };
        match moments(series) {
            Ok(m) => {
                self.values[off + 1].push(m.kurt);
                self.values[off + 2].push(m.mean);
                self.values[off + 3].push(m.skew);
                self.values[off + 4].push(m.std);
            }
            Err(_) => {
                // constant series: mean and zero std are still meaningful
                let n = series.len() as f64;
                self.values[off + 2].push(series.iter().sum::<f64>() / n);
                self.values[off + 4].push(0.0);
            }
        }
    }

    fn push_corr(&mut self, window: &DenseMatrix, rolling: bool) {
        match correlation_values(window) {
            Ok(c) => self.values[if rolling { 5 } else { 0 }].extend(c),
            Err(_) => self.degenerate += 1,
        }
    }

    /// Adds one `N × h` window: full measures plus stride-1 rolling
    /// sub-windows of `⌊h/3⌋` steps.
    fn add(&mut self, window: &DenseMatrix) {
        let (n, h) = window.shape();
        let w = rolling_window(h);
        for i in 0..n {
            let row = window.row(i);
            self.push_moments(row, false);
            if w >= 1 {
                for sub in row.windows(w) {
                    self.push_moments(sub, true);
                }
            }
        }
        if n >= 2 {
            self.push_corr(window, false);
            if w >= 3 {
                for s in 0..=h - w {
                    let sub = DenseMatrix::from_fn(n, w, |i, t| window[(i, s + t)]);
                    self.push_corr(&sub, true);
                }
            }
        }
    }

    fn extend(&mut self, other: Pools) {
        for (a, b) in self.values.iter_mut().zip(other.values) {
            a.extend(b);
        }
        self.degenerate += other.degenerate;
    }
}

/// Scores a sampler on a `T × N` panel: per conditioning window draws a
/// generated batch, pools moment and correlation values of generated and
/// realized targets over all windows, and reports the EMD per measure.
pub fn score_model(
    returns: &DenseMatrix,
    sampler: &dyn ConditionalSampler,
    config: &ScoreConfig,
) -> Result<ScoreColumn, EvalError> {
    let count = window_count(returns.rows(), config.condition, config.horizon);
    if count == 0 {
        return Err(EvalError::TooShort { len: returns.rows(), needed: config.condition + config.horizon });
    }
    let starts: Vec<usize> = (0..count).step_by(config.stride.max(1)).collect();
    let per_window: Vec<Option<(Pools, Pools)>> = starts
        .par_iter()
        .map(|&s| {
            let condition = window_of(returns, s, config.condition);
            let target = window_of(returns, s + config.condition, config.horizon);
            let seed = rng::split(config.seed, s as u64);
            let batch = sampler.sample(s, &condition, config.horizon, config.batch, seed).ok()?;
            if batch.iter().any(|p| p.shape() != target.shape() || !p.is_finite()) {
                return None;
            }
            let mut real = Pools::default();
            real.add(&target);
            let mut generated = Pools::default();
            for path in &batch {
                generated.add(path);
            }
            Some((real, generated))
        })
        .collect();
    let mut real = Pools::default();
    let mut generated = Pools::default();
    let mut failures = 0;
    for w in per_window {
        match w {
            Some((r, g)) => {
                real.extend(r);
                generated.extend(g);
            }
            None => failures += 1,
        }
    }
    let mut values = [None; 10];
    for (k, v) in values.iter_mut().enumerate() {
        if !real.values[k].is_empty() && !generated.values[k].is_empty() {
            *v = Some(emd1d_squared(&real.values[k], &generated.values[k]));
        }
    }
    Ok(ScoreColumn {
        model: sampler.name().to_string(),
        values,
        windows: starts.len(),
        failures,
        degenerate_paths: generated.degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::{ConstantSampler, ReplaySampler};
    use crate::generators::{build_dataset, presets};

    fn panel() -> DenseMatrix {
        build_dataset(&presets::ngarch_plus(4, 400, 2, 3)).unwrap().returns
    }

    #[test]
    fn replay_oracle_scores_zero() {
        let r = panel();
        let cfg = ScoreConfig { batch: 3, stride: 7, ..ScoreConfig::default() };
        let col = score_model(&r, &ReplaySampler::new(&r), &cfg).unwrap();
        assert_eq!(col.values, [Some(0.0); 10]);
        assert_eq!(col.failures, 0);
    }

    #[test]
    fn constant_sampler_misses_volatility() {
        let r = panel();
        let cfg = ScoreConfig { batch: 2, stride: 20, ..ScoreConfig::default() };
        let col = score_model(&r, &ConstantSampler { value: 0.0 }, &cfg).unwrap();
        assert!(col.get(Measure::Std).unwrap() > 0.0);
        assert_eq!(col.get(Measure::Corr), None);
    }

    #[test]
    fn failures_are_counted_and_flagged() {
        let r = panel();
        struct Failing;
        impl ConditionalSampler for Failing {
            fn name(&self) -> &str {
                "failing"
            }
            fn sample(&self, start: usize, c: &DenseMatrix, h: usize, b: usize, _: u64) -> Result<Vec<DenseMatrix>, crate::evaluation::SamplerError> {
                if start % 2 == 0 {
                    Err(crate::evaluation::SamplerError("boom".into()))
                } else {
                    Ok(vec![DenseMatrix::filled(c.rows(), h, 0.01); b])
                }
            }
        }
        let col = score_model(&r, &Failing, &ScoreConfig { batch: 1, stride: 1, ..ScoreConfig::default() }).unwrap();
        assert_eq!(col.windows, 321);
        assert_eq!(col.failures, 161);
        assert!(col.flagged());
    }

    #[test]
    fn deterministic() {
        let r = panel();
        let cfg = ScoreConfig { batch: 2, stride: 25, seed: 9, ..ScoreConfig::default() };
        let s = ConstantSampler { value: 0.001 };
        assert_eq!(score_model(&r, &s, &cfg).unwrap(), score_model(&r, &s, &cfg).unwrap());
    }
}

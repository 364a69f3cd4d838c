use std::collections::VecDeque;

use ftsbench_numeric::DenseMatrix;

use super::{GenError, RegimeConfig};

pub const LOW: u8 = 0;
pub const HIGH: u8 = 1;

/// Cross-sectional mean of per-instrument rolling standard deviations.
#[derive(Debug, Clone)]
pub struct RollingVolatility {
    window: usize,
    history: VecDeque<Vec<f64>>,
}

impl RollingVolatility {
    pub fn new(window: usize) -> Self {
        Self { window, history: VecDeque::with_capacity(window + 1) }
    }

    pub fn push(&mut self, row: &[f64]) {
        self.history.push_back(row.to_vec());
        if self.history.len() > self.window {
            self.history.pop_front();
        }
    }

    /// `None` until a full window has been observed.
    pub fn measure(&self) -> Option<f64> {
        if self.history.len() < self.window {
            return None;
        }
        let n = self.history[0].len();
        let w = self.window as f64;
        let total: f64 = (0..n)
            .map(|i| {
                let mean = self.history.iter().map(|r| r[i]).sum::<f64>() / w;
                (self.history.iter().map(|r| (r[i] - mean).powi(2)).sum::<f64>() / w).sqrt()
            })
            .sum();
        Some(total / n as f64)
    }
}

/// Linear-interpolation percentile of unsorted values (`p` in 0–100).
pub fn percentile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = (p / 100.0).clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

/// Stateful trigger: label for the next step from the path so far.
#[derive(Debug, Clone)]
pub struct RegimeTracker {
    threshold: f64,
    rolling: RollingVolatility,
}

impl RegimeTracker {
    /// Calibrates the threshold on the burn-in rows (which are also used to
    /// prime the rolling window).
    pub fn calibrate(config: &RegimeConfig, burn_in: &DenseMatrix) -> Result<Self, GenError> {
        if burn_in.rows() < config.window {
            return Err(GenError::BurnInTooShort { burn_in: burn_in.rows(), window: config.window });
        }
        let mut rolling = RollingVolatility::new(config.window);
        let mut measures = Vec::with_capacity(burn_in.rows());
        for t in 0..burn_in.rows() {
            rolling.push(burn_in.row(t));
            if let Some(m) = rolling.measure() {
                measures.push(m);
            }
        }
        let threshold = if config.percentile >= 100.0 {
            f64::INFINITY
        } else if config.percentile <= 0.0 {
            f64::NEG_INFINITY
        } else {
            percentile(&measures, config.percentile).expect("at least one full window")
        };
        Ok(Self { threshold, rolling })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Regime that applies to the next step's shocks.
    pub fn next_label(&self) -> u8 {
        match self.rolling.measure() {
            Some(m) if m > self.threshold => HIGH,
            Some(_) => LOW,
            None if self.threshold == f64::NEG_INFINITY => HIGH,
            None => LOW,
        }
    }

    pub fn observe(&mut self, row: &[f64]) {
        self.rolling.push(row);
    }
}

/// Recomputes regime labels from a realized path: rows `0..burn_in` calibrate,
/// labels are returned for rows `burn_in..`.
pub fn apply_regimes(
    returns: &DenseMatrix,
    burn_in: usize,
    config: &RegimeConfig,
) -> Result<Vec<u8>, GenError> {
    if burn_in > returns.rows() {
        return Err(GenError::BurnInTooShort { burn_in: returns.rows(), window: burn_in });
    }
    let head = DenseMatrix::from_fn(burn_in, returns.cols(), |r, c| returns[(r, c)]);
    let mut tracker = RegimeTracker::calibrate(config, &head)?;
    let mut labels = Vec::with_capacity(returns.rows() - burn_in);
    for t in burn_in..returns.rows() {
        labels.push(tracker.next_label());
        tracker.observe(returns.row(t));
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::BlockCorrelationSpec;

    fn cfg(percentile: f64) -> RegimeConfig {
        let blocks = BlockCorrelationSpec { block_sizes: vec![2], within: vec![0.2], across: 0.0 };
        RegimeConfig { window: 5, percentile, low: blocks.clone(), high: BlockCorrelationSpec { within: vec![0.8], ..blocks } }
    }

    fn path() -> DenseMatrix {
        DenseMatrix::from_fn(60, 2, |t, i| {
            // alternating calm path, one spike inside the burn-in, burst from row 31
            let scale = if t > 30 { 10.0 } else { 1.0 };
            let sign = if (t + i) % 2 == 0 { 1.0 } else { -1.0 };
            let spike = if t == 10 { 5.0 } else { 1.0 };
            scale * spike * sign * 0.01
        })
    }

    #[test]
    fn percentile_edges() {
        let p = path();
        assert!(apply_regimes(&p, 20, &cfg(100.0)).unwrap().iter().all(|&l| l == LOW));
        assert!(apply_regimes(&p, 20, &cfg(0.0)).unwrap().iter().all(|&l| l == HIGH));
    }

    #[test]
    fn volatility_burst_triggers_high() {
        let labels = apply_regimes(&path(), 20, &cfg(90.0)).unwrap();
        // burst starts at row 31 => label index 11; trigger within one window
        assert_eq!(labels[..11].iter().filter(|&&l| l == HIGH).count(), 0);
        assert!(labels[11..11 + 6].contains(&HIGH));
        assert!(labels[20..].iter().all(|&l| l == HIGH));
    }

    #[test]
    fn short_burn_in_rejected() {
        assert!(matches!(apply_regimes(&path(), 3, &cfg(50.0)), Err(GenError::BurnInTooShort { .. })));
    }

    #[test]
    fn percentile_interpolates() {
        assert_eq!(percentile(&[3.0, 1.0, 2.0, 4.0], 50.0), Some(2.5));
        assert_eq!(percentile(&[5.0], 90.0), Some(5.0));
    }
}

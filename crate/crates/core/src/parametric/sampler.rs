use ftsbench_numeric::DenseMatrix;

use super::{DccFit, RollingFit};
use crate::evaluation::{ConditionalSampler, SamplerError};

/// A single DCC fit used for every conditioning window.
#[derive(Debug, Clone)]
pub struct DccSampler {
    pub name: String,
    pub fit: DccFit,
}

impl ConditionalSampler for DccSampler {
    fn name(&self) -> &str {
        &self.name
    }

    fn sample(&self, _start: usize, condition: &DenseMatrix, horizon: usize, batch: usize, seed: u64) -> Result<Vec<DenseMatrix>, SamplerError> {
        if condition.rows() != self.fit.assets.len() {
            return Err(SamplerError(format!("fit has {} assets, condition {}", self.fit.assets.len(), condition.rows())));
        }
        Ok(self.fit.simulate_from_fit(condition, horizon, batch, seed))
    }
}

/// Per-window DCC fits; window `start` uses the latest fit whose window
/// starts at or before it.
#[derive(Debug, Clone)]
pub struct RollingDccSampler {
    pub name: String,
    pub fits: Vec<RollingFit>,
}

impl RollingDccSampler {
    pub fn new(name: &str, mut fits: Vec<RollingFit>) -> Result<Self, SamplerError> {
        if fits.is_empty() {
            return Err(SamplerError("no rolling fits".into()));
        }
        fits.sort_by_key(|f| f.start);
        Ok(Self { name: name.to_string(), fits })
    }

    pub fn fit_for(&self, start: usize) -> &DccFit {
        let idx = self.fits.partition_point(|f| f.start <= start);
        &self.fits[idx.saturating_sub(1)].fit
    }
}

impl ConditionalSampler for RollingDccSampler {
    fn name(&self) -> &str {
        &self.name
    }

    fn sample(&self, start: usize, condition: &DenseMatrix, horizon: usize, batch: usize, seed: u64) -> Result<Vec<DenseMatrix>, SamplerError> {
        Ok(self.fit_for(start).simulate_from_fit(condition, horizon, batch, seed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parametric::{fit_dcc, simulate_dcc, Garch11Params, InnovationLaw, LawKind};

    #[test]
    fn rolling_sampler_picks_latest_fit() {
        let qbar = DenseMatrix::from_rows(&[vec![1.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let leg = Garch11Params { mu: 0.0, omega: 1e-5, alpha: 0.08, beta: 0.9 };
        let data = simulate_dcc(&[leg, leg], 0.05, 0.9, &qbar, InnovationLaw::Normal, 600, 1);
        let fit = fit_dcc(&data, LawKind::Normal).unwrap();
        let other = DccFit { a: 0.01, ..fit.clone() };
        let s = RollingDccSampler::new(
            "r",
            vec![RollingFit { start: 10, fit: other, carried: false }, RollingFit { start: 0, fit: fit.clone(), carried: false }],
        )
        .unwrap();
        assert_eq!(s.fit_for(3).a, fit.a);
        assert_eq!(s.fit_for(10).a, 0.01);
        assert_eq!(s.fit_for(500).a, 0.01);
        let cond = DenseMatrix::from_fn(2, 40, |i, t| data[(t, i)]);
        let a = s.sample(0, &cond, 40, 3, 9).unwrap();
        assert_eq!(a.len(), 3);
        assert_eq!(a[0].shape(), (2, 40));
        let single = DccSampler { name: "d".into(), fit };
        assert_eq!(single.sample(0, &cond, 40, 3, 9).unwrap(), a);
    }
}

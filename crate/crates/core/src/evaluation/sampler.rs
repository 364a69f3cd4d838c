use ftsbench_numeric::DenseMatrix;
use thiserror::Error;

use crate::panel::window_of;

#[derive(Debug, Clone, Error, PartialEq)]
#[error("{0}")]
pub struct SamplerError(pub String);

/// Anything that can draw conditional futures for a window of a panel.
pub trait ConditionalSampler: Sync {
    fn name(&self) -> &str;

    /// Draws `batch` paths of `horizon` steps, each `N × horizon`, given the
    /// `N × len` condition that starts at row `start` of the scored panel.
    fn sample(
        &self,
        start: usize,
        condition: &DenseMatrix,
        horizon: usize,
        batch: usize,
        seed: u64,
    ) -> Result<Vec<DenseMatrix>, SamplerError>;
}

/// Oracle that returns the realized continuation of the condition.
pub struct ReplaySampler<'a> {
    returns: &'a DenseMatrix,
}

impl<'a> ReplaySampler<'a> {
    /// `returns` is the `T × N` panel being scored.
    pub fn new(returns: &'a DenseMatrix) -> Self {
        Self { returns }
    }
}

impl ConditionalSampler for ReplaySampler<'_> {
    fn name(&self) -> &str {
        "replay"
    }

    fn sample(&self, start: usize, condition: &DenseMatrix, horizon: usize, batch: usize, _seed: u64) -> Result<Vec<DenseMatrix>, SamplerError> {
        let from = start + condition.cols();
        if from + horizon > self.returns.rows() {
            return Err(SamplerError(format!("no realized data after row {from}")));
        }
        let target = window_of(self.returns, from, horizon);
        Ok(vec![target; batch])
    }
}

/// Emits a constant value at every step.
pub struct ConstantSampler {
    pub value: f64,
}

impl ConditionalSampler for ConstantSampler {
    fn name(&self) -> &str {
        "constant"
    }

    fn sample(&self, _start: usize, condition: &DenseMatrix, horizon: usize, batch: usize, _seed: u64) -> Result<Vec<DenseMatrix>, SamplerError> {
        Ok(vec![DenseMatrix::filled(condition.rows(), horizon, self.value); batch])
    }
}

//! Adam with bias correction.

use crate::{DenseMatrix, NumericError};

#[derive(Debug, Clone, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    first: Vec<DenseMatrix>,
    second: Vec<DenseMatrix>,
    step: u64,
}

impl AdamState {
    /// Zero accumulators shaped like `params`.
    pub fn new(config: AdamConfig, params: &[DenseMatrix]) -> Self {
        let zeros: Vec<DenseMatrix> = params
            .iter()
            .map(|p| DenseMatrix::zeros(p.rows(), p.cols()))
            .collect();
        Self {
            config,
            first: zeros.clone(),
            second: zeros,
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update in place.
    pub fn step(&mut self, params: &mut [DenseMatrix], grads: &[DenseMatrix]) -> Result<(), NumericError> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(NumericError::DimensionMismatch {
                context: "AdamState::step",
                expected: self.first.len(),
                found: grads.len().min(params.len()),
            });
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first) {
            p.check_same_shape(g, "AdamState::step")?;
            m.check_same_shape(g, "AdamState::step")?;
            if !g.is_finite() {
                return Err(NumericError::NonFinite("Adam gradient"));
            }
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            let ps = p.as_mut_slice();
            let (ms, vs) = (m.as_mut_slice(), v.as_mut_slice());
            for (k, &gk) in g.as_slice().iter().enumerate() {
                ms[k] = beta1 * ms[k] + (1.0 - beta1) * gk;
                vs[k] = beta2 * vs[k] + (1.0 - beta2) * gk * gk;
                let m_hat = ms[k] / bc1;
                let v_hat = vs[k] / bc2;
                ps[k] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

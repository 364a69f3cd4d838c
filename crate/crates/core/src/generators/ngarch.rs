use super::{GenError, NGarchParams};

/// Recursion state carried between steps (and across stitched segments).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NGarchState {
    pub last_innovation: f64,
    pub last_variance: f64,
}

impl NGarchState {
    pub fn initial(params: &NGarchParams) -> Self {
        Self {
            last_innovation: 0.0,
            last_variance: params.sigma0 * params.sigma0,
        }
    }

    /// Advances one step with standard-normal shock `z`; returns `(r, σ²)`.
    #[inline]
    pub fn step(&mut self, p: &NGarchParams, z: f64) -> (f64, f64) {
        let lagged_sigma = self.last_variance.sqrt();
        let lever = self.last_innovation - p.gamma * lagged_sigma;
        let variance = p.omega + p.beta * lever * lever + p.alpha * self.last_variance;
        let eps = variance.sqrt() * z;
        self.last_innovation = eps;
        self.last_variance = variance;
        (p.mu + eps, variance)
    }
}

/// Simulates `steps` returns from standard-normal `shocks`.
pub fn simulate_ngarch(
    params: &NGarchParams,
    steps: usize,
    shocks: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), GenError> {
    params.validate()?;
    if shocks.len() != steps {
        return Err(GenError::ShockLength { expected: steps, found: shocks.len() });
    }
    let mut state = NGarchState::initial(params);
    Ok(shocks.iter().map(|&z| state.step(params, z)).unzip())
}

use super::{GenError, HestonParams};

/// Applies the price–variance correlation to two independent normals.
#[inline]
pub fn correlate_pair(rho: f64, z_price: f64, z_indep: f64) -> (f64, f64) {
    (z_price, rho * z_price + (1.0 - rho * rho).max(0.0).sqrt() * z_indep)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HestonState {
    pub variance: f64,
}

impl HestonState {
    pub fn initial(params: &HestonParams) -> Self {
        Self { variance: params.v0 }
    }

    /// Euler step with full truncation. Returns the log return and the
    /// truncated variance `V⁺` that drove it.
    #[inline]
    pub fn step(&mut self, p: &HestonParams, z_price: f64, z_var: f64) -> (f64, f64) {
        let v_plus = self.variance.max(0.0);
        let diffusion = (v_plus * p.dt).sqrt();
        let log_return = (p.mu - 0.5 * v_plus) * p.dt + diffusion * z_price;
        self.variance += p.kappa * (p.theta - v_plus) * p.dt + p.sigma_v * diffusion * z_var;
        (log_return, v_plus)
    }
}

/// Simulates log returns and the (truncated) variance path from correlated
/// shock pairs `(z_price, z_variance)`.
pub fn simulate_heston(
    params: &HestonParams,
    steps: usize,
    shocks: &[(f64, f64)],
) -> Result<(Vec<f64>, Vec<f64>), GenError> {
    params.validate()?;
    if shocks.len() != steps {
        return Err(GenError::ShockLength { expected: steps, found: shocks.len() });
    }
    let mut state = HestonState::initial(params);
    Ok(shocks.iter().map(|&(zs, zv)| state.step(params, zs, zv)).unzip())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand_distr::{Distribution, StandardNormal};

    fn base() -> HestonParams {
        HestonParams { mu: 0.0, kappa: 2.0, theta: 0.04, sigma_v: 0.3, rho: -0.7, v0: 0.04, s0: 100.0, dt: 1.0 / 252.0 }
    }

    #[test]
    fn degenerate_cir_holds_theta() {
        let p = HestonParams { sigma_v: 0.0, ..base() };
        let shocks = vec![(0.3, -1.2); 300];
        let (_, v) = simulate_heston(&p, 300, &shocks).unwrap();
        assert!(v.iter().all(|&x| (x - 0.04).abs() < 1e-15));
    }

    #[test]
    fn deterministic_variance_follows_ode() {
        let p = HestonParams { sigma_v: 0.0, v0: 0.09, ..base() };
        let n = 504;
        let (_, v) = simulate_heston(&p, n, &vec![(0.0, 0.0); n]).unwrap();
        for (t, &vt) in v.iter().enumerate() {
            let exact = p.theta + (p.v0 - p.theta) * (-p.kappa * t as f64 * p.dt).exp();
            // Euler error is O(dt)
            assert!((vt - exact).abs() < (p.v0 - p.theta) * p.kappa * p.dt, "t={t}");
        }
    }

    #[test]
    fn full_truncation_keeps_variance_nonnegative() {
        let p = HestonParams { sigma_v: 1.5, kappa: 0.5, ..base() };
        let mut r = rng::stream(4);
        let shocks: Vec<_> = (0..20_000)
            .map(|_| correlate_pair(p.rho, StandardNormal.sample(&mut r), StandardNormal.sample(&mut r)))
            .collect();
        let (ret, v) = simulate_heston(&p, shocks.len(), &shocks).unwrap();
        assert!(v.iter().all(|&x| x >= 0.0));
        assert!(ret.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn martingale_terminal_ratio() {
        let p = base();
        let paths = 50_000;
        let mut r = rng::stream(2024);
        let mut ratios = Vec::with_capacity(paths);
        for _ in 0..paths {
            let mut state = HestonState::initial(&p);
            let mut log_s = 0.0;
            for _ in 0..252 {
                let (zs, zv) = correlate_pair(p.rho, StandardNormal.sample(&mut r), StandardNormal.sample(&mut r));
                log_s += state.step(&p, zs, zv).0;
            }
            ratios.push(f64::exp(log_s));
        }
        let mean = ratios.iter().sum::<f64>() / paths as f64;
        let sd = (ratios.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (paths - 1) as f64).sqrt();
        let se = sd / (paths as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se, "mean {mean} se {se}");
    }
}

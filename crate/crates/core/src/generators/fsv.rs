use ftsbench_numeric::DenseMatrix;
use rand_distr::{Distribution, StandardNormal};

use super::{FsvForwardParams, GenError};
use crate::rng;

/// Forward simulation of the factor stochastic volatility model.
///
/// Log-variances start from their stationary law. Returns the `steps × n`
/// returns and the `steps × n` conditional variances `Λ diag(e^{hᵛ}) Λᵀ + e^{hᵘ}`
/// (diagonal only).
pub fn simulate_fsv_forward(
    params: &FsvForwardParams,
    steps: usize,
    seed: u64,
) -> Result<(DenseMatrix, DenseMatrix), GenError> {
    params.validate()?;
    let mut r = rng::stream(seed);
    let mut h: Vec<f64> = params
        .log_variances
        .iter()
        .map(|law| {
            let sd = law.innovation_std / (1.0 - law.persistence.powi(2)).sqrt();
            let z: f64 = StandardNormal.sample(&mut r);
            law.mean + sd * z
        })
        .collect();
    let mut state = FsvState { h: &mut h };
    let n = params.instruments();
    let mut returns = DenseMatrix::zeros(steps, n);
    let mut variance = DenseMatrix::zeros(steps, n);
    for t in 0..steps {
        state.step(params, &mut r, returns.row_mut(t), variance.row_mut(t));
    }
    Ok((returns, variance))
}

pub(crate) struct FsvState<'a> {
    pub h: &'a mut Vec<f64>,
}

impl FsvState<'_> {
    pub fn step<R: rand::Rng>(&mut self, p: &FsvForwardParams, r: &mut R, out: &mut [f64], var_out: &mut [f64]) {
        let (n, m) = (p.instruments(), p.factors());
        for (h, law) in self.h.iter_mut().zip(&p.log_variances) {
            let eta: f64 = StandardNormal.sample(r);
            *h = law.mean + law.persistence * (*h - law.mean) + law.innovation_std * eta;
        }
        let factors: Vec<f64> = (0..m)
            .map(|k| {
                let psi: f64 = StandardNormal.sample(r);
                (0.5 * self.h[n + k]).exp() * psi
            })
            .collect();
        for i in 0..n {
            let eps: f64 = StandardNormal.sample(r);
            let common: f64 = (0..m).map(|k| p.loadings[i][k] * factors[k]).sum();
            out[i] = common + (0.5 * self.h[i]).exp() * eps;
            var_out[i] = (0..m)
                .map(|k| p.loadings[i][k].powi(2) * self.h[n + k].exp())
                .sum::<f64>()
                + self.h[i].exp();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::LogVarianceAr1;

    fn law(mean: f64, persistence: f64, innovation_std: f64) -> LogVarianceAr1 {
        LogVarianceAr1 { mean, persistence, innovation_std }
    }

    fn sample_cov(x: &DenseMatrix) -> DenseMatrix {
        let (t, n) = x.shape();
        let means: Vec<f64> = x.column_sums().iter().map(|s| s / t as f64).collect();
        DenseMatrix::from_fn(n, n, |i, j| {
            (0..t).map(|k| (x[(k, i)] - means[i]) * (x[(k, j)] - means[j])).sum::<f64>() / t as f64
        })
    }

    #[test]
    fn no_factors_no_noise_is_diagonal_gaussian() {
        let p = FsvForwardParams {
            loadings: vec![vec![0.0]; 3],
            triangular_loadings: false,
            log_variances: vec![law(-2.0, 0.5, 0.0), law(-1.0, 0.5, 0.0), law(0.0, 0.5, 0.0), law(0.0, 0.5, 0.0)],
        };
        let (r, v) = simulate_fsv_forward(&p, 50_000, 3).unwrap();
        let c = sample_cov(&r);
        for (i, m) in [-2.0f64, -1.0, 0.0].iter().enumerate() {
            assert!((v[(10, i)] - m.exp()).abs() < 1e-12);
            assert!((c[(i, i)] / m.exp() - 1.0).abs() < 0.03);
        }
        assert!(c[(0, 1)].abs() < 0.01);
    }

    #[test]
    fn single_factor_without_idiosyncratic_noise_is_perfectly_correlated() {
        let p = FsvForwardParams {
            loadings: vec![vec![1.0]; 3],
            triangular_loadings: true,
            log_variances: vec![law(-40.0, 0.0, 0.0), law(-40.0, 0.0, 0.0), law(-40.0, 0.0, 0.0), law(-3.0, 0.9, 0.2)],
        };
        let (r, _) = simulate_fsv_forward(&p, 2_000, 5).unwrap();
        let c = sample_cov(&r);
        let corr = c[(0, 2)] / (c[(0, 0)] * c[(2, 2)]).sqrt();
        assert!(corr > 0.999_999);
    }

    #[test]
    fn covariance_matches_lognormal_moments() {
        let loadings = vec![vec![0.8], vec![0.5], vec![-0.3]];
        let laws = vec![law(-1.0, 0.9, 0.2), law(-1.2, 0.8, 0.3), law(-0.8, 0.95, 0.1), law(-0.5, 0.95, 0.2)];
        let p = FsvForwardParams { loadings: loadings.clone(), triangular_loadings: true, log_variances: laws.clone() };
        let (r, _) = simulate_fsv_forward(&p, 100_000, 17).unwrap();
        let c = sample_cov(&r);
        let ef = laws[3].stationary_mean_exp();
        for i in 0..3 {
            for j in 0..3 {
                let mut expect = loadings[i][0] * loadings[j][0] * ef;
                if i == j {
                    expect += laws[i].stationary_mean_exp();
                }
                assert!(
                    (c[(i, j)] - expect).abs() <= 0.10 * expect.abs(),
                    "({i},{j}): {} vs {expect}",
                    c[(i, j)]
                );
            }
        }
    }

    #[test]
    fn rejects_too_many_factors() {
        let p = FsvForwardParams {
            loadings: vec![vec![1.0, 0.0]; 2],
            triangular_loadings: false,
            log_variances: vec![law(0.0, 0.5, 0.1); 4],
        };
        assert!(simulate_fsv_forward(&p, 10, 0).is_err());
    }
}

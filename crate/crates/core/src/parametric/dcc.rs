use ftsbench_numeric::{cholesky, cholesky_semidefinite, forward_substitute, minimize_bfgs, BfgsOptions, DenseMatrix};
use rayon::prelude::*;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

use super::*;
use crate::rng;

/// Two-stage DCC fit over per-asset GARCH(1,1) models.
#[derive(Debug, Clone, PartialEq)]
pub struct DccFit {
    pub assets: Vec<Garch11Fit>,
    pub a: f64,
    pub b: f64,
    /// Unconditional covariance of the standardized residuals.
    pub qbar: DenseMatrix,
    pub law: InnovationLaw,
    /// Stage-2 correlation log-likelihood.
    pub log_likelihood: f64,
    /// `Q` for the step after the sample.
    pub last_q: DenseMatrix,
    pub converged: bool,
    /// `a + b` pressed against the stationarity bound.
    pub at_boundary: bool,
}

/// Filter state carried between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct DccState {
    pub variance: Vec<f64>,
    pub q: DenseMatrix,
}

pub(crate) fn normalize(q: &DenseMatrix) -> DenseMatrix {
    let n = q.rows();
    DenseMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            q[(i, j)] / (q[(i, i)] * q[(j, j)]).sqrt()
        }
    })
}

fn q_update(q: &mut DenseMatrix, qbar: &DenseMatrix, a: f64, b: f64, e: &[f64]) {
    let n = e.len();
    let c = 1.0 - a - b;
    for i in 0..n {
        for j in 0..n {
            q[(i, j)] = c * qbar[(i, j)] + a * e[i] * e[j] + b * q[(i, j)];
        }
    }
}

/// Correlation part of the log-likelihood (the variance part belongs to stage 1).
fn correlation_loglik(e: &DenseMatrix, qbar: &DenseMatrix, a: f64, b: f64, nu: Option<f64>) -> (f64, DenseMatrix) {
    let (t, n) = e.shape();
    let nf = n as f64;
    let mut q = qbar.clone();
    let mut ll = 0.0;
    let t_const = nu.map(|nu| {
        ln_gamma(0.5 * (nu + nf)) - ln_gamma(0.5 * nu) - 0.5 * nf * (std::f64::consts::PI * (nu - 2.0)).ln()
    });
    for step in 0..t {
        let row = e.row(step);
        let r = normalize(&q);
        let l = match cholesky(&r) {
            Ok(l) => l,
            Err(_) => return (f64::NEG_INFINITY, q),
        };
        let y = forward_substitute(&l, row);
        let quad: f64 = y.iter().map(|v| v * v).sum();
        let log_det = 2.0 * (0..n).map(|i| l[(i, i)].ln()).sum::<f64>();
        ll += match (nu, t_const) {
            (Some(nu), Some(k)) => k - 0.5 * log_det - 0.5 * (nu + nf) * (quad / (nu - 2.0)).ln_1p(),
            _ => -0.5 * (log_det + quad - row.iter().map(|v| v * v).sum::<f64>()),
        };
        q_update(&mut q, qbar, a, b, row);
    }
    (ll, q)
}

/// Standardized residuals `(r − μ)/σ` under each asset's fit, with `σ²_0`
/// the sample variance as in estimation.
fn standardize(returns: &DenseMatrix, assets: &[Garch11Fit]) -> DenseMatrix {
    let (t, n) = returns.shape();
    let mut e = DenseMatrix::zeros(t, n);
    for (i, fit) in assets.iter().enumerate() {
        let col = returns.column(i);
        let m = col.iter().sum::<f64>() / t as f64;
        let mut var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / t as f64;
        for (step, &r) in col.iter().enumerate() {
            let eps = r - fit.params.mu;
            e[(step, i)] = eps / var.sqrt();
            var = fit.params.next_variance(var, eps);
        }
    }
    e
}

/// Two-stage estimation: per-asset GARCH, then `(a, b)` (and ν) by
/// maximizing the correlation likelihood with `Q̄` fixed at its sample value.
pub fn fit_dcc(returns: &DenseMatrix, law: LawKind) -> Result<DccFit, FitError> {
    let (t, n) = returns.shape();
    if n < 2 {
        return Err(FitError::NeedMultivariate);
    }
    if t < MIN_OBSERVATIONS {
        return Err(FitError::TooShort { found: t, needed: MIN_OBSERVATIONS });
    }
    // stage 1 is Gaussian quasi-likelihood; ν is estimated jointly in stage 2
    let assets = (0..n)
        .into_par_iter()
        .map(|i| {
            fit_garch11(&returns.column(i), LawKind::Normal)
                .map_err(|e| FitError::Stage1 { asset: i, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let e = standardize(returns, &assets);
    let qbar = e.t_matmul(&e).expect("square").scale(1.0 / t as f64);
    let student = law == LawKind::StudentT;
    let decode = |x: &[f64]| {
        let (a, b) = split_persistence(x[0], x[1]);
        (a, b, student.then(|| nu_from(x[2])))
    };
    let objective = |x: &[f64]| {
        let (a, b, nu) = decode(x);
        let ll = correlation_loglik(&e, &qbar, a, b, nu).0;
        if ll.is_finite() {
            -ll / t as f64
        } else {
            f64::INFINITY
        }
    };
    let opts = BfgsOptions { max_iterations: 200, gradient_tol: 1e-7, ..BfgsOptions::default() };
    let mut best: Option<ftsbench_numeric::BfgsResult> = None;
    for (a, b) in [(0.05, 0.90), (0.02, 0.95), (0.10, 0.80), (0.01, 0.50), (0.20, 0.30)] {
        let (x, y) = join_persistence(a, b);
        let mut x0 = vec![x, y];
        if student {
            x0.push(nu_to(8.0));
        }
        let res = minimize_bfgs(objective, &x0, &opts);
        if res.value.is_finite() && best.as_ref().is_none_or(|b| res.value < b.value) {
            best = Some(res);
        }
    }
    let best = best.ok_or_else(|| FitError::Invalid("correlation likelihood is not finite at any start".into()))?;
    let (a, b, nu) = decode(&best.x);
    let (log_likelihood, last_q) = correlation_loglik(&e, &qbar, a, b, nu);
    Ok(DccFit {
        assets,
        a,
        b,
        qbar,
        law: nu.map_or(InnovationLaw::Normal, law_from_nu),
        log_likelihood,
        last_q,
        converged: best.converged,
        at_boundary: a + b > 0.999,
    })
}

impl DccFit {
    pub fn instruments(&self) -> usize {
        self.assets.len()
    }

    /// State at the start of an unseen sample: unconditional variances and `Q̄`.
    pub fn unconditional_state(&self) -> DccState {
        DccState {
            variance: self.assets.iter().map(|f| f.params.unconditional_variance()).collect(),
            q: self.qbar.clone(),
        }
    }

    /// Runs observed returns (`T × N`) through the recursions.
    pub fn filter(&self, state: &mut DccState, returns: &DenseMatrix) {
        let n = self.instruments();
        let mut e = vec![0.0; n];
        for t in 0..returns.rows() {
            for (i, fit) in self.assets.iter().enumerate() {
                let eps = returns[(t, i)] - fit.params.mu;
                e[i] = eps / state.variance[i].sqrt();
                state.variance[i] = fit.params.next_variance(state.variance[i], eps);
            }
            q_update(&mut state.q, &self.qbar, self.a, self.b, &e);
        }
    }

    /// Filtered correlation matrices `R_t` for each step of `returns`.
    pub fn correlations(&self, returns: &DenseMatrix) -> Vec<DenseMatrix> {
        let mut state = self.unconditional_state();
        (0..returns.rows())
            .map(|t| {
                let r = normalize(&state.q);
                let row = DenseMatrix::from_fn(1, returns.cols(), |_, i| returns[(t, i)]);
                self.filter(&mut state, &row);
                r
            })
            .collect()
    }

    /// One forward path of `horizon` steps, `horizon × N`.
    pub fn simulate_path<R: rand::Rng>(&self, state: &mut DccState, horizon: usize, r: &mut R) -> DenseMatrix {
        let n = self.instruments();
        let mut out = DenseMatrix::zeros(horizon, n);
        let mut z = vec![0.0; n];
        let mut scratch = vec![0.0; n];
        for t in 0..horizon {
            let l = cholesky_semidefinite(&normalize(&state.q)).expect("normalized Q is a correlation matrix");
            // multivariate draw shares the mixing variable across instruments
            let w = match self.law {
                InnovationLaw::Normal => 1.0,
                InnovationLaw::StudentT { nu } => {
                    let w = ChiSquared::new(nu).expect("nu > 2").sample(r) / nu;
                    ((nu - 2.0) / nu).sqrt() / w.sqrt()
                }
            };
            for v in scratch.iter_mut() {
                *v = StandardNormal.sample(r);
            }
            for i in 0..n {
                z[i] = w * (0..=i).map(|k| l[(i, k)] * scratch[k]).sum::<f64>();
            }
            let mut e = vec![0.0; n];
            for (i, fit) in self.assets.iter().enumerate() {
                let sd = state.variance[i].sqrt();
                let eps = sd * z[i];
                out[(t, i)] = fit.params.mu + eps;
                e[i] = z[i];
                state.variance[i] = fit.params.next_variance(state.variance[i], eps);
            }
            q_update(&mut state.q, &self.qbar, self.a, self.b, &e);
        }
        out
    }

    /// Filters an `N × len` condition window from the unconditional state and
    /// simulates `batch` paths of `horizon` steps, each returned `N × horizon`.
    pub fn simulate_from_fit(&self, condition: &DenseMatrix, horizon: usize, batch: usize, seed: u64) -> Vec<DenseMatrix> {
        let mut state = self.unconditional_state();
        self.filter(&mut state, &condition.transpose());
        (0..batch)
            .into_par_iter()
            .map(|k| {
                let mut r = rng::stream(rng::split(seed, k as u64));
                self.simulate_path(&mut state.clone(), horizon, &mut r).transpose()
            })
            .collect()
    }
}

/// Simulates a DCC process with given GARCH legs, `(a, b)` and `Q̄`.
pub fn simulate_dcc(
    assets: &[Garch11Params],
    a: f64,
    b: f64,
    qbar: &DenseMatrix,
    law: InnovationLaw,
    steps: usize,
    seed: u64,
) -> DenseMatrix {
    let fit = DccFit {
        assets: assets
            .iter()
            .map(|&params| Garch11Fit { params, law, log_likelihood: 0.0, last_variance: 0.0, converged: true })
            .collect(),
        a,
        b,
        qbar: qbar.clone(),
        law,
        log_likelihood: 0.0,
        last_q: qbar.clone(),
        converged: true,
        at_boundary: false,
    };
    let mut state = fit.unconditional_state();
    fit.simulate_path(&mut state, steps, &mut rng::stream(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leg() -> Garch11Params {
        Garch11Params { mu: 0.0, omega: 1e-5, alpha: 0.05, beta: 0.90 }
    }

    fn corr(n: usize, rho: f64) -> DenseMatrix {
        DenseMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { rho })
    }

    #[test]
    fn recovers_dcc_dynamics() {
        let data = simulate_dcc(&[leg(), leg()], 0.05, 0.90, &corr(2, 0.5), InnovationLaw::Normal, 20_000, 21);
        let fit = fit_dcc(&data, LawKind::Normal).unwrap();
        assert!((fit.a - 0.05).abs() < 0.1 && (fit.b - 0.90).abs() < 0.1, "{} {}", fit.a, fit.b);
    }

    fn ccc_fit() -> (DenseMatrix, DccFit) {
        let data = simulate_dcc(&[leg(), leg(), leg()], 0.0, 0.0, &corr(3, 0.4), InnovationLaw::Normal, 20_000, 2);
        let fit = fit_dcc(&data, LawKind::Normal).unwrap();
        (data, fit)
    }

    #[test]
    #[ignore = "b is not identified when a = 0, so the fitted persistence is arbitrary"]
    fn constant_correlation_persistence_is_small() {
        let (_, fit) = ccc_fit();
        assert!(fit.a + fit.b < 0.05, "{} {}", fit.a, fit.b);
    }

    #[test]
    fn constant_correlation_degenerate_case() {
        let (data, fit) = ccc_fit();
        assert!(fit.a < 0.05, "{} {}", fit.a, fit.b);
        let sample = {
            let e = standardize(&data, &fit.assets);
            normalize(&e.t_matmul(&e).unwrap())
        };
        assert!(normalize(&fit.qbar).max_abs_diff(&sample).unwrap() < 0.02);
    }

    #[test]
    fn single_asset_rejected() {
        let data = DenseMatrix::zeros(100, 1);
        assert!(matches!(fit_dcc(&data, LawKind::Normal), Err(FitError::NeedMultivariate)));
    }

    #[test]
    fn filtered_correlations_are_valid() {
        let data = simulate_dcc(&[leg(), leg(), leg()], 0.08, 0.9, &corr(3, 0.3), InnovationLaw::Normal, 2000, 4);
        let fit = fit_dcc(&data, LawKind::Normal).unwrap();
        for r in fit.correlations(&data) {
            assert!(r.is_symmetric(1e-12));
            assert!((0..3).all(|i| r[(i, i)] == 1.0));
            cholesky_semidefinite(&r).unwrap();
        }
    }

    #[test]
    fn simulation_is_deterministic_and_shaped() {
        let data = simulate_dcc(&[leg(), leg()], 0.05, 0.9, &corr(2, 0.3), InnovationLaw::Normal, 3000, 8);
        let fit = fit_dcc(&data, LawKind::Normal).unwrap();
        let cond = DenseMatrix::from_fn(2, 40, |i, t| data[(t, i)]);
        let a = fit.simulate_from_fit(&cond, 40, 1000, 5);
        assert_eq!(a.len(), 1000);
        assert_eq!(a[0].shape(), (2, 40));
        assert_eq!(a, fit.simulate_from_fit(&cond, 40, 1000, 5));
    }

    #[test]
    fn high_volatility_condition_raises_first_step_variance() {
        let data = simulate_dcc(&[leg(), leg()], 0.05, 0.9, &corr(2, 0.3), InnovationLaw::Normal, 3000, 8);
        let fit = fit_dcc(&data, LawKind::Normal).unwrap();
        let mut state = fit.unconditional_state();
        let calm = state.variance.clone();
        let cond = DenseMatrix::from_fn(40, 2, |t, _| if t % 2 == 0 { 0.05 } else { -0.05 });
        fit.filter(&mut state, &cond);
        assert!(state.variance.iter().zip(&calm).all(|(v, c)| v > c));
    }

    #[test]
    fn zero_dynamics_simulates_iid() {
        let p = Garch11Params { mu: 0.001, omega: 4e-4, alpha: 0.0, beta: 0.0 };
        let fit = DccFit {
            assets: vec![Garch11Fit { params: p, law: InnovationLaw::Normal, log_likelihood: 0.0, last_variance: 4e-4, converged: true }; 2],
            a: 0.0,
            b: 0.0,
            qbar: corr(2, 0.6),
            law: InnovationLaw::Normal,
            log_likelihood: 0.0,
            last_q: corr(2, 0.6),
            converged: true,
            at_boundary: false,
        };
        let mut state = fit.unconditional_state();
        let path = fit.simulate_path(&mut state, 100_000, &mut rng::stream(1));
        let x = path.column(0);
        let y = path.column(1);
        let m = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (mx, my) = (m(&x), m(&y));
        let vx = x.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / x.len() as f64;
        let vy = y.iter().map(|v| (v - my).powi(2)).sum::<f64>() / y.len() as f64;
        let c = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / x.len() as f64;
        assert!((mx - 0.001).abs() < 4.0 * (4e-4f64 / 1e5).sqrt());
        assert!((vx / 4e-4 - 1.0).abs() < 0.02);
        assert!((c / (vx * vy).sqrt() - 0.6).abs() < 0.02);
    }

    #[test]
    fn student_t_dcc_fits_nu() {
        let data = simulate_dcc(&[leg(), leg()], 0.04, 0.9, &corr(2, 0.5), InnovationLaw::StudentT { nu: 6.0 }, 10_000, 3);
        let fit = fit_dcc(&data, LawKind::StudentT).unwrap();
        match fit.law {
            InnovationLaw::StudentT { nu } => assert!((4.0..10.0).contains(&nu), "{nu}"),
            other => panic!("{other:?}"),
        }
    }
}

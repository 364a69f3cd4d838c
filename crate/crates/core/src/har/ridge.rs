use ftsbench_numeric::{solve, DenseMatrix, NumericError};
use serde::{Deserialize, Serialize};

use super::HarError;

/// Ridge strengths tried on the validation split.
pub const LAMBDA_GRID: [f64; 6] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0];

/// `ŷ = ω + xᵀβ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub lambda: f64,
    pub half_life: f64,
}

impl HarModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

/// Weight of an observation `age` steps before the newest one.
pub fn decay_weight(age: usize, half_life: f64) -> f64 {
    (-(age as f64) / half_life).exp2()
}

/// Minimizes `Σ w_t (y_t − ω − x_tᵀβ)² + λ‖β‖²` with `w_t = 2^{−age/half-life}`
/// (the last row has age 0). The intercept is not penalized.
pub fn fit_har_ridge(rows: &[Vec<f64>], targets: &[f64], lambda: f64, half_life: f64) -> Result<HarModel, HarError> {
    let ages: Vec<usize> = (0..rows.len()).rev().collect();
    fit_har_ridge_aged(rows, targets, &ages, lambda, half_life)
}

/// [`fit_har_ridge`] with explicit ages, for pooled panels where several
/// rows share a day.
pub fn fit_har_ridge_aged(rows: &[Vec<f64>], targets: &[f64], ages: &[usize], lambda: f64, half_life: f64) -> Result<HarModel, HarError> {
    if ages.len() != rows.len() {
        return Err(HarError::Invalid(format!("{} rows, {} ages", rows.len(), ages.len())));
    }
    if rows.len() < 2 {
        return Err(HarError::TooFewRows { found: rows.len(), needed: 2 });
    }
    if rows.len() != targets.len() {
        return Err(HarError::Invalid(format!("{} rows, {} targets", rows.len(), targets.len())));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) || !(half_life > 0.0) {
        return Err(HarError::Invalid(format!("λ = {lambda}, half-life = {half_life}")));
    }
    let k = rows[0].len();
    if rows.iter().any(|r| r.len() != k) {
        return Err(HarError::Invalid("ragged feature rows".into()));
    }
    let p = k + 1;
    let mut a = DenseMatrix::zeros(p, p);
    let mut rhs = vec![0.0; p];
    for ((x, &y), &age) in rows.iter().zip(targets).zip(ages) {
        let w = decay_weight(age, half_life);
        let xi = |i: usize| if i == 0 { 1.0 } else { x[i - 1] };
        for i in 0..p {
            rhs[i] += w * xi(i) * y;
            for j in 0..=i {
                a[(i, j)] += w * xi(i) * xi(j);
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            a[(j, i)] = a[(i, j)];
        }
    }
    for i in 1..p {
        a[(i, i)] += lambda;
    }
    let theta = solve(&a, &rhs).map_err(|e| match e {
        NumericError::Singular => HarError::Singular,
        other => HarError::Invalid(other.to_string()),
    })?;
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(HarError::Singular);
    }
    Ok(HarModel { intercept: theta[0], coefficients: theta[1..].to_vec(), lambda, half_life })
}

/// Picks the grid λ with the lowest mean squared error on `(val_rows,
/// val_targets)` for a model fit on `(rows, targets, ages)`; ties keep the smaller λ.
pub fn select_lambda(
    rows: &[Vec<f64>],
    targets: &[f64],
    ages: &[usize],
    val_rows: &[Vec<f64>],
    val_targets: &[f64],
    half_life: f64,
    grid: &[f64],
) -> Result<f64, HarError> {
    if val_rows.is_empty() || val_rows.len() != val_targets.len() {
        return Err(HarError::Invalid("empty or mismatched validation set".into()));
    }
    let mut best: Option<(f64, f64)> = None;
    for &lambda in grid {
        let model = match fit_har_ridge_aged(rows, targets, ages, lambda, half_life) {
            Ok(m) => m,
            Err(HarError::Singular) => continue,
            Err(e) => return Err(e),
        };
        let mse = val_rows.iter().zip(val_targets).map(|(x, y)| (model.predict(x) - y).powi(2)).sum::<f64>() / val_rows.len() as f64;
        if best.is_none_or(|(_, b)| mse < b) {
            best = Some((lambda, mse));
        }
    }
    best.map(|(l, _)| l).ok_or(HarError::Singular)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use nalgebra::{DMatrix, DVector};
    use rand::Rng;

    fn problem(seed: u64, n: usize, k: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut r = rng::stream(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| r.random_range(0.0..1.0)).collect()).collect();
        let y = rows.iter().map(|x| 0.3 + x.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * v).sum::<f64>() + r.random_range(-0.1..0.1)).collect();
        (rows, y)
    }

    /// Centered formulation: β = (X̃ᵀWX̃ + λI)⁻¹X̃ᵀWỹ on weighted-mean-centered data.
    fn oracle(rows: &[Vec<f64>], y: &[f64], lambda: f64, hl: f64) -> (f64, Vec<f64>) {
        let n = rows.len();
        let k = rows[0].len();
        let w: Vec<f64> = (0..n).map(|t| 0.5f64.powf((n - 1 - t) as f64 / hl)).collect();
        let sw: f64 = w.iter().sum();
        let xm: Vec<f64> = (0..k).map(|j| (0..n).map(|t| w[t] * rows[t][j]).sum::<f64>() / sw).collect();
        let ym = (0..n).map(|t| w[t] * y[t]).sum::<f64>() / sw;
        let x = DMatrix::from_fn(n, k, |t, j| (rows[t][j] - xm[j]) * w[t].sqrt());
        let yv = DVector::from_fn(n, |t, _| (y[t] - ym) * w[t].sqrt());
        let lhs = x.transpose() * &x + DMatrix::identity(k, k) * lambda;
        let beta = lhs.lu().solve(&(x.transpose() * yv)).unwrap();
        let b: Vec<f64> = beta.iter().copied().collect();
        (ym - b.iter().zip(&xm).map(|(b, m)| b * m).sum::<f64>(), b)
    }

    #[test]
    fn matches_centered_oracle() {
        for seed in 0..20 {
            let (rows, y) = problem(seed, 60, 4);
            let m = fit_har_ridge(&rows, &y, 0.05 * seed as f64, 20.0).unwrap();
            let (c, b) = oracle(&rows, &y, 0.05 * seed as f64, 20.0);
            assert!((m.intercept - c).abs() < 1e-9);
            for (u, v) in m.coefficients.iter().zip(&b) {
                assert!((u - v).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn ols_limit_and_zero_features() {
        let (rows, y) = problem(3, 50, 2);
        let m = fit_har_ridge(&rows, &y, 0.0, 1e12).unwrap();
        let (c, b) = oracle(&rows, &y, 0.0, 1e12);
        assert!((m.intercept - c).abs() < 1e-9 && (m.coefficients[0] - b[0]).abs() < 1e-9);

        let zeros = vec![vec![0.0; 3]; 10];
        let y: Vec<f64> = (0..10).map(|t| t as f64).collect();
        let m = fit_har_ridge(&zeros, &y, 0.1, 4.0).unwrap();
        let w: Vec<f64> = (0..10).map(|t| decay_weight(9 - t, 4.0)).collect();
        let mean = w.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / w.iter().sum::<f64>();
        assert!((m.intercept - mean).abs() < 1e-12);
        assert_eq!(m.coefficients, vec![0.0; 3]);
        assert_eq!(fit_har_ridge(&zeros, &y, 0.0, 4.0), Err(HarError::Singular));
    }

    #[test]
    fn heavy_ridge_shrinks_to_weighted_mean() {
        let (rows, y) = problem(5, 40, 3);
        let m = fit_har_ridge(&rows, &y, 1e12, 10.0).unwrap();
        let w: Vec<f64> = (0..40).map(|t| decay_weight(39 - t, 10.0)).collect();
        let mean = w.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / w.iter().sum::<f64>();
        assert!(m.coefficients.iter().all(|b| b.abs() < 1e-9));
        assert!((m.intercept - mean).abs() < 1e-6);
    }

    #[test]
    fn scaling_identity() {
        let (rows, y) = problem(8, 40, 3);
        let c = 3.5;
        let scaled: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v * c).collect()).collect();
        let ys: Vec<f64> = y.iter().map(|v| v * c).collect();
        let m = fit_har_ridge(&rows, &y, 0.2, 15.0).unwrap();
        // scaling x and y by c leaves β unchanged when λ scales by c²
        let s = fit_har_ridge(&scaled, &ys, 0.2 * c * c, 15.0).unwrap();
        assert!((s.intercept - c * m.intercept).abs() < 1e-9);
        for (a, b) in s.coefficients.iter().zip(&m.coefficients) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn lambda_selection_prefers_fit_quality() {
        let (rows, y) = problem(9, 80, 3);
        let ages: Vec<usize> = (0..60).rev().collect();
        let l = select_lambda(&rows[..60], &y[..60], &ages, &rows[60..], &y[60..], 1e9, &LAMBDA_GRID).unwrap();
        assert!(l <= 0.1, "{l}");
        assert!(matches!(fit_har_ridge(&rows[..1], &y[..1], 1.0, 1.0), Err(HarError::TooFewRows { .. })));
    }
}

use ftsbench_numeric::{DenseMatrix, Tape, Var};

use super::DgmError;

pub const DEFAULT_MULTIPLIERS: [f64; 5] = [0.5, 1.0, 2.0, 4.0, 8.0];

/// Gaussian kernels `exp(−d²/(base·m))` for each multiplier `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct MmdSpec {
    pub base: f64,
    pub multipliers: Vec<f64>,
}

impl MmdSpec {
    pub fn new(base: f64, multipliers: &[f64]) -> Result<Self, DgmError> {
        if !(base > 0.0 && base.is_finite()) {
            return Err(DgmError::ZeroBandwidth);
        }
        if multipliers.is_empty() || multipliers.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(DgmError::Config(format!("bandwidth multipliers must be positive: {multipliers:?}")));
        }
        Ok(Self { base, multipliers: multipliers.to_vec() })
    }

    pub fn with_default_multipliers(base: f64) -> Result<Self, DgmError> {
        Self::new(base, &DEFAULT_MULTIPLIERS)
    }

    fn inverse_bandwidths(&self) -> Vec<f64> {
        self.multipliers.iter().map(|m| 1.0 / (self.base * m)).collect()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_sets(x: &DenseMatrix, y: &DenseMatrix) -> Result<(), DgmError> {
    if x.rows() == 0 || y.rows() == 0 {
        return Err(DgmError::TooFewSamples { needed: 1, found: 0 });
    }
    if x.cols() != y.cols() {
        return Err(DgmError::Shape { expected: (y.rows(), y.cols()), found: x.shape() });
    }
    Ok(())
}

/// Median of squared distances over all unordered pairs of rows.
pub fn median_bandwidth(samples: &DenseMatrix) -> Result<f64, DgmError> {
    let n = samples.rows();
    if n < 2 {
        return Err(DgmError::TooFewSamples { needed: 2, found: n });
    }
    let mut d = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            d.push(sq_dist(samples.row(i), samples.row(j)));
        }
    }
    let (mid, odd) = (d.len() / 2, d.len() % 2 == 1);
    let (lower, &mut upper, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    let median = if odd {
        upper
    } else {
        let below = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (below + upper)
    };
    if !(median > 0.0) || !median.is_finite() {
        return Err(DgmError::ZeroBandwidth);
    }
    Ok(median)
}

/// Rows of `a` stacked over rows of `b`.
pub(crate) fn stack(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let mut data = Vec::with_capacity(a.len() + b.len());
    data.extend_from_slice(a.as_slice());
    data.extend_from_slice(b.as_slice());
    DenseMatrix::from_vec(a.rows() + b.rows(), a.cols(), data).expect("same width")
}

/// Sum over bandwidths of the mean kernel value between two sets.
fn mean_kernel(a: &DenseMatrix, b: &DenseMatrix, inv: &[f64], symmetric: bool) -> f64 {
    let mut acc = vec![0.0; inv.len()];
    for i in 0..a.rows() {
        let start = if symmetric { i + 1 } else { 0 };
        for j in start..b.rows() {
            let d = sq_dist(a.row(i), b.row(j));
            for (s, w) in acc.iter_mut().zip(inv) {
                *s += (-d * w).exp();
            }
        }
    }
    let total: f64 = if symmetric {
        // off-diagonal pairs count twice, the diagonal contributes exp(0) = 1
        acc.iter().map(|s| 2.0 * s + a.rows() as f64).sum()
    } else {
        acc.iter().sum()
    };
    total / (a.rows() * b.rows()) as f64
}

/// Biased (V-statistic) MMD² summed over the spec's bandwidths.
pub fn mmd_squared(x: &DenseMatrix, y: &DenseMatrix, spec: &MmdSpec) -> Result<f64, DgmError> {
    check_sets(x, y)?;
    let inv = spec.inverse_bandwidths();
    Ok(mean_kernel(x, x, &inv, true) + mean_kernel(y, y, &inv, true) - 2.0 * mean_kernel(x, y, &inv, false))
}

/// Reference estimator: one full double loop per bandwidth and term.
pub fn mmd_naive(x: &DenseMatrix, y: &DenseMatrix, spec: &MmdSpec) -> Result<f64, DgmError> {
    check_sets(x, y)?;
    let k = |a: &[f64], b: &[f64], bw: f64| (-sq_dist(a, b) / bw).exp();
    let mut total = 0.0;
    for m in &spec.multipliers {
        let bw = spec.base * m;
        let term = |a: &DenseMatrix, b: &DenseMatrix| {
            let mut s = 0.0;
            for i in 0..a.rows() {
                for j in 0..b.rows() {
                    s += k(a.row(i), b.row(j), bw);
                }
            }
            s / (a.rows() * b.rows()) as f64
        };
        total += term(x, x) + term(y, y) - 2.0 * term(x, y);
    }
    Ok(total)
}

/// Differentiable MMD² of the tape node `x` against the constant set `y`.
pub fn mmd_on_tape(tape: &mut Tape, x: Var, y: &DenseMatrix, spec: &MmdSpec) -> Result<Var, DgmError> {
    check_sets(tape.value(x), y)?;
    let inv = spec.inverse_bandwidths();
    let yy = mean_kernel(y, y, &inv, true);
    let yv = tape.leaf(y.clone());
    let dxx = tape.pairwise_sq_dist(x, x)?;
    let dxy = tape.pairwise_sq_dist(x, yv)?;
    let mut total: Option<Var> = None;
    for w in inv {
        let kxx = tape.scale(dxx, -w)?;
        let kxx = tape.exp(kxx)?;
        let kxx = tape.mean(kxx)?;
        let kxy = tape.scale(dxy, -w)?;
        let kxy = tape.exp(kxy)?;
        let kxy = tape.mean(kxy)?;
        let kxy = tape.scale(kxy, -2.0)?;
        let term = tape.add(kxx, kxy)?;
        total = Some(match total {
            Some(t) => tape.add(t, term)?,
            None => term,
        });
    }
    Ok(tape.add_scalar(total.expect("at least one bandwidth"), yy)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn col(v: &[f64]) -> DenseMatrix {
        DenseMatrix::from_vec(v.len(), 1, v.to_vec()).unwrap()
    }

    fn normals(n: usize, d: usize, seed: u64) -> DenseMatrix {
        let mut r = rng::stream(seed);
        DenseMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut r))
    }

    #[test]
    fn median_hand_enumeration() {
        assert_eq!(median_bandwidth(&col(&[0.0, 2.0, 0.0, 2.0])).unwrap(), 4.0);
        assert!(median_bandwidth(&col(&[1.0, 1.0, 3.0])).unwrap() > 0.0);
        assert!(matches!(median_bandwidth(&col(&[1.5; 4])), Err(DgmError::ZeroBandwidth)));
        assert!(matches!(median_bandwidth(&col(&[1.0])), Err(DgmError::TooFewSamples { .. })));
    }

    #[test]
    fn median_matches_sorted_enumeration() {
        let x = normals(1000, 1, 3);
        let mut all = Vec::new();
        for i in 0..1000 {
            for j in 0..i {
                all.push((x[(i, 0)] - x[(j, 0)]).powi(2));
            }
        }
        all.sort_by(f64::total_cmp);
        let m = all.len() / 2;
        let oracle = 0.5 * (all[m - 1] + all[m]);
        assert_eq!(median_bandwidth(&x).unwrap(), oracle);
        // difference of two N(0,1) is N(0,2); median of 2·χ²₁ is 2·0.4549
        assert!((oracle - 2.0 * 0.454_936_4).abs() < 0.1);
    }

    #[test]
    fn single_point_kernel_arithmetic() {
        let h: f64 = 0.7;
        let spec = MmdSpec::new(h * h, &[1.0]).unwrap();
        let v = mmd_squared(&col(&[0.0]), &col(&[h * 2f64.sqrt()]), &spec).unwrap();
        assert!((v - (2.0 - 2.0 * (-2.0f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn identical_multisets_give_zero() {
        let x = normals(30, 3, 1);
        let mut rows: Vec<Vec<f64>> = (0..30).map(|i| x.row(i).to_vec()).collect();
        rows.reverse();
        let y = DenseMatrix::from_rows(&rows).unwrap();
        let spec = MmdSpec::with_default_multipliers(1.3).unwrap();
        assert!(mmd_squared(&x, &y, &spec).unwrap().abs() < 1e-12);
        assert!(mmd_squared(&x, &normals(30, 3, 2), &spec).unwrap() > 1e-3);
    }

    #[test]
    fn matches_naive_and_tape() {
        let mut r = rng::stream(9);
        for case in 0..20 {
            let d = r.random_range(1..4);
            let x = normals(r.random_range(1..15), d, 100 + case);
            let y = normals(r.random_range(1..15), d, 200 + case);
            let spec = MmdSpec::with_default_multipliers(r.random_range(0.1..3.0)).unwrap();
            let fast = mmd_squared(&x, &y, &spec).unwrap();
            assert!(fast >= -1e-12);
            assert!((fast - mmd_naive(&x, &y, &spec).unwrap()).abs() < 1e-12);
            let mut tape = Tape::new();
            let xv = tape.leaf(x.clone());
            let t = mmd_on_tape(&mut tape, xv, &y, &spec).unwrap();
            assert!((tape.value(t)[(0, 0)] - fast).abs() < 1e-10);
        }
    }

    #[test]
    fn consistency_trend() {
        let spec = MmdSpec::with_default_multipliers(2.0).unwrap();
        let v: Vec<f64> = [100, 1000, 4000]
            .iter()
            .map(|&n| mmd_squared(&normals(n, 1, n as u64), &normals(n, 1, 7 + n as u64), &spec).unwrap())
            .collect();
        assert!(v[0] > v[1] && v[1] > v[2], "{v:?}");
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(MmdSpec::new(0.0, &[1.0]).is_err());
        assert!(MmdSpec::new(1.0, &[1.0, -2.0]).is_err());
        assert!(MmdSpec::new(1.0, &[]).is_err());
    }
}

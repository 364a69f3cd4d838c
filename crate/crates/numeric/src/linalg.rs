//! Factorizations and solves for the small systems used across the toolkit.

use crate::{DenseMatrix, NumericError};

/// Symmetry tolerance applied before factorizing.
const SYMMETRY_TOL: f64 = 1e-9;

/// Lower-triangular Cholesky factor `L` with `L·Lᵀ = m`.
///
/// Returns [`NumericError::NotPositiveDefinite`] rather than regularizing.
pub fn cholesky(m: &DenseMatrix) -> Result<DenseMatrix, NumericError> {
    if m.rows() != m.cols() {
        return Err(NumericError::NotSquare(m.shape()));
    }
    if !m.is_finite() {
        return Err(NumericError::NonFinite("cholesky input"));
    }
    if !m.is_symmetric(SYMMETRY_TOL * max_abs(m).max(1.0)) {
        return Err(NumericError::NotSymmetric);
    }
    let n = m.rows();
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(NumericError::NotPositiveDefinite { pivot: j, value: d });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Explicit fallback: retries [`cholesky`] after adding `k·1e-8` to the
/// diagonal for `k = 1..=5`. Returns the factor and the jitter that was used.
pub fn cholesky_with_jitter(m: &DenseMatrix) -> Result<(DenseMatrix, f64), NumericError> {
    match cholesky(m) {
        Ok(l) => return Ok((l, 0.0)),
        Err(NumericError::NotPositiveDefinite { .. }) => {}
        Err(e) => return Err(e),
    }
    let mut last = None;
    for attempt in 1..=5 {
        let jitter = attempt as f64 * 1e-8;
        let mut shifted = m.clone();
        for i in 0..m.rows() {
            shifted[(i, i)] += jitter;
        }
        match cholesky(&shifted) {
            Ok(l) => return Ok((l, jitter)),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one jitter attempt"))
}

/// Cholesky-style factor of a positive semidefinite matrix.
///
/// Pivots within `1e-12` of zero produce a zero column instead of an error,
/// so rank-deficient correlation matrices (e.g. perfect correlation) can still
/// color shocks. Clearly negative pivots are reported as not positive definite.
pub fn cholesky_semidefinite(m: &DenseMatrix) -> Result<DenseMatrix, NumericError> {
    if m.rows() != m.cols() {
        return Err(NumericError::NotSquare(m.shape()));
    }
    if !m.is_finite() {
        return Err(NumericError::NonFinite("cholesky_semidefinite input"));
    }
    let scale = max_abs(m).max(1.0);
    if !m.is_symmetric(SYMMETRY_TOL * scale) {
        return Err(NumericError::NotSymmetric);
    }
    let n = m.rows();
    let tol = 1e-12 * scale;
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d < -tol {
            return Err(NumericError::NotPositiveDefinite { pivot: j, value: d });
        }
        if d <= tol {
            for i in j + 1..n {
                let mut s = m[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                if s.abs() > 1e-9 * scale {
                    return Err(NumericError::NotPositiveDefinite { pivot: j, value: d });
                }
            }
            continue;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Solves `L·Lᵀ x = b` given the Cholesky factor.
pub fn cholesky_solve(l: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>, NumericError> {
    let n = l.rows();
    if b.len() != n {
        return Err(NumericError::DimensionMismatch {
            context: "cholesky_solve",
            expected: n,
            found: b.len(),
        });
    }
    let y = forward_substitute(l, b);
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    Ok(x)
}

/// Solves `L·y = b` for lower-triangular `L`.
pub fn forward_substitute(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    y
}

/// `log det(m)` from its Cholesky factor.
pub fn cholesky_log_det(l: &DenseMatrix) -> f64 {
    2.0 * (0..l.rows()).map(|i| l[(i, i)].ln()).sum::<f64>()
}

/// Gaussian elimination with partial pivoting for a general square system.
pub fn solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>, NumericError> {
    let n = a.rows();
    if a.cols() != n {
        return Err(NumericError::NotSquare(a.shape()));
    }
    if b.len() != n {
        return Err(NumericError::DimensionMismatch {
            context: "solve",
            expected: n,
            found: b.len(),
        });
    }
    let mut m = a.clone();
    let mut rhs = b.to_vec();
    let scale = max_abs(a).max(f64::MIN_POSITIVE);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[(i, col)].abs().total_cmp(&m[(j, col)].abs()))
            .unwrap_or(col);
        if m[(pivot, col)].abs() <= 1e-13 * scale {
            return Err(NumericError::Singular);
        }
        if pivot != col {
            for c in 0..n {
                let tmp = m[(col, c)];
                m[(col, c)] = m[(pivot, c)];
                m[(pivot, c)] = tmp;
            }
            rhs.swap(col, pivot);
        }
        for r in col + 1..n {
            let f = m[(r, col)] / m[(col, col)];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                m[(r, c)] -= f * m[(col, c)];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = rhs[i];
        for k in i + 1..n {
            s -= m[(i, k)] * x[k];
        }
        x[i] = s / m[(i, i)];
    }
    Ok(x)
}

/// Inverse of a symmetric positive-definite matrix via its Cholesky factor.
pub fn spd_inverse(l: &DenseMatrix) -> DenseMatrix {
    let n = l.rows();
    let mut inv = DenseMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let col = cholesky_solve(l, &e).expect("factor is square");
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    inv
}

fn max_abs(m: &DenseMatrix) -> f64 {
    m.as_slice().iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_factor_is_identity() {
        let l = cholesky(&DenseMatrix::identity(4)).unwrap();
        assert_eq!(l, DenseMatrix::identity(4));
    }

    #[test]
    fn diagonal_factor() {
        let m = DenseMatrix::from_rows(&[vec![4.0, 0.0], vec![0.0, 9.0]]).unwrap();
        let l = cholesky(&m).unwrap();
        assert_eq!(l.as_slice(), &[2.0, 0.0, 0.0, 3.0]);
    }

    #[test]
    fn equicorrelation_reconstructs() {
        let m = DenseMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { 0.5 });
        let l = cholesky(&m).unwrap();
        let back = l.matmul_t(&l).unwrap();
        assert!(back.max_abs_diff(&m).unwrap() < 1e-12);
    }

    #[test]
    fn non_pd_is_distinct_error() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(cholesky(&m), Err(NumericError::NotPositiveDefinite { .. })));
        let asym = DenseMatrix::from_rows(&[vec![1.0, 0.3], vec![0.1, 1.0]]).unwrap();
        assert!(matches!(cholesky(&asym), Err(NumericError::NotSymmetric)));
    }

    #[test]
    fn jitter_rescues_semidefinite() {
        // rank-one: all ones
        let m = DenseMatrix::filled(3, 3, 1.0);
        assert!(cholesky(&m).is_err());
        let (l, jitter) = cholesky_with_jitter(&m).unwrap();
        assert!(jitter > 0.0 && jitter <= 5e-8);
        assert!(l.matmul_t(&l).unwrap().max_abs_diff(&m).unwrap() < 1e-7);
        let bad = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(cholesky_with_jitter(&bad).is_err());
    }

    #[test]
    fn semidefinite_factor_handles_perfect_correlation() {
        let m = DenseMatrix::filled(2, 2, 1.0);
        let l = cholesky_semidefinite(&m).unwrap();
        assert_eq!(l.as_slice(), &[1.0, 0.0, 1.0, 0.0]);
        let bad = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(cholesky_semidefinite(&bad).is_err());
    }

    #[test]
    fn solve_matches_known_system() {
        let a = DenseMatrix::from_rows(&[vec![0.0, 2.0, 1.0], vec![1.0, 1.0, 0.0], vec![3.0, 0.0, 1.0]])
            .unwrap();
        let x = solve(&a, &[4.5, 3.0, 6.0]).unwrap();
        // x = (1.5, 1.5, 1.5)
        for v in x {
            assert!((v - 1.5).abs() < 1e-12);
        }
        let sing = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(solve(&sing, &[1.0, 2.0]), Err(NumericError::Singular)));
    }

    proptest! {
        #[test]
        fn cholesky_round_trips_lower_factors(
            n in 1usize..7,
            entries in proptest::collection::vec(-2.0f64..2.0, 49),
            diag in proptest::collection::vec(0.2f64..3.0, 7),
        ) {
            let l = DenseMatrix::from_fn(n, n, |i, j| {
                if i == j { diag[i] } else if j < i { entries[i * 7 + j] } else { 0.0 }
            });
            let m = l.matmul_t(&l).unwrap();
            let back = cholesky(&m).unwrap();
            prop_assert!(back.max_abs_diff(&l).unwrap() < 1e-9);
        }

        #[test]
        fn cholesky_solve_inverts(
            n in 1usize..6,
            entries in proptest::collection::vec(-1.0f64..1.0, 36),
            b in proptest::collection::vec(-5.0f64..5.0, 6),
        ) {
            let a = DenseMatrix::from_fn(n, n, |i, j| entries[i * 6 + j]);
            let mut m = a.matmul_t(&a).unwrap();
            for i in 0..n { m[(i, i)] += 0.5; }
            let l = cholesky(&m).unwrap();
            let x = cholesky_solve(&l, &b[..n]).unwrap();
            let lu = solve(&m, &b[..n]).unwrap();
            for i in 0..n {
                let r: f64 = (0..n).map(|j| m[(i, j)] * x[j]).sum();
                prop_assert!((r - b[i]).abs() < 1e-9);
                prop_assert!((x[i] - lu[i]).abs() < 1e-8);
            }
        }
    }
}

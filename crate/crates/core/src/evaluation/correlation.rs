use ftsbench_numeric::DenseMatrix;

use super::EvalError;

pub fn lower_triangle_len(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Pearson correlations of the rows of an `N × T` window, ordered
/// `(1,0), (2,0), (2,1), (3,0), …`.
pub fn correlation_values(window: &DenseMatrix) -> Result<Vec<f64>, EvalError> {
    let (n, t) = window.shape();
    if t < 3 {
        return Err(EvalError::TooShort { len: t, needed: 3 });
    }
    let tf = t as f64;
    let mut centered = Vec::with_capacity(n);
    for i in 0..n {
        let row = window.row(i);
        let m = row.iter().sum::<f64>() / tf;
        let c: Vec<f64> = row.iter().map(|v| v - m).collect();
        let ss: f64 = c.iter().map(|v| v * v).sum();
        if ss <= f64::EPSILON * f64::EPSILON * m * m * tf || ss == 0.0 {
            return Err(EvalError::ZeroVarianceInstrument(i));
        }
        centered.push((c, ss.sqrt()));
    }
    let mut out = Vec::with_capacity(lower_triangle_len(n));
    for i in 1..n {
        for j in 0..i {
            let (a, na) = &centered[i];
            let (b, nb) = &centered[j];
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            out.push((dot / (na * nb)).clamp(-1.0, 1.0));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicated_rows_are_one() {
        let w = DenseMatrix::from_fn(3, 10, |_, t| (t as f64).sin());
        assert!(correlation_values(&w).unwrap().iter().all(|&c| (c - 1.0).abs() < 1e-15));
    }

    #[test]
    fn sizes_and_order() {
        let w = DenseMatrix::from_fn(2, 5, |i, t| if i == 0 { t as f64 } else { -(t as f64) });
        let c = correlation_values(&w).unwrap();
        assert_eq!(c.len(), 1);
        assert!((c[0] + 1.0).abs() < 1e-15);
        let big = DenseMatrix::from_fn(50, 40, |i, t| ((i * 31 + t * 7) as f64).sin() + (i * t) as f64 * 1e-3);
        assert_eq!(correlation_values(&big).unwrap().len(), 1225);
        let w = DenseMatrix::from_fn(3, 6, |i, t| match i {
            0 => t as f64,
            1 => (t * t) as f64,
            _ => -(t as f64),
        });
        let c = correlation_values(&w).unwrap();
        assert!((c[1] + 1.0).abs() < 1e-15 && c[2] < 0.0 && c[0] > 0.9);
    }

    #[test]
    fn zero_variance_names_instrument() {
        let w = DenseMatrix::from_fn(3, 6, |i, t| if i == 1 { 2.0 } else { t as f64 });
        assert_eq!(correlation_values(&w), Err(EvalError::ZeroVarianceInstrument(1)));
    }
}

use super::EvalError;

/// Population moments; kurtosis is excess kurtosis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSet {
    pub mean: f64,
    pub std: f64,
    pub skew: f64,
    pub kurt: f64,
}

pub fn moments(series: &[f64]) -> Result<MomentSet, EvalError> {
    if series.len() < 4 {
        return Err(EvalError::TooShort { len: series.len(), needed: 4 });
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in series {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    // relative to the scale of the data, so constant series with rounding noise count as degenerate
    if m2 <= f64::EPSILON * f64::EPSILON * mean * mean || m2 == 0.0 {
        return Err(EvalError::ZeroVariance);
    }
    Ok(MomentSet { mean, std: m2.sqrt(), skew: m3 / m2.powf(1.5), kurt: m4 / (m2 * m2) - 3.0 })
}

/// One third of the series length.
pub fn rolling_window(len: usize) -> usize {
    len / 3
}

#[derive(Debug, Clone, PartialEq)]
pub struct RollingMoments {
    pub moments: Vec<MomentSet>,
    /// Windows skipped for zero variance.
    pub skipped: usize,
}

/// Stride-1 sliding moments over windows of `window` steps.
pub fn rolling_moments(series: &[f64], window: usize) -> Result<RollingMoments, EvalError> {
    if window == 0 || series.len() < window {
        return Err(EvalError::TooShort { len: series.len(), needed: window.max(1) });
    }
    let mut out = RollingMoments { moments: Vec::with_capacity(series.len() - window + 1), skipped: 0 };
    for w in series.windows(window) {
        match moments(w) {
            Ok(m) => out.moments.push(m),
            Err(EvalError::ZeroVariance) => out.skipped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Lag-1 autocorrelation of squared returns over paths (`N × T` each).
/// Squared returns are centered on their mean per instrument, pooled over
/// all paths, so level differences between paths count as persistence.
pub fn squared_return_autocorrelation(paths: &[ftsbench_numeric::DenseMatrix]) -> Option<f64> {
    let n = paths.first()?.rows();
    if paths.iter().any(|p| p.rows() != n) {
        return None;
    }
    let (mut num, mut den, mut scale) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let count: usize = paths.iter().map(|p| p.cols()).sum();
        let m = paths.iter().flat_map(|p| p.row(i)).map(|r| r * r).sum::<f64>() / count as f64;
        for p in paths {
            let c: Vec<f64> = p.row(i).iter().map(|r| r * r - m).collect();
            num += c.windows(2).map(|w| w[0] * w[1]).sum::<f64>();
            den += c.iter().map(|x| x * x).sum::<f64>();
            scale += p.row(i).iter().map(|r| r.powi(4)).sum::<f64>();
        }
    }
    // rounding noise of constant series is not variation
    (den > 1e-12 * scale).then(|| num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn two_point_symmetric() {
        let m = moments(&[1.0, -1.0, 1.0, -1.0]).unwrap();
        assert_eq!(m, MomentSet { mean: 0.0, std: 1.0, skew: 0.0, kurt: -2.0 });
    }

    #[test]
    fn constant_is_error() {
        assert_eq!(moments(&[0.3; 10]), Err(EvalError::ZeroVariance));
        assert_eq!(moments(&[0.1 + 0.2; 7]), Err(EvalError::ZeroVariance));
    }

    #[test]
    fn gaussian_moments() {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..1_000_000).map(|_| StandardNormal.sample(&mut r)).collect();
        let m = moments(&x).unwrap();
        for (v, t) in [(m.mean, 0.0), (m.std, 1.0), (m.skew, 0.0), (m.kurt, 0.0)] {
            assert!((v - t).abs() < 0.02, "{m:?}");
        }
    }

    #[test]
    fn rolling_counts() {
        let x: Vec<f64> = (0..120).map(|t| ((t * 13) as f64).sin()).collect();
        assert_eq!(rolling_window(120), 40);
        let r = rolling_moments(&x, 40).unwrap();
        assert_eq!(r.moments.len() + r.skipped, 81);
        let single = rolling_moments(&x[..40], 40).unwrap();
        assert_eq!(single.moments, vec![moments(&x[..40]).unwrap()]);
    }

    #[test]
    fn rolling_std_concentrates() {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let x: Vec<f64> = (0..30_000).map(|_| { let z: f64 = StandardNormal.sample(&mut r); 0.02 * z }).collect();
        let global = moments(&x).unwrap().std;
        let roll = rolling_moments(&x, 10_000).unwrap();
        assert!(roll.moments.iter().all(|m| (m.std / global - 1.0).abs() < 0.05));
    }

    #[test]
    fn squared_autocorrelation_signs() {
        use ftsbench_numeric::DenseMatrix;
        // volatility alternating in blocks of 5 => positive; alternating every step => negative
        let clustered = DenseMatrix::from_fn(1, 200, |_, t| if (t / 5) % 2 == 0 { 0.1 } else { 1.0 } * if t % 2 == 0 { 1.0 } else { -1.0 });
        let flipping = DenseMatrix::from_fn(1, 200, |_, t| if t % 2 == 0 { 0.1 } else { 1.0 });
        assert!(squared_return_autocorrelation(&[clustered]).unwrap() > 0.5);
        assert!(squared_return_autocorrelation(&[flipping]).unwrap() < -0.9);
        assert_eq!(squared_return_autocorrelation(&[DenseMatrix::filled(2, 10, 0.3)]), None);
    }
}

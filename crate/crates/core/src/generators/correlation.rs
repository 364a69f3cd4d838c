use ftsbench_numeric::{cholesky_semidefinite, DenseMatrix};

use super::{BlockCorrelationSpec, GenError};

/// Lower-triangular coloring factor for a correlation matrix.
///
/// Semidefinite matrices are accepted (perfect correlation yields identical
/// columns); indefinite ones are rejected.
pub fn coloring_factor(corr: &DenseMatrix) -> Result<DenseMatrix, GenError> {
    if (0..corr.rows().min(corr.cols())).any(|i| (corr[(i, i)] - 1.0).abs() > 1e-12) {
        return Err(GenError::InvalidCorrelation("diagonal must be one".into()));
    }
    cholesky_semidefinite(corr).map_err(|e| GenError::InvalidCorrelation(e.to_string()))
}

pub fn block_factor(spec: &BlockCorrelationSpec) -> Result<DenseMatrix, GenError> {
    spec.validate()?;
    coloring_factor(&spec.matrix()?)
}

/// Colors one row of i.i.d. shocks in place: `z ← L·z`.
#[inline]
pub fn color_row(factor: &DenseMatrix, z: &mut [f64], scratch: &mut Vec<f64>) {
    scratch.clear();
    scratch.extend_from_slice(z);
    let n = z.len();
    for i in 0..n {
        let row = factor.row(i);
        let mut s = 0.0;
        for k in 0..=i {
            s += row[k] * scratch[k];
        }
        z[i] = s;
    }
}

/// Applies `corr` to every row (time step) of a `T × N` panel of i.i.d. shocks.
pub fn apply_correlation(corr: &DenseMatrix, shocks: &DenseMatrix) -> Result<DenseMatrix, GenError> {
    if corr.rows() != shocks.cols() {
        return Err(GenError::InvalidCorrelation(format!(
            "{}x{} correlation for {} instruments",
            corr.rows(),
            corr.cols(),
            shocks.cols()
        )));
    }
    let factor = coloring_factor(corr)?;
    let mut out = shocks.clone();
    let mut scratch = Vec::with_capacity(shocks.cols());
    for t in 0..out.rows() {
        color_row(&factor, out.row_mut(t), &mut scratch);
    }
    Ok(out)
}

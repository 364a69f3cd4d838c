//! Multivariate return panels and the `N × T` windows cut from them.

use std::ops::Range;

use ftsbench_numeric::DenseMatrix;

/// `T × N` log returns plus per-step auxiliary channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    pub instruments: Vec<String>,
    /// Rows are time steps, columns instruments.
    pub returns: DenseMatrix,
    /// Conditional variance of each step's diffusive return.
    pub variance: DenseMatrix,
    /// Summed jump log-returns per step and instrument.
    pub jumps: DenseMatrix,
    /// 1 on large-jump-regime days.
    pub jump_regime: Vec<u8>,
    /// Correlation regime label per step (0 low, 1 high).
    pub regime: Vec<u8>,
    /// Hash of the generator spec that produced the panel (empty if external).
    pub spec_hash: String,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PanelError {
    #[error("panel is empty")]
    Empty,
    #[error("channel {channel} has {found} rows, returns have {expected}")]
    ChannelLength {
        channel: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite return at step {step}, instrument {instrument}")]
    NonFinite { step: usize, instrument: usize },
    #[error("{0} instrument ids for {1} columns")]
    Ids(usize, usize),
}

pub fn default_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("S{i:02}")).collect()
}

impl ReturnPanel {
    /// Panel with only returns; auxiliary channels zeroed.
    pub fn from_returns(returns: DenseMatrix) -> Self {
        let (t, n) = returns.shape();
        Self {
            instruments: default_ids(n),
            variance: DenseMatrix::zeros(t, n),
            jumps: DenseMatrix::zeros(t, n),
            jump_regime: vec![0; t],
            regime: vec![0; t],
            returns,
            spec_hash: String::new(),
        }
    }

    pub fn steps(&self) -> usize {
        self.returns.rows()
    }

    pub fn instrument_count(&self) -> usize {
        self.returns.cols()
    }

    pub fn validate(&self) -> Result<(), PanelError> {
        let (t, n) = self.returns.shape();
        if t == 0 || n == 0 {
            return Err(PanelError::Empty);
        }
        if self.instruments.len() != n {
            return Err(PanelError::Ids(self.instruments.len(), n));
        }
        for (channel, rows) in [
            ("variance", self.variance.rows()),
            ("jumps", self.jumps.rows()),
            ("jump_regime", self.jump_regime.len()),
            ("regime", self.regime.len()),
        ] {
            if rows != t {
                return Err(PanelError::ChannelLength { channel, expected: t, found: rows });
            }
        }
        for s in 0..t {
            if let Some(i) = self.returns.row(s).iter().position(|v| !v.is_finite()) {
                return Err(PanelError::NonFinite { step: s, instrument: i });
            }
        }
        Ok(())
    }

    /// Contiguous sub-panel over `range` of time steps.
    pub fn slice(&self, range: Range<usize>) -> Self {
        let rows = |m: &DenseMatrix| {
            DenseMatrix::from_fn(range.len(), m.cols(), |r, c| m[(range.start + r, c)])
        };
        Self {
            instruments: self.instruments.clone(),
            returns: rows(&self.returns),
            variance: rows(&self.variance),
            jumps: rows(&self.jumps),
            jump_regime: self.jump_regime[range.clone()].to_vec(),
            regime: self.regime[range].to_vec(),
            spec_hash: self.spec_hash.clone(),
        }
    }

    /// `N × len` window starting at step `start`.
    pub fn window(&self, start: usize, len: usize) -> DenseMatrix {
        window_of(&self.returns, start, len)
    }

    pub fn series(&self, instrument: usize) -> Vec<f64> {
        self.returns.column(instrument)
    }
}

/// `N × len` window (instruments as rows) of a `T × N` matrix.
pub fn window_of(returns: &DenseMatrix, start: usize, len: usize) -> DenseMatrix {
    DenseMatrix::from_fn(returns.cols(), len, |i, t| returns[(start + t, i)])
}

/// Flattens an `N × T` window time-major: `[x₀(t₀)…x_{N−1}(t₀), x₀(t₁), …]`.
pub fn flatten_time_major(window: &DenseMatrix) -> Vec<f64> {
    let (n, t) = window.shape();
    let mut out = Vec::with_capacity(n * t);
    for s in 0..t {
        for i in 0..n {
            out.push(window[(i, s)]);
        }
    }
    out
}

/// Inverse of [`flatten_time_major`].
pub fn unflatten_time_major(values: &[f64], instruments: usize) -> DenseMatrix {
    let steps = values.len() / instruments;
    DenseMatrix::from_fn(instruments, steps, |i, s| values[s * instruments + i])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_and_flatten_round_trip() {
        let r = DenseMatrix::from_fn(10, 3, |t, i| (t * 10 + i) as f64);
        let p = ReturnPanel::from_returns(r);
        let w = p.window(2, 4);
        assert_eq!(w.shape(), (3, 4));
        assert_eq!(w[(1, 0)], 21.0);
        let flat = flatten_time_major(&w);
        assert_eq!(&flat[..4], &[20.0, 21.0, 22.0, 30.0]);
        assert_eq!(unflatten_time_major(&flat, 3), w);
    }

    #[test]
    fn validate_catches_bad_channels() {
        let mut p = ReturnPanel::from_returns(DenseMatrix::zeros(5, 2));
        assert!(p.validate().is_ok());
        p.regime.pop();
        assert!(matches!(p.validate(), Err(PanelError::ChannelLength { .. })));
        let mut q = ReturnPanel::from_returns(DenseMatrix::zeros(5, 2));
        q.returns[(3, 1)] = f64::NAN;
        assert_eq!(q.validate(), Err(PanelError::NonFinite { step: 3, instrument: 1 }));
    }
}

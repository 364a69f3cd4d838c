use ftsbench_numeric::DenseMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::*;
use crate::generators::{window_count, WINDOW};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    FullTrain,
    Rolling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitSchedule {
    pub mode: ScheduleMode,
    /// Rolling estimation window, also the conditioning length.
    #[serde(default = "default_window")]
    pub window: usize,
    /// Keep every `stride`-th conditioning window.
    #[serde(default = "default_stride")]
    pub stride: usize,
}

fn default_window() -> usize {
    WINDOW
}

fn default_stride() -> usize {
    1
}

impl Default for FitSchedule {
    fn default() -> Self {
        Self { mode: ScheduleMode::FullTrain, window: WINDOW, stride: 1 }
    }
}

impl FitSchedule {
    pub fn rolling(window: usize) -> Self {
        Self { mode: ScheduleMode::Rolling, window, stride: 1 }
    }

    /// Windows shorter than this are fitted but statistically fragile.
    pub fn below_identifiability(&self) -> bool {
        self.window < MIN_OBSERVATIONS
    }
}

/// Fit for one conditioning window.
#[derive(Debug, Clone, PartialEq)]
pub struct RollingFit {
    /// First row of the conditioning window.
    pub start: usize,
    pub fit: DccFit,
    /// The window's own fit failed; `fit` is the nearest earlier success
    /// (or, for leading failures, the first success).
    pub carried: bool,
}

/// One fit per conditioning window (aligned with the stride-1 pairs of length
/// `window` followed by a target of 40), failures carried forward.
pub fn rolling_refit(returns: &DenseMatrix, schedule: &FitSchedule, law: LawKind) -> Result<Vec<RollingFit>, FitError> {
    let count = window_count(returns.rows(), schedule.window, WINDOW);
    if count == 0 {
        return Err(FitError::TooShort { found: returns.rows(), needed: schedule.window + WINDOW });
    }
    let starts: Vec<usize> = (0..count).step_by(schedule.stride.max(1)).collect();
    let fits: Vec<Option<DccFit>> = starts
        .par_iter()
        .map(|&s| {
            let window = DenseMatrix::from_fn(schedule.window, returns.cols(), |r, c| returns[(s + r, c)]);
            fit_dcc(&window, law).ok().filter(|f| f.log_likelihood.is_finite())
        })
        .collect();
    let first = fits.iter().flatten().next().cloned().ok_or(FitError::NoValidWindow)?;
    let mut last = first;
    Ok(starts
        .into_iter()
        .zip(fits)
        .map(|(start, fit)| match fit {
            Some(f) => {
                last = f.clone();
                RollingFit { start, fit: f, carried: false }
            }
            None => RollingFit { start, fit: last.clone(), carried: true },
        })
        .collect())
}

//! Classical baselines: univariate GARCH(1,1) and two-stage DCC.

mod dcc;
mod document;
mod garch;
mod rolling;
mod sampler;

pub use dcc::{fit_dcc, simulate_dcc, DccFit, DccState};
pub use document::{FitDocument, FIT_SCHEMA_VERSION};
pub use garch::{fit_garch11, garch_loglik, simulate_garch11, Garch11Fit, Garch11Params};
pub use rolling::{rolling_refit, FitSchedule, RollingFit, ScheduleMode};
pub use sampler::{DccSampler, RollingDccSampler};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Fewest observations accepted by a fit.
pub const MIN_OBSERVATIONS: usize = 30;
const MAX_PERSISTENCE: f64 = 0.9999;
/// ν search interval for Student-t innovations.
pub const NU_MIN: f64 = 2.1;
pub const NU_MAX: f64 = 100.0;

/// Which innovation law to estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawKind {
    Normal,
    StudentT,
}

/// Fitted innovation law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum InnovationLaw {
    Normal,
    StudentT { nu: f64 },
}

#[derive(Debug, Error)]
pub enum FitError {
    #[error("need at least {needed} observations, found {found}")]
    TooShort { found: usize, needed: usize },
    #[error("degenerate variance")]
    DegenerateVariance,
    #[error("multivariate model requires N ≥ 2")]
    NeedMultivariate,
    #[error("stage-1 fit failed for asset {asset}: {source}")]
    Stage1 {
        asset: usize,
        #[source]
        source: Box<FitError>,
    },
    #[error("no rolling window produced a valid fit")]
    NoValidWindow,
    #[error("invalid fit: {0}")]
    Invalid(String),
    #[error("cannot parse fit document: {0}")]
    Parse(String),
}

pub(crate) fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub(crate) fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Maps an unconstrained pair to `(a, b)` with `a, b ≥ 0` and `a + b < MAX_PERSISTENCE`.
pub(crate) fn split_persistence(x: f64, y: f64) -> (f64, f64) {
    let p = MAX_PERSISTENCE * logistic(x);
    let a = p * logistic(y);
    (a, p - a)
}

pub(crate) fn join_persistence(a: f64, b: f64) -> (f64, f64) {
    let p = (a + b).clamp(1e-6, MAX_PERSISTENCE * (1.0 - 1e-9));
    let share = (a / p).clamp(1e-6, 1.0 - 1e-6);
    (logit(p / MAX_PERSISTENCE), logit(share))
}

pub(crate) fn nu_from(x: f64) -> f64 {
    NU_MIN + (NU_MAX - NU_MIN) * logistic(x)
}

pub(crate) fn nu_to(nu: f64) -> f64 {
    logit(((nu - NU_MIN) / (NU_MAX - NU_MIN)).clamp(1e-9, 1.0 - 1e-9))
}

/// Reports a fitted ν at the upper bound as the normal law.
pub(crate) fn law_from_nu(nu: f64) -> InnovationLaw {
    if nu >= NU_MAX - 0.5 {
        InnovationLaw::Normal
    } else {
        InnovationLaw::StudentT { nu }
    }
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n)
}

//! Distribution-distance scoring: moment and correlation distributions
//! compared by 1-D optimal transport, rank aggregation, and bootstrapped
//! correlation networks.

mod correlation;
mod emd;
mod moments;
mod network;
mod rank;
mod sampler;
mod score;

pub use correlation::{correlation_values, lower_triangle_len};
pub use emd::emd1d_squared;
pub use moments::{moments, rolling_moments, rolling_window, squared_return_autocorrelation, MomentSet, RollingMoments};
pub use network::{
    bootstrap_network, jaccard, jaccard_curve, CorrelationNetwork, JaccardConfig, JaccardCurve, DEFAULT_BOOTSTRAPS,
};
pub use rank::{combined_rank, dataset_ranks, average_ranks, MetricTable, RankRow, RankSummary};
pub use sampler::{ConditionalSampler, ConstantSampler, ReplaySampler, SamplerError};
pub use score::{score_model, Measure, ScoreColumn, ScoreConfig, MEASURES};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("zero variance")]
    ZeroVariance,
    #[error("instrument {0} has zero variance")]
    ZeroVarianceInstrument(usize),
    #[error("series of length {len} is too short, need {needed}")]
    TooShort { len: usize, needed: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("size mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("tables do not share measures: {0}")]
    Layout(String),
    #[error("malformed metric table: {0}")]
    Parse(String),
}

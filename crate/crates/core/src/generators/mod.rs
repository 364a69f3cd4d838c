//! Synthetic return generators: NGARCH, Heston and factor stochastic
//! volatility, stitched from parameter segments with optional block
//! correlation, volatility-triggered correlation regimes and jumps.

mod correlation;
mod dataset;
mod fsv;
mod heston;
mod jumps;
mod ngarch;
mod params;
pub mod presets;
mod regime;

pub use correlation::{apply_correlation, block_factor, coloring_factor, color_row};
pub use dataset::{
    build_dataset, conditioning_windows, conditioning_windows_strided, simulate_path, split_dataset, split_lengths,
    window_count, ShockStream, SimulatedPath, WindowPair, WINDOW,
};
pub use fsv::simulate_fsv_forward;
pub use heston::{correlate_pair, simulate_heston, HestonState};
pub use jumps::{sample_jumps, JumpPath};
pub use ngarch::{simulate_ngarch, NGarchState};
pub use params::*;
pub use regime::{apply_regimes, percentile, RegimeTracker, RollingVolatility, HIGH, LOW};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid correlation: {0}")]
    InvalidCorrelation(String),
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("burn-in of {burn_in} steps is shorter than the regime window {window}")]
    BurnInTooShort { burn_in: usize, window: usize },
    #[error("cannot parse generator spec: {0}")]
    Parse(String),
    #[error("expected {expected} shocks, found {found}")]
    ShockLength { expected: usize, found: usize },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("{steps} steps is too short, need at least {needed}")]
    TooShort { steps: usize, needed: usize },
    #[error("simulation produced non-finite returns")]
    NonFinite,
}

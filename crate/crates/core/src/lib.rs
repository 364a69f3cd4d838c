//! Synthetic return generators, classical and deep generative conditional
//! return models, distribution-distance evaluation and a straddle backtest.

pub mod generators;
pub mod panel;
pub mod rng;

pub use panel::{ReturnPanel, PanelError};
pub mod io;
pub mod parametric;
pub mod evaluation;
pub mod dgm;
pub mod har;

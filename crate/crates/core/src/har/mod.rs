//! Realized-volatility forecasting (HAR with ridge and exponential
//! weighting) and a theta-neutral straddle basket backtest on a synthetic
//! options market.

mod backtest;
mod basket;
mod features;
mod market;
mod ridge;

pub use backtest::{run_backtest, t_test, BacktestConfig, BacktestResult, Forecaster, LedgerRow, PnlGrid, TTest, BASKET_SIZES};
pub use basket::{rank_and_build_basket, Basket};
pub use features::{generative_features, network_feature, rv_features, HarFeatures, RvProxy, MONTH, WEEK};
pub use market::{straddle_daily_pnl, MarketConfig, StraddleGreeks, SyntheticMarket, SyntheticStraddle, TRADING_DAYS};
pub use ridge::{decay_weight, fit_har_ridge, fit_har_ridge_aged, select_lambda, HarModel, LAMBDA_GRID};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum HarError {
    #[error("need {needed} observations up to index {t}")]
    InsufficientHistory { t: usize, needed: usize },
    #[error("correlation threshold {0} must lie in (0, 1)")]
    InvalidThreshold(f64),
    #[error("degenerate condition window: instrument {0} has zero variance")]
    DegenerateWindow(usize),
    #[error("singular normal equations; use a ridge strength λ > 0")]
    Singular,
    #[error("need at least {needed} rows, found {found}")]
    TooFewRows { found: usize, needed: usize },
    #[error("day {day}: {tradable} tradable instruments, basket needs {needed}")]
    TooFewTradable { day: usize, tradable: usize, needed: usize },
    #[error("straddle theta must be negative and finite, got {0}")]
    InvalidTheta(f64),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("sampler failed: {0}")]
    Sampler(String),
}

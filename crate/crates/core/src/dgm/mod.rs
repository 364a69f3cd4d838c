//! Conditional deep generative return models: an autoregressive feedforward
//! backbone trained either by moment matching (MMD) or adversarially.

mod arfnn;
mod gmmn;
mod mmd;
mod rcgan;
mod train;
mod weights;

pub use arfnn::{ArFnnModel, ArFnnShape};
pub use gmmn::{gmmn_loss, gmmn_loss_on_tape, train_gmmn, untrained_gmmn, ChannelLosses, GmmnLoss};
pub use mmd::{median_bandwidth, mmd_naive, mmd_on_tape, mmd_squared, MmdSpec, DEFAULT_MULTIPLIERS};
pub use rcgan::{discriminator_accuracy, pretrain_discriminator, train_rcgan, untrained_rcgan, RcganModel};
pub use train::{CheckRecord, GmmnModel, TrainConfig, TrainedModel};
pub use weights::{decode_weights, encode_weights, ModelMeta, WEIGHTS_MAGIC, WEIGHTS_VERSION};

use ftsbench_numeric::NumericError;
use thiserror::Error;

use crate::evaluation::EvalError;

#[derive(Debug, Error)]
pub enum DgmError {
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("expected a {expected:?} condition, found {found:?}")]
    Shape { expected: (usize, usize), found: (usize, usize) },
    #[error("zero bandwidth")]
    ZeroBandwidth,
    #[error("need at least {needed} samples, found {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("training diverged at step {step}: loss {loss}")]
    Divergence { step: usize, loss: f64 },
    #[error("mode collapse: generated std below 1% of real for {checks} consecutive checks (last ratio {ratio:.2e})")]
    ModeCollapse { checks: usize, ratio: f64 },
    #[error("training split too short: {steps} steps, need {needed}")]
    TooShort { steps: usize, needed: usize },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("malformed weights: {0}")]
    Weights(String),
}

//! Numerical building blocks: dense matrices, factorizations, a matrix-valued
//! reverse-mode tape, PReLU feedforward networks, Adam, and BFGS.

pub mod adam;
pub mod linalg;
pub mod matrix;
pub mod net;
pub mod optim;
pub mod tape;

pub use adam::{AdamConfig, AdamState};
pub use linalg::{cholesky, cholesky_log_det, cholesky_semidefinite, cholesky_solve, cholesky_with_jitter, forward_substitute, solve, spd_inverse};
pub use matrix::DenseMatrix;
pub use net::{BoundNet, FeedForwardNet, Layer, MlpShape};
pub use optim::{minimize_bfgs, numeric_gradient, BfgsOptions, BfgsResult};
pub use tape::{GradientTape, Gradients, Tape, Var};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum NumericError {
    #[error("{context}: expected dimension {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{context}: shapes {left:?} and {right:?} differ")]
    ShapeMismatch {
        context: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("matrix is not square: {0:?}")]
    NotSquare((usize, usize)),
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("matrix is not positive definite (pivot {pivot} = {value})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("singular system")]
    Singular,
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
    #[error("loss must be scalar, got shape {shape:?}")]
    NonScalar { shape: (usize, usize) },
    #[error("node {node} is not on the tape (length {len})")]
    IncompleteTape { node: usize, len: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
}

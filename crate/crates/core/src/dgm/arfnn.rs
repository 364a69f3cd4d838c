use ftsbench_numeric::{DenseMatrix, FeedForwardNet, MlpShape, Tape, Var};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::DgmError;
use crate::evaluation::{ConditionalSampler, SamplerError};
use crate::rng;

/// Hidden sizes of the backbone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArFnnShape {
    pub hidden: usize,
    pub residual_blocks: usize,
}

impl Default for ArFnnShape {
    fn default() -> Self {
        Self { hidden: 64, residual_blocks: 2 }
    }
}

/// One-step generator `x_{t+1} = f(x_{t−w+1:t}, |x_{t−w+1:t}|, z_{t+1})`.
///
/// Inputs are the time-major flattened window, its absolute values and the
/// noise vector. Returns are divided by `scale` on the way in and the
/// output is multiplied by it.
#[derive(Debug, Clone, PartialEq)]
pub struct ArFnnModel {
    pub name: String,
    pub net: FeedForwardNet,
    pub instruments: usize,
    pub window: usize,
    pub noise_dim: usize,
    pub scale: f64,
}

impl ArFnnModel {
    pub fn new<R: Rng + ?Sized>(
        rng: &mut R,
        name: &str,
        instruments: usize,
        window: usize,
        noise_dim: usize,
        scale: f64,
        shape: ArFnnShape,
    ) -> Self {
        let net = FeedForwardNet::residual_mlp(
            rng,
            MlpShape {
                input: 2 * instruments * window + noise_dim,
                hidden: shape.hidden,
                residual_blocks: shape.residual_blocks,
                output: instruments,
            },
        );
        Self { name: name.to_string(), net, instruments, window, noise_dim, scale }
    }

    pub fn from_net(name: &str, net: FeedForwardNet, instruments: usize, window: usize, noise_dim: usize, scale: f64) -> Result<Self, DgmError> {
        if net.input_dim() != 2 * instruments * window + noise_dim || net.output_dim() != instruments {
            return Err(DgmError::Config(format!(
                "network {}→{} does not fit N={instruments}, window={window}, noise={noise_dim}",
                net.input_dim(),
                net.output_dim()
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(DgmError::Config(format!("scale must be positive, got {scale}")));
        }
        Ok(Self { name: name.to_string(), net, instruments, window, noise_dim, scale })
    }

    pub fn input_dim(&self) -> usize {
        2 * self.instruments * self.window + self.noise_dim
    }

    fn check_condition(&self, condition: &DenseMatrix) -> Result<(), DgmError> {
        if condition.shape() != (self.instruments, self.window) {
            return Err(DgmError::Shape { expected: (self.instruments, self.window), found: condition.shape() });
        }
        Ok(())
    }

    /// Scaled time-major buffer of an `N × w` condition.
    fn buffer(&self, condition: &DenseMatrix) -> Vec<f64> {
        let mut b = Vec::with_capacity(self.instruments * self.window);
        for t in 0..self.window {
            for i in 0..self.instruments {
                b.push(condition[(i, t)] / self.scale);
            }
        }
        b
    }

    /// Generates `steps` values per instrument, drawing exactly
    /// `steps × noise_dim` values from `noise`.
    pub fn rollout(&self, condition: &DenseMatrix, steps: usize, noise: &mut impl FnMut() -> f64) -> Result<DenseMatrix, DgmError> {
        self.check_condition(condition)?;
        let (n, w) = (self.instruments, self.window);
        let mut buf = self.buffer(condition);
        let mut out = DenseMatrix::zeros(n, steps);
        let mut input = vec![0.0; self.input_dim()];
        for t in 0..steps {
            input[..n * w].copy_from_slice(&buf);
            for (dst, v) in input[n * w..2 * n * w].iter_mut().zip(&buf) {
                *dst = v.abs();
            }
            for v in input[2 * n * w..].iter_mut() {
                *v = noise();
            }
            let y = self.net.forward(&input)?;
            buf.drain(..n);
            buf.extend_from_slice(&y);
            for i in 0..n {
                out[(i, t)] = y[i] * self.scale;
            }
        }
        Ok(out)
    }

    /// `batch` independent rollouts; path `b` draws its noise from the stream
    /// `split(seed, b)`.
    pub fn sample_conditional(&self, condition: &DenseMatrix, steps: usize, batch: usize, seed: u64) -> Result<Vec<DenseMatrix>, DgmError> {
        self.check_condition(condition)?;
        (0..batch)
            .into_par_iter()
            .map(|b| {
                let mut r = rng::stream(rng::split(seed, b as u64));
                self.rollout(condition, steps, &mut || StandardNormal.sample(&mut r))
            })
            .collect()
    }

    /// Differentiable rollout. `condition` is `B × (w·N)` time-major in
    /// scaled units, `noise` is `B × (steps·noise_dim)`. Returns the
    /// `B × (steps·N)` generated block in scaled units.
    pub fn rollout_on_tape(
        &self,
        tape: &mut Tape,
        bound: &ftsbench_numeric::BoundNet,
        condition: Var,
        noise: &DenseMatrix,
        steps: usize,
    ) -> Result<Var, DgmError> {
        let (n, w, k) = (self.instruments, self.window, self.noise_dim);
        let mut window = condition;
        let mut outputs = Vec::with_capacity(steps);
        for t in 0..steps {
            let abs = tape.abs(window)?;
            let z = tape.leaf(DenseMatrix::from_fn(noise.rows(), k, |r, c| noise[(r, t * k + c)]));
            let input = tape.concat_cols(&[window, abs, z])?;
            let y = bound.forward(tape, input)?;
            outputs.push(y);
            let kept = tape.slice_cols(window, n, (w - 1) * n)?;
            window = tape.concat_cols(&[kept, y])?;
        }
        Ok(tape.concat_cols(&outputs)?)
    }

    /// One generated step for a batch of scaled conditions (`B × w·N`).
    pub fn step_batch(&self, condition: &DenseMatrix, noise: &DenseMatrix) -> Result<DenseMatrix, DgmError> {
        let abs = condition.map(f64::abs);
        let input = DenseMatrix::from_fn(condition.rows(), self.input_dim(), |r, c| {
            let nw = self.instruments * self.window;
            if c < nw {
                condition[(r, c)]
            } else if c < 2 * nw {
                abs[(r, c - nw)]
            } else {
                noise[(r, c - 2 * nw)]
            }
        });
        Ok(self.net.forward_batch(&input)?)
    }
}

impl ConditionalSampler for ArFnnModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn sample(&self, _start: usize, condition: &DenseMatrix, horizon: usize, batch: usize, seed: u64) -> Result<Vec<DenseMatrix>, SamplerError> {
        self.sample_conditional(condition, horizon, batch, seed).map_err(|e| SamplerError(e.to_string()))
    }
}

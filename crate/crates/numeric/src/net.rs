//! Small feedforward networks with optional residual blocks and PReLU.

use rand::Rng;

use crate::tape::{Tape, Var};
use crate::{DenseMatrix, NumericError};

/// Initial PReLU slope.
pub const DEFAULT_PRELU_SLOPE: f64 = 0.25;

/// One affine map `x·W + b`, optionally followed by PReLU and a skip connection.
///
/// `weight` is `in × out`. A residual layer computes `x + act(x·W + b)` and
/// therefore needs `in == out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: DenseMatrix,
    pub bias: DenseMatrix,
    pub prelu_slope: Option<f64>,
    pub residual: bool,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng + ?Sized>(
        rng: &mut R,
        in_dim: usize,
        out_dim: usize,
        activation: bool,
        residual: bool,
    ) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weight = DenseMatrix::from_fn(in_dim, out_dim, |_, _| rng.random_range(-limit..=limit));
        Self {
            weight,
            bias: DenseMatrix::zeros(1, out_dim),
            prelu_slope: activation.then_some(DEFAULT_PRELU_SLOPE),
            residual,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedForwardNet {
    layers: Vec<Layer>,
}

/// Layer sizes for [`FeedForwardNet::residual_mlp`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpShape {
    pub input: usize,
    pub hidden: usize,
    pub residual_blocks: usize,
    pub output: usize,
}

impl FeedForwardNet {
    pub fn new(layers: Vec<Layer>) -> Result<Self, NumericError> {
        if layers.is_empty() {
            return Err(NumericError::Empty("FeedForwardNet layers"));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.bias.shape() != (1, layer.out_dim()) {
                return Err(NumericError::InvalidNetwork(format!(
                    "layer {i}: bias shape {:?} for output width {}",
                    layer.bias.shape(),
                    layer.out_dim()
                )));
            }
            if layer.residual && layer.in_dim() != layer.out_dim() {
                return Err(NumericError::InvalidNetwork(format!(
                    "layer {i}: residual block with {} -> {}",
                    layer.in_dim(),
                    layer.out_dim()
                )));
            }
            if let Some(s) = layer.prelu_slope {
                if !s.is_finite() {
                    return Err(NumericError::InvalidNetwork(format!("layer {i}: slope {s}")));
                }
            }
            if i > 0 && layers[i - 1].out_dim() != layer.in_dim() {
                return Err(NumericError::InvalidNetwork(format!(
                    "layer {i}: expects {} inputs, previous layer emits {}",
                    layer.in_dim(),
                    layers[i - 1].out_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Input layer with PReLU, `residual_blocks` PReLU residual blocks, linear output.
    pub fn residual_mlp<R: Rng + ?Sized>(rng: &mut R, shape: MlpShape) -> Self {
        let mut layers = vec![Layer::glorot(rng, shape.input, shape.hidden, true, false)];
        for _ in 0..shape.residual_blocks {
            layers.push(Layer::glorot(rng, shape.hidden, shape.hidden, true, true));
        }
        layers.push(Layer::glorot(rng, shape.hidden, shape.output, false, false));
        Self { layers }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// Forward pass for a single input vector.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NumericError> {
        Ok(self.forward_batch(&DenseMatrix::row_vector(input))?.into_vec())
    }

    /// Forward pass for a batch of row inputs.
    pub fn forward_batch(&self, input: &DenseMatrix) -> Result<DenseMatrix, NumericError> {
        if input.cols() != self.input_dim() {
            return Err(NumericError::DimensionMismatch {
                context: "FeedForwardNet::forward",
                expected: self.input_dim(),
                found: input.cols(),
            });
        }
        let mut x = input.clone();
        for layer in &self.layers {
            let mut y = x.matmul(&layer.weight)?;
            let bias = layer.bias.as_slice();
            for r in 0..y.rows() {
                for (v, b) in y.row_mut(r).iter_mut().zip(bias) {
                    *v += b;
                }
            }
            if let Some(s) = layer.prelu_slope {
                y.as_mut_slice().iter_mut().for_each(|v| {
                    if *v <= 0.0 {
                        *v *= s
                    }
                });
            }
            if layer.residual {
                y = x.zip_map(&y, |a, b| a + b)?;
            }
            x = y;
        }
        Ok(x)
    }

    /// Parameters in a fixed order: per layer weight, bias, then slope (1×1) if present.
    pub fn parameters(&self) -> Vec<DenseMatrix> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.push(layer.weight.clone());
            out.push(layer.bias.clone());
            if let Some(s) = layer.prelu_slope {
                out.push(DenseMatrix::scalar(s));
            }
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len() + usize::from(l.prelu_slope.is_some()))
            .sum()
    }

    /// Inverse of [`FeedForwardNet::parameters`].
    pub fn set_parameters(&mut self, params: &[DenseMatrix]) -> Result<(), NumericError> {
        let mut it = params.iter();
        let mut next = |shape: (usize, usize)| -> Result<DenseMatrix, NumericError> {
            let p = it.next().ok_or(NumericError::Empty("set_parameters: too few parameters"))?;
            if p.shape() != shape {
                return Err(NumericError::ShapeMismatch {
                    context: "FeedForwardNet::set_parameters",
                    left: shape,
                    right: p.shape(),
                });
            }
            Ok(p.clone())
        };
        let mut layers = self.layers.clone();
        for layer in &mut layers {
            layer.weight = next(layer.weight.shape())?;
            layer.bias = next(layer.bias.shape())?;
            if layer.prelu_slope.is_some() {
                layer.prelu_slope = Some(next((1, 1))?.as_slice()[0]);
            }
        }
        if it.next().is_some() {
            return Err(NumericError::InvalidNetwork("set_parameters: too many parameters".into()));
        }
        self.layers = layers;
        Ok(())
    }

    /// Records every parameter as a leaf on `tape`.
    pub fn bind(&self, tape: &mut Tape) -> BoundNet {
        let layers = self
            .layers
            .iter()
            .map(|l| BoundLayer {
                weight: tape.leaf(l.weight.clone()),
                bias: tape.leaf(l.bias.clone()),
                slope: l.prelu_slope.map(|s| tape.leaf(DenseMatrix::scalar(s))),
                residual: l.residual,
            })
            .collect();
        BoundNet {
            layers,
            input_dim: self.input_dim(),
        }
    }
}

#[derive(Debug, Clone)]
struct BoundLayer {
    weight: Var,
    bias: Var,
    slope: Option<Var>,
    residual: bool,
}

/// A network whose parameters live on a tape.
#[derive(Debug, Clone)]
pub struct BoundNet {
    layers: Vec<BoundLayer>,
    input_dim: usize,
}

impl BoundNet {
    pub fn forward(&self, tape: &mut Tape, input: Var) -> Result<Var, NumericError> {
        if tape.value(input).cols() != self.input_dim {
            return Err(NumericError::DimensionMismatch {
                context: "BoundNet::forward",
                expected: self.input_dim,
                found: tape.value(input).cols(),
            });
        }
        let mut x = input;
        for layer in &self.layers {
            let z = tape.matmul(x, layer.weight)?;
            let mut y = tape.add_row(z, layer.bias)?;
            if let Some(s) = layer.slope {
                y = tape.prelu(y, s)?;
            }
            if layer.residual {
                y = tape.add(x, y)?;
            }
            x = y;
        }
        Ok(x)
    }

    /// Parameter nodes in the same order as [`FeedForwardNet::parameters`].
    pub fn parameter_vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.push(l.weight);
            out.push(l.bias);
            if let Some(s) = l.slope {
                out.push(s);
            }
        }
        out
    }
}

use ftsbench_numeric::{DenseMatrix, FeedForwardNet};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ArFnnModel, ArFnnShape, DgmError};
use crate::evaluation::{score_model, ScoreConfig};
use crate::generators::WINDOW;
use crate::rng::{self, StreamRng};

fn default_multipliers() -> Vec<f64> {
    super::mmd::DEFAULT_MULTIPLIERS.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch: usize,
    pub steps: usize,
    pub generator_lr: f64,
    pub discriminator_lr: f64,
    pub patience: usize,
    pub check_interval: usize,
    pub seed: u64,
    /// Rollout length of each GMMN training sample.
    pub horizon: usize,
    pub hidden: usize,
    pub residual_blocks: usize,
    /// Defaults to the number of instruments.
    pub noise_dim: Option<usize>,
    pub validation_batch: usize,
    pub validation_stride: usize,
    #[serde(default = "default_multipliers")]
    pub multipliers: Vec<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch: 16,
            steps: 1500,
            generator_lr: 1e-3,
            discriminator_lr: 1e-3,
            patience: 5,
            check_interval: 100,
            seed: 0,
            horizon: WINDOW,
            hidden: 64,
            residual_blocks: 2,
            noise_dim: None,
            validation_batch: 10,
            validation_stride: 20,
            multipliers: default_multipliers(),
        }
    }
}

impl TrainConfig {
    /// Defaults for moment-matching training through 40-step rollouts.
    pub fn gmmn() -> Self {
        Self::default()
    }

    /// Defaults for adversarial one-step training.
    pub fn rcgan() -> Self {
        Self {
            batch: 128,
            steps: 3000,
            generator_lr: 5e-4,
            discriminator_lr: 3e-3,
            check_interval: 200,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DgmError> {
        let positive = [
            ("batch", self.batch),
            ("steps", self.steps),
            ("check_interval", self.check_interval),
            ("horizon", self.horizon),
            ("hidden", self.hidden),
            ("validation_batch", self.validation_batch),
            ("validation_stride", self.validation_stride),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(DgmError::Config(format!("{name} must be positive")));
        }
        if self.noise_dim == Some(0) {
            return Err(DgmError::Config("noise_dim must be positive".into()));
        }
        for (name, lr) in [("generator_lr", self.generator_lr), ("discriminator_lr", self.discriminator_lr)] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(DgmError::Config(format!("{name} must be positive")));
            }
        }
        super::MmdSpec::new(1.0, &self.multipliers)?;
        Ok(())
    }

    pub fn shape(&self) -> ArFnnShape {
        ArFnnShape { hidden: self.hidden, residual_blocks: self.residual_blocks }
    }
}

/// One early-stopping check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub step: usize,
    /// Training objective on a fixed probe batch.
    pub loss: f64,
    /// Mean of the available validation EMD measures.
    pub validation: f64,
}

/// Best checkpoint plus its training history. The discriminator is present
/// for adversarially trained models.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: ArFnnModel,
    pub discriminator: Option<FeedForwardNet>,
    pub history: Vec<CheckRecord>,
    pub best_step: usize,
    pub stopped_early: bool,
}

pub type GmmnModel = TrainedModel;

impl TrainedModel {
    pub fn best(&self) -> Option<&CheckRecord> {
        self.history.iter().find(|c| c.step == self.best_step)
    }

    pub fn initial(&self) -> Option<&CheckRecord> {
        self.history.first()
    }
}

/// Pooled standard deviation of a return panel.
pub(crate) fn pooled_std(returns: &DenseMatrix) -> f64 {
    let v = returns.as_slice();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Scaled training windows drawn from a `T × N` panel.
pub(crate) struct PairSource<'a> {
    returns: &'a DenseMatrix,
    pub window: usize,
    pub horizon: usize,
    pub scale: f64,
}

impl<'a> PairSource<'a> {
    pub fn new(returns: &'a DenseMatrix, window: usize, horizon: usize) -> Result<Self, DgmError> {
        if !returns.is_finite() {
            return Err(DgmError::Config("training panel has non-finite values".into()));
        }
        Self::with_scale(returns, window, horizon, pooled_std(returns))
    }

    pub fn with_scale(returns: &'a DenseMatrix, window: usize, horizon: usize, scale: f64) -> Result<Self, DgmError> {
        let needed = window + horizon;
        if returns.rows() < needed {
            return Err(DgmError::TooShort { steps: returns.rows(), needed });
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(DgmError::Config("training panel has zero variance".into()));
        }
        Ok(Self { returns, window, horizon, scale })
    }

    pub fn instruments(&self) -> usize {
        self.returns.cols()
    }

    fn flat(&self, start: usize, len: usize, out: &mut [f64]) {
        let n = self.instruments();
        for t in 0..len {
            for i in 0..n {
                out[t * n + i] = self.returns[(start + t, i)] / self.scale;
            }
        }
    }

    /// Random `(condition B × w·N, target B × h·N)` batch.
    pub fn batch(&self, rng: &mut StreamRng, batch: usize) -> (DenseMatrix, DenseMatrix) {
        let n = self.instruments();
        let last = self.returns.rows() - self.window - self.horizon;
        let mut cond = DenseMatrix::zeros(batch, self.window * n);
        let mut target = DenseMatrix::zeros(batch, self.horizon * n);
        for b in 0..batch {
            let s = rng.random_range(0..=last);
            self.flat(s, self.window, cond.row_mut(b));
            self.flat(s + self.window, self.horizon, target.row_mut(b));
        }
        (cond, target)
    }
}

pub(crate) fn noise(rng: &mut StreamRng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Validation score of a model snapshot.
pub(crate) fn validation_score(model: &ArFnnModel, validation: &DenseMatrix, cfg: &TrainConfig) -> Result<f64, DgmError> {
    let score = ScoreConfig {
        condition: model.window,
        horizon: WINDOW,
        batch: cfg.validation_batch,
        stride: cfg.validation_stride,
        seed: rng::derive(cfg.seed, &["validation"]),
    };
    let column = score_model(validation, model, &score)?;
    column.mean_value().ok_or_else(|| DgmError::Config("validation produced no measures".into()))
}

/// Early-stopping bookkeeping shared by both trainers.
pub(crate) struct Checkpointer {
    patience: usize,
    pub history: Vec<CheckRecord>,
    best: Option<(f64, usize, FeedForwardNet, Option<FeedForwardNet>)>,
    since_best: usize,
}

impl Checkpointer {
    pub fn new(patience: usize) -> Self {
        Self { patience, history: Vec::new(), best: None, since_best: 0 }
    }

    /// Records a check; returns `true` once training should stop.
    pub fn check(&mut self, record: CheckRecord, generator: &FeedForwardNet, discriminator: Option<&FeedForwardNet>) -> bool {
        let improved = self.best.as_ref().is_none_or(|(v, ..)| record.validation < *v);
        if improved {
            self.best = Some((record.validation, record.step, generator.clone(), discriminator.cloned()));
            self.since_best = 0;
        } else {
            self.since_best += 1;
        }
        self.history.push(record);
        self.since_best >= self.patience
    }

    pub fn finish(self, mut model: ArFnnModel, stopped_early: bool) -> TrainedModel {
        let (_, best_step, net, disc) = self.best.expect("at least one check");
        model.net = net;
        TrainedModel { model, discriminator: disc, history: self.history, best_step, stopped_early }
    }
}

pub(crate) fn check_splits(train: &DenseMatrix, validation: &DenseMatrix, cfg: &TrainConfig) -> Result<(), DgmError> {
    cfg.validate()?;
    if train.cols() != validation.cols() || train.cols() == 0 {
        return Err(DgmError::Config(format!(
            "train and validation widths differ: {} vs {}",
            train.cols(),
            validation.cols()
        )));
    }
    let needed = 2 * WINDOW;
    if validation.rows() < needed {
        return Err(DgmError::TooShort { steps: validation.rows(), needed });
    }
    Ok(())
}

use ftsbench_numeric::{AdamConfig, AdamState, BoundNet, DenseMatrix, FeedForwardNet, MlpShape, Tape, Var};

use super::train::{check_splits, noise, validation_score, CheckRecord, Checkpointer, PairSource, TrainConfig, TrainedModel};
use super::{ArFnnModel, DgmError};
use crate::generators::WINDOW;
use crate::rng::{self, StreamRng};

/// Generator plus discriminator; the discriminator maps
/// `condition ++ candidate step` (scaled) to one logit.
pub type RcganModel = TrainedModel;

/// Consecutive low-spread checks that abort training.
const COLLAPSE_CHECKS: usize = 5;
const COLLAPSE_RATIO: f64 = 0.01;

fn concat(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    DenseMatrix::from_fn(a.rows(), a.cols() + b.cols(), |r, c| if c < a.cols() { a[(r, c)] } else { b[(r, c - a.cols())] })
}

fn generator_input(tape: &mut Tape, model: &ArFnnModel, cond: &DenseMatrix, z: &DenseMatrix) -> Result<Var, DgmError> {
    debug_assert_eq!(z.cols(), model.noise_dim);
    let c = tape.leaf(cond.clone());
    let a = tape.leaf(cond.map(f64::abs));
    let z = tape.leaf(z.clone());
    Ok(tape.concat_cols(&[c, a, z])?)
}

fn take_grads(tape: &Tape, loss: Var, bound: &BoundNet, params: &[DenseMatrix]) -> Result<Vec<DenseMatrix>, DgmError> {
    let mut grads = tape.backward(loss)?;
    Ok(bound
        .parameter_vars()
        .iter()
        .zip(params)
        .map(|(&v, p)| grads.take(v).unwrap_or_else(|| DenseMatrix::zeros(p.rows(), p.cols())))
        .collect())
}

/// Discriminator objective `mean softplus(−D(real)) + mean softplus(D(fake))`.
fn discriminator_loss(
    tape: &mut Tape,
    bound: &BoundNet,
    cond: &DenseMatrix,
    real: &DenseMatrix,
    fake: &DenseMatrix,
) -> Result<Var, DgmError> {
    let r = tape.leaf(concat(cond, real));
    let f = tape.leaf(concat(cond, fake));
    let lr = bound.forward(tape, r)?;
    let lr = tape.scale(lr, -1.0)?;
    let lr = tape.softplus(lr)?;
    let lr = tape.mean(lr)?;
    let lf = bound.forward(tape, f)?;
    let lf = tape.softplus(lf)?;
    let lf = tape.mean(lf)?;
    Ok(tape.add(lr, lf)?)
}

fn discriminator_step(
    disc: &mut FeedForwardNet,
    params: &mut [DenseMatrix],
    adam: &mut AdamState,
    cond: &DenseMatrix,
    real: &DenseMatrix,
    fake: &DenseMatrix,
    step: usize,
) -> Result<f64, DgmError> {
    let mut tape = Tape::new();
    let bound = disc.bind(&mut tape);
    let loss = discriminator_loss(&mut tape, &bound, cond, real, fake)?;
    let value = tape.value(loss)[(0, 0)];
    if !value.is_finite() {
        return Err(DgmError::Divergence { step, loss: value });
    }
    let g = take_grads(&tape, loss, &bound, params)?;
    adam.step(params, &g).map_err(|_| DgmError::Divergence { step, loss: value })?;
    disc.set_parameters(params)?;
    Ok(value)
}

fn new_discriminator(rng: &mut StreamRng, model: &ArFnnModel, cfg: &TrainConfig) -> FeedForwardNet {
    FeedForwardNet::residual_mlp(
        rng,
        MlpShape {
            input: (model.window + 1) * model.instruments,
            hidden: cfg.hidden,
            residual_blocks: cfg.residual_blocks,
            output: 1,
        },
    )
}

fn pooled_std(m: &DenseMatrix) -> f64 {
    super::train::pooled_std(m)
}

/// Trains a fresh discriminator against a frozen generator.
pub fn pretrain_discriminator(
    generator: &ArFnnModel,
    train: &DenseMatrix,
    cfg: &TrainConfig,
    steps: usize,
) -> Result<FeedForwardNet, DgmError> {
    let source = PairSource::with_scale(train, generator.window, 1, generator.scale)?;
    let mut rng = rng::stream(rng::derive(cfg.seed, &["rcgan", "pretrain"]));
    let mut disc = new_discriminator(&mut rng, generator, cfg);
    let mut params = disc.parameters();
    let mut adam = AdamState::new(AdamConfig { learning_rate: cfg.discriminator_lr, ..AdamConfig::default() }, &params);
    for step in 0..steps {
        let (cond, real) = source.batch(&mut rng, cfg.batch);
        let z = noise(&mut rng, cfg.batch, generator.noise_dim);
        let fake = generator.step_batch(&cond, &z)?;
        discriminator_step(&mut disc, &mut params, &mut adam, &cond, &real, &fake, step)?;
    }
    Ok(disc)
}

/// Fraction of held-out real and generated pairs the discriminator labels
/// correctly (logit > 0 means real).
pub fn discriminator_accuracy(
    discriminator: &FeedForwardNet,
    generator: &ArFnnModel,
    held_out: &DenseMatrix,
    pairs: usize,
    seed: u64,
) -> Result<f64, DgmError> {
    let source = PairSource::with_scale(held_out, generator.window, 1, generator.scale)?;
    let mut rng = rng::stream(seed);
    let (cond, real) = source.batch(&mut rng, pairs);
    let z = noise(&mut rng, pairs, generator.noise_dim);
    let fake = generator.step_batch(&cond, &z)?;
    let lr = discriminator.forward_batch(&concat(&cond, &real))?;
    let lf = discriminator.forward_batch(&concat(&cond, &fake))?;
    let correct = lr.as_slice().iter().filter(|&&v| v > 0.0).count() + lf.as_slice().iter().filter(|&&v| v <= 0.0).count();
    Ok(correct as f64 / (2 * pairs) as f64)
}

/// The generator and discriminator [`train_rcgan`] starts from.
pub fn untrained_rcgan(train: &DenseMatrix, cfg: &TrainConfig) -> Result<(ArFnnModel, FeedForwardNet), DgmError> {
    let source = PairSource::new(train, WINDOW, 1)?;
    let n = source.instruments();
    let mut init = rng::stream(rng::derive(cfg.seed, &["rcgan", "init"]));
    let model = ArFnnModel::new(&mut init, "RCGAN", n, WINDOW, cfg.noise_dim.unwrap_or(n), source.scale, cfg.shape());
    let disc = new_discriminator(&mut init, &model, cfg);
    Ok((model, disc))
}

/// Alternating discriminator/generator updates on one-step-ahead pairs; the
/// generator minimizes `mean softplus(−D(condition ++ G(condition, z)))`.
pub fn train_rcgan(train: &DenseMatrix, validation: &DenseMatrix, cfg: &TrainConfig) -> Result<RcganModel, DgmError> {
    check_splits(train, validation, cfg)?;
    let source = PairSource::new(train, WINDOW, 1)?;
    let n = source.instruments();
    let k = cfg.noise_dim.unwrap_or(n);
    let (mut model, mut disc) = untrained_rcgan(train, cfg)?;

    let mut probe_rng = rng::stream(rng::derive(cfg.seed, &["rcgan", "probe"]));
    let probe_pairs = cfg.batch.max(64);
    let (probe_cond, probe_real) = source.batch(&mut probe_rng, probe_pairs);
    let probe_noise = noise(&mut probe_rng, probe_pairs, k);
    let real_std = pooled_std(&probe_real);

    let mut batches = rng::stream(rng::derive(cfg.seed, &["rcgan", "batches"]));
    let mut g_params = model.net.parameters();
    let mut d_params = disc.parameters();
    let mut g_adam = AdamState::new(AdamConfig { learning_rate: cfg.generator_lr, ..AdamConfig::default() }, &g_params);
    let mut d_adam = AdamState::new(AdamConfig { learning_rate: cfg.discriminator_lr, ..AdamConfig::default() }, &d_params);
    let mut checkpoints = Checkpointer::new(cfg.patience);
    let mut collapsed = 0;
    let mut stopped_early = false;

    for step in 0..=cfg.steps {
        if step % cfg.check_interval == 0 || step == cfg.steps {
            let fake = model.step_batch(&probe_cond, &probe_noise)?;
            let ratio = pooled_std(&fake) / real_std;
            collapsed = if ratio < COLLAPSE_RATIO { collapsed + 1 } else { 0 };
            if collapsed >= COLLAPSE_CHECKS {
                return Err(DgmError::ModeCollapse { checks: collapsed, ratio });
            }
            let mut tape = Tape::new();
            let bound = disc.bind(&mut tape);
            let loss = discriminator_loss(&mut tape, &bound, &probe_cond, &probe_real, &fake)?;
            let loss = tape.value(loss)[(0, 0)];
            if !loss.is_finite() {
                return Err(DgmError::Divergence { step, loss });
            }
            let record = CheckRecord { step, loss, validation: validation_score(&model, validation, cfg)? };
            if checkpoints.check(record, &model.net, Some(&disc)) {
                stopped_early = step < cfg.steps;
                break;
            }
        }
        if step == cfg.steps {
            break;
        }
        let (cond, real) = source.batch(&mut batches, cfg.batch);
        let z = noise(&mut batches, cfg.batch, k);
        let fake = model.step_batch(&cond, &z)?;
        discriminator_step(&mut disc, &mut d_params, &mut d_adam, &cond, &real, &fake, step)?;

        let z = noise(&mut batches, cfg.batch, k);
        let mut tape = Tape::new();
        let g_bound = model.net.bind(&mut tape);
        let d_bound = disc.bind(&mut tape);
        let input = generator_input(&mut tape, &model, &cond, &z)?;
        let fake = g_bound.forward(&mut tape, input)?;
        let c = tape.leaf(cond.clone());
        let pair = tape.concat_cols(&[c, fake])?;
        let logit = d_bound.forward(&mut tape, pair)?;
        let logit = tape.scale(logit, -1.0)?;
        let loss = tape.softplus(logit)?;
        let loss = tape.mean(loss)?;
        let value = tape.value(loss)[(0, 0)];
        if !value.is_finite() {
            return Err(DgmError::Divergence { step, loss: value });
        }
        let g = take_grads(&tape, loss, &g_bound, &g_params)?;
        g_adam.step(&mut g_params, &g).map_err(|_| DgmError::Divergence { step, loss: value })?;
        model.net.set_parameters(&g_params)?;
    }
    Ok(checkpoints.finish(model, stopped_early))
}

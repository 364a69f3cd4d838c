use ftsbench_numeric::{AdamConfig, AdamState, DenseMatrix, Tape, Var};

use super::mmd::{mmd_on_tape, stack};
use super::train::{check_splits, noise, validation_score, CheckRecord, Checkpointer, PairSource, TrainConfig, TrainedModel};
use super::{median_bandwidth, ArFnnModel, DgmError, MmdSpec};
use crate::generators::WINDOW;
use crate::rng;

/// Per-channel MMD² values and the bandwidths used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelLosses {
    pub returns: f64,
    pub absolute: f64,
    /// Zero when no window pair had a usable correlation vector.
    pub correlation: f64,
    /// Base bandwidths for returns, absolute returns and correlations.
    pub bases: [f64; 3],
    /// Windows (real or generated) dropped from the correlation term.
    pub skipped_windows: usize,
}

impl ChannelLosses {
    pub fn total(&self) -> f64 {
        self.returns + self.absolute + self.correlation
    }
}

pub struct GmmnLoss {
    pub total: Var,
    pub channels: ChannelLosses,
}

fn keep_rows(m: &DenseMatrix, drop: &[usize]) -> Vec<usize> {
    (0..m.rows()).filter(|r| !drop.contains(r)).collect()
}

fn select(m: &DenseMatrix, rows: &[usize]) -> DenseMatrix {
    DenseMatrix::from_fn(rows.len(), m.cols(), |r, c| m[(rows[r], c)])
}

/// `MMD²(returns) + MMD²(|returns|) + MMD²(window correlations)` between a
/// real batch and a generated tape node, both `B × (steps·N)` time-major.
/// The correlation term needs `N ≥ 2` and at least three steps.
///
/// With `bases = None` each channel's bandwidth is the median heuristic over
/// the pooled real and generated samples, treated as a constant.
pub fn gmmn_loss_on_tape(
    tape: &mut Tape,
    real: &DenseMatrix,
    generated: Var,
    instruments: usize,
    steps: usize,
    multipliers: &[f64],
    bases: Option<[f64; 3]>,
) -> Result<GmmnLoss, DgmError> {
    let gen_value = tape.value(generated).clone();
    let width = instruments * steps;
    if real.cols() != width || gen_value.cols() != width {
        return Err(DgmError::Shape { expected: (real.rows(), width), found: gen_value.shape() });
    }
    let base_of = |k: usize, pooled: DenseMatrix| match bases {
        Some(b) => Ok(b[k]),
        None => median_bandwidth(&pooled),
    };

    let real_r = real.clone().reshape(real.rows() * steps, instruments)?;
    let gen_r = tape.reshape(generated, gen_value.rows() * steps, instruments)?;
    let gen_r_value = tape.value(gen_r).clone();
    let b0 = base_of(0, stack(&real_r, &gen_r_value))?;
    let l_ret = mmd_on_tape(tape, gen_r, &real_r, &MmdSpec::new(b0, multipliers)?)?;

    let real_a = real_r.map(f64::abs);
    let gen_a = tape.abs(gen_r)?;
    let b1 = base_of(1, stack(&real_a, &gen_r_value.map(f64::abs)))?;
    let l_abs = mmd_on_tape(tape, gen_a, &real_a, &MmdSpec::new(b1, multipliers)?)?;

    let mut total = tape.add(l_ret, l_abs)?;
    let mut channels = ChannelLosses {
        returns: tape.value(l_ret)[(0, 0)],
        absolute: tape.value(l_abs)[(0, 0)],
        correlation: 0.0,
        bases: [b0, b1, 0.0],
        skipped_windows: 0,
    };

    // two-point correlations are always ±1, so the channel needs three steps
    if instruments >= 2 && steps >= 3 {
        let mut side = Tape::new();
        let rv = side.leaf(real.clone());
        let rc = side.window_corr(rv, instruments, steps)?;
        let real_keep = keep_rows(real, &side.window_corr_degenerate_rows(rc));
        let real_c = select(side.value(rc), &real_keep);

        let gc = tape.window_corr(generated, instruments, steps)?;
        let gen_keep = keep_rows(&gen_value, &tape.window_corr_degenerate_rows(gc));
        channels.skipped_windows = (real.rows() - real_keep.len()) + (gen_value.rows() - gen_keep.len());
        if !real_keep.is_empty() && !gen_keep.is_empty() {
            let gc = tape.select_rows(gc, &gen_keep)?;
            let b2 = base_of(2, stack(&real_c, tape.value(gc)))?;
            let l_corr = mmd_on_tape(tape, gc, &real_c, &MmdSpec::new(b2, multipliers)?)?;
            channels.correlation = tape.value(l_corr)[(0, 0)];
            channels.bases[2] = b2;
            total = tape.add(total, l_corr)?;
        }
    }
    Ok(GmmnLoss { total, channels })
}

/// Value-only form of [`gmmn_loss_on_tape`] with median bandwidths.
pub fn gmmn_loss(
    real: &DenseMatrix,
    generated: &DenseMatrix,
    instruments: usize,
    steps: usize,
    multipliers: &[f64],
) -> Result<ChannelLosses, DgmError> {
    let mut tape = Tape::new();
    let g = tape.leaf(generated.clone());
    Ok(gmmn_loss_on_tape(&mut tape, real, g, instruments, steps, multipliers, None)?.channels)
}

/// Loss of `model` on a scaled `(condition, target)` batch with given noise.
pub(crate) fn batch_loss(
    model: &ArFnnModel,
    cond: &DenseMatrix,
    target: &DenseMatrix,
    noise: &DenseMatrix,
    horizon: usize,
    multipliers: &[f64],
) -> Result<(Tape, GmmnLoss, ftsbench_numeric::BoundNet), DgmError> {
    let mut tape = Tape::new();
    let bound = model.net.bind(&mut tape);
    let c = tape.leaf(cond.clone());
    let generated = model.rollout_on_tape(&mut tape, &bound, c, noise, horizon)?;
    let loss = gmmn_loss_on_tape(&mut tape, target, generated, model.instruments, horizon, multipliers, None)?;
    Ok((tape, loss, bound))
}

/// The generator [`train_gmmn`] starts from.
pub fn untrained_gmmn(train: &DenseMatrix, cfg: &TrainConfig) -> Result<ArFnnModel, DgmError> {
    let source = PairSource::new(train, WINDOW, cfg.horizon)?;
    let n = source.instruments();
    let mut init = rng::stream(rng::derive(cfg.seed, &["gmmn", "init"]));
    Ok(ArFnnModel::new(&mut init, "GMMN", n, WINDOW, cfg.noise_dim.unwrap_or(n), source.scale, cfg.shape()))
}

/// Trains an AR-FNN generator by minimizing the GMMN loss through the
/// rollout, keeping the checkpoint with the lowest validation score.
pub fn train_gmmn(train: &DenseMatrix, validation: &DenseMatrix, cfg: &TrainConfig) -> Result<TrainedModel, DgmError> {
    check_splits(train, validation, cfg)?;
    let source = PairSource::new(train, WINDOW, cfg.horizon)?;
    let n = source.instruments();
    let k = cfg.noise_dim.unwrap_or(n);
    let mut model = untrained_gmmn(train, cfg)?;

    let mut probe_rng = rng::stream(rng::derive(cfg.seed, &["gmmn", "probe"]));
    let (probe_cond, probe_target) = source.batch(&mut probe_rng, cfg.batch);
    let probe_noise = noise(&mut probe_rng, cfg.batch, cfg.horizon * k);

    let mut batches = rng::stream(rng::derive(cfg.seed, &["gmmn", "batches"]));
    let mut params = model.net.parameters();
    let mut adam = AdamState::new(AdamConfig { learning_rate: cfg.generator_lr, ..AdamConfig::default() }, &params);
    let mut checkpoints = Checkpointer::new(cfg.patience);
    let mut stopped_early = false;

    for step in 0..=cfg.steps {
        if step % cfg.check_interval == 0 || step == cfg.steps {
            let (_, probe, _) = batch_loss(&model, &probe_cond, &probe_target, &probe_noise, cfg.horizon, &cfg.multipliers)?;
            let loss = probe.channels.total();
            if !loss.is_finite() {
                return Err(DgmError::Divergence { step, loss });
            }
            let record = CheckRecord { step, loss, validation: validation_score(&model, validation, cfg)? };
            if checkpoints.check(record, &model.net, None) {
                stopped_early = step < cfg.steps;
                break;
            }
        }
        if step == cfg.steps {
            break;
        }
        let (cond, target) = source.batch(&mut batches, cfg.batch);
        let z = noise(&mut batches, cfg.batch, cfg.horizon * k);
        let (tape, loss, bound) = batch_loss(&model, &cond, &target, &z, cfg.horizon, &cfg.multipliers)?;
        let value = tape.value(loss.total)[(0, 0)];
        if !value.is_finite() {
            return Err(DgmError::Divergence { step, loss: value });
        }
        let mut grads = tape.backward(loss.total)?;
        let g: Vec<DenseMatrix> = bound
            .parameter_vars()
            .iter()
            .zip(&params)
            .map(|(&v, p)| grads.take(v).unwrap_or_else(|| DenseMatrix::zeros(p.rows(), p.cols())))
            .collect();
        adam.step(&mut params, &g).map_err(|_| DgmError::Divergence { step, loss: value })?;
        model.net.set_parameters(&params)?;
    }
    Ok(checkpoints.finish(model, stopped_early))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgm::ArFnnShape;
    use crate::dgm::mmd::DEFAULT_MULTIPLIERS;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut r = rng::stream(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut r))
    }

    #[test]
    fn identical_batches_have_zero_loss() {
        let real = normals(6, 3 * 10, 1);
        let l = gmmn_loss(&real, &real, 3, 10, &DEFAULT_MULTIPLIERS).unwrap();
        assert!(l.total().abs() < 1e-12);
    }

    #[test]
    fn sign_flip_shows_in_correlation_channel() {
        let n = 3;
        let steps = 40;
        let mut r = rng::stream(4);
        // strongly correlated instruments
        let real = DenseMatrix::from_fn(16, n * steps, |_, _| 0.0);
        let mut real = real;
        for b in 0..16 {
            for t in 0..steps {
                let common: f64 = StandardNormal.sample(&mut r);
                for i in 0..n {
                    let idio: f64 = StandardNormal.sample(&mut r);
                    real[(b, t * n + i)] = common + idio;
                }
            }
        }
        let mut flipped = real.clone();
        for b in 0..16 {
            for t in 0..steps {
                flipped[(b, t * n)] *= -1.0;
            }
        }
        let l = gmmn_loss(&real, &flipped, n, steps, &DEFAULT_MULTIPLIERS).unwrap();
        // the returns channel compares per-step vectors, so it sees the flip
        // through the cross-sectional dependence, but only weakly
        assert!(l.absolute.abs() < 1e-12);
        assert!(l.returns < 0.25, "{l:?}");
        assert!(l.correlation > 5.0 * l.returns, "{l:?}");
    }

    #[test]
    fn permutation_invariant() {
        let real = normals(8, 2 * 6, 5);
        let gen = normals(8, 2 * 6, 6);
        let rows: Vec<Vec<f64>> = (0..8).rev().map(|i| gen.row(i).to_vec()).collect();
        let perm = DenseMatrix::from_rows(&rows).unwrap();
        let a = gmmn_loss(&real, &gen, 2, 6, &DEFAULT_MULTIPLIERS).unwrap().total();
        let b = gmmn_loss(&real, &perm, 2, 6, &DEFAULT_MULTIPLIERS).unwrap().total();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn degenerate_windows_are_skipped_and_counted() {
        let real = normals(5, 2 * 8, 7);
        let mut gen = normals(5, 2 * 8, 8);
        for t in 0..8 {
            gen[(1, t * 2 + 1)] = 0.25;
        }
        let l = gmmn_loss(&real, &gen, 2, 8, &DEFAULT_MULTIPLIERS).unwrap();
        assert_eq!(l.skipped_windows, 1);
        assert!(l.correlation > 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (n, w, h, k) = (2, 3, 4, 2);
        let mut model =
            ArFnnModel::new(&mut rng::stream(11), "fd", n, w, k, 1.0, ArFnnShape { hidden: 4, residual_blocks: 1 });
        let cond = normals(3, w * n, 12);
        let target = normals(3, h * n, 13);
        let z = normals(3, h * k, 14);
        let mut tape = Tape::new();
        let bound = model.net.bind(&mut tape);
        let c = tape.leaf(cond.clone());
        let g = model.rollout_on_tape(&mut tape, &bound, c, &z, h).unwrap();
        let loss = gmmn_loss_on_tape(&mut tape, &target, g, n, h, &DEFAULT_MULTIPLIERS, None).unwrap();
        let bases = loss.channels.bases;
        let mut grads = tape.backward(loss.total).unwrap();
        let analytic: Vec<DenseMatrix> = bound.parameter_vars().iter().map(|&v| grads.take(v).unwrap()).collect();

        let value = |m: &ArFnnModel| {
            let mut t = Tape::new();
            let b = m.net.bind(&mut t);
            let c = t.leaf(cond.clone());
            let g = m.rollout_on_tape(&mut t, &b, c, &z, h).unwrap();
            let l = gmmn_loss_on_tape(&mut t, &target, g, n, h, &DEFAULT_MULTIPLIERS, Some(bases)).unwrap();
            t.value(l.total)[(0, 0)]
        };
        let params = model.net.parameters();
        let eps = 1e-6;
        let mut worst: f64 = 0.0;
        for (p, grad) in analytic.iter().enumerate() {
            for idx in 0..grad.len() {
                let mut plus = params.clone();
                plus[p].as_mut_slice()[idx] += eps;
                model.net.set_parameters(&plus).unwrap();
                let fp = value(&model);
                let mut minus = params.clone();
                minus[p].as_mut_slice()[idx] -= eps;
                model.net.set_parameters(&minus).unwrap();
                let fm = value(&model);
                let numeric = (fp - fm) / (2.0 * eps);
                let a = grad.as_slice()[idx];
                worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3));
            }
        }
        assert!(worst < 1e-4, "relative error {worst}");
    }
}

use ftsbench_numeric::DenseMatrix;
use rand_distr::{Distribution, StandardNormal};

use super::correlation::{block_factor, color_row};
use super::fsv::FsvState;
use super::heston::{correlate_pair, HestonState};
use super::jumps::{sample_jumps, JumpPath};
use super::ngarch::NGarchState;
use super::regime::{RegimeTracker, HIGH, LOW};
use super::{GenError, GeneratorSpec, SegmentParams};
use crate::panel::{default_ids, window_of, ReturnPanel};
use crate::rng::{self, StreamRng};

/// Conditioning and target window length.
pub const WINDOW: usize = 40;

/// Source of per-step shocks for [`build_dataset`].
///
/// Each step draws `N` standard normals for prices and, for Heston, a further
/// `N` for the independent part of the variance shocks. Drawing from
/// `ShockStream::new(seed)` in the same order reproduces a dataset's shocks.
pub struct ShockStream {
    rng: StreamRng,
}

impl ShockStream {
    pub fn new(seed: u64) -> Self {
        Self { rng: rng::stream(seed) }
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for v in out {
            *v = StandardNormal.sample(&mut self.rng);
        }
    }

    pub fn rng(&mut self) -> &mut StreamRng {
        &mut self.rng
    }
}

/// Full simulated path including burn-in.
#[derive(Debug, Clone)]
pub struct SimulatedPath {
    pub returns: DenseMatrix,
    pub variance: DenseMatrix,
    /// Correlation regime per step (burn-in steps are low).
    pub regime: Vec<u8>,
    pub jumps: Option<JumpPath>,
    pub burn_in: usize,
}

enum State {
    Ngarch(Vec<NGarchState>),
    Heston(Vec<HestonState>),
    Fsv(Vec<f64>),
}

fn pick<T: Copy>(params: &[T], i: usize) -> T {
    if params.len() == 1 {
        params[0]
    } else {
        params[i]
    }
}

/// Simulates every step, burn-in included.
pub fn simulate_path(spec: &GeneratorSpec) -> Result<SimulatedPath, GenError> {
    spec.validate()?;
    let n = spec.instruments;
    let total = spec.burn_in + spec.total_length();
    let mut shocks = ShockStream::new(spec.seed);

    // segment index for each post-burn-in step
    let mut seg_of = Vec::with_capacity(spec.total_length());
    for (k, seg) in spec.segments.iter().enumerate() {
        seg_of.extend(std::iter::repeat_n(k, seg.length));
    }

    let base_factor = match &spec.correlation {
        Some(c) => Some(block_factor(c)?),
        None => None,
    };
    let (low_factor, high_factor) = match &spec.regimes {
        Some(r) => (Some(block_factor(&r.low)?), Some(block_factor(&r.high)?)),
        None => (None, None),
    };
    let jumps = match &spec.jumps {
        Some(j) => Some(sample_jumps(j, spec.total_length(), n, rng::derive(spec.seed, &["jumps"]))?),
        None => None,
    };

    let mut state = match &spec.segments[0].params {
        SegmentParams::Ngarch(ps) => State::Ngarch((0..n).map(|i| NGarchState::initial(&pick(ps, i))).collect()),
        SegmentParams::Heston(ps) => State::Heston((0..n).map(|i| HestonState::initial(&pick(ps, i))).collect()),
        SegmentParams::Fsv(p) => {
            let mut h = Vec::with_capacity(p.log_variances.len());
            for law in &p.log_variances {
                let sd = law.innovation_std / (1.0 - law.persistence.powi(2)).sqrt();
                let z: f64 = StandardNormal.sample(shocks.rng());
                h.push(law.mean + sd * z);
            }
            State::Fsv(h)
        }
    };

    let mut returns = DenseMatrix::zeros(total, n);
    let mut variance = DenseMatrix::zeros(total, n);
    let mut regime = vec![LOW; total];
    let mut tracker: Option<RegimeTracker> = None;
    let mut z = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut scratch = Vec::with_capacity(n);

    for t in 0..total {
        let seg = if t < spec.burn_in { 0 } else { seg_of[t - spec.burn_in] };
        let params = &spec.segments[seg].params;

        if let Some(cfg) = &spec.regimes {
            if t == spec.burn_in {
                let head = DenseMatrix::from_fn(spec.burn_in, n, |r, c| returns[(r, c)]);
                tracker = Some(RegimeTracker::calibrate(cfg, &head)?);
            }
            if let Some(tr) = &tracker {
                regime[t] = tr.next_label();
            }
        }
        let factor = match (regime[t], &low_factor, &high_factor) {
            (HIGH, _, Some(h)) => Some(h),
            (_, Some(l), _) => Some(l),
            _ => base_factor.as_ref(),
        };

        let row = returns.row_mut(t);
        let var_row = variance.row_mut(t);
        match (&mut state, params) {
            (State::Ngarch(states), SegmentParams::Ngarch(ps)) => {
                shocks.fill(&mut z);
                if let Some(f) = factor {
                    color_row(f, &mut z, &mut scratch);
                }
                for i in 0..n {
                    let (r, v) = states[i].step(&pick(ps, i), z[i]);
                    row[i] = r;
                    var_row[i] = v;
                }
            }
            (State::Heston(states), SegmentParams::Heston(ps)) => {
                shocks.fill(&mut z);
                shocks.fill(&mut w);
                if let Some(f) = factor {
                    color_row(f, &mut z, &mut scratch);
                }
                for i in 0..n {
                    let p = pick(ps, i);
                    let (zs, zv) = correlate_pair(p.rho, z[i], w[i]);
                    let (r, v) = states[i].step(&p, zs, zv);
                    row[i] = r;
                    var_row[i] = v * p.dt;
                }
            }
            (State::Fsv(h), SegmentParams::Fsv(p)) => {
                FsvState { h }.step(p, shocks.rng(), row, var_row);
            }
            _ => return Err(GenError::InvalidSpec("segment family changed mid-dataset".into())),
        }
        if t >= spec.burn_in {
            if let Some(j) = &jumps {
                for (r, a) in row.iter_mut().zip(j.additions.row(t - spec.burn_in)) {
                    *r += a;
                }
            }
        }
        if t >= spec.burn_in {
            if let Some(tr) = &mut tracker {
                tr.observe(returns.row(t));
            }
        }
    }
    if !returns.is_finite() {
        return Err(GenError::NonFinite);
    }
    Ok(SimulatedPath { returns, variance, regime, jumps, burn_in: spec.burn_in })
}

/// Simulates the stitched dataset and discards the burn-in.
pub fn build_dataset(spec: &GeneratorSpec) -> Result<ReturnPanel, GenError> {
    let path = simulate_path(spec)?;
    let keep = path.burn_in..path.returns.rows();
    let t = keep.len();
    let n = spec.instruments;
    let rows = |m: &DenseMatrix| DenseMatrix::from_fn(t, n, |r, c| m[(keep.start + r, c)]);
    let (jumps, jump_regime) = match path.jumps {
        Some(j) => (j.additions, j.large_regime),
        None => (DenseMatrix::zeros(t, n), vec![0; t]),
    };
    let panel = ReturnPanel {
        instruments: default_ids(n),
        returns: rows(&path.returns),
        variance: rows(&path.variance),
        jumps,
        jump_regime,
        regime: path.regime[keep].to_vec(),
        spec_hash: spec.content_hash(),
    };
    panel.validate().map_err(|e| GenError::InvalidSpec(e.to_string()))?;
    Ok(panel)
}

/// Split lengths for chronological fractions (train and validation rounded,
/// test takes the remainder).
pub fn split_lengths(steps: usize, fractions: [f64; 3]) -> Result<[usize; 3], GenError> {
    let sum: f64 = fractions.iter().sum();
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) || (sum - 1.0).abs() > 1e-9 {
        return Err(GenError::InvalidSplit(format!("fractions {fractions:?} must sum to 1")));
    }
    let train = ((steps as f64 * fractions[0]).round() as usize).min(steps);
    let val = ((steps as f64 * fractions[1]).round() as usize).min(steps - train);
    Ok([train, val, steps - train - val])
}

/// Contiguous chronological train/validation/test split.
pub fn split_dataset(
    panel: &ReturnPanel,
    fractions: [f64; 3],
) -> Result<(ReturnPanel, ReturnPanel, ReturnPanel), GenError> {
    let [a, b, c] = split_lengths(panel.steps(), fractions)?;
    for (len, frac) in [(a, fractions[0]), (b, fractions[1]), (c, fractions[2])] {
        if frac > 0.0 && len < 2 * WINDOW {
            return Err(GenError::TooShort { steps: len, needed: 2 * WINDOW });
        }
    }
    Ok((panel.slice(0..a), panel.slice(a..a + b), panel.slice(a + b..a + b + c)))
}

/// A conditioning window and the realized window that follows it, both `N × len`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowPair {
    pub start: usize,
    pub condition: DenseMatrix,
    pub target: DenseMatrix,
}

/// Number of stride-1 pairs in a panel of `steps` rows.
pub fn window_count(steps: usize, condition: usize, target: usize) -> usize {
    (steps + 1).saturating_sub(condition + target)
}

/// Stride-1 sliding (condition, target) pairs; `T − cond − target + 1` of them.
pub fn conditioning_windows(
    returns: &DenseMatrix,
    condition: usize,
    target: usize,
) -> Result<Vec<WindowPair>, GenError> {
    conditioning_windows_strided(returns, condition, target, 1)
}

/// Like [`conditioning_windows`] but keeping every `stride`-th pair.
pub fn conditioning_windows_strided(
    returns: &DenseMatrix,
    condition: usize,
    target: usize,
    stride: usize,
) -> Result<Vec<WindowPair>, GenError> {
    let count = window_count(returns.rows(), condition, target);
    if count == 0 {
        return Err(GenError::TooShort { steps: returns.rows(), needed: condition + target });
    }
    Ok((0..count)
        .step_by(stride.max(1))
        .map(|s| WindowPair {
            start: s,
            condition: window_of(returns, s, condition),
            target: window_of(returns, s + condition, target),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::regime::apply_regimes;
    use crate::generators::{
        simulate_ngarch, BlockCorrelationSpec, HestonParams, ModelFamily, NGarchParams, RegimeConfig, Segment,
    };

    fn ngarch(omega: f64) -> NGarchParams {
        NGarchParams { mu: 0.0002, omega, alpha: 0.88, beta: 0.06, gamma: 0.4, sigma0: 0.01 }
    }

    fn single(seed: u64) -> GeneratorSpec {
        GeneratorSpec {
            name: "t".into(),
            family: ModelFamily::Ngarch,
            instruments: 3,
            burn_in: 100,
            seed,
            segments: vec![Segment { length: 200, params: SegmentParams::Ngarch(vec![ngarch(2e-6)]) }],
            correlation: Some(BlockCorrelationSpec { block_sizes: vec![2, 1], within: vec![0.6, 0.6], across: 0.2 }),
            regimes: None,
            jumps: None,
        }
    }

    #[test]
    fn single_segment_matches_direct_simulation() {
        let spec = single(42);
        let panel = build_dataset(&spec).unwrap();
        let total = 300;
        let factor = block_factor(spec.correlation.as_ref().unwrap()).unwrap();
        let mut stream = ShockStream::new(42);
        let mut cols = vec![Vec::with_capacity(total); 3];
        let mut z = vec![0.0; 3];
        let mut scratch = Vec::new();
        for _ in 0..total {
            stream.fill(&mut z);
            color_row(&factor, &mut z, &mut scratch);
            for i in 0..3 {
                cols[i].push(z[i]);
            }
        }
        for i in 0..3 {
            let (r, v) = simulate_ngarch(&ngarch(2e-6), total, &cols[i]).unwrap();
            assert_eq!(panel.series(i), r[100..].to_vec());
            assert_eq!(panel.variance.column(i), v[100..].to_vec());
        }
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(build_dataset(&single(7)).unwrap(), build_dataset(&single(7)).unwrap());
        assert_ne!(build_dataset(&single(7)).unwrap().returns, build_dataset(&single(8)).unwrap().returns);
    }

    #[test]
    fn fifty_segments_of_five_hundred() {
        let mut spec = single(1);
        spec.instruments = 2;
        spec.correlation = None;
        spec.burn_in = 0;
        spec.segments = (0..50)
            .map(|k| Segment { length: 500, params: SegmentParams::Ngarch(vec![ngarch(1e-6 * (1.0 + k as f64 / 10.0))]) })
            .collect();
        assert_eq!(build_dataset(&spec).unwrap().steps(), 25_000);
    }

    #[test]
    fn regime_switches_after_high_variance_segment() {
        let blocks = |rho| BlockCorrelationSpec { block_sizes: vec![4], within: vec![rho], across: 0.0 };
        let mut spec = single(3);
        spec.instruments = 4;
        spec.correlation = None;
        spec.burn_in = 500;
        spec.regimes = Some(RegimeConfig { window: 20, percentile: 95.0, low: blocks(0.2), high: blocks(0.8) });
        spec.segments = vec![
            Segment { length: 300, params: SegmentParams::Ngarch(vec![ngarch(2e-6)]) },
            Segment { length: 300, params: SegmentParams::Ngarch(vec![ngarch(2e-4)]) },
        ];
        let path = simulate_path(&spec).unwrap();
        let panel = build_dataset(&spec).unwrap();
        assert_eq!(panel.regime, path.regime[500..].to_vec());
        // labels are a pure function of the realized path
        let recomputed = apply_regimes(&path.returns, 500, spec.regimes.as_ref().unwrap()).unwrap();
        assert_eq!(recomputed, panel.regime);
        assert!(panel.regime[300..300 + 20].contains(&HIGH));
    }

    #[test]
    fn heston_plus_jumps_cluster_in_large_regime() {
        use crate::generators::{JumpConfig, JumpSize};
        let hp = HestonParams { mu: 0.05, kappa: 3.0, theta: 0.04, sigma_v: 0.4, rho: -0.6, v0: 0.04, s0: 1.0, dt: 1.0 / 252.0 };
        let spec = GeneratorSpec {
            name: "h".into(),
            family: ModelFamily::Heston,
            instruments: 3,
            burn_in: 100,
            seed: 5,
            segments: vec![Segment { length: 2000, params: SegmentParams::Heston(vec![hp]) }],
            correlation: Some(BlockCorrelationSpec { block_sizes: vec![3], within: vec![0.5], across: 0.0 }),
            regimes: None,
            jumps: Some(JumpConfig {
                normal_intensity: 0.005,
                large_intensity: 0.3,
                base_probability: 0.01,
                cycle_amplitude: 0.2,
                cycle_period: 63,
                normal_size: JumpSize { mean: 0.0, std: 0.01 },
                large_size: JumpSize { mean: -0.01, std: 0.05 },
                enforcement_horizon: 126,
            }),
        };
        let p = build_dataset(&spec).unwrap();
        let (mut large_days, mut large_jumps, mut normal_days, mut normal_jumps) = (0.0, 0.0, 0.0, 0.0);
        for t in 0..p.steps() {
            let jumped = p.jumps.row(t).iter().filter(|&&v| v != 0.0).count() as f64;
            if p.jump_regime[t] == 1 {
                large_days += 1.0;
                large_jumps += jumped;
            } else {
                normal_days += 1.0;
                normal_jumps += jumped;
            }
        }
        assert!(large_jumps / large_days > 10.0 * normal_jumps / normal_days);
    }

    #[test]
    fn split_lengths_follow_fractions() {
        assert_eq!(split_lengths(1000, [0.6, 0.2, 0.2]).unwrap(), [600, 200, 200]);
        assert_eq!(split_lengths(25_000, [0.6, 0.2, 0.2]).unwrap(), [15_000, 5_000, 5_000]);
        assert_eq!(split_lengths(1000, [1.0, 0.0, 0.0]).unwrap(), [1000, 0, 0]);
        assert!(split_lengths(1000, [0.5, 0.2, 0.2]).is_err());
        let panel = ReturnPanel::from_returns(DenseMatrix::zeros(1000, 2));
        let (a, b, c) = split_dataset(&panel, [1.0, 0.0, 0.0]).unwrap();
        assert_eq!((a.steps(), b.steps(), c.steps()), (1000, 0, 0));
        let short = ReturnPanel::from_returns(DenseMatrix::zeros(300, 2));
        assert!(matches!(split_dataset(&short, [0.6, 0.2, 0.2]), Err(GenError::TooShort { .. })));
    }

    #[test]
    fn window_counts() {
        let r = DenseMatrix::from_fn(120, 2, |t, i| (t * 2 + i) as f64);
        let w = conditioning_windows(&r, 40, 40).unwrap();
        assert_eq!(w.len(), 41);
        assert_eq!(w[0].condition, window_of(&r, 0, 40));
        assert_eq!(w[0].target[(1, 0)], r[(40, 1)]);
        assert_eq!(conditioning_windows(&DenseMatrix::zeros(80, 2), 40, 40).unwrap().len(), 1);
        assert!(conditioning_windows(&DenseMatrix::zeros(79, 2), 40, 40).is_err());
    }
}

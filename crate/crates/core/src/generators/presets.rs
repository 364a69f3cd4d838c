//! Shipped dataset definitions. Parameter grids, regime percentile and regime
//! correlation matrices are choices of this crate, not recovered values.

use super::*;

const DT: f64 = 1.0 / 252.0;

fn ngarch_segment(k: usize) -> NGarchParams {
    // cycle through calm, moderate and stressed parameterizations
    let omega = [1.0e-6, 3.0e-6, 8.0e-6][k % 3] * (1.0 + 0.05 * (k / 3) as f64);
    let (alpha, beta, gamma) = [(0.90, 0.05, 0.5), (0.85, 0.08, 0.8), (0.80, 0.08, 1.0)][k % 3];
    NGarchParams { mu: 2.0e-4, omega, alpha, beta, gamma, sigma0: 0.01 }
}

fn heston_segment(k: usize) -> HestonParams {
    let theta = [0.03, 0.05, 0.09][k % 3];
    let (kappa, sigma_v, rho) = [(4.0, 0.4, -0.6), (3.0, 0.5, -0.7), (2.0, 0.6, -0.8)][k % 3];
    HestonParams { mu: 0.05, kappa, theta, sigma_v, rho, v0: theta, s0: 100.0, dt: DT }
}

/// Two roughly equal blocks.
fn halves(n: usize, within: f64, across: f64) -> BlockCorrelationSpec {
    let a = n.div_ceil(2);
    let mut sizes = vec![a];
    if n > a {
        sizes.push(n - a);
    }
    let within = vec![within; sizes.len()];
    BlockCorrelationSpec { block_sizes: sizes, within, across }
}

fn regimes(n: usize) -> RegimeConfig {
    RegimeConfig { window: 20, percentile: 90.0, low: halves(n, 0.4, 0.1), high: halves(n, 0.8, 0.5) }
}

fn jumps() -> JumpConfig {
    JumpConfig {
        normal_intensity: 0.002,
        large_intensity: 0.15,
        base_probability: 0.0,
        cycle_amplitude: 0.05,
        cycle_period: 63,
        normal_size: JumpSize { mean: 0.0, std: 0.02 },
        large_size: JumpSize { mean: -0.01, std: 0.05 },
        enforcement_horizon: LARGE_JUMP_HORIZON,
    }
}

fn split_lengths(total: usize, segments: usize) -> Vec<usize> {
    if segments == 0 {
        return Vec::new();
    }
    let base = total / segments;
    (0..segments).map(|k| if k + 1 == segments { total - base * k } else { base }).collect()
}

/// Plain NGARCH: stitched segments with block correlation only.
pub fn ngarch(instruments: usize, steps: usize, segments: usize, seed: u64) -> GeneratorSpec {
    GeneratorSpec {
        name: "ngarch".into(),
        family: ModelFamily::Ngarch,
        instruments,
        burn_in: DEFAULT_BURN_IN,
        seed,
        segments: split_lengths(steps, segments)
            .into_iter()
            .enumerate()
            .map(|(k, length)| Segment { length, params: SegmentParams::Ngarch(vec![ngarch_segment(k)]) })
            .collect(),
        correlation: Some(halves(instruments, 0.6, 0.2)),
        regimes: None,
        jumps: None,
    }
}

/// NGARCH with volatility-triggered correlation regimes and cyclic jumps.
pub fn ngarch_plus(instruments: usize, steps: usize, segments: usize, seed: u64) -> GeneratorSpec {
    GeneratorSpec {
        name: "ngarch_plus".into(),
        correlation: None,
        regimes: Some(regimes(instruments)),
        jumps: Some(jumps()),
        ..ngarch(instruments, steps, segments, seed)
    }
}

/// Plain Heston.
pub fn heston(instruments: usize, steps: usize, segments: usize, seed: u64) -> GeneratorSpec {
    GeneratorSpec {
        name: "heston".into(),
        family: ModelFamily::Heston,
        instruments,
        burn_in: DEFAULT_BURN_IN,
        seed,
        segments: split_lengths(steps, segments)
            .into_iter()
            .enumerate()
            .map(|(k, length)| Segment { length, params: SegmentParams::Heston(vec![heston_segment(k)]) })
            .collect(),
        correlation: Some(halves(instruments, 0.6, 0.2)),
        regimes: None,
        jumps: None,
    }
}

/// Heston with regimes and jumps.
pub fn heston_plus(instruments: usize, steps: usize, segments: usize, seed: u64) -> GeneratorSpec {
    GeneratorSpec {
        name: "heston_plus".into(),
        correlation: None,
        regimes: Some(regimes(instruments)),
        jumps: Some(jumps()),
        ..heston(instruments, steps, segments, seed)
    }
}

/// Desk-scale NGARCH+: 5 instruments, 5000 steps, 3 segments.
pub fn ngarch_plus_desk(seed: u64) -> GeneratorSpec {
    ngarch_plus(5, 5000, 3, seed)
}

/// Full-scale layout: 50 instruments, 50 segments of 500 steps.
pub fn ngarch_plus_full(seed: u64) -> GeneratorSpec {
    ngarch_plus(50, 25_000, 50, seed)
}

/// Named preset lookup.
pub fn by_name(name: &str, instruments: usize, steps: usize, segments: usize, seed: u64) -> Option<GeneratorSpec> {
    let f = match name {
        "ngarch" => ngarch,
        "ngarch_plus" => ngarch_plus,
        "heston" => heston,
        "heston_plus" => heston_plus,
        _ => return None,
    };
    Some(f(instruments, steps, segments, seed))
}

use ftsbench_numeric::DenseMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};

use super::{GenError, JumpConfig};
use crate::rng;

/// Sampled jump layer.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpPath {
    /// `steps × N` summed jump log-returns.
    pub additions: DenseMatrix,
    /// `steps × N` jump counts.
    pub counts: DenseMatrix,
    /// 1 on large-regime days.
    pub large_regime: Vec<u8>,
}

/// Draws the cyclical large-regime indicator, forcing at least one large day
/// per enforcement block, then Poisson jump counts and normal jump sizes.
pub fn sample_jumps(
    config: &JumpConfig,
    steps: usize,
    instruments: usize,
    seed: u64,
) -> Result<JumpPath, GenError> {
    config.validate()?;
    let mut r = rng::stream(seed);
    let mut large: Vec<u8> = (0..steps)
        .map(|t| u8::from(r.random::<f64>() < config.large_probability(t)))
        .collect();
    let horizon = config.enforcement_horizon;
    let mut start = 0;
    while start < steps {
        let end = (start + horizon).min(steps);
        if !large[start..end].contains(&1) {
            let day = r.random_range(start..end);
            large[day] = 1;
        }
        start = end;
    }
    let mut additions = DenseMatrix::zeros(steps, instruments);
    let mut counts = DenseMatrix::zeros(steps, instruments);
    let normal_size = Normal::new(config.normal_size.mean, config.normal_size.std)
        .map_err(|e| GenError::InvalidParams(e.to_string()))?;
    let large_size = Normal::new(config.large_size.mean, config.large_size.std)
        .map_err(|e| GenError::InvalidParams(e.to_string()))?;
    for t in 0..steps {
        let (intensity, size) = if large[t] == 1 {
            (config.large_intensity, &large_size)
        } else {
            (config.normal_intensity, &normal_size)
        };
        if intensity <= 0.0 {
            continue;
        }
        let poisson = Poisson::new(intensity).map_err(|e| GenError::InvalidParams(e.to_string()))?;
        for i in 0..instruments {
            let k: f64 = poisson.sample(&mut r);
            let mut total = 0.0;
            for _ in 0..k as u64 {
                total += size.sample(&mut r);
            }
            counts[(t, i)] = k;
            additions[(t, i)] = total;
        }
    }
    Ok(JumpPath { additions, counts, large_regime: large })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::JumpSize;

    fn cfg() -> JumpConfig {
        JumpConfig {
            normal_intensity: 0.0,
            large_intensity: 0.0,
            base_probability: 0.0,
            cycle_amplitude: 0.0,
            cycle_period: 63,
            normal_size: JumpSize { mean: 0.0, std: 0.01 },
            large_size: JumpSize { mean: -0.02, std: 0.05 },
            enforcement_horizon: 126,
        }
    }

    #[test]
    fn zero_intensity_adds_nothing_but_still_forces_large_days() {
        let path = sample_jumps(&cfg(), 500, 3, 1).unwrap();
        assert!(path.additions.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(path.large_regime.iter().filter(|&&v| v == 1).count(), 4);

        let forced = JumpConfig { large_intensity: 2.0, ..cfg() };
        let path = sample_jumps(&forced, 500, 3, 1).unwrap();
        for t in 0..500 {
            let any = path.additions.row(t).iter().any(|&v| v != 0.0);
            if path.large_regime[t] == 0 {
                assert!(!any);
            }
        }
        assert!(path.additions.as_slice().iter().any(|&v| v != 0.0));
    }

    #[test]
    fn poisson_mean_matches_intensity() {
        let c = JumpConfig { normal_intensity: 0.1, large_intensity: 0.1, ..cfg() };
        let n = 100_000;
        let path = sample_jumps(&c, n, 1, 9).unwrap();
        let mean = path.counts.sum() / n as f64;
        let se = (0.1f64 / n as f64).sqrt();
        assert!((mean - 0.1).abs() < 3.0 * se, "{mean}");
    }

    #[test]
    fn every_semiannual_block_has_a_large_day() {
        let c = JumpConfig { base_probability: 0.001, cycle_amplitude: 0.002, ..cfg() };
        for seed in 0..50 {
            let path = sample_jumps(&c, 1260, 2, seed).unwrap();
            for block in path.large_regime.chunks(126) {
                assert!(block.contains(&1), "seed {seed}");
            }
        }
    }
}

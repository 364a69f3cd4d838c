//! Parameter types for the synthetic generators.

use ftsbench_numeric::{cholesky, DenseMatrix};
use serde::{Deserialize, Serialize};

use super::GenError;

/// Shortest segment length; matches the conditioning window.
pub const MIN_SEGMENT_LENGTH: usize = 40;
pub const DEFAULT_BURN_IN: usize = 500;
pub const LARGE_JUMP_HORIZON: usize = 126;

/// Asymmetric GARCH(1,1) with leverage:
/// `σ²ₜ = ω + β(εₜ₋₁ − γσₜ₋₁)² + ασ²ₜ₋₁`.
///
/// Note that `beta` multiplies the innovation term and `alpha` the lagged
/// variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NGarchParams {
    pub mu: f64,
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub sigma0: f64,
}

impl NGarchParams {
    pub fn persistence(&self) -> f64 {
        self.alpha + self.beta * (1.0 + self.gamma * self.gamma)
    }

    pub fn unconditional_variance(&self) -> f64 {
        self.omega / (1.0 - self.persistence())
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let finite = [self.mu, self.omega, self.alpha, self.beta, self.gamma, self.sigma0]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.omega <= 0.0 || self.alpha < 0.0 || self.beta < 0.0 || self.sigma0 <= 0.0 {
            return Err(GenError::InvalidParams(format!("NGARCH: {self:?}")));
        }
        if self.persistence() >= 1.0 {
            return Err(GenError::InvalidParams(format!(
                "NGARCH: alpha + beta(1+gamma^2) = {} must be < 1",
                self.persistence()
            )));
        }
        Ok(())
    }
}

/// Heston stochastic volatility; `dt` is in years.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HestonParams {
    pub mu: f64,
    pub kappa: f64,
    pub theta: f64,
    pub sigma_v: f64,
    pub rho: f64,
    pub v0: f64,
    pub s0: f64,
    pub dt: f64,
}

impl HestonParams {
    pub fn validate(&self) -> Result<(), GenError> {
        let ok = self.kappa > 0.0
            && self.theta > 0.0
            && self.sigma_v >= 0.0
            && self.v0 > 0.0
            && self.s0 > 0.0
            && self.dt > 0.0
            && self.rho.abs() <= 1.0
            && self.mu.is_finite();
        if !ok {
            return Err(GenError::InvalidParams(format!("Heston: {self:?}")));
        }
        Ok(())
    }
}

/// AR(1) law of one latent log-variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogVarianceAr1 {
    pub mean: f64,
    pub persistence: f64,
    pub innovation_std: f64,
}

impl LogVarianceAr1 {
    /// `E[exp(h)]` under the stationary law.
    pub fn stationary_mean_exp(&self) -> f64 {
        let var = self.innovation_std.powi(2) / (1.0 - self.persistence.powi(2));
        (self.mean + 0.5 * var).exp()
    }
}

/// Forward-simulation parameters of a factor stochastic volatility model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsvForwardParams {
    /// `n` rows of `m` factor loadings.
    pub loadings: Vec<Vec<f64>>,
    /// When set, loadings above the diagonal (`j > i`) must be zero.
    #[serde(default)]
    pub triangular_loadings: bool,
    /// `n` idiosyncratic laws followed by `m` factor laws.
    pub log_variances: Vec<LogVarianceAr1>,
}

impl FsvForwardParams {
    pub fn instruments(&self) -> usize {
        self.loadings.len()
    }

    pub fn factors(&self) -> usize {
        self.loadings.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let (n, m) = (self.instruments(), self.factors());
        if n == 0 || m >= n {
            return Err(GenError::InvalidParams(format!("FSV: need 0 < m < n, got n={n}, m={m}")));
        }
        if self.loadings.iter().any(|r| r.len() != m || r.iter().any(|v| !v.is_finite())) {
            return Err(GenError::InvalidParams("FSV: ragged or non-finite loadings".into()));
        }
        if self.triangular_loadings
            && (0..n).any(|i| (i + 1..m).any(|j| self.loadings[i][j] != 0.0))
        {
            return Err(GenError::InvalidParams("FSV: loadings above the diagonal must be zero".into()));
        }
        if self.log_variances.len() != n + m {
            return Err(GenError::InvalidParams(format!(
                "FSV: expected {} log-variance laws, got {}",
                n + m,
                self.log_variances.len()
            )));
        }
        if self
            .log_variances
            .iter()
            .any(|h| !(h.persistence.abs() < 1.0) || h.innovation_std < 0.0 || !h.mean.is_finite())
        {
            return Err(GenError::InvalidParams("FSV: persistence must lie in (-1, 1)".into()));
        }
        Ok(())
    }
}

/// Block-structured correlation: high within blocks, `across` between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockCorrelationSpec {
    pub block_sizes: Vec<usize>,
    pub within: Vec<f64>,
    pub across: f64,
}

impl BlockCorrelationSpec {
    pub fn instruments(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    pub fn matrix(&self) -> Result<DenseMatrix, GenError> {
        if self.block_sizes.len() != self.within.len() || self.block_sizes.contains(&0) {
            return Err(GenError::InvalidParams(
                "correlation blocks: one nonzero size per within-block correlation".into(),
            ));
        }
        let mut block_of = Vec::with_capacity(self.instruments());
        for (b, &size) in self.block_sizes.iter().enumerate() {
            block_of.extend(std::iter::repeat_n(b, size));
        }
        let n = block_of.len();
        Ok(DenseMatrix::from_fn(n, n, |i, j| {
            if i == j {
                1.0
            } else if block_of[i] == block_of[j] {
                self.within[block_of[i]]
            } else {
                self.across
            }
        }))
    }

    /// Checks positive definiteness via Cholesky.
    pub fn validate(&self) -> Result<DenseMatrix, GenError> {
        let m = self.matrix()?;
        cholesky(&m).map_err(|e| GenError::InvalidCorrelation(e.to_string()))?;
        Ok(m)
    }
}

/// Volatility-triggered switch between two correlation structures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeConfig {
    pub window: usize,
    /// Percentile (0–100) of the burn-in volatility measure. 100 disables the
    /// high regime, 0 makes it permanent.
    pub percentile: f64,
    pub low: BlockCorrelationSpec,
    pub high: BlockCorrelationSpec,
}

impl RegimeConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        if self.window < 2 || !(0.0..=100.0).contains(&self.percentile) {
            return Err(GenError::InvalidParams(format!(
                "regimes: window {} / percentile {}",
                self.window, self.percentile
            )));
        }
        self.low.validate()?;
        self.high.validate()?;
        Ok(())
    }
}

/// Normal law of a single log-return jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpSize {
    pub mean: f64,
    pub std: f64,
}

/// Poisson jumps whose intensity and size follow a cyclical two-state regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpConfig {
    /// Jumps per day per instrument in the normal regime.
    pub normal_intensity: f64,
    /// Jumps per day per instrument in the large regime.
    pub large_intensity: f64,
    /// Large-regime probability `p_base + p_amp·max(0, sin(2πt/period))`.
    pub base_probability: f64,
    pub cycle_amplitude: f64,
    pub cycle_period: usize,
    pub normal_size: JumpSize,
    pub large_size: JumpSize,
    /// Every block of this many days holds at least one large-regime day.
    #[serde(default = "default_horizon")]
    pub enforcement_horizon: usize,
}

fn default_horizon() -> usize {
    LARGE_JUMP_HORIZON
}

impl JumpConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        let ok = self.normal_intensity >= 0.0
            && self.large_intensity >= 0.0
            && (0.0..=1.0).contains(&self.base_probability)
            && self.cycle_amplitude >= 0.0
            && self.cycle_period > 0
            && self.normal_size.std > 0.0
            && self.large_size.std > 0.0
            && self.enforcement_horizon > 0;
        if !ok {
            return Err(GenError::InvalidParams(format!("jumps: {self:?}")));
        }
        Ok(())
    }

    pub fn large_probability(&self, day: usize) -> f64 {
        let phase = 2.0 * std::f64::consts::PI * day as f64 / self.cycle_period as f64;
        (self.base_probability + self.cycle_amplitude * phase.sin().max(0.0)).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Ngarch,
    Heston,
    Fsv,
}

/// Parameters of one stitched segment. A single-entry list is shared by all
/// instruments; otherwise there is one entry per instrument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentParams {
    Ngarch(Vec<NGarchParams>),
    Heston(Vec<HestonParams>),
    Fsv(FsvForwardParams),
}

impl SegmentParams {
    pub fn family(&self) -> ModelFamily {
        match self {
            SegmentParams::Ngarch(_) => ModelFamily::Ngarch,
            SegmentParams::Heston(_) => ModelFamily::Heston,
            SegmentParams::Fsv(_) => ModelFamily::Fsv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub length: usize,
    pub params: SegmentParams,
}

/// Complete description of a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub name: String,
    pub family: ModelFamily,
    pub instruments: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    pub seed: u64,
    pub segments: Vec<Segment>,
    #[serde(default)]
    pub correlation: Option<BlockCorrelationSpec>,
    #[serde(default)]
    pub regimes: Option<RegimeConfig>,
    #[serde(default)]
    pub jumps: Option<JumpConfig>,
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

impl GeneratorSpec {
    pub fn total_length(&self) -> usize {
        self.segments.iter().map(|s| s.length).sum()
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if self.segments.is_empty() {
            return Err(GenError::InvalidSpec("at least one segment is required".into()));
        }
        if self.instruments == 0 {
            return Err(GenError::InvalidSpec("instruments must be positive".into()));
        }
        for (k, seg) in self.segments.iter().enumerate() {
            if seg.length < MIN_SEGMENT_LENGTH {
                return Err(GenError::InvalidSpec(format!(
                    "segment {k} has length {} < {MIN_SEGMENT_LENGTH}",
                    seg.length
                )));
            }
            if seg.params.family() != self.family {
                return Err(GenError::InvalidSpec(format!("segment {k} does not match the model family")));
            }
            match &seg.params {
                SegmentParams::Ngarch(ps) => {
                    self.check_count(k, ps.len())?;
                    ps.iter().try_for_each(NGarchParams::validate)?;
                }
                SegmentParams::Heston(ps) => {
                    self.check_count(k, ps.len())?;
                    ps.iter().try_for_each(HestonParams::validate)?;
                }
                SegmentParams::Fsv(p) => {
                    p.validate()?;
                    if p.instruments() != self.instruments {
                        return Err(GenError::InvalidSpec(format!(
                            "segment {k}: FSV loadings cover {} instruments",
                            p.instruments()
                        )));
                    }
                }
            }
        }
        if let Some(c) = &self.correlation {
            if c.instruments() != self.instruments {
                return Err(GenError::InvalidSpec("correlation blocks do not cover all instruments".into()));
            }
            c.validate()?;
        }
        if let Some(r) = &self.regimes {
            r.validate()?;
            if r.low.instruments() != self.instruments || r.high.instruments() != self.instruments {
                return Err(GenError::InvalidSpec("regime blocks do not cover all instruments".into()));
            }
            if self.burn_in < r.window {
                return Err(GenError::BurnInTooShort {
                    burn_in: self.burn_in,
                    window: r.window,
                });
            }
        }
        if let Some(j) = &self.jumps {
            j.validate()?;
        }
        if self.family == ModelFamily::Fsv && (self.correlation.is_some() || self.regimes.is_some()) {
            return Err(GenError::InvalidSpec(
                "FSV datasets take their dependence from the factor loadings".into(),
            ));
        }
        Ok(())
    }

    fn check_count(&self, segment: usize, count: usize) -> Result<(), GenError> {
        if count == 1 || count == self.instruments {
            Ok(())
        } else {
            Err(GenError::InvalidSpec(format!(
                "segment {segment}: {count} parameter sets for {} instruments",
                self.instruments
            )))
        }
    }

    /// Hex SHA-256 of the canonical TOML rendering.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let text = toml::to_string(self).expect("generator spec serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("generator spec serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, GenError> {
        let spec: Self = toml::from_str(text).map_err(|e| GenError::Parse(e.to_string()))?;
        Ok(spec)
    }
}

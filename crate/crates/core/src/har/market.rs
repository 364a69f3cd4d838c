use ftsbench_numeric::DenseMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, Normal};

use super::HarError;
use crate::rng;

pub const TRADING_DAYS: f64 = 252.0;
const MIN_IMPLIED_VOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketConfig {
    /// Relative premium of implied over true volatility.
    pub premium: f64,
    /// Standard deviation of additive implied-vol noise (annualized vol units).
    pub noise: f64,
    pub expiry_days: f64,
    pub spot: f64,
    /// When set, strike distance from the forward is `|N(0, s)|` basis points.
    pub strike_spread_bps: Option<f64>,
    pub seed: u64,
}

impl Default for MarketConfig {
    fn default() -> Self {
        Self { premium: 0.05, noise: 0.02, expiry_days: 21.0, spot: 100.0, strike_spread_bps: None, seed: 0 }
    }
}

/// ATM Black–Scholes straddle Greeks with zero rates; theta is per trading day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StraddleGreeks {
    pub gamma: f64,
    pub theta: f64,
}

impl StraddleGreeks {
    pub fn atm(spot: f64, vol: f64, expiry_years: f64) -> Self {
        let sqrt_t = expiry_years.sqrt();
        let pdf = Normal::standard().pdf(0.5 * vol * sqrt_t);
        let gamma = 2.0 * pdf / (spot * vol * sqrt_t);
        let theta = -spot * pdf * vol / sqrt_t / TRADING_DAYS;
        Self { gamma, theta }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticStraddle {
    pub instrument: usize,
    pub implied_vol: f64,
    pub spot: f64,
    pub gamma: f64,
    /// Per-day decay, negative.
    pub theta: f64,
    pub strike_bps: Option<f64>,
}

/// Implied vols quoted at each day's close for straddles held over the next day.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMarket {
    /// `(T−1) × N`: row `t` prices the move from `t` to `t+1`.
    pub implied: DenseMatrix,
    pub strike_bps: Option<DenseMatrix>,
    pub config: MarketConfig,
}

impl SyntheticMarket {
    /// `variance` is the simulator's per-step return variance (`T × N`).
    pub fn build(variance: &DenseMatrix, config: &MarketConfig) -> Result<Self, HarError> {
        if variance.rows() < 2 {
            return Err(HarError::TooFewRows { found: variance.rows(), needed: 2 });
        }
        if !(config.spot > 0.0 && config.expiry_days > 0.0 && config.noise >= 0.0 && config.premium > -1.0) {
            return Err(HarError::Invalid(format!("market config {config:?}")));
        }
        let mut noise = rng::stream(rng::derive(config.seed, &["market", "implied"]));
        let implied = DenseMatrix::from_fn(variance.rows() - 1, variance.cols(), |t, i| {
            let z: f64 = StandardNormal.sample(&mut noise);
            let v = (variance[(t + 1, i)].max(0.0) * TRADING_DAYS).sqrt() * (1.0 + config.premium) + config.noise * z;
            v.max(MIN_IMPLIED_VOL)
        });
        let strike_bps = config.strike_spread_bps.map(|s| {
            let mut r = rng::stream(rng::derive(config.seed, &["market", "strike"]));
            DenseMatrix::from_fn(implied.rows(), implied.cols(), |_, _| {
                let z: f64 = StandardNormal.sample(&mut r);
                (z * s).abs()
            })
        });
        Ok(Self { implied, strike_bps, config: config.clone() })
    }

    pub fn days(&self) -> usize {
        self.implied.rows()
    }

    pub fn instruments(&self) -> usize {
        self.implied.cols()
    }

    pub fn straddle(&self, day: usize, instrument: usize) -> SyntheticStraddle {
        let vol = self.implied[(day, instrument)];
        let g = StraddleGreeks::atm(self.config.spot, vol, self.config.expiry_days / TRADING_DAYS);
        SyntheticStraddle {
            instrument,
            implied_vol: vol,
            spot: self.config.spot,
            gamma: g.gamma,
            theta: g.theta,
            strike_bps: self.strike_bps.as_ref().map(|m| m[(day, instrument)]),
        }
    }
}

/// Gamma profit and theta decay of a position sized to `weight` units of
/// daily theta, over one day with underlying log return `r`.
pub fn straddle_pnl_components(leg: &SyntheticStraddle, r: f64, weight: f64) -> Result<(f64, f64), HarError> {
    if !(leg.theta < 0.0 && leg.theta.is_finite()) {
        return Err(HarError::InvalidTheta(leg.theta));
    }
    let contracts = weight / leg.theta.abs();
    Ok((contracts * 0.5 * leg.gamma * leg.spot * leg.spot * r * r, contracts * leg.theta))
}

pub fn straddle_daily_pnl(leg: &SyntheticStraddle, r: f64, weight: f64) -> Result<f64, HarError> {
    let (gamma, theta) = straddle_pnl_components(leg, r, weight)?;
    Ok(gamma + theta)
}

use super::HarError;

/// Theta weights per leg: long legs sum to +1, short legs to −1.
#[derive(Debug, Clone, PartialEq)]
pub struct Basket {
    pub long: Vec<(usize, f64)>,
    pub short: Vec<(usize, f64)>,
}

impl Basket {
    pub fn net_weight(&self) -> f64 {
        let long: f64 = self.long.iter().map(|l| l.1).sum();
        let short: f64 = self.short.iter().map(|l| l.1).sum();
        long + short
    }
}

/// Ranks tradable instruments by predicted-RV / implied-vol ratio (highest
/// first, ties by ascending instrument id); longs the top `n`, shorts the
/// bottom `n`, each leg weighted `1/n` of a theta unit.
pub fn rank_and_build_basket(predicted: &[f64], implied: &[f64], tradable: Option<&[bool]>, n: usize) -> Result<Basket, HarError> {
    if predicted.len() != implied.len() || tradable.is_some_and(|t| t.len() != implied.len()) {
        return Err(HarError::Invalid("forecast, implied and filter lengths differ".into()));
    }
    if n == 0 {
        return Err(HarError::Invalid("basket size must be positive".into()));
    }
    let mut ranked: Vec<(usize, f64)> = (0..predicted.len())
        .filter(|&i| tradable.is_none_or(|t| t[i]))
        .map(|i| (i, predicted[i] / implied[i]))
        .collect();
    if let Some(&(i, r)) = ranked.iter().find(|(_, r)| !r.is_finite()) {
        return Err(HarError::Invalid(format!("instrument {i}: ratio {r}")));
    }
    if ranked.len() < 2 * n {
        return Err(HarError::TooFewTradable { day: 0, tradable: ranked.len(), needed: 2 * n });
    }
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let w = 1.0 / n as f64;
    let long = ranked[..n].iter().map(|&(i, _)| (i, w)).collect();
    let short = ranked[ranked.len() - n..].iter().map(|&(i, _)| (i, -w)).collect();
    Ok(Basket { long, short })
}

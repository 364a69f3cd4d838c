use ftsbench_numeric::DenseMatrix;
use serde::{Deserialize, Serialize};

use super::*;

pub const FIT_SCHEMA_VERSION: u32 = 1;

/// Text form of a [`DccFit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDocument {
    pub schema_version: u32,
    pub dcc_a: f64,
    pub dcc_b: f64,
    pub innovation: InnovationLaw,
    pub log_likelihood: f64,
    pub converged: bool,
    pub at_boundary: bool,
    pub qbar: Vec<Vec<f64>>,
    pub last_q: Vec<Vec<f64>>,
    pub assets: Vec<Garch11Fit>,
}

fn rows(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

fn square(name: &str, rows: &[Vec<f64>], n: usize) -> Result<DenseMatrix, FitError> {
    let m = DenseMatrix::from_rows(rows).map_err(|e| FitError::Parse(format!("{name}: {e}")))?;
    if m.shape() != (n, n) || !m.is_finite() || !m.is_symmetric(1e-9) {
        return Err(FitError::Parse(format!("{name} must be a finite symmetric {n}x{n} matrix")));
    }
    if (0..n).any(|i| m[(i, i)] <= 0.0) {
        return Err(FitError::Parse(format!("{name} needs a positive diagonal")));
    }
    Ok(m)
}

impl FitDocument {
    pub fn from_fit(fit: &DccFit) -> Self {
        Self {
            schema_version: FIT_SCHEMA_VERSION,
            dcc_a: fit.a,
            dcc_b: fit.b,
            innovation: fit.law,
            log_likelihood: fit.log_likelihood,
            converged: fit.converged,
            at_boundary: fit.at_boundary,
            qbar: rows(&fit.qbar),
            last_q: rows(&fit.last_q),
            assets: fit.assets.clone(),
        }
    }

    pub fn into_fit(self) -> Result<DccFit, FitError> {
        if self.schema_version != FIT_SCHEMA_VERSION {
            return Err(FitError::Parse(format!("unsupported schema version {}", self.schema_version)));
        }
        let n = self.assets.len();
        if n < 2 {
            return Err(FitError::NeedMultivariate);
        }
        let dynamics_ok = self.dcc_a >= 0.0 && self.dcc_b >= 0.0 && self.dcc_a + self.dcc_b < 1.0;
        if !dynamics_ok {
            return Err(FitError::Parse(format!("invalid dynamics a={} b={}", self.dcc_a, self.dcc_b)));
        }
        if let InnovationLaw::StudentT { nu } = self.innovation {
            if !(nu > 2.0 && nu.is_finite()) {
                return Err(FitError::Parse(format!("nu must exceed 2, got {nu}")));
            }
        }
        for (i, a) in self.assets.iter().enumerate() {
            let p = a.params;
            let ok = p.omega > 0.0 && p.alpha >= 0.0 && p.beta >= 0.0 && p.alpha + p.beta < 1.0 && p.mu.is_finite();
            if !ok {
                return Err(FitError::Parse(format!("asset {i}: invalid GARCH parameters {p:?}")));
            }
        }
        let qbar = square("qbar", &self.qbar, n)?;
        let last_q = square("last_q", &self.last_q, n)?;
        Ok(DccFit {
            assets: self.assets,
            a: self.dcc_a,
            b: self.dcc_b,
            qbar,
            law: self.innovation,
            log_likelihood: self.log_likelihood,
            last_q,
            converged: self.converged,
            at_boundary: self.at_boundary,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("fit document serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, FitError> {
        toml::from_str(text).map_err(|e| FitError::Parse(e.to_string()))
    }

    /// Parses and validates in one step.
    pub fn parse_fit(text: &str) -> Result<DccFit, FitError> {
        Self::from_toml(text)?.into_fit()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let leg = Garch11Params { mu: 0.0, omega: 1e-5, alpha: 0.05, beta: 0.9 };
        let qbar = DenseMatrix::from_rows(&[vec![1.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let data = simulate_dcc(&[leg, leg], 0.03, 0.9, &qbar, InnovationLaw::Normal, 1000, 1);
        let fit = fit_dcc(&data, LawKind::StudentT).unwrap();
        let text = FitDocument::from_fit(&fit).to_toml();
        assert!(text.contains("schema_version = 1"));
        assert_eq!(FitDocument::parse_fit(&text).unwrap(), fit);
    }

    #[test]
    fn rejects_invalid_documents() {
        assert!(FitDocument::parse_fit("schema_version = 1").is_err());
        let leg = Garch11Params { mu: 0.0, omega: 1e-5, alpha: 0.05, beta: 0.9 };
        let doc = FitDocument {
            schema_version: 1,
            dcc_a: 0.5,
            dcc_b: 0.6,
            innovation: InnovationLaw::Normal,
            log_likelihood: 0.0,
            converged: true,
            at_boundary: false,
            qbar: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            last_q: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            assets: vec![
                Garch11Fit { params: leg, law: InnovationLaw::Normal, log_likelihood: 0.0, last_variance: 1e-4, converged: true };
                2
            ],
        };
        assert!(doc.clone().into_fit().is_err());
        let ok = FitDocument { dcc_a: 0.05, dcc_b: 0.9, ..doc.clone() };
        assert!(ok.clone().into_fit().is_ok());
        assert!(FitDocument { schema_version: 2, ..ok.clone() }.into_fit().is_err());
        assert!(FitDocument { qbar: vec![vec![1.0, 0.2], vec![0.1, 1.0]], ..ok }.into_fit().is_err());
    }
}

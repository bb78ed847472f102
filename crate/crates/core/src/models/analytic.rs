//! Closed-form test functions with known variance decompositions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "function", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnalyticModel {
    /// `sin z1 + a sin² z2 + b z3⁴ sin z1`, usually on `U(−π, π)³`.
    Ishigami { a: f64, b: f64 },
    /// `Σ wᵢ zᵢ`; the input count equals `weights.len()`.
    LinearAdditive { weights: Vec<f64> },
    /// Returns `value` for inputs of any dimension.
    Constant { value: f64 },
    /// Sobol' g-function `Πᵢ (|4zᵢ − 2| + aᵢ)/(1 + aᵢ)` on `U(0, 1)^d`.
    GFunction { a: Vec<f64> },
}

impl AnalyticModel {
    pub fn ishigami() -> Self {
        AnalyticModel::Ishigami { a: 7.0, b: 0.1 }
    }

    pub fn linear_additive(d: usize) -> Self {
        AnalyticModel::LinearAdditive {
            weights: vec![1.0; d],
        }
    }

    /// Required input dimension, `None` if any is accepted.
    pub fn dim(&self) -> Option<usize> {
        match self {
            AnalyticModel::Ishigami { .. } => Some(3),
            AnalyticModel::LinearAdditive { weights } => Some(weights.len()),
            AnalyticModel::Constant { .. } => None,
            AnalyticModel::GFunction { a } => Some(a.len()),
        }
    }

    pub fn evaluate(&self, z: &[f64]) -> Result<f64> {
        if let Some(d) = self.dim() {
            if z.len() != d {
                return Err(Error::domain(format!(
                    "analytic model expects {d} inputs, got {}",
                    z.len()
                )));
            }
        }
        Ok(match self {
            AnalyticModel::Ishigami { a, b } => {
                let s1 = z[0].sin();
                s1 + a * z[1].sin().powi(2) + b * z[2].powi(4) * s1
            }
            AnalyticModel::LinearAdditive { weights } => {
                weights.iter().zip(z).map(|(w, x)| w * x).sum()
            }
            AnalyticModel::Constant { value } => *value,
            AnalyticModel::GFunction { a } => a
                .iter()
                .zip(z)
                .map(|(ai, x)| ((4.0 * x - 2.0).abs() + ai) / (1.0 + ai))
                .product(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn values_at_known_points() {
        let ish = AnalyticModel::ishigami();
        assert_eq!(ish.evaluate(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        let v = ish.evaluate(&[PI / 2.0, PI / 2.0, 1.0]).unwrap();
        assert!((v - (1.0 + 7.0 + 0.1)).abs() < 1e-12);
        let lin = AnalyticModel::linear_additive(2);
        assert_eq!(lin.evaluate(&[0.25, 0.5]).unwrap(), 0.75);
        let g = AnalyticModel::GFunction { a: vec![0.0, 1.0] };
        assert_eq!(g.evaluate(&[0.5, 0.5]).unwrap(), 0.0);
        assert_eq!(
            AnalyticModel::Constant { value: 3.5 }.evaluate(&[1.0; 7]).unwrap(),
            3.5
        );
    }

    #[test]
    fn dimension_mismatch_is_error() {
        assert!(AnalyticModel::ishigami().evaluate(&[0.0, 0.0]).is_err());
        assert!(AnalyticModel::linear_additive(3).evaluate(&[0.0]).is_err());
    }

    #[test]
    fn serde_roundtrip() {
        let m = AnalyticModel::ishigami();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"function":"ishigami","a":7.0,"b":0.1}"#);
        assert_eq!(serde_json::from_str::<AnalyticModel>(&s).unwrap(), m);
    }
}

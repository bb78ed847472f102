//! Moments and cross-model correlations from a shared pilot sample.

use serde::{Deserialize, Serialize};

use super::shifted_mean;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelMoments {
    pub mu: f64,
    /// Unbiased standard deviation.
    pub sigma: f64,
    /// Central fourth sample moment.
    pub delta: f64,
    /// Standard deviation of `g = (f − μ)²`.
    pub tau: f64,
}

/// Per-model moments and correlations with model 1 (the highest fidelity).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotStatistics {
    pub n_pilot: usize,
    pub models: Vec<ModelMoments>,
    /// Pearson correlation of `f₁` with `f_k`; `rho[0] = 1`.
    pub rho: Vec<f64>,
    /// Pearson correlation of `g₁` with `g_k`; `q[0] = 1`.
    pub q: Vec<f64>,
}

impl PilotStatistics {
    /// Statistics known only through `σ_k` and `ρ_{1,k}`, e.g. published
    /// summaries. Higher moments are left at zero.
    pub fn from_summary(sigma: &[f64], rho: &[f64], n_pilot: usize) -> Self {
        Self {
            n_pilot,
            models: sigma
                .iter()
                .map(|&sigma| ModelMoments {
                    mu: 0.0,
                    sigma,
                    delta: 0.0,
                    tau: 0.0,
                })
                .collect(),
            q: vec![1.0; rho.len()],
            rho: rho.to_vec(),
        }
    }

    pub fn levels(&self) -> usize {
        self.models.len()
    }

    pub fn sigma(&self) -> Vec<f64> {
        self.models.iter().map(|m| m.sigma).collect()
    }
}

/// `Sxy / √(Sxx Syy)` on centred data; exactly 1 for identical inputs.
fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    let denom = (sxx * syy).sqrt();
    if denom > 0.0 {
        sxy / denom
    } else {
        0.0
    }
}

/// Computes pilot statistics from per-model outputs on identical points,
/// highest fidelity first.
pub fn pilot_statistics(outputs: &[Vec<f64>]) -> Result<PilotStatistics> {
    let Some(first) = outputs.first() else {
        return Err(Error::domain("pilot statistics need at least one model"));
    };
    let n = first.len();
    if n < 5 {
        return Err(Error::domain(format!("pilot needs at least 5 points, got {n}")));
    }
    if outputs.iter().any(|y| y.len() != n) {
        return Err(Error::domain("pilot outputs must share the same points"));
    }
    let nf = n as f64;
    let mut centred = Vec::with_capacity(outputs.len());
    let mut squared = Vec::with_capacity(outputs.len());
    let mut models = Vec::with_capacity(outputs.len());
    for (k, y) in outputs.iter().enumerate() {
        if y.iter().all(|&v| v == y[0]) {
            return Err(Error::DegenerateStatistics(format!(
                "model {} is constant on the pilot sample",
                k + 1
            )));
        }
        let mu = shifted_mean(y.iter().copied());
        let e: Vec<f64> = y.iter().map(|v| v - mu).collect();
        let g: Vec<f64> = e.iter().map(|v| v * v).collect();
        let var = g.iter().sum::<f64>() / (nf - 1.0);
        let delta = g.iter().map(|v| v * v).sum::<f64>() / nf;
        let g_mean = shifted_mean(g.iter().copied());
        let gc: Vec<f64> = g.iter().map(|v| v - g_mean).collect();
        let tau = (gc.iter().map(|v| v * v).sum::<f64>() / (nf - 1.0)).sqrt();
        models.push(ModelMoments {
            mu,
            sigma: var.sqrt(),
            delta,
            tau,
        });
        centred.push(e);
        squared.push(gc);
    }
    let rho = centred.iter().map(|e| pearson(&centred[0], e)).collect();
    let q = squared.iter().map(|g| pearson(&squared[0], g)).collect();
    Ok(PilotStatistics {
        n_pilot: n,
        models,
        rho,
        q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn self_correlation_is_exactly_one() {
        let y: Vec<f64> = (0..150).map(|i| ((i as f64) * 0.37).sin() * 3.0 + 120.0).collect();
        let st = pilot_statistics(&[y.clone(), y]).unwrap();
        assert_eq!(st.rho, vec![1.0, 1.0]);
        assert_eq!(st.q, vec![1.0, 1.0]);
        assert_eq!(st.models[0], st.models[1]);
    }

    #[test]
    fn gaussian_kurtosis() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let y: Vec<f64> = (0..200_000)
            .map(|_| {
                let x: f64 = StandardNormal.sample(&mut rng);
                2.0 * x + 1.0
            })
            .collect();
        let st = pilot_statistics(&[y]).unwrap();
        let m = st.models[0];
        assert!((m.sigma - 2.0).abs() < 0.02);
        assert!((m.delta / m.sigma.powi(4) - 3.0).abs() < 0.05);
        // Var[(X − μ)²] = 2σ⁴ for a normal variable.
        assert!((m.tau / (2.0f64.sqrt() * m.sigma.powi(2)) - 1.0).abs() < 0.02);
    }

    #[test]
    fn rejects_degenerate_and_short_pilots() {
        assert!(matches!(
            pilot_statistics(&[vec![1.0; 10]]),
            Err(Error::DegenerateStatistics(_))
        ));
        assert!(pilot_statistics(&[vec![1.0, 2.0, 3.0, 4.0]]).is_err());
        assert!(pilot_statistics(&[vec![1.0, 2.0, 3.0, 4.0, 5.0], vec![1.0; 4]]).is_err());
    }

    #[test]
    fn anticorrelated_pair() {
        let y: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let z: Vec<f64> = y.iter().map(|v| -2.0 * v).collect();
        let st = pilot_statistics(&[y, z]).unwrap();
        assert!((st.rho[1] + 1.0).abs() < 1e-15);
        assert!((st.q[1] - 1.0).abs() < 1e-15);
    }
}

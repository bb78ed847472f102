//! Optimal MFMC sample allocation and control-variate weights.

use serde::{Deserialize, Serialize};

use super::PilotStatistics;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRatioCheck {
    pub admissible: bool,
    /// 1-based levels `k` whose ordering or cost-ratio condition fails.
    pub violations: Vec<usize>,
}

/// Squared correlations with the convention `ρ_{1,K+1} = 0`.
fn rho_squared(stats: &PilotStatistics) -> Vec<f64> {
    let mut r2: Vec<f64> = stats.rho.iter().map(|r| r * r).collect();
    r2.push(0.0);
    r2
}

/// Checks `|ρ_{1,1}| > … > |ρ_{1,K}| > 0` and, for every `k ≥ 2`,
/// `w_{k−1}/w_k > (ρ²_{k−1} − ρ²_k)/(ρ²_k − ρ²_{k+1})`.
///
/// An ordering failure between levels `k` and `k+1` is reported once, at `k`.
pub fn check_cost_ratio(stats: &PilotStatistics, w: &[f64]) -> CostRatioCheck {
    let k_max = stats.rho.len();
    let r2 = rho_squared(stats);
    let mut violations = Vec::new();
    if w.len() != k_max || w.iter().any(|&c| !(c > 0.0)) {
        violations.extend(1..=k_max);
    } else {
        for k in 1..=k_max {
            // Ordering between k and k+1 (0-based indices k−1 and k).
            let ordered = r2[k - 1] > r2[k];
            let ordered_prev = k == 1 || r2[k - 2] > r2[k - 1];
            if !ordered {
                violations.push(k);
            } else if k >= 2 && ordered_prev {
                let ratio = (r2[k - 2] - r2[k - 1]) / (r2[k - 1] - r2[k]);
                if !(w[k - 2] / w[k - 1] > ratio) {
                    violations.push(k);
                }
            }
        }
    }
    violations.dedup();
    CostRatioCheck {
        admissible: violations.is_empty(),
        violations,
    }
}

/// Samples per fidelity and control-variate weights for a budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub budget: f64,
    pub d: usize,
    pub costs: Vec<f64>,
    /// Rows of the Saltelli bundle evaluated by each fidelity.
    pub m: Vec<usize>,
    /// `α_1 = 1`, `α_k = ρ_{1,k} σ₁/σ_k`.
    pub alpha: Vec<f64>,
    /// Unrounded ratios `r_k = m_k/m_1`.
    pub r: Vec<f64>,
}

impl AllocationPlan {
    /// Plan for a single model with `m` rows.
    pub fn single(m: usize, d: usize, cost: f64) -> Self {
        Self {
            budget: cost * (m * (d + 2)) as f64,
            d,
            costs: vec![cost],
            m: vec![m],
            alpha: vec![1.0],
            r: vec![1.0],
        }
    }

    pub fn levels(&self) -> usize {
        self.m.len()
    }

    pub fn effective_budget(&self) -> f64 {
        self.budget / (self.d + 2) as f64
    }

    /// Model evaluations per fidelity across all `d + 2` matrices.
    pub fn evaluations(&self) -> Vec<usize> {
        self.m.iter().map(|m| m * (self.d + 2)).collect()
    }

    /// Spent budget `Σ w_k m_k (d + 2)`.
    pub fn cost(&self) -> f64 {
        self.costs
            .iter()
            .zip(self.evaluations())
            .map(|(w, n)| w * n as f64)
            .sum()
    }
}

/// Ratios `r_k = √(w₁(ρ²_k − ρ²_{k+1}) / (w_k(1 − ρ²_2)))`, `r₁ = 1`.
/// Only meaningful for admissible statistics.
pub fn allocation_ratios(stats: &PilotStatistics, w: &[f64]) -> Vec<f64> {
    let r2 = rho_squared(stats);
    let denom = if w.len() > 1 { 1.0 - r2[1] } else { 1.0 };
    (0..w.len())
        .map(|k| {
            if k == 0 {
                1.0
            } else {
                (w[0] * (r2[k] - r2[k + 1]) / (w[k] * denom)).sqrt()
            }
        })
        .collect()
}

/// Closed-form allocation
/// `r_k = √(w₁(ρ²_k − ρ²_{k+1}) / (w_k(1 − ρ²_2)))`,
/// `m_k = ⌊p_eff r_k / wᵀr⌋` with `p_eff = p/(d+2)`.
pub fn optimal_allocation(
    stats: &PilotStatistics,
    w: &[f64],
    budget: f64,
    d: usize,
) -> Result<AllocationPlan> {
    let check = check_cost_ratio(stats, w);
    if !check.admissible {
        return Err(Error::Inadmissible {
            violations: check.violations,
            qoi: None,
        });
    }
    let r = allocation_ratios(stats, w);
    let wr: f64 = w.iter().zip(&r).map(|(a, b)| a * b).sum();
    let p_eff = budget / (d + 2) as f64;
    let k_max = w.len();
    let mut m: Vec<usize> = r.iter().map(|rk| (p_eff * rk / wr).floor() as usize).collect();
    for k in 1..k_max {
        m[k] = m[k].max(m[k - 1]);
    }
    if m[0] < 2 {
        return Err(Error::BudgetTooSmall { budget, m1: m[0] });
    }
    let sigma = stats.sigma();
    let alpha = (0..k_max)
        .map(|k| {
            if k == 0 {
                1.0
            } else {
                stats.rho[k] * sigma[0] / sigma[k]
            }
        })
        .collect();
    Ok(AllocationPlan {
        budget,
        d,
        costs: w.to_vec(),
        m,
        alpha,
        r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(rho: &[f64]) -> PilotStatistics {
        PilotStatistics::from_summary(&vec![1.0; rho.len()], rho, 150)
    }

    #[test]
    fn bi_fidelity_with_cheap_surrogate_is_admissible() {
        for rho in [0.1, 0.5, 0.99, 0.9999] {
            let c = check_cost_ratio(&summary(&[1.0, rho]), &[1.0, 1e-3]);
            assert!(c.admissible, "rho {rho}");
        }
    }

    #[test]
    fn reversed_correlations_flag_level_two() {
        let c = check_cost_ratio(&summary(&[1.0, 0.9813, 0.9835]), &[1.0, 0.02, 0.001]);
        assert!(!c.admissible);
        assert_eq!(c.violations, vec![2]);
        let c = check_cost_ratio(&summary(&[1.0, 0.9813, 0.969]), &[1.0, 0.02, 0.001]);
        assert!(c.admissible, "{c:?}");
    }

    #[test]
    fn expensive_surrogate_violates_cost_ratio() {
        let c = check_cost_ratio(&summary(&[1.0, 0.5]), &[1.0, 0.9]);
        assert_eq!(c.violations, vec![2]);
        assert!(matches!(
            optimal_allocation(&summary(&[1.0, 0.5]), &[1.0, 0.9], 1000.0, 3),
            Err(Error::Inadmissible { .. })
        ));
    }

    #[test]
    fn useless_surrogate_gets_no_weight() {
        let stats = PilotStatistics::from_summary(&[1.8, 1.84], &[1.0, 1e-9], 150);
        let r = allocation_ratios(&stats, &[1.0, 0.3]);
        assert_eq!(r[0], 1.0);
        assert!(r[1] < 1e-8);
        // The cost-ratio condition rejects such a surrogate outright.
        assert!(!check_cost_ratio(&stats, &[1.0, 0.3]).admissible);
        let stats = PilotStatistics::from_summary(&[1.8, 1.84], &[1.0, 0.05], 150);
        let plan = optimal_allocation(&stats, &[1.0, 1e-4], 500.0, 3).unwrap();
        assert!(plan.alpha[1] < 0.05);
        assert!(plan.m[0] >= 90);
    }

    #[test]
    fn budget_too_small() {
        let stats = PilotStatistics::from_summary(&[1.8, 1.84], &[1.0, 0.9996], 150);
        assert!(matches!(
            optimal_allocation(&stats, &[1.0, 0.3], 50.0, 3),
            Err(Error::BudgetTooSmall { m1: 0, .. })
        ));
    }

    #[test]
    fn hand_computed_bi_fidelity_plan() {
        // r₂ = √(w₁ρ²/(w₂(1 − ρ²))); m_k = ⌊p_eff r_k/(w₁ + w₂ r₂)⌋.
        let (rho, w2, p) = (0.9f64, 0.1, 1000.0);
        let r2 = (rho * rho / (w2 * (1.0 - rho * rho))).sqrt();
        let p_eff = p / 5.0;
        let stats = PilotStatistics::from_summary(&[2.0, 4.0], &[1.0, rho], 150);
        let plan = optimal_allocation(&stats, &[1.0, w2], p, 3).unwrap();
        assert_eq!(plan.m[0], (p_eff / (1.0 + w2 * r2)).floor() as usize);
        assert_eq!(plan.m[1], (p_eff * r2 / (1.0 + w2 * r2)).floor() as usize);
        assert!((plan.alpha[1] - 0.45).abs() < 1e-15);
        assert!(plan.cost() <= p);
    }
}

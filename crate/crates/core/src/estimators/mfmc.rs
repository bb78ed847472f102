//! Control-variate (MFMC) estimators built from nested per-level samples.

use serde::{Deserialize, Serialize};

use super::{
    pooled_mean_var, shifted_mean, AllocationPlan, EvalTable, Method, PilotStatistics,
    SobolEstimate, SobolTerms,
};
use crate::error::{Error, Result};

/// Level-`k` contributions: the model-`k` terms on its own `m_k` rows and
/// on the `m_{k−1}` rows shared with the level above.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelTerms {
    /// 1-based fidelity index.
    pub level: usize,
    pub alpha: f64,
    pub own: SobolTerms,
    /// `None` for the highest fidelity.
    pub shared: Option<SobolTerms>,
}

fn check_plan(table: &EvalTable, plan: &AllocationPlan) -> Result<()> {
    if table.levels.len() != plan.levels() || plan.alpha.len() != plan.levels() {
        return Err(Error::domain(format!(
            "evaluation table has {} levels but the plan has {}",
            table.levels.len(),
            plan.levels()
        )));
    }
    for (k, (evals, &m)) in table.levels.iter().zip(&plan.m).enumerate() {
        let rows = evals.a.len().min(evals.b.len());
        if m > rows {
            return Err(Error::domain(format!(
                "level {} needs {m} rows but has {rows}",
                k + 1
            )));
        }
        if k > 0 && m < plan.m[k - 1] {
            return Err(Error::domain("allocation must be non-decreasing in k"));
        }
    }
    Ok(())
}

/// Applies `x₁ + Σ α_k (x_k(m_k) − x_k(m_{k−1}))` to a scalar statistic of
/// the pooled A/B values.
fn telescope(
    table: &EvalTable,
    plan: &AllocationPlan,
    stat: impl Fn(&[f64], &[f64]) -> Result<f64>,
) -> Result<f64> {
    check_plan(table, plan)?;
    let top = &table.levels[0];
    let m1 = plan.m[0];
    let mut acc = stat(&top.a[..m1], &top.b[..m1])?;
    for k in 1..plan.levels() {
        let ev = &table.levels[k];
        let (hi, lo) = (plan.m[k], plan.m[k - 1]);
        let own = stat(&ev.a[..hi], &ev.b[..hi])?;
        let shared = stat(&ev.a[..lo], &ev.b[..lo])?;
        acc += plan.alpha[k] * (own - shared);
    }
    Ok(acc)
}

/// `V̂_mf = V̂¹_{m₁} + Σ_k α_k (V̂ᵏ_{m_k} − V̂ᵏ_{m_{k−1}})` on pooled A∪B values.
pub fn mfmc_variance(table: &EvalTable, plan: &AllocationPlan) -> Result<f64> {
    telescope(table, plan, |a, b| Ok(pooled_mean_var(a, b)?.var))
}

/// `Ê_mf = Ê¹_{m₁} + Σ_k α_k (Êᵏ_{m_k} − Êᵏ_{m_{k−1}})` on pooled A∪B values.
pub fn mfmc_mean(table: &EvalTable, plan: &AllocationPlan) -> Result<f64> {
    telescope(table, plan, |a, b| Ok(shifted_mean(a.iter().chain(b).copied())))
}

/// Multifidelity main and total Sobol' indices; the per-level terms are
/// returned in `SobolEstimate::levels`.
pub fn mfmc_sobol(table: &EvalTable, plan: &AllocationPlan) -> Result<SobolEstimate> {
    check_plan(table, plan)?;
    let mut levels = Vec::with_capacity(plan.levels());
    let top = SobolTerms::compute(&table.levels[0], plan.m[0])?;
    let (mut mean, mut variance) = (top.mean, top.variance);
    let (mut vj, mut tj) = (top.vj.clone(), top.tj.clone());
    levels.push(LevelTerms {
        level: 1,
        alpha: 1.0,
        own: top,
        shared: None,
    });
    for k in 1..plan.levels() {
        let ev = &table.levels[k];
        let alpha = plan.alpha[k];
        let own = SobolTerms::compute(ev, plan.m[k])?;
        let shared = SobolTerms::compute(ev, plan.m[k - 1])?;
        if own.vj.len() != vj.len() {
            return Err(Error::domain("levels disagree on the input dimension"));
        }
        mean += alpha * (own.mean - shared.mean);
        variance += alpha * (own.variance - shared.variance);
        for j in 0..vj.len() {
            vj[j] += alpha * (own.vj[j] - shared.vj[j]);
            tj[j] += alpha * (own.tj[j] - shared.tj[j]);
        }
        levels.push(LevelTerms {
            level: k + 1,
            alpha,
            own,
            shared: Some(shared),
        });
    }
    Ok(SobolEstimate::from_parts(
        Method::Mfmc,
        mean,
        variance,
        vj,
        tj,
        levels,
    ))
}

/// Variance of the sample variance on `m` points: `(δ − (m−3)/(m−1) σ⁴)/m`.
fn variance_term(delta: f64, sigma: f64, m: f64) -> f64 {
    (delta - (m - 3.0) / (m - 1.0) * sigma.powi(4)) / m
}

/// Analytic variance of `V̂_mf` given pilot moments and an allocation.
pub fn analytic_estimator_variance(stats: &PilotStatistics, plan: &AllocationPlan) -> Result<f64> {
    if stats.levels() != plan.levels() {
        return Err(Error::domain("statistics and plan disagree on the level count"));
    }
    if let Some(&m) = plan.m.iter().find(|&&m| m < 4) {
        return Err(Error::domain(format!(
            "analytic estimator variance needs m_k ≥ 4, got {m}"
        )));
    }
    let s1 = stats.models[0];
    let m: Vec<f64> = plan.m.iter().map(|&m| m as f64).collect();
    let mut total = variance_term(s1.delta, s1.sigma, m[0]);
    for k in 1..plan.levels() {
        let sk = stats.models[k];
        let alpha = plan.alpha[k];
        let (lo, hi) = (m[k - 1], m[k]);
        total += alpha
            * alpha
            * (variance_term(sk.delta, sk.sigma, lo) - variance_term(sk.delta, sk.sigma, hi));
        let cross = |mm: f64| {
            (stats.q[k] * s1.tau * sk.tau
                + 2.0 / (mm - 1.0) * stats.rho[k].powi(2) * s1.sigma.powi(2) * sk.sigma.powi(2))
                / mm
        };
        total += 2.0 * alpha * (cross(hi) - cross(lo));
    }
    Ok(total)
}

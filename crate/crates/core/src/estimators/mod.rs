//! Monte Carlo and multifidelity estimators of moments and Sobol' indices.

mod allocation;
mod mfmc;
mod perturb;
mod pilot;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use allocation::{allocation_ratios, check_cost_ratio, optimal_allocation, AllocationPlan, CostRatioCheck};
pub use mfmc::{analytic_estimator_variance, mfmc_mean, mfmc_sobol, mfmc_variance, LevelTerms};
pub use perturb::{fit_discrepancy, perturb_lowfid, Discrepancy};
pub use pilot::{pilot_statistics, ModelMoments, PilotStatistics};

/// Sample mean and unbiased sample variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanVar {
    pub mean: f64,
    pub var: f64,
}

/// Mean written as `x₀ + Σ(x − x₀)/N`, exact for constant input.
pub(crate) fn shifted_mean(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let mut it = xs.clone();
    let Some(x0) = it.next() else { return f64::NAN };
    let (mut sum, mut n) = (0.0, 0usize);
    for x in xs {
        sum += x - x0;
        n += 1;
    }
    x0 + sum / n as f64
}

fn mean_var_iter(xs: impl Iterator<Item = f64> + Clone) -> Result<MeanVar> {
    let n = xs.clone().count();
    if n < 2 {
        return Err(Error::domain(format!("variance needs at least 2 values, got {n}")));
    }
    let mean = shifted_mean(xs.clone());
    let ss: f64 = xs.map(|x| (x - mean) * (x - mean)).sum();
    Ok(MeanVar {
        mean,
        var: ss / (n - 1) as f64,
    })
}

pub fn sample_mean_var(y: &[f64]) -> Result<MeanVar> {
    mean_var_iter(y.iter().copied())
}

/// Mean and variance of the concatenation of `a` and `b`.
pub fn pooled_mean_var(a: &[f64], b: &[f64]) -> Result<MeanVar> {
    mean_var_iter(a.iter().chain(b).copied())
}

fn check_lengths(n: usize, others: &[usize]) -> Result<()> {
    if n < 2 || others.iter().any(|&m| m != n) {
        return Err(Error::domain(format!(
            "estimator inputs need equal lengths ≥ 2, got {n} and {others:?}"
        )));
    }
    Ok(())
}

/// Bias-corrected estimator of the main-effect variance `V_j`:
/// `2N/(2N−1) · [ (1/N) Σ f(A) f(C_j) − ((Ê+Ê')/2)² + (V̂+V̂')/(4N) ]`
/// with `Ê, V̂` from `y_a` and `Ê', V̂'` from `y_b`.
///
/// The bracket is evaluated on outputs centred by the pooled `A ∪ B` mean.
/// On raw outputs its sampling noise grows with the squared mean of the
/// model; centring removes that and changes the expectation by `O(1/N)`.
pub fn owen_vj(y_a: &[f64], y_b: &[f64], y_cj: &[f64]) -> Result<f64> {
    let n = y_a.len();
    check_lengths(n, &[y_b.len(), y_cj.len()])?;
    let shift = shifted_mean(y_a.iter().chain(y_b).copied());
    let centred = |y: &[f64]| -> Vec<f64> { y.iter().map(|v| v - shift).collect() };
    let (a, b, c) = (centred(y_a), centred(y_b), centred(y_cj));
    let ma = sample_mean_var(&a)?;
    let mb = sample_mean_var(&b)?;
    let cross = a.iter().zip(&c).map(|(a, c)| a * c).sum::<f64>() / n as f64;
    let centre = 0.5 * (ma.mean + mb.mean);
    let nf = n as f64;
    Ok(2.0 * nf / (2.0 * nf - 1.0) * (cross - centre * centre + (ma.var + mb.var) / (4.0 * nf)))
}

/// Estimator of the total-effect variance `T_j = (1/2N) Σ (f(B) − f(C_j))²`.
pub fn owen_tj(y_b: &[f64], y_cj: &[f64]) -> Result<f64> {
    let n = y_b.len();
    check_lengths(n, &[y_cj.len()])?;
    let ss: f64 = y_b.iter().zip(y_cj).map(|(b, c)| (b - c) * (b - c)).sum();
    Ok(ss / (2.0 * n as f64))
}

/// Outputs of one model on the Saltelli matrices, row-aligned.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SaltelliEvals {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<Vec<f64>>,
}

impl SaltelliEvals {
    pub fn dim(&self) -> usize {
        self.c.len()
    }

    /// Number of complete rows.
    pub fn rows(&self) -> usize {
        self.c
            .iter()
            .map(Vec::len)
            .chain([self.a.len(), self.b.len()])
            .min()
            .unwrap_or(0)
    }

    fn require(&self, m: usize) -> Result<()> {
        if self.c.is_empty() {
            return Err(Error::domain("Saltelli evaluations lack the C_j matrices"));
        }
        if m > self.rows() {
            return Err(Error::domain(format!(
                "requested {m} rows but only {} are available",
                self.rows()
            )));
        }
        Ok(())
    }
}

/// Per-fidelity Saltelli outputs for one scalar QoI, highest fidelity
/// first. Level `k` holds at least the leading `m_k` rows of the shared
/// bundle, so every point of level `k − 1` is also evaluated at level `k`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalTable {
    pub levels: Vec<SaltelliEvals>,
    /// Cost of one evaluation per level, in high-fidelity solve units.
    pub costs: Vec<f64>,
}

impl EvalTable {
    pub fn new(levels: Vec<SaltelliEvals>, costs: Vec<f64>) -> Self {
        Self { levels, costs }
    }
}

/// The building blocks of a Sobol' estimate on the leading `m` rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolTerms {
    pub m: usize,
    pub mean: f64,
    pub variance: f64,
    pub vj: Vec<f64>,
    pub tj: Vec<f64>,
}

impl SobolTerms {
    pub fn compute(evals: &SaltelliEvals, m: usize) -> Result<Self> {
        evals.require(m)?;
        let (a, b) = (&evals.a[..m], &evals.b[..m]);
        let pooled = pooled_mean_var(a, b)?;
        let mut vj = Vec::with_capacity(evals.dim());
        let mut tj = Vec::with_capacity(evals.dim());
        for c in &evals.c {
            vj.push(owen_vj(a, b, &c[..m])?);
            tj.push(owen_tj(b, &c[..m])?);
        }
        Ok(Self {
            m,
            mean: pooled.mean,
            variance: pooled.var,
            vj,
            tj,
        })
    }

    /// Main and total indices of this single model, `None` if `V̂ ≤ 0`.
    pub fn indices(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        (self.variance > 0.0).then(|| {
            (
                self.vj.iter().map(|v| v / self.variance).collect(),
                self.tj.iter().map(|t| t / self.variance).collect(),
            )
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mc,
    Mfmc,
    Pc,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Mc => "mc",
            Method::Mfmc => "mfmc",
            Method::Pc => "pc",
        })
    }
}

/// Mean, variance and Sobol' indices of one QoI.
///
/// When the variance estimate is not positive the indices cannot be formed;
/// `degenerate` is then set and `main`/`total` are filled with zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolEstimate {
    pub method: Method,
    pub mean: f64,
    pub variance: f64,
    pub vj: Vec<f64>,
    pub tj: Vec<f64>,
    pub main: Vec<f64>,
    pub total: Vec<f64>,
    pub degenerate: bool,
    /// Per-level MFMC terms; empty for other methods.
    pub levels: Vec<LevelTerms>,
}

impl SobolEstimate {
    pub(crate) fn from_parts(
        method: Method,
        mean: f64,
        variance: f64,
        vj: Vec<f64>,
        tj: Vec<f64>,
        levels: Vec<LevelTerms>,
    ) -> Self {
        let degenerate = !(variance > 0.0 && variance.is_finite());
        let ratio = |xs: &[f64]| -> Vec<f64> {
            if degenerate {
                vec![0.0; xs.len()]
            } else {
                xs.iter().map(|x| x / variance).collect()
            }
        };
        Self {
            method,
            mean,
            main: ratio(&vj),
            total: ratio(&tj),
            variance,
            vj,
            tj,
            degenerate,
            levels,
        }
    }

    pub fn dim(&self) -> usize {
        self.vj.len()
    }
}

/// Single-fidelity Saltelli/Owen estimate using every row of `evals`.
pub fn mc_sobol(evals: &SaltelliEvals) -> Result<SobolEstimate> {
    let t = SobolTerms::compute(evals, evals.rows())?;
    Ok(SobolEstimate::from_parts(
        Method::Mc,
        t.mean,
        t.variance,
        t.vj,
        t.tj,
        Vec::new(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::AnalyticModel;
    use crate::sampling::{build_bundle, MatrixTag, ParameterSpace};

    fn evaluate(model: &AnalyticModel, space: &ParameterSpace, n: usize) -> SaltelliEvals {
        let bundle = build_bundle(space, n, 1).unwrap();
        let run = |tag| {
            bundle
                .matrix(tag)
                .rows()
                .map(|z| model.evaluate(z).unwrap())
                .collect::<Vec<_>>()
        };
        SaltelliEvals {
            a: run(MatrixTag::A),
            b: run(MatrixTag::B),
            c: (0..space.dim()).map(|j| run(MatrixTag::C(j))).collect(),
        }
    }

    fn unit_space(d: usize) -> ParameterSpace {
        ParameterSpace::uniform(d, 0.0, 1.0).unwrap()
    }

    fn ishigami_space() -> ParameterSpace {
        let pi = std::f64::consts::PI;
        ParameterSpace::uniform(3, -pi, pi).unwrap()
    }

    #[test]
    fn mean_var_by_hand() {
        let mv = sample_mean_var(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((mv.mean, mv.var), (2.0, 1.0));
        let c = sample_mean_var(&[0.1; 17]).unwrap();
        assert_eq!((c.mean, c.var), (0.1, 0.0));
        assert!(sample_mean_var(&[1.0]).is_err());
    }

    #[test]
    fn constant_model_gives_exact_zeros() {
        let y = vec![129.7 * 133.322; 64];
        assert_eq!(owen_vj(&y, &y, &y).unwrap(), 0.0);
        assert_eq!(owen_tj(&y, &y).unwrap(), 0.0);
        let evals = SaltelliEvals {
            a: y.clone(),
            b: y.clone(),
            c: vec![y.clone(); 3],
        };
        let est = mc_sobol(&evals).unwrap();
        assert!(est.degenerate);
        assert_eq!(est.vj, vec![0.0; 3]);
        assert_eq!(est.main, vec![0.0; 3]);
    }

    #[test]
    fn length_mismatch_is_error() {
        assert!(owen_vj(&[1.0, 2.0], &[1.0, 2.0], &[1.0]).is_err());
        assert!(owen_tj(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
        let evals = SaltelliEvals {
            a: vec![1.0, 2.0],
            b: vec![1.0, 2.0],
            c: vec![],
        };
        assert!(mc_sobol(&evals).is_err());
    }

    #[test]
    fn total_effect_vanishes_for_inactive_inputs() {
        let model = AnalyticModel::LinearAdditive {
            weights: vec![1.0, 0.0, 0.0],
        };
        let evals = evaluate(&model, &unit_space(3), 257);
        assert_eq!(owen_tj(&evals.b, &evals.c[1]).unwrap(), 0.0);
        assert_eq!(owen_tj(&evals.b, &evals.c[2]).unwrap(), 0.0);
    }

    #[test]
    fn linear_additive_oracle() {
        let evals = evaluate(&AnalyticModel::linear_additive(2), &unit_space(2), 100_000);
        let v1 = owen_vj(&evals.a, &evals.b, &evals.c[0]).unwrap();
        assert!((v1 - 1.0 / 12.0).abs() < 0.005, "{v1}");
        let est = mc_sobol(&evals).unwrap();
        assert!((est.variance - 1.0 / 6.0).abs() < 1e-3);
        for j in 0..2 {
            assert!((est.main[j] - 0.5).abs() < 0.01);
            assert!((est.total[j] - 0.5).abs() < 0.01);
        }
    }

    #[test]
    fn ishigami_oracle() {
        // Closed-form decomposition for a = 7, b = 0.1 on U(−π, π)³.
        let (a, b) = (7.0f64, 0.1f64);
        let pi4 = std::f64::consts::PI.powi(4);
        let v1 = 0.5 * (1.0 + b * pi4 / 5.0).powi(2);
        let v2 = a * a / 8.0;
        let v13 = b * b * pi4 * pi4 * 8.0 / 225.0;
        let v = v1 + v2 + v13;
        let evals = evaluate(&AnalyticModel::ishigami(), &ishigami_space(), 100_000);
        let est = mc_sobol(&evals).unwrap();
        assert!((est.main[0] - v1 / v).abs() < 0.01, "{:?}", est.main);
        assert!((est.main[1] - v2 / v).abs() < 0.01, "{:?}", est.main);
        assert!(est.main[2].abs() < 0.01, "{:?}", est.main);
        assert!((est.total[2] - v13 / v).abs() < 0.01, "{:?}", est.total);
    }
}

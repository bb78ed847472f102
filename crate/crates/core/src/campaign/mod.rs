//! End-to-end studies: pilot runs, allocation, production MFMC/MC/PC runs,
//! replicate studies, cross-fidelity validation and cost accounting.
//!
//! Stages exchange plain serializable result types so the CLI can persist
//! each stage and resume later ones from disk (see [`store`]).

mod config;
mod evaluator;
pub mod report;
pub mod store;
mod validation;

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{outputs_of, CampaignConfig, ModelKind, ModelSpec, ReplicateMode};
pub use evaluator::{build_runners, point_hash, Evaluator, ModelRunner, ModelUsage, Solver};
pub use validation::{validate_fidelities, ErrorMetrics, MetricSet};

use crate::error::{Error, Result};
use crate::estimators::{
    fit_discrepancy, mc_sobol, mfmc_sobol, optimal_allocation, pilot_statistics, AllocationPlan,
    Discrepancy, EvalTable, Method, PilotStatistics, SaltelliEvals, SobolEstimate,
};
use crate::models::MMHG;
use crate::pce::{fit_pce, pc_sobol, PcBasis, PcSurrogate};
use crate::sampling::{
    build_bundle, build_random_bundle, sobol_points, MatrixTag, ParameterSpace, PointSet,
    SampleBundle,
};

/// Display factor and unit of a QoI. Values are kept in SI internally.
pub fn display_unit(qoi: &str) -> (f64, &'static str) {
    match qoi {
        "psys" | "pp" => (1.0 / MMHG, "mmHg"),
        "drmax" => (1e3, "mm"),
        _ => (1.0, "-"),
    }
}

/// Attaches the QoI name to errors that carry one.
fn tag_qoi(e: Error, qoi: &str) -> Error {
    match e {
        Error::Inadmissible { violations, .. } => Error::Inadmissible {
            violations,
            qoi: Some(qoi.to_string()),
        },
        Error::DegenerateStatistics(m) => Error::DegenerateStatistics(format!("{qoi}: {m}")),
        other => other,
    }
}

/// One solver evaluation as persisted in the raw CSV files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub model: String,
    pub tag: String,
    pub row: usize,
    pub z: Vec<f64>,
    /// Unperturbed solver outputs, one per campaign QoI.
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RawEvals {
    pub qois: Vec<String>,
    pub records: Vec<RawRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotResult {
    /// Digest of everything the pilot depends on.
    pub digest: String,
    pub qois: Vec<String>,
    pub model_ids: Vec<String>,
    pub points: Vec<Vec<f64>>,
    /// Unperturbed solver outputs, `raw[model][qoi][row]`.
    pub raw: Vec<Vec<Vec<f64>>>,
    /// Discrepancy fits of perturbed models, `[model][qoi]`.
    pub discrepancy: Vec<Vec<Option<Discrepancy>>>,
    pub phi: f64,
    /// Statistics of the outputs the estimators see (perturbed with `phi`).
    pub stats: Vec<PilotStatistics>,
    /// Statistics with every perturbation switched off.
    pub unperturbed: Vec<PilotStatistics>,
}

impl PilotResult {
    pub fn qoi_index(&self, qoi: &str) -> Result<usize> {
        self.qois
            .iter()
            .position(|q| q == qoi)
            .ok_or_else(|| Error::config("qoi", format!("`{qoi}` is not a campaign QoI")))
    }

    pub fn point_set(&self) -> Result<PointSet> {
        PointSet::from_rows(&self.points)
    }

    /// Outputs of model `k` for QoI `q` at the pilot points, perturbed with
    /// `phi` when the model carries a discrepancy fit.
    pub fn outputs(&self, space: &ParameterSpace, k: usize, q: usize, phi: f64) -> Vec<f64> {
        let raw = &self.raw[k][q];
        match &self.discrepancy[k][q] {
            Some(d) => self
                .points
                .iter()
                .zip(raw)
                .map(|(z, &y)| d.apply(space, phi, z, y))
                .collect(),
            None => raw.clone(),
        }
    }

    fn statistics(&self, space: &ParameterSpace, phi: f64) -> Result<Vec<PilotStatistics>> {
        (0..self.qois.len())
            .map(|q| {
                let outs: Vec<Vec<f64>> = (0..self.raw.len())
                    .map(|k| self.outputs(space, k, q, phi))
                    .collect();
                pilot_statistics(&outs).map_err(|e| tag_qoi(e, &self.qois[q]))
            })
            .collect()
    }

    /// The pilot restricted to `qois`, in that order.
    pub fn select(&self, qois: &[String]) -> Result<Self> {
        let idx = qois
            .iter()
            .map(|q| {
                self.qoi_index(q).map_err(|_| {
                    Error::Ordering(format!("the pilot did not record `{q}`; rerun `pilot`"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            qois: qois.to_vec(),
            raw: self.raw.iter().map(|m| idx.iter().map(|&q| m[q].clone()).collect()).collect(),
            discrepancy: self
                .discrepancy
                .iter()
                .map(|m| idx.iter().map(|&q| m[q].clone()).collect())
                .collect(),
            stats: idx.iter().map(|&q| self.stats[q].clone()).collect(),
            unperturbed: idx.iter().map(|&q| self.unperturbed[q].clone()).collect(),
            ..self.clone()
        })
    }

    /// The same pilot re-evaluated with another perturbation factor.
    pub fn with_phi(&self, space: &ParameterSpace, phi: f64) -> Result<Self> {
        if phi == self.phi {
            return Ok(self.clone());
        }
        Ok(Self {
            stats: self.statistics(space, phi)?,
            phi,
            ..self.clone()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QoiPlan {
    pub qoi: String,
    pub plan: AllocationPlan,
}

/// A (budget, QoI) pair left out because its allocation gives `m₁ < 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedQoi {
    pub budget: f64,
    pub qoi: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QoiEstimate {
    pub qoi: String,
    pub estimate: SobolEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfmcRun {
    pub digest: String,
    pub budget: f64,
    pub bundle_skip: u64,
    pub phi: f64,
    /// Bundle rows evaluated per model (the largest `m_k` over QoIs).
    pub rows: Vec<usize>,
    pub plans: Vec<QoiPlan>,
    pub estimates: Vec<QoiEstimate>,
    #[serde(default)]
    pub skipped: Vec<SkippedQoi>,
    /// Solver runs executed per model (cache hits excluded).
    pub solved: Vec<usize>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRun {
    pub digest: String,
    pub budget: f64,
    pub n: usize,
    pub bundle_skip: u64,
    pub estimates: Vec<QoiEstimate>,
    pub solved: usize,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcQoi {
    pub qoi: String,
    pub estimate: SobolEstimate,
    pub surrogate: PcSurrogate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcRun {
    pub digest: String,
    pub order: u32,
    pub samples: usize,
    pub skip: u64,
    pub qois: Vec<PcQoi>,
    pub solved: usize,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub method: Method,
    pub budget: f64,
    pub qoi: String,
    pub replicate: usize,
    pub mean: f64,
    pub variance: f64,
    pub main: Vec<f64>,
    pub total: Vec<f64>,
    pub degenerate: bool,
}

/// Expectation and sample standard deviation over replicates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub expectation: f64,
    pub sd: f64,
    /// Mean squared deviation from the replicate mean.
    pub mse: f64,
}

impl Spread {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let expectation = xs.iter().sum::<f64>() / n;
        let ss: f64 = xs.iter().map(|x| (x - expectation).powi(2)).sum();
        Self {
            expectation,
            sd: if xs.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 },
            mse: ss / n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSummary {
    pub method: Method,
    pub budget: f64,
    pub qoi: String,
    pub replicates: usize,
    pub mean: Spread,
    pub variance: Spread,
    pub main: Vec<Spread>,
    pub total: Vec<Spread>,
}

/// Groups replicate records by `(method, budget, qoi)` in order of first
/// appearance.
pub fn summarize(records: &[ReplicateRecord]) -> Vec<ReplicateSummary> {
    let mut keys: Vec<(Method, f64, &str)> = Vec::new();
    for r in records {
        let key = (r.method, r.budget, r.qoi.as_str());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(method, budget, qoi)| {
            let group: Vec<&ReplicateRecord> = records
                .iter()
                .filter(|r| r.method == method && r.budget == budget && r.qoi == qoi)
                .collect();
            let col = |f: &dyn Fn(&ReplicateRecord) -> f64| -> Spread {
                Spread::of(&group.iter().map(|r| f(r)).collect::<Vec<_>>())
            };
            let d = group[0].main.len();
            ReplicateSummary {
                method,
                budget,
                qoi: qoi.to_string(),
                replicates: group.len(),
                mean: col(&|r| r.mean),
                variance: col(&|r| r.variance),
                main: (0..d).map(|j| col(&|r| r.main[j])).collect(),
                total: (0..d).map(|j| col(&|r| r.total[j])).collect(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateStudy {
    pub digest: String,
    pub mode: ReplicateMode,
    pub seed: u64,
    pub bundle_skip: u64,
    pub replicates: usize,
    pub budgets: Vec<f64>,
    pub phi: f64,
    /// Bundle rows drawn per replicate.
    pub bundle_rows: usize,
    /// MFMC cells without a feasible allocation; MC still runs there.
    #[serde(default)]
    pub skipped: Vec<SkippedQoi>,
    pub records: Vec<ReplicateRecord>,
    pub summaries: Vec<ReplicateSummary>,
    pub wall_seconds: f64,
}

impl ReplicateStudy {
    pub fn summary(&self, method: Method, budget: f64, qoi: &str) -> Option<&ReplicateSummary> {
        self.summaries
            .iter()
            .find(|s| s.method == method && s.budget == budget && s.qoi == qoi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationPair {
    pub reference: String,
    pub other: String,
    pub metrics: ErrorMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationResult {
    pub digest: String,
    pub point: Vec<f64>,
    pub pairs: Vec<ValidationPair>,
}

/// One line of the cost ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostEntry {
    pub method: Method,
    pub budget: Option<f64>,
    pub qoi: Option<String>,
    /// Model evaluations per fidelity charged to the estimator.
    pub evaluations: Vec<usize>,
    /// `Σ w_k × evaluations_k`.
    pub cost_units: f64,
    pub wall_seconds: f64,
    /// PC order and sample count matching the high-fidelity evaluations.
    pub pc_order: Option<u32>,
    pub pc_samples: Option<usize>,
}

/// Per-method cost totals. MFMC entries also carry the PC comparison
/// trained on as many high-fidelity runs as MFMC allocated.
pub fn cost_report(
    d: usize,
    costs: &[f64],
    mfmc: &[MfmcRun],
    mc: &[McRun],
    pc: &[PcRun],
) -> Vec<CostEntry> {
    let w1 = costs.first().copied().unwrap_or(1.0);
    let mut out = Vec::new();
    for run in mfmc {
        for p in &run.plans {
            let evaluations = p.plan.evaluations();
            let n_hf = evaluations[0];
            out.push(CostEntry {
                method: Method::Mfmc,
                budget: Some(run.budget),
                qoi: Some(p.qoi.clone()),
                cost_units: p.plan.cost(),
                evaluations,
                wall_seconds: run.wall_seconds,
                pc_order: PcBasis::largest_order(d, n_hf),
                pc_samples: Some(n_hf),
            });
        }
    }
    for run in mc {
        let n = run.n * (d + 2);
        out.push(CostEntry {
            method: Method::Mc,
            budget: Some(run.budget),
            qoi: None,
            evaluations: vec![n],
            cost_units: w1 * n as f64,
            wall_seconds: run.wall_seconds,
            pc_order: None,
            pc_samples: None,
        });
    }
    for run in pc {
        out.push(CostEntry {
            method: Method::Pc,
            budget: None,
            qoi: None,
            evaluations: vec![run.samples],
            cost_units: w1 * run.samples as f64,
            wall_seconds: run.wall_seconds,
            pc_order: Some(run.order),
            pc_samples: Some(run.samples),
        });
    }
    out
}

/// High-fidelity rows `N = ⌊p / (w₁ (d + 2))⌋` of a single-fidelity run.
pub fn mc_rows(budget: f64, w1: f64, d: usize) -> Result<usize> {
    let n = (budget / (w1 * (d + 2) as f64)).floor() as usize;
    if n < 2 {
        return Err(Error::BudgetTooSmall { budget, m1: n });
    }
    Ok(n)
}

/// Unperturbed outputs `[matrix][row][qoi]` of one model on a bundle.
type BundleOutputs = Vec<Vec<Vec<f64>>>;

/// Estimator inputs of one model and QoI, perturbed when `disc` is set.
fn level_evals(
    space: &ParameterSpace,
    bundle: &SampleBundle,
    outs: &BundleOutputs,
    q: usize,
    disc: Option<&Discrepancy>,
    phi: f64,
) -> SaltelliEvals {
    let tags = MatrixTag::all(bundle.dim());
    let mut cols = tags.iter().zip(outs).map(|(&tag, rows)| {
        let pts = bundle.matrix(tag);
        rows.iter()
            .enumerate()
            .map(|(i, y)| match disc {
                Some(dc) => dc.apply(space, phi, pts.row(i), y[q]),
                None => y[q],
            })
            .collect::<Vec<f64>>()
    });
    let a = cols.next().expect("A");
    let b = cols.next().expect("B");
    SaltelliEvals { a, b, c: cols.collect() }
}

fn head(evals: &SaltelliEvals, n: usize) -> SaltelliEvals {
    SaltelliEvals {
        a: evals.a[..n].to_vec(),
        b: evals.b[..n].to_vec(),
        c: evals.c.iter().map(|c| c[..n].to_vec()).collect(),
    }
}

/// A configured campaign bound to an evaluator.
pub struct Campaign {
    pub config: CampaignConfig,
    evaluator: Evaluator,
}

impl Campaign {
    /// `cache_dir = None` keeps evaluations in memory only.
    pub fn new(config: CampaignConfig, cache_dir: Option<&Path>) -> Result<Self> {
        config.validate()?;
        let evaluator = Evaluator::new(&config, cache_dir)?;
        Ok(Self { config, evaluator })
    }

    pub fn evaluator(&self) -> &Evaluator {
        &self.evaluator
    }

    /// Digest of the inputs, models and pilot design. Budgets, seeds, QoI
    /// selection, `phi` and worker counts are recorded with each run instead.
    pub fn digest(&self) -> String {
        let cfg = &self.config;
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&cfg.space).expect("space serializes"));
        h.update(cfg.n_pilot.to_le_bytes());
        h.update(cfg.pilot_skip.to_le_bytes());
        for r in &self.evaluator.runners {
            h.update(r.id.as_bytes());
            h.update(serde_json::to_vec(&r.kind).expect("kind serializes"));
            h.update(r.cost.to_le_bytes());
            h.update(r.solver.digest().as_bytes());
        }
        hex::encode(h.finalize())
    }

    fn solved(&self) -> Vec<usize> {
        self.evaluator.usage().iter().map(|u| u.solved).collect()
    }

    fn solved_since(&self, before: &[usize]) -> Vec<usize> {
        self.solved().iter().zip(before).map(|(a, b)| a - b).collect()
    }

    fn qoi_columns(&self, k: usize) -> Result<Vec<usize>> {
        let runner = &self.evaluator.runners[k];
        self.config
            .qois
            .iter()
            .map(|q| {
                runner.output_index(q).ok_or_else(|| {
                    Error::config("qois", format!("model `{}` lacks `{q}`", runner.id))
                })
            })
            .collect()
    }

    /// Outputs of model `k` restricted to the campaign QoIs.
    fn outputs(&mut self, k: usize, points: &PointSet) -> Result<Vec<Vec<f64>>> {
        let cols = self.qoi_columns(k)?;
        Ok(self
            .evaluator
            .evaluate(k, points)?
            .into_iter()
            .map(|v| cols.iter().map(|&j| v[j]).collect())
            .collect())
    }

    fn bundle_outputs(&mut self, k: usize, bundle: &SampleBundle, rows: usize) -> Result<BundleOutputs> {
        MatrixTag::all(bundle.dim())
            .into_iter()
            .map(|tag| self.outputs(k, &bundle.matrix(tag).head(rows)))
            .collect()
    }

    fn records(&self, k: usize, tag: &str, points: &PointSet, outs: &[Vec<f64>]) -> Vec<RawRecord> {
        points
            .rows()
            .zip(outs)
            .enumerate()
            .map(|(row, (z, y))| RawRecord {
                model: self.config.models[k].id.clone(),
                tag: tag.to_string(),
                row,
                z: z.to_vec(),
                y: y.clone(),
            })
            .collect()
    }

    fn bundle_records(&self, k: usize, bundle: &SampleBundle, outs: &BundleOutputs) -> Vec<RawRecord> {
        MatrixTag::all(bundle.dim())
            .into_iter()
            .zip(outs)
            .flat_map(|(tag, rows)| {
                let pts = bundle.matrix(tag).head(rows.len());
                self.records(k, &tag.to_string(), &pts, rows)
            })
            .collect()
    }

    /// Rejects pilots from another configuration and applies the configured
    /// perturbation factor.
    pub fn prepare(&self, pilot: &PilotResult) -> Result<PilotResult> {
        if pilot.digest != self.digest() {
            return Err(Error::Ordering(
                "the pilot was produced by a different configuration; rerun `pilot`".into(),
            ));
        }
        pilot
            .select(&self.config.qois)?
            .with_phi(&self.config.space, self.config.phi)
    }

    /// Evaluates every model on the same Sobol' pilot points and computes
    /// the correlation statistics per QoI. Perturbed models are fitted
    /// against the highest fidelity first.
    pub fn run_pilot(&mut self) -> Result<(PilotResult, RawEvals)> {
        let space = self.config.space.clone();
        let unit = sobol_points(space.dim(), self.config.n_pilot, self.config.pilot_skip)?;
        let points = space.scale(&unit);
        let n_models = self.config.models.len();
        let nq = self.config.qois.len();
        let mut raw = Vec::with_capacity(n_models);
        let mut records = Vec::new();
        for k in 0..n_models {
            let outs = self.outputs(k, &points)?;
            records.extend(self.records(k, "pilot", &points, &outs));
            raw.push((0..nq).map(|q| outs.iter().map(|y| y[q]).collect()).collect::<Vec<Vec<f64>>>());
        }
        let mut discrepancy = vec![vec![None; nq]; n_models];
        for (k, spec) in self.config.models.iter().enumerate() {
            if spec.kind == ModelKind::ZerodPerturbed {
                for q in 0..nq {
                    discrepancy[k][q] = Some(fit_discrepancy(&space, &points, &raw[0][q], &raw[k][q])?);
                }
            }
        }
        let mut pilot = PilotResult {
            digest: self.digest(),
            qois: self.config.qois.clone(),
            model_ids: self.config.models.iter().map(|m| m.id.clone()).collect(),
            points: points.rows().map(<[f64]>::to_vec).collect(),
            raw,
            discrepancy,
            phi: self.config.phi,
            stats: Vec::new(),
            unperturbed: Vec::new(),
        };
        pilot.unperturbed = pilot.statistics(&space, 0.0)?;
        pilot.stats = pilot.statistics(&space, pilot.phi)?;
        let raw = RawEvals {
            qois: self.config.qois.clone(),
            records,
        };
        Ok((pilot, raw))
    }

    /// Optimal allocation of `budget` for every QoI that fits in it.
    pub fn allocate(&self, pilot: &PilotResult, budget: f64) -> Result<(Vec<QoiPlan>, Vec<SkippedQoi>)> {
        let pilot = self.prepare(pilot)?;
        self.feasible_plans(&pilot, budget)
    }

    /// Plans of the QoIs that fit in `budget`, plus the ones that do not.
    /// Inadmissible statistics remain an error.
    fn feasible_plans(&self, pilot: &PilotResult, budget: f64) -> Result<(Vec<QoiPlan>, Vec<SkippedQoi>)> {
        let costs = self.config.costs();
        let d = self.config.space.dim();
        let mut plans = Vec::new();
        let mut skipped = Vec::new();
        let mut first = None;
        for (s, q) in pilot.stats.iter().zip(&pilot.qois) {
            match optimal_allocation(s, &costs, budget, d) {
                Ok(plan) => plans.push(QoiPlan { qoi: q.clone(), plan }),
                Err(e @ Error::BudgetTooSmall { .. }) => {
                    skipped.push(SkippedQoi {
                        budget,
                        qoi: q.clone(),
                        reason: e.to_string(),
                    });
                    first.get_or_insert(e);
                }
                Err(e) => return Err(tag_qoi(e, q)),
            }
        }
        if let (true, Some(e)) = (plans.is_empty(), first) {
            return Err(e);
        }
        Ok((plans, skipped))
    }

    fn mfmc_estimates(
        &self,
        pilot: &PilotResult,
        plans: &[QoiPlan],
        bundle: &SampleBundle,
        outs: &[BundleOutputs],
    ) -> Result<Vec<QoiEstimate>> {
        let space = &self.config.space;
        plans
            .iter()
            .map(|p| {
                let q = pilot.qoi_index(&p.qoi)?;
                let levels = outs
                    .iter()
                    .enumerate()
                    .map(|(k, o)| level_evals(space, bundle, o, q, pilot.discrepancy[k][q].as_ref(), pilot.phi))
                    .collect();
                let table = EvalTable::new(levels, self.config.costs());
                Ok(QoiEstimate {
                    qoi: p.qoi.clone(),
                    estimate: mfmc_sobol(&table, &p.plan)?,
                })
            })
            .collect()
    }

    /// Production MFMC run: one Sobol' bundle sized to the largest `m_K`,
    /// model `k` evaluated on its leading rows. QoIs whose allocation gives
    /// `m₁ < 2` are skipped and listed in the result.
    pub fn run_mfmc(&mut self, pilot: &PilotResult, budget: f64) -> Result<(MfmcRun, RawEvals)> {
        let start = Instant::now();
        let before = self.solved();
        let pilot = self.prepare(pilot)?;
        let (plans, skipped) = self.feasible_plans(&pilot, budget)?;
        let k_max = self.config.models.len();
        let rows: Vec<usize> = (0..k_max)
            .map(|k| plans.iter().map(|p| p.plan.m[k]).max().unwrap_or(0))
            .collect();
        let bundle = build_bundle(&self.config.space, rows[k_max - 1], self.config.bundle_skip)?;
        let mut outs = Vec::with_capacity(k_max);
        let mut records = Vec::new();
        for (k, &n) in rows.iter().enumerate() {
            let o = self.bundle_outputs(k, &bundle, n)?;
            records.extend(self.bundle_records(k, &bundle, &o));
            outs.push(o);
        }
        let estimates = self.mfmc_estimates(&pilot, &plans, &bundle, &outs)?;
        let run = MfmcRun {
            digest: pilot.digest.clone(),
            budget,
            bundle_skip: self.config.bundle_skip,
            phi: pilot.phi,
            rows,
            plans,
            estimates,
            skipped,
            solved: self.solved_since(&before),
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        let raw = RawEvals {
            qois: self.config.qois.clone(),
            records,
        };
        Ok((run, raw))
    }

    /// Single-fidelity Saltelli run of the highest fidelity.
    pub fn run_mc(&mut self, budget: f64) -> Result<(McRun, RawEvals)> {
        let start = Instant::now();
        let before = self.solved();
        let d = self.config.space.dim();
        let n = mc_rows(budget, self.config.models[0].cost, d)?;
        let bundle = build_bundle(&self.config.space, n, self.config.bundle_skip)?;
        let outs = self.bundle_outputs(0, &bundle, n)?;
        let estimates = (0..self.config.qois.len())
            .map(|q| {
                let evals = level_evals(&self.config.space, &bundle, &outs, q, None, 0.0);
                Ok(QoiEstimate {
                    qoi: self.config.qois[q].clone(),
                    estimate: mc_sobol(&evals)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let run = McRun {
            digest: self.digest(),
            budget,
            n,
            bundle_skip: self.config.bundle_skip,
            estimates,
            solved: self.solved_since(&before)[0],
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        let raw = RawEvals {
            qois: self.config.qois.clone(),
            records: self.bundle_records(0, &bundle, &outs),
        };
        Ok((run, raw))
    }

    /// Polynomial chaos reference: an order-`order` fit of the highest
    /// fidelity on `samples` Sobol' points.
    pub fn run_pc(&mut self, order: u32, samples: usize) -> Result<(PcRun, RawEvals)> {
        let start = Instant::now();
        let before = self.solved();
        let space = self.config.space.clone();
        let points = space.scale(&sobol_points(space.dim(), samples, self.config.pc_skip)?);
        let outs = self.outputs(0, &points)?;
        let qois = self
            .config
            .qois
            .iter()
            .enumerate()
            .map(|(q, name)| {
                let y: Vec<f64> = outs.iter().map(|v| v[q]).collect();
                let surrogate = fit_pce(&space, order, &points, &y)?;
                Ok(PcQoi {
                    qoi: name.clone(),
                    estimate: pc_sobol(&surrogate),
                    surrogate,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let run = PcRun {
            digest: self.digest(),
            order,
            samples,
            skip: self.config.pc_skip,
            qois,
            solved: self.solved_since(&before)[0],
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        let raw = RawEvals {
            qois: self.config.qois.clone(),
            records: self.records(0, "pc", &points, &outs),
        };
        Ok((run, raw))
    }

    fn replicate_bundle(&self, r: usize, rows: usize) -> Result<SampleBundle> {
        let cfg = &self.config;
        match cfg.replicate_mode {
            ReplicateMode::Random => build_random_bundle(&cfg.space, rows, cfg.seed.wrapping_add(r as u64)),
            ReplicateMode::SobolBlocks => {
                build_bundle(&cfg.space, rows, cfg.bundle_skip + (r * rows) as u64)
            }
        }
    }

    /// Repeats MC and MFMC at every budget on `replicates` independent
    /// bundles. Within a replicate all budgets and both methods share one
    /// bundle, so smaller runs reuse the leading rows of larger ones. The
    /// pilot and allocation stay fixed.
    pub fn run_replicates(&mut self, pilot: &PilotResult, budgets: &[f64]) -> Result<ReplicateStudy> {
        self.run_replicates_with(pilot, budgets, |_| {})
    }

    /// As [`Campaign::run_replicates`], calling `progress` after each
    /// replicate.
    pub fn run_replicates_with(
        &mut self,
        pilot: &PilotResult,
        budgets: &[f64],
        mut progress: impl FnMut(usize),
    ) -> Result<ReplicateStudy> {
        let start = Instant::now();
        let pilot = self.prepare(pilot)?;
        let d = self.config.space.dim();
        let k_max = self.config.models.len();
        let w1 = self.config.models[0].cost;
        let mut plans = Vec::with_capacity(budgets.len());
        let mut skipped = Vec::new();
        for &b in budgets {
            let (p, s) = self.feasible_plans(&pilot, b)?;
            plans.push(p);
            skipped.extend(s);
        }
        let mc_n = budgets
            .iter()
            .map(|&b| mc_rows(b, w1, d))
            .collect::<Result<Vec<_>>>()?;
        let mut rows = vec![0usize; k_max];
        for p in plans.iter().flatten() {
            for (k, &m) in p.plan.m.iter().enumerate() {
                rows[k] = rows[k].max(m);
            }
        }
        rows[0] = rows[0].max(mc_n.iter().copied().max().unwrap_or(0));
        let n_max = rows.iter().copied().max().unwrap_or(0);
        let nq = self.config.qois.len();
        let mut records = Vec::new();
        for r in 0..self.config.replicates {
            let bundle = self.replicate_bundle(r, n_max)?;
            let outs = rows
                .iter()
                .enumerate()
                .map(|(k, &n)| self.bundle_outputs(k, &bundle, n))
                .collect::<Result<Vec<_>>>()?;
            for (bi, &budget) in budgets.iter().enumerate() {
                for q in 0..nq {
                    let evals = level_evals(&self.config.space, &bundle, &outs[0], q, None, 0.0);
                    let est = mc_sobol(&head(&evals, mc_n[bi]))?;
                    records.push(record(Method::Mc, budget, &self.config.qois[q], r, est));
                }
                for e in self.mfmc_estimates(&pilot, &plans[bi], &bundle, &outs)? {
                    records.push(record(Method::Mfmc, budget, &e.qoi, r, e.estimate));
                }
            }
            progress(r);
        }
        Ok(ReplicateStudy {
            digest: pilot.digest.clone(),
            mode: self.config.replicate_mode,
            seed: self.config.seed,
            bundle_skip: self.config.bundle_skip,
            replicates: self.config.replicates,
            budgets: budgets.to_vec(),
            phi: pilot.phi,
            bundle_rows: n_max,
            skipped,
            summaries: summarize(&records),
            records,
            wall_seconds: start.elapsed().as_secs_f64(),
        })
    }

    /// Trace-level error metrics of every pair of hemodynamic models at the
    /// centre of the input space.
    pub fn validate(&self) -> Result<ValidationResult> {
        let z = self.config.space.midpoint();
        let mut traces = Vec::new();
        for r in &self.evaluator.runners {
            if let Some(tr) = r.solver.trace(&z) {
                let tr = tr.map_err(|e| Error::Evaluation {
                    model: r.id.clone(),
                    point: z.clone(),
                    source: Box::new(e),
                })?;
                traces.push((r.id.clone(), tr));
            }
        }
        let mut pairs = Vec::new();
        for i in 0..traces.len() {
            for j in i + 1..traces.len() {
                pairs.push(ValidationPair {
                    reference: traces[i].0.clone(),
                    other: traces[j].0.clone(),
                    metrics: validate_fidelities(&traces[i].1, &traces[j].1, z[0])?,
                });
            }
        }
        Ok(ValidationResult {
            digest: self.digest(),
            point: z,
            pairs,
        })
    }
}

fn record(method: Method, budget: f64, qoi: &str, replicate: usize, e: SobolEstimate) -> ReplicateRecord {
    ReplicateRecord {
        method,
        budget,
        qoi: qoi.to_string(),
        replicate,
        mean: e.mean,
        variance: e.variance,
        main: e.main,
        total: e.total,
        degenerate: e.degenerate,
    }
}

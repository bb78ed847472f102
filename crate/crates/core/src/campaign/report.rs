//! Plain-text tables for the terminal and `report.txt`.

use std::fmt::Write as _;
use std::path::Path;

use super::store::{self, write_csv};
use super::{
    cost_report, display_unit, CampaignConfig, CostEntry, McRun, MfmcRun, PcRun, PilotResult,
    QoiEstimate, QoiPlan, ReplicateStudy, SkippedQoi, ValidationResult,
};
use crate::error::Result;
use crate::estimators::Method;
use crate::sampling::ParameterSpace;

/// Left-aligned columns separated by two spaces.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new<S: ToString>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(ToString::to_string).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    fn render(&self) -> String {
        let mut width: Vec<usize> = self.header.iter().map(|h| h.chars().count()).collect();
        for r in &self.rows {
            for (w, c) in width.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |cells: &[String]| -> String {
            let padded: Vec<String> = cells
                .iter()
                .zip(&width)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect();
            padded.join("  ").trim_end().to_string() + "\n"
        };
        let mut out = line(&self.header);
        let rule: Vec<String> = width.iter().map(|w| "-".repeat(*w)).collect();
        out.push_str(&line(&rule));
        for r in &self.rows {
            out.push_str(&line(r));
        }
        out
    }
}

/// Compact number: fixed point for moderate magnitudes, scientific otherwise.
fn g(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 {
        "0".into()
    } else if (1e-2..1e5).contains(&a) {
        format!("{v:.4}")
    } else {
        format!("{v:.4e}")
    }
}

fn idx(v: f64) -> String {
    format!("{v:.4}")
}

fn qoi_label(q: &str) -> String {
    format!("{q} [{}]", display_unit(q).1)
}

pub fn pilot_table(pilot: &PilotResult) -> String {
    let perturbed = pilot.discrepancy.iter().flatten().any(Option::is_some);
    let mut head = vec!["qoi", "model", "mean", "std", "rho"];
    if perturbed {
        head.push("rho (unperturbed)");
    }
    let mut t = Table::new(&head);
    for (q, name) in pilot.qois.iter().enumerate() {
        let (s, _) = display_unit(name);
        for (k, id) in pilot.model_ids.iter().enumerate() {
            let m = &pilot.stats[q].models[k];
            let mut row = vec![
                qoi_label(name),
                id.clone(),
                g(m.mu * s),
                g(m.sigma * s),
                format!("{:.6}", pilot.stats[q].rho[k]),
            ];
            if perturbed {
                row.push(format!("{:.6}", pilot.unperturbed[q].rho[k]));
            }
            t.push(row);
        }
    }
    format!("Pilot statistics ({} runs per model, phi = {})\n{}", pilot.stats[0].n_pilot, pilot.phi, t.render())
}

fn skipped_lines(skipped: &[SkippedQoi]) -> String {
    skipped
        .iter()
        .map(|s| format!("skipped {} at budget {}: {}\n", s.qoi, s.budget, s.reason))
        .collect()
}

pub fn allocation_table(model_ids: &[String], plans: &[(f64, Vec<QoiPlan>)], skipped: &[SkippedQoi]) -> String {
    let mut head = vec!["budget".to_string(), "qoi".into()];
    head.extend(model_ids.iter().map(|id| format!("m {id}")));
    head.extend(model_ids.iter().map(|id| format!("total {id}")));
    head.extend(model_ids.iter().skip(1).map(|id| format!("alpha {id}")));
    head.push("spent".into());
    let mut t = Table::new(&head);
    for (budget, qplans) in plans {
        for p in qplans {
            let mut row = vec![format!("{budget}"), p.qoi.clone()];
            row.extend(p.plan.m.iter().map(usize::to_string));
            row.extend(p.plan.evaluations().iter().map(usize::to_string));
            row.extend(p.plan.alpha.iter().skip(1).map(|a| format!("{a:.4}")));
            row.push(format!("{:.1}", p.plan.cost()));
            t.push(row);
        }
    }
    format!("Allocation\n{}{}", t.render(), skipped_lines(skipped))
}

pub fn estimate_table(space: &ParameterSpace, title: &str, estimates: &[QoiEstimate]) -> String {
    let names = space.names();
    let mut head = vec!["qoi".to_string(), "mean".into(), "variance".into()];
    head.extend(names.iter().map(|n| format!("S_{n}")));
    head.extend(names.iter().map(|n| format!("ST_{n}")));
    let mut t = Table::new(&head);
    for e in estimates {
        let (s, _) = display_unit(&e.qoi);
        let est = &e.estimate;
        let mut row = vec![qoi_label(&e.qoi), g(est.mean * s), g(est.variance * s * s)];
        if est.degenerate {
            row.extend(std::iter::repeat_n("degenerate".to_string(), 2 * names.len()));
        } else {
            row.extend(est.main.iter().chain(&est.total).map(|v| idx(*v)));
        }
        t.push(row);
    }
    format!("{title}\n{}", t.render())
}

pub fn mfmc_table(space: &ParameterSpace, run: &MfmcRun) -> String {
    estimate_table(space, &format!("MFMC estimates, budget {}", run.budget), &run.estimates)
        + &skipped_lines(&run.skipped)
}

pub fn mc_table(space: &ParameterSpace, run: &McRun) -> String {
    estimate_table(
        space,
        &format!("MC estimates, budget {} (N = {})", run.budget, run.n),
        &run.estimates,
    )
}

pub fn pc_table(space: &ParameterSpace, run: &PcRun) -> String {
    let estimates: Vec<QoiEstimate> = run
        .qois
        .iter()
        .map(|q| QoiEstimate {
            qoi: q.qoi.clone(),
            estimate: q.estimate.clone(),
        })
        .collect();
    let mut out = estimate_table(
        space,
        &format!("PC estimates, order {} on {} runs", run.order, run.samples),
        &estimates,
    );
    for q in &run.qois {
        if let Some(w) = &q.surrogate.warning {
            let _ = writeln!(out, "warning ({}): {w}", q.qoi);
        }
    }
    out
}

pub fn replicate_table(study: &ReplicateStudy) -> String {
    let mut t = Table::new(&["budget", "qoi", "method", "E[mean]", "sd[mean]", "E[var]", "sd[var]"]);
    for s in &study.summaries {
        let (f, _) = display_unit(&s.qoi);
        t.push(vec![
            format!("{}", s.budget),
            qoi_label(&s.qoi),
            s.method.to_string(),
            g(s.mean.expectation * f),
            g(s.mean.sd * f),
            g(s.variance.expectation * f * f),
            g(s.variance.sd * f * f),
        ]);
    }
    format!(
        "Replicate moments ({} replicates, {:?} bundles)\n{}{}",
        study.replicates,
        study.mode,
        t.render(),
        skipped_lines(&study.skipped)
    )
}

pub fn mse_table(space: &ParameterSpace, study: &ReplicateStudy) -> String {
    let names = space.names();
    let mut head = vec!["budget".to_string(), "qoi".into(), "method".into()];
    head.extend(names.iter().map(|n| format!("E[S_{n}]")));
    head.extend(names.iter().map(|n| format!("MSE[S_{n}]")));
    let mut t = Table::new(&head);
    for s in &study.summaries {
        let mut row = vec![format!("{}", s.budget), s.qoi.clone(), s.method.to_string()];
        row.extend(s.main.iter().map(|m| idx(m.expectation)));
        row.extend(s.main.iter().map(|m| format!("{:.3e}", m.mse)));
        t.push(row);
    }
    format!("Replicate main indices\n{}", t.render())
}

pub fn validation_table(v: &ValidationResult) -> String {
    let mut t = Table::new(&["reference", "other", "signal", "avg %", "max %", "sys %", "dia %"]);
    for p in &v.pairs {
        for (signal, m) in p.metrics.rows() {
            t.push(vec![
                p.reference.clone(),
                p.other.clone(),
                signal.to_string(),
                format!("{:.2}", 100.0 * m.avg),
                format!("{:.2}", 100.0 * m.max),
                format!("{:.2}", 100.0 * m.sys),
                format!("{:.2}", 100.0 * m.dia),
            ]);
        }
    }
    let z: Vec<String> = v.point.iter().map(|x| g(*x)).collect();
    format!("Cross-fidelity errors at z = ({})\n{}", z.join(", "), t.render())
}

pub fn cost_table(entries: &[CostEntry]) -> String {
    let mut t = Table::new(&["method", "budget", "qoi", "evaluations", "cost", "wall [s]", "PC order", "PC runs"]);
    for e in entries {
        let evals: Vec<String> = e.evaluations.iter().map(usize::to_string).collect();
        t.push(vec![
            e.method.to_string(),
            e.budget.map(|b| b.to_string()).unwrap_or_default(),
            e.qoi.clone().unwrap_or_default(),
            evals.join("/"),
            format!("{:.1}", e.cost_units),
            format!("{:.3}", e.wall_seconds),
            e.pc_order.map(|o| o.to_string()).unwrap_or_else(|| "-".into()),
            e.pc_samples.map(|n| n.to_string()).unwrap_or_default(),
        ]);
    }
    format!("Cost\n{}", t.render())
}

fn write_cost(path: &Path, entries: &[CostEntry]) -> Result<()> {
    let header: Vec<String> = ["method", "budget", "qoi", "evaluations", "cost", "wall_seconds", "pc_order", "pc_samples"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = entries
        .iter()
        .map(|e| {
            let evals: Vec<String> = e.evaluations.iter().map(usize::to_string).collect();
            vec![
                e.method.to_string(),
                e.budget.map(|b| b.to_string()).unwrap_or_default(),
                e.qoi.clone().unwrap_or_default(),
                evals.join(";"),
                e.cost_units.to_string(),
                e.wall_seconds.to_string(),
                e.pc_order.map(|o| o.to_string()).unwrap_or_default(),
                e.pc_samples.map(|n| n.to_string()).unwrap_or_default(),
            ]
        })
        .collect();
    write_csv(path, &header, &rows)
}

/// Plot data: every index of every persisted MFMC and MC run by budget.
fn write_indices_vs_budget(path: &Path, space: &ParameterSpace, mfmc: &[MfmcRun], mc: &[McRun]) -> Result<()> {
    let names = space.names();
    let mut rows = Vec::new();
    let runs = mfmc
        .iter()
        .map(|r| (Method::Mfmc, r.budget, &r.estimates))
        .chain(mc.iter().map(|r| (Method::Mc, r.budget, &r.estimates)));
    for (method, budget, estimates) in runs {
        for e in estimates {
            for (j, n) in names.iter().enumerate() {
                rows.push(vec![
                    method.to_string(),
                    budget.to_string(),
                    e.qoi.clone(),
                    n.to_string(),
                    e.estimate.main[j].to_string(),
                    e.estimate.total[j].to_string(),
                ]);
            }
        }
    }
    let header: Vec<String> = ["method", "budget", "qoi", "input", "main", "total"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    write_csv(path, &header, &rows)
}

/// Renders every persisted stage result under `dir`, and writes
/// `indices_vs_budget.csv`, `cost.csv` and `report.txt`. The output depends
/// only on the files present, so rerunning on the same directory is
/// byte-identical.
pub fn render(dir: &Path, config: &CampaignConfig) -> Result<String> {
    let space = &config.space;
    let model_ids: Vec<String> = config.models.iter().map(|m| m.id.clone()).collect();
    let mut out = format!("Campaign `{}`\n\n", config.name);
    let pilot: Option<PilotResult> = store::load_optional(&dir.join(store::PILOT))?;
    if let Some(p) = &pilot {
        out.push_str(&pilot_table(p));
        out.push('\n');
    }
    let mfmc = store::load_mfmc_runs(dir)?;
    let mc = store::load_mc_runs(dir)?;
    let pc = store::load_pc_runs(dir)?;
    if !mfmc.is_empty() {
        let plans: Vec<(f64, Vec<QoiPlan>)> = mfmc.iter().map(|r| (r.budget, r.plans.clone())).collect();
        let skipped: Vec<SkippedQoi> = mfmc.iter().flat_map(|r| r.skipped.clone()).collect();
        out.push_str(&allocation_table(&model_ids, &plans, &skipped));
        out.push('\n');
    }
    for r in &mfmc {
        out.push_str(&mfmc_table(space, r));
        out.push('\n');
    }
    for r in &mc {
        out.push_str(&mc_table(space, r));
        out.push('\n');
    }
    for r in &pc {
        out.push_str(&pc_table(space, r));
        out.push('\n');
    }
    let study: Option<ReplicateStudy> = store::load_optional(&dir.join(store::REPLICATES))?;
    if let Some(s) = &study {
        out.push_str(&replicate_table(s));
        out.push('\n');
        out.push_str(&mse_table(space, s));
        out.push('\n');
    }
    let validation: Option<ValidationResult> = store::load_optional(&dir.join(store::VALIDATION))?;
    if let Some(v) = &validation {
        out.push_str(&validation_table(v));
        out.push('\n');
    }
    let ledger = cost_report(space.dim(), &config.costs(), &mfmc, &mc, &pc);
    if !ledger.is_empty() {
        out.push_str(&cost_table(&ledger));
    }
    write_indices_vs_budget(&dir.join("indices_vs_budget.csv"), space, &mfmc, &mc)?;
    write_cost(&dir.join("cost.csv"), &ledger)?;
    std::fs::write(dir.join("report.txt"), &out)?;
    Ok(out)
}

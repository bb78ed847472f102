//! On-disk layout of a campaign output directory.
//!
//! ```text
//! pilot.json  pilot_evals.csv  pilot_stats.csv  allocations.csv
//! mfmc/budget_<p>/{run.json, estimates.csv, levels.csv, evals.csv}
//! mc/budget_<p>/{run.json, estimates.csv, evals.csv}
//! pc/order_<o>_n<n>/{run.json, estimates.csv, coefficients.csv, evals.csv}
//! replicates/{study.json, summary.csv, estimates.csv}
//! validation.json  validation.csv
//! indices_vs_budget.csv  cost.csv  report.txt
//! cache/<solver digest>.csv
//! ```
//!
//! JSON files are the source of truth for later stages; CSV files are for
//! people and plotting tools. QoIs are written in display units.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{
    display_unit, McRun, MfmcRun, PcRun, PilotResult, QoiEstimate, QoiPlan, RawEvals,
    ReplicateStudy, ValidationResult,
};
use crate::error::{Error, Result};
use crate::sampling::ParameterSpace;

pub const PILOT: &str = "pilot.json";
pub const VALIDATION: &str = "validation.json";
pub const REPLICATES: &str = "replicates/study.json";

fn num(v: f64) -> String {
    v.to_string()
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Writes a header and rows of already formatted cells.
pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Loads a stage result; a missing file is an ordering error naming the
/// stage that produces it.
pub fn load_json<T: DeserializeOwned>(path: &Path, stage: &str) -> Result<T> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::Ordering(format!(
                "{} not found; run `{stage}` first",
                path.display()
            )))
        }
        Err(e) => return Err(e.into()),
    };
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn load_pilot(dir: &Path) -> Result<PilotResult> {
    load_json(&dir.join(PILOT), "pilot")
}

fn raw_header(space: &ParameterSpace, qois: &[String]) -> Vec<String> {
    let mut h: Vec<String> = ["model", "matrix", "row"].iter().map(|s| s.to_string()).collect();
    h.extend(space.names().iter().map(|s| s.to_string()));
    h.extend(qois.iter().map(|q| format!("{q}[{}]", display_unit(q).1)));
    h
}

pub fn write_raw(path: &Path, space: &ParameterSpace, raw: &RawEvals) -> Result<()> {
    let scale: Vec<f64> = raw.qois.iter().map(|q| display_unit(q).0).collect();
    let rows: Vec<Vec<String>> = raw
        .records
        .iter()
        .map(|r| {
            let mut row = vec![r.model.clone(), r.tag.clone(), r.row.to_string()];
            row.extend(r.z.iter().map(|v| num(*v)));
            row.extend(r.y.iter().zip(&scale).map(|(v, s)| num(v * s)));
            row
        })
        .collect();
    write_csv(path, &raw_header(space, &raw.qois), &rows)
}

fn header(cells: &[&str]) -> Vec<String> {
    cells.iter().map(|s| s.to_string()).collect()
}

pub fn save_pilot(dir: &Path, space: &ParameterSpace, pilot: &PilotResult, raw: &RawEvals) -> Result<()> {
    save_json(&dir.join(PILOT), pilot)?;
    write_raw(&dir.join("pilot_evals.csv"), space, raw)?;
    let mut rows = Vec::new();
    for (q, name) in pilot.qois.iter().enumerate() {
        let (s, unit) = display_unit(name);
        for (k, id) in pilot.model_ids.iter().enumerate() {
            let m = &pilot.stats[q].models[k];
            rows.push(vec![
                name.clone(),
                unit.to_string(),
                id.clone(),
                num(m.mu * s),
                num(m.sigma * s),
                num(m.delta * s.powi(4)),
                num(m.tau * s.powi(4)),
                num(pilot.stats[q].rho[k]),
                num(pilot.unperturbed[q].rho[k]),
                num(pilot.stats[q].q[k]),
            ]);
        }
    }
    write_csv(
        &dir.join("pilot_stats.csv"),
        &header(&["qoi", "unit", "model", "mu", "sigma", "delta", "tau", "rho", "rho_unperturbed", "q"]),
        &rows,
    )
}

/// Allocation table, one row per (budget, QoI, model).
pub fn write_allocations(path: &Path, model_ids: &[String], plans: &[(f64, Vec<QoiPlan>)]) -> Result<()> {
    let mut rows = Vec::new();
    for (budget, qplans) in plans {
        for p in qplans {
            let evals = p.plan.evaluations();
            for (k, id) in model_ids.iter().enumerate() {
                rows.push(vec![
                    num(*budget),
                    p.qoi.clone(),
                    (k + 1).to_string(),
                    id.clone(),
                    p.plan.m[k].to_string(),
                    evals[k].to_string(),
                    num(p.plan.alpha[k]),
                    num(p.plan.r[k]),
                    num(p.plan.cost()),
                ]);
            }
        }
    }
    write_csv(
        path,
        &header(&["budget", "qoi", "level", "model", "m", "evaluations", "alpha", "r", "spent"]),
        &rows,
    )
}

/// One row per (QoI, input): moments in display units plus both indices.
pub fn write_estimates(path: &Path, space: &ParameterSpace, estimates: &[QoiEstimate]) -> Result<()> {
    let names = space.names();
    let mut rows = Vec::new();
    for e in estimates {
        let (s, unit) = display_unit(&e.qoi);
        let est = &e.estimate;
        for (j, name) in names.iter().enumerate() {
            rows.push(vec![
                e.qoi.clone(),
                unit.to_string(),
                name.to_string(),
                num(est.mean * s),
                num(est.variance * s * s),
                est.degenerate.to_string(),
                num(est.main[j]),
                num(est.total[j]),
            ]);
        }
    }
    write_csv(
        path,
        &header(&["qoi", "unit", "input", "mean", "variance", "degenerate", "main", "total"]),
        &rows,
    )
}

pub fn run_dir(dir: &Path, method: &str, budget: f64) -> PathBuf {
    dir.join(method).join(format!("budget_{budget}"))
}

pub fn pc_dir(dir: &Path, order: u32, samples: usize) -> PathBuf {
    dir.join("pc").join(format!("order_{order}_n{samples}"))
}

pub fn save_mfmc(dir: &Path, space: &ParameterSpace, model_ids: &[String], run: &MfmcRun, raw: &RawEvals) -> Result<()> {
    let d = run_dir(dir, "mfmc", run.budget);
    save_json(&d.join("run.json"), run)?;
    write_estimates(&d.join("estimates.csv"), space, &run.estimates)?;
    write_raw(&d.join("evals.csv"), space, raw)?;
    let names = space.names();
    let mut rows = Vec::new();
    for e in &run.estimates {
        let (s, _) = display_unit(&e.qoi);
        for lv in &e.estimate.levels {
            let id = &model_ids[lv.level - 1];
            for (j, name) in names.iter().enumerate() {
                let mut row = vec![
                    e.qoi.clone(),
                    lv.level.to_string(),
                    id.clone(),
                    num(lv.alpha),
                    name.to_string(),
                    lv.own.m.to_string(),
                    num(lv.own.mean * s),
                    num(lv.own.variance * s * s),
                    num(lv.own.vj[j] * s * s),
                    num(lv.own.tj[j] * s * s),
                ];
                match &lv.shared {
                    Some(sh) => row.extend([
                        sh.m.to_string(),
                        num(sh.mean * s),
                        num(sh.variance * s * s),
                        num(sh.vj[j] * s * s),
                        num(sh.tj[j] * s * s),
                    ]),
                    None => row.extend(std::iter::repeat_n(String::new(), 5)),
                }
                rows.push(row);
            }
        }
    }
    write_csv(
        &d.join("levels.csv"),
        &header(&[
            "qoi", "level", "model", "alpha", "input", "m_own", "mean_own", "variance_own",
            "vj_own", "tj_own", "m_shared", "mean_shared", "variance_shared", "vj_shared",
            "tj_shared",
        ]),
        &rows,
    )
}

pub fn save_mc(dir: &Path, space: &ParameterSpace, run: &McRun, raw: &RawEvals) -> Result<()> {
    let d = run_dir(dir, "mc", run.budget);
    save_json(&d.join("run.json"), run)?;
    write_estimates(&d.join("estimates.csv"), space, &run.estimates)?;
    write_raw(&d.join("evals.csv"), space, raw)
}

pub fn save_pc(dir: &Path, space: &ParameterSpace, run: &PcRun, raw: &RawEvals) -> Result<()> {
    let d = pc_dir(dir, run.order, run.samples);
    save_json(&d.join("run.json"), run)?;
    let estimates: Vec<QoiEstimate> = run
        .qois
        .iter()
        .map(|q| QoiEstimate {
            qoi: q.qoi.clone(),
            estimate: q.estimate.clone(),
        })
        .collect();
    write_estimates(&d.join("estimates.csv"), space, &estimates)?;
    write_raw(&d.join("evals.csv"), space, raw)?;
    let mut h = header(&["qoi"]);
    h.extend(space.names().iter().map(|n| format!("alpha_{n}")));
    h.push("coefficient".into());
    let mut rows = Vec::new();
    for q in &run.qois {
        let (s, _) = display_unit(&q.qoi);
        for (alpha, c) in q.surrogate.basis.terms.iter().zip(&q.surrogate.coefficients) {
            let mut row = vec![q.qoi.clone()];
            row.extend(alpha.iter().map(u32::to_string));
            row.push(num(c * s));
            rows.push(row);
        }
    }
    write_csv(&d.join("coefficients.csv"), &h, &rows)
}

pub fn save_replicates(dir: &Path, space: &ParameterSpace, study: &ReplicateStudy) -> Result<()> {
    save_json(&dir.join(REPLICATES), study)?;
    let names = space.names();
    let mut h = header(&["method", "budget", "qoi", "replicate", "mean", "variance", "degenerate"]);
    h.extend(names.iter().map(|n| format!("S_{n}")));
    h.extend(names.iter().map(|n| format!("ST_{n}")));
    let rows: Vec<Vec<String>> = study
        .records
        .iter()
        .map(|r| {
            let (s, _) = display_unit(&r.qoi);
            let mut row = vec![
                r.method.to_string(),
                num(r.budget),
                r.qoi.clone(),
                r.replicate.to_string(),
                num(r.mean * s),
                num(r.variance * s * s),
                r.degenerate.to_string(),
            ];
            row.extend(r.main.iter().chain(&r.total).map(|v| num(*v)));
            row
        })
        .collect();
    write_csv(&dir.join("replicates/estimates.csv"), &h, &rows)?;

    let mut h = header(&[
        "method", "budget", "qoi", "unit", "replicates", "E_mean", "sd_mean", "E_variance",
        "sd_variance",
    ]);
    for kind in ["S", "ST"] {
        for n in &names {
            h.extend([format!("E_{kind}_{n}"), format!("sd_{kind}_{n}"), format!("mse_{kind}_{n}")]);
        }
    }
    let rows: Vec<Vec<String>> = study
        .summaries
        .iter()
        .map(|s| {
            let (f, unit) = display_unit(&s.qoi);
            let mut row = vec![
                s.method.to_string(),
                num(s.budget),
                s.qoi.clone(),
                unit.to_string(),
                s.replicates.to_string(),
                num(s.mean.expectation * f),
                num(s.mean.sd * f),
                num(s.variance.expectation * f * f),
                num(s.variance.sd * f * f),
            ];
            for sp in s.main.iter().chain(&s.total) {
                row.extend([num(sp.expectation), num(sp.sd), num(sp.mse)]);
            }
            row
        })
        .collect();
    write_csv(&dir.join("replicates/summary.csv"), &h, &rows)
}

pub fn save_validation(dir: &Path, v: &ValidationResult) -> Result<()> {
    save_json(&dir.join(VALIDATION), v)?;
    let mut rows = Vec::new();
    for p in &v.pairs {
        for (signal, m) in p.metrics.rows() {
            rows.push(vec![
                p.reference.clone(),
                p.other.clone(),
                signal.to_string(),
                num(m.avg),
                num(m.max),
                num(m.sys),
                num(m.dia),
            ]);
        }
    }
    write_csv(
        &dir.join("validation.csv"),
        &header(&["reference", "other", "signal", "avg", "max", "sys", "dia"]),
        &rows,
    )
}

/// Every `run.json` under `dir/<method>/`, ordered by budget.
fn load_runs<T: DeserializeOwned>(dir: &Path, method: &str, key: impl Fn(&T) -> f64) -> Result<Vec<T>> {
    let root = dir.join(method);
    let mut runs = Vec::new();
    let entries = match fs::read_dir(&root) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(runs),
        Err(e) => return Err(e.into()),
    };
    for entry in entries {
        let path = entry?.path().join("run.json");
        if path.is_file() {
            runs.push(load_json::<T>(&path, method)?);
        }
    }
    runs.sort_by(|a, b| key(a).total_cmp(&key(b)));
    Ok(runs)
}

pub fn load_mfmc_runs(dir: &Path) -> Result<Vec<MfmcRun>> {
    load_runs(dir, "mfmc", |r: &MfmcRun| r.budget)
}

pub fn load_mc_runs(dir: &Path) -> Result<Vec<McRun>> {
    load_runs(dir, "mc", |r: &McRun| r.budget)
}

/// PC runs ordered by sample count, then order.
pub fn load_pc_runs(dir: &Path) -> Result<Vec<PcRun>> {
    load_runs(dir, "pc", |r: &PcRun| r.samples as f64 * 1e3 + r.order as f64)
}

/// Loads a JSON file if present.
pub fn load_optional<T: DeserializeOwned>(path: &Path) -> Result<Option<T>> {
    if path.is_file() {
        load_json(path, "").map(Some)
    } else {
        Ok(None)
    }
}

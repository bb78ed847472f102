//! Parallel model evaluation with a persistent, append-only result cache.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{outputs_of, CampaignConfig, ModelKind};
use crate::error::{Error, Result};
use crate::models::{
    extract_qoi, simulate_0d, simulate_1d, AnalyticModel, HemoConfig, InflowWaveform, StationTrace,
};
use crate::sampling::PointSet;

/// What a model actually computes; perturbation is applied downstream.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "solver", rename_all = "snake_case")]
pub enum Solver {
    OneD {
        hemo: HemoConfig,
        #[serde(skip)]
        waveform: Arc<InflowWaveform>,
    },
    ZeroD {
        hemo: HemoConfig,
        #[serde(skip)]
        waveform: Arc<InflowWaveform>,
    },
    Analytic { function: AnalyticModel },
}

impl Solver {
    pub fn run(&self, z: &[f64]) -> Result<Vec<f64>> {
        match self {
            Solver::OneD { hemo, waveform } => {
                Ok(extract_qoi(&simulate_1d(z, hemo, waveform)?)?.to_array().to_vec())
            }
            Solver::ZeroD { hemo, waveform } => {
                Ok(extract_qoi(&simulate_0d(z, hemo, waveform)?)?.to_array().to_vec())
            }
            Solver::Analytic { function } => Ok(vec![function.evaluate(z)?]),
        }
    }

    /// Final-cycle station trace; `None` for analytic functions.
    pub fn trace(&self, z: &[f64]) -> Option<Result<StationTrace>> {
        match self {
            Solver::OneD { hemo, waveform } => Some(simulate_1d(z, hemo, waveform)),
            Solver::ZeroD { hemo, waveform } => Some(simulate_0d(z, hemo, waveform)),
            Solver::Analytic { .. } => None,
        }
    }

    /// Hex SHA-256 of the solver settings and inflow samples.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(self).expect("solver settings serialize"));
        if let Solver::OneD { waveform, .. } | Solver::ZeroD { waveform, .. } = self {
            h.update(waveform.period().to_le_bytes());
            let (t, q) = waveform.samples();
            for v in t.iter().chain(q) {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone)]
pub struct ModelRunner {
    pub id: String,
    pub kind: ModelKind,
    pub cost: f64,
    pub solver: Solver,
    pub outputs: &'static [&'static str],
}

impl ModelRunner {
    pub fn output_index(&self, qoi: &str) -> Option<usize> {
        self.outputs.iter().position(|o| *o == qoi)
    }
}

pub fn build_runners(cfg: &CampaignConfig) -> Result<Vec<ModelRunner>> {
    let waveform = Arc::new(match &cfg.waveform {
        Some(path) => InflowWaveform::from_file(path)?,
        None => InflowWaveform::carotid(),
    });
    cfg.models
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let solver = match spec.kind {
                ModelKind::Oned | ModelKind::SurrogateHf => Solver::OneD {
                    hemo: cfg.model_hemo(i)?,
                    waveform: waveform.clone(),
                },
                ModelKind::Zerod | ModelKind::ZerodPerturbed => Solver::ZeroD {
                    hemo: cfg.model_hemo(i)?,
                    waveform: waveform.clone(),
                },
                ModelKind::Analytic => Solver::Analytic {
                    function: spec.function.clone().expect("validated"),
                },
            };
            Ok(ModelRunner {
                id: spec.id.clone(),
                kind: spec.kind,
                cost: spec.cost,
                solver,
                outputs: outputs_of(spec.kind),
            })
        })
        .collect()
}

/// Exact bit pattern of a point, used as the in-memory key.
fn point_key(z: &[f64]) -> Vec<u64> {
    z.iter().map(|v| v.to_bits()).collect()
}

pub fn point_hash(z: &[f64]) -> String {
    let mut h = Sha256::new();
    for v in z {
        h.update(v.to_bits().to_le_bytes());
    }
    hex::encode(&h.finalize()[..16])
}

/// Evaluation counters of one model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ModelUsage {
    /// Solver runs actually executed.
    pub solved: usize,
    /// Requests served from the cache.
    pub cached: usize,
    /// Summed solver time over all threads.
    pub solver_time: Duration,
}

struct Cache {
    map: HashMap<Vec<u64>, Vec<f64>>,
    writer: Option<BufWriter<File>>,
}

impl Cache {
    /// Loads `path` if present. Lines are `hash,z bits…,outputs…` with
    /// floats stored as hex bit patterns so reloads are exact.
    fn open(path: Option<PathBuf>, dim: usize, n_out: usize) -> Result<Self> {
        let mut map = HashMap::new();
        let writer = match path {
            None => None,
            Some(path) => {
                if path.exists() {
                    let reader = BufReader::new(File::open(&path)?);
                    for (lineno, line) in reader.lines().enumerate() {
                        let line = line?;
                        if line.is_empty() || line.starts_with('#') {
                            continue;
                        }
                        let fields: Vec<&str> = line.split(',').collect();
                        let parse = |s: &str| {
                            u64::from_str_radix(s, 16).map_err(|e| Error::Parse {
                                path: path.clone(),
                                message: format!("line {}: {e}", lineno + 1),
                            })
                        };
                        if fields.len() != 1 + dim + n_out {
                            // A torn final line from an interrupted run is skipped.
                            continue;
                        }
                        let key = fields[1..=dim].iter().map(|s| parse(s)).collect::<Result<Vec<_>>>()?;
                        let out = fields[1 + dim..]
                            .iter()
                            .map(|s| parse(s).map(f64::from_bits))
                            .collect::<Result<Vec<_>>>()?;
                        map.insert(key, out);
                    }
                }
                if let Some(dir) = path.parent() {
                    fs::create_dir_all(dir)?;
                }
                let file = OpenOptions::new().create(true).append(true).open(&path)?;
                Some(BufWriter::new(file))
            }
        };
        Ok(Self { map, writer })
    }

    fn insert(&mut self, z: &[f64], out: Vec<f64>) -> Result<()> {
        if let Some(w) = self.writer.as_mut() {
            let mut line = point_hash(z);
            for v in z.iter().chain(&out) {
                line.push(',');
                line.push_str(&format!("{:016x}", v.to_bits()));
            }
            writeln!(w, "{line}")?;
        }
        self.map.insert(point_key(z), out);
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        if let Some(w) = self.writer.as_mut() {
            w.flush()?;
        }
        Ok(())
    }
}

/// Evaluates models on point sets, never solving the same (model, point)
/// pair twice. Models with identical solver settings share one cache.
pub struct Evaluator {
    pub runners: Vec<ModelRunner>,
    cache_of: Vec<usize>,
    caches: Vec<Cache>,
    usage: Vec<ModelUsage>,
    pool: rayon::ThreadPool,
}

impl Evaluator {
    /// `cache_dir = None` keeps results in memory only.
    pub fn new(cfg: &CampaignConfig, cache_dir: Option<&Path>) -> Result<Self> {
        let runners = build_runners(cfg)?;
        let mut digests: Vec<String> = Vec::new();
        let mut cache_of = Vec::new();
        let mut caches = Vec::new();
        for r in &runners {
            let digest = r.solver.digest();
            let idx = match digests.iter().position(|d| *d == digest) {
                Some(i) => i,
                None => {
                    let path = cache_dir.map(|d| d.join(format!("{digest}.csv")));
                    caches.push(Cache::open(path, cfg.space.dim(), r.outputs.len())?);
                    digests.push(digest);
                    digests.len() - 1
                }
            };
            cache_of.push(idx);
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| Error::config("jobs", e.to_string()))?;
        Ok(Self {
            usage: vec![ModelUsage::default(); runners.len()],
            runners,
            cache_of,
            caches,
            pool,
        })
    }

    pub fn usage(&self) -> &[ModelUsage] {
        &self.usage
    }

    /// All outputs of model `k` at every row of `points`.
    pub fn evaluate(&mut self, k: usize, points: &PointSet) -> Result<Vec<Vec<f64>>> {
        let cache = &mut self.caches[self.cache_of[k]];
        let mut missing: Vec<usize> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (i, z) in points.rows().enumerate() {
            let key = point_key(z);
            if !cache.map.contains_key(&key) && seen.insert(key) {
                missing.push(i);
            }
        }
        let runner = &self.runners[k];
        let solved: Vec<(Result<Vec<f64>>, Duration)> = self.pool.install(|| {
            missing
                .par_iter()
                .map(|&i| {
                    let start = Instant::now();
                    let out = runner.solver.run(points.row(i));
                    (out, start.elapsed())
                })
                .collect()
        });
        let usage = &mut self.usage[k];
        usage.cached += points.len() - missing.len();
        let mut failure = None;
        for (&i, (out, dt)) in missing.iter().zip(solved) {
            usage.solved += 1;
            usage.solver_time += dt;
            match out {
                Ok(v) => cache.insert(points.row(i), v)?,
                Err(e) if failure.is_none() => {
                    failure = Some(Error::Evaluation {
                        model: runner.id.clone(),
                        point: points.row(i).to_vec(),
                        source: Box::new(e),
                    })
                }
                Err(_) => {}
            }
        }
        cache.flush()?;
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(points
            .rows()
            .map(|z| cache.map[&point_key(z)].clone())
            .collect())
    }

    /// Output `qoi` of model `k` at every row of `points`.
    pub fn evaluate_qoi(&mut self, k: usize, points: &PointSet, qoi: &str) -> Result<Vec<f64>> {
        let j = self.runners[k]
            .output_index(qoi)
            .ok_or_else(|| Error::config("qois", format!("model `{}` lacks `{qoi}`", self.runners[k].id)))?;
        Ok(self.evaluate(k, points)?.into_iter().map(|v| v[j]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{sobol_points, ParameterSpace};

    fn analytic_cfg() -> CampaignConfig {
        CampaignConfig::from_toml_str(
            r#"
            qois = ["y"]
            space = { params = [
                { name = "z1", lower = 0.0, upper = 1.0 },
                { name = "z2", lower = 0.0, upper = 1.0 },
            ] }
            [[models]]
            id = "f"
            kind = "analytic"
            cost = 1.0
            function = { function = "linear_additive", weights = [1.0, 2.0] }
            [[models]]
            id = "g"
            kind = "analytic"
            cost = 0.1
            function = { function = "linear_additive", weights = [1.0, 2.0] }
            "#,
            None,
        )
        .unwrap()
    }

    #[test]
    fn identical_models_share_cache_and_resume() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = analytic_cfg();
        let space = ParameterSpace::uniform(2, 0.0, 1.0).unwrap();
        let pts = space.scale(&sobol_points(2, 16, 1).unwrap());
        let mut ev = Evaluator::new(&cfg, Some(dir.path())).unwrap();
        let a = ev.evaluate_qoi(0, &pts, "y").unwrap();
        let b = ev.evaluate_qoi(1, &pts, "y").unwrap();
        assert_eq!(a, b);
        assert_eq!(ev.usage()[0].solved, 16);
        assert_eq!((ev.usage()[1].solved, ev.usage()[1].cached), (0, 16));
        drop(ev);
        let mut resumed = Evaluator::new(&cfg, Some(dir.path())).unwrap();
        let c = resumed.evaluate_qoi(0, &pts, "y").unwrap();
        assert_eq!(a, c);
        assert_eq!(resumed.usage()[0].solved, 0);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn failures_name_the_point() {
        let cfg = CampaignConfig::carotid_bifidelity();
        let mut ev = Evaluator::new(&cfg, None).unwrap();
        let pts = PointSet::from_rows(&[[3.3e-3, 440e3, 0.78e-3], [-1.0, 440e3, 0.78e-3]]).unwrap();
        match ev.evaluate(1, &pts) {
            Err(Error::Evaluation { model, point, .. }) => {
                assert_eq!(model, "0d");
                assert_eq!(point[0], -1.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn digest_depends_on_settings() {
        let cfg = CampaignConfig::carotid_bifidelity();
        let runners = build_runners(&cfg).unwrap();
        assert_ne!(runners[0].solver.digest(), runners[1].solver.digest());
        let mut other = cfg.clone();
        other.hemo.cycles_0d = 9;
        assert_ne!(
            build_runners(&other).unwrap()[1].solver.digest(),
            runners[1].solver.digest()
        );
        assert_eq!(point_hash(&[1.0, 2.0]).len(), 32);
    }
}

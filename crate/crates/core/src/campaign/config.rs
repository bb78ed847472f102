//! Campaign configuration file (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{AnalyticModel, HemoConfig, HEMO_OUTPUTS};
use crate::sampling::ParameterSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Oned,
    Zerod,
    /// The 0D model minus the linear trend of its pilot discrepancy to
    /// model 1.
    ZerodPerturbed,
    Analytic,
    /// A finer-grid 1D model standing in for an expensive high-fidelity solver.
    SurrogateHf,
}

impl ModelKind {
    pub fn is_hemodynamic(self) -> bool {
        !matches!(self, ModelKind::Analytic)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub id: String,
    pub kind: ModelKind,
    /// Cost of one evaluation in high-fidelity solve units.
    pub cost: f64,
    /// Overrides of the campaign-wide `[hemo]` table for this model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hemo: Option<toml::Table>,
    /// Required for `kind = "analytic"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<AnalyticModel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReplicateMode {
    /// Independent pseudo-random bundles seeded by `seed + replicate`.
    #[default]
    Random,
    /// Disjoint consecutive blocks of the Sobol' sequence.
    SobolBlocks,
}

fn default_name() -> String {
    "campaign".into()
}
fn default_qois() -> Vec<String> {
    HEMO_OUTPUTS.iter().map(|s| s.to_string()).collect()
}
fn default_budgets() -> Vec<f64> {
    vec![500.0, 1000.0, 2000.0, 4000.0, 6000.0, 8000.0, 10000.0]
}
fn default_n_pilot() -> usize {
    150
}
fn one() -> u64 {
    1
}
fn default_phi() -> f64 {
    1.0
}
fn default_replicates() -> usize {
    100
}
fn default_seed() -> u64 {
    20_240_601
}
fn default_pc_order() -> u32 {
    4
}
fn default_pc_samples() -> usize {
    90
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "ParameterSpace::carotid")]
    pub space: ParameterSpace,
    /// Highest fidelity first.
    pub models: Vec<ModelSpec>,
    #[serde(default = "default_qois")]
    pub qois: Vec<String>,
    #[serde(default = "default_budgets")]
    pub budgets: Vec<f64>,
    #[serde(default = "default_n_pilot")]
    pub n_pilot: usize,
    /// Leading Sobol' points discarded before the pilot sample.
    #[serde(default = "one")]
    pub pilot_skip: u64,
    /// Leading points discarded before production Saltelli bundles.
    #[serde(default = "one")]
    pub bundle_skip: u64,
    #[serde(default = "default_phi")]
    pub phi: f64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub replicate_mode: ReplicateMode,
    /// Budgets of the replicate study; defaults to `budgets`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicate_budgets: Option<Vec<f64>>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_pc_order")]
    pub pc_order: u32,
    #[serde(default = "default_pc_samples")]
    pub pc_samples: usize,
    #[serde(default = "one")]
    pub pc_skip: u64,
    /// Worker threads for model evaluations; 0 uses every core.
    #[serde(default)]
    pub jobs: usize,
    #[serde(default)]
    pub hemo: HemoConfig,
    /// Two-column inflow file; the built-in carotid waveform if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waveform: Option<PathBuf>,
}

/// Best-effort key path from a TOML deserialization message.
fn error_key(message: &str) -> String {
    for marker in ["unknown field `", "missing field `"] {
        if let Some(i) = message.find(marker) {
            let rest = &message[i + marker.len()..];
            if let Some(end) = rest.find('`') {
                return rest[..end].to_string();
            }
        }
    }
    "<root>".into()
}

impl CampaignConfig {
    /// Parses and validates a configuration; relative waveform paths are
    /// resolved against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut cfg: CampaignConfig = toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            Error::config(error_key(&message), e.to_string().trim().to_string())
        })?;
        if let (Some(base), Some(w)) = (base_dir, cfg.waveform.as_mut()) {
            if w.is_relative() {
                *w = base.join(&*w);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text, path.parent())
    }

    /// A bi-fidelity 1D/0D campaign on the carotid inputs.
    pub fn carotid_bifidelity() -> Self {
        Self::from_toml_str(
            r#"
            name = "cca-1d-0d"
            [[models]]
            id = "1d"
            kind = "oned"
            cost = 1.0
            [[models]]
            id = "0d"
            kind = "zerod"
            cost = 0.3
            "#,
            None,
        )
        .expect("built-in configuration is valid")
    }

    pub fn replicate_budgets(&self) -> &[f64] {
        self.replicate_budgets.as_deref().unwrap_or(&self.budgets)
    }

    pub fn validate(&self) -> Result<()> {
        self.space.validate()?;
        self.hemo.validate()?;
        if self.models.is_empty() {
            return Err(Error::config("models", "at least one model required"));
        }
        let mut ids = std::collections::HashSet::new();
        for (i, m) in self.models.iter().enumerate() {
            let key = |f: &str| format!("models[{i}].{f}");
            if !ids.insert(m.id.as_str()) {
                return Err(Error::config(key("id"), format!("duplicate model id `{}`", m.id)));
            }
            if !(m.cost.is_finite() && m.cost > 0.0) {
                return Err(Error::config(key("cost"), "must be finite and > 0"));
            }
            match (m.kind, &m.function) {
                (ModelKind::Analytic, None) => {
                    return Err(Error::config(key("function"), "analytic models need a function"))
                }
                (ModelKind::Analytic, Some(f)) => {
                    if let Some(d) = f.dim() {
                        if d != self.space.dim() {
                            return Err(Error::config(
                                key("function"),
                                format!("function takes {d} inputs but the space has {}", self.space.dim()),
                            ));
                        }
                    }
                }
                (_, Some(_)) => {
                    return Err(Error::config(key("function"), "only analytic models take a function"))
                }
                (_, None) => {
                    if self.space.dim() != 3 {
                        return Err(Error::config(
                            "space.params",
                            "hemodynamic models take exactly (r, E, h)",
                        ));
                    }
                }
            }
            if m.kind == ModelKind::ZerodPerturbed && i == 0 {
                return Err(Error::config(key("kind"), "the highest fidelity cannot be perturbed"));
            }
        }
        if self.n_pilot < 5 {
            return Err(Error::config("n_pilot", "at least 5 pilot runs required"));
        }
        if self.qois.is_empty() {
            return Err(Error::config("qois", "at least one QoI required"));
        }
        for q in &self.qois {
            for m in &self.models {
                if !outputs_of(m.kind).contains(&q.as_str()) {
                    return Err(Error::config(
                        "qois",
                        format!("model `{}` does not produce `{q}`", m.id),
                    ));
                }
            }
        }
        for (key, budgets) in [("budgets", &self.budgets[..]), ("replicate_budgets", self.replicate_budgets())] {
            if budgets.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
                return Err(Error::config(key, "budgets must be positive"));
            }
        }
        if !self.phi.is_finite() {
            return Err(Error::config("phi", "must be finite"));
        }
        if self.replicates < 2 {
            return Err(Error::config("replicates", "at least 2 replicates required"));
        }
        Ok(())
    }

    /// Resolved solver settings of model `index`.
    pub fn model_hemo(&self, index: usize) -> Result<HemoConfig> {
        let spec = &self.models[index];
        let mut table = toml::Table::try_from(&self.hemo)
            .map_err(|e| Error::config("hemo", e.to_string()))?;
        if spec.kind == ModelKind::SurrogateHf {
            // CFL-safe refinement of the default grid.
            table.insert("nodes_1d".into(), toml::Value::Integer(17));
            table.insert("dt_1d".into(), toml::Value::Float(self.hemo.dt_1d / 4.0));
        }
        if let Some(over) = &spec.hemo {
            for (k, v) in over {
                table.insert(k.clone(), v.clone());
            }
        }
        let hemo: HemoConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(format!("models[{index}].hemo"), e.message().to_string()))?;
        hemo.validate()
            .map_err(|e| Error::config(format!("models[{index}].hemo"), e.to_string()))?;
        Ok(hemo)
    }

    pub fn qoi_names(&self) -> Vec<&str> {
        self.qois.iter().map(String::as_str).collect()
    }

    pub fn costs(&self) -> Vec<f64> {
        self.models.iter().map(|m| m.cost).collect()
    }
}

/// Output names of a model kind, in evaluation order.
pub fn outputs_of(kind: ModelKind) -> &'static [&'static str] {
    if kind.is_hemodynamic() {
        &HEMO_OUTPUTS
    } else {
        &["y"]
    }
}

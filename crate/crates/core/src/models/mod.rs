//! Forward models: the 1D pulse-wave and 0D RC-chain carotid solvers, both
//! closed by a three-element Windkessel, plus closed-form test functions.

pub mod analytic;
pub mod genalpha;
pub mod oned;
pub mod waveform;
pub mod windkessel;
pub mod zerod;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use analytic::AnalyticModel;
pub use oned::{simulate_1d, tube_law};
pub use waveform::InflowWaveform;
pub use windkessel::wk3_outlet_step;
pub use zerod::{rc_parameters, simulate_0d, RcParameters};

/// Pascals per millimetre of mercury.
pub const MMHG: f64 = 133.322;

/// Table means of the uncertain carotid inputs `(r, E, h)` in SI units.
pub const CAROTID_MEAN_INPUTS: [f64; 3] = [3.289e-3, 440.0e3, 0.785e-3];

fn default_p_dia() -> f64 {
    78.6 * MMHG
}

/// Deterministic parameters shared by every fidelity (SI units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HemoConfig {
    /// Vessel length [m].
    pub length: f64,
    /// Blood density [kg/m³].
    pub density: f64,
    /// Dynamic viscosity [Pa·s].
    pub viscosity: f64,
    pub poisson: f64,
    /// Proximal Windkessel resistance [Pa·s/m³].
    pub r_proximal: f64,
    /// Windkessel compliance [m³/Pa].
    pub compliance: f64,
    /// Distal Windkessel resistance [Pa·s/m³].
    pub r_distal: f64,
    /// Reference (diastolic) pressure of the tube law and the 0D radius map [Pa].
    #[serde(default = "default_p_dia")]
    pub p_dia: f64,
    /// Pressure downstream of the distal resistance [Pa].
    pub p_venous: f64,
    /// Velocity-profile polynomial order (2 = Poiseuille).
    pub zeta: f64,
    pub cycles_1d: usize,
    pub cycles_0d: usize,
    pub dt_1d: f64,
    pub dt_0d: f64,
    pub nodes_1d: usize,
    /// Spectral radius at infinite frequency for the 0D generalized-α scheme.
    pub rho_inf: f64,
    /// Relative residual tolerance of the 0D Newton iteration.
    pub newton_tol: f64,
}

impl Default for HemoConfig {
    fn default() -> Self {
        Self {
            length: 0.126,
            density: 1050.0,
            viscosity: 0.001,
            poisson: 0.49,
            r_proximal: 2.4875e8,
            compliance: 1.3546e-10,
            r_distal: 1.8697e9,
            p_dia: default_p_dia(),
            p_venous: 0.0,
            zeta: 2.0,
            cycles_1d: 5,
            cycles_0d: 10,
            dt_1d: 0.0025,
            dt_0d: 0.001,
            nodes_1d: 5,
            rho_inf: 0.5,
            newton_tol: 1e-10,
        }
    }
}

impl HemoConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hemo.length", self.length),
            ("hemo.density", self.density),
            ("hemo.viscosity", self.viscosity),
            ("hemo.r_proximal", self.r_proximal),
            ("hemo.compliance", self.compliance),
            ("hemo.r_distal", self.r_distal),
            ("hemo.zeta", self.zeta),
            ("hemo.dt_1d", self.dt_1d),
            ("hemo.dt_0d", self.dt_0d),
            ("hemo.newton_tol", self.newton_tol),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(key, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(0.0..0.5).contains(&self.poisson) {
            return Err(Error::config("hemo.poisson", "must lie in [0, 0.5)"));
        }
        if self.nodes_1d < 3 {
            return Err(Error::config("hemo.nodes_1d", "at least 3 nodes required"));
        }
        if self.cycles_1d == 0 || self.cycles_0d == 0 {
            return Err(Error::config("hemo.cycles_*", "at least one cycle required"));
        }
        if !(0.0..=1.0).contains(&self.rho_inf) {
            return Err(Error::config("hemo.rho_inf", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Time histories at the observation station (vessel mid-span).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StationTrace {
    pub t: Vec<f64>,
    pub pressure: Vec<f64>,
    pub flow: Vec<f64>,
    pub radius: Vec<f64>,
}

impl StationTrace {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            t: Vec::with_capacity(n),
            pressure: Vec::with_capacity(n),
            flow: Vec::with_capacity(n),
            radius: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, t: f64, p: f64, q: f64, r: f64) {
        self.t.push(t);
        self.pressure.push(p);
        self.flow.push(q);
        self.radius.push(r);
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Systolic pressure, pulse pressure and maximal radius change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QoiVector {
    pub p_sys: f64,
    pub pp: f64,
    pub dr_max: f64,
}

impl QoiVector {
    pub fn to_array(self) -> [f64; 3] {
        [self.p_sys, self.pp, self.dr_max]
    }
}

/// Names of the hemodynamic outputs, in `QoiVector::to_array` order.
pub const HEMO_OUTPUTS: [&str; 3] = ["psys", "pp", "drmax"];

pub fn extract_qoi(trace: &StationTrace) -> Result<QoiVector> {
    if trace.is_empty() {
        return Err(Error::domain("cannot extract QoIs from an empty trace"));
    }
    let (pmin, pmax) = min_max(&trace.pressure);
    let (rmin, rmax) = min_max(&trace.radius);
    Ok(QoiVector {
        p_sys: pmax,
        pp: pmax - pmin,
        dr_max: rmax - rmin,
    })
}

pub(crate) fn min_max(xs: &[f64]) -> (f64, f64) {
    xs.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

/// Unpacks `(r, E, h)` and checks positivity.
pub(crate) fn wall_inputs(z: &[f64]) -> Result<(f64, f64, f64)> {
    match *z {
        [r, e, h] if r > 0.0 && e > 0.0 && h > 0.0 => Ok((r, e, h)),
        [_, _, _] => Err(Error::domain("radius, modulus and thickness must be positive")),
        _ => Err(Error::domain(format!(
            "hemodynamic models take (r, E, h), got {} inputs",
            z.len()
        ))),
    }
}

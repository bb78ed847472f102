//! Two-unit RC chain terminated by a three-element Windkessel.
//!
//! ```text
//! Q_in → R/2 → (P1, C/2) → R/2 → (P2, C/2) → Rp → (Pc, Cwk) → Rd → P_venous
//! ```
//! The observation station is node `P1`, between the two units.

use nalgebra::{Matrix3, Vector3};

use super::genalpha::{GenAlpha, GenAlphaParams};
use super::{wall_inputs, HemoConfig, InflowWaveform, StationTrace};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RcParameters {
    /// Poiseuille resistance [Pa·s/m³].
    pub resistance: f64,
    /// Thin-wall compliance [m³/Pa].
    pub compliance: f64,
}

/// `R = 8ηL/(πr⁴)`, `C = 3Lπr³/(2Eh)` for a segment of length `segment_length`.
pub fn rc_parameters(
    r: f64,
    e: f64,
    h: f64,
    cfg: &HemoConfig,
    segment_length: f64,
) -> Result<RcParameters> {
    if !(r > 0.0 && e > 0.0 && h > 0.0 && segment_length > 0.0) {
        return Err(Error::domain("rc_parameters needs positive r, E, h and length"));
    }
    let pi = std::f64::consts::PI;
    Ok(RcParameters {
        resistance: 8.0 * cfg.viscosity * segment_length / (pi * r.powi(4)),
        compliance: 3.0 * segment_length * pi * r.powi(3) / (2.0 * e * h),
    })
}

/// Full node history of a 0D run (final cycle only).
#[derive(Debug, Clone, Default)]
pub(crate) struct ZeroDHistory {
    pub t: Vec<f64>,
    pub q_in: Vec<f64>,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    pub pc: Vec<f64>,
    pub q_mid: Vec<f64>,
    pub q_out: Vec<f64>,
    #[cfg_attr(not(test), allow(dead_code))]
    pub unit: RcParameters,
}

pub(crate) fn run_0d(z: &[f64], cfg: &HemoConfig, waveform: &InflowWaveform) -> Result<ZeroDHistory> {
    let (r, e, h) = wall_inputs(z)?;
    let full = rc_parameters(r, e, h, cfg, cfg.length)?;
    let unit = RcParameters {
        resistance: 0.5 * full.resistance,
        compliance: 0.5 * full.compliance,
    };
    let g = 1.0 / unit.resistance;
    let gp = 1.0 / cfg.r_proximal;
    let gd = 1.0 / cfg.r_distal;
    let mass = Matrix3::from_diagonal(&Vector3::new(
        unit.compliance,
        unit.compliance,
        cfg.compliance,
    ));
    #[rustfmt::skip]
    let stiffness = Matrix3::new(
        g,   -g,       0.0,
        -g,  g + gp,   -gp,
        0.0, -gp,      gp + gd,
    );
    let venous = cfg.p_venous * gd;
    let forcing = |q: f64| Vector3::new(q, 0.0, venous);

    let period = waveform.period();
    let steps_per_cycle = (period / cfg.dt_0d).round() as usize;
    if steps_per_cycle == 0 || ((steps_per_cycle as f64) * cfg.dt_0d - period).abs() > 1e-9 * period {
        return Err(Error::domain("dt_0d must divide the waveform period"));
    }
    let total = steps_per_cycle * cfg.cycles_0d;
    let record_from = total - steps_per_cycle;

    let y0 = Vector3::repeat(cfg.p_dia);
    let mut ga = GenAlpha::new(
        mass,
        stiffness,
        GenAlphaParams::from_rho_inf(cfg.rho_inf),
        cfg.dt_0d,
        cfg.newton_tol,
        y0,
        forcing(waveform.eval(0.0)),
        0.0,
    )?;

    let mut hist = ZeroDHistory {
        unit,
        ..Default::default()
    };
    let record = |ga: &GenAlpha<3>, n: usize, hist: &mut ZeroDHistory| {
        let y = ga.y;
        hist.t.push(n as f64 * cfg.dt_0d);
        hist.q_in.push(waveform.eval(ga.t));
        hist.p1.push(y[0]);
        hist.p2.push(y[1]);
        hist.pc.push(y[2]);
        hist.q_mid.push((y[0] - y[1]) * g);
        hist.q_out.push((y[1] - y[2]) * gp);
    };
    if record_from == 0 {
        record(&ga, 0, &mut hist);
    }
    for n in 1..=total {
        let f = forcing(waveform.eval(ga.forcing_time()));
        ga.step(&f)?;
        if n >= record_from {
            record(&ga, n, &mut hist);
        }
    }
    Ok(hist)
}

/// Integrates the RC chain for `cycles_0d` cycles and returns the final
/// cycle at the half-length node. The radius follows the linearized wall
/// law `r + 3r²(P − P_dia)/(4Eh)`.
pub fn simulate_0d(z: &[f64], cfg: &HemoConfig, waveform: &InflowWaveform) -> Result<StationTrace> {
    let (r, e, h) = wall_inputs(z)?;
    let hist = run_0d(z, cfg, waveform)?;
    let k = 3.0 * r * r / (4.0 * e * h);
    let mut trace = StationTrace::with_capacity(hist.t.len());
    for i in 0..hist.t.len() {
        let p = hist.p1[i];
        trace.push(hist.t[i], p, hist.q_mid[i], r + k * (p - cfg.p_dia));
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{extract_qoi, CAROTID_MEAN_INPUTS, MMHG};

    #[test]
    fn mean_input_resistance_and_compliance() {
        let cfg = HemoConfig::default();
        let [r, e, h] = CAROTID_MEAN_INPUTS;
        let rc = rc_parameters(r, e, h, &cfg, cfg.length).unwrap();
        // Hand evaluation of the closed forms.
        assert!((rc.resistance / 2.74e6 - 1.0).abs() < 0.005, "{}", rc.resistance);
        assert!((rc.compliance / 6.11e-11 - 1.0).abs() < 0.005, "{}", rc.compliance);
        let double = rc_parameters(r, e, h, &cfg, 2.0 * cfg.length).unwrap();
        assert!((double.resistance / rc.resistance - 2.0).abs() < 1e-14);
        assert!((double.compliance / rc.compliance - 2.0).abs() < 1e-14);
        assert!(rc_parameters(0.0, e, h, &cfg, 1.0).is_err());
        assert!(rc_parameters(r, e, h, &cfg, -1.0).is_err());
    }

    #[test]
    fn equilibrium_without_flow() {
        let cfg = HemoConfig {
            p_venous: HemoConfig::default().p_dia,
            cycles_0d: 2,
            ..HemoConfig::default()
        };
        let w = InflowWaveform::constant(0.0, 1.0);
        let tr = simulate_0d(&CAROTID_MEAN_INPUTS, &cfg, &w).unwrap();
        assert!(tr.pressure.iter().all(|&p| p == cfg.p_dia));
        let q = extract_qoi(&tr).unwrap();
        assert_eq!(q.dr_max, 0.0);
        assert_eq!(q.pp, 0.0);
    }

    #[test]
    fn cycle_volume_balance() {
        let cfg = HemoConfig::default();
        let w = InflowWaveform::carotid();
        let hist = run_0d(&CAROTID_MEAN_INPUTS, &cfg, &w).unwrap();
        let trap = |ys: &[f64]| -> f64 {
            ys.windows(2).map(|p| 0.5 * (p[0] + p[1]) * cfg.dt_0d).sum()
        };
        let v_in = trap(&hist.q_in);
        let v_out = trap(&hist.q_out);
        let n = hist.p1.len() - 1;
        let stored = hist.unit.compliance * (hist.p1[n] - hist.p1[0] + hist.p2[n] - hist.p2[0]);
        let stroke = v_in;
        let imbalance = (v_in - v_out - stored).abs();
        assert!(imbalance < 1e-3 * stroke, "imbalance {imbalance} vs stroke {stroke}");
    }

    #[test]
    fn pulse_pressure_falls_with_radius() {
        let cfg = HemoConfig::default();
        let w = InflowWaveform::carotid();
        let [_, e, h] = CAROTID_MEAN_INPUTS;
        let pps: Vec<f64> = (0..5)
            .map(|i| {
                let r = 2.96e-3 + i as f64 * (3.62e-3 - 2.96e-3) / 4.0;
                extract_qoi(&simulate_0d(&[r, e, h], &cfg, &w).unwrap()).unwrap().pp
            })
            .collect();
        assert!(pps.windows(2).all(|p| p[1] < p[0]), "{pps:?}");
        assert!(pps[0] / MMHG > 20.0);
    }

    #[test]
    fn deterministic() {
        let cfg = HemoConfig::default();
        let w = InflowWaveform::carotid();
        let z = [3.1e-3, 420e3, 0.8e-3];
        let a = extract_qoi(&simulate_0d(&z, &cfg, &w).unwrap()).unwrap();
        let b = extract_qoi(&simulate_0d(&z, &cfg, &w).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}

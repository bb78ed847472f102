//! One-dimensional pulse-wave model of a single elastic tube.
//!
//! Unknowns are the cross-sectional area `A` and mean axial velocity `u`,
//! advanced in the conservative form
//! `∂t(A, u) + ∂z(Au, u²/2 + P/ρ) = (0, −2(ζ+2)πη u/(ρA))`
//! with a two-step MacCormack scheme. Both ends are closed through the
//! Riemann invariants `W = u ± 4c` of the outgoing characteristic.

use super::windkessel::Windkessel;
use super::{wall_inputs, HemoConfig, InflowWaveform, StationTrace};
use crate::error::{Error, Result};

const SOLVER: &str = "1D MacCormack";
const MAX_NEWTON: usize = 50;

/// Pressure of the thin-wall tube law
/// `P = P_dia + (β/A_dia)(√A − √A_dia)`, `β = √π E h/(1 − ν²)`.
pub fn tube_law(a: f64, a_dia: f64, p_dia: f64, e: f64, h: f64, nu: f64) -> f64 {
    let beta = std::f64::consts::PI.sqrt() * e * h / (1.0 - nu * nu);
    p_dia + beta / a_dia * (a.sqrt() - a_dia.sqrt())
}

/// Wall and fluid constants of one tube, precomputed for the hot loop.
#[derive(Debug, Clone, Copy)]
struct Tube {
    a_dia: f64,
    sqrt_a_dia: f64,
    p_dia: f64,
    /// `β/A_dia`.
    stiffness: f64,
    inv_rho: f64,
    /// Wave speed `c = k A^{1/4}`.
    k: f64,
    /// Friction coefficient: `S_u = −friction · u / A`.
    friction: f64,
}

impl Tube {
    fn new(r: f64, e: f64, h: f64, cfg: &HemoConfig) -> Self {
        let pi = std::f64::consts::PI;
        let a_dia = pi * r * r;
        let beta = pi.sqrt() * e * h / (1.0 - cfg.poisson * cfg.poisson);
        Self {
            a_dia,
            sqrt_a_dia: a_dia.sqrt(),
            p_dia: cfg.p_dia,
            stiffness: beta / a_dia,
            inv_rho: 1.0 / cfg.density,
            k: (beta / (2.0 * cfg.density * a_dia)).sqrt(),
            friction: 2.0 * (cfg.zeta + 2.0) * pi * cfg.viscosity / cfg.density,
        }
    }

    #[inline]
    fn pressure(&self, a: f64) -> f64 {
        self.p_dia + self.stiffness * (a.sqrt() - self.sqrt_a_dia)
    }

    #[inline]
    fn wave_speed(&self, a: f64) -> f64 {
        self.k * a.sqrt().sqrt()
    }

    #[inline]
    fn source(&self, a: f64, u: f64) -> f64 {
        -self.friction * u / a
    }

    #[inline]
    fn flux(&self, a: f64, u: f64) -> (f64, f64) {
        (a * u, 0.5 * u * u + self.pressure(a) * self.inv_rho)
    }
}

fn failure(step: usize, detail: String) -> Error {
    Error::SolverFailure {
        solver: SOLVER,
        step,
        detail,
    }
}

/// Inlet area for prescribed flow `q` given the incoming backward invariant
/// `w2 = u − 4c`: solves `A (w2 + 4c(A)) = q`.
fn inlet_area(tube: &Tube, w2: f64, q: f64, a0: f64, step: usize) -> Result<f64> {
    let mut a = a0;
    for _ in 0..MAX_NEWTON {
        let c = tube.wave_speed(a);
        let g = a * (w2 + 4.0 * c) - q;
        if g == 0.0 {
            return Ok(a);
        }
        let dg = w2 + 5.0 * c;
        let next = a - g / dg;
        if !(next > 0.0) {
            return Err(failure(step, format!("inlet Newton left the physical range (A = {next:e})")));
        }
        if (next - a).abs() <= 1e-14 * a {
            return Ok(next);
        }
        a = next;
    }
    Err(failure(step, "inlet Newton did not converge".into()))
}

/// Outlet area coupling the forward invariant `w1 = u + 4c` to the
/// Windkessel: `Rp Q + Pc + δPc(Q) − P(A) = 0` with `Q = A (w1 − 4c(A))`.
fn outlet_area(
    tube: &Tube,
    wk: &Windkessel,
    w1: f64,
    q_old: f64,
    dt: f64,
    a0: f64,
    step: usize,
) -> Result<f64> {
    let slope = wk.increment_slope(dt);
    let mut a = a0;
    for _ in 0..MAX_NEWTON {
        let c = tube.wave_speed(a);
        let q = a * (w1 - 4.0 * c);
        let g = wk.rp * q + wk.pc + wk.increment(q_old, q, dt) - tube.pressure(a);
        if g == 0.0 {
            return Ok(a);
        }
        let dq = w1 - 5.0 * c;
        let dg = (wk.rp + slope) * dq - 0.5 * tube.stiffness / a.sqrt();
        let next = a - g / dg;
        if !(next > 0.0) {
            return Err(failure(step, format!("outlet Newton left the physical range (A = {next:e})")));
        }
        if (next - a).abs() <= 1e-14 * a {
            return Ok(next);
        }
        a = next;
    }
    Err(failure(step, "outlet Newton did not converge".into()))
}

/// Interpolates the invariant `u + sign·4c` at distance `x` from node `i0`
/// toward node `i1` (both on the old time level).
#[inline]
fn invariant_at(tube: &Tube, a: &[f64], u: &[f64], i0: usize, i1: usize, frac: f64, sign: f64) -> (f64, f64, f64) {
    let af = a[i0] + frac * (a[i1] - a[i0]);
    let uf = u[i0] + frac * (u[i1] - u[i0]);
    (uf + sign * 4.0 * tube.wave_speed(af), af, uf)
}

/// Runs the 1D model for `cycles_1d` cycles and returns the final cycle at
/// the middle node (the mean of the two central nodes for an even count).
pub fn simulate_1d(z: &[f64], cfg: &HemoConfig, waveform: &InflowWaveform) -> Result<StationTrace> {
    let (r, e, h) = wall_inputs(z)?;
    let tube = Tube::new(r, e, h, cfg);
    let n = cfg.nodes_1d;
    if n < 3 {
        return Err(Error::config("hemo.nodes_1d", "at least 3 nodes required"));
    }
    let dt = cfg.dt_1d;
    let dx = cfg.length / (n - 1) as f64;
    let lambda = dt / dx;
    let period = waveform.period();
    let steps_per_cycle = (period / dt).round() as usize;
    if steps_per_cycle == 0 || ((steps_per_cycle as f64) * dt - period).abs() > 1e-9 * period {
        return Err(Error::domain("dt_1d must divide the waveform period"));
    }
    let total = steps_per_cycle * cfg.cycles_1d;
    let record_from = total - steps_per_cycle;

    let mut a = vec![tube.a_dia; n];
    let mut u = vec![0.0; n];
    let mut a_pred = vec![0.0; n];
    let mut u_pred = vec![0.0; n];
    let mut fa = vec![0.0; n];
    let mut fu = vec![0.0; n];
    let mut wk = Windkessel::new(cfg, cfg.p_dia);
    let mut q_out = 0.0;

    let (mid_lo, mid_hi) = if n % 2 == 1 { (n / 2, n / 2) } else { (n / 2 - 1, n / 2) };
    let mut trace = StationTrace::with_capacity(steps_per_cycle + 1);
    let record = |step: usize, a: &[f64], u: &[f64], trace: &mut StationTrace| {
        let am = 0.5 * (a[mid_lo] + a[mid_hi]);
        let qm = 0.5 * (a[mid_lo] * u[mid_lo] + a[mid_hi] * u[mid_hi]);
        let pm = 0.5 * (tube.pressure(a[mid_lo]) + tube.pressure(a[mid_hi]));
        trace.push(step as f64 * dt, pm, qm, (am / std::f64::consts::PI).sqrt());
    };
    if record_from == 0 {
        record(0, &a, &u, &mut trace);
    }

    for step in 1..=total {
        let mut max_speed = 0.0f64;
        for i in 0..n {
            max_speed = max_speed.max(u[i].abs() + tube.wave_speed(a[i]));
        }
        let courant = max_speed * lambda;
        if courant > 1.0 {
            return Err(failure(step, format!("CFL number {courant:.3} exceeds 1")));
        }

        // Predictor: forward differences.
        for i in 0..n {
            (fa[i], fu[i]) = tube.flux(a[i], u[i]);
        }
        for i in 0..n - 1 {
            a_pred[i] = a[i] - lambda * (fa[i + 1] - fa[i]);
            u_pred[i] = u[i] - lambda * (fu[i + 1] - fu[i]) + dt * tube.source(a[i], u[i]);
        }
        for i in 0..n - 1 {
            if !(a_pred[i] > 0.0) {
                return Err(failure(step, format!("non-positive area at node {i} (predictor)")));
            }
            (fa[i], fu[i]) = tube.flux(a_pred[i], u_pred[i]);
        }

        // Boundary characteristics from the old level.
        let c0 = tube.wave_speed(a[0]);
        let foot_in = ((c0 - u[0]) * lambda).clamp(0.0, 1.0);
        let (w2, af, uf) = invariant_at(&tube, &a, &u, 0, 1, foot_in, -1.0);
        let w2 = w2 + dt * tube.source(af, uf);
        let cn = tube.wave_speed(a[n - 1]);
        let foot_out = ((u[n - 1] + cn) * lambda).clamp(0.0, 1.0);
        let (w1, af, uf) = invariant_at(&tube, &a, &u, n - 1, n - 2, foot_out, 1.0);
        let w1 = w1 + dt * tube.source(af, uf);

        // Corrector: backward differences on interior nodes.
        let (a_in_old, a_out_old) = (a[0], a[n - 1]);
        for i in 1..n - 1 {
            a[i] = 0.5 * (a[i] + a_pred[i] - lambda * (fa[i] - fa[i - 1]));
            u[i] = 0.5
                * (u[i] + u_pred[i] - lambda * (fu[i] - fu[i - 1])
                    + dt * tube.source(a_pred[i], u_pred[i]));
            if !(a[i] > 0.0) || !u[i].is_finite() {
                return Err(failure(step, format!("non-positive area at node {i}")));
            }
        }

        let t_new = step as f64 * dt;
        let q_in = waveform.eval(t_new);
        a[0] = inlet_area(&tube, w2, q_in, a_in_old, step)?;
        u[0] = w2 + 4.0 * tube.wave_speed(a[0]);

        let a_end = outlet_area(&tube, &wk, w1, q_out, dt, a_out_old, step)?;
        let u_end = w1 - 4.0 * tube.wave_speed(a_end);
        let q_end = a_end * u_end;
        wk.pc += wk.increment(q_out, q_end, dt);
        q_out = q_end;
        a[n - 1] = a_end;
        u[n - 1] = u_end;

        if step >= record_from {
            record(step, &a, &u, &mut trace);
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{extract_qoi, CAROTID_MEAN_INPUTS, MMHG};

    #[test]
    fn tube_law_reference_and_monotonicity() {
        let [r, e, h] = CAROTID_MEAN_INPUTS;
        let a_dia = std::f64::consts::PI * r * r;
        let p_dia = 1.0e4;
        assert_eq!(tube_law(a_dia, a_dia, p_dia, e, h, 0.49), p_dia);
        let ps: Vec<f64> = (0..20)
            .map(|i| tube_law(a_dia * (0.8 + 0.02 * i as f64), a_dia, p_dia, e, h, 0.49))
            .collect();
        assert!(ps.windows(2).all(|w| w[1] > w[0]));
        // Hand evaluation at 5% distension.
        let beta = std::f64::consts::PI.sqrt() * e * h / (1.0 - 0.49f64.powi(2));
        let expected = beta / a_dia * a_dia.sqrt() * (1.05f64.sqrt() - 1.0);
        let got = tube_law(1.05 * a_dia, a_dia, p_dia, e, h, 0.49) - p_dia;
        assert!((got / expected - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tube_law_compliance_matches_thin_wall_formula() {
        let [r, e, h] = CAROTID_MEAN_INPUTS;
        let nu = 0.49;
        let a_dia = std::f64::consts::PI * r * r;
        let da = 1e-6 * a_dia;
        let dp = tube_law(a_dia + da, a_dia, 0.0, e, h, nu) - tube_law(a_dia - da, a_dia, 0.0, e, h, nu);
        let compliance_per_length = 2.0 * da / dp;
        let thin_wall = 3.0 * std::f64::consts::PI * r.powi(3) / (2.0 * e * h);
        // The two wall models differ by the factor 4(1 − ν²)/3.
        let ratio = compliance_per_length / thin_wall;
        assert!((ratio - 1.0).abs() < 0.02, "ratio {ratio}");
        assert!((ratio - 4.0 * (1.0 - nu * nu) / 3.0).abs() < 1e-6);
    }

    #[test]
    fn equilibrium_is_preserved_exactly() {
        let base = HemoConfig::default();
        let cfg = HemoConfig {
            p_venous: base.p_dia,
            cycles_1d: 2,
            ..base
        };
        let w = InflowWaveform::constant(0.0, 1.0);
        let tr = simulate_1d(&CAROTID_MEAN_INPUTS, &cfg, &w).unwrap();
        assert!(tr.pressure.iter().all(|&p| p == cfg.p_dia));
        assert!(tr.flow.iter().all(|&q| q == 0.0));
        let q = extract_qoi(&tr).unwrap();
        assert_eq!((q.pp, q.dr_max), (0.0, 0.0));
    }

    #[test]
    fn cfl_violation_is_reported() {
        let cfg = HemoConfig {
            dt_1d: 0.01,
            ..HemoConfig::default()
        };
        match simulate_1d(&CAROTID_MEAN_INPUTS, &cfg, &InflowWaveform::carotid()) {
            Err(Error::SolverFailure { step, detail, .. }) => {
                assert_eq!(step, 1);
                assert!(detail.contains("CFL"));
            }
            other => panic!("expected CFL failure, got {other:?}"),
        }
    }

    #[test]
    fn halving_dt_changes_systolic_pressure_little() {
        let cfg = HemoConfig::default();
        let fine = HemoConfig {
            dt_1d: 0.5 * cfg.dt_1d,
            ..cfg.clone()
        };
        let w = InflowWaveform::carotid();
        let coarse = extract_qoi(&simulate_1d(&CAROTID_MEAN_INPUTS, &cfg, &w).unwrap()).unwrap();
        let finer = extract_qoi(&simulate_1d(&CAROTID_MEAN_INPUTS, &fine, &w).unwrap()).unwrap();
        let rel = (coarse.p_sys / finer.p_sys - 1.0).abs();
        assert!(rel < 0.005, "relative change {rel}");
    }

    #[test]
    fn mean_inputs_are_physiological() {
        let cfg = HemoConfig::default();
        let tr = simulate_1d(&CAROTID_MEAN_INPUTS, &cfg, &InflowWaveform::carotid()).unwrap();
        let q = extract_qoi(&tr).unwrap();
        assert!(q.p_sys / MMHG > 100.0 && q.p_sys / MMHG < 160.0, "{q:?}");
        assert!(q.dr_max > 0.05e-3 && q.dr_max < 0.4e-3, "{q:?}");
    }

    #[test]
    fn pulse_pressure_falls_with_radius() {
        let cfg = HemoConfig::default();
        let w = InflowWaveform::carotid();
        let [_, e, h] = CAROTID_MEAN_INPUTS;
        let pps: Vec<f64> = (0..5)
            .map(|i| {
                let r = 2.96e-3 + i as f64 * (3.62e-3 - 2.96e-3) / 4.0;
                extract_qoi(&simulate_1d(&[r, e, h], &cfg, &w).unwrap()).unwrap().pp
            })
            .collect();
        assert!(pps.windows(2).all(|p| p[1] < p[0]), "{pps:?}");
    }
}

//! Three-element Windkessel outlet.

use super::HemoConfig;

/// Pressure rate of a three-element Windkessel driven by flow `q`:
/// `dP/dt = Q (1/C + Rp/(C Rd)) + Rp dQ/dt − (P − P_venous)/(Rd C)`.
pub fn wk3_outlet_step(p: f64, q: f64, dqdt: f64, cfg: &HemoConfig) -> f64 {
    let (rp, c, rd) = (cfg.r_proximal, cfg.compliance, cfg.r_distal);
    q * (1.0 / c + rp / (c * rd)) + rp * dqdt - (p - cfg.p_venous) / (rd * c)
}

/// Capacitor-pressure form of the same circuit, integrated with the
/// trapezoidal rule. `P_out = P_c + Rp·Q`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Windkessel {
    pub rp: f64,
    pub rd: f64,
    pub c: f64,
    pub p_venous: f64,
    /// Capacitor pressure.
    pub pc: f64,
}

impl Windkessel {
    pub fn new(cfg: &HemoConfig, pc: f64) -> Self {
        Self {
            rp: cfg.r_proximal,
            rd: cfg.r_distal,
            c: cfg.compliance,
            p_venous: cfg.p_venous,
            pc,
        }
    }

    /// Capacitor-pressure increment over `dt` for flows `q_old → q_new`.
    #[inline]
    pub fn increment(&self, q_old: f64, q_new: f64, dt: f64) -> f64 {
        (0.5 * (q_old + q_new) - (self.pc - self.p_venous) / self.rd)
            / (self.c / dt + 0.5 / self.rd)
    }

    /// d(increment)/d(q_new).
    #[inline]
    pub fn increment_slope(&self, dt: f64) -> f64 {
        0.5 / (self.c / dt + 0.5 / self.rd)
    }
}

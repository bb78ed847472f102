//! Generalized-α time integration of linear first-order systems
//! `M ẏ + K y = F(t)`.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenAlphaParams {
    pub alpha_m: f64,
    pub alpha_f: f64,
    pub gamma: f64,
}

impl GenAlphaParams {
    /// Parameters for a given high-frequency spectral radius `rho_inf ∈ [0, 1]`.
    pub fn from_rho_inf(rho_inf: f64) -> Self {
        let alpha_m = 0.5 * (3.0 - rho_inf) / (1.0 + rho_inf);
        let alpha_f = 1.0 / (1.0 + rho_inf);
        Self {
            alpha_m,
            alpha_f,
            gamma: 0.5 + alpha_m - alpha_f,
        }
    }
}

const MAX_NEWTON: usize = 20;

/// Integrator with the Newton iteration matrix factored once for a fixed `dt`.
pub struct GenAlpha<const N: usize> {
    mass: SMatrix<f64, N, N>,
    stiffness: SMatrix<f64, N, N>,
    params: GenAlphaParams,
    dt: f64,
    tol: f64,
    iteration_inverse: SMatrix<f64, N, N>,
    pub y: SVector<f64, N>,
    pub ydot: SVector<f64, N>,
    pub t: f64,
    step: usize,
}

impl<const N: usize> GenAlpha<N> {
    /// Starts from `y0` with a consistent initial rate `M ẏ0 = F(t0) − K y0`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        mass: SMatrix<f64, N, N>,
        stiffness: SMatrix<f64, N, N>,
        params: GenAlphaParams,
        dt: f64,
        tol: f64,
        y0: SVector<f64, N>,
        f0: SVector<f64, N>,
        t0: f64,
    ) -> Result<Self> {
        let jac = mass * params.alpha_m + stiffness * (params.alpha_f * params.gamma * dt);
        let iteration_inverse = jac
            .try_inverse()
            .ok_or_else(|| Error::domain("singular generalized-α iteration matrix"))?;
        let mass_inv = mass
            .try_inverse()
            .ok_or_else(|| Error::domain("singular mass matrix"))?;
        let ydot = mass_inv * (f0 - stiffness * y0);
        Ok(Self {
            mass,
            stiffness,
            params,
            dt,
            tol,
            iteration_inverse,
            y: y0,
            ydot,
            t: t0,
            step: 0,
        })
    }

    /// Time at which the forcing of the next step is evaluated.
    #[inline]
    pub fn forcing_time(&self) -> f64 {
        self.t + self.params.alpha_f * self.dt
    }

    /// Advances one step with `forcing = F(t_n + α_f dt)`.
    pub fn step(&mut self, forcing: &SVector<f64, N>) -> Result<()> {
        let GenAlphaParams {
            alpha_m,
            alpha_f,
            gamma,
        } = self.params;
        let dt = self.dt;
        let mut ydot_new = self.ydot * ((gamma - 1.0) / gamma);
        let mut y_new = self.y + self.ydot * dt + (ydot_new - self.ydot) * (gamma * dt);
        let mut converged = false;
        for _ in 0..MAX_NEWTON {
            let ydot_am = self.ydot + (ydot_new - self.ydot) * alpha_m;
            let y_af = self.y + (y_new - self.y) * alpha_f;
            let inertial = self.mass * ydot_am;
            let elastic = self.stiffness * y_af;
            let residual = inertial + elastic - forcing;
            let scale = inertial.amax() + elastic.amax() + forcing.amax();
            if residual.amax() <= self.tol * scale {
                converged = true;
                break;
            }
            let delta = -(self.iteration_inverse * residual);
            ydot_new += delta;
            y_new += delta * (gamma * dt);
        }
        self.step += 1;
        if !converged || y_new.iter().chain(ydot_new.iter()).any(|v| !v.is_finite()) {
            return Err(Error::SolverFailure {
                solver: "0D generalized-alpha",
                step: self.step,
                detail: if converged {
                    "non-finite state".into()
                } else {
                    format!("Newton did not converge in {MAX_NEWTON} iterations")
                },
            });
        }
        self.y = y_new;
        self.ydot = ydot_new;
        self.t += dt;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix1, Vector1};

    fn decay_error(dt: f64, rho_inf: f64) -> f64 {
        // ẏ + y = 0, y(0) = 1 on [0, 1].
        let mut ga = GenAlpha::new(
            Matrix1::new(1.0),
            Matrix1::new(1.0),
            GenAlphaParams::from_rho_inf(rho_inf),
            dt,
            1e-12,
            Vector1::new(1.0),
            Vector1::new(0.0),
            0.0,
        )
        .unwrap();
        let n = (1.0 / dt).round() as usize;
        for _ in 0..n {
            ga.step(&Vector1::new(0.0)).unwrap();
        }
        (ga.y[0] - (-1.0f64).exp()).abs()
    }

    #[test]
    fn second_order_convergence() {
        let e1 = decay_error(0.02, 0.5);
        let e2 = decay_error(0.01, 0.5);
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.15, "observed order {order}");
    }

    #[test]
    fn parameters_for_rho_half() {
        let p = GenAlphaParams::from_rho_inf(0.5);
        assert!((p.alpha_m - 5.0 / 6.0).abs() < 1e-15);
        assert!((p.alpha_f - 2.0 / 3.0).abs() < 1e-15);
        assert!((p.gamma - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn forced_steady_state() {
        // ẏ + 2y = 4 → y → 2.
        let mut ga = GenAlpha::new(
            Matrix1::new(1.0),
            Matrix1::new(2.0),
            GenAlphaParams::from_rho_inf(0.5),
            0.05,
            1e-12,
            Vector1::new(0.0),
            Vector1::new(4.0),
            0.0,
        )
        .unwrap();
        for _ in 0..400 {
            ga.step(&Vector1::new(4.0)).unwrap();
        }
        assert!((ga.y[0] - 2.0).abs() < 1e-10);
    }
}

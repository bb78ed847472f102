//! Linear-discrepancy perturbation of a low-fidelity model.
//!
//! A perturbed model `y_lf(z) − φ · s(z)ᵀd` lowers the correlation of an
//! overly accurate cheap model so the allocation ordering holds. Here `s` is
//! the input point centred and scaled to `[−1, 1]` and `d` is the
//! least-squares slope of the pilot discrepancy `y_hf − y_lf`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{ParameterSpace, PointSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    /// Fitted but not applied.
    pub intercept: f64,
    pub slope: Vec<f64>,
}

impl Discrepancy {
    /// `s(z)ᵀd` for a physical point `z`.
    pub fn trend(&self, space: &ParameterSpace, z: &[f64]) -> f64 {
        space
            .normalize(z)
            .iter()
            .zip(&self.slope)
            .map(|(s, d)| s * d)
            .sum()
    }

    pub fn apply(&self, space: &ParameterSpace, phi: f64, z: &[f64], y_lf: f64) -> f64 {
        y_lf - phi * self.trend(space, z)
    }
}

/// Ordinary least squares of `y_hf − y_lf` on `[1, s]`.
pub fn fit_discrepancy(
    space: &ParameterSpace,
    points: &PointSet,
    y_hf: &[f64],
    y_lf: &[f64],
) -> Result<Discrepancy> {
    let n = points.len();
    let d = space.dim();
    if points.dim() != d || y_hf.len() != n || y_lf.len() != n {
        return Err(Error::domain("pilot points and outputs are not aligned"));
    }
    if n < d + 1 {
        return Err(Error::LeastSquares(format!(
            "{n} pilot points cannot determine {} coefficients",
            d + 1
        )));
    }
    let mut x = DMatrix::zeros(n, d + 1);
    for (i, z) in points.rows().enumerate() {
        x[(i, 0)] = 1.0;
        for (j, s) in space.normalize(z).into_iter().enumerate() {
            x[(i, j + 1)] = s;
        }
    }
    let rhs = DVector::from_iterator(n, y_hf.iter().zip(y_lf).map(|(h, l)| h - l));
    let svd = x.svd(true, true);
    let sv = &svd.singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > 1e-12 * smax) {
        return Err(Error::LeastSquares(format!(
            "rank-deficient pilot design (singular values {smin:e} / {smax:e})"
        )));
    }
    let coef = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::LeastSquares(e.to_string()))?;
    Ok(Discrepancy {
        intercept: coef[0],
        slope: coef.iter().skip(1).copied().collect(),
    })
}

/// Fits the pilot discrepancy and returns the perturbed production outputs.
#[allow(clippy::too_many_arguments)]
pub fn perturb_lowfid(
    space: &ParameterSpace,
    pilot_points: &PointSet,
    y_hf: &[f64],
    y_lf: &[f64],
    phi: f64,
    prod_points: &PointSet,
    y_lf_prod: &[f64],
) -> Result<Vec<f64>> {
    if prod_points.len() != y_lf_prod.len() {
        return Err(Error::domain("production points and outputs are not aligned"));
    }
    let disc = fit_discrepancy(space, pilot_points, y_hf, y_lf)?;
    Ok(prod_points
        .rows()
        .zip(y_lf_prod)
        .map(|(z, &y)| disc.apply(space, phi, z, y))
        .collect())
}

//! Polynomial chaos regression with an orthonormal Legendre basis.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{Method, SobolEstimate};
use crate::sampling::{ParameterSpace, PointSet};

/// Condition number of the design matrix above which a fit carries a warning.
pub const CONDITION_WARNING: f64 = 1e8;

/// Total-degree multi-index set; term 0 is the constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcBasis {
    pub d: usize,
    pub order: u32,
    pub terms: Vec<Vec<u32>>,
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

impl PcBasis {
    /// All multi-indices with `Σ αᵢ ≤ order`, graded by total degree and
    /// ordered lexicographically (first coordinate largest) within a degree.
    pub fn total_degree(d: usize, order: u32) -> Self {
        let mut terms = Vec::with_capacity(binomial(d + order as usize, d));
        for degree in 0..=order {
            let mut idx = vec![0u32; d];
            push_compositions(&mut idx, 0, degree, &mut terms);
        }
        Self { d, order, terms }
    }

    pub fn count(&self) -> usize {
        self.terms.len()
    }

    /// Minimum regression sample size (twice the coefficient count).
    pub fn min_samples(&self) -> usize {
        2 * self.count()
    }

    /// Largest order whose fit is at least twice overdetermined with `n`
    /// samples, `None` if even order 1 is not.
    pub fn largest_order(d: usize, n: usize) -> Option<u32> {
        (1..=64u32)
            .take_while(|&o| 2 * binomial(d + o as usize, d) <= n)
            .last()
    }
}

fn push_compositions(idx: &mut [u32], pos: usize, remaining: u32, out: &mut Vec<Vec<u32>>) {
    if pos + 1 == idx.len() {
        idx[pos] = remaining;
        out.push(idx.to_vec());
        return;
    }
    for k in (0..=remaining).rev() {
        idx[pos] = k;
        push_compositions(idx, pos + 1, remaining - k, out);
    }
    idx[pos] = 0;
}

/// `√(2n+1) Pₙ(x)` for `n = 0..=order`, orthonormal under `U(−1, 1)`.
fn legendre_table(x: f64, order: u32, out: &mut Vec<f64>) {
    out.clear();
    let (mut p0, mut p1) = (1.0, x);
    out.push(1.0);
    if order >= 1 {
        out.push(3f64.sqrt() * x);
    }
    for n in 1..order as usize {
        let nf = n as f64;
        let p2 = ((2.0 * nf + 1.0) * x * p1 - nf * p0) / (nf + 1.0);
        out.push((2.0 * nf + 3.0).sqrt() * p2);
        (p0, p1) = (p1, p2);
    }
}

/// Product of normalized univariate Legendre polynomials at `z_unit ∈ [−1, 1]^d`.
pub fn legendre_eval(multi_index: &[u32], z_unit: &[f64]) -> f64 {
    let mut buf = Vec::new();
    multi_index
        .iter()
        .zip(z_unit)
        .map(|(&n, &x)| {
            legendre_table(x, n, &mut buf);
            buf[n as usize]
        })
        .product()
}

fn design_row(basis: &PcBasis, s: &[f64], tables: &mut [Vec<f64>], row: &mut [f64]) {
    for (t, &x) in tables.iter_mut().zip(s) {
        legendre_table(x, basis.order, t);
    }
    for (out, alpha) in row.iter_mut().zip(&basis.terms) {
        *out = alpha
            .iter()
            .enumerate()
            .map(|(i, &n)| tables[i][n as usize])
            .product();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcSurrogate {
    pub basis: PcBasis,
    pub coefficients: Vec<f64>,
    pub space: ParameterSpace,
    /// `‖Xc − y‖ / ‖y‖` on the training data.
    pub residual: f64,
    pub condition: f64,
    pub warning: Option<String>,
}

/// Least-squares fit on physical-unit points `z` with outputs `y`.
pub fn fit_pce(space: &ParameterSpace, order: u32, z: &PointSet, y: &[f64]) -> Result<PcSurrogate> {
    let d = space.dim();
    let basis = PcBasis::total_degree(d, order);
    let n = z.len();
    if z.dim() != d || y.len() != n {
        return Err(Error::domain("training points and outputs are not aligned"));
    }
    if n < basis.min_samples() {
        return Err(Error::domain(format!(
            "order {order} needs at least {} samples, got {n}",
            basis.min_samples()
        )));
    }
    let p = basis.count();
    let mut x = DMatrix::zeros(n, p);
    let mut tables = vec![Vec::new(); d];
    let mut row = vec![0.0; p];
    for (i, zi) in z.rows().enumerate() {
        design_row(&basis, &space.normalize(zi), &mut tables, &mut row);
        for (j, v) in row.iter().enumerate() {
            x[(i, j)] = *v;
        }
    }
    let rhs = DVector::from_column_slice(y);
    let svd = x.clone().svd(true, true);
    let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
    if !(smin > 0.0) {
        return Err(Error::LeastSquares("singular PC design matrix".into()));
    }
    let condition = smax / smin;
    let coef = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::LeastSquares(e.to_string()))?;
    let resid = (&x * &coef - &rhs).norm();
    let scale = rhs.norm();
    let residual = if scale > 0.0 { resid / scale } else { resid };
    let warning = (condition > CONDITION_WARNING)
        .then(|| format!("ill-conditioned design matrix (condition number {condition:.3e})"));
    Ok(PcSurrogate {
        basis,
        coefficients: coef.iter().copied().collect(),
        space: space.clone(),
        residual,
        condition,
        warning,
    })
}

impl PcSurrogate {
    pub fn evaluate(&self, z: &[f64]) -> f64 {
        let mut tables = vec![Vec::new(); self.basis.d];
        let mut row = vec![0.0; self.basis.count()];
        design_row(&self.basis, &self.space.normalize(z), &mut tables, &mut row);
        row.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum()
    }

    pub fn mean(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn variance(&self) -> f64 {
        self.coefficients[1..].iter().map(|c| c * c).sum()
    }

    /// Plain-text coefficient table: one line per term, multi-index then
    /// coefficient.
    pub fn coefficient_table(&self) -> String {
        let names = self.space.names().join(" ");
        let mut out = format!("# order {} terms {}\n# {names} coefficient\n", self.basis.order, self.basis.count());
        for (alpha, c) in self.basis.terms.iter().zip(&self.coefficients) {
            let idx: Vec<String> = alpha.iter().map(u32::to_string).collect();
            out.push_str(&format!("{} {c:.17e}\n", idx.join(" ")));
        }
        out
    }
}

/// Main and total Sobol' indices read off the coefficients.
pub fn pc_sobol(surrogate: &PcSurrogate) -> SobolEstimate {
    let d = surrogate.basis.d;
    let mut vj = vec![0.0; d];
    let mut tj = vec![0.0; d];
    for (alpha, c) in surrogate.basis.terms.iter().zip(&surrogate.coefficients).skip(1) {
        let c2 = c * c;
        let active: Vec<usize> = (0..d).filter(|&i| alpha[i] > 0).collect();
        if let [i] = active[..] {
            vj[i] += c2;
        }
        for i in active {
            tj[i] += c2;
        }
    }
    SobolEstimate::from_parts(
        Method::Pc,
        surrogate.mean(),
        surrogate.variance(),
        vj,
        tj,
        Vec::new(),
    )
}

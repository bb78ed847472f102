//! Input-space description and Saltelli sample bundles.

mod sobol;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use sobol::{sobol_points, SobolSequence, MAX_DIMENSION};

/// Row-major `n × d` matrix of points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    data: Vec<f64>,
}

impl PointSet {
    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Self {
        assert!(dim > 0 && data.len().is_multiple_of(dim), "ragged point data");
        Self { dim, data }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or_else(|| Error::domain("empty point set"))?;
        let mut data = Vec::with_capacity(dim * rows.len());
        for r in rows {
            if r.as_ref().len() != dim {
                return Err(Error::domain("rows of unequal length"));
            }
            data.extend_from_slice(r.as_ref());
        }
        Ok(Self::from_row_major(dim, data))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(move |r| r[j])
    }

    /// Leading `n` rows.
    pub fn head(&self, n: usize) -> PointSet {
        let n = n.min(self.len());
        Self::from_row_major(self.dim, self.data[..n * self.dim].to_vec())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    #[serde(default)]
    pub unit: String,
}

impl Parameter {
    pub fn new(name: impl Into<String>, lower: f64, upper: f64, unit: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            lower,
            upper,
            unit: unit.into(),
        }
    }
}

/// Independent uniform inputs; the parameter order defines column indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpace {
    pub params: Vec<Parameter>,
}

impl ParameterSpace {
    pub fn new(params: Vec<Parameter>) -> Result<Self> {
        let space = Self { params };
        space.validate()?;
        Ok(space)
    }

    /// Radius, elastic modulus and wall thickness of the common carotid
    /// artery, each uniform within ±10% of its population mean.
    pub fn carotid() -> Self {
        let p = Parameter::new;
        Self {
            params: vec![
                p("r", 2.96e-3, 3.62e-3, "m"),
                p("E", 396.0e3, 484.0e3, "Pa"),
                p("h", 0.7065e-3, 0.8635e-3, "m"),
            ],
        }
    }

    /// `d` inputs `z1..zd`, each uniform on `[lower, upper]`.
    pub fn uniform(d: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(
            (1..=d)
                .map(|i| Parameter::new(format!("z{i}"), lower, upper, ""))
                .collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.is_empty() {
            return Err(Error::config("space.params", "at least one parameter required"));
        }
        for (i, p) in self.params.iter().enumerate() {
            if !(p.lower.is_finite() && p.upper.is_finite() && p.lower < p.upper) {
                return Err(Error::config(
                    format!("space.params[{i}]"),
                    format!("`{}` needs finite lower < upper", p.name),
                ));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn names(&self) -> Vec<&str> {
        self.params.iter().map(|p| p.name.as_str()).collect()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.params.iter().map(|p| 0.5 * (p.lower + p.upper)).collect()
    }

    /// Affine map of a unit-cube point to physical units.
    pub fn scale_into(&self, unit: &[f64], out: &mut [f64]) {
        for ((o, u), p) in out.iter_mut().zip(unit).zip(&self.params) {
            *o = p.lower + u * (p.upper - p.lower);
        }
    }

    /// Centered, bound-normalized coordinates in [-1, 1].
    pub fn normalize(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.params)
            .map(|(x, p)| (2.0 * x - (p.lower + p.upper)) / (p.upper - p.lower))
            .collect()
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        z.len() == self.dim()
            && z
                .iter()
                .zip(&self.params)
                .all(|(x, p)| *x >= p.lower && *x <= p.upper)
    }

    pub fn scale(&self, unit: &PointSet) -> PointSet {
        let d = self.dim();
        let mut data = vec![0.0; unit.len() * d];
        for (out, u) in data.chunks_exact_mut(d).zip(unit.rows()) {
            self.scale_into(u, out);
        }
        PointSet::from_row_major(d, data)
    }
}

/// Which Saltelli matrix a row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MatrixTag {
    A,
    B,
    /// `C_j` with zero-based `j`.
    C(usize),
}

impl MatrixTag {
    /// `A, B, C_1, …, C_d` in storage order.
    pub fn all(d: usize) -> Vec<MatrixTag> {
        let mut tags = vec![MatrixTag::A, MatrixTag::B];
        tags.extend((0..d).map(MatrixTag::C));
        tags
    }
}

impl fmt::Display for MatrixTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixTag::A => f.write_str("A"),
            MatrixTag::B => f.write_str("B"),
            MatrixTag::C(j) => write!(f, "C{}", j + 1),
        }
    }
}

impl std::str::FromStr for MatrixTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" => Ok(MatrixTag::A),
            "B" => Ok(MatrixTag::B),
            _ => s
                .strip_prefix('C')
                .and_then(|j| j.parse::<usize>().ok())
                .filter(|j| *j >= 1)
                .map(|j| MatrixTag::C(j - 1))
                .ok_or_else(|| Error::domain(format!("unknown matrix tag `{s}`"))),
        }
    }
}

/// The `A`, `B`, `C_1..C_d` matrices of a Saltelli design in physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBundle {
    pub a: PointSet,
    pub b: PointSet,
    pub c: Vec<PointSet>,
    pub n: usize,
    pub skip: u64,
}

impl SampleBundle {
    /// Splits `2d`-dimensional unit points into `A` (first `d` columns) and
    /// `B` (last `d` columns) and forms every `C_j`.
    pub fn from_unit(space: &ParameterSpace, unit: &PointSet, skip: u64) -> Result<Self> {
        let d = space.dim();
        if unit.dim() != 2 * d {
            return Err(Error::domain(format!(
                "bundle needs {}-dimensional unit points, got {}",
                2 * d,
                unit.dim()
            )));
        }
        let n = unit.len();
        let mut a = vec![0.0; n * d];
        let mut b = vec![0.0; n * d];
        for (s, u) in unit.rows().enumerate() {
            space.scale_into(&u[..d], &mut a[s * d..(s + 1) * d]);
            space.scale_into(&u[d..], &mut b[s * d..(s + 1) * d]);
        }
        let a = PointSet::from_row_major(d, a);
        let b = PointSet::from_row_major(d, b);
        let c = (0..d).map(|j| replace_column(&b, &a, j)).collect();
        Ok(Self { a, b, c, n, skip })
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn matrix(&self, tag: MatrixTag) -> &PointSet {
        match tag {
            MatrixTag::A => &self.a,
            MatrixTag::B => &self.b,
            MatrixTag::C(j) => &self.c[j],
        }
    }

    /// Number of distinct model evaluations needed per fidelity.
    pub fn evaluation_count(&self) -> usize {
        (self.dim() + 2) * self.n
    }
}

/// `B` with column `j` taken from `A`.
pub fn replace_column(b: &PointSet, a: &PointSet, j: usize) -> PointSet {
    let d = b.dim();
    let mut data = b.as_slice().to_vec();
    for (row, arow) in data.chunks_exact_mut(d).zip(a.rows()) {
        row[j] = arow[j];
    }
    PointSet::from_row_major(d, data)
}

/// Saltelli bundle from a `2d`-dimensional Sobol' sequence of length `n`.
pub fn build_bundle(space: &ParameterSpace, n: usize, skip: u64) -> Result<SampleBundle> {
    if n < 2 {
        return Err(Error::domain("bundle size must be at least 2"));
    }
    let unit = sobol_points(2 * space.dim(), n, skip)?;
    SampleBundle::from_unit(space, &unit, skip)
}

/// Independent uniform pseudo-random points on the unit cube.
pub fn random_points(d: usize, n: usize, seed: u64) -> PointSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * d).map(|_| rng.random::<f64>()).collect();
    PointSet::from_row_major(d, data)
}

/// Saltelli bundle from pseudo-random points (replicate studies).
pub fn build_random_bundle(space: &ParameterSpace, n: usize, seed: u64) -> Result<SampleBundle> {
    if n < 2 {
        return Err(Error::domain("bundle size must be at least 2"));
    }
    let unit = random_points(2 * space.dim(), n, seed);
    SampleBundle::from_unit(space, &unit, 0)
}

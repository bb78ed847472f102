//! Trace-level agreement metrics between two fidelities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{min_max, StationTrace};

/// Average, maximum, systolic and diastolic relative errors of one signal.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricSet {
    pub avg: f64,
    pub max: f64,
    pub sys: f64,
    pub dia: f64,
}

/// The twelve error measures for pressure, flow and radial displacement.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub pressure: MetricSet,
    pub flow: MetricSet,
    pub displacement: MetricSet,
}

impl ErrorMetrics {
    pub fn rows(&self) -> [(&'static str, MetricSet); 3] {
        [
            ("P", self.pressure),
            ("Q", self.flow),
            ("dr", self.displacement),
        ]
    }
}

/// Samples `(t, y)` at `at` by linear interpolation (clamped at the ends).
fn resample(t: &[f64], y: &[f64], at: &[f64]) -> Vec<f64> {
    at.iter()
        .map(|&x| {
            let i = t.partition_point(|&ti| ti <= x);
            if i == 0 {
                y[0]
            } else if i >= t.len() {
                y[t.len() - 1]
            } else {
                let w = (x - t[i - 1]) / (t[i] - t[i - 1]);
                y[i - 1] + w * (y[i] - y[i - 1])
            }
        })
        .collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// `x` is the reference (higher fidelity), `y` the compared signal.
/// `range_avg` selects the range-normalized average used for flow and
/// displacement; pressure normalizes by the summed reference.
fn metric_set(x: &[f64], y: &[f64], range_avg: bool, range_dia: bool) -> MetricSet {
    let n = x.len() as f64;
    let (xmin, xmax) = min_max(x);
    let (ymin, ymax) = min_max(y);
    let abs_err: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - b).abs()).collect();
    let xmean = mean(x);
    let range = xmax - xmin;
    MetricSet {
        avg: if range_avg {
            abs_err.iter().sum::<f64>() / n / range
        } else {
            abs_err.iter().sum::<f64>() / x.iter().sum::<f64>()
        },
        max: abs_err.iter().cloned().fold(0.0, f64::max) / xmean,
        sys: (xmax - ymax).abs() / xmax,
        dia: (xmin - ymin).abs() / if range_dia { range } else { xmean },
    }
}

/// Compares two final-cycle traces on their common phase window. Each
/// trace's time axis is shifted to start at zero and the coarser trace is
/// interpolated onto the finer grid. Radial displacement is `r − r_dia`
/// with `r_dia` the diastolic radius input of the run.
pub fn validate_fidelities(
    reference: &StationTrace,
    other: &StationTrace,
    r_dia: f64,
) -> Result<ErrorMetrics> {
    if reference.len() < 2 || other.len() < 2 {
        return Err(Error::domain("validation traces need at least two samples"));
    }
    let phase = |tr: &StationTrace| -> Vec<f64> { tr.t.iter().map(|t| t - tr.t[0]).collect() };
    let (tx, ty) = (phase(reference), phase(other));
    let end = tx[tx.len() - 1].min(ty[ty.len() - 1]);
    if !(end > 0.0) {
        return Err(Error::domain("validation traces do not overlap in time"));
    }
    let (fine, x_is_fine) = if tx.len() >= ty.len() { (&tx, true) } else { (&ty, false) };
    let grid: Vec<f64> = fine.iter().copied().filter(|&t| t <= end * (1.0 + 1e-12)).collect();
    let pick = |t: &[f64], is_fine: bool, v: &[f64]| -> Vec<f64> {
        if is_fine {
            v[..grid.len()].to_vec()
        } else {
            resample(t, v, &grid)
        }
    };
    let disp = |r: &[f64]| -> Vec<f64> { r.iter().map(|v| v - r_dia).collect() };
    let px = pick(&tx, x_is_fine, &reference.pressure);
    let py = pick(&ty, !x_is_fine, &other.pressure);
    let qx = pick(&tx, x_is_fine, &reference.flow);
    let qy = pick(&ty, !x_is_fine, &other.flow);
    let rx = pick(&tx, x_is_fine, &disp(&reference.radius));
    let ry = pick(&ty, !x_is_fine, &disp(&other.radius));
    Ok(ErrorMetrics {
        pressure: metric_set(&px, &py, false, false),
        flow: metric_set(&qx, &qy, true, true),
        displacement: metric_set(&rx, &ry, true, true),
    })
}

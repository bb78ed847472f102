//! Periodic inlet flow waveforms.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Cosine/sine coefficients of the zero-mean, unit-peak carotid pulse shape.
const CAROTID_SHAPE: [(f64, f64); 12] = [
    (0.134917, 0.240089),
    (-0.020333, 0.205040),
    (-0.138970, 0.116671),
    (-0.105900, -0.015619),
    (-0.058906, -0.022107),
    (-0.041934, -0.053175),
    (0.012754, -0.053566),
    (0.031746, -0.014489),
    (0.017848, 0.005910),
    (0.008368, 0.008708),
    (0.000661, 0.009762),
    (-0.004494, 0.003879),
];

/// Mean flow of the default waveform [m³/s]. Together with the amplitude it
/// is tuned so the 1D model at mean inputs gives P_sys ≈ 129.7 mmHg and
/// PP ≈ 51.1 mmHg.
pub const CAROTID_MEAN_FLOW: f64 = 6.44e-6;
/// Peak-minus-mean flow of the default waveform [m³/s].
pub const CAROTID_PULSE_AMPLITUDE: f64 = 12.35e-6;
const CAROTID_SAMPLES: usize = 1000;

/// Sampled flow over one period, evaluated by periodic linear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct InflowWaveform {
    t: Vec<f64>,
    q: Vec<f64>,
    period: f64,
    /// Sample spacing when the grid is uniform and starts at 0.
    uniform_dt: Option<f64>,
}

impl InflowWaveform {
    /// Builds a waveform from samples on `[0, period]`. A final sample at
    /// `t == period` must repeat the first flow value and is dropped.
    pub fn new(mut t: Vec<f64>, mut q: Vec<f64>, period: f64) -> Result<Self> {
        if t.len() != q.len() || t.is_empty() {
            return Err(Error::domain("waveform needs equal, non-empty time and flow columns"));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::domain("waveform period must be positive"));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("waveform times must be strictly increasing"));
        }
        if t[0] < 0.0 || *t.last().unwrap() > period {
            return Err(Error::domain("waveform times must lie in [0, period]"));
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("waveform flows must be finite"));
        }
        if *t.last().unwrap() == period {
            let (q0, qn) = (q[0], *q.last().unwrap());
            let scale = q.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
            if t[0] != 0.0 || (q0 - qn).abs() > 1e-9 * scale {
                return Err(Error::domain("waveform is not periodic: Q(0) != Q(T)"));
            }
            t.pop();
            q.pop();
        }
        if t.is_empty() {
            return Err(Error::domain("waveform needs at least one sample inside the period"));
        }
        let n = t.len();
        let h = period / n as f64;
        let uniform = t[0] == 0.0
            && t.iter().enumerate().all(|(i, &ti)| (ti - i as f64 * h).abs() <= 1e-12 * period);
        Ok(Self {
            t,
            q,
            period,
            uniform_dt: uniform.then_some(h),
        })
    }

    /// Synthetic carotid inflow: 1 s period, 6.44 ml/s mean, 18.8 ml/s peak.
    pub fn carotid() -> Self {
        Self::from_shape(CAROTID_MEAN_FLOW, CAROTID_PULSE_AMPLITUDE, 1.0)
    }

    /// Carotid pulse shape scaled to the given mean and peak-minus-mean flow.
    pub fn from_shape(mean: f64, amplitude: f64, period: f64) -> Self {
        let n = CAROTID_SAMPLES;
        let t: Vec<f64> = (0..n).map(|i| period * i as f64 / n as f64).collect();
        let q = t
            .iter()
            .map(|&ti| {
                let phase = 2.0 * PI * ti / period;
                let shape: f64 = CAROTID_SHAPE
                    .iter()
                    .enumerate()
                    .map(|(k, (a, b))| {
                        let w = (k + 1) as f64 * phase;
                        a * w.cos() + b * w.sin()
                    })
                    .sum();
                mean + amplitude * shape
            })
            .collect();
        Self::new(t, q, period).expect("synthetic waveform is well formed")
    }

    /// Constant flow (zero for equilibrium checks).
    pub fn constant(q: f64, period: f64) -> Self {
        Self::new(vec![0.0], vec![q], period).expect("constant waveform is well formed")
    }

    /// Reads two whitespace- or comma-separated columns `time flow` in SI
    /// units. Lines starting with `#` are comments; a `# period <T>` comment
    /// sets the period, otherwise the last time closes the cycle.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut period = None;
        let (mut t, mut q) = (Vec::new(), Vec::new());
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                let mut words = comment.split_whitespace();
                if words.next().map(|w| w.trim_end_matches(':')) == Some("period") {
                    period = words.next().and_then(|v| v.parse::<f64>().ok());
                }
                continue;
            }
            let cols: Vec<f64> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::domain(format!("line {}: {e}", lineno + 1)))?;
            if cols.len() != 2 {
                return Err(Error::domain(format!("line {}: expected 2 columns", lineno + 1)));
            }
            t.push(cols[0]);
            q.push(cols[1]);
        }
        let period = match (period, t.last()) {
            (Some(p), _) => p,
            (None, Some(&last)) => last,
            (None, None) => return Err(Error::domain("waveform file has no samples")),
        };
        Self::new(t, q, period)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("# period {}\n# time_s flow_m3_per_s\n", self.period);
        for (t, q) in self.t.iter().zip(&self.q) {
            s.push_str(&format!("{t:e} {q:e}\n"));
        }
        s.push_str(&format!("{:e} {:e}\n", self.period, self.q[0]));
        s
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn samples(&self) -> (&[f64], &[f64]) {
        (&self.t, &self.q)
    }

    pub fn mean(&self) -> f64 {
        // Exact integral of the periodic piecewise-linear interpolant.
        let n = self.t.len();
        let mut area = 0.0;
        for i in 0..n {
            let (t0, q0) = (self.t[i], self.q[i]);
            let (t1, q1) = if i + 1 < n {
                (self.t[i + 1], self.q[i + 1])
            } else {
                (self.t[0] + self.period, self.q[0])
            };
            area += 0.5 * (q0 + q1) * (t1 - t0);
        }
        area / self.period
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.t.len();
        if n == 1 {
            return self.q[0];
        }
        let tau = t.rem_euclid(self.period);
        let (i, t0) = match self.uniform_dt {
            Some(h) => {
                let i = ((tau / h) as usize).min(n - 1);
                (i, i as f64 * h)
            }
            None => {
                let i = self.t.partition_point(|&ti| ti <= tau);
                if i == 0 {
                    // Before the first sample: wrap from the last.
                    let last = n - 1;
                    let t0 = self.t[last] - self.period;
                    let w = (tau - t0) / (self.t[0] - t0);
                    return self.q[last] + w * (self.q[0] - self.q[last]);
                }
                (i - 1, self.t[i - 1])
            }
        };
        let (t1, q1) = if i + 1 < n {
            (self.t[i + 1], self.q[i + 1])
        } else {
            (self.t[0] + self.period, self.q[0])
        };
        let w = (tau - t0) / (t1 - t0);
        self.q[i] + w * (q1 - self.q[i])
    }
}

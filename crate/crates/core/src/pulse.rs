//! Control fields on a uniform time grid.
//!
//! A [`ControlField`] holds one complex amplitude (MHz) per interval of a
//! uniform grid over `[0, T]`; the value is piecewise constant on each interval
//! and nominally sampled at the interval midpoint.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{C64, ZERO};
use crate::system::EnvelopeConvention;

pub const PULSE_FILE_HEADER: &str = "# t[ns]  Re(eps)[MHz]  Im(eps)[MHz]";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticPulseParams {
    /// Peak amplitude E0 in MHz.
    pub peak_amplitude: f64,
    /// Duration T in ns.
    pub duration: f64,
}

impl Default for AnalyticPulseParams {
    fn default() -> Self {
        Self { peak_amplitude: 300.0, duration: 200.0 }
    }
}

impl AnalyticPulseParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.peak_amplitude >= 0.0) || !self.peak_amplitude.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "peak amplitude must be non-negative, got {}",
                self.peak_amplitude
            )));
        }
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::InvalidParameter(format!("duration must be positive, got {}", self.duration)));
        }
        Ok(())
    }
}

/// `sin²(π t / T)`
pub fn sin_squared(t: f64, duration: f64) -> f64 {
    let s = (PI * t / duration).sin();
    s * s
}

/// Number of intervals used for a duration at a nominal step: `round(T / dt)`,
/// at least one.
pub fn step_count(duration: f64, dt: f64) -> usize {
    ((duration / dt).round() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlField {
    dt: f64,
    samples: Vec<C64>,
}

impl ControlField {
    pub fn new(dt: f64, samples: Vec<C64>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        if samples.is_empty() {
            return Err(Error::InvalidParameter("control field needs at least one interval".into()));
        }
        Ok(Self { dt, samples })
    }

    pub fn zeros(dt: f64, n_steps: usize) -> Result<Self> {
        Self::new(dt, vec![ZERO; n_steps])
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.samples.len()
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.samples.len() as f64
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [C64] {
        &mut self.samples
    }

    /// Midpoint of interval `i`.
    pub fn time(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dt
    }

    /// Grid point `t_i = i dt`, `i = 0..=n_steps`.
    pub fn grid_time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|s| s.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.samples.iter().zip(&other.samples).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(64 * (self.samples.len() + 1));
        out.push_str(PULSE_FILE_HEADER);
        out.push('\n');
        for (i, s) in self.samples.iter().enumerate() {
            writeln!(out, "{:.17e}  {:.17e}  {:.17e}", self.time(i), s.re, s.im).unwrap();
        }
        out
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text).map_err(|message| Error::Format { path: path.to_owned(), message })
    }

    pub fn from_text(text: &str) -> std::result::Result<Self, String> {
        let mut times = Vec::new();
        let mut samples = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<f64> = line
                .split_whitespace()
                .map(|c| c.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| format!("line {}: {e}", lineno + 1))?;
            if cols.len() != 3 {
                return Err(format!("line {}: expected 3 columns, found {}", lineno + 1, cols.len()));
            }
            times.push(cols[0]);
            samples.push(C64::new(cols[1], cols[2]));
        }
        let n = samples.len();
        if n == 0 {
            return Err("no samples".into());
        }
        // midpoints: t_0 = dt/2, t_last = T - dt/2
        let duration = times[0] + times[n - 1];
        let dt = duration / n as f64;
        if !(dt > 0.0) {
            return Err(format!("cannot infer a positive time step from t = {} .. {}", times[0], times[n - 1]));
        }
        for (i, t) in times.iter().enumerate() {
            let expected = (i as f64 + 0.5) * dt;
            if (t - expected).abs() > 1e-6 * dt.max(1.0) {
                return Err(format!("time column is not a uniform midpoint grid at row {i}: {t} vs {expected}"));
            }
        }
        ControlField::new(dt, samples).map_err(|e| e.to_string())
    }
}

/// Samples `E0 sin²(π t/T)` at the interval midpoints of the grid with
/// `round(T/dt)` intervals spanning exactly `[0, T]`, scaled by the envelope
/// convention.
pub fn sample_analytic(params: &AnalyticPulseParams, dt: f64, convention: EnvelopeConvention) -> Result<ControlField> {
    params.validate()?;
    if !(dt > 0.0) || dt >= params.duration {
        return Err(Error::InvalidParameter(format!(
            "time step {dt} must be positive and below the duration {}",
            params.duration
        )));
    }
    let n = step_count(params.duration, dt);
    let step = params.duration / n as f64;
    let amp = params.peak_amplitude * convention.factor();
    let samples = (0..n)
        .map(|i| C64::new(amp * sin_squared((i as f64 + 0.5) * step, params.duration), 0.0))
        .collect();
    ControlField::new(step, samples)
}

/// Update weight `S(t) ∈ [0, 1]` per interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeFunction {
    samples: Vec<f64>,
}

impl ShapeFunction {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if let Some(s) = samples.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::InvalidParameter(format!("shape value {s} outside [0, 1]")));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// `sin²(π t/T)` at the field's interval midpoints, with the first and last
/// interval pinned to zero so that updates never touch the switch-on and
/// switch-off samples.
pub fn default_shape(field: &ControlField) -> ShapeFunction {
    let n = field.n_steps();
    let duration = field.duration();
    let samples = (0..n)
        .map(|i| if i == 0 || i + 1 == n { 0.0 } else { sin_squared(field.time(i), duration) })
        .collect();
    ShapeFunction { samples }
}

/// One spectral bin of a control field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralLine {
    /// Offset from the drive frequency, MHz.
    pub offset_mhz: f64,
    /// `|DFT| / N`, MHz.
    pub magnitude: f64,
}

/// Discrete Fourier spectrum of the complex envelope, ordered by frequency
/// offset from the drive (negative to positive).
pub fn spectrum(field: &ControlField) -> Result<Vec<SpectralLine>> {
    let n = field.n_steps();
    if n < 2 {
        return Err(Error::InvalidParameter("spectrum needs at least two samples".into()));
    }
    let mut buf = field.samples().to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let df_mhz = 1e3 / (n as f64 * field.dt());
    let mut lines: Vec<SpectralLine> = buf
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let signed = if k < (n + 1) / 2 { k as f64 } else { k as f64 - n as f64 };
            SpectralLine { offset_mhz: signed * df_mhz, magnitude: x.norm() / n as f64 }
        })
        .collect();
    lines.sort_by(|a, b| a.offset_mhz.total_cmp(&b.offset_mhz));
    Ok(lines)
}

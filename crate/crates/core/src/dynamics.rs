//! Expectation-value time series of a single propagated state.

use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::linalg::{StateVector, C64};
use crate::propagator::Propagator;
use crate::pulse::ControlField;
use crate::system::LogicalBasis;
use crate::system::SystemParams;

pub const DYNAMICS_CSV_HEADER: &str = "t,<n>_cav,std_cav,<n>_q1,std_q1,<n>_q2,std_q2,pop_00";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DynamicsSample {
    pub t: f64,
    pub n_cav: f64,
    pub std_cav: f64,
    pub n_q1: f64,
    pub std_q1: f64,
    pub n_q2: f64,
    pub std_q2: f64,
    /// Population of the logical `|00⟩` state.
    pub pop_00: f64,
}

fn mean_std(weights: &[f64], values: &[f64]) -> (f64, f64) {
    let mean: f64 = weights.iter().zip(values).map(|(w, v)| w * v).sum();
    let second: f64 = weights.iter().zip(values).map(|(w, v)| w * v * v).sum();
    (mean, (second - mean * mean).max(0.0).sqrt())
}

/// Occupation numbers of every basis state, per mode.
struct Occupations {
    cav: Vec<f64>,
    q1: Vec<f64>,
    q2: Vec<f64>,
}

impl Occupations {
    fn new(params: &SystemParams) -> Self {
        let (mut cav, mut q1, mut q2) = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..params.dim() {
            let (a, b, n) = params.decompose(i);
            q1.push(a as f64);
            q2.push(b as f64);
            cav.push(n as f64);
        }
        Self { cav, q1, q2 }
    }

    fn sample(&self, t: f64, psi: &[C64], logical: &LogicalBasis) -> DynamicsSample {
        let w: Vec<f64> = psi.iter().map(|a| a.norm_sqr()).collect();
        let (n_cav, std_cav) = mean_std(&w, &self.cav);
        let (n_q1, std_q1) = mean_std(&w, &self.q1);
        let (n_q2, std_q2) = mean_std(&w, &self.q2);
        DynamicsSample { t, n_cav, std_cav, n_q1, std_q1, n_q2, std_q2, pop_00: logical.overlap(0, psi).norm_sqr() }
    }
}

/// Propagates `initial` under `field` and samples every `stride`-th grid
/// point (the final point is always included).
pub fn expectation_series(
    propagator: &Propagator,
    params: &SystemParams,
    logical: &LogicalBasis,
    field: &ControlField,
    initial: &StateVector,
    stride: usize,
) -> Result<Vec<DynamicsSample>> {
    let occ = Occupations::new(params);
    let stride = stride.max(1);
    let n = field.n_steps();
    let mut out = Vec::with_capacity(n / stride + 2);
    propagator.forward_observed(field, initial, |i, psi| {
        if i % stride == 0 || i == n {
            out.push(occ.sample(field.grid_time(i), psi, logical));
        }
    })?;
    Ok(out)
}

pub fn peak_cavity_population(samples: &[DynamicsSample]) -> f64 {
    samples.iter().map(|s| s.n_cav).fold(0.0, f64::max)
}

pub fn write_dynamics_csv(path: &Path, samples: &[DynamicsSample]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{DYNAMICS_CSV_HEADER}")?;
    for s in samples {
        writeln!(
            f,
            "{:.6},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}",
            s.t, s.n_cav, s.std_cav, s.n_q1, s.std_q1, s.n_q2, s.std_q2, s.pop_00
        )?;
    }
    f.flush()?;
    Ok(())
}

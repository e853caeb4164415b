//! Nelder-Mead over the analytic pulse parameters `(E0, T)`.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{eval_splx, FunctionalValue, GateMatrix};
use crate::gate_analysis::{nonlocal_phase, population_loss_of_gate};
use crate::propagator::{Propagator, Store};
use crate::pulse::{sample_analytic, AnalyticPulseParams, ControlField};
use crate::system::{EnvelopeConvention, LogicalBasis};

pub const SIMPLEX_CSV_HEADER: &str = "eval,E0_MHz,T_ns,J_splx,J_diag,J_gamma,eps_C,eps_pop";

/// Move coefficients and stopping rule of the Nelder-Mead search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NelderMeadOptions {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    pub max_evaluations: usize,
    /// Stop once `f_worst − f_best` is at most this.
    pub tolerance: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { reflection: 1.0, expansion: 2.0, contraction: 0.5, shrink: 0.5, max_evaluations: 300, tolerance: 1e-6 }
    }
}

impl NelderMeadOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.reflection > 0.0
            && self.expansion > 1.0
            && self.contraction > 0.0
            && self.contraction < 1.0
            && self.shrink > 0.0
            && self.shrink < 1.0;
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "need reflection > 0, expansion > 1, 0 < contraction < 1, 0 < shrink < 1; got {}, {}, {}, {}",
                self.reflection, self.expansion, self.contraction, self.shrink
            )));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance must be non-negative, got {}", self.tolerance)));
        }
        Ok(())
    }
}

/// Outcome of [`nelder_mead`].
#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub best: Vec<f64>,
    pub best_value: f64,
    /// Objective calls made.
    pub evaluations: usize,
    pub iterations: usize,
    /// Best value after the initial simplex and after every iteration.
    pub best_history: Vec<f64>,
    /// Whether the spread criterion was met (as opposed to running out of budget).
    pub converged: bool,
}

/// Minimizes `f` starting from the simplex `initial` (`n + 1` vertices of
/// dimension `n`). Errors from `f` abort the search.
pub fn nelder_mead<F>(mut f: F, initial: Vec<Vec<f64>>, options: &NelderMeadOptions) -> Result<NelderMeadResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    options.validate()?;
    let n = initial.len().saturating_sub(1);
    if n == 0 || initial.iter().any(|v| v.len() != n) {
        return Err(Error::InvalidParameter(format!("a simplex in {n} dimensions needs {} vertices", n + 1)));
    }
    let budget = options.max_evaluations.max(1);
    let mut evaluations = 0usize;
    let mut call = |x: &[f64], evaluations: &mut usize| -> Result<f64> {
        *evaluations += 1;
        let v = f(x)?;
        Ok(if v.is_nan() { f64::INFINITY } else { v })
    };

    let mut sim: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    for v in initial {
        if evaluations >= budget {
            break;
        }
        let fv = call(&v, &mut evaluations)?;
        sim.push((v, fv));
    }
    sim.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut best_history = vec![sim[0].1];
    if sim.len() < n + 1 {
        let (best, best_value) = sim.swap_remove(0);
        return Ok(NelderMeadResult { best, best_value, evaluations, iterations: 0, best_history, converged: false });
    }

    let (rho, chi, psi, sigma) = (options.reflection, options.expansion, options.contraction, options.shrink);
    let mut iterations = 0;
    let mut converged = false;
    loop {
        let spread = sim[n].1 - sim[0].1;
        if spread <= options.tolerance {
            converged = true;
            break;
        }
        if evaluations >= budget {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|j| sim[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64).collect();
        let worst = sim[n].0.clone();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&worst).map(|(c, w)| c + t * (c - w)).collect() };

        let xr = along(rho);
        let fr = call(&xr, &mut evaluations)?;
        let mut do_shrink = false;
        if fr < sim[0].1 {
            if evaluations < budget {
                let xe = along(rho * chi);
                let fe = call(&xe, &mut evaluations)?;
                sim[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else {
                sim[n] = (xr, fr);
            }
        } else if fr < sim[n - 1].1 {
            sim[n] = (xr, fr);
        } else if evaluations < budget {
            if fr < sim[n].1 {
                let xc = along(psi * rho);
                let fc = call(&xc, &mut evaluations)?;
                if fc <= fr {
                    sim[n] = (xc, fc);
                } else {
                    do_shrink = true;
                }
            } else {
                let xcc = along(-psi);
                let fcc = call(&xcc, &mut evaluations)?;
                if fcc < sim[n].1 {
                    sim[n] = (xcc, fcc);
                } else {
                    do_shrink = true;
                }
            }
        }
        if do_shrink {
            let x0 = sim[0].0.clone();
            for vertex in sim.iter_mut().skip(1) {
                if evaluations >= budget {
                    break;
                }
                let x: Vec<f64> = x0.iter().zip(&vertex.0).map(|(b, v)| b + sigma * (v - b)).collect();
                let fx = call(&x, &mut evaluations)?;
                *vertex = (x, fx);
            }
        }
        sim.sort_by(|a, b| a.1.total_cmp(&b.1));
        iterations += 1;
        best_history.push(sim[0].1);
    }
    let (best, best_value) = sim.swap_remove(0);
    Ok(NelderMeadResult { best, best_value, evaluations, iterations, best_history, converged })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimplexConfig {
    /// Initial simplex offsets `(ΔE0 [MHz], ΔT [ns])`; `None` means `(0.1 E0, 0.05 T)`.
    pub initial_spread: Option<[f64; 2]>,
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    pub max_evaluations: usize,
    pub tolerance: f64,
}

impl Default for SimplexConfig {
    fn default() -> Self {
        Self::from_options(NelderMeadOptions::default())
    }
}

impl SimplexConfig {
    pub fn from_options(o: NelderMeadOptions) -> Self {
        Self {
            initial_spread: None,
            reflection: o.reflection,
            expansion: o.expansion,
            contraction: o.contraction,
            shrink: o.shrink,
            max_evaluations: o.max_evaluations,
            tolerance: o.tolerance,
        }
    }

    pub fn options(&self) -> NelderMeadOptions {
        NelderMeadOptions {
            reflection: self.reflection,
            expansion: self.expansion,
            contraction: self.contraction,
            shrink: self.shrink,
            max_evaluations: self.max_evaluations,
            tolerance: self.tolerance,
        }
    }

    pub fn spread_for(&self, start: &AnalyticPulseParams) -> [f64; 2] {
        self.initial_spread.unwrap_or([0.1 * start.peak_amplitude, 0.05 * start.duration])
    }

    pub fn validate(&self) -> Result<()> {
        self.options().validate()?;
        if let Some(s) = self.initial_spread {
            if s.iter().any(|v| !(v.is_finite() && *v != 0.0)) {
                return Err(Error::InvalidParameter(format!("initial_spread must be finite and non-zero, got {s:?}")));
            }
        }
        Ok(())
    }
}

/// One evaluated candidate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateRecord {
    pub eval: usize,
    pub params: AnalyticPulseParams,
    pub value: FunctionalValue,
    pub eps_c: f64,
    pub eps_pop: f64,
    pub wall_s: f64,
}

impl CandidateRecord {
    fn csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        format!(
            "{},{:.12e},{:.12e},{:.16e},{},{},{:.16e},{:.16e}",
            self.eval,
            self.params.peak_amplitude,
            self.params.duration,
            self.value.total,
            opt(self.value.j_diag),
            opt(self.value.j_gamma),
            self.eps_c,
            self.eps_pop
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct SimplexRecord {
    pub candidates: Vec<CandidateRecord>,
    pub best_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl SimplexRecord {
    /// Propagation units spent (one per evaluated candidate).
    pub fn n_props(&self) -> usize {
        self.candidates.len()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(SIMPLEX_CSV_HEADER);
        s.push('\n');
        for c in &self.candidates {
            s.push_str(&c.csv_line());
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Dynamics and discretization shared by all candidates.
#[derive(Debug, Clone, Copy)]
pub struct CandidateContext<'a> {
    pub propagator: &'a Propagator,
    pub logical: &'a LogicalBasis,
    pub dt: f64,
    pub envelope: EnvelopeConvention,
}

impl CandidateContext<'_> {
    /// Samples the analytic pulse and propagates the four logical states.
    pub fn evaluate(&self, params: &AnalyticPulseParams) -> Result<(FunctionalValue, GateMatrix)> {
        let wrap = |e: Error| Error::Candidate { e0: params.peak_amplitude, duration: params.duration, source: Box::new(e) };
        let field = self.sample(params).map_err(wrap)?;
        let set = self.propagator.propagate_all_forward(&field, &self.logical.states(), Store::Final).map_err(wrap)?;
        let gate = GateMatrix::from_states(&set.into_end_states(), self.logical);
        let value = eval_splx(&gate, field.duration()).map_err(wrap)?;
        Ok((value, gate))
    }

    pub fn sample(&self, params: &AnalyticPulseParams) -> Result<ControlField> {
        sample_analytic(params, self.dt, self.envelope)
    }

    /// Whether a candidate lies outside the physical region and is never propagated.
    pub fn is_barred(&self, params: &AnalyticPulseParams) -> bool {
        !(params.peak_amplitude > 0.0 && params.duration > self.dt)
    }
}

/// Outcome of [`run_simplex`].
#[derive(Debug, Clone)]
pub struct SimplexOutcome {
    pub best: AnalyticPulseParams,
    pub best_value: f64,
    pub field: ControlField,
    pub record: SimplexRecord,
}

/// Nelder-Mead on `J_splx(E0, T)` from `start`. `observer` sees each
/// evaluated candidate as it completes.
pub fn run_simplex(
    ctx: &CandidateContext<'_>,
    start: &AnalyticPulseParams,
    config: &SimplexConfig,
    mut observer: impl FnMut(&CandidateRecord) -> Result<()>,
) -> Result<SimplexOutcome> {
    config.validate()?;
    start.validate()?;
    let clock = Instant::now();
    let [de, dtau] = config.spread_for(start);
    let (e0, t) = (start.peak_amplitude, start.duration);
    let initial = vec![vec![e0, t], vec![e0 + de, t], vec![e0, t + dtau]];
    let mut candidates = Vec::new();
    let objective = |x: &[f64]| -> Result<f64> {
        let params = AnalyticPulseParams { peak_amplitude: x[0], duration: x[1] };
        if ctx.is_barred(&params) {
            return Ok(f64::INFINITY);
        }
        let (value, gate) = ctx.evaluate(&params)?;
        let eps_c = nonlocal_phase(&gate).map(|(_, c)| 1.0 - c).unwrap_or(f64::NAN);
        let rec = CandidateRecord {
            eval: candidates.len() + 1,
            params,
            value,
            eps_c,
            eps_pop: population_loss_of_gate(&gate),
            wall_s: clock.elapsed().as_secs_f64(),
        };
        log::debug!("candidate {}: E0 = {:.4}, T = {:.4}, J = {:.6e}", rec.eval, x[0], x[1], value.total);
        observer(&rec)?;
        candidates.push(rec);
        Ok(value.total)
    };
    let result = nelder_mead(objective, initial, &config.options())?;
    let best = AnalyticPulseParams { peak_amplitude: result.best[0], duration: result.best[1] };
    let field = ctx.sample(&best)?;
    let record = SimplexRecord {
        candidates,
        best_history: result.best_history,
        iterations: result.iterations,
        converged: result.converged,
    };
    Ok(SimplexOutcome { best, best_value: result.best_value, field, record })
}

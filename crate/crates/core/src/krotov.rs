//! Krotov's method with the sequential (immediate) update and the optional
//! second-order correction.
//!
//! One iteration propagates the co-states backward under the old field, then
//! sweeps forward: at every interval the update is computed from the stored
//! co-states and the forward states already propagated under the new field,
//! and the forward states are advanced with the updated value.

use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{embed_costates, Functional, FunctionalValue, GateMatrix};
use crate::gate_analysis::{analyze, GateMetrics, MultiStart};
use crate::history::{checkpoint_stride, trajectory_bytes, History, HistoryBuilder};
use crate::linalg::{dot, StateVector, C64, ZERO};
use crate::propagator::{Direction, Propagator, StepWorkspace};
use crate::pulse::{ControlField, ShapeFunction};
use crate::system::LogicalBasis;

pub const CONVERGENCE_CSV_HEADER: &str = "iteration,J_T,J_diag,J_gamma,delta_J,sigma,n_props,wall_s";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KrotovConfig {
    /// Inverse step size.
    pub lambda_a: f64,
    /// Lower bound on the magnitude of the second-order weight.
    pub epsilon_a: f64,
    /// Include the second-order term; by default only for functionals that need it.
    pub sigma_enabled: Option<bool>,
    pub max_iterations: usize,
    /// Stop once `|ΔJ_T| / J_T` falls below this.
    pub convergence_ratio: f64,
    /// Largest tolerated increase of `J_T` in one iteration before aborting.
    pub monotonic_tolerance: f64,
    /// Memory available for stored trajectories; beyond it, checkpointing is used.
    pub memory_budget_mb: usize,
}

impl Default for KrotovConfig {
    fn default() -> Self {
        Self {
            lambda_a: 1e-4,
            epsilon_a: 1e-4,
            sigma_enabled: None,
            max_iterations: 500,
            convergence_ratio: 1e-4,
            monotonic_tolerance: 1e-10,
            memory_budget_mb: 2048,
        }
    }
}

impl KrotovConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_a > 0.0 && self.lambda_a.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda_a must be positive, got {}", self.lambda_a)));
        }
        if !(self.epsilon_a >= 0.0 && self.epsilon_a.is_finite()) {
            return Err(Error::InvalidParameter(format!("epsilon_a must be non-negative, got {}", self.epsilon_a)));
        }
        if !(self.convergence_ratio >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "convergence_ratio must be non-negative, got {}",
                self.convergence_ratio
            )));
        }
        if !(self.monotonic_tolerance >= 0.0) {
            return Err(Error::InvalidParameter("monotonic_tolerance must be non-negative".into()));
        }
        Ok(())
    }

    pub fn second_order(&self, functional: &Functional) -> bool {
        self.sigma_enabled.unwrap_or_else(|| functional.needs_second_order())
    }
}

/// One line of the convergence log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub j_t: f64,
    pub j_diag: Option<f64>,
    pub j_gamma: Option<f64>,
    /// `J_T^(i) − J_T^(i−1)`
    pub delta_j: f64,
    /// Second-order weight used in this iteration (0 when disabled).
    pub sigma: f64,
    /// Cumulative propagations of the four logical states.
    pub n_props: usize,
    /// Cumulative wall time in seconds.
    pub wall_s: f64,
    pub metrics: Option<GateMetrics>,
}

impl IterationRecord {
    fn csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        format!(
            "{},{:.16e},{},{},{:.16e},{:.16e},{},{:.3}",
            self.iteration,
            self.j_t,
            opt(self.j_diag),
            opt(self.j_gamma),
            self.delta_j,
            self.sigma,
            self.n_props,
            self.wall_s
        )
    }
}

/// Full history of one optimization. Row 0 is the starting point.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct OptimizationRecord {
    pub rows: Vec<IterationRecord>,
    pub converged: bool,
}

impl OptimizationRecord {
    /// Number of completed iterations.
    pub fn iterations(&self) -> usize {
        self.rows.iter().filter(|r| r.iteration > 0).count()
    }

    pub fn n_props(&self) -> usize {
        self.rows.last().map_or(0, |r| r.n_props)
    }

    pub fn final_value(&self) -> Option<f64> {
        self.rows.last().map(|r| r.j_t)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CONVERGENCE_CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.csv_line());
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Appends rows to a convergence log as they are produced.
pub struct ConvergenceLog {
    file: std::fs::File,
}

impl ConvergenceLog {
    pub fn create(path: &Path) -> Result<Self> {
        let mut file = std::fs::File::create(path)?;
        writeln!(file, "{CONVERGENCE_CSV_HEADER}")?;
        Ok(Self { file })
    }

    pub fn append(&mut self, row: &IterationRecord) -> Result<()> {
        writeln!(self.file, "{}", row.csv_line())?;
        self.file.flush()?;
        Ok(())
    }
}

/// `σ = −max(ε_A, 2A + ε_A)` with
/// `A = [2 Σ_k Re⟨χ_k(T)|Δφ_k(T)⟩ + ΔJ_T] / Σ_k ‖Δφ_k(T)‖²`.
pub fn compute_sigma(chi_t: &[StateVector], delta_phi_t: &[StateVector], delta_j: f64, epsilon_a: f64) -> f64 {
    let denom: f64 = delta_phi_t.iter().map(StateVector::norm_sqr).sum();
    if denom == 0.0 || !denom.is_finite() {
        return -epsilon_a;
    }
    let overlap: f64 = chi_t.iter().zip(delta_phi_t).map(|(c, d)| c.inner(d).re).sum();
    let a = (2.0 * overlap + delta_j) / denom;
    if !a.is_finite() {
        return -epsilon_a;
    }
    -(epsilon_a.max(2.0 * a + epsilon_a))
}

/// Everything known about the current iterate.
#[derive(Debug, Clone)]
pub struct Iterate {
    pub field: ControlField,
    pub final_states: Vec<StateVector>,
    pub gate: GateMatrix,
    pub value: FunctionalValue,
    /// Forward trajectory under `field`, kept only for the second-order term.
    phi: Option<History>,
    /// Weight for the next update.
    pub sigma: f64,
}

/// What a single iteration produced besides the new iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub max_update: f64,
    pub sigma_used: f64,
    pub delta_j: f64,
}

/// The optimization problem: dynamics, logical basis, functional and settings.
#[derive(Debug, Clone)]
pub struct Krotov<'a> {
    pub propagator: &'a Propagator,
    pub logical: &'a LogicalBasis,
    pub functional: Functional,
    pub config: KrotovConfig,
    /// Multi-start setting for the per-iteration metrics.
    pub multi_start: MultiStart,
}

struct Lane {
    psi: StateVector,
    ws: StepWorkspace,
    scratch: Vec<C64>,
    overlap: [C64; 2],
    error: Option<Error>,
}

impl<'a> Krotov<'a> {
    pub fn new(propagator: &'a Propagator, logical: &'a LogicalBasis, functional: Functional, config: KrotovConfig) -> Self {
        Self { propagator, logical, functional, config, multi_start: MultiStart::default() }
    }

    fn second_order(&self) -> bool {
        self.config.second_order(&self.functional)
    }

    fn stride(&self, n_steps: usize, roles: usize) -> usize {
        let bytes = trajectory_bytes(self.propagator.dim(), n_steps + 1, 4) * roles;
        if bytes <= self.config.memory_budget_mb.saturating_mul(1 << 20) {
            1
        } else {
            checkpoint_stride(n_steps)
        }
    }

    fn roles(&self) -> usize {
        if self.second_order() {
            3
        } else {
            1
        }
    }

    /// Propagates the logical states under `field` and evaluates the functional.
    pub fn start(&self, field: ControlField) -> Result<Iterate> {
        self.config.validate()?;
        let initials = self.logical.states().to_vec();
        let (final_states, phi) = if self.second_order() {
            let stride = self.stride(field.n_steps(), self.roles());
            let histories = self.propagator.execution.map(initials, |s| {
                let mut b = HistoryBuilder::new(Direction::Forward, 1, field.n_steps(), stride);
                self.propagator
                    .forward_observed(&field, &s, |i, x| {
                        if b.wants(i) {
                            b.offer(0, i, &StateVector::from_vec(x.to_vec()))
                        }
                    })
                    .map(|_| b)
            });
            let mut merged = HistoryBuilder::new(Direction::Forward, 4, field.n_steps(), stride);
            for (k, b) in histories.into_iter().enumerate() {
                merged.absorb(k, b?);
            }
            let h = merged.finish(&field);
            (h.boundary(), Some(h))
        } else {
            let set = self.propagator.propagate_all_forward(&field, &initials, crate::propagator::Store::Final)?;
            (set.into_end_states(), None)
        };
        let gate = GateMatrix::from_states(&final_states, self.logical);
        let value = self.functional.evaluate(&gate)?;
        let sigma = if self.second_order() { -self.config.epsilon_a } else { 0.0 };
        Ok(Iterate { field, final_states, gate, value, phi, sigma })
    }

    /// One Krotov iteration from `current`, with the given shape function.
    /// The stored forward trajectory of `current` is consumed.
    pub fn iterate(&self, current: &mut Iterate, shape: &ShapeFunction) -> Result<(Iterate, StepReport)> {
        let field = &current.field;
        let n_steps = field.n_steps();
        if shape.len() != n_steps {
            return Err(Error::DimensionMismatch { expected: n_steps, found: shape.len() });
        }
        let second_order = self.second_order();
        let stride = self.stride(n_steps, self.roles());
        let prop = self.propagator;

        // backward co-states under the old field
        let chi_coeffs = self.functional.costates(&current.gate)?;
        let chi_t = embed_costates(&chi_coeffs, self.logical);
        let builders = prop.execution.map(chi_t.clone(), |c| {
            let mut b = HistoryBuilder::new(Direction::Backward, 1, n_steps, stride);
            prop.backward_observed(field, &c, |i, x| {
                if b.wants(i) {
                    b.offer(0, i, &StateVector::from_vec(x.to_vec()))
                }
            })
            .map(|_| b)
        });
        let mut chi_builder = HistoryBuilder::new(Direction::Backward, 4, n_steps, stride);
        for (k, b) in builders.into_iter().enumerate() {
            chi_builder.absorb(k, b?);
        }
        let mut chi = chi_builder.finish(field);
        let mut phi_old = current.phi.take();
        let sigma = if second_order { current.sigma } else { 0.0 };

        // forward sweep with immediate update
        let mut lanes: Vec<Lane> = self
            .logical
            .states()
            .into_iter()
            .map(|psi| Lane { psi, ws: prop.workspace(), scratch: vec![ZERO; prop.dim()], overlap: [ZERO; 2], error: None })
            .collect();
        let mut new_field = field.clone();
        let mut phi_new = second_order.then(|| HistoryBuilder::new(Direction::Forward, 4, n_steps, stride));
        let mut max_update = 0.0f64;
        let dt = field.dt();
        for n in 0..n_steps {
            chi.ensure(n, prop)?;
            if let Some(h) = phi_old.as_mut() {
                h.ensure(n, prop)?;
            }
            if let Some(b) = phi_new.as_mut() {
                for (k, lane) in lanes.iter().enumerate() {
                    b.offer(k, n, &lane.psi);
                }
            }
            let s = shape.samples()[n];
            let eps = if s == 0.0 {
                field.samples()[n]
            } else {
                let chi_ref = &chi;
                let phi_ref = phi_old.as_ref();
                prop.execution.for_each_mut(&mut lanes, |k, lane| {
                    let x = chi_ref.get(k, n).as_slice();
                    let delta = phi_ref.map(|h| lane.psi.sub(h.get(k, n)));
                    for c in 0..2 {
                        prop.apply_drive_derivative(c, lane.psi.as_slice(), &mut lane.scratch);
                        let mut g = dot(x, &lane.scratch);
                        if let Some(d) = &delta {
                            g += 0.5 * sigma * dot(d.as_slice(), &lane.scratch);
                        }
                        lane.overlap[c] = g;
                    }
                });
                let re: f64 = lanes.iter().map(|l| l.overlap[0].im).sum();
                let im: f64 = lanes.iter().map(|l| l.overlap[1].im).sum();
                let update = C64::new(re, im) * (s / self.config.lambda_a);
                if !(update.re.is_finite() && update.im.is_finite()) {
                    return Err(Error::NonFinite { step: n });
                }
                max_update = max_update.max(update.norm());
                field.samples()[n] + update
            };
            new_field.samples_mut()[n] = eps;
            prop.execution.for_each_mut(&mut lanes, |_, lane| {
                if let Err(e) = prop.step(eps, dt, lane.psi.as_mut_slice(), &mut lane.ws) {
                    lane.error = Some(e);
                }
            });
            if let Some(e) = lanes.iter_mut().find_map(|l| l.error.take()) {
                return Err(e);
            }
        }
        let final_states: Vec<StateVector> = lanes.into_iter().map(|l| l.psi).collect();
        let phi = phi_new.map(|mut b| {
            for (k, s) in final_states.iter().enumerate() {
                b.offer(k, n_steps, s);
            }
            b.finish(&new_field)
        });

        let gate = GateMatrix::from_states(&final_states, self.logical);
        let value = self.functional.evaluate(&gate)?;
        let delta_j = value.total - current.value.total;
        let next_sigma = if second_order {
            let delta_phi: Vec<StateVector> = final_states.iter().zip(&current.final_states).map(|(a, b)| a.sub(b)).collect();
            compute_sigma(&chi_t, &delta_phi, delta_j, self.config.epsilon_a)
        } else {
            0.0
        };
        let next = Iterate { field: new_field, final_states, gate, value, phi, sigma: next_sigma };
        Ok((next, StepReport { max_update, sigma_used: sigma, delta_j }))
    }

    fn metrics(&self, gate: &GateMatrix) -> Option<GateMetrics> {
        analyze(gate, None, self.multi_start).ok()
    }

    /// Iterates until the relative change drops below the configured ratio
    /// or the iteration budget is used up. `observer` sees every record row
    /// (including the starting point) and the field it belongs to.
    pub fn run_with(
        &self,
        guess: ControlField,
        shape: &ShapeFunction,
        mut observer: impl FnMut(&IterationRecord, &ControlField) -> Result<()>,
    ) -> Result<(ControlField, OptimizationRecord)> {
        let clock = Instant::now();
        let mut current = self.start(guess)?;
        let mut record = OptimizationRecord::default();
        let first = IterationRecord {
            iteration: 0,
            j_t: current.value.total,
            j_diag: current.value.j_diag,
            j_gamma: current.value.j_gamma,
            delta_j: 0.0,
            sigma: 0.0,
            n_props: 0,
            wall_s: clock.elapsed().as_secs_f64(),
            metrics: self.metrics(&current.gate),
        };
        observer(&first, &current.field)?;
        record.rows.push(first);
        for iteration in 1..=self.config.max_iterations {
            let wrap = |e: Error| Error::Iteration { iteration, source: Box::new(e) };
            let (next, report) = self.iterate(&mut current, shape).map_err(wrap)?;
            if report.delta_j > self.config.monotonic_tolerance {
                return Err(wrap(Error::NonMonotonic {
                    before: current.value.total,
                    after: next.value.total,
                    increase: report.delta_j,
                }));
            }
            let row = IterationRecord {
                iteration,
                j_t: next.value.total,
                j_diag: next.value.j_diag,
                j_gamma: next.value.j_gamma,
                delta_j: report.delta_j,
                sigma: report.sigma_used,
                n_props: 2 * iteration,
                wall_s: clock.elapsed().as_secs_f64(),
                metrics: self.metrics(&next.gate),
            };
            log::debug!("iteration {iteration}: J_T = {:.6e}, dJ = {:.3e}", row.j_t, row.delta_j);
            observer(&row, &next.field)?;
            record.rows.push(row);
            let ratio = report.delta_j.abs() / next.value.total.max(1e-15);
            current = next;
            if ratio < self.config.convergence_ratio {
                record.converged = true;
                break;
            }
        }
        Ok((current.field, record))
    }

    pub fn run(&self, guess: ControlField, shape: &ShapeFunction) -> Result<(ControlField, OptimizationRecord)> {
        self.run_with(guess, shape, |_, _| Ok(()))
    }
}

/// `(∂J/∂Re ε_n, ∂J/∂Im ε_n)` for every interval, packed as a complex number.
/// Overlaps are taken at interval midpoints.
pub fn gradient(
    propagator: &Propagator,
    logical: &LogicalBasis,
    functional: &Functional,
    field: &ControlField,
) -> Result<Vec<C64>> {
    use crate::propagator::Store;
    let initials = logical.states().to_vec();
    let phi = propagator.propagate_all_forward(field, &initials, Store::All)?;
    let gate = GateMatrix::from_states(&phi.end_states(), logical);
    let chi_t = embed_costates(&functional.costates(&gate)?, logical);
    let chi = propagator.propagate_all_backward(field, &chi_t, Store::All)?;
    let dt = field.dt();
    let per_state = propagator.execution.map((0..4).collect(), |k: usize| -> Result<Vec<C64>> {
        let mut ws = propagator.workspace();
        let mut y = vec![ZERO; propagator.dim()];
        let mut out = Vec::with_capacity(field.n_steps());
        for (n, &eps) in field.samples().iter().enumerate() {
            let mut p = phi.trajectories[k].states[n].clone();
            propagator.step(eps, 0.5 * dt, p.as_mut_slice(), &mut ws)?;
            let mut c = chi.trajectories[k].states[n + 1].clone();
            propagator.step(eps, -0.5 * dt, c.as_mut_slice(), &mut ws)?;
            let mut g = [0.0; 2];
            for (ctrl, gc) in g.iter_mut().enumerate() {
                propagator.apply_drive_derivative(ctrl, p.as_slice(), &mut y);
                *gc = -2.0 * dt * dot(c.as_slice(), &y).im;
            }
            out.push(C64::new(g[0], g[1]));
        }
        Ok(out)
    });
    let per_state: Vec<Vec<C64>> = per_state.into_iter().collect::<Result<_>>()?;
    Ok((0..field.n_steps()).map(|n| per_state.iter().map(|g| g[n]).sum()).collect())
}

//! Piecewise-constant propagation of the Schrödinger equation.
//!
//! Each interval applies `exp(-i H(ε_n) dt)` exactly up to the Chebyshev
//! truncation bound, with `H(ε) = H0 + 2π[Re ε H_re + Im ε H_im]`.

use crate::chebyshev::{apply_exponential, Csr, ExpansionOptions, Workspace};
use crate::error::{Error, Result};
use crate::linalg::{OperatorMatrix, StateVector, C64, ZERO};
use crate::parallel::Execution;
use crate::pulse::ControlField;
use crate::system::{TransmonSystem, MHZ_TO_RAD_PER_NS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Which states a propagation keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Store {
    /// Only the state at the end of the propagation.
    Final,
    /// Every grid point `t_0 ..= t_N`.
    All,
}

/// States of one propagation, in chronological order.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub direction: Direction,
    pub dt: f64,
    /// `n_steps + 1` states at grid points, or a single final state
    /// (`t = T` forward, `t = 0` backward).
    pub states: Vec<StateVector>,
}

impl Trajectory {
    /// The state where the propagation ended.
    pub fn end(&self) -> &StateVector {
        match self.direction {
            Direction::Forward => self.states.last().unwrap(),
            Direction::Backward => &self.states[0],
        }
    }

    pub fn into_end(mut self) -> StateVector {
        match self.direction {
            Direction::Forward => self.states.pop().unwrap(),
            Direction::Backward => self.states.swap_remove(0),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.states.len() > 1
    }
}

/// One trajectory per logical basis state.
#[derive(Debug, Clone)]
pub struct TrajectorySet {
    pub trajectories: Vec<Trajectory>,
}

impl TrajectorySet {
    pub fn end_states(&self) -> Vec<StateVector> {
        self.trajectories.iter().map(|t| t.end().clone()).collect()
    }

    pub fn into_end_states(self) -> Vec<StateVector> {
        self.trajectories.into_iter().map(Trajectory::into_end).collect()
    }
}

/// Per-thread scratch space for single steps.
#[derive(Debug, Clone)]
pub struct StepWorkspace {
    values: Vec<C64>,
    cheb: Workspace,
}

/// The driven Hamiltonian in a merged sparsity pattern, ready to propagate.
#[derive(Debug, Clone)]
pub struct Propagator {
    dim: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    drift: Vec<C64>,
    drive_re: Vec<C64>,
    drive_im: Vec<C64>,
    pub options: ExpansionOptions,
    pub execution: Execution,
}

impl Propagator {
    pub fn new(system: &TransmonSystem) -> Self {
        Self::from_operators(&system.drift, &system.drive_re, &system.drive_im)
    }

    pub fn from_operators(drift: &OperatorMatrix, drive_re: &OperatorMatrix, drive_im: &OperatorMatrix) -> Self {
        let dim = drift.dim();
        assert_eq!(drive_re.dim(), dim);
        assert_eq!(drive_im.dim(), dim);
        let pattern = OperatorMatrix::from_triplets(
            dim,
            drift
                .entries()
                .chain(drive_re.entries())
                .chain(drive_im.entries())
                .map(|(r, c, _)| (r, c, C64::new(1.0, 0.0))),
        );
        let (indptr, indices, _) = pattern.raw_parts();
        let gather = |m: &OperatorMatrix| -> Vec<C64> {
            (0..dim).flat_map(|r| (indptr[r]..indptr[r + 1]).map(move |p| (r, p))).map(|(r, p)| m.get(r, indices[p])).collect()
        };
        Self {
            dim,
            drift: gather(drift),
            drive_re: gather(drive_re),
            drive_im: gather(drive_im),
            indptr: indptr.to_vec(),
            indices: indices.to_vec(),
            options: ExpansionOptions::default(),
            execution: Execution::default(),
        }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn workspace(&self) -> StepWorkspace {
        StepWorkspace { values: vec![ZERO; self.drift.len()], cheb: Workspace::new(self.dim) }
    }

    /// Applies `∂H/∂(Re ε)` (`control = 0`) or `∂H/∂(Im ε)` (`control = 1`),
    /// in rad/ns per MHz, to `x`.
    pub fn apply_drive_derivative(&self, control: usize, x: &[C64], y: &mut [C64]) {
        let vals = if control == 0 { &self.drive_re } else { &self.drive_im };
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = ZERO;
            for p in self.indptr[r]..self.indptr[r + 1] {
                acc += vals[p] * x[self.indices[p]];
            }
            *out = acc * MHZ_TO_RAD_PER_NS;
        }
    }

    fn assemble(&self, eps: C64, values: &mut [C64]) {
        let re = eps.re * MHZ_TO_RAD_PER_NS;
        let im = eps.im * MHZ_TO_RAD_PER_NS;
        for (((v, d), a), b) in values.iter_mut().zip(&self.drift).zip(&self.drive_re).zip(&self.drive_im) {
            *v = d + a * re + b * im;
        }
    }

    /// `psi ← exp(-i H(ε) dt) psi`; negative `dt` steps backward in time.
    pub fn step(&self, eps: C64, dt: f64, psi: &mut [C64], ws: &mut StepWorkspace) -> Result<usize> {
        if psi.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: psi.len() });
        }
        self.assemble(eps, &mut ws.values);
        let h = Csr { indptr: &self.indptr, indices: &self.indices, values: &ws.values };
        apply_exponential(h, h.gershgorin(), dt, psi, &mut ws.cheb, &self.options)
    }

    /// Forward propagation from `t = 0`, calling `observer(i, state)` at every
    /// grid point `t_i` (including `t_0` and `t_N`).
    pub fn forward_observed(
        &self,
        field: &ControlField,
        initial: &StateVector,
        mut observer: impl FnMut(usize, &[C64]),
    ) -> Result<StateVector> {
        let mut psi = initial.clone();
        let mut ws = self.workspace();
        observer(0, psi.as_slice());
        for (i, &eps) in field.samples().iter().enumerate() {
            self.step(eps, field.dt(), psi.as_mut_slice(), &mut ws)?;
            observer(i + 1, psi.as_slice());
        }
        Ok(psi)
    }

    /// Backward propagation from `t = T`, calling `observer(i, state)` at every
    /// grid point, from `i = N` down to `0`.
    pub fn backward_observed(
        &self,
        field: &ControlField,
        boundary: &StateVector,
        mut observer: impl FnMut(usize, &[C64]),
    ) -> Result<StateVector> {
        let mut chi = boundary.clone();
        let mut ws = self.workspace();
        let n = field.n_steps();
        observer(n, chi.as_slice());
        for i in (0..n).rev() {
            self.step(field.samples()[i], -field.dt(), chi.as_mut_slice(), &mut ws)?;
            observer(i, chi.as_slice());
        }
        Ok(chi)
    }

    pub fn propagate_forward(&self, field: &ControlField, initial: &StateVector, store: Store) -> Result<Trajectory> {
        self.check_dim(initial)?;
        let mut states = Vec::new();
        let last = self.forward_observed(field, initial, |_, s| {
            if store == Store::All {
                states.push(StateVector::from_vec(s.to_vec()));
            }
        })?;
        if store == Store::Final {
            states.push(last);
        }
        Ok(Trajectory { direction: Direction::Forward, dt: field.dt(), states })
    }

    /// Propagates a co-state from `t = T` to `t = 0` under the same (Hermitian)
    /// Hamiltonian. The co-state norm is left untouched.
    pub fn propagate_backward(&self, field: &ControlField, boundary: &StateVector, store: Store) -> Result<Trajectory> {
        self.check_dim(boundary)?;
        let mut states = Vec::new();
        let first = self.backward_observed(field, boundary, |_, s| {
            if store == Store::All {
                states.push(StateVector::from_vec(s.to_vec()));
            }
        })?;
        if store == Store::All {
            states.reverse();
        } else {
            states.push(first);
        }
        Ok(Trajectory { direction: Direction::Backward, dt: field.dt(), states })
    }

    /// Forward-propagates every initial state, fanning out per
    /// [`Self::execution`].
    pub fn propagate_all_forward(&self, field: &ControlField, initials: &[StateVector], store: Store) -> Result<TrajectorySet> {
        let results = self.execution.map(initials.iter().collect(), |s| self.propagate_forward(field, s, store));
        Ok(TrajectorySet { trajectories: results.into_iter().collect::<Result<_>>()? })
    }

    pub fn propagate_all_backward(&self, field: &ControlField, boundaries: &[StateVector], store: Store) -> Result<TrajectorySet> {
        let results = self.execution.map(boundaries.iter().collect(), |s| self.propagate_backward(field, s, store));
        Ok(TrajectorySet { trajectories: results.into_iter().collect::<Result<_>>()? })
    }

    fn check_dim(&self, s: &StateVector) -> Result<()> {
        if s.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: s.dim() });
        }
        Ok(())
    }
}

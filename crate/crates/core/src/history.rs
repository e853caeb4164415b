//! Grid-point states of the four logical trajectories, held either in full or
//! as checkpoints from which one segment at a time is recomputed.

use crate::error::Result;
use crate::linalg::StateVector;
use crate::propagator::{Direction, Propagator};
use crate::pulse::ControlField;

/// Bytes needed to hold `n_states` grid points of `n_traj` trajectories.
pub fn trajectory_bytes(dim: usize, n_grid: usize, n_traj: usize) -> usize {
    dim * n_grid * n_traj * std::mem::size_of::<crate::linalg::C64>()
}

/// Checkpoint stride that keeps storage near `2 sqrt(N)` states per trajectory.
pub fn checkpoint_stride(n_steps: usize) -> usize {
    ((n_steps as f64).sqrt().ceil() as usize).max(1)
}

#[derive(Debug, Clone)]
pub struct History {
    direction: Direction,
    n_steps: usize,
    /// Grid stride between checkpoints; 1 means everything is stored.
    stride: usize,
    /// `[k]` → `(grid index, state)` sorted by grid index.
    checkpoints: Vec<Vec<(usize, StateVector)>>,
    /// Field the trajectory was propagated under; needed only to rebuild.
    field: Option<ControlField>,
    loaded: Option<(usize, usize)>,
    /// `[k][n - lo]` for the loaded segment `[lo, hi]`.
    buffer: Vec<Vec<StateVector>>,
}

/// Collects states during a propagation, keeping only what the stride asks for.
#[derive(Debug, Clone)]
pub struct HistoryBuilder {
    direction: Direction,
    n_steps: usize,
    stride: usize,
    checkpoints: Vec<Vec<(usize, StateVector)>>,
}

impl HistoryBuilder {
    pub fn new(direction: Direction, n_traj: usize, n_steps: usize, stride: usize) -> Self {
        Self { direction, n_steps, stride: stride.max(1), checkpoints: vec![Vec::new(); n_traj] }
    }

    pub fn wants(&self, n: usize) -> bool {
        n % self.stride == 0 || n == self.n_steps
    }

    /// Records the state of trajectory `k` at grid index `n` if it is a checkpoint.
    pub fn offer(&mut self, k: usize, n: usize, state: &StateVector) {
        if self.wants(n) {
            self.checkpoints[k].push((n, state.clone()));
        }
    }

    /// Moves the single trajectory collected by `single` into slot `k`.
    pub fn absorb(&mut self, k: usize, single: HistoryBuilder) {
        assert_eq!(single.checkpoints.len(), 1);
        self.checkpoints[k] = single.checkpoints.into_iter().next().unwrap();
    }

    pub fn finish(mut self, field: &ControlField) -> History {
        for c in &mut self.checkpoints {
            c.sort_by_key(|(n, _)| *n);
        }
        let field = (self.stride > 1).then(|| field.clone());
        History {
            direction: self.direction,
            n_steps: self.n_steps,
            stride: self.stride,
            checkpoints: self.checkpoints,
            field,
            loaded: None,
            buffer: Vec::new(),
        }
    }
}

impl History {
    pub fn is_full(&self) -> bool {
        self.stride == 1
    }

    pub fn n_trajectories(&self) -> usize {
        self.checkpoints.len()
    }

    /// Makes grid index `n` readable through [`Self::get`], recomputing its
    /// segment from the nearest checkpoint if necessary.
    pub fn ensure(&mut self, n: usize, propagator: &Propagator) -> Result<()> {
        assert!(n <= self.n_steps);
        if self.is_full() {
            return Ok(());
        }
        if let Some((lo, hi)) = self.loaded {
            if (lo..=hi).contains(&n) {
                return Ok(());
            }
        }
        let lo = (n / self.stride) * self.stride;
        let hi = (lo + self.stride).min(self.n_steps);
        let field = self.field.as_ref().expect("checkpointed history keeps its field");
        let start_index = match self.direction {
            Direction::Forward => lo,
            Direction::Backward => hi,
        };
        let starts: Vec<StateVector> = self
            .checkpoints
            .iter()
            .map(|c| {
                let p = c.binary_search_by_key(&start_index, |(i, _)| *i).expect("checkpoint present");
                c[p].1.clone()
            })
            .collect();
        let direction = self.direction;
        let segments = propagator.execution.map(starts, |start| -> Result<Vec<StateVector>> {
            let mut ws = propagator.workspace();
            let mut psi = start;
            let mut out = Vec::with_capacity(hi - lo + 1);
            out.push(psi.clone());
            match direction {
                Direction::Forward => {
                    for i in lo..hi {
                        propagator.step(field.samples()[i], field.dt(), psi.as_mut_slice(), &mut ws)?;
                        out.push(psi.clone());
                    }
                }
                Direction::Backward => {
                    for i in (lo..hi).rev() {
                        propagator.step(field.samples()[i], -field.dt(), psi.as_mut_slice(), &mut ws)?;
                        out.push(psi.clone());
                    }
                    out.reverse();
                }
            }
            Ok(out)
        });
        self.buffer = segments.into_iter().collect::<Result<_>>()?;
        self.loaded = Some((lo, hi));
        Ok(())
    }

    /// State of trajectory `k` at grid index `n`; call [`Self::ensure`] first.
    pub fn get(&self, k: usize, n: usize) -> &StateVector {
        if self.is_full() {
            let (i, s) = &self.checkpoints[k][n];
            debug_assert_eq!(*i, n);
            return s;
        }
        let (lo, hi) = self.loaded.expect("segment loaded");
        assert!((lo..=hi).contains(&n), "grid index {n} outside loaded segment [{lo}, {hi}]");
        &self.buffer[k][n - lo]
    }

    /// Final (`t = T`) states of a forward history, or initial states of a
    /// backward one; always stored.
    pub fn boundary(&self) -> Vec<StateVector> {
        let n = match self.direction {
            Direction::Forward => self.n_steps,
            Direction::Backward => 0,
        };
        self.checkpoints
            .iter()
            .map(|c| {
                let p = c.binary_search_by_key(&n, |(i, _)| *i).expect("boundary stored");
                c[p].1.clone()
            })
            .collect()
    }
}

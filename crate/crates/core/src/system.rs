//! Two transmons coupled through a shared cavity, in the frame rotating at the
//! drive frequency.
//!
//! Basis ordering is `|q1⟩ ⊗ |q2⟩ ⊗ |n_cav⟩` with the cavity index fastest:
//! `index = (q1 * qubit_levels + q2) * cavity_levels + n`.
//!
//! All configured frequencies are linear (GHz for mode frequencies, MHz for
//! anharmonicities, couplings and drive amplitudes). They are converted to
//! angular units (rad/ns) once, here.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, OperatorMatrix, StateVector, C64, I, ONE};

pub const TWO_PI: f64 = 2.0 * PI;

/// Conversion of a control amplitude in MHz to rad/ns.
pub const MHZ_TO_RAD_PER_NS: f64 = TWO_PI * 1e-3;

/// How the real lab-frame pulse `E0 s(t) cos(ω_d t)` maps onto the complex
/// rotating-frame envelope entering `ε*(t) a + ε(t) a†`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvelopeConvention {
    /// Rotating-wave approximation: the envelope is `E0 s(t) / 2`.
    Rwa,
    /// The envelope is `E0 s(t)`.
    Direct,
}

impl EnvelopeConvention {
    pub fn factor(self) -> f64 {
        match self {
            Self::Rwa => 0.5,
            Self::Direct => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemParams {
    /// GHz
    pub cavity_freq: f64,
    /// GHz
    pub qubit1_freq: f64,
    /// GHz
    pub qubit2_freq: f64,
    /// GHz
    pub drive_freq: f64,
    /// MHz
    pub anharmonicity1: f64,
    /// MHz
    pub anharmonicity2: f64,
    /// MHz
    pub coupling1: f64,
    /// MHz
    pub coupling2: f64,
    pub qubit_levels: usize,
    pub cavity_levels: usize,
    pub envelope: EnvelopeConvention,
    pub logical_basis: LogicalBasisKind,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            cavity_freq: 8.10,
            qubit1_freq: 6.85,
            qubit2_freq: 7.25,
            drive_freq: 8.14,
            anharmonicity1: -300.0,
            anharmonicity2: -300.0,
            coupling1: 70.0,
            coupling2: 70.0,
            qubit_levels: 6,
            cavity_levels: 70,
            envelope: EnvelopeConvention::Rwa,
            logical_basis: LogicalBasisKind::Dressed,
        }
    }
}

impl SystemParams {
    /// Default physics with 3 qubit and 15 cavity levels.
    pub fn reduced() -> Self {
        Self { qubit_levels: 3, cavity_levels: 15, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.qubit_levels < 2 {
            return Err(Error::InvalidParameter(format!(
                "qubit_levels must be at least 2, got {}",
                self.qubit_levels
            )));
        }
        if self.cavity_levels < 2 {
            return Err(Error::InvalidParameter(format!(
                "cavity_levels must be at least 2, got {}",
                self.cavity_levels
            )));
        }
        let values = [
            ("cavity_freq", self.cavity_freq),
            ("qubit1_freq", self.qubit1_freq),
            ("qubit2_freq", self.qubit2_freq),
            ("drive_freq", self.drive_freq),
            ("anharmonicity1", self.anharmonicity1),
            ("anharmonicity2", self.anharmonicity2),
            ("coupling1", self.coupling1),
            ("coupling2", self.coupling2),
        ];
        if let Some((name, _)) = values.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{name} is not finite")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.qubit_levels * self.qubit_levels * self.cavity_levels
    }

    pub fn index(&self, q1: usize, q2: usize, n: usize) -> usize {
        (q1 * self.qubit_levels + q2) * self.cavity_levels + n
    }

    pub fn decompose(&self, index: usize) -> (usize, usize, usize) {
        let n = index % self.cavity_levels;
        let q = index / self.cavity_levels;
        (q / self.qubit_levels, q % self.qubit_levels, n)
    }

    /// Bare indices of `|00,0⟩, |01,0⟩, |10,0⟩, |11,0⟩`.
    pub fn logical_indices(&self) -> [usize; 4] {
        [self.index(0, 0, 0), self.index(0, 1, 0), self.index(1, 0, 0), self.index(1, 1, 0)]
    }
}

/// Drift Hamiltonian in rad/ns.
pub fn build_drift_hamiltonian(params: &SystemParams) -> Result<OperatorMatrix> {
    params.validate()?;
    let det1 = TWO_PI * (params.qubit1_freq - params.drive_freq);
    let det2 = TWO_PI * (params.qubit2_freq - params.drive_freq);
    let det_c = TWO_PI * (params.cavity_freq - params.drive_freq);
    let alpha1 = TWO_PI * params.anharmonicity1 * 1e-3;
    let alpha2 = TWO_PI * params.anharmonicity2 * 1e-3;
    let g1 = TWO_PI * params.coupling1 * 1e-3;
    let g2 = TWO_PI * params.coupling2 * 1e-3;
    let (nq, nc) = (params.qubit_levels, params.cavity_levels);

    let mut triplets = Vec::with_capacity(params.dim() * 5);
    for q1 in 0..nq {
        for q2 in 0..nq {
            for n in 0..nc {
                let row = params.index(q1, q2, n);
                let (f1, f2, fc) = (q1 as f64, q2 as f64, n as f64);
                let energy = det1 * f1
                    + 0.5 * alpha1 * f1 * (f1 - 1.0)
                    + det2 * f2
                    + 0.5 * alpha2 * f2 * (f2 - 1.0)
                    + det_c * fc;
                triplets.push((row, row, C64::new(energy, 0.0)));
                // b_q† a and its conjugate b_q a†
                if n > 0 {
                    let amp = fc.sqrt();
                    if q1 + 1 < nq {
                        let col = params.index(q1 + 1, q2, n - 1);
                        let m = C64::new(g1 * (f1 + 1.0).sqrt() * amp, 0.0);
                        triplets.push((col, row, m));
                        triplets.push((row, col, m));
                    }
                    if q2 + 1 < nq {
                        let col = params.index(q1, q2 + 1, n - 1);
                        let m = C64::new(g2 * (f2 + 1.0).sqrt() * amp, 0.0);
                        triplets.push((col, row, m));
                        triplets.push((row, col, m));
                    }
                }
            }
        }
    }
    Ok(OperatorMatrix::from_triplets(params.dim(), triplets))
}

/// The pair `(a + a†, i(a† − a))`, dimensionless.
///
/// The full Hamiltonian is `H0 + 2π [Re ε H_re + Im ε H_im]` with `ε` converted
/// to GHz.
pub fn build_drive_operators(params: &SystemParams) -> Result<(OperatorMatrix, OperatorMatrix)> {
    params.validate()?;
    let mut re = Vec::new();
    let mut im = Vec::new();
    for q1 in 0..params.qubit_levels {
        for q2 in 0..params.qubit_levels {
            for n in 1..params.cavity_levels {
                // ⟨n|a†|n-1⟩ = √n
                let upper = params.index(q1, q2, n);
                let lower = params.index(q1, q2, n - 1);
                let amp = (n as f64).sqrt();
                re.push((upper, lower, ONE * amp));
                re.push((lower, upper, ONE * amp));
                im.push((upper, lower, I * amp));
                im.push((lower, upper, -I * amp));
            }
        }
    }
    let dim = params.dim();
    Ok((OperatorMatrix::from_triplets(dim, re), OperatorMatrix::from_triplets(dim, im)))
}

/// Diagonal number operator of one subsystem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Cavity,
    Qubit1,
    Qubit2,
}

pub fn number_operator(params: &SystemParams, mode: Mode) -> OperatorMatrix {
    let triplets = (0..params.dim()).map(|i| {
        let (q1, q2, n) = params.decompose(i);
        let count = match mode {
            Mode::Cavity => n,
            Mode::Qubit1 => q1,
            Mode::Qubit2 => q2,
        };
        (i, i, C64::new(count as f64, 0.0))
    });
    OperatorMatrix::from_triplets(params.dim(), triplets)
}

/// Which states encode `|00⟩, |01⟩, |10⟩, |11⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LogicalBasisKind {
    /// Eigenstates of the drift Hamiltonian continuously connected to the bare
    /// states (largest bare overlap within the same excitation number).
    #[default]
    Dressed,
    /// Bare product states `|q1 q2⟩ ⊗ |0_cav⟩`.
    Bare,
}

/// The four logical states as sparse real-or-complex vectors in the full space.
#[derive(Debug, Clone, PartialEq)]
pub struct LogicalBasis {
    dim: usize,
    /// `(index, amplitude)` support of each logical state.
    support: [Vec<(usize, C64)>; 4],
}

impl LogicalBasis {
    pub fn bare(params: &SystemParams) -> Self {
        let support = params.logical_indices().map(|i| vec![(i, ONE)]);
        Self { dim: params.dim(), support }
    }

    /// Dressed logical states of `drift`. The drift conserves
    /// `q1 + q2 + n`, so each state comes from a small dense block.
    pub fn dressed(params: &SystemParams, drift: &OperatorMatrix) -> Self {
        let support = params.logical_indices().map(|bare| {
            let (a, b, n) = params.decompose(bare);
            let excitations = a + b + n;
            let block: Vec<usize> = (0..params.dim())
                .filter(|&i| {
                    let (a, b, n) = params.decompose(i);
                    a + b + n == excitations
                })
                .collect();
            let m = block.len();
            let dense: Vec<f64> = block
                .iter()
                .flat_map(|&r| block.iter().map(move |&c| (r, c)))
                .map(|(r, c)| {
                    let v = drift.get(r, c);
                    debug_assert!(v.im.abs() <= 1e-12 * v.norm().max(1.0));
                    v.re
                })
                .collect();
            let (_, vecs) = symmetric_eigen(&dense, m);
            let pos = block.iter().position(|&i| i == bare).expect("bare state in its own block");
            let best = (0..m).max_by(|&x, &y| vecs[pos * m + x].abs().total_cmp(&vecs[pos * m + y].abs())).unwrap();
            let sign = vecs[pos * m + best].signum();
            block
                .iter()
                .enumerate()
                .map(|(r, &i)| (i, C64::new(sign * vecs[r * m + best], 0.0)))
                .filter(|(_, v)| v.norm() > 0.0)
                .collect()
        });
        Self { dim: params.dim(), support }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support(&self, l: usize) -> &[(usize, C64)] {
        &self.support[l]
    }

    pub fn state(&self, l: usize) -> StateVector {
        let mut s = StateVector::zeros(self.dim);
        for &(i, v) in &self.support[l] {
            s[i] = v;
        }
        s
    }

    pub fn states(&self) -> [StateVector; 4] {
        std::array::from_fn(|l| self.state(l))
    }

    /// `⟨l|ψ⟩`
    pub fn overlap(&self, l: usize, psi: &[C64]) -> C64 {
        self.support[l].iter().map(|&(i, v)| v.conj() * psi[i]).sum()
    }

    /// `Σ_l c_l |l⟩`
    pub fn combine(&self, coeffs: &[C64; 4]) -> StateVector {
        let mut s = StateVector::zeros(self.dim);
        for (l, c) in coeffs.iter().enumerate() {
            for &(i, v) in &self.support[l] {
                s[i] += c * v;
            }
        }
        s
    }
}

/// Everything needed to propagate the driven system, built once.
#[derive(Debug, Clone)]
pub struct TransmonSystem {
    pub params: SystemParams,
    pub drift: OperatorMatrix,
    pub drive_re: OperatorMatrix,
    pub drive_im: OperatorMatrix,
    pub logical: LogicalBasis,
}

impl TransmonSystem {
    pub fn new(params: SystemParams) -> Result<Self> {
        let drift = build_drift_hamiltonian(&params)?;
        let (drive_re, drive_im) = build_drive_operators(&params)?;
        let logical = match params.logical_basis {
            LogicalBasisKind::Dressed => LogicalBasis::dressed(&params, &drift),
            LogicalBasisKind::Bare => LogicalBasis::bare(&params),
        };
        Ok(Self { params, drift, drive_re, drive_im, logical })
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    /// Bare product-state indices of `|00,0⟩ .. |11,0⟩`.
    pub fn logical_indices(&self) -> [usize; 4] {
        self.params.logical_indices()
    }

    /// The four logical basis states `|00⟩, |01⟩, |10⟩, |11⟩`.
    pub fn logical_states(&self) -> [StateVector; 4] {
        self.logical.states()
    }
}

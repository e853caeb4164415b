//! Final-time functionals on the projected logical gate and their co-state
//! boundary values `-∂J/∂⟨φ_k(T)|`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{StateVector, C64, ONE, ZERO};
use crate::system::LogicalBasis;

/// Reference duration of the duration penalty in [`eval_splx`], ns.
pub const SPLX_REFERENCE_DURATION: f64 = 200.0;

/// Tolerance on `max |O†O - 1|` for target gates.
pub const UNITARY_TOLERANCE: f64 = 1e-8;

/// Projection of the evolution onto the logical subspace:
/// `U[l][k] = ⟨l|φ_k(T)⟩` for `l, k ∈ {00, 01, 10, 11}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateMatrix(pub [[C64; 4]; 4]);

impl GateMatrix {
    pub fn zeros() -> Self {
        Self([[ZERO; 4]; 4])
    }

    pub fn identity() -> Self {
        Self::diagonal([ONE; 4])
    }

    pub fn diagonal(d: [C64; 4]) -> Self {
        let mut m = Self::zeros();
        for (k, v) in d.into_iter().enumerate() {
            m.0[k][k] = v;
        }
        m
    }

    pub fn from_phases(phases: [f64; 4]) -> Self {
        Self::diagonal(phases.map(|p| C64::from_polar(1.0, p)))
    }

    /// Builds the gate `U[l][k] = ⟨l|φ_k⟩` from the four propagated states.
    pub fn from_states(states: &[StateVector], logical: &LogicalBasis) -> Self {
        assert_eq!(states.len(), 4, "need one propagated state per logical basis state");
        let mut m = Self::zeros();
        for (k, s) in states.iter().enumerate() {
            for l in 0..4 {
                m.0[l][k] = logical.overlap(l, s.as_slice());
            }
        }
        m
    }

    pub fn get(&self, l: usize, k: usize) -> C64 {
        self.0[l][k]
    }

    /// Diagonal overlaps `τ_k = ⟨k|U|k⟩`.
    pub fn taus(&self) -> [C64; 4] {
        [self.0[0][0], self.0[1][1], self.0[2][2], self.0[3][3]]
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros();
        for l in 0..4 {
            for k in 0..4 {
                m.0[l][k] = self.0[k][l].conj();
            }
        }
        m
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut m = Self::zeros();
        for l in 0..4 {
            for k in 0..4 {
                m.0[l][k] = (0..4).map(|j| self.0[l][j] * other.0[j][k]).sum();
            }
        }
        m
    }

    pub fn trace(&self) -> C64 {
        self.taus().iter().sum()
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self(self.0.map(|row| row.map(|v| v * factor)))
    }

    pub fn column_norms(&self) -> [f64; 4] {
        std::array::from_fn(|k| (0..4).map(|l| self.0[l][k].norm_sqr()).sum::<f64>().sqrt())
    }

    /// `max |U†U - 1|`
    pub fn unitarity_defect(&self) -> f64 {
        let p = self.adjoint().mul(self);
        let mut worst = 0.0f64;
        for l in 0..4 {
            for k in 0..4 {
                let id = if l == k { ONE } else { ZERO };
                worst = worst.max((p.0[l][k] - id).norm());
            }
        }
        worst
    }

    /// Frobenius distance.
    pub fn distance(&self, other: &Self) -> f64 {
        let mut s = 0.0;
        for l in 0..4 {
            for k in 0..4 {
                s += (self.0[l][k] - other.0[l][k]).norm_sqr();
            }
        }
        s.sqrt()
    }

    pub fn ensure_unitary(&self) -> Result<()> {
        let defect = self.unitarity_defect();
        if defect > UNITARY_TOLERANCE || !defect.is_finite() {
            return Err(Error::NonUnitaryTarget { defect });
        }
        Ok(())
    }
}

/// A functional value with the named contributions that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FunctionalValue {
    pub total: f64,
    pub j_diag: Option<f64>,
    pub j_gamma: Option<f64>,
    pub duration_term: Option<f64>,
}

/// `J_diag = 4 - Σ |τ_k|²`
pub fn j_diag(u: &GateMatrix) -> f64 {
    4.0 - u.taus().iter().map(|t| t.norm_sqr()).sum::<f64>()
}

/// `J_γ = 2 + 2 Re(τ00 τ01* τ10* τ11)`
pub fn j_gamma(u: &GateMatrix) -> f64 {
    let [t00, t01, t10, t11] = u.taus();
    let z = t00 * t01.conj() * t10.conj() * t11;
    2.0 + 2.0 * z.re
}

/// Square-modulus overlap `1 - |tr(O†U)|² / 16`.
pub fn eval_sm(u: &GateMatrix, target: &GateMatrix) -> Result<FunctionalValue> {
    target.ensure_unitary()?;
    let overlap = target.adjoint().mul(u).trace();
    Ok(FunctionalValue { total: 1.0 - overlap.norm_sqr() / 16.0, ..Default::default() })
}

/// `(J_diag + J_γ) / 8`; zero exactly for diagonal perfect entanglers.
pub fn eval_geo(u: &GateMatrix) -> FunctionalValue {
    let d = j_diag(u);
    let g = j_gamma(u);
    FunctionalValue { total: (d + g) / 8.0, j_diag: Some(d), j_gamma: Some(g), duration_term: None }
}

/// `J_diag + J_γ + T/T0` with `T0 = 200 ns`.
pub fn eval_splx(u: &GateMatrix, duration: f64) -> Result<FunctionalValue> {
    if !(duration > 0.0) {
        return Err(Error::InvalidParameter(format!("duration must be positive, got {duration}")));
    }
    let d = j_diag(u);
    let g = j_gamma(u);
    let t = duration / SPLX_REFERENCE_DURATION;
    Ok(FunctionalValue { total: d + g + t, j_diag: Some(d), j_gamma: Some(g), duration_term: Some(t) })
}

/// Logical-subspace components of the four co-states: `result[k][l] = ⟨l|χ_k(T)⟩`.
pub type CostateCoefficients = [[C64; 4]; 4];

/// Boundary co-states for the geometric functional, without the 1/8
/// prefactor: `-∂(J_diag + J_γ)/∂⟨φ_k|`, e.g. `χ_00 = (τ00 - τ01 τ10 τ11*)|00⟩`.
pub fn costate_boundary_geo(u: &GateMatrix) -> CostateCoefficients {
    let [t00, t01, t10, t11] = u.taus();
    let mut chi = [[ZERO; 4]; 4];
    chi[0][0] = t00 - t01 * t10 * t11.conj();
    chi[1][1] = t01 - t00 * t10.conj() * t11;
    chi[2][2] = t10 - t00 * t01.conj() * t11;
    chi[3][3] = t11 - t00.conj() * t01 * t10;
    chi
}

/// Boundary co-states for [`eval_sm`]: `χ_k = (1/16) tr(O†U) O|k⟩`.
pub fn costate_boundary_sm(u: &GateMatrix, target: &GateMatrix) -> Result<CostateCoefficients> {
    target.ensure_unitary()?;
    let overlap = target.adjoint().mul(u).trace() / 16.0;
    Ok(std::array::from_fn(|k| std::array::from_fn(|l| overlap * target.0[l][k])))
}

/// Embeds logical-subspace coefficients into full-space states.
pub fn embed_costates(chi: &CostateCoefficients, logical: &LogicalBasis) -> Vec<StateVector> {
    chi.iter().map(|coeffs| logical.combine(coeffs)).collect()
}

/// Final-time functional driving a gradient optimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Functional {
    /// Fixed target up to a global phase.
    SquareModulus { target: GateMatrix },
    /// Any diagonal perfect entangler.
    Geometric,
}

impl Functional {
    pub fn name(&self) -> &'static str {
        match self {
            Self::SquareModulus { .. } => "sm",
            Self::Geometric => "geo",
        }
    }

    pub fn evaluate(&self, u: &GateMatrix) -> Result<FunctionalValue> {
        match self {
            Self::SquareModulus { target } => {
                let mut v = eval_sm(u, target)?;
                v.j_diag = Some(j_diag(u));
                v.j_gamma = Some(j_gamma(u));
                Ok(v)
            }
            Self::Geometric => Ok(eval_geo(u)),
        }
    }

    /// `-∂J/∂⟨φ_k(T)|` for exactly the value returned by [`Self::evaluate`].
    pub fn costates(&self, u: &GateMatrix) -> Result<CostateCoefficients> {
        match self {
            Self::SquareModulus { target } => costate_boundary_sm(u, target),
            Self::Geometric => Ok(costate_boundary_geo(u).map(|row| row.map(|v| v / 8.0))),
        }
    }

    /// Whether the functional is non-convex in the states and needs the
    /// second-order update term.
    pub fn needs_second_order(&self) -> bool {
        matches!(self, Self::Geometric)
    }
}

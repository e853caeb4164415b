//! Gate-quality metrics for (near-)diagonal two-qubit gates.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::GateMatrix;
use crate::linalg::{StateVector, C64};
use crate::system::LogicalBasis;

/// Below this magnitude a diagonal element has no meaningful phase.
pub const PHASE_MAGNITUDE_FLOOR: f64 = 1e-12;

/// Non-local phase `γ = φ00 − φ01 − φ10 + φ11`, folded into `(−2π, 2π]`, and
/// the maximal concurrence `C = |sin(γ/2)|` of a diagonal gate.
pub fn nonlocal_phase(u: &GateMatrix) -> Result<(f64, f64)> {
    let phases = diagonal_phases(u)?;
    let gamma = fold_gamma(phases[0] - phases[1] - phases[2] + phases[3]);
    Ok((gamma, (0.5 * gamma).sin().abs()))
}

/// `arg τ_k` for the four diagonal elements.
pub fn diagonal_phases(u: &GateMatrix) -> Result<[f64; 4]> {
    let taus = u.taus();
    for (index, t) in taus.iter().enumerate() {
        if t.norm() <= PHASE_MAGNITUDE_FLOOR {
            return Err(Error::UndefinedPhase { index, magnitude: t.norm() });
        }
    }
    Ok(taus.map(|t| t.arg()))
}

fn fold_gamma(mut gamma: f64) -> f64 {
    while gamma > 2.0 * PI {
        gamma -= 2.0 * PI;
    }
    while gamma <= -2.0 * PI {
        gamma += 2.0 * PI;
    }
    gamma
}

/// `diag(e^{iφ00}, e^{iφ01}, e^{iφ10}, e^{i(π + φ01 + φ10 − φ00)})`
pub fn diagonal_perfect_entangler(phi00: f64, phi01: f64, phi10: f64) -> GateMatrix {
    GateMatrix::from_phases([phi00, phi01, phi10, PI + phi01 + phi10 - phi00])
}

/// Extra randomized starting points for [`closest_diagonal_pe_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MultiStart {
    pub seed: Option<u64>,
    pub random_starts: usize,
}

/// The diagonal perfect entangler closest to `u` in Frobenius norm.
pub fn closest_diagonal_pe(u: &GateMatrix) -> GateMatrix {
    closest_diagonal_pe_with(u, MultiStart::default())
}

/// Like [`closest_diagonal_pe`], optionally adding seeded random starts to
/// the eight grid starts.
pub fn closest_diagonal_pe_with(u: &GateMatrix, multi: MultiStart) -> GateMatrix {
    let d = u.taus();
    let seed = [d[0].arg(), d[1].arg(), d[2].arg()];
    let mut starts = Vec::with_capacity(8 + multi.random_starts);
    for mask in 0..8u32 {
        starts.push(std::array::from_fn(|j| seed[j] + if mask & (1 << j) != 0 { PI } else { 0.0 }));
    }
    if let Some(s) = multi.seed {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        for _ in 0..multi.random_starts {
            starts.push(std::array::from_fn(|_| rng.gen_range(-PI..PI)));
        }
    }
    let mut best = ([0.0; 3], f64::NEG_INFINITY);
    for start in starts {
        let candidate = newton_polish(&d, coordinate_ascent(&d, start));
        if candidate.1 > best.1 {
            best = candidate;
        }
    }
    diagonal_perfect_entangler(best.0[0], best.0[1], best.0[2])
}

/// `Σ_k Re(e^{-iθ_k} u_kk)` with `θ11` fixed by the perfect-entangler
/// constraint. Maximizing this minimizes the Frobenius distance.
fn overlap(d: &[C64; 4], t: [f64; 3]) -> f64 {
    let phases = [t[0], t[1], t[2], PI + t[1] + t[2] - t[0]];
    phases.iter().zip(d).map(|(p, u)| (C64::from_polar(1.0, -p) * u).re).sum()
}

/// Cyclic exact maximization over one phase at a time; each sub-problem is a
/// single sinusoid in that phase.
fn coordinate_ascent(d: &[C64; 4], mut t: [f64; 3]) -> ([f64; 3], f64) {
    let mut value = overlap(d, t);
    for _ in 0..10_000 {
        let w = d[0] - C64::from_polar(1.0, t[1] + t[2]) * d[3].conj();
        if w.norm() > 0.0 {
            t[0] = w.arg();
        }
        let w = d[1] - C64::from_polar(1.0, t[0] - t[2]) * d[3];
        if w.norm() > 0.0 {
            t[1] = w.arg();
        }
        let w = d[2] - C64::from_polar(1.0, t[0] - t[1]) * d[3];
        if w.norm() > 0.0 {
            t[2] = w.arg();
        }
        let next = overlap(d, t);
        let gain = next - value;
        value = next;
        if gain <= 1e-16 * value.abs().max(1.0) {
            break;
        }
    }
    (t, value)
}

/// Newton iterations on the three free phases; a step is kept only if it
/// does not lower the overlap.
fn newton_polish(d: &[C64; 4], (mut t, mut value): ([f64; 3], f64)) -> ([f64; 3], f64) {
    // θ = M t + (0, 0, 0, π)
    const M: [[f64; 3]; 4] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [-1.0, 1.0, 1.0]];
    for _ in 0..8 {
        let phases = [t[0], t[1], t[2], PI + t[1] + t[2] - t[0]];
        let z: [C64; 4] = std::array::from_fn(|k| C64::from_polar(1.0, -phases[k]) * d[k]);
        let mut grad = [0.0; 3];
        let mut hess = [[0.0; 3]; 3];
        for k in 0..4 {
            for a in 0..3 {
                grad[a] += M[k][a] * z[k].im;
                for b in 0..3 {
                    hess[a][b] -= M[k][a] * M[k][b] * z[k].re;
                }
            }
        }
        let Some(step) = solve3(hess, grad) else { break };
        let trial = [t[0] - step[0], t[1] - step[1], t[2] - step[2]];
        let trial_value = overlap(d, trial);
        if !(trial_value >= value - 1e-15) {
            break;
        }
        t = trial;
        value = trial_value;
        if step.iter().all(|s| s.abs() < 1e-15) {
            break;
        }
    }
    (t, value)
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(a);
    if d.abs() < 1e-14 {
        return None;
    }
    // Cramer's rule
    Some(std::array::from_fn(|col| {
        let mut m = a;
        for row in 0..3 {
            m[row][col] = b[row];
        }
        det(m) / d
    }))
}

/// `F_avg = (|tr(O†U)|² + tr(O†U U†O)) / 20`; returns `(F_avg, 1 − F_avg)`.
pub fn average_gate_fidelity(u: &GateMatrix, target: &GateMatrix) -> Result<(f64, f64)> {
    target.ensure_unitary()?;
    let m = target.adjoint().mul(u);
    let f = (m.trace().norm_sqr() + m.mul(&m.adjoint()).trace().re) / 20.0;
    Ok((f, 1.0 - f))
}

/// `1 − (1/4) Σ_k ‖P_L φ_k(T)‖²` with `P_L` the projector onto the logical
/// states.
pub fn population_loss(final_states: &[StateVector], logical: &LogicalBasis) -> f64 {
    let kept: f64 = final_states
        .iter()
        .map(|s| (0..4).map(|l| logical.overlap(l, s.as_slice()).norm_sqr()).sum::<f64>())
        .sum();
    1.0 - kept / final_states.len() as f64
}

/// Same as [`population_loss`], from the projected gate.
pub fn population_loss_of_gate(u: &GateMatrix) -> f64 {
    1.0 - u.column_norms().iter().map(|n| n * n).sum::<f64>() / 4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateMetrics {
    pub gamma: f64,
    pub concurrence: f64,
    #[serde(rename = "eps_C")]
    pub eps_c: f64,
    pub eps_pop: f64,
    pub eps_avg: f64,
    pub phases: [f64; 4],
    /// Phases of the gate `eps_avg` is measured against.
    pub target_phases: [f64; 4],
    /// First Weyl-chamber coordinate `γ/2` (the others vanish for diagonal gates).
    pub weyl_c1: f64,
}

/// Full metric set. `eps_avg` is measured against `reference` when given,
/// otherwise against the closest diagonal perfect entangler.
pub fn analyze(u: &GateMatrix, reference: Option<&GateMatrix>, multi: MultiStart) -> Result<GateMetrics> {
    let phases = diagonal_phases(u)?;
    let (gamma, concurrence) = nonlocal_phase(u)?;
    let target = match reference {
        Some(r) => *r,
        None => closest_diagonal_pe_with(u, multi),
    };
    let (_, eps_avg) = average_gate_fidelity(u, &target)?;
    Ok(GateMetrics {
        gamma,
        concurrence,
        eps_c: 1.0 - concurrence,
        eps_pop: population_loss_of_gate(u),
        eps_avg,
        phases,
        target_phases: target.taus().map(|t| t.arg()),
        weyl_c1: 0.5 * gamma,
    })
}

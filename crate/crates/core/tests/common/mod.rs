//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use qgate::functionals::GateMatrix;
use qgate::linalg::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries uniformly in the unit square, no structure at all.
pub fn random_gate(rng: &mut ChaCha8Rng) -> GateMatrix {
    GateMatrix(std::array::from_fn(|_| std::array::from_fn(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))))
}

/// Random diagonal phases, slightly shrunk moduli and small off-diagonal leakage.
pub fn near_diagonal_gate(rng: &mut ChaCha8Rng, leak: f64) -> GateMatrix {
    let mut u = GateMatrix::zeros();
    for l in 0..4 {
        for k in 0..4 {
            u.0[l][k] = if l == k {
                C64::from_polar(rng.gen_range(0.9..1.0), rng.gen_range(-PI..PI))
            } else {
                C64::new(rng.gen_range(-leak..leak), rng.gen_range(-leak..leak))
            };
        }
    }
    u
}

/// Haar-ish random unitary from Gram-Schmidt on a random complex matrix.
pub fn random_unitary(rng: &mut ChaCha8Rng) -> GateMatrix {
    let mut cols: Vec<[C64; 4]> = (0..4)
        .map(|_| std::array::from_fn(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))
        .collect();
    for k in 0..4 {
        for j in 0..k {
            let p: C64 = (0..4).map(|l| cols[j][l].conj() * cols[k][l]).sum();
            for l in 0..4 {
                let v = cols[j][l];
                cols[k][l] -= p * v;
            }
        }
        let n = cols[k].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        for l in 0..4 {
            cols[k][l] /= n;
        }
    }
    GateMatrix(std::array::from_fn(|l| std::array::from_fn(|k| cols[k][l])))
}

/// `-(∂J/∂Re u_lk + i ∂J/∂Im u_lk) / 2` by central differences, indexed `[k][l]`
/// like the co-state coefficients.
pub fn costates_by_differences(j: impl Fn(&GateMatrix) -> f64, u: &GateMatrix, h: f64) -> [[C64; 4]; 4] {
    let mut out = [[C64::new(0.0, 0.0); 4]; 4];
    for k in 0..4 {
        for l in 0..4 {
            let mut d = [0.0; 2];
            for (part, step) in [C64::new(h, 0.0), C64::new(0.0, h)].into_iter().enumerate() {
                let mut plus = *u;
                plus.0[l][k] += step;
                let mut minus = *u;
                minus.0[l][k] -= step;
                d[part] = (j(&plus) - j(&minus)) / (2.0 * h);
            }
            out[k][l] = -0.5 * C64::new(d[0], d[1]);
        }
    }
    out
}

pub fn max_relative_error(a: &[[C64; 4]; 4], b: &[[C64; 4]; 4]) -> f64 {
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    for k in 0..4 {
        for l in 0..4 {
            diff = diff.max((a[k][l] - b[k][l]).norm());
            scale = scale.max(b[k][l].norm());
        }
    }
    diff / scale.max(1e-300)
}

fn pe_distance_sqr(u: &GateMatrix, t: [f64; 3]) -> f64 {
    let phases = [t[0], t[1], t[2], PI + t[1] + t[2] - t[0]];
    let mut s = 0.0;
    for l in 0..4 {
        for k in 0..4 {
            let target = if l == k { C64::from_polar(1.0, phases[k]) } else { C64::new(0.0, 0.0) };
            s += (u.0[l][k] - target).norm_sqr();
        }
    }
    s
}

/// Smallest Frobenius distance from `u` to a diagonal perfect entangler:
/// exhaustive 1° grid over the three free phases, then a shrinking
/// compass search from the best grid point.
pub fn closest_pe_distance_by_grid(u: &GateMatrix) -> f64 {
    let step = PI / 180.0;
    // off-diagonal entries add a constant, so on the grid it is enough to
    // maximize Re Σ_k e^{-iφ_k} τ_k with phases tabulated per degree
    let rot: Vec<C64> = (0..360).map(|a| C64::from_polar(1.0, -(a as f64) * step)).collect();
    let tau = u.taus();
    let mut best = ([0usize; 3], f64::NEG_INFINITY);
    for a in 0..360 {
        let t0 = (rot[a] * tau[0]).re;
        for b in 0..360 {
            let t1 = (rot[b] * tau[1]).re;
            for c in 0..360 {
                let d = (180 + b + c + 360 - a) % 360;
                let v = t0 + t1 + (rot[c] * tau[2]).re + (rot[d] * tau[3]).re;
                if v > best.1 {
                    best = ([a, b, c], v);
                }
            }
        }
    }
    let start = best.0.map(|a| a as f64 * step);
    let best = (start, pe_distance_sqr(u, start));
    let (mut t, mut d) = best;
    let mut h = step;
    while h > 1e-12 {
        let mut improved = false;
        for axis in 0..3 {
            for sign in [1.0, -1.0] {
                let mut trial = t;
                trial[axis] += sign * h;
                let v = pe_distance_sqr(u, trial);
                if v < d {
                    (t, d) = (trial, v);
                    improved = true;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    d.sqrt()
}

//! Chebyshev expansion of `exp(-i H dt)` acting on a vector.
//!
//! With the spectrum of `H` enclosed in `[c - Δ, c + Δ]`,
//! `exp(-i H dt) = e^{-i c dt} Σ_k (2 - δ_k0) (-i)^k J_k(Δ dt) T_k((H - c)/Δ)`.

use crate::error::{Error, Result};
use crate::linalg::{C64, ZERO};

/// `J_0(x) .. J_n(x)` by Miller's downward recurrence, normalized with
/// `J_0 + 2 Σ J_2k = 1`. Requires `x >= 0`.
pub fn bessel_j_sequence(x: f64, n: usize) -> Vec<f64> {
    debug_assert!(x >= 0.0);
    let mut out = vec![0.0; n + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let top = (n as f64).max(x.ceil());
    let start = 2 * (((top + 15.0 + (160.0 * top).sqrt()) as usize) / 2 + 1);
    let mut j_next = 0.0; // J_{k+1}
    let mut j_cur = 1e-300; // J_k, arbitrary seed
    let mut even_sum = 0.0;
    for k in (1..=start).rev() {
        let j_prev = 2.0 * k as f64 / x * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        let idx = k - 1;
        if idx <= n {
            out[idx] = j_cur;
        }
        if idx % 2 == 0 && idx > 0 {
            even_sum += j_cur;
        }
        if j_cur.abs() > 1e250 {
            j_cur *= 1e-250;
            j_next *= 1e-250;
            even_sum *= 1e-250;
            out.iter_mut().for_each(|v| *v *= 1e-250);
        }
    }
    let norm = j_cur + 2.0 * even_sum;
    out.iter_mut().for_each(|v| *v /= norm);
    out
}

/// Smallest order `N` such that the truncated tail `Σ_{k>N} 2 |J_k(x)|` is
/// rigorously below `tol`, using `|J_k(x)| <= (x/2)^k / k!`.
pub fn required_order(x: f64, tol: f64) -> usize {
    let half = 0.5 * x;
    let mut term = 1.0; // (x/2)^k / k!
    let mut k = 0usize;
    loop {
        k += 1;
        term *= half / k as f64;
        let ratio = half / (k + 1) as f64;
        if ratio < 1.0 && 2.0 * term / (1.0 - ratio) < tol {
            return k - 1;
        }
        if k > 100_000 {
            return k;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionOptions {
    /// Relative truncation bound per step.
    pub tolerance: f64,
    pub max_order: usize,
}

impl Default for ExpansionOptions {
    fn default() -> Self {
        Self { tolerance: 1e-15, max_order: 1000 }
    }
}

/// Scratch buffers for one propagating state.
#[derive(Debug, Clone)]
pub struct Workspace {
    prev: Vec<C64>,
    cur: Vec<C64>,
    next: Vec<C64>,
    acc: Vec<C64>,
    coeffs: Vec<C64>,
}

impl Workspace {
    pub fn new(dim: usize) -> Self {
        Self { prev: vec![ZERO; dim], cur: vec![ZERO; dim], next: vec![ZERO; dim], acc: vec![ZERO; dim], coeffs: Vec::new() }
    }
}

/// CSR structure shared by the value arrays handed to [`apply_exponential`].
#[derive(Debug, Clone, Copy)]
pub struct Csr<'a> {
    pub indptr: &'a [usize],
    pub indices: &'a [usize],
    pub values: &'a [C64],
}

impl Csr<'_> {
    /// `y = (H x - c x) / Δ`
    #[inline]
    fn apply_normalized(&self, x: &[C64], y: &mut [C64], center: f64, inv_radius: f64) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = -center * x[r];
            for p in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[p] * x[self.indices[p]];
            }
            *out = acc * inv_radius;
        }
    }

    /// `y = 2 (H x - c x) / Δ - y`
    #[inline]
    fn apply_recurrence(&self, x: &[C64], y: &mut [C64], center: f64, inv_radius: f64) {
        let two = 2.0 * inv_radius;
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = -center * x[r];
            for p in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[p] * x[self.indices[p]];
            }
            *out = acc * two - *out;
        }
    }

    pub fn gershgorin(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for r in 0..self.indptr.len() - 1 {
            let mut diag = 0.0;
            let mut radius = 0.0;
            for p in self.indptr[r]..self.indptr[r + 1] {
                if self.indices[p] == r {
                    diag = self.values[p].re;
                } else {
                    radius += self.values[p].norm();
                }
            }
            lo = lo.min(diag - radius);
            hi = hi.max(diag + radius);
        }
        (lo, hi)
    }
}

/// Replaces `psi` by `exp(-i H dt) psi`; a negative `dt` propagates backward.
/// Returns the expansion order used.
pub fn apply_exponential(
    h: Csr<'_>,
    bounds: (f64, f64),
    dt: f64,
    psi: &mut [C64],
    ws: &mut Workspace,
    options: &ExpansionOptions,
) -> Result<usize> {
    let (lo, hi) = bounds;
    let center = 0.5 * (hi + lo);
    let radius = 0.5 * (hi - lo);
    let sign = dt.signum();
    let global = C64::from_polar(1.0, -center * dt);
    let x = radius * dt.abs();
    if x < 1e-300 {
        psi.iter_mut().for_each(|a| *a *= global);
        return Ok(0);
    }
    let order = required_order(x, options.tolerance);
    if order > options.max_order {
        return Err(Error::ExpansionNotConverged { required: order, allowed: options.max_order });
    }
    let bessel = bessel_j_sequence(x, order);
    ws.coeffs.clear();
    // (-i sign)^k
    let rot = C64::new(0.0, -sign);
    let mut phase = C64::new(1.0, 0.0);
    for (k, j) in bessel.iter().enumerate() {
        let weight = if k == 0 { 1.0 } else { 2.0 };
        ws.coeffs.push(global * phase * (weight * j));
        phase *= rot;
    }
    let inv_radius = 1.0 / radius;

    let Workspace { prev, cur, next, acc, coeffs } = ws;
    prev.copy_from_slice(psi);
    for (a, p) in acc.iter_mut().zip(prev.iter()) {
        *a = coeffs[0] * p;
    }
    if order >= 1 {
        h.apply_normalized(prev, cur, center, inv_radius);
        for (a, c) in acc.iter_mut().zip(cur.iter()) {
            *a += coeffs[1] * c;
        }
    }
    for coeff in coeffs.iter().skip(2) {
        // next = 2 Hn cur - prev
        next.copy_from_slice(prev);
        h.apply_recurrence(cur, next, center, inv_radius);
        for (a, n) in acc.iter_mut().zip(next.iter()) {
            *a += coeff * n;
        }
        std::mem::swap(prev, cur);
        std::mem::swap(cur, next);
    }
    psi.copy_from_slice(acc);
    Ok(order)
}

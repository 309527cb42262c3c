// Copyright 2026 The lindloc Contributors
// SPDX-License-Identifier: Apache-2.0

//! Reference computations that avoid the library's solvers: a Kronecker-product
//! generator, matrix exponentials and time quadrature of the Abel average.

#![allow(dead_code)]

use lindloc::linalg::{c, gauss_legendre, CMatrix, CVector, C64};
use lindloc::LindbladModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Column-stacked generator `vec L(ρ)`, built from `vec(AXB) = (Bᵀ ⊗ A) vec X`.
pub fn dense_generator(model: &LindbladModel) -> CMatrix {
    let n = model.dim();
    let id = CMatrix::identity(n, n);
    let h = model.hamiltonian();
    let mut l = (kron(&id, &h) - kron(&h.transpose(), &id)) * c(0.0, -1.0);
    for j in model.jump_matrices() {
        let ldl = j.adjoint() * &j;
        l += kron(&j.conjugate(), &j);
        l -= kron(&id, &ldl) * c(0.5, 0.0);
        l -= kron(&ldl.transpose(), &id) * c(0.5, 0.0);
    }
    l
}

pub fn vec_of(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &CVector, n: usize) -> CMatrix {
    CMatrix::from_column_slice(n, n, v.as_slice())
}

/// `e^{tL}` applied to `ρ` by the Padé exponential of the dense generator.
pub fn evolve_dense(gen: &CMatrix, rho: &CMatrix, t: f64) -> CMatrix {
    let n = rho.nrows();
    unvec(&((gen * c(t, 0.0)).exp() * vec_of(rho)), n)
}

/// `ε ∫_0^T e^{-εt} e^{tL}(ρ) dt` with `T = 40/ε`, split into panels of width `h`
/// with a 16-point Gauss–Legendre rule each. The node propagators are computed
/// once and the panel start is advanced by `e^{hL}`.
pub fn abel_by_time_quadrature(gen: &CMatrix, rho: &CMatrix, eps: f64, h: f64) -> CMatrix {
    let n = rho.nrows();
    let panels = (40.0 / eps / h).ceil() as usize;
    let rule = gauss_legendre(16);
    let nodes: Vec<(f64, f64, CMatrix)> = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&x, &w)| {
            let tau = 0.5 * h * (1.0 + x);
            (tau, 0.5 * h * w, (gen * c(tau, 0.0)).exp())
        })
        .collect();
    let step = (gen * c(h, 0.0)).exp();
    let mut start = vec_of(rho);
    let mut acc = CVector::zeros(n * n);
    for k in 0..panels {
        let t0 = k as f64 * h;
        for (tau, w, prop) in &nodes {
            let weight = eps * (-eps * (t0 + tau)).exp() * w;
            acc += prop * &start * c(weight, 0.0);
        }
        start = &step * start;
    }
    unvec(&acc, n)
}

/// Random full-rank density matrix `GG*/tr(GG*)`.
pub fn random_state(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let m = &g * g.adjoint();
    let tr = m.trace();
    m / tr
}

pub fn random_potential(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |a, z| a.max(z.norm()))
}

pub fn trace_norm(m: &CMatrix) -> f64 {
    m.clone().svd(false, false).singular_values.iter().sum()
}

pub fn min_hermitian_eigenvalue(m: &CMatrix) -> f64 {
    let h = (m + m.adjoint()) * c(0.5, 0.0);
    h.symmetric_eigenvalues().iter().fold(f64::INFINITY, |a, &b| a.min(b))
}

pub fn zero() -> C64 {
    c(0.0, 0.0)
}

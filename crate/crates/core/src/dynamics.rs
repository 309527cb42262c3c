// Copyright 2026 The lindloc Contributors
// SPDX-License-Identifier: Apache-2.0

//! Vectorised Lindbladians, time evolution, steady states and Abel averages.
//!
//! Matrices are vectorised by stacking columns, `vec(AρB) = (Bᵀ ⊗ A) vec(ρ)`, so the
//! entry `(i, j)` of an `n × n` matrix sits at index `i + n j`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    c, hermitian_eigen, singular_values, trace_norm, unvec_col, vec_col, CMatrix, CVector, SparseLu, SparseMatrix, C64,
    I, ONE, ZERO,
};
use crate::model::LindbladModel;

/// Default cap on the superoperator dimension `|Λ|²`.
pub const DEFAULT_DIM_CAP: usize = 1 << 22;
/// Largest `|Λ|` evolved with the dense matrix exponential.
pub const DENSE_EVOLUTION_MAX_SITES: usize = 24;
/// Largest `|Λ|` whose steady states come from a full SVD.
pub const DENSE_STEADY_MAX_SITES: usize = 16;

const STATE_TOL: f64 = 1e-10;
const PSD_REPAIR_TOL: f64 = 1e-10;
const TRACE_FAIL_TOL: f64 = 1e-8;

/// A Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Accepts `m` if it is a state to within 1e-10.
    pub fn new(m: CMatrix) -> Result<Self> {
        check_state(&m, STATE_TOL)?;
        Ok(DensityMatrix { matrix: m })
    }

    pub fn pure(psi: &CVector) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::Precondition("pure state from the zero vector".into()));
        }
        let v = psi / c(norm, 0.0);
        Ok(DensityMatrix { matrix: &v * v.adjoint() })
    }

    /// `|δ_x⟩⟨δ_x|`.
    pub fn site(n: usize, x: usize) -> Self {
        let mut m = CMatrix::zeros(n, n);
        m[(x, x)] = ONE;
        DensityMatrix { matrix: m }
    }

    pub fn maximally_mixed(n: usize) -> Self {
        DensityMatrix { matrix: CMatrix::identity(n, n) * c(1.0 / n as f64, 0.0) }
    }

    /// Turns a numerically computed state into a [`DensityMatrix`].
    ///
    /// The matrix is Hermitised, eigenvalues in `[-1e-10, 0)` are clipped to zero and
    /// the trace is renormalised. More negative eigenvalues, or a trace off by more
    /// than 1e-8, are reported as numerical failures rather than repaired.
    pub fn repair(m: &CMatrix) -> Result<Self> {
        let h = (m + m.adjoint()) * c(0.5, 0.0);
        let tr = h.trace().re;
        if (tr - 1.0).abs() > TRACE_FAIL_TOL {
            return Err(Error::Numerical(format!("trace deviates from 1 by {:e}", tr - 1.0)));
        }
        let (vals, vecs) = hermitian_eigen(&h);
        if vals[0] < -PSD_REPAIR_TOL {
            return Err(Error::Numerical(format!("state has eigenvalue {:e}", vals[0])));
        }
        if vals[0] >= 0.0 {
            return Ok(DensityMatrix { matrix: h * c(1.0 / tr, 0.0) });
        }
        let clipped: Vec<f64> = vals.iter().map(|&v| v.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        let d = CMatrix::from_diagonal(&CVector::from_iterator(clipped.len(), clipped.iter().map(|&v| c(v / total, 0.0))));
        Ok(DensityMatrix { matrix: &vecs * d * vecs.adjoint() })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

fn check_state(m: &CMatrix, tol: f64) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Precondition("a density matrix must be square".into()));
    }
    let herm = crate::linalg::max_abs_entry(&(m - m.adjoint()));
    if herm > tol {
        return Err(Error::Precondition(format!("matrix is not Hermitian (deviation {herm:e})")));
    }
    let tr = m.trace();
    if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
        return Err(Error::Precondition(format!("trace {tr} is not 1")));
    }
    let (vals, _) = hermitian_eigen(&((m + m.adjoint()) * c(0.5, 0.0)));
    if vals[0] < -tol {
        return Err(Error::Precondition(format!("matrix has eigenvalue {:e}", vals[0])));
    }
    Ok(())
}

/// A Lindbladian (or its adjoint) acting on column-stacked `|Λ| × |Λ|` matrices.
#[derive(Debug, Clone)]
pub struct Superoperator {
    matrix: SparseMatrix,
    sites: usize,
    adjoint: bool,
}

impl Superoperator {
    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn is_adjoint(&self) -> bool {
        self.adjoint
    }

    /// `L(X)` for any `|Λ| × |Λ|` matrix `X`.
    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        unvec_col(&self.matrix.mul_vec(&vec_col(x)), self.sites)
    }

    pub fn to_dense(&self) -> CMatrix {
        self.matrix.to_dense()
    }

    /// `(ε - L)^{-1}(X)` by a sparse direct solve.
    pub fn resolvent_apply(&self, eps: C64, x: &CMatrix) -> Result<CMatrix> {
        let lu = SparseLu::factor(&self.matrix.shifted(eps, -ONE))?;
        Ok(unvec_col(&lu.solve(&vec_col(x))?, self.sites))
    }
}

/// Assembles `L = -i[H, ·] + Σ (L_α · L_α* - ½{L_α* L_α, ·})`, or its adjoint.
pub fn assemble_superoperator(model: &LindbladModel, adjoint: bool) -> Result<Superoperator> {
    assemble_superoperator_capped(model, adjoint, DEFAULT_DIM_CAP)
}

pub fn assemble_superoperator_capped(model: &LindbladModel, adjoint: bool, cap: usize) -> Result<Superoperator> {
    let n = model.dim();
    let dim = n.saturating_mul(n);
    if dim > cap {
        return Err(Error::DimensionCap { dim, cap });
    }
    // With D = -iH - ½ Σ L*L the generator reads Dρ + ρD* + Σ LρL*, and the adjoint
    // D*a + aD + Σ L*aL.
    let d = model.hamiltonian() * (-I) - model.sum_ldag_l() * c(0.5, 0.0);
    let idx = |i: usize, j: usize| i + n * j;
    let mut t = Vec::new();
    for i in 0..n {
        for k in 0..n {
            let dik = d[(i, k)];
            if dik == ZERO {
                continue;
            }
            for j in 0..n {
                if adjoint {
                    // (D* a)_(k, j) picks up conj(D[i, k]) a_(i, j); (a D)_(j, k) picks up a_(j, i) D[i, k].
                    t.push((idx(k, j), idx(i, j), dik.conj()));
                    t.push((idx(j, k), idx(j, i), dik));
                } else {
                    // (Dρ)_(i, j) += D[i, k] ρ_(k, j); (ρD*)_(j, i) += ρ_(j, k) conj(D[i, k]).
                    t.push((idx(i, j), idx(k, j), dik));
                    t.push((idx(j, i), idx(j, k), dik.conj()));
                }
            }
        }
    }
    for jump in model.jumps() {
        let m = jump.support.members();
        let l = &jump.matrix;
        for (a, &ma) in m.iter().enumerate() {
            for (b, &mb) in m.iter().enumerate() {
                let lab = l[(a, b)];
                if lab == ZERO {
                    continue;
                }
                for (cc, &mc) in m.iter().enumerate() {
                    for (dd, &md) in m.iter().enumerate() {
                        let lcd = l[(cc, dd)];
                        if lcd == ZERO {
                            continue;
                        }
                        if adjoint {
                            // (L* a L)_(b, d) += conj(L[a, b]) a_(a, c) L[c, d]
                            t.push((idx(mb, md), idx(ma, mc), lab.conj() * lcd));
                        } else {
                            // (L ρ L*)_(a, c) += L[a, b] ρ_(b, d) conj(L[c, d])
                            t.push((idx(ma, mc), idx(mb, md), lab * lcd.conj()));
                        }
                    }
                }
            }
        }
    }
    Ok(Superoperator { matrix: SparseMatrix::from_triplets(dim, dim, t), sites: n, adjoint })
}

/// Which integrator [`evolve_with`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvolveMethod {
    /// Dense exponential up to [`DENSE_EVOLUTION_MAX_SITES`] sites, Runge-Kutta above.
    Auto,
    Dense,
    RungeKutta,
}

/// `e^{tL}(ρ0)`, repaired and validated as a state.
pub fn evolve(model: &LindbladModel, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    evolve_with(model, rho0, t, EvolveMethod::Auto)
}

pub fn evolve_with(model: &LindbladModel, rho0: &DensityMatrix, t: f64, method: EvolveMethod) -> Result<DensityMatrix> {
    let raw = evolve_raw(model, rho0.matrix(), t, method)?;
    DensityMatrix::repair(&raw)
}

/// `e^{tL}(X)` without any post-processing.
pub fn evolve_raw(model: &LindbladModel, x: &CMatrix, t: f64, method: EvolveMethod) -> Result<CMatrix> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Precondition(format!("evolution time must be finite and nonnegative, got {t}")));
    }
    check_square(model, x)?;
    if t == 0.0 {
        return Ok(x.clone());
    }
    let sup = assemble_superoperator(model, false)?;
    let dense = match method {
        EvolveMethod::Auto => model.dim() <= DENSE_EVOLUTION_MAX_SITES,
        EvolveMethod::Dense => true,
        EvolveMethod::RungeKutta => false,
    };
    let v = vec_col(x);
    let out = if dense {
        (sup.to_dense() * c(t, 0.0)).exp() * v
    } else {
        dormand_prince(&sup.matrix, v, t, 1e-10)?
    };
    Ok(unvec_col(&out, model.dim()))
}

fn check_square(model: &LindbladModel, x: &CMatrix) -> Result<()> {
    let n = model.dim();
    if x.nrows() != n || x.ncols() != n {
        return Err(Error::Precondition(format!(
            "matrix is {}x{}, model has {n} sites",
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(())
}

/// Integrates `v' = A v` on `[0, t]` with the Dormand-Prince 5(4) pair.
fn dormand_prince(a: &SparseMatrix, mut v: CVector, t: f64, rtol: f64) -> Result<CVector> {
    const C2: f64 = 1.0 / 5.0;
    const C3: f64 = 3.0 / 10.0;
    const C4: f64 = 4.0 / 5.0;
    const C5: f64 = 8.0 / 9.0;
    const A21: f64 = 1.0 / 5.0;
    const A31: f64 = 3.0 / 40.0;
    const A32: f64 = 9.0 / 40.0;
    const A41: f64 = 44.0 / 45.0;
    const A42: f64 = -56.0 / 15.0;
    const A43: f64 = 32.0 / 9.0;
    const A51: f64 = 19372.0 / 6561.0;
    const A52: f64 = -25360.0 / 2187.0;
    const A53: f64 = 64448.0 / 6561.0;
    const A54: f64 = -212.0 / 729.0;
    const A61: f64 = 9017.0 / 3168.0;
    const A62: f64 = -355.0 / 33.0;
    const A63: f64 = 46732.0 / 5247.0;
    const A64: f64 = 49.0 / 176.0;
    const A65: f64 = -5103.0 / 18656.0;
    const B1: f64 = 35.0 / 384.0;
    const B3: f64 = 500.0 / 1113.0;
    const B4: f64 = 125.0 / 192.0;
    const B5: f64 = -2187.0 / 6784.0;
    const B6: f64 = 11.0 / 84.0;
    const E1: f64 = 71.0 / 57600.0;
    const E3: f64 = -71.0 / 16695.0;
    const E4: f64 = 71.0 / 1920.0;
    const E5: f64 = -17253.0 / 339200.0;
    const E6: f64 = 22.0 / 525.0;
    const E7: f64 = -1.0 / 40.0;
    let _ = (C2, C3, C4, C5);

    let atol = rtol * 1e-2;
    let scale = a.norm_inf().max(1e-300);
    let mut h = (0.01 / scale).min(t);
    let mut time = 0.0;
    let mut k1 = a.mul_vec(&v);
    let mut steps = 0usize;
    while time < t {
        steps += 1;
        if steps > 10_000_000 {
            return Err(Error::Numerical("Runge-Kutta step budget exhausted".into()));
        }
        if time + h > t {
            h = t - time;
        }
        let hc = c(h, 0.0);
        let comb = |terms: &[(f64, &CVector)]| {
            let mut acc = v.clone();
            for (w, k) in terms {
                acc.axpy(hc * *w, *k, ONE);
            }
            acc
        };
        let k2 = a.mul_vec(&comb(&[(A21, &k1)]));
        let k3 = a.mul_vec(&comb(&[(A31, &k1), (A32, &k2)]));
        let k4 = a.mul_vec(&comb(&[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = a.mul_vec(&comb(&[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = a.mul_vec(&comb(&[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
        let next = comb(&[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let k7 = a.mul_vec(&next);
        let mut err = CVector::zeros(v.len());
        for (w, k) in [(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)] {
            err.axpy(hc * w, k, ONE);
        }
        let mut ratio: f64 = 0.0;
        for i in 0..v.len() {
            let sc = atol + rtol * v[i].norm().max(next[i].norm());
            ratio = ratio.max(err[i].norm() / sc);
        }
        if ratio <= 1.0 {
            time += h;
            v = next;
            k1 = k7;
        }
        let factor = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h < 1e-14 * t.max(1.0) {
            return Err(Error::Numerical("Runge-Kutta step size underflow".into()));
        }
    }
    Ok(v)
}

/// Basis of the numerical kernel of `L`.
#[derive(Debug, Clone)]
pub struct SteadyBasis {
    /// States spanning the kernel (positive parts of Hermitian kernel elements).
    pub states: Vec<DensityMatrix>,
    /// `‖L(ρ)‖` (Frobenius) per state.
    pub residuals: Vec<f64>,
    /// Orthonormal kernel vectors as matrices, before any state extraction.
    pub raw: Vec<CMatrix>,
    /// Estimate of `‖L‖` (largest singular value) used for the tolerance.
    pub norm: f64,
}

impl SteadyBasis {
    pub fn dimension(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }
}

/// Steady states: the kernel of `L` with singular values below `1e-10 σ_max`.
pub fn steady_states(model: &LindbladModel) -> Result<SteadyBasis> {
    let sup = assemble_superoperator(model, false)?;
    let n = model.dim();
    let (kernel, norm) = if n <= DENSE_STEADY_MAX_SITES { dense_kernel(&sup) } else { iterative_kernel(&sup, n)? };
    let states = kernel_states(&kernel, n);
    let residuals = states.iter().map(|s| sup.apply(s.matrix()).norm()).collect();
    if kernel.is_empty() {
        log::warn!("numerical kernel of the Lindbladian is empty");
    }
    Ok(SteadyBasis { states, residuals, raw: kernel.iter().map(|v| unvec_col(v, n)).collect(), norm })
}

fn dense_kernel(sup: &Superoperator) -> (Vec<CVector>, f64) {
    let dense = sup.to_dense();
    let svd = dense.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    let tol = 1e-10 * smax;
    let mut kernel = Vec::new();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= tol {
            kernel.push(v_t.row(k).adjoint());
        }
    }
    (kernel, smax)
}

/// Shift-invert block inverse iteration around 0 followed by an SVD of `L Q`.
fn iterative_kernel(sup: &Superoperator, n: usize) -> Result<(Vec<CVector>, f64)> {
    let a = &sup.matrix;
    let big = a.nrows();
    let block = (2 * n + 8).min(big);
    crate::linalg::check_workspace(big.saturating_mul(block))?;
    let smax = largest_singular_value(a);
    let shift = c(-1e-9 * smax.max(1e-300), 0.0);
    let lu = SparseLu::factor(&a.shifted(-shift, ONE))?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut q = CMatrix::from_fn(big, block, |_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    for _ in 0..6 {
        q = q.qr().q();
        q = lu.solve_matrix(&q)?;
    }
    let q = q.qr().q();
    let mut lq = CMatrix::zeros(big, block);
    for k in 0..block {
        lq.set_column(k, &a.mul_vec(&q.column(k).into_owned()));
    }
    let svd = lq.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let tol = 1e-10 * smax;
    let mut kernel = Vec::new();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= tol {
            let coeffs = v_t.row(k).adjoint();
            let v = &q * coeffs;
            kernel.push(&v / c(v.norm(), 0.0));
        }
    }
    if kernel.len() == block {
        log::warn!("kernel fills the whole iteration block of size {block}; it may be larger");
    }
    Ok((kernel, smax))
}

fn largest_singular_value(a: &SparseMatrix) -> f64 {
    let adj = a.adjoint();
    let mut rng = ChaCha8Rng::seed_from_u64(0x7a11);
    let mut v = CVector::from_fn(a.ncols(), |_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let mut est = 0.0;
    for _ in 0..200 {
        v /= c(v.norm(), 0.0);
        let w = adj.mul_vec(&a.mul_vec(&v));
        let next = w.norm().sqrt();
        v = w;
        if (next - est).abs() <= 1e-6 * next {
            est = next;
            break;
        }
        est = next;
    }
    est
}

/// Hermitian basis of the kernel, then positive and negative parts as states, then a
/// greedy selection of linearly independent states.
fn kernel_states(kernel: &[CVector], n: usize) -> Vec<DensityMatrix> {
    let dim = kernel.len();
    let mut herm: Vec<CMatrix> = Vec::new();
    let orth_push = |basis: &mut Vec<CMatrix>, mut m: CMatrix| {
        for b in basis.iter() {
            let proj = b.dotc(&m);
            m -= b * proj;
        }
        let norm = m.norm();
        if norm > 1e-8 {
            basis.push(m / c(norm, 0.0));
        }
    };
    for v in kernel {
        let x = unvec_col(v, n);
        orth_push(&mut herm, (&x + x.adjoint()) * c(0.5, 0.0));
        orth_push(&mut herm, (&x - x.adjoint()) * c(0.0, -0.5));
    }
    let mut candidates = Vec::new();
    for h in herm.iter().take(dim.max(1) * 2) {
        let h = (h + h.adjoint()) * c(0.5, 0.0);
        let (vals, vecs) = hermitian_eigen(&h);
        let scale = vals.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        for sign in [1.0, -1.0] {
            let mut part = CMatrix::zeros(n, n);
            for (k, &lam) in vals.iter().enumerate() {
                if sign * lam > 1e-9 * scale {
                    let col = vecs.column(k);
                    part += col * col.adjoint() * c(sign * lam, 0.0);
                }
            }
            let tr = part.trace().re;
            if tr > 1e-12 {
                candidates.push(part / c(tr, 0.0));
            }
        }
    }
    let mut chosen: Vec<CMatrix> = Vec::new();
    let mut ortho: Vec<CMatrix> = Vec::new();
    for cand in candidates {
        if chosen.len() == dim {
            break;
        }
        let before = ortho.len();
        orth_push(&mut ortho, cand.clone());
        if ortho.len() > before {
            chosen.push(cand);
        }
    }
    chosen.into_iter().filter_map(|m| DensityMatrix::repair(&m).ok()).collect()
}

/// Abel average `ε (ε - L)^{-1}(ρ0)`.
pub fn abel_average(model: &LindbladModel, rho0: &DensityMatrix, eps: f64) -> Result<DensityMatrix> {
    DensityMatrix::repair(&abel_average_raw(model, rho0.matrix(), eps)?)
}

/// `ε (ε - L)^{-1}(X)` for any matrix `X`, without post-processing.
pub fn abel_average_raw(model: &LindbladModel, x: &CMatrix, eps: f64) -> Result<CMatrix> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Precondition(format!("ε must be positive and finite, got {eps}")));
    }
    check_square(model, x)?;
    let sup = assemble_superoperator(model, false)?;
    Ok(sup.resolvent_apply(c(eps, 0.0), x)? * c(eps, 0.0))
}

/// Sampled lower bound on the induced trace norm of `L` against `2 C_R N (1 + N I)`.
#[derive(Debug, Clone, Serialize)]
pub struct TraceNormReport {
    pub lower_bound: f64,
    pub bound: f64,
    pub cover_count: usize,
    pub n: f64,
    pub i: usize,
    pub samples: usize,
    pub pass: bool,
}

pub fn trace_norm_bound_check(model: &LindbladModel, samples: usize, seed: u64) -> Result<TraceNormReport> {
    let report = model.validate_locality();
    let sup = assemble_superoperator(model, false)?;
    let n = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gaussian = |rng: &mut ChaCha8Rng| {
        let v = CVector::from_fn(n, |_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        &v / c(v.norm(), 0.0)
    };
    let mut best: f64 = 0.0;
    for _ in 0..samples {
        let (psi, phi) = (gaussian(&mut rng), gaussian(&mut rng));
        best = best.max(trace_norm(&sup.apply(&(&psi * phi.adjoint()))));
    }
    // Site-localised rank-one inputs often realise the norm on local models.
    for x in 0..n {
        for y in 0..n {
            let mut m = CMatrix::zeros(n, n);
            m[(x, y)] = ONE;
            best = best.max(trace_norm(&sup.apply(&m)));
        }
    }
    let (cr, nn, ii) = (report.cover_count, report.n_actual, report.i_actual);
    let bound = 2.0 * cr as f64 * nn * (1.0 + nn * ii as f64);
    Ok(TraceNormReport {
        lower_bound: best,
        bound,
        cover_count: cr,
        n: nn,
        i: ii,
        samples,
        pass: best <= bound * (1.0 + 1e-12),
    })
}

/// Largest singular value of the dense superoperator; only for small models.
pub fn superoperator_norm(sup: &Superoperator) -> f64 {
    singular_values(&sup.to_dense()).into_iter().fold(0.0, f64::max)
}

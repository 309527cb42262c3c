// Copyright 2026 The lindloc Contributors
// SPDX-License-Identifier: Apache-2.0

//! Dense and sparse complex linear algebra helpers shared by the physics modules.

mod banded;
mod quadrature;
mod sparse;

pub use banded::{BandedLu, SparseLu};
pub use quadrature::{gauss_legendre, GaussLegendre};
pub use sparse::SparseMatrix;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Largest number of complex entries a solver may allocate in one work array (4 GiB).
pub const WORKSPACE_CAP: usize = 1 << 28;

pub(crate) fn check_workspace(entries: usize) -> crate::error::Result<()> {
    if entries > WORKSPACE_CAP {
        return Err(crate::error::Error::WorkspaceCap { entries, cap: WORKSPACE_CAP });
    }
    Ok(())
}

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// (A + A*)/2
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * re(0.5)
}

/// (A - A*)/(2i), so that A = Re A + i Im A with both parts Hermitian.
pub fn imaginary_part(a: &CMatrix) -> CMatrix {
    (a - a.adjoint()) * c(0.0, -0.5)
}

/// Ascending eigenvalues of a Hermitian matrix. Only the lower triangle is read.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = a.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

/// Ascending eigenvalues and the matching orthonormal eigenvectors (as columns).
pub fn hermitian_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let eig = a.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    (values, vectors)
}

pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    a.clone().singular_values().iter().copied().collect()
}

/// Operator (spectral) norm.
pub fn spectral_norm(a: &CMatrix) -> f64 {
    singular_values(a).into_iter().fold(0.0, f64::max)
}

/// Smallest singular value, i.e. 1/‖A⁻¹‖ (zero for singular A).
pub fn sigma_min(a: &CMatrix) -> f64 {
    singular_values(a).into_iter().fold(f64::INFINITY, f64::min)
}

/// Sum of singular values.
pub fn trace_norm(a: &CMatrix) -> f64 {
    singular_values(a).into_iter().sum()
}

pub fn max_abs_entry(a: &CMatrix) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn is_hermitian(a: &CMatrix, tol: f64) -> bool {
    a.is_square() && max_abs_entry(&(a - a.adjoint())) <= tol
}

/// Complex eigenvalues of a general square matrix via the Schur form.
pub fn eigenvalues(a: &CMatrix) -> Result<Vec<C64>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![a[(0, 0)]]);
    }
    let schur = nalgebra::Schur::try_new(a.clone(), f64::EPSILON, 100 * n * n)
        .ok_or_else(|| Error::Numerical("Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    // The complex Schur form is upper triangular, except where the iteration left a
    // 2x2 block that it resolves only in exact arithmetic; split those explicitly.
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    while k < n {
        if k + 1 < n && t[(k + 1, k)].norm() > f64::EPSILON * (t[(k, k)].norm() + t[(k + 1, k + 1)].norm()) {
            let (a11, a12, a21, a22) = (t[(k, k)], t[(k, k + 1)], t[(k + 1, k)], t[(k + 1, k + 1)]);
            let half_tr = (a11 + a22) * 0.5;
            let disc = ((a11 - a22) * 0.5).powi(2) + a12 * a21;
            let root = disc.sqrt();
            out.push(half_tr + root);
            out.push(half_tr - root);
            k += 2;
        } else {
            out.push(t[(k, k)]);
            k += 1;
        }
    }
    Ok(out)
}

/// Solves `a x = b` by partial-pivoting LU, failing on an exactly singular pivot.
pub fn solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Singular("dense LU solve".into()))
}

pub fn inverse(a: &CMatrix) -> Result<CMatrix> {
    a.clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("dense inverse".into()))
}

/// Standard basis vector of length `n`.
pub fn unit_vector(n: usize, k: usize) -> CVector {
    let mut v = CVector::zeros(n);
    v[k] = ONE;
    v
}

/// Column-stacking vectorisation: entry (i, j) lands at i + n j.
pub fn vec_col(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

pub fn unvec_col(v: &CVector, n: usize) -> CMatrix {
    CMatrix::from_column_slice(n, n, v.as_slice())
}

/// Kronecker product, A ⊗ B.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

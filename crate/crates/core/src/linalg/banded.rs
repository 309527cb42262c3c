// Copyright 2026 The lindloc Contributors
// SPDX-License-Identifier: Apache-2.0

//! Direct solvers for the sparse superoperator systems `(ε - L) x = b`.
//!
//! Column-stacked Lindbladians of nearest-neighbour models on a chain of n sites have
//! bandwidth n + 1, so a banded LU with partial pivoting (the LAPACK `gbtf2` scheme)
//! factors them in O(N n²) instead of O(N³).

use nalgebra::LU;

use super::{CMatrix, CVector, SparseMatrix, C64, ZERO};
use crate::error::{Error, Result};

/// Banded LU factorisation with partial pivoting.
///
/// Storage is column-major with leading dimension `2 kl + ku + 1`; entry (i, j)
/// lives at row `kl + ku + i - j` of column j. The extra `kl` rows hold fill-in
/// created by row interchanges.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    kv: usize,
    ldab: usize,
    ab: Vec<C64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        assert_eq!(a.nrows(), a.ncols(), "banded LU needs a square matrix");
        let n = a.nrows();
        let (kl, ku) = a.bandwidth();
        let kv = kl + ku;
        let ldab = kl + kv + 1;
        let mut lu = BandedLu { n, kl, kv, ldab, ab: vec![ZERO; ldab * n.max(1)], pivots: vec![0; n] };
        for (r, c, v) in a.triplets() {
            let k = lu.idx(r, c);
            lu.ab[k] += v;
        }
        lu.eliminate()?;
        Ok(lu)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i + self.kv >= j && i <= j + self.kl);
        (self.kv + i - j) + j * self.ldab
    }

    fn eliminate(&mut self) -> Result<()> {
        let n = self.n;
        let mut ju = 0usize;
        for j in 0..n {
            let km = self.kl.min(n - 1 - j);
            let mut p = j;
            let mut best = self.ab[self.idx(j, j)].norm();
            for i in j + 1..=j + km {
                let v = self.ab[self.idx(i, j)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(Error::Singular(format!("zero pivot in column {j} of banded LU")));
            }
            self.pivots[j] = p;
            ju = ju.max((j + self.kv - self.kl + (p - j)).min(n - 1));
            if p != j {
                for c in j..=ju {
                    let (a, b) = (self.idx(p, c), self.idx(j, c));
                    self.ab.swap(a, b);
                }
            }
            let inv = self.ab[self.idx(j, j)].inv();
            for i in j + 1..=j + km {
                let k = self.idx(i, j);
                self.ab[k] *= inv;
            }
            for c in j + 1..=ju {
                let t = self.ab[self.idx(j, c)];
                if t == ZERO {
                    continue;
                }
                for i in j + 1..=j + km {
                    let l = self.ab[self.idx(i, j)];
                    let k = self.idx(i, c);
                    self.ab[k] -= l * t;
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &CVector) -> CVector {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut x = b.clone();
        for j in 0..n {
            let p = self.pivots[j];
            if p != j {
                x.swap_rows(p, j);
            }
            let xj = x[j];
            if xj != ZERO {
                for i in j + 1..=(j + self.kl).min(n - 1) {
                    x[i] -= self.ab[self.idx(i, j)] * xj;
                }
            }
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for c in i + 1..=(i + self.kv).min(n - 1) {
                acc -= self.ab[self.idx(i, c)] * x[c];
            }
            x[i] = acc / self.ab[self.idx(i, i)];
        }
        x
    }
}

/// Factorisation of a sparse square matrix, banded when the band is narrow enough.
#[derive(Debug, Clone)]
pub enum SparseLu {
    Banded(BandedLu),
    Dense(LU<C64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl SparseLu {
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        let n = a.nrows();
        let (kl, ku) = a.bandwidth();
        // Banded storage costs n (2 kl + ku + 1); dense wins once that nears n².
        if n <= 64 || 3 * (2 * kl + ku + 1) > n {
            super::check_workspace(n.saturating_mul(n))?;
            let lu = a.to_dense().lu();
            if !lu.is_invertible() {
                return Err(Error::Singular("dense LU of sparse system".into()));
            }
            Ok(SparseLu::Dense(lu))
        } else {
            super::check_workspace((2 * kl + ku + 1).saturating_mul(n))?;
            Ok(SparseLu::Banded(BandedLu::factor(a)?))
        }
    }

    pub fn solve(&self, b: &CVector) -> Result<CVector> {
        match self {
            SparseLu::Banded(lu) => Ok(lu.solve(b)),
            SparseLu::Dense(lu) => lu.solve(b).ok_or_else(|| Error::Singular("dense LU solve".into())),
        }
    }

    pub fn solve_matrix(&self, b: &CMatrix) -> Result<CMatrix> {
        let mut out = CMatrix::zeros(b.nrows(), b.ncols());
        for k in 0..b.ncols() {
            let col = self.solve(&b.column(k).into_owned())?;
            out.set_column(k, &col);
        }
        Ok(out)
    }
}

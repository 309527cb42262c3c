// Copyright 2026 The lindloc Contributors
// SPDX-License-Identifier: Apache-2.0

//! Combes-Thomas bounds for non-normal local operators: off-diagonal resolvent
//! entries decay like `exp(-μ d(x,y))` away from the pseudospectrum.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Distance, Lattice, Region};
use crate::linalg::{inverse, sigma_min, CMatrix, C64};

/// Graph distances between the indices of a matrix.
#[derive(Debug, Clone)]
pub struct Indexing {
    dist: Vec<Vec<Distance>>,
}

impl Indexing {
    /// Index `i` is site `i` of the lattice.
    pub fn full(lat: &Lattice) -> Self {
        Indexing { dist: lat.distance_matrix() }
    }

    /// Index `i` is `region.members()[i]`, distances measured in the lattice.
    pub fn region(lat: &Lattice, region: &Region) -> Self {
        let m = region.members();
        let dist = m.iter().map(|&u| {
            let row = lat.distances_from(u);
            m.iter().map(|&v| row[v]).collect()
        });
        Indexing { dist: dist.collect() }
    }

    pub fn len(&self) -> usize {
        self.dist.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dist.is_empty()
    }

    pub fn distance(&self, i: usize, j: usize) -> Distance {
        self.dist[i][j]
    }

    fn check(&self, a: &CMatrix) -> Result<()> {
        if a.nrows() != self.len() || a.ncols() != self.len() {
            return Err(Error::LatticeMismatch);
        }
        Ok(())
    }
}

/// Weighted row and column sums `Σ |A(x,y)| w(d(x,y))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SAlphaProfile {
    pub alpha: f64,
    /// `sup_x Σ_y |A(x,y)| e^{α d(x,y)}`.
    pub row_sum: f64,
    /// `sup_y Σ_x |A(x,y)| e^{α d(x,y)}`.
    pub col_sum: f64,
    /// `√(row_sum · col_sum)`.
    pub s_alpha: f64,
    /// The same with weights `e^{α d} - 1`; this bounds `‖M A M^{-1} - A‖` for the
    /// weight `M = e^{α d(·, y)}`, and vanishes at `α = 0`.
    pub s_alpha_excess: f64,
}

pub fn s_alpha(a: &CMatrix, idx: &Indexing, alpha: f64) -> Result<SAlphaProfile> {
    idx.check(a)?;
    if !(alpha >= 0.0) {
        return Err(Error::Precondition(format!("α = {alpha} must be nonnegative")));
    }
    let n = a.nrows();
    let mut rows = vec![[0.0f64; 2]; n];
    let mut cols = vec![[0.0f64; 2]; n];
    for x in 0..n {
        for y in 0..n {
            let v = a[(x, y)].norm();
            if v == 0.0 {
                continue;
            }
            let d = idx.distance(x, y).finite().ok_or_else(|| {
                Error::Precondition(format!("nonzero entry ({x}, {y}) between disconnected sites"))
            })? as f64;
            let w = (alpha * d).exp();
            let we = (alpha * d).exp_m1();
            rows[x][0] += v * w;
            rows[x][1] += v * we;
            cols[y][0] += v * w;
            cols[y][1] += v * we;
        }
    }
    let sup = |s: &[[f64; 2]], k: usize| s.iter().fold(0.0f64, |m, r| m.max(r[k]));
    let (row_sum, col_sum) = (sup(&rows, 0), sup(&cols, 0));
    Ok(SAlphaProfile {
        alpha,
        row_sum,
        col_sum,
        s_alpha: (row_sum * col_sum).sqrt(),
        s_alpha_excess: (sup(&rows, 1) * sup(&cols, 1)).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CtMode {
    /// `(ε - S̃_μ)^{-1} e^{-μ d}`, needs `S̃_μ < ε` with `S̃` the excess sum.
    SmallMu { mu: f64 },
    /// `(2/ε) exp(-α ε d / (2 S_α))`, needs `ε < 2 S_α`.
    SmallEps { alpha: f64 },
}

/// Combes-Thomas bound on `|⟨δ_x, (A - z)^{-1} δ_y⟩|` given `z ∉ σ_ε(A)`.
pub fn ct_bound(a: &CMatrix, idx: &Indexing, z: C64, eps: f64, x: usize, y: usize, mode: CtMode) -> Result<f64> {
    idx.check(a)?;
    if x >= idx.len() || y >= idx.len() {
        return Err(Error::Precondition(format!("index pair ({x}, {y}) out of range")));
    }
    let n = a.nrows();
    let s = sigma_min(&(CMatrix::identity(n, n) * z - a));
    if s < eps {
        return Err(Error::Precondition(format!("z = {z} lies in σ_ε(A): σ_min = {s} < ε = {eps}")));
    }
    let d = idx.distance(x, y);
    ct_bound_value(a, idx, eps, d, mode)
}

fn ct_bound_value(a: &CMatrix, idx: &Indexing, eps: f64, d: Distance, mode: CtMode) -> Result<f64> {
    let d = match d {
        Distance::Finite(d) => d as f64,
        Distance::Infinite => return Ok(0.0),
    };
    match mode {
        CtMode::SmallMu { mu } => {
            let s = s_alpha(a, idx, mu)?.s_alpha_excess;
            if s >= eps {
                return Err(Error::Precondition(format!("S_μ = {s} is not below ε = {eps}")));
            }
            Ok((-mu * d).exp() / (eps - s))
        }
        CtMode::SmallEps { alpha } => {
            let s = s_alpha(a, idx, alpha)?.s_alpha;
            if eps >= 2.0 * s {
                return Err(Error::Precondition(format!("ε = {eps} is not below 2 S_α = {}", 2.0 * s)));
            }
            Ok(2.0 / eps * (-alpha * eps * d / (2.0 * s)).exp())
        }
    }
}

/// How `ε` is chosen at each grid point of a verification sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum EpsRule {
    /// `ε = min(σ_min(z - A)(1 - deflate), 2 S_α (1 - 1e-9))`.
    SigmaMin { deflate: f64 },
    /// A fixed `ε`; points inside `σ_ε(A)` are skipped.
    Fixed { eps: f64 },
}

impl Default for EpsRule {
    fn default() -> Self {
        EpsRule::SigmaMin { deflate: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CtRow {
    pub re_z: f64,
    pub im_z: f64,
    pub x: usize,
    pub y: usize,
    pub measured: f64,
    pub bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CtReport {
    pub alpha: f64,
    pub s_alpha: f64,
    pub points_checked: usize,
    pub points_skipped: usize,
    pub violations: usize,
    pub rows: Vec<CtRow>,
}

/// Checks the small-`ε` bound for every index pair at every grid point.
pub fn ct_verify_region(a: &CMatrix, idx: &Indexing, grid: &[C64], rule: EpsRule, alpha: f64) -> Result<CtReport> {
    idx.check(a)?;
    let n = a.nrows();
    let sa = s_alpha(a, idx, alpha)?.s_alpha;
    let per_point: Vec<Option<Vec<CtRow>>> = grid
        .par_iter()
        .map(|&z| -> Result<Option<Vec<CtRow>>> {
            let shifted = CMatrix::identity(n, n) * z - a;
            let s = sigma_min(&shifted);
            let eps = match rule {
                EpsRule::SigmaMin { deflate } => (s * (1.0 - deflate)).min(2.0 * sa * (1.0 - 1e-9)),
                EpsRule::Fixed { eps } if s >= eps && eps < 2.0 * sa => eps,
                EpsRule::Fixed { .. } => return Ok(None),
            };
            if !(eps > 0.0) {
                return Ok(None);
            }
            // (A - z)^{-1} = -(z - A)^{-1}; only magnitudes matter.
            let g = inverse(&shifted)?;
            let mut rows = Vec::with_capacity(n * n);
            for x in 0..n {
                for y in 0..n {
                    let bound = match idx.distance(x, y) {
                        Distance::Finite(d) => 2.0 / eps * (-alpha * eps * d as f64 / (2.0 * sa)).exp(),
                        Distance::Infinite => 0.0,
                    };
                    let measured = g[(x, y)].norm();
                    rows.push(CtRow { re_z: z.re, im_z: z.im, x, y, measured, bound, ok: measured <= bound * (1.0 + 1e-10) });
                }
            }
            Ok(Some(rows))
        })
        .collect::<Result<_>>()?;
    let mut report = CtReport { alpha, s_alpha: sa, points_checked: 0, points_skipped: 0, violations: 0, rows: Vec::new() };
    for p in per_point {
        match p {
            None => report.points_skipped += 1,
            Some(rows) => {
                report.points_checked += 1;
                report.violations += rows.iter().filter(|r| !r.ok).count();
                report.rows.extend(rows);
            }
        }
    }
    Ok(report)
}

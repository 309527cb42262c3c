// Copyright 2026 The lindloc Contributors
// SPDX-License-Identifier: Apache-2.0

//! The coherence kernel
//!
//! `k(u, v) = ∮ ⟨δ_x, (z - D_x)^{-1} δ_u⟩ ⟨δ_v, (ε - z - D_y*)^{-1} δ_y⟩ dz/(2πi)`
//!
//! evaluated on a rectangular contour around the spectrum of `D_x`, and the
//! finite-volume coherence bound it feeds into.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::{fit_exponential_decay, DecayFit};
use crate::dissipative::{build_dissipative, BoundaryClosure, ClosureSpec, DissipativeHamiltonian};
use crate::dynamics::{abel_average, abel_average_raw, DensityMatrix};
use crate::error::{Error, Result};
use crate::lattice::{Distance, Lattice, Region};
use crate::linalg::{c, eigenvalues, gauss_legendre, hermitian_part, imaginary_part, max_abs_entry, sigma_min, spectral_norm, unit_vector, CMatrix, CVector, C64, I};
use crate::model::LindbladModel;

/// Gauss–Legendre points per panel.
const PANEL_ORDER: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContourOptions {
    /// Margin `γ` between the box `[-F, 0] × i[-F, F]` and the contour.
    pub gamma: f64,
    /// Real part of the right segment; `None` picks 0 for gapped `D` and `ε/2` otherwise.
    pub right_offset: Option<f64>,
    /// Replaces the measured `F = ‖Re D‖ + ‖Im D‖`.
    pub extent: Option<f64>,
    pub initial_panels: usize,
    pub max_nodes_per_side: usize,
    pub rel_tol: f64,
}

impl Default for ContourOptions {
    fn default() -> Self {
        ContourOptions { gamma: 0.5, right_offset: None, extent: None, initial_panels: 4, max_nodes_per_side: 1024, rel_tol: 1e-9 }
    }
}

/// The rectangle `r - iT → r + iT → -F-γ + iT → -F-γ - iT → r - iT` with `T = F + γ`
/// and `r` the right offset; anticlockwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Contour {
    pub extent: f64,
    pub gamma: f64,
    pub right_offset: f64,
}

impl Contour {
    pub fn vertices(&self) -> [C64; 4] {
        let t = self.extent + self.gamma;
        let l = -t;
        [c(self.right_offset, -t), c(self.right_offset, t), c(l, t), c(l, -t)]
    }

    /// The four sides as `(start, end)`, right side first.
    pub fn sides(&self) -> [(C64, C64); 4] {
        let v = self.vertices();
        [(v[0], v[1]), (v[1], v[2]), (v[2], v[3]), (v[3], v[0])]
    }

    /// Whether `z` lies strictly inside the rectangle.
    pub fn encloses(&self, z: C64) -> bool {
        let t = self.extent + self.gamma;
        z.re < self.right_offset && z.re > -t && z.im.abs() < t
    }
}

/// Contour around `σ(D)` that stays inside `Re z < ε`.
pub fn build_contour(d: &CMatrix, eps: f64, opts: &ContourOptions) -> Result<Contour> {
    if !(eps > 0.0) || !(opts.gamma > 0.0) {
        return Err(Error::Contour(format!("ε = {eps} and γ = {} must be positive", opts.gamma)));
    }
    let f = opts.extent.unwrap_or_else(|| spectral_norm(&hermitian_part(d)) + spectral_norm(&imaginary_part(d)));
    let top = crate::linalg::hermitian_eigenvalues(&hermitian_part(d)).last().copied().unwrap_or(0.0);
    let gap = -top;
    let gapped = gap > 1e-12;
    let right_offset = opts.right_offset.unwrap_or(if gapped { 0.0 } else { 0.5 * eps });
    if right_offset >= eps {
        return Err(Error::Contour(format!("right segment at {right_offset} is not left of ε = {eps}")));
    }
    if right_offset <= top + 1e-12 {
        return Err(Error::Contour(format!(
            "right segment at {right_offset} touches the numerical range of D (gap {gap:e})"
        )));
    }
    let contour = Contour { extent: f, gamma: opts.gamma, right_offset };
    if d.nrows() > 0 {
        if let Some(z) = eigenvalues(d)?.into_iter().find(|&z| !contour.encloses(z)) {
            return Err(Error::Contour(format!("eigenvalue {z} is not enclosed")));
        }
    }
    Ok(contour)
}

/// Pseudospectral distance of the nodes off the right segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContourCheck {
    pub enclosed: bool,
    /// `min σ_min(z - D)` over nodes on the top, left and bottom sides.
    pub min_sigma_off_right: f64,
    /// `min σ_min(z - D)` over nodes on the right side.
    pub min_sigma_right: f64,
}

pub fn check_contour(contour: &Contour, d: &CMatrix, nodes_per_side: usize) -> Result<ContourCheck> {
    let enclosed = eigenvalues(d)?.into_iter().all(|z| contour.encloses(z));
    let n = d.nrows();
    let panels = nodes_per_side.div_ceil(PANEL_ORDER).max(1);
    let rule = gauss_legendre(PANEL_ORDER);
    let mut mins = [f64::INFINITY; 4];
    for (k, &(a, b)) in contour.sides().iter().enumerate() {
        let pts: Vec<C64> = (0..panels)
            .flat_map(|p| {
                let (pa, pb) = (a + (b - a) * (p as f64 / panels as f64), a + (b - a) * ((p + 1) as f64 / panels as f64));
                rule.nodes.iter().map(move |&t| (pa + pb) * 0.5 + (pb - pa) * (0.5 * t)).collect::<Vec<_>>()
            })
            .collect();
        mins[k] = pts.par_iter().map(|&z| sigma_min(&(CMatrix::identity(n, n) * z - d))).reduce(|| f64::INFINITY, f64::min);
    }
    Ok(ContourCheck { enclosed, min_sigma_off_right: mins[1].min(mins[2]).min(mins[3]), min_sigma_right: mins[0] })
}

/// Diagnostics of a contour quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureInfo {
    pub nodes_per_side: [usize; 4],
    pub converged: bool,
    /// Estimated relative error: change under the last refinement over the max entry.
    pub rel_change: f64,
}

struct Panel {
    side: usize,
    a: C64,
    b: C64,
    estimate: Vec<C64>,
}

fn panel_estimate<F>(a: C64, b: C64, rule: &crate::linalg::GaussLegendre, f: &F) -> Result<Vec<C64>>
where
    F: Fn(C64) -> Result<Vec<C64>> + Sync,
{
    let mid = (a + b) * 0.5;
    let half = (b - a) * 0.5;
    let scale = half / (I * (2.0 * std::f64::consts::PI));
    let mut acc: Option<Vec<C64>> = None;
    for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
        let v = f(mid + half * t)?;
        let acc = acc.get_or_insert_with(|| vec![C64::new(0.0, 0.0); v.len()]);
        for (s, x) in acc.iter_mut().zip(v) {
            *s += x * (scale * w);
        }
    }
    Ok(acc.unwrap_or_default())
}

fn add_into(acc: &mut Vec<C64>, v: &[C64]) {
    if acc.is_empty() {
        acc.resize(v.len(), C64::new(0.0, 0.0));
    }
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

fn max_abs(v: &[C64]) -> f64 {
    v.iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

/// `∮ f(z) dz/(2πi)` over the contour by composite Gauss–Legendre panels.
///
/// Every round bisects the panels that are still unresolved and stops once the
/// total changes by at most `rel_tol` relative to its largest entry. Panels whose
/// share of the change is already below tolerance are frozen, so nodes collect
/// where the integrand varies fastest (near the spectrum).
pub fn contour_integral<F>(contour: &Contour, opts: &ContourOptions, f: F) -> Result<(Vec<C64>, QuadratureInfo)>
where
    F: Fn(C64) -> Result<Vec<C64>> + Sync,
{
    let rule = gauss_legendre(PANEL_ORDER);
    let init = opts.initial_panels.max(1);
    let sides = contour.sides();
    let seeds: Vec<(usize, C64, C64)> = sides
        .iter()
        .enumerate()
        .flat_map(|(k, &(a, b))| {
            (0..init).map(move |p| (k, a + (b - a) * (p as f64 / init as f64), a + (b - a) * ((p + 1) as f64 / init as f64)))
        })
        .collect();
    let mut active: Vec<Panel> = seeds
        .par_iter()
        .map(|&(side, a, b)| Ok(Panel { side, a, b, estimate: panel_estimate(a, b, &rule, &f)? }))
        .collect::<Result<_>>()?;
    let mut leaves = [init; 4];
    let mut frozen: Vec<C64> = Vec::new();
    let perimeter: f64 = sides.iter().map(|(a, b)| (b - a).norm()).sum();
    loop {
        let children: Vec<(Vec<C64>, Vec<C64>)> = active
            .par_iter()
            .map(|p| {
                let m = (p.a + p.b) * 0.5;
                Ok((panel_estimate(p.a, m, &rule, &f)?, panel_estimate(m, p.b, &rule, &f)?))
            })
            .collect::<Result<_>>()?;
        let mut total = frozen.clone();
        let mut errors = Vec::with_capacity(active.len());
        let mut change = 0.0;
        for (p, (l, r)) in active.iter().zip(&children) {
            add_into(&mut total, l);
            add_into(&mut total, r);
            let e = p.estimate.iter().zip(l.iter().zip(r)).fold(0.0f64, |m, (old, (a, b))| m.max((a + b - old).norm()));
            change += e;
            errors.push(e);
        }
        let scale = max_abs(&total);
        let rel_change = if scale > 0.0 { change / scale } else { 0.0 };
        for (p, _) in active.iter().zip(&children) {
            leaves[p.side] += 1;
        }
        if change <= opts.rel_tol * scale {
            let info = QuadratureInfo { nodes_per_side: leaves.map(|l| l * PANEL_ORDER), converged: true, rel_change };
            return Ok((total, info));
        }
        let mut next = Vec::new();
        let mut pending = [0usize; 4];
        for ((p, (l, r)), e) in active.into_iter().zip(children).zip(errors) {
            let share = (p.b - p.a).norm() / perimeter;
            if e <= opts.rel_tol * scale * share {
                add_into(&mut frozen, &l);
                add_into(&mut frozen, &r);
            } else {
                let m = (p.a + p.b) * 0.5;
                pending[p.side] += 2;
                next.push(Panel { side: p.side, a: p.a, b: m, estimate: l });
                next.push(Panel { side: p.side, a: m, b: p.b, estimate: r });
            }
        }
        // The next round bisects every pending panel once more.
        if next.is_empty() || (0..4).any(|s| (leaves[s] + pending[s]) * PANEL_ORDER > opts.max_nodes_per_side) {
            log::warn!("contour quadrature stopped at relative change {rel_change:e}");
            let info = QuadratureInfo { nodes_per_side: leaves.map(|l| l * PANEL_ORDER), converged: false, rel_change };
            return Ok((total, info));
        }
        active = next;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    /// `Λ_x`, `Λ_y` are the closed balls of radius `d(x,y)/3`.
    #[default]
    ThreeBlock,
    /// `Λ_x = {u : d(u,x) < d(x,y)/2}` and `Λ_y` its complement.
    TwoBlock,
}

/// The regions `Λ_x`, `Λ_y` and the rest `Λ₂` for a pair of sites.
#[derive(Debug, Clone)]
pub struct Blocks {
    pub lambda_x: Region,
    pub lambda_y: Region,
    pub rest: Region,
}

pub fn blocks(model: &LindbladModel, x: usize, y: usize, geometry: Geometry) -> Result<Blocks> {
    let lat = model.lattice();
    let range = model.declared().range;
    let d = match lat.graph_distance(x, y)? {
        Distance::Finite(d) => d,
        Distance::Infinite => return Err(Error::Precondition(format!("sites {x} and {y} are not connected"))),
    };
    let (lambda_x, lambda_y) = match geometry {
        Geometry::ThreeBlock => {
            if d < 3 * range {
                return Err(Error::DistanceBelowThreshold { distance: d.to_string(), threshold: 3 * range });
            }
            (lat.ball(x, d as f64 / 3.0)?, lat.ball(y, d as f64 / 3.0)?)
        }
        Geometry::TwoBlock => {
            if d < 2 * range {
                return Err(Error::DistanceBelowThreshold { distance: d.to_string(), threshold: 2 * range });
            }
            let dist = lat.distances_from(x);
            let lx = Region::from_mask(lat, |u| dist[u].as_f64() < d as f64 / 2.0);
            let ly = lx.complement(lat);
            (lx, ly)
        }
    };
    // Terms must not couple the two blocks directly.
    if lambda_x.distance_to(lat, &lambda_y) <= Distance::Finite(range) && geometry == Geometry::ThreeBlock {
        return Err(Error::DistanceBelowThreshold { distance: d.to_string(), threshold: 3 * range + 1 });
    }
    let rest = Region::from_mask(lat, |u| !lambda_x.contains(u) && !lambda_y.contains(u));
    Ok(Blocks { lambda_x, lambda_y, rest })
}

#[derive(Debug, Clone)]
pub struct CoherenceKernel {
    pub x: usize,
    pub y: usize,
    pub eps: f64,
    pub geometry: Geometry,
    pub blocks: Blocks,
    pub closure: BoundaryClosure,
    pub d_x: DissipativeHamiltonian,
    pub d_y: DissipativeHamiltonian,
    pub contour: Contour,
    /// `values[(i, j)] = k(Λ_x[i], Λ_y[j])`.
    pub values: CMatrix,
    pub quadrature: QuadratureInfo,
}

/// One row of the kernel table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelEntry {
    pub u: usize,
    pub v: usize,
    pub d_xu: usize,
    pub d_yv: usize,
    pub re_k: f64,
    pub im_k: f64,
    pub abs_k: f64,
}

impl CoherenceKernel {
    pub fn entries(&self, lat: &Lattice) -> Vec<KernelEntry> {
        let dx = lat.distances_from(self.x);
        let dy = lat.distances_from(self.y);
        let mut out = Vec::with_capacity(self.values.len());
        for (i, &u) in self.blocks.lambda_x.members().iter().enumerate() {
            for (j, &v) in self.blocks.lambda_y.members().iter().enumerate() {
                let k = self.values[(i, j)];
                out.push(KernelEntry {
                    u,
                    v,
                    d_xu: dx[u].finite().unwrap_or(usize::MAX),
                    d_yv: dy[v].finite().unwrap_or(usize::MAX),
                    re_k: k.re,
                    im_k: k.im,
                    abs_k: k.norm(),
                });
            }
        }
        out
    }

    /// `k(u, v)` by lattice site, zero outside `Λ_x × Λ_y`.
    pub fn at(&self, u: usize, v: usize) -> C64 {
        match (self.blocks.lambda_x.local_index(u), self.blocks.lambda_y.local_index(v)) {
            (Some(i), Some(j)) => self.values[(i, j)],
            _ => C64::new(0.0, 0.0),
        }
    }

    /// `ε Σ k(u,v) ρ(u,v)`.
    pub fn contract(&self, rho: &CMatrix) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (i, &u) in self.blocks.lambda_x.members().iter().enumerate() {
            for (j, &v) in self.blocks.lambda_y.members().iter().enumerate() {
                acc += self.values[(i, j)] * rho[(u, v)];
            }
        }
        acc * self.eps
    }

    /// Fit of `max |k|` at each `d(x,u) + d(y,v)`.
    pub fn decay_fit(&self, lat: &Lattice) -> Result<DecayFit> {
        let mut best: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
        for e in self.entries(lat) {
            let slot = best.entry(e.d_xu.saturating_add(e.d_yv)).or_insert(0.0);
            *slot = slot.max(e.abs_k);
        }
        let pts: Vec<(f64, f64)> = best.into_iter().map(|(d, m)| (d as f64, m)).collect();
        fit_exponential_decay(&pts)
    }
}

/// The closure for the blocks `Λ_x`, `Λ_y`, validated per block.
pub fn block_closure(model: &LindbladModel, blocks: &Blocks, spec: &ClosureSpec) -> Result<BoundaryClosure> {
    BoundaryClosure::build_partition(spec, model, &[&blocks.lambda_x, &blocks.lambda_y])
}

pub fn compute_kernel(
    model: &LindbladModel,
    x: usize,
    y: usize,
    eps: f64,
    closure: &ClosureSpec,
    geometry: Geometry,
    opts: &ContourOptions,
) -> Result<CoherenceKernel> {
    if !(eps > 0.0) {
        return Err(Error::Precondition(format!("ε = {eps} must be positive")));
    }
    let blocks = blocks(model, x, y, geometry)?;
    let closure = block_closure(model, &blocks, closure)?;
    let d_x = build_dissipative(model, &blocks.lambda_x, &closure)?;
    let d_y = build_dissipative(model, &blocks.lambda_y, &closure)?;
    let contour = build_contour(&d_x.matrix, eps, opts)?;
    let ix = blocks.lambda_x.local_index(x).expect("x lies in its block");
    let iy = blocks.lambda_y.local_index(y).expect("y lies in its block");
    let (nx, ny) = (d_x.dim(), d_y.dim());
    let ex = unit_vector(nx, ix);
    let ey = unit_vector(ny, iy);
    let integrand = |z: C64| -> Result<Vec<C64>> {
        // Row x of (z - D_x)^{-1} via the transposed system.
        let left = (CMatrix::identity(nx, nx) * z - &d_x.matrix).transpose();
        let a = left.lu().solve(&ex).ok_or_else(|| Error::Singular(format!("z - D_x at {z}")))?;
        let right = CMatrix::identity(ny, ny) * (c(eps, 0.0) - z) - d_y.matrix.adjoint();
        let b = right.lu().solve(&ey).ok_or_else(|| Error::Singular(format!("ε - z - D_y* at {z}")))?;
        Ok(outer(&a, &b))
    };
    let (flat, quadrature) = contour_integral(&contour, opts, integrand)?;
    let values = CMatrix::from_row_slice(nx, ny, &flat);
    Ok(CoherenceKernel { x, y, eps, geometry, blocks, closure, d_x, d_y, contour, values, quadrature })
}

fn outer(a: &CVector, b: &CVector) -> Vec<C64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for ai in a.iter() {
        for bj in b.iter() {
            out.push(ai * bj);
        }
    }
    out
}

/// The model's terms inside one of `parts` together with the closure terms: the
/// block-diagonal generator `L₀`.
pub fn block_generator(model: &LindbladModel, parts: &[&Region], closure: &BoundaryClosure) -> Result<LindbladModel> {
    let inside = |z: &Region| parts.iter().any(|p| z.is_subset(p));
    let terms = model.hamiltonian_terms().iter().chain(&closure.hamiltonian).filter(|t| inside(&t.support)).cloned().collect();
    let jumps = model.jumps().iter().chain(&closure.jumps).filter(|j| inside(&j.support)).cloned().collect();
    model.with_terms(terms, jumps)
}

/// Largest dimension for the dense `(ε - L₀)^{-1}` oracle.
pub const REPRESENTATION_ORACLE_MAX_SITES: usize = 12;

/// Compares `∮ (z - D_k)^{-1} ρ (ε - z - D_j*)^{-1} dz/(2πi)` against the direct
/// solve `(ε - L₀)^{-1}(ρ)` for `ρ` supported in one off-diagonal block `Λ_k × Λ_j`.
/// Returns the max entry deviation.
pub fn verify_integral_representation(
    model: &LindbladModel,
    parts: &[Region],
    closure: &BoundaryClosure,
    rho: &CMatrix,
    eps: f64,
    opts: &ContourOptions,
) -> Result<f64> {
    let lat = model.lattice();
    let n = lat.len();
    if n > REPRESENTATION_ORACLE_MAX_SITES {
        return Err(Error::DimensionCap { dim: n, cap: REPRESENTATION_ORACLE_MAX_SITES });
    }
    let owner: Vec<Option<usize>> = (0..n).map(|u| parts.iter().position(|p| p.contains(u))).collect();
    if owner.iter().any(Option::is_none) || parts.iter().map(Region::len).sum::<usize>() != n {
        return Err(Error::Precondition("blocks must partition the lattice".into()));
    }
    let mut block: Option<(usize, usize)> = None;
    for u in 0..n {
        for v in 0..n {
            if rho[(u, v)] != C64::new(0.0, 0.0) {
                let b = (owner[u].unwrap(), owner[v].unwrap());
                if block.is_some_and(|old| old != b) {
                    return Err(Error::Precondition("ρ spans more than one block".into()));
                }
                block = Some(b);
            }
        }
    }
    let Some((k, j)) = block else { return Ok(0.0) };
    if k == j {
        return Err(Error::Precondition("ρ lies in a diagonal block".into()));
    }
    let part_refs: Vec<&Region> = parts.iter().collect();
    let l0 = block_generator(model, &part_refs, closure)?;
    let oracle = abel_average_raw(&l0, rho, eps)? / c(eps, 0.0);

    let (rk, rj) = (&parts[k], &parts[j]);
    let dk = build_dissipative(model, rk, closure)?;
    let dj = build_dissipative(model, rj, closure)?;
    let contour = build_contour(&dk.matrix, eps, opts)?;
    let (nk, nj) = (rk.len(), rj.len());
    let sub = CMatrix::from_fn(nk, nj, |a, b| rho[(rk.members()[a], rj.members()[b])]);
    let (flat, _) = contour_integral(&contour, opts, |z| {
        let left = crate::linalg::solve(&(CMatrix::identity(nk, nk) * z - &dk.matrix), &sub)?;
        let right_t = CMatrix::identity(nj, nj) * (c(eps, 0.0) - z) - dj.matrix.adjoint();
        // X (ε - z - D_j*)^{-1} = ((ε - z - D_j*)^{-T} Xᵀ)ᵀ
        let m = crate::linalg::solve(&right_t.transpose(), &left.transpose())?.transpose();
        Ok(m.iter().copied().collect())
    })?;
    let integral = CMatrix::from_column_slice(nk, nj, &flat);
    let mut dev = 0.0f64;
    for u in 0..n {
        for v in 0..n {
            let expected = match (rk.local_index(u), rj.local_index(v)) {
                (Some(a), Some(b)) => integral[(a, b)],
                _ => C64::new(0.0, 0.0),
            };
            dev = dev.max((oracle[(u, v)] - expected).norm());
        }
    }
    Ok(dev)
}

#[derive(Debug, Clone, Serialize)]
pub struct CoherenceBoundReport {
    pub x: usize,
    pub y: usize,
    pub eps: f64,
    #[serde(skip)]
    pub abel_entry: C64,
    #[serde(skip)]
    pub kernel_term: C64,
    /// `|⟨δ_x, A_ε(ρ) δ_y⟩ - ε Σ k(u,v) ρ(u,v)|`.
    pub lhs: f64,
    pub rhs: f64,
    /// `Σ 1[u ∈ ∂_R Λ_x or v ∈ ∂_R Λ_y] |k(u,v)|`.
    pub boundary_kernel_sum: f64,
    pub boundary_norm_bound: f64,
    pub satisfied: bool,
    pub fit: Option<DecayFit>,
}

/// Triangle-inequality bound on `‖L_∂‖` from the terms outside `L₀` and the
/// closure: `2‖h‖` per Hamiltonian term and `2‖L‖²` per jump.
pub fn boundary_norm_bound(model: &LindbladModel, blocks: &Blocks, closure: &BoundaryClosure) -> f64 {
    let parts = [&blocks.lambda_x, &blocks.lambda_y, &blocks.rest];
    let outside = |z: &Region| !parts.iter().any(|p| !p.is_empty() && z.is_subset(p));
    let mut bound = 0.0;
    for t in model.hamiltonian_terms().iter().filter(|t| outside(&t.support)) {
        bound += 2.0 * t.norm();
    }
    for j in model.jumps().iter().filter(|j| outside(&j.support)) {
        bound += 2.0 * j.norm().powi(2);
    }
    for t in &closure.hamiltonian {
        bound += 2.0 * t.norm();
    }
    for j in &closure.jumps {
        bound += 2.0 * j.norm().powi(2);
    }
    bound
}

/// `∂_R Λ_ξ ∩ Λ_ξ` together with the closure supports inside `Λ_ξ`.
fn boundary_sites(lat: &Lattice, region: &Region, range: usize, closure: &BoundaryClosure) -> Region {
    let dist = lat.distances_from_set(region.complement(lat).members());
    let closure_sites: Vec<usize> = closure.supports().iter().flat_map(|z| z.members().to_vec()).collect();
    Region::from_mask(lat, |u| region.contains(u) && (dist[u] <= Distance::Finite(range) || closure_sites.contains(&u)))
}

pub fn coherence_bound_report(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    x: usize,
    y: usize,
    eps: f64,
    closure: &ClosureSpec,
    opts: &ContourOptions,
) -> Result<CoherenceBoundReport> {
    let kernel = compute_kernel(model, x, y, eps, closure, Geometry::ThreeBlock, opts)?;
    let abel = abel_average(model, rho0, eps)?;
    coherence_bound_from_kernel(model, &kernel, rho0.matrix(), abel.matrix())
}

/// [`coherence_bound_report`] with a precomputed kernel and Abel average.
pub fn coherence_bound_from_kernel(
    model: &LindbladModel,
    kernel: &CoherenceKernel,
    rho0: &CMatrix,
    abel: &CMatrix,
) -> Result<CoherenceBoundReport> {
    let lat = model.lattice();
    let (x, y) = (kernel.x, kernel.y);
    let abel_entry = abel[(x, y)];
    let kernel_term = kernel.contract(rho0);
    let lhs = (abel_entry - kernel_term).norm();
    let range = model.declared().range;
    let bx = boundary_sites(lat, &kernel.blocks.lambda_x, range, &kernel.closure);
    let by = boundary_sites(lat, &kernel.blocks.lambda_y, range, &kernel.closure);
    let mut boundary_kernel_sum = 0.0;
    for (i, &u) in kernel.blocks.lambda_x.members().iter().enumerate() {
        for (j, &v) in kernel.blocks.lambda_y.members().iter().enumerate() {
            if bx.contains(u) || by.contains(v) {
                boundary_kernel_sum += kernel.values[(i, j)].norm();
            }
        }
    }
    let norm_bound = boundary_norm_bound(model, &kernel.blocks, &kernel.closure);
    let rhs = boundary_kernel_sum * norm_bound;
    let satisfied = lhs <= rhs + 1e-10;
    Ok(CoherenceBoundReport {
        x,
        y,
        eps: kernel.eps,
        abel_entry,
        kernel_term,
        lhs,
        rhs,
        boundary_kernel_sum,
        boundary_norm_bound: norm_bound,
        satisfied,
        fit: kernel.decay_fit(lat).ok(),
    })
}

/// `max |k|` entrywise difference relative to `max |k|`.
pub fn relative_difference(a: &CMatrix, b: &CMatrix) -> f64 {
    let scale = max_abs_entry(a).max(max_abs_entry(b));
    if scale == 0.0 {
        0.0
    } else {
        max_abs_entry(&(a - b)) / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Kinetic;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn chain(n: usize) -> Arc<Lattice> {
        Arc::new(Lattice::chain(n).unwrap())
    }

    fn potential(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn deph_plus_h(n: usize, rate: f64, seed: u64) -> LindbladModel {
        let lat = chain(n);
        LindbladModel::dephasing(&lat, rate)
            .unwrap()
            .compose(&LindbladModel::anderson(&lat, Kinetic::Laplacian, 1.0, &potential(n, seed)).unwrap())
            .unwrap()
    }

    #[test]
    fn dephasing_contour_corners() {
        let d = CMatrix::identity(3, 3) * c(-0.5, 0.0);
        let opts = ContourOptions { gamma: 0.25, ..Default::default() };
        let ct = build_contour(&d, 0.1, &opts).unwrap();
        let v = ct.vertices();
        assert_abs_diff_eq!(ct.extent, 0.5, epsilon = 1e-14);
        assert_eq!(v, [c(0.0, -0.75), c(0.0, 0.75), c(-0.75, 0.75), c(-0.75, -0.75)]);
        assert!(ct.encloses(c(-0.5, 0.0)));
        // Winding number one around -½: ∮ dz/(2πi(z+½)) = 1.
        let (w, info) = contour_integral(&ct, &opts, |z| Ok(vec![1.0 / (z + 0.5)])).unwrap();
        assert!(info.converged);
        assert_abs_diff_eq!(w[0].re, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(w[0].im, 0.0, epsilon = 1e-10);
        let (w, _) = contour_integral(&ct, &opts, |z| Ok(vec![1.0 / (z - 0.05)])).unwrap();
        assert!(w[0].norm() < 1e-10);
    }

    #[test]
    fn gapless_contour_needs_an_offset() {
        let lat = chain(4);
        let m = LindbladModel::coherence_creation(&lat).unwrap();
        let d = build_dissipative(&m, &Region::full(&lat), &BoundaryClosure::none()).unwrap();
        let opts = ContourOptions { right_offset: Some(0.0), gamma: 1.0, ..Default::default() };
        assert!(matches!(build_contour(&d.matrix, 0.1, &opts), Err(Error::Contour(_))));
        let auto = build_contour(&d.matrix, 0.1, &ContourOptions::default()).unwrap();
        assert_abs_diff_eq!(auto.right_offset, 0.05, epsilon = 1e-15);
    }

    #[test]
    fn resolvent_bounded_by_one_off_the_right_segment() {
        let m = deph_plus_h(12, 1.0, 3);
        let rep = m.validate_locality();
        let region = Region::new(m.lattice(), (2..9).collect()).unwrap();
        let d = build_dissipative(&m, &region, &BoundaryClosure::none()).unwrap();
        let extent = rep.cover_count as f64 * rep.n_actual * (rep.i_actual as f64 * rep.n_actual + 1.0);
        let opts = ContourOptions { gamma: 1.0, extent: Some(extent), ..Default::default() };
        let ct = build_contour(&d.matrix, 0.1, &opts).unwrap();
        let chk = check_contour(&ct, &d.matrix, 64).unwrap();
        assert!(chk.enclosed);
        assert!(chk.min_sigma_off_right >= 1.0);
    }

    #[test]
    fn pure_dephasing_kernel_is_scalar() {
        let lat = chain(10);
        let m = LindbladModel::dephasing(&lat, 1.0).unwrap();
        for eps in [0.05, 0.5, 2.0] {
            let k = compute_kernel(&m, 0, 9, eps, &ClosureSpec::None, Geometry::ThreeBlock, &ContourOptions::default()).unwrap();
            assert_eq!(k.blocks.lambda_x.members(), &[0, 1, 2, 3]);
            assert_eq!(k.blocks.lambda_y.members(), &[6, 7, 8, 9]);
            for e in k.entries(&lat) {
                let expected = if e.u == 0 && e.v == 9 { 1.0 / (eps + 1.0) } else { 0.0 };
                assert_abs_diff_eq!(e.re_k, expected, epsilon = 1e-8);
                assert_abs_diff_eq!(e.im_k, 0.0, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn kernel_is_stable_under_refinement_and_deformation() {
        let m = deph_plus_h(20, 1.0, 5);
        let base = ContourOptions::default();
        let k1 = compute_kernel(&m, 3, 16, 0.1, &ClosureSpec::None, Geometry::ThreeBlock, &base).unwrap();
        assert!(k1.quadrature.converged);
        let finer = ContourOptions { initial_panels: 8, ..base };
        let k2 = compute_kernel(&m, 3, 16, 0.1, &ClosureSpec::None, Geometry::ThreeBlock, &finer).unwrap();
        assert!(relative_difference(&k1.values, &k2.values) <= 1e-8);
        let wider = ContourOptions { extent: Some(1.1 * k1.contour.extent + 0.1 * base.gamma), ..base };
        let k3 = compute_kernel(&m, 3, 16, 0.1, &ClosureSpec::None, Geometry::ThreeBlock, &wider).unwrap();
        assert!(relative_difference(&k1.values, &k3.values) <= 1e-8);
        let fit = k1.decay_fit(m.lattice()).unwrap();
        assert!(fit.rate > 0.0);
    }

    #[test]
    fn distance_threshold() {
        let m = deph_plus_h(12, 1.0, 1);
        assert!(matches!(
            compute_kernel(&m, 0, 2, 0.1, &ClosureSpec::None, Geometry::ThreeBlock, &ContourOptions::default()),
            Err(Error::DistanceBelowThreshold { .. })
        ));
        // d = 3R leaves the balls adjacent; the blocks would be coupled.
        assert!(compute_kernel(&m, 0, 3, 0.1, &ClosureSpec::None, Geometry::ThreeBlock, &ContourOptions::default()).is_err());
        assert!(compute_kernel(&m, 0, 2, 0.1, &ClosureSpec::None, Geometry::TwoBlock, &ContourOptions::default()).is_ok());
    }

    #[test]
    fn integral_representation_matches_dense_solve() {
        let m = deph_plus_h(10, 1.0, 7);
        let lat = m.lattice();
        let parts = vec![Region::new(lat, (0..5).collect()).unwrap(), Region::new(lat, (5..10).collect()).unwrap()];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut rho = CMatrix::zeros(10, 10);
        for u in 0..5 {
            for v in 5..10 {
                rho[(u, v)] = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
        }
        let opts = ContourOptions::default();
        let dev = verify_integral_representation(&m, &parts, &BoundaryClosure::none(), &rho, 0.1, &opts).unwrap();
        assert!(dev <= 1e-8, "deviation {dev}");
        assert_eq!(verify_integral_representation(&m, &parts, &BoundaryClosure::none(), &CMatrix::zeros(10, 10), 0.1, &opts).unwrap(), 0.0);
        let mut diag = CMatrix::zeros(10, 10);
        diag[(1, 2)] = c(1.0, 0.0);
        assert!(verify_integral_representation(&m, &parts, &BoundaryClosure::none(), &diag, 0.1, &opts).is_err());
    }

    #[test]
    fn pure_dephasing_coherence_bound() {
        let lat = chain(10);
        let m = LindbladModel::dephasing(&lat, 1.0).unwrap();
        let psi = (unit_vector(10, 0) + unit_vector(10, 9)) / c(2f64.sqrt(), 0.0);
        let rho = DensityMatrix::pure(&psi).unwrap();
        let eps = 0.3;
        let r = coherence_bound_report(&m, &rho, 0, 9, eps, &ClosureSpec::None, &ContourOptions::default()).unwrap();
        assert_eq!(r.boundary_norm_bound, 0.0);
        assert!(r.lhs < 1e-10);
        assert_abs_diff_eq!(r.kernel_term.re, eps / (2.0 * (eps + 1.0)), epsilon = 1e-10);
        assert_abs_diff_eq!(r.abel_entry.re, eps / (2.0 * (eps + 1.0)), epsilon = 1e-12);
        assert!(r.satisfied);
    }

    #[test]
    fn localized_state_kills_the_kernel_term() {
        let m = deph_plus_h(16, 1.0, 9);
        let rho = DensityMatrix::site(16, 8);
        let r = coherence_bound_report(&m, &rho, 1, 14, 0.2, &ClosureSpec::None, &ContourOptions::default()).unwrap();
        assert_eq!(r.kernel_term, C64::new(0.0, 0.0));
        assert!(r.satisfied);
    }

    #[test]
    fn three_block_matches_dense_oracle_on_the_union() {
        let m = deph_plus_h(12, 0.5, 4);
        let lat = m.lattice();
        let k = compute_kernel(&m, 1, 10, 0.2, &ClosureSpec::None, Geometry::ThreeBlock, &ContourOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rho = CMatrix::from_fn(12, 12, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let union = Region::from_mask(lat, |u| k.blocks.lambda_x.contains(u) || k.blocks.lambda_y.contains(u));
        let l11 = block_generator(&m, &[&k.blocks.lambda_x, &k.blocks.lambda_y], &k.closure).unwrap();
        let projected = CMatrix::from_fn(12, 12, |u, v| if union.contains(u) && union.contains(v) { rho[(u, v)] } else { c(0.0, 0.0) });
        let oracle = abel_average_raw(&l11, &projected, 0.2).unwrap();
        assert!((oracle[(1, 10)] - k.contract(&rho)).norm() <= 1e-8);
    }

    #[test]
    fn decay_rate_grows_with_dephasing() {
        let rates: Vec<f64> = [0.25, 1.0, 4.0]
            .iter()
            .map(|&g| {
                let m = deph_plus_h(24, g, 2);
                let k = compute_kernel(&m, 2, 21, 0.1, &ClosureSpec::None, Geometry::ThreeBlock, &ContourOptions::default()).unwrap();
                k.decay_fit(m.lattice()).unwrap().rate
            })
            .collect();
        assert!(rates[0] < rates[1] && rates[1] < rates[2], "{rates:?}");
    }
}

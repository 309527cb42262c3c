// Copyright 2026 The lindloc Contributors
// SPDX-License-Identifier: Apache-2.0

//! Non-hermitian block Hamiltonians `D_Ω = -i Σ h_Z - ½ Σ L*L` with boundary
//! closures, and the spectral and pseudospectral checks built on them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Distance, Lattice, Region};
use crate::linalg::{
    c, eigenvalues, hermitian_eigen, hermitian_eigenvalues, hermitian_part, imaginary_part, inverse, sigma_min,
    spectral_norm, unit_vector, CMatrix, C64, I, ONE,
};
use crate::model::{add_block, JumpOperator, LindbladModel, LocalTerm, TermSpec};

/// Largest dimension handled by the dense eigensolver.
pub const DENSE_EIGEN_MAX: usize = 2048;

/// How a region is closed off at its boundary.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClosureSpec {
    #[default]
    None,
    /// `B = |δ_u⟩⟨δ_u|` at each listed site.
    DephasingSite { sites: Vec<usize> },
    /// `B_u = √(2 (deg_Λ(u) - deg_Ω(u))) |δ_u⟩⟨δ_u|` at every site of Ω next to its complement.
    Dirichlet,
    Explicit {
        #[serde(default)]
        hamiltonian: Vec<TermSpec>,
        #[serde(default)]
        jumps: Vec<TermSpec>,
    },
}

/// Boundary terms `b_Z` and `B_α` of an admissible closure of a region.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryClosure {
    pub spec: ClosureSpec,
    pub hamiltonian: Vec<LocalTerm>,
    pub jumps: Vec<JumpOperator>,
}

impl BoundaryClosure {
    pub fn none() -> Self {
        BoundaryClosure { spec: ClosureSpec::None, hamiltonian: Vec::new(), jumps: Vec::new() }
    }

    /// Builds the closure of `region` and checks every support is an inner boundary
    /// set: inside the region, of diameter at most `R` and within `R` of the
    /// complement, where `R` is the model's declared range.
    pub fn build(spec: &ClosureSpec, model: &LindbladModel, region: &Region) -> Result<Self> {
        Self::build_partition(spec, model, &[region])
    }

    /// As [`BoundaryClosure::build`] for a union of disjoint parts; each support
    /// must be an inner boundary set of one part. The Dirichlet closure is applied
    /// to every part.
    pub fn build_partition(spec: &ClosureSpec, model: &LindbladModel, parts: &[&Region]) -> Result<Self> {
        let lat = model.lattice();
        for p in parts {
            p.check_in(lat)?;
        }
        let mut closure = BoundaryClosure { spec: spec.clone(), hamiltonian: Vec::new(), jumps: Vec::new() };
        match spec {
            ClosureSpec::None => {}
            ClosureSpec::DephasingSite { sites } => {
                for &u in sites {
                    lat.check_site(u)?;
                    closure.jumps.push(JumpOperator::new(lat, vec![u], CMatrix::from_element(1, 1, ONE), format!("closure {u}"))?);
                }
            }
            ClosureSpec::Dirichlet => {
                for p in parts {
                    for &u in p.members() {
                        let outside = lat.neighbors(u).iter().filter(|&&w| !p.contains(w)).count();
                        if outside > 0 {
                            let amp = c((2.0 * outside as f64).sqrt(), 0.0);
                            closure.jumps.push(JumpOperator::new(lat, vec![u], CMatrix::from_element(1, 1, amp), format!("dirichlet {u}"))?);
                        }
                    }
                }
            }
            ClosureSpec::Explicit { hamiltonian, jumps } => {
                for t in hamiltonian {
                    closure.hamiltonian.extend(LocalTerm::new(lat, t.support.clone(), t.matrix()?)?);
                }
                for (k, t) in jumps.iter().enumerate() {
                    let label = t.label.clone().unwrap_or_else(|| format!("closure {k}"));
                    closure.jumps.push(JumpOperator::new(lat, t.support.clone(), t.matrix()?, label)?);
                }
            }
        }
        closure.check_admissible(lat, parts, model.declared().range)?;
        Ok(closure)
    }

    fn check_admissible(&self, lat: &Lattice, parts: &[&Region], range: usize) -> Result<()> {
        let r = Distance::Finite(range);
        let to_complement: Vec<Vec<Distance>> =
            parts.iter().map(|p| lat.distances_from_set(p.complement(lat).members())).collect();
        for z in self.supports() {
            let ok = parts.iter().zip(&to_complement).any(|(p, dist)| {
                let near = z.members().iter().map(|&u| dist[u]).min().unwrap_or(Distance::Infinite) <= r;
                z.is_subset(p) && near
            });
            if !ok || z.diameter(lat) > r {
                return Err(Error::InvalidClosure(format!(
                    "support {:?} is not an inner boundary set at range {range}",
                    z.members()
                )));
            }
        }
        Ok(())
    }

    pub fn supports(&self) -> Vec<&Region> {
        self.hamiltonian.iter().map(|t| &t.support).chain(self.jumps.iter().map(|j| &j.support)).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.hamiltonian.is_empty() && self.jumps.is_empty()
    }
}

/// `D_Ω` as a dense matrix indexed by `region.members()`.
#[derive(Debug, Clone)]
pub struct DissipativeHamiltonian {
    pub region: Region,
    pub matrix: CMatrix,
    pub closure: BoundaryClosure,
    /// Largest eigenvalue of `½(D + D*)`; nonpositive up to rounding.
    pub hermitian_max: f64,
}

impl DissipativeHamiltonian {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `λ_min(-Re D)`.
    pub fn gap(&self) -> f64 {
        -hermitian_eigenvalues(&hermitian_part(&self.matrix)).last().copied().unwrap_or(0.0)
    }
}

/// `D_Ω = -i Σ_{Z⊆Ω} (h_Z + b_Z) - ½ Σ_{Z⊆Ω} (Σ L*L + Σ B*B)`.
///
/// Only terms supported inside the region contribute; closure terms outside it are
/// ignored, so the closure of a union `Ω ⊎ Ω'` can be shared by both parts.
pub fn build_dissipative(model: &LindbladModel, region: &Region, closure: &BoundaryClosure) -> Result<DissipativeHamiltonian> {
    region.check_in(model.lattice())?;
    let n = region.len();
    let mut d = CMatrix::zeros(n, n);
    let local = |z: &Region| -> Option<Vec<usize>> { z.members().iter().map(|&u| region.local_index(u)).collect() };
    for t in model.hamiltonian_terms().iter().chain(&closure.hamiltonian) {
        if let Some(idx) = local(&t.support) {
            add_block(&mut d, &idx, &t.matrix, -I);
        }
    }
    for j in model.jumps().iter().chain(&closure.jumps) {
        if let Some(idx) = local(&j.support) {
            add_block(&mut d, &idx, &(j.matrix.adjoint() * &j.matrix), c(-0.5, 0.0));
        }
    }
    let hermitian_max = hermitian_eigenvalues(&hermitian_part(&d)).last().copied().unwrap_or(0.0);
    if hermitian_max > 1e-12 {
        return Err(Error::Numerical(format!("D is not dissipative: Re part has eigenvalue {hermitian_max:e}")));
    }
    Ok(DissipativeHamiltonian { region: region.clone(), matrix: d, closure: closure.clone(), hermitian_max })
}

/// Spectrum of `D` together with the containment box from `‖Re D‖` and `‖Im D‖`.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralEnvelope {
    #[serde(serialize_with = "serialize_complex_list")]
    pub eigenvalues: Vec<C64>,
    pub re_norm: f64,
    pub im_norm: f64,
    /// `F = ‖Re D‖ + ‖Im D‖`; the box is `[-F, 0] × i[-F, F]`.
    pub box_extent: f64,
    pub gap: f64,
    /// Whether every eigenvalue lies in the box inflated by 1e-8, with real part ≤ 1e-10.
    pub contained: bool,
}

fn serialize_complex_list<S: serde::Serializer>(v: &[C64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

pub fn spectral_envelope(d: &DissipativeHamiltonian) -> Result<SpectralEnvelope> {
    matrix_envelope(&d.matrix)
}

/// [`spectral_envelope`] for a bare matrix.
pub fn matrix_envelope(a: &CMatrix) -> Result<SpectralEnvelope> {
    if a.nrows() > DENSE_EIGEN_MAX {
        return Err(Error::DimensionCap { dim: a.nrows(), cap: DENSE_EIGEN_MAX });
    }
    let eigenvalues = eigenvalues(a)?;
    let re_norm = spectral_norm(&hermitian_part(a));
    let im_norm = spectral_norm(&imaginary_part(a));
    let f = re_norm + im_norm;
    let tol = 1e-8;
    let contained = eigenvalues
        .iter()
        .all(|z| z.re <= 1e-10 && z.re >= -f - tol && z.im.abs() <= f + tol);
    let gap = -hermitian_eigenvalues(&hermitian_part(a)).last().copied().unwrap_or(0.0);
    Ok(SpectralEnvelope { eigenvalues, re_norm, im_norm, box_extent: f, gap, contained })
}

/// Rectangular grid of complex points, inclusive of the corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub n_re: usize,
    pub n_im: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<C64> {
        let step = |lo: f64, hi: f64, n: usize, k: usize| if n <= 1 { lo } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 };
        let mut out = Vec::with_capacity(self.n_re * self.n_im);
        for j in 0..self.n_im {
            for i in 0..self.n_re {
                out.push(c(step(self.re_min, self.re_max, self.n_re, i), step(self.im_min, self.im_max, self.n_im, j)));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PseudoPoint {
    pub re_z: f64,
    pub im_z: f64,
    pub sigma_min: f64,
    pub member: bool,
}

/// `σ_min(z - A)` on each grid point; a point belongs to `σ_ε(A)` iff `σ_min < ε`.
pub fn pseudospectrum_grid(a: &CMatrix, points: &[C64], eps: f64) -> Vec<PseudoPoint> {
    let n = a.nrows();
    points
        .par_iter()
        .map(|&z| {
            let s = sigma_min(&(CMatrix::identity(n, n) * z - a));
            PseudoPoint { re_z: z.re, im_z: z.im, sigma_min: s, member: s < eps }
        })
        .collect()
}

/// Outcome of a pointwise resolvent inequality over a set of points.
#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub checked: usize,
    /// Points excluded because the hypothesis of the estimate fails there.
    pub skipped: usize,
    pub violations: usize,
    /// Largest `measured / bound` over the checked points.
    pub worst_ratio: f64,
}

impl BoundCheck {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }

    fn tally(results: impl IntoIterator<Item = Option<(f64, f64)>>) -> Self {
        let mut out = BoundCheck { checked: 0, skipped: 0, violations: 0, worst_ratio: 0.0 };
        for r in results {
            match r {
                None => out.skipped += 1,
                Some((measured, bound)) => {
                    out.checked += 1;
                    // Allow for the rounding of the SVD-based norms.
                    if measured > bound * (1.0 + 1e-10) {
                        out.violations += 1;
                    }
                    out.worst_ratio = out.worst_ratio.max(measured / bound);
                }
            }
        }
        out
    }
}

/// `‖(A + B - z)^{-1}‖ ≤ 1/(ε - ‖B‖)` at every `z ∉ σ_ε(A)`.
pub fn perturbation_bound_check(a: &CMatrix, b: &CMatrix, eps: f64, points: &[C64]) -> Result<BoundCheck> {
    let nb = spectral_norm(b);
    if nb >= eps {
        return Err(Error::Precondition(format!("‖B‖ = {nb} is not below ε = {eps}")));
    }
    let n = a.nrows();
    let ab = a + b;
    let results: Vec<Option<(f64, f64)>> = points
        .par_iter()
        .map(|&z| {
            let id = CMatrix::identity(n, n) * z;
            if sigma_min(&(&id - a)) < eps {
                return None;
            }
            Some((1.0 / sigma_min(&(&ab - &id)), 1.0 / (eps - nb)))
        })
        .collect();
    Ok(BoundCheck::tally(results))
}

/// For dissipative `A`: `‖(ε - A)^{-1}‖ ≤ 1/ε` for each `ε`, and
/// `‖(z - A)^{-1}‖ ≤ 1/|Re z + λ|` wherever `Re z > -λ`, with `-λ` the top of the
/// numerical range's real part.
pub fn dissipative_resolvent_check(a: &CMatrix, eps_values: &[f64], points: &[C64]) -> Result<(BoundCheck, BoundCheck)> {
    let top = hermitian_eigenvalues(&hermitian_part(a)).last().copied().unwrap_or(0.0);
    if top > 1e-12 {
        return Err(Error::Precondition(format!("matrix is not dissipative (Re part eigenvalue {top:e})")));
    }
    let lambda = -top;
    let n = a.nrows();
    let on_axis = BoundCheck::tally(eps_values.iter().map(|&e| {
        let s = sigma_min(&(CMatrix::identity(n, n) * c(e, 0.0) - a));
        Some((1.0 / s, 1.0 / e))
    }));
    let moved: Vec<Option<(f64, f64)>> = points
        .par_iter()
        .map(|&z| {
            if z.re <= -lambda {
                return None;
            }
            let s = sigma_min(&(CMatrix::identity(n, n) * z - a));
            Some((1.0 / s, 1.0 / (z.re + lambda)))
        })
        .collect();
    Ok((on_axis, BoundCheck::tally(moved)))
}

/// Points at distance ≥ ε from the box `F([-1, 0] + i[-1, 1])` must satisfy
/// `σ_min(z - A) ≥ ε`; recorded as `measured = ε`, `bound = σ_min`.
pub fn box_exclusion_check(a: &CMatrix, eps: f64, points: &[C64]) -> BoundCheck {
    let f = spectral_norm(&hermitian_part(a)) + spectral_norm(&imaginary_part(a));
    let n = a.nrows();
    let results: Vec<Option<(f64, f64)>> = points
        .par_iter()
        .map(|&z| {
            let dx = if z.re > 0.0 { z.re } else if z.re < -f { -f - z.re } else { 0.0 };
            let dy = (z.im.abs() - f).max(0.0);
            if dx.hypot(dy) < eps {
                return None;
            }
            Some((eps, sigma_min(&(CMatrix::identity(n, n) * z - a))))
        })
        .collect();
    BoundCheck::tally(results)
}

/// Which sign of the rank-one correction reproduces the direct inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RankOneVariant {
    Plus,
    Minus,
    /// Both variants agree (zero strength) to tolerance.
    Both,
    Neither,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankOneReport {
    /// Max entry deviation of `G + s·GδδᵀG/(1 - s g)` from `(z - D)^{-1}`.
    pub deviation_plus: f64,
    /// Same with the correction subtracted.
    pub deviation_minus: f64,
    pub matching: RankOneVariant,
    /// Deviation of the matching variant (or the smaller one).
    pub max_entry_deviation: f64,
}

/// Compares `(z - D)^{-1}` for `D = D̂ + s|δ⟩⟨δ|` with the rank-one update of
/// `G = (z - D̂)^{-1}`. At `s = ½` the correction is `GδδᵀG/(2 - g)`, `g = G(δ, δ)`.
pub fn rank_one_resolvent_check(d_hat: &CMatrix, site: usize, z: C64, strength: f64) -> Result<RankOneReport> {
    let n = d_hat.nrows();
    if site >= n {
        return Err(Error::Precondition(format!("site {site} outside a {n}-dimensional matrix")));
    }
    let id = CMatrix::identity(n, n) * z;
    let g = inverse(&(&id - d_hat))?;
    let mut d = d_hat.clone();
    d[(site, site)] += c(strength, 0.0);
    let direct = inverse(&(&id - &d))?;
    let denom = ONE - c(strength, 0.0) * g[(site, site)];
    if denom.norm() < 1e-14 {
        return Err(Error::Singular("rank-one denominator vanishes".into()));
    }
    let corr = g.column(site) * g.row(site) * (c(strength, 0.0) / denom);
    let dev = |m: CMatrix| crate::linalg::max_abs_entry(&(m - &direct));
    let deviation_plus = dev(&g + &corr);
    let deviation_minus = dev(&g - &corr);
    let scale = crate::linalg::max_abs_entry(&direct).max(1.0);
    let tol = 1e-10 * scale;
    let matching = match (deviation_plus <= tol, deviation_minus <= tol) {
        (true, true) => RankOneVariant::Both,
        (true, false) => RankOneVariant::Plus,
        (false, true) => RankOneVariant::Minus,
        (false, false) => RankOneVariant::Neither,
    };
    Ok(RankOneReport { deviation_plus, deviation_minus, matching, max_entry_deviation: deviation_plus.min(deviation_minus) })
}

/// `min over ε` of `Re(2 - ⟨δ, (ε + iE - D̂)^{-1} δ⟩)`.
pub fn rank_one_denominator(d_hat: &CMatrix, site: usize, energy: f64, eps_values: &[f64]) -> Result<f64> {
    let n = d_hat.nrows();
    let e = unit_vector(n, site);
    let mut best = f64::INFINITY;
    for &eps in eps_values {
        let m = CMatrix::identity(n, n) * c(eps, energy) - d_hat;
        let x = m.lu().solve(&e).ok_or_else(|| Error::Singular("rank-one denominator solve".into()))?;
        best = best.min(2.0 - x[site].re);
    }
    Ok(best)
}

/// Dark states: unit vectors annihilated by every jump operator that are
/// eigenvectors of `H`.
pub fn dark_states(model: &LindbladModel) -> Vec<crate::linalg::CVector> {
    let n = model.dim();
    let (vals, vecs) = hermitian_eigen(&model.sum_ldag_l());
    let scale = vals.iter().fold(1.0f64, |a, &b| a.max(b.abs()));
    let kernel: Vec<usize> = (0..n).filter(|&k| vals[k] <= 1e-12 * scale).collect();
    if kernel.is_empty() {
        return Vec::new();
    }
    let v = CMatrix::from_fn(n, kernel.len(), |i, j| vecs[(i, kernel[j])]);
    let h = model.hamiltonian();
    // Within the kernel, a dark state is an eigenvector ψ = Vc of V*HV with (H - E)Vc = 0.
    let hv = &h * &v;
    let small = v.adjoint() * &hv;
    let (evals, _) = hermitian_eigen(&small);
    let mut clusters: Vec<f64> = Vec::new();
    for &e in &evals {
        if clusters.last().is_none_or(|&last| (e - last).abs() > 1e-9 * scale) {
            clusters.push(e);
        }
    }
    let jumps = model.jump_matrices();
    let mut out: Vec<crate::linalg::CVector> = Vec::new();
    for e in clusters {
        // hv is tall (n × k, k ≤ n), so the SVD lists all k singular values.
        let m = &hv - &v * c(e, 0.0);
        let svd = m.svd(false, true);
        let v_t = svd.v_t.expect("right singular vectors requested");
        let tol = 1e-10 * scale.max(spectral_norm(&h));
        for (k, &s) in svd.singular_values.iter().enumerate() {
            if s > tol {
                continue;
            }
            let psi = &v * v_t.row(k).adjoint();
            let psi = &psi / c(psi.norm(), 0.0);
            if jumps.iter().any(|l| (l * &psi).norm() > 1e-10) {
                continue;
            }
            let mut q = psi.clone();
            for b in &out {
                let p = b.dotc(&q);
                q -= b * p;
            }
            if q.norm() > 1e-8 {
                out.push(&q / c(q.norm(), 0.0));
            }
        }
    }
    out
}

/// `λ_min` of the Dirichlet Laplacian of `region` inside its lattice, i.e. the gap
/// of `D` for pure coherence creation with the Dirichlet closure.
pub fn dirichlet_gap(model_lattice: &std::sync::Arc<Lattice>, region: &Region) -> Result<f64> {
    let model = LindbladModel::coherence_creation(model_lattice)?;
    let closure = BoundaryClosure::build(&ClosureSpec::Dirichlet, &model, region)?;
    Ok(build_dissipative(&model, region, &closure)?.gap())
}

/// `max_{x ∈ Ω} d(x, Λ∖Ω)`.
pub fn inradius(lat: &Lattice, region: &Region) -> Distance {
    let dist = lat.distances_from_set(region.complement(lat).members());
    region.members().iter().map(|&u| dist[u]).max().unwrap_or(Distance::Finite(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_entry;
    use crate::model::Kinetic;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn chain(n: usize) -> Arc<Lattice> {
        Arc::new(Lattice::chain(n).unwrap())
    }

    fn omega(n: usize) -> Vec<f64> {
        (0..n).map(|k| ((k * 5 + 2) % 9) as f64 / 9.0 - 0.4).collect()
    }

    fn interval(lat: &Lattice, lo: usize, hi: usize) -> Region {
        Region::new(lat, (lo..=hi).collect()).unwrap()
    }

    #[test]
    fn dephasing_gives_minus_half_identity() {
        let lat = chain(8);
        let m = LindbladModel::dephasing(&lat, 1.0).unwrap();
        let d = build_dissipative(&m, &interval(&lat, 2, 5), &BoundaryClosure::none()).unwrap();
        assert!(max_abs_entry(&(&d.matrix + CMatrix::identity(4, 4) * c(0.5, 0.0))) < 1e-15);
        let h = LindbladModel::anderson(&lat, Kinetic::Laplacian, 1.0, &omega(8)).unwrap();
        let env = spectral_envelope(&build_dissipative(&m.compose(&h).unwrap(), &Region::full(&lat), &BoundaryClosure::none()).unwrap()).unwrap();
        assert_abs_diff_eq!(env.gap, 0.5, epsilon = 1e-12);
        assert!(env.eigenvalues.iter().all(|z| (z.re + 0.5).abs() < 1e-10));
        assert!(env.contained);
    }

    #[test]
    fn coherence_creation_real_part_is_laplacian() {
        let lat = chain(4);
        let m = LindbladModel::coherence_creation(&lat).unwrap();
        let d = build_dissipative(&m, &Region::full(&lat), &BoundaryClosure::none()).unwrap();
        let lap = m.sum_ldag_l() * c(-0.5, 0.0);
        assert!(max_abs_entry(&(hermitian_part(&d.matrix) - lap)) < 1e-15);
        assert_abs_diff_eq!(spectral_envelope(&d).unwrap().gap, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn incoherent_hopping_with_site_closure_is_uniformly_gapped() {
        let lat = chain(12);
        let m = LindbladModel::incoherent_hopping(&lat).unwrap();
        let region = interval(&lat, 3, 8);
        let closure = BoundaryClosure::build(&ClosureSpec::DephasingSite { sites: vec![3] }, &m, &region).unwrap();
        let d = build_dissipative(&m, &region, &closure).unwrap();
        assert!(max_abs_entry(&(hermitian_part(&d.matrix) + CMatrix::identity(6, 6) * c(0.5, 0.0))) < 1e-15);
        // A closure site deep inside the region is not admissible.
        assert!(BoundaryClosure::build(&ClosureSpec::DephasingSite { sites: vec![5] }, &m, &region).is_err());
    }

    #[test]
    fn dirichlet_interval_gap() {
        for n in 3..=20 {
            let lat = chain(n + 4);
            let gap = dirichlet_gap(&lat, &interval(&lat, 2, n + 1)).unwrap();
            let exact = 4.0 * (PI / (2.0 * (n as f64 + 1.0))).sin().powi(2);
            assert_abs_diff_eq!(gap, exact, epsilon = 1e-10);
        }
        assert_abs_diff_eq!(4.0 * (PI / 8.0).sin().powi(2), 0.585786, epsilon = 1e-6);
    }

    #[test]
    fn dirichlet_uses_degrees_in_the_parent_lattice() {
        // At the end of a chain the outer degree is 1, not 2 as it would be in ℤ.
        let lat = chain(6);
        let m = LindbladModel::coherence_creation(&lat).unwrap();
        let region = interval(&lat, 0, 2);
        let closure = BoundaryClosure::build(&ClosureSpec::Dirichlet, &m, &region).unwrap();
        assert_eq!(closure.jumps.len(), 1);
        assert_abs_diff_eq!(closure.jumps[0].matrix[(0, 0)].re, 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn pseudospectrum_of_normal_matrix_is_epsilon_neighbourhood() {
        let a = CMatrix::from_diagonal(&crate::linalg::CVector::from_vec(vec![c(-1.0, 0.0), c(-0.5, 2.0), c(0.0, -1.0)]));
        let grid = Grid { re_min: -2.0, re_max: 1.0, im_min: -2.0, im_max: 3.0, n_re: 31, n_im: 51 };
        let spec = [c(-1.0, 0.0), c(-0.5, 2.0), c(0.0, -1.0)];
        for p in pseudospectrum_grid(&a, &grid.points(), 0.3) {
            let z = c(p.re_z, p.im_z);
            let dist = spec.iter().map(|s| (z - s).norm()).fold(f64::INFINITY, f64::min);
            assert_abs_diff_eq!(p.sigma_min, dist, epsilon = 1e-12);
            assert_eq!(p.member, dist < 0.3);
        }
    }

    fn random_dissipative(n: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = CMatrix::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let h = (&g + g.adjoint()) * c(0.5, 0.0);
        let k = CMatrix::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let p = k.adjoint() * &k * c(0.1, 0.0);
        h * (-I) - p
    }

    #[test]
    fn lemma_checks_on_random_dissipative_matrices() {
        let a = random_dissipative(8, 3);
        let grid = Grid { re_min: -6.0, re_max: 3.0, im_min: -6.0, im_max: 6.0, n_re: 19, n_im: 25 }.points();
        let eps = 0.5;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let b = CMatrix::from_fn(8, 8, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let b = &b * c(0.5 * eps / spectral_norm(&b), 0.0);
        let r = perturbation_bound_check(&a, &b, eps, &grid).unwrap();
        assert!(r.holds() && r.checked > 0);
        let zero = perturbation_bound_check(&a, &CMatrix::zeros(8, 8), eps, &[c(eps, 0.0)]).unwrap();
        assert!(zero.holds() && zero.checked == 1);
        assert!(perturbation_bound_check(&a, &(b * c(3.0, 0.0)), eps, &grid).is_err());
        let (axis, moved) = dissipative_resolvent_check(&a, &[0.1, 0.5, 1.0], &grid).unwrap();
        assert!(axis.holds() && moved.holds() && moved.checked > 0);
        let boxed = box_exclusion_check(&a, eps, &grid);
        assert!(boxed.holds() && boxed.checked > 0);
        // Far away the resolvent norm is ~1/|z|.
        let far = c(1e4, 1e4);
        let s = sigma_min(&(CMatrix::identity(8, 8) * far - &a));
        assert_abs_diff_eq!(s / far.norm(), 1.0, epsilon = 1e-3);
    }

    #[test]
    fn rank_one_identity_matches_the_plus_sign() {
        let lat = chain(14);
        let h = LindbladModel::anderson(&lat, Kinetic::Laplacian, 1.0, &omega(14)).unwrap();
        let m = LindbladModel::incoherent_hopping(&lat).unwrap().compose(&h).unwrap();
        // Boundary case: Λ_y = [0, 4] keeps the unclosed site 0, where Re D has ½ missing.
        let region = interval(&lat, 0, 4);
        let d = build_dissipative(&m, &region, &BoundaryClosure::none()).unwrap();
        let mut d_hat = d.matrix.clone();
        d_hat[(0, 0)] -= c(0.5, 0.0);
        assert!(max_abs_entry(&(hermitian_part(&d_hat) + CMatrix::identity(5, 5) * c(0.5, 0.0))) < 1e-15);
        for e in [-2.0, 0.0, 1.3] {
            let r = rank_one_resolvent_check(&d_hat, 0, c(0.0, e), 0.5).unwrap();
            assert_eq!(r.matching, RankOneVariant::Plus);
            assert!(r.max_entry_deviation < 1e-10);
            let inf = rank_one_denominator(&d_hat, 0, e, &[1e-6, 1e-3, 0.1, 1.0, 10.0]).unwrap();
            assert!(inf > 0.0);
        }
        let zero = rank_one_resolvent_check(&d_hat, 0, c(0.0, 1.0), 0.0).unwrap();
        assert_eq!(zero.matching, RankOneVariant::Both);
    }

    #[test]
    fn dark_state_examples() {
        let lat = chain(5);
        let h = LindbladModel::anderson(&lat, Kinetic::Laplacian, 1.0, &omega(5)).unwrap();
        let deph = LindbladModel::dephasing(&lat, 1.0).unwrap().compose(&h).unwrap();
        assert!(dark_states(&deph).is_empty());
        let cc = LindbladModel::coherence_creation(&lat).unwrap();
        let dark = dark_states(&cc);
        assert_eq!(dark.len(), 1);
        let overlap = dark[0].iter().map(|z| z.re / 5f64.sqrt()).sum::<f64>().abs();
        assert_abs_diff_eq!(overlap, 1.0, epsilon = 1e-10);
        assert!(dark_states(&cc.compose(&h).unwrap()).is_empty());
        // With the pure Laplacian as H the uniform vector stays dark (it is a zero mode).
        let lap = LindbladModel::anderson(&lat, Kinetic::Laplacian, 0.0, &[0.0; 5]).unwrap();
        let dark = dark_states(&cc.compose(&lap).unwrap());
        assert_eq!(dark.len(), 1);
        let full = build_dissipative(&cc.compose(&lap).unwrap(), &Region::full(&lat), &BoundaryClosure::none()).unwrap();
        let dpsi = &full.matrix * &dark[0];
        assert!(dpsi.norm() < 1e-10);
    }

    #[test]
    fn inradius_bound_on_a_square() {
        let lat = Arc::new(Lattice::box_lattice(&[7, 7]).unwrap());
        let inner = Region::from_mask(&lat, |u| {
            let s = lat.site(u);
            (1..=5).contains(&s[0]) && (1..=5).contains(&s[1])
        });
        let gap = dirichlet_gap(&lat, &inner).unwrap();
        let r = inradius(&lat, &inner).finite().unwrap();
        assert_eq!(r, 3);
        assert!(gap >= 1.0 / (r as f64 * inner.len() as f64));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn built_operators_are_dissipative_and_bounded(
            seed in proptest::collection::vec(-1.0f64..1.0, 9),
            which in 0usize..3,
            lo in 0usize..4,
            len in 1usize..5,
        ) {
            let lat = chain(9);
            let h = LindbladModel::anderson(&lat, Kinetic::Laplacian, 2.0, &seed).unwrap();
            let base = match which {
                0 => LindbladModel::dephasing(&lat, 0.7).unwrap(),
                1 => LindbladModel::coherence_creation(&lat).unwrap(),
                _ => LindbladModel::incoherent_hopping(&lat).unwrap(),
            };
            let m = base.compose(&h).unwrap();
            let region = interval(&lat, lo, lo + len);
            let d = build_dissipative(&m, &region, &BoundaryClosure::none()).unwrap();
            prop_assert!(d.hermitian_max <= 1e-12);
            let rep = m.validate_locality();
            let env = spectral_envelope(&d).unwrap();
            let cr = rep.cover_count as f64;
            prop_assert!(env.re_norm <= cr * rep.i_actual as f64 * rep.n_actual.powi(2) + 1e-12);
            prop_assert!(env.im_norm <= cr * rep.n_actual + 1e-12);
            prop_assert!(env.contained);
        }
    }
}

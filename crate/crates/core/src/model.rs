// Copyright 2026 The lindloc Contributors
// SPDX-License-Identifier: Apache-2.0

//! Local Lindbladians: Hamiltonian terms `h_Z` and jump operators `L_α`, each stored
//! densely on its small support and embedded into `ℓ²(Λ)` on demand.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::lattice::{Distance, Lattice, Region};
use crate::linalg::{c, is_hermitian, spectral_norm, CMatrix, C64, ONE, ZERO};

const HERMITIAN_TOL: f64 = 1e-12;

/// A Hermitian term `h_Z`, indexed by `support.members()`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTerm {
    pub support: Region,
    pub matrix: CMatrix,
}

impl LocalTerm {
    /// Validates hermiticity and shrinks the support to the rows and columns that
    /// carry a nonzero entry. Returns `None` for the zero term.
    pub fn new(lat: &Lattice, support: Vec<usize>, matrix: CMatrix) -> Result<Option<Self>> {
        let support = check_block(lat, support, &matrix)?;
        if !is_hermitian(&matrix, HERMITIAN_TOL) {
            return Err(Error::InvalidModel(format!("Hamiltonian term on {:?} is not Hermitian", support.members())));
        }
        let keep: Vec<usize> = (0..matrix.nrows())
            .filter(|&a| (0..matrix.ncols()).any(|b| matrix[(a, b)] != ZERO || matrix[(b, a)] != ZERO))
            .collect();
        if keep.is_empty() {
            return Ok(None);
        }
        let trimmed = CMatrix::from_fn(keep.len(), keep.len(), |i, j| matrix[(keep[i], keep[j])]);
        let sites = keep.iter().map(|&a| support.members()[a]).collect();
        Ok(Some(LocalTerm { support: Region::new(lat, sites)?, matrix: trimmed }))
    }

    pub fn norm(&self) -> f64 {
        spectral_norm(&self.matrix)
    }
}

/// A jump operator `L_α` supported in `support`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpOperator {
    pub support: Region,
    pub matrix: CMatrix,
    pub label: String,
}

impl JumpOperator {
    pub fn new(lat: &Lattice, support: Vec<usize>, matrix: CMatrix, label: impl Into<String>) -> Result<Self> {
        let support = check_block(lat, support, &matrix)?;
        Ok(JumpOperator { support, matrix, label: label.into() })
    }

    pub fn norm(&self) -> f64 {
        spectral_norm(&self.matrix)
    }
}

fn check_block(lat: &Lattice, support: Vec<usize>, matrix: &CMatrix) -> Result<Region> {
    let n = support.len();
    let region = Region::new(lat, support.clone())?;
    if region.len() != n {
        return Err(Error::InvalidModel(format!("support {support:?} repeats a site")));
    }
    if matrix.nrows() != n || matrix.ncols() != n {
        return Err(Error::InvalidModel(format!(
            "term on {n} sites has a {}x{} matrix",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    // Internally every block is indexed by the sorted member list.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&k| support[k]);
    if order.iter().enumerate().any(|(k, &o)| k != o) {
        return Err(Error::InvalidModel(format!("support {support:?} must be listed in increasing order")));
    }
    Ok(region)
}

/// Locality constants `(R, I, N)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Locality {
    pub range: usize,
    pub max_jumps: usize,
    pub norm_bound: f64,
}

/// Measured locality constants against the declared ones.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalityReport {
    pub r_actual: Distance,
    pub i_actual: usize,
    pub n_actual: f64,
    /// Largest number of distinct term supports containing a single site.
    pub cover_count: usize,
    pub declared: Locality,
    pub pass: bool,
}

/// Kinetic part of the Anderson Hamiltonian.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kinetic {
    /// `-Δ`, one term `(δ_v - δ_w)(δ_v - δ_w)*` per edge.
    #[default]
    Laplacian,
    /// Pure hopping `-(|δ_v⟩⟨δ_w| + |δ_w⟩⟨δ_v|)` per edge, i.e. `-Δ` without its diagonal.
    Hopping,
}

/// A term given as support plus row-major `[re, im]` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub support: Vec<usize>,
    pub entries: Vec<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl TermSpec {
    pub fn matrix(&self) -> Result<CMatrix> {
        let n = self.support.len();
        if self.entries.len() != n || self.entries.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidModel(format!("term entries must be {n}x{n}")));
        }
        Ok(CMatrix::from_fn(n, n, |i, j| c(self.entries[i][j][0], self.entries[i][j][1])))
    }

    pub fn from_block(support: &Region, m: &CMatrix, label: Option<String>) -> Self {
        let entries = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect();
        TermSpec { support: support.members().to_vec(), entries, label }
    }
}

/// Declarative description of a model, as used by configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Dephasing {
        #[serde(default = "unit_rate")]
        rate: f64,
    },
    CoherenceCreation {},
    IncoherentHopping {
        /// Oriented edges `[w, v]` for `w → v`; defaults to `k+1 → k` along the lattice order.
        #[serde(default)]
        edges: Option<Vec<[usize; 2]>>,
    },
    Anderson {
        #[serde(default)]
        kinetic: Kinetic,
        lambda: f64,
        potential: Vec<f64>,
    },
    Explicit {
        #[serde(default)]
        hamiltonian: Vec<TermSpec>,
        #[serde(default)]
        jumps: Vec<TermSpec>,
    },
    Sum {
        parts: Vec<ModelSpec>,
    },
}

fn unit_rate() -> f64 {
    1.0
}

impl ModelSpec {
    pub fn build(&self, lat: &Arc<Lattice>) -> Result<LindbladModel> {
        match self {
            ModelSpec::Dephasing { rate } => LindbladModel::dephasing(lat, *rate),
            ModelSpec::CoherenceCreation {} => LindbladModel::coherence_creation(lat),
            ModelSpec::IncoherentHopping { edges: None } => LindbladModel::incoherent_hopping(lat),
            ModelSpec::IncoherentHopping { edges: Some(e) } => {
                let oriented: Vec<(usize, usize)> = e.iter().map(|p| (p[0], p[1])).collect();
                LindbladModel::incoherent_hopping_oriented(lat, &oriented)
            }
            ModelSpec::Anderson { kinetic, lambda, potential } => LindbladModel::anderson(lat, *kinetic, *lambda, potential),
            ModelSpec::Explicit { hamiltonian, jumps } => LindbladModel::explicit(lat, hamiltonian, jumps),
            ModelSpec::Sum { parts } => {
                let mut acc = LindbladModel::empty(lat);
                for p in parts {
                    acc = acc.compose(&p.build(lat)?)?;
                }
                Ok(acc)
            }
        }
    }
}

/// An `(R, I, N)`-local Lindbladian on a finite lattice.
#[derive(Debug, Clone)]
pub struct LindbladModel {
    lattice: Arc<Lattice>,
    hamiltonian_terms: Vec<LocalTerm>,
    jumps: Vec<JumpOperator>,
    declared: Locality,
    kind: String,
    parameters: serde_json::Value,
}

impl LindbladModel {
    pub fn new(
        lattice: &Arc<Lattice>,
        hamiltonian_terms: Vec<LocalTerm>,
        jumps: Vec<JumpOperator>,
        declared: Option<Locality>,
    ) -> Result<Self> {
        for r in hamiltonian_terms.iter().map(|t| &t.support).chain(jumps.iter().map(|j| &j.support)) {
            r.check_in(lattice)?;
        }
        let mut model = LindbladModel {
            lattice: lattice.clone(),
            hamiltonian_terms,
            jumps,
            declared: Locality { range: 0, max_jumps: 0, norm_bound: 0.0 },
            kind: "explicit".into(),
            parameters: json!({}),
        };
        model.declared = declared.unwrap_or_else(|| model.measured_locality());
        Ok(model)
    }

    pub fn empty(lattice: &Arc<Lattice>) -> Self {
        Self::new(lattice, Vec::new(), Vec::new(), None).expect("empty model is valid")
    }

    fn tagged(mut self, kind: &str, parameters: serde_json::Value) -> Self {
        self.kind = kind.into();
        self.parameters = parameters;
        self
    }

    /// `L_v = √g |δ_v⟩⟨δ_v|` for every site.
    pub fn dephasing(lat: &Arc<Lattice>, rate: f64) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::InvalidModel(format!("dephasing rate must be finite and nonnegative, got {rate}")));
        }
        let amp = c(rate.sqrt(), 0.0);
        let jumps = (0..lat.len())
            .map(|v| JumpOperator::new(lat, vec![v], CMatrix::from_element(1, 1, amp), format!("dephasing {v}")))
            .collect::<Result<Vec<_>>>()?;
        let declared = Locality { range: 0, max_jumps: 1, norm_bound: rate.sqrt() };
        Ok(Self::new(lat, Vec::new(), jumps, Some(declared))?.tagged("dephasing", json!({ "rate": rate })))
    }

    /// `L_(v,w) = (δ_v + δ_w)(δ_v - δ_w)*` for every edge `v < w`.
    pub fn coherence_creation(lat: &Arc<Lattice>) -> Result<Self> {
        let block = CMatrix::from_row_slice(2, 2, &[ONE, -ONE, ONE, -ONE]);
        let jumps = lat
            .edges()
            .into_iter()
            .map(|(v, w)| JumpOperator::new(lat, vec![v, w], block.clone(), format!("coherence {v}-{w}")))
            .collect::<Result<Vec<_>>>()?;
        let declared = Locality { range: 1, max_jumps: 1, norm_bound: 2.0 };
        Ok(Self::new(lat, Vec::new(), jumps, Some(declared))?.tagged("coherence_creation", json!({})))
    }

    /// Incoherent hopping with the default orientation: `w → v` for every edge `v < w`,
    /// so on an interval `L_k = |δ_k⟩⟨δ_{k+1}|`. The closing edge of a ring becomes
    /// `0 → n-1`, which keeps every site at in- and out-degree one.
    pub fn incoherent_hopping(lat: &Arc<Lattice>) -> Result<Self> {
        let ring_closure = |v: usize, w: usize| lat.extra_edges().contains(&(v, w));
        let oriented: Vec<(usize, usize)> =
            lat.edges().into_iter().map(|(v, w)| if ring_closure(v, w) { (v, w) } else { (w, v) }).collect();
        Ok(Self::incoherent_hopping_oriented(lat, &oriented)?.tagged("incoherent_hopping", json!({})))
    }

    /// `L_e = |δ_v⟩⟨δ_w|` for each oriented edge `(w, v)`, i.e. `w → v`.
    pub fn incoherent_hopping_oriented(lat: &Arc<Lattice>, oriented: &[(usize, usize)]) -> Result<Self> {
        let mut jumps = Vec::with_capacity(oriented.len());
        for &(w, v) in oriented {
            lat.check_site(w)?;
            lat.check_site(v)?;
            if !lat.are_adjacent(v, w) {
                return Err(Error::InvalidModel(format!("oriented edge {w} -> {v} is not an adjacency")));
            }
            let (a, b) = (v.min(w), v.max(w));
            let mut m = CMatrix::zeros(2, 2);
            // Row is the target v, column the source w, in sorted support order.
            let (row, col) = if v == a { (0, 1) } else { (1, 0) };
            m[(row, col)] = ONE;
            jumps.push(JumpOperator::new(lat, vec![a, b], m, format!("hop {w}->{v}"))?);
        }
        let declared = Locality { range: 1, max_jumps: 1, norm_bound: 1.0 };
        let edges: Vec<[usize; 2]> = oriented.iter().map(|&(w, v)| [w, v]).collect();
        Ok(Self::new(lat, Vec::new(), jumps, Some(declared))?.tagged("incoherent_hopping", json!({ "edges": edges })))
    }

    /// `H = H₀ + λV` with `V = diag(potential)`; no jump operators.
    pub fn anderson(lat: &Arc<Lattice>, kinetic: Kinetic, lambda: f64, potential: &[f64]) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(Error::InvalidModel("disorder strength must be finite".into()));
        }
        if potential.len() != lat.len() {
            return Err(Error::InvalidModel(format!(
                "potential has {} values for {} sites",
                potential.len(),
                lat.len()
            )));
        }
        if potential.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidModel("potential values must be finite".into()));
        }
        let block = match kinetic {
            Kinetic::Laplacian => CMatrix::from_row_slice(2, 2, &[ONE, -ONE, -ONE, ONE]),
            Kinetic::Hopping => CMatrix::from_row_slice(2, 2, &[ZERO, -ONE, -ONE, ZERO]),
        };
        let mut terms = Vec::new();
        for (v, w) in lat.edges() {
            terms.extend(LocalTerm::new(lat, vec![v, w], block.clone())?);
        }
        for (x, &w) in potential.iter().enumerate() {
            terms.extend(LocalTerm::new(lat, vec![x], CMatrix::from_element(1, 1, c(lambda * w, 0.0)))?);
        }
        let mut model = Self::new(lat, terms, Vec::new(), None)?;
        // The declared N is the measured maximum (the kinetic norm or λ max|ω|).
        model.declared.range = model.declared.range.max(usize::from(!lat.edges().is_empty()));
        Ok(model.tagged("anderson", json!({ "kinetic": kinetic, "lambda": lambda, "potential": potential })))
    }

    pub fn explicit(lat: &Arc<Lattice>, hamiltonian: &[TermSpec], jumps: &[TermSpec]) -> Result<Self> {
        let mut terms = Vec::new();
        for t in hamiltonian {
            terms.extend(LocalTerm::new(lat, t.support.clone(), t.matrix()?)?);
        }
        let mut ops = Vec::new();
        for (k, t) in jumps.iter().enumerate() {
            let label = t.label.clone().unwrap_or_else(|| format!("jump {k}"));
            ops.push(JumpOperator::new(lat, t.support.clone(), t.matrix()?, label)?);
        }
        Ok(Self::new(lat, terms, ops, None)?.tagged("explicit", json!({})))
    }

    /// Concatenates term lists; `R` and `N` are maxima and `I` adds up.
    pub fn compose(&self, other: &LindbladModel) -> Result<Self> {
        if !Arc::ptr_eq(&self.lattice, &other.lattice) && *self.lattice != *other.lattice {
            return Err(Error::LatticeMismatch);
        }
        let mut terms = self.hamiltonian_terms.clone();
        terms.extend(other.hamiltonian_terms.iter().cloned());
        let mut jumps = self.jumps.clone();
        jumps.extend(other.jumps.iter().cloned());
        let declared = Locality {
            range: self.declared.range.max(other.declared.range),
            max_jumps: self.declared.max_jumps + other.declared.max_jumps,
            norm_bound: self.declared.norm_bound.max(other.declared.norm_bound),
        };
        let parts = |m: &LindbladModel| {
            if m.kind == "composite" {
                m.parameters["parts"].as_array().cloned().unwrap_or_default()
            } else if m.is_empty() {
                Vec::new()
            } else {
                vec![json!({ "kind": m.kind, "parameters": m.parameters })]
            }
        };
        let mut all = parts(self);
        all.extend(parts(other));
        let model = Self::new(&self.lattice, terms, jumps, Some(declared))?;
        Ok(match all.len() {
            0 => model,
            1 => {
                let kind = all[0]["kind"].as_str().unwrap_or("explicit").to_string();
                model.tagged(&kind, all[0]["parameters"].clone())
            }
            _ => model.tagged("composite", json!({ "parts": all })),
        })
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn dim(&self) -> usize {
        self.lattice.len()
    }

    pub fn hamiltonian_terms(&self) -> &[LocalTerm] {
        &self.hamiltonian_terms
    }

    pub fn jumps(&self) -> &[JumpOperator] {
        &self.jumps
    }

    pub fn declared(&self) -> Locality {
        self.declared
    }

    pub fn kind(&self) -> &str {
        &self.kind
    }

    pub fn is_empty(&self) -> bool {
        self.hamiltonian_terms.is_empty() && self.jumps.is_empty()
    }

    /// Jump operators grouped by support, keyed by the sorted member list.
    pub fn jump_groups(&self) -> BTreeMap<Vec<usize>, Vec<&JumpOperator>> {
        let mut groups: BTreeMap<Vec<usize>, Vec<&JumpOperator>> = BTreeMap::new();
        for j in &self.jumps {
            groups.entry(j.support.members().to_vec()).or_default().push(j);
        }
        groups
    }

    /// Distinct supports of Hamiltonian terms and jump operators.
    pub fn supports(&self) -> Vec<Region> {
        let mut seen = BTreeMap::new();
        for r in self.hamiltonian_terms.iter().map(|t| &t.support).chain(self.jumps.iter().map(|j| &j.support)) {
            seen.entry(r.members().to_vec()).or_insert_with(|| r.clone());
        }
        seen.into_values().collect()
    }

    fn measured_locality(&self) -> Locality {
        let r = self.locality_report_raw();
        Locality { range: r.0.finite().unwrap_or(usize::MAX), max_jumps: r.1, norm_bound: r.2 }
    }

    fn locality_report_raw(&self) -> (Distance, usize, f64, usize) {
        let supports = self.supports();
        let r = supports.iter().map(|z| z.diameter(&self.lattice)).max().unwrap_or(Distance::Finite(0));
        let i = self.jump_groups().values().map(|g| g.len()).max().unwrap_or(0);
        let n = self
            .hamiltonian_terms
            .iter()
            .map(LocalTerm::norm)
            .chain(self.jumps.iter().map(JumpOperator::norm))
            .fold(0.0, f64::max);
        let mut cover = vec![0usize; self.dim()];
        for z in &supports {
            for &u in z.members() {
                cover[u] += 1;
            }
        }
        (r, i, n, cover.into_iter().max().unwrap_or(0))
    }

    pub fn validate_locality(&self) -> LocalityReport {
        let (r, i, n, cover) = self.locality_report_raw();
        let d = self.declared;
        // Norms are computed by SVD, so allow rounding in the last digits.
        let pass = r <= Distance::Finite(d.range) && i <= d.max_jumps && n <= d.norm_bound * (1.0 + 1e-12) + 1e-14;
        LocalityReport { r_actual: r, i_actual: i, n_actual: n, cover_count: cover, declared: d, pass }
    }

    /// Embeds a block indexed by `support` into a dense `|Λ| × |Λ|` matrix.
    pub fn embed(&self, support: &Region, block: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim(), self.dim());
        add_block(&mut out, support.members(), block, ONE);
        out
    }

    /// Dense `H = Σ h_Z`.
    pub fn hamiltonian(&self) -> CMatrix {
        let mut h = CMatrix::zeros(self.dim(), self.dim());
        for t in &self.hamiltonian_terms {
            add_block(&mut h, t.support.members(), &t.matrix, ONE);
        }
        h
    }

    /// Dense `Σ L_α* L_α`.
    pub fn sum_ldag_l(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim(), self.dim());
        for j in &self.jumps {
            add_block(&mut out, j.support.members(), &(j.matrix.adjoint() * &j.matrix), ONE);
        }
        out
    }

    /// Dense `L_α` for every jump operator.
    pub fn jump_matrices(&self) -> Vec<CMatrix> {
        self.jumps.iter().map(|j| self.embed(&j.support, &j.matrix)).collect()
    }

    /// Serializable description: kind, parameters and every term with its support.
    pub fn to_json(&self) -> serde_json::Value {
        let h: Vec<TermSpec> = self.hamiltonian_terms.iter().map(|t| TermSpec::from_block(&t.support, &t.matrix, None)).collect();
        let l: Vec<TermSpec> =
            self.jumps.iter().map(|j| TermSpec::from_block(&j.support, &j.matrix, Some(j.label.clone()))).collect();
        json!({
            "kind": self.kind,
            "parameters": self.parameters,
            "declared_locality": self.declared,
            "hamiltonian_terms": h,
            "jump_operators": l,
        })
    }

    /// Model with the same jump operators and a replaced Hamiltonian, keeping the
    /// provenance tag.
    pub fn with_terms(&self, hamiltonian_terms: Vec<LocalTerm>, jumps: Vec<JumpOperator>) -> Result<Self> {
        let mut m = Self::new(&self.lattice, hamiltonian_terms, jumps, None)?;
        m.kind = self.kind.clone();
        m.parameters = self.parameters.clone();
        Ok(m)
    }
}

/// `out[members, members] += scale * block`.
pub(crate) fn add_block(out: &mut CMatrix, members: &[usize], block: &CMatrix, scale: C64) {
    for (a, &u) in members.iter().enumerate() {
        for (b, &v) in members.iter().enumerate() {
            out[(u, v)] += scale * block[(a, b)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_entry;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn chain(n: usize) -> Arc<Lattice> {
        Arc::new(Lattice::chain(n).unwrap())
    }

    fn negative_laplacian(lat: &Lattice) -> CMatrix {
        let n = lat.len();
        CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                c(lat.degree(i) as f64, 0.0)
            } else if lat.are_adjacent(i, j) {
                -ONE
            } else {
                ZERO
            }
        })
    }

    #[test]
    fn dephasing_chain() {
        let m = LindbladModel::dephasing(&chain(5), 1.0).unwrap();
        assert_eq!(m.jumps().len(), 5);
        for j in m.jumps() {
            let p = m.embed(&j.support, &j.matrix);
            assert!(max_abs_entry(&(&p * &p - &p)) < 1e-15);
        }
        let r = LindbladModel::dephasing(&chain(8), 1.0).unwrap().validate_locality();
        assert_eq!((r.r_actual, r.i_actual, r.n_actual, r.cover_count, r.pass), (Distance::Finite(0), 1, 1.0, 1, true));
    }

    #[test]
    fn coherence_creation_chain() {
        let lat = chain(5);
        let m = LindbladModel::coherence_creation(&lat).unwrap();
        assert_eq!(m.jumps().len(), 4);
        let half = m.sum_ldag_l() * c(0.5, 0.0);
        assert!(max_abs_entry(&(half - negative_laplacian(&lat))) < 1e-12);
        for j in m.jumps() {
            assert_relative_eq!(j.norm(), 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn incoherent_hopping_interval_and_ring() {
        // On [0, n] the sum ½ Σ L*L is ½ Σ_{k=1}^n |δ_k⟩⟨δ_k|.
        let m = LindbladModel::incoherent_hopping(&chain(6)).unwrap();
        let mut expect = CMatrix::zeros(6, 6);
        for k in 1..6 {
            expect[(k, k)] = c(0.5, 0.0);
        }
        assert!(max_abs_entry(&(m.sum_ldag_l() * c(0.5, 0.0) - expect)) < 1e-15);
        let hop = &m.jumps()[0];
        assert_eq!(m.embed(&hop.support, &hop.matrix)[(0, 1)], ONE);

        let ring = Arc::new(Lattice::ring(6).unwrap());
        let m = LindbladModel::incoherent_hopping(&ring).unwrap();
        let r = m.validate_locality();
        assert_eq!((r.r_actual, r.i_actual, r.n_actual, r.cover_count, r.pass), (Distance::Finite(1), 1, 1.0, 2, true));
        // Every site loses and gains exactly one hopping channel.
        let s = m.sum_ldag_l();
        assert!(max_abs_entry(&(s - CMatrix::identity(6, 6))) < 1e-15);
        let gain: CMatrix = m.jump_matrices().iter().map(|l| l * l.adjoint()).sum();
        assert!(max_abs_entry(&(gain - CMatrix::identity(6, 6))) < 1e-15);
    }

    #[test]
    fn oriented_edge_must_be_adjacent() {
        let lat = chain(5);
        assert!(LindbladModel::incoherent_hopping_oriented(&lat, &[(0, 2)]).is_err());
    }

    #[test]
    fn anderson_norms() {
        let lat = chain(6);
        let omega = [0.3, -1.0, 0.5, 0.9, -0.2, 0.1];
        let m = LindbladModel::anderson(&lat, Kinetic::Hopping, 3.0, &omega).unwrap();
        let r = m.validate_locality();
        assert_relative_eq!(r.n_actual, 3.0_f64.max(1.0), epsilon = 1e-12);
        assert!(r.pass);
        let small = LindbladModel::anderson(&lat, Kinetic::Hopping, 3.0, &[0.1; 6]).unwrap();
        assert_relative_eq!(small.validate_locality().n_actual, 1.0, epsilon = 1e-12);

        let lap = LindbladModel::anderson(&lat, Kinetic::Laplacian, 0.0, &[0.0; 6]).unwrap();
        assert!(max_abs_entry(&(lap.hamiltonian() - negative_laplacian(&lat))) < 1e-15);
        assert_relative_eq!(lap.validate_locality().n_actual, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn explicit_terms_are_validated() {
        let lat = chain(3);
        let bad = TermSpec { support: vec![0, 1], entries: vec![vec![[0.0, 0.0], [1.0, 0.0]], vec![[0.0, 0.0], [0.0, 0.0]]], label: None };
        assert!(LindbladModel::explicit(&lat, &[bad], &[]).is_err());
        // A term written on {0, 1, 2} that only touches site 2 has support {2}.
        let mut entries = vec![vec![[0.0, 0.0]; 3]; 3];
        entries[2][2] = [1.5, 0.0];
        let t = TermSpec { support: vec![0, 1, 2], entries, label: None };
        let m = LindbladModel::explicit(&lat, &[t], &[]).unwrap();
        assert_eq!(m.hamiltonian_terms()[0].support.members(), &[2]);
    }

    #[test]
    fn composition() {
        let lat = chain(5);
        let a = LindbladModel::dephasing(&lat, 1.0).unwrap();
        let b = LindbladModel::coherence_creation(&lat).unwrap();
        let ab = a.compose(&b).unwrap();
        assert_eq!(ab.jumps().len(), 9);
        assert!(ab.validate_locality().pass);
        assert_eq!(ab.declared().range, 1);

        let same = a.compose(&LindbladModel::empty(&lat)).unwrap();
        assert_eq!(same.jumps(), a.jumps());
        assert_eq!(same.hamiltonian_terms(), a.hamiltonian_terms());
        assert_eq!(same.kind(), "dephasing");

        let other = LindbladModel::dephasing(&chain(6), 1.0).unwrap();
        assert!(matches!(a.compose(&other), Err(Error::LatticeMismatch)));
    }

    #[test]
    fn spec_json_round_trip() {
        let spec: ModelSpec = serde_json::from_str(
            r#"{"kind": "sum", "parts": [{"kind": "dephasing", "rate": 0.5}, {"kind": "anderson", "lambda": 2.0, "potential": [0.1, 0.2, 0.3]}]}"#,
        )
        .unwrap();
        let m = spec.build(&chain(3)).unwrap();
        assert_eq!((m.jumps().len(), m.kind()), (3, "composite"));
        let exported = m.to_json();
        let h: Vec<TermSpec> = serde_json::from_value(exported["hamiltonian_terms"].clone()).unwrap();
        let l: Vec<TermSpec> = serde_json::from_value(exported["jump_operators"].clone()).unwrap();
        let back = LindbladModel::explicit(&chain(3), &h, &l).unwrap();
        assert!(max_abs_entry(&(back.hamiltonian() - m.hamiltonian())) < 1e-15);
        assert!(max_abs_entry(&(back.sum_ldag_l() - m.sum_ldag_l())) < 1e-15);
        assert!(serde_json::from_str::<ModelSpec>(r#"{"kind": "dephasing", "rte": 1}"#).is_err());
    }

    fn random_lattice() -> impl Strategy<Value = Arc<Lattice>> {
        proptest::collection::vec(any::<bool>(), 12).prop_filter_map("empty", |mask| {
            let sites: Vec<Vec<i64>> =
                (0..12).filter(|&k| mask[k]).map(|k| vec![(k / 4) as i64, (k % 4) as i64]).collect();
            Lattice::explicit(2, sites).ok().map(Arc::new)
        })
    }

    proptest! {
        #[test]
        fn coherence_creation_gives_negative_laplacian(lat in random_lattice()) {
            let m = LindbladModel::coherence_creation(&lat).unwrap();
            let half = m.sum_ldag_l() * c(0.5, 0.0);
            prop_assert!(max_abs_entry(&(half - negative_laplacian(&lat))) < 1e-12);
        }

        #[test]
        fn built_in_models_pass_their_declared_locality(
            lat in random_lattice(),
            rate in 0.0f64..4.0,
            lambda in -10.0f64..10.0,
            seed in proptest::collection::vec(-1.0f64..1.0, 12),
        ) {
            let omega = &seed[..lat.len()];
            for m in [
                LindbladModel::dephasing(&lat, rate).unwrap(),
                LindbladModel::coherence_creation(&lat).unwrap(),
                LindbladModel::incoherent_hopping(&lat).unwrap(),
                LindbladModel::anderson(&lat, Kinetic::Laplacian, lambda, omega).unwrap(),
                LindbladModel::anderson(&lat, Kinetic::Hopping, lambda, omega).unwrap(),
            ] {
                prop_assert!(m.validate_locality().pass, "{}", m.kind());
            }
        }
    }
}

// Copyright 2026 The lindloc Contributors
// SPDX-License-Identifier: Apache-2.0

//! Finite subsets of ℤ^d with their induced nearest-neighbour graph.
//!
//! Sites are addressed by ordinal (their position in [`Lattice::sites`]). Distances
//! are exact BFS path lengths in the induced graph; disconnected pairs are at
//! [`Distance::Infinite`].

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Graph distance, with a sentinel for pairs in different components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Distance {
    Finite(usize),
    Infinite,
}

impl Distance {
    pub fn finite(self) -> Option<usize> {
        match self {
            Distance::Finite(d) => Some(d),
            Distance::Infinite => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Distance::Finite(_))
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Distance::Finite(d) => d as f64,
            Distance::Infinite => f64::INFINITY,
        }
    }
}

impl Serialize for Distance {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Distance::Finite(d) => s.serialize_u64(*d as u64),
            Distance::Infinite => s.serialize_str("inf"),
        }
    }
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distance::Finite(d) => write!(f, "{d}"),
            Distance::Infinite => f.write_str("inf"),
        }
    }
}

/// How to build a lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LatticeKind {
    /// The box `[0, e_1) × ... × [0, e_d)`.
    Box { extents: Vec<usize> },
    /// `{0, ..., n-1}` in ℤ.
    Chain { n: usize },
    /// A chain of `n ≥ 3` sites closed into a cycle.
    Ring { n: usize },
    Explicit { dimension: usize, sites: Vec<Vec<i64>> },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LatticeData {
    dimension: usize,
    sites: Vec<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    extra_edges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LatticeData", into = "LatticeData")]
pub struct Lattice {
    dimension: usize,
    sites: Vec<Vec<i64>>,
    index: HashMap<Vec<i64>, usize>,
    adjacency: Vec<Vec<usize>>,
    // Edges beyond ℤ^d nearest neighbours; only the ring closure uses this.
    extra_edges: Vec<(usize, usize)>,
}

impl TryFrom<LatticeData> for Lattice {
    type Error = Error;

    fn try_from(data: LatticeData) -> Result<Self> {
        Lattice::with_extra_edges(data.dimension, data.sites, data.extra_edges)
    }
}

impl From<Lattice> for LatticeData {
    fn from(lat: Lattice) -> Self {
        LatticeData { dimension: lat.dimension, sites: lat.sites, extra_edges: lat.extra_edges }
    }
}

impl Lattice {
    pub fn build(kind: &LatticeKind) -> Result<Self> {
        match kind {
            LatticeKind::Box { extents } => Self::box_lattice(extents),
            LatticeKind::Chain { n } => Self::chain(*n),
            LatticeKind::Ring { n } => Self::ring(*n),
            LatticeKind::Explicit { dimension, sites } => Self::explicit(*dimension, sites.clone()),
        }
    }

    pub fn chain(n: usize) -> Result<Self> {
        Self::box_lattice(&[n])
    }

    pub fn ring(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidLattice(format!("a ring needs at least 3 sites, got {n}")));
        }
        let sites = (0..n as i64).map(|i| vec![i]).collect();
        Self::with_extra_edges(1, sites, vec![(0, n - 1)])
    }

    /// Row-major box: the last coordinate varies fastest.
    pub fn box_lattice(extents: &[usize]) -> Result<Self> {
        if extents.is_empty() {
            return Err(Error::InvalidLattice("a box needs at least one extent".into()));
        }
        if extents.contains(&0) {
            return Err(Error::InvalidLattice("box extents must be positive".into()));
        }
        let total: usize = extents.iter().product();
        let mut sites = Vec::with_capacity(total);
        let mut cur = vec![0i64; extents.len()];
        for _ in 0..total {
            sites.push(cur.clone());
            for k in (0..extents.len()).rev() {
                cur[k] += 1;
                if (cur[k] as usize) < extents[k] {
                    break;
                }
                cur[k] = 0;
            }
        }
        Self::explicit(extents.len(), sites)
    }

    pub fn explicit(dimension: usize, sites: Vec<Vec<i64>>) -> Result<Self> {
        Self::with_extra_edges(dimension, sites, Vec::new())
    }

    fn with_extra_edges(dimension: usize, sites: Vec<Vec<i64>>, mut extra_edges: Vec<(usize, usize)>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidLattice("dimension must be positive".into()));
        }
        if sites.is_empty() {
            return Err(Error::InvalidLattice("a lattice needs at least one site".into()));
        }
        let mut index = HashMap::with_capacity(sites.len());
        for (k, s) in sites.iter().enumerate() {
            if s.len() != dimension {
                return Err(Error::InvalidLattice(format!("site {s:?} does not have {dimension} coordinates")));
            }
            if index.insert(s.clone(), k).is_some() {
                return Err(Error::InvalidLattice(format!("duplicate site {s:?}")));
            }
        }
        let mut adjacency = vec![Vec::new(); sites.len()];
        let mut nb = vec![0i64; dimension];
        for (k, s) in sites.iter().enumerate() {
            for axis in 0..dimension {
                nb.copy_from_slice(s);
                nb[axis] += 1;
                if let Some(&j) = index.get(&nb) {
                    adjacency[k].push(j);
                    adjacency[j].push(k);
                }
            }
        }
        for e in extra_edges.iter_mut() {
            let (a, b) = (e.0.min(e.1), e.0.max(e.1));
            if a == b || b >= sites.len() {
                return Err(Error::InvalidLattice(format!("invalid extra edge ({}, {})", e.0, e.1)));
            }
            if !adjacency[a].contains(&b) {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
            *e = (a, b);
        }
        for adj in adjacency.iter_mut() {
            adj.sort_unstable();
        }
        Ok(Lattice { dimension, sites, index, adjacency, extra_edges })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Vec<i64>] {
        &self.sites
    }

    pub fn site(&self, k: usize) -> &[i64] {
        &self.sites[k]
    }

    /// Ordinal of a coordinate vector.
    pub fn ordinal(&self, site: &[i64]) -> Result<usize> {
        self.index.get(site).copied().ok_or_else(|| Error::UnknownSite(format!("{site:?}")))
    }

    pub fn check_site(&self, k: usize) -> Result<()> {
        if k < self.len() {
            Ok(())
        } else {
            Err(Error::UnknownSite(format!("#{k}")))
        }
    }

    pub fn neighbors(&self, k: usize) -> &[usize] {
        &self.adjacency[k]
    }

    pub fn degree(&self, k: usize) -> usize {
        self.adjacency[k].len()
    }

    /// Undirected edges `(v, w)` with `v < w`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (v, adj) in self.adjacency.iter().enumerate() {
            out.extend(adj.iter().filter(|&&w| w > v).map(|&w| (v, w)));
        }
        out
    }

    /// Edges added on top of the ℤ^d neighbours, such as the closing edge of a ring.
    pub fn extra_edges(&self) -> &[(usize, usize)] {
        &self.extra_edges
    }

    pub fn are_adjacent(&self, v: usize, w: usize) -> bool {
        self.adjacency[v].binary_search(&w).is_ok()
    }

    /// BFS distances from every source in `sources` (multi-source).
    pub fn distances_from_set(&self, sources: &[usize]) -> Vec<Distance> {
        let mut dist = vec![Distance::Infinite; self.len()];
        let mut queue = VecDeque::new();
        for &s in sources {
            if dist[s] == Distance::Infinite {
                dist[s] = Distance::Finite(0);
                queue.push_back(s);
            }
        }
        while let Some(v) = queue.pop_front() {
            let dv = dist[v].finite().unwrap_or(0);
            for &w in &self.adjacency[v] {
                if dist[w] == Distance::Infinite {
                    dist[w] = Distance::Finite(dv + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn distances_from(&self, x: usize) -> Vec<Distance> {
        self.distances_from_set(&[x])
    }

    pub fn graph_distance(&self, x: usize, y: usize) -> Result<Distance> {
        self.check_site(x)?;
        self.check_site(y)?;
        Ok(self.distances_from(x)[y])
    }

    /// All-pairs distances, one BFS per site.
    pub fn distance_matrix(&self) -> Vec<Vec<Distance>> {
        (0..self.len()).map(|x| self.distances_from(x)).collect()
    }

    /// `{u : d(x, u) ≤ r}`.
    pub fn ball(&self, x: usize, r: f64) -> Result<Region> {
        self.check_site(x)?;
        let dist = self.distances_from(x);
        Ok(Region::from_mask(self, |u| dist[u].as_f64() <= r))
    }

    /// Boundary sets of the bipartition `half | Λ∖half` for range `R`.
    pub fn bipartition_boundaries(&self, half: &Region, range: usize) -> Result<BoundaryFamily> {
        self.bipartition_boundaries_with(half, range, &[])
    }

    /// As [`Lattice::bipartition_boundaries`], additionally considering the given
    /// supports (typically the supports of a model's terms).
    pub fn bipartition_boundaries_with(&self, half: &Region, range: usize, supports: &[Region]) -> Result<BoundaryFamily> {
        half.check_in(self)?;
        let complement = half.complement(self);
        let mut seen: HashSet<Vec<usize>> = HashSet::new();
        let mut candidates = self.connected_sets(range);
        candidates.extend(supports.iter().filter(|z| z.diameter(self) <= Distance::Finite(range)).cloned());

        let d_half = self.distances_from_set(half.members());
        let d_comp = self.distances_from_set(complement.members());
        let within = |z: &Region, dist: &[Distance]| z.members().iter().map(|&u| dist[u]).min().unwrap_or(Distance::Infinite) <= Distance::Finite(range);

        let mut crossing_sets = Vec::new();
        let mut inner_half = Vec::new();
        let mut inner_complement = Vec::new();
        for z in candidates {
            if z.is_empty() || !seen.insert(z.members().to_vec()) {
                continue;
            }
            let touches_half = z.members().iter().any(|&u| half.contains(u));
            let touches_comp = z.members().iter().any(|&u| !half.contains(u));
            if touches_half && touches_comp {
                crossing_sets.push(z);
            } else if touches_half {
                if within(&z, &d_comp) {
                    inner_half.push(z);
                }
            } else if within(&z, &d_half) {
                inner_complement.push(z);
            }
        }
        for list in [&mut crossing_sets, &mut inner_half, &mut inner_complement] {
            list.sort_by(|a, b| a.members().cmp(b.members()));
        }
        let r = Distance::Finite(range);
        let r_boundary = Region::from_mask(self, |u| d_half[u].max(d_comp[u]) <= r);
        Ok(BoundaryFamily { range, crossing_sets, inner_half, inner_complement, r_boundary })
    }

    /// Every connected vertex set of diameter at most `range`.
    ///
    /// Each set is grown from its smallest vertex `v` using only vertices larger than
    /// `v` inside the ball of radius `range` around `v` (the classic ESU scheme), so
    /// every set is produced exactly once. Since adding vertices never shrinks the
    /// diameter, branches are cut as soon as it exceeds `range`.
    pub fn connected_sets(&self, range: usize) -> Vec<Region> {
        let mut out = Vec::new();
        let mut rows: HashMap<usize, Vec<Distance>> = HashMap::new();
        for v in 0..self.len() {
            let dv = self.distances_from(v);
            let allowed: HashSet<usize> = (v + 1..self.len()).filter(|&u| dv[u] <= Distance::Finite(range)).collect();
            let ext: Vec<usize> = self.adjacency[v].iter().copied().filter(|u| allowed.contains(u)).collect();
            self.extend_sets(vec![v], ext, &allowed, range, &mut rows, &mut out);
        }
        out
    }

    fn extend_sets(
        &self,
        sub: Vec<usize>,
        mut ext: Vec<usize>,
        allowed: &HashSet<usize>,
        range: usize,
        rows: &mut HashMap<usize, Vec<Distance>>,
        out: &mut Vec<Region>,
    ) {
        out.push(Region::from_members(self, sub.clone()));
        while let Some(w) = ext.pop() {
            let row = rows.entry(w).or_insert_with(|| self.distances_from(w));
            if sub.iter().any(|&u| row[u] > Distance::Finite(range)) {
                continue;
            }
            let mut next_ext = ext.clone();
            for &u in &self.adjacency[w] {
                let exclusive = allowed.contains(&u)
                    && !sub.contains(&u)
                    && !ext.contains(&u)
                    && u != w
                    && !sub.iter().any(|&s| self.are_adjacent(s, u));
                if exclusive && !next_ext.contains(&u) {
                    next_ext.push(u);
                }
            }
            let mut next_sub = sub.clone();
            next_sub.push(w);
            self.extend_sets(next_sub, next_ext, allowed, range, rows, out);
        }
    }
}

/// A subset of a lattice, stored as sorted ordinals plus a membership mask.
///
/// A region does not hold a reference to its lattice; operations that need the
/// geometry take the lattice as an argument.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Region {
    members: Vec<usize>,
    mask: Vec<bool>,
}

impl Region {
    pub fn new(lat: &Lattice, mut members: Vec<usize>) -> Result<Self> {
        members.sort_unstable();
        members.dedup();
        if members.last().is_some_and(|&m| m >= lat.len()) {
            return Err(Error::RegionOutsideLattice);
        }
        Ok(Self::from_sorted(lat.len(), members))
    }

    fn from_members(lat: &Lattice, mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        Self::from_sorted(lat.len(), members)
    }

    fn from_sorted(n: usize, members: Vec<usize>) -> Self {
        let mut mask = vec![false; n];
        for &m in &members {
            mask[m] = true;
        }
        Region { members, mask }
    }

    pub fn from_mask(lat: &Lattice, pred: impl Fn(usize) -> bool) -> Self {
        Self::from_sorted(lat.len(), (0..lat.len()).filter(|&u| pred(u)).collect())
    }

    pub fn full(lat: &Lattice) -> Self {
        Self::from_mask(lat, |_| true)
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, u: usize) -> bool {
        self.mask.get(u).copied().unwrap_or(false)
    }

    /// Position of site `u` inside this region, if present.
    pub fn local_index(&self, u: usize) -> Option<usize> {
        self.members.binary_search(&u).ok()
    }

    pub fn lattice_len(&self) -> usize {
        self.mask.len()
    }

    pub fn check_in(&self, lat: &Lattice) -> Result<()> {
        if self.mask.len() == lat.len() {
            Ok(())
        } else {
            Err(Error::RegionOutsideLattice)
        }
    }

    pub fn complement(&self, lat: &Lattice) -> Region {
        Region::from_mask(lat, |u| !self.contains(u))
    }

    pub fn is_subset(&self, other: &Region) -> bool {
        self.members.iter().all(|&u| other.contains(u))
    }

    pub fn intersects(&self, other: &Region) -> bool {
        self.members.iter().any(|&u| other.contains(u))
    }

    /// Largest parent-lattice distance between two members; 0 for the empty set.
    pub fn diameter(&self, lat: &Lattice) -> Distance {
        let mut best = Distance::Finite(0);
        for (k, &u) in self.members.iter().enumerate() {
            if k + 1 == self.members.len() {
                break;
            }
            let row = lat.distances_from(u);
            for &v in &self.members[k + 1..] {
                best = best.max(row[v]);
            }
        }
        best
    }

    /// `d(self, other) = min` over member pairs.
    pub fn distance_to(&self, lat: &Lattice, other: &Region) -> Distance {
        let dist = lat.distances_from_set(&self.members);
        other.members.iter().map(|&u| dist[u]).min().unwrap_or(Distance::Infinite)
    }
}

/// Boundary sets of a bipartition `Λ = half ∪ complement`.
#[derive(Debug, Clone)]
pub struct BoundaryFamily {
    pub range: usize,
    /// Sets of diameter ≤ R meeting both halves.
    pub crossing_sets: Vec<Region>,
    /// Sets inside `half` within distance R of the complement.
    pub inner_half: Vec<Region>,
    /// Sets inside the complement within distance R of `half`.
    pub inner_complement: Vec<Region>,
    /// `{u : max(d(u, half), d(u, complement)) ≤ R}`; the same set for both halves.
    pub r_boundary: Region,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chain(n: usize) -> Lattice {
        Lattice::chain(n).unwrap()
    }

    #[test]
    fn box_ring_and_grid_edge_counts() {
        assert_eq!(chain(10).len(), 10);
        assert_eq!(chain(10).edges().len(), 9);
        let ring = Lattice::ring(6).unwrap();
        assert_eq!((ring.len(), ring.edges().len()), (6, 6));
        let grid = Lattice::box_lattice(&[3, 3]).unwrap();
        assert_eq!((grid.len(), grid.edges().len()), (9, 12));
    }

    #[test]
    fn grid_edges_match_exhaustive_l1_enumeration() {
        let grid = Lattice::box_lattice(&[3, 4]).unwrap();
        let mut count = 0;
        for (i, a) in grid.sites().iter().enumerate() {
            for b in &grid.sites()[i + 1..] {
                let l1: i64 = a.iter().zip(b).map(|(p, q)| (p - q).abs()).sum();
                if l1 == 1 {
                    count += 1;
                }
            }
        }
        assert_eq!(grid.edges().len(), count);
    }

    #[test]
    fn construction_errors() {
        assert!(Lattice::box_lattice(&[3, 0]).is_err());
        assert!(Lattice::explicit(1, vec![vec![0], vec![0]]).is_err());
        assert!(Lattice::explicit(2, vec![vec![0]]).is_err());
        assert!(Lattice::ring(2).is_err());
    }

    #[test]
    fn distances() {
        assert_eq!(chain(10).graph_distance(2, 7).unwrap(), Distance::Finite(5));
        let sq = Lattice::box_lattice(&[2, 2]).unwrap();
        let (a, b) = (sq.ordinal(&[0, 0]).unwrap(), sq.ordinal(&[1, 1]).unwrap());
        assert_eq!(sq.graph_distance(a, b).unwrap(), Distance::Finite(2));
        let split = Lattice::explicit(2, vec![vec![0, 0], vec![1, 1]]).unwrap();
        assert_eq!(split.graph_distance(0, 1).unwrap(), Distance::Infinite);
        assert!(chain(3).graph_distance(0, 3).is_err());
        assert_eq!(Lattice::ring(6).unwrap().graph_distance(0, 5).unwrap(), Distance::Finite(1));
    }

    #[test]
    fn balls() {
        let lat = chain(16);
        assert_eq!(lat.ball(0, 3.0).unwrap().members(), &[0, 1, 2, 3]);
        assert_eq!(lat.ball(7, 0.0).unwrap().members(), &[7]);
        let grid = Lattice::box_lattice(&[3, 3]).unwrap();
        let c = grid.ordinal(&[1, 1]).unwrap();
        let ball = grid.ball(c, 1.0).unwrap();
        let mut expect: Vec<usize> =
            [[1, 1], [0, 1], [2, 1], [1, 0], [1, 2]].iter().map(|s| grid.ordinal(s).unwrap()).collect();
        expect.sort_unstable();
        assert_eq!(ball.members(), expect.as_slice());
    }

    fn brute_force_crossing(lat: &Lattice, half: &Region, range: usize, max_size: usize) -> Vec<Vec<usize>> {
        // All subsets with at most `max_size` members and diameter ≤ R meeting both halves.
        let n = lat.len();
        let mut out = Vec::new();
        for mask in 1u32..(1 << n) {
            if mask.count_ones() as usize > max_size {
                continue;
            }
            let members: Vec<usize> = (0..n).filter(|&k| mask & (1 << k) != 0).collect();
            let z = Region::new(lat, members.clone()).unwrap();
            if z.diameter(lat) <= Distance::Finite(range)
                && members.iter().any(|&u| half.contains(u))
                && members.iter().any(|&u| !half.contains(u))
            {
                out.push(members);
            }
        }
        out
    }

    #[test]
    fn chain_bipartition_boundaries() {
        let lat = chain(10);
        let half = Region::new(&lat, (0..4).collect()).unwrap();
        let fam = lat.bipartition_boundaries(&half, 1).unwrap();
        let crossing: Vec<&[usize]> = fam.crossing_sets.iter().map(|z| z.members()).collect();
        assert_eq!(crossing, vec![&[3usize, 4][..]]);
        assert_eq!(brute_force_crossing(&lat, &half, 1, 2), vec![vec![3, 4]]);
        assert_eq!(fam.r_boundary.members(), &[3, 4]);

        assert!(lat.bipartition_boundaries(&half, 0).unwrap().crossing_sets.is_empty());
        let fam2 = lat.bipartition_boundaries(&half, 2).unwrap();
        assert_eq!(fam2.r_boundary.members(), &[2, 3, 4, 5]);
        assert!(fam2.inner_half.iter().all(|z| z.is_subset(&half)));
    }

    #[test]
    fn connected_sets_match_brute_force_on_grid() {
        let grid = Lattice::box_lattice(&[3, 3]).unwrap();
        let d = grid.distance_matrix();
        for range in 0..=3 {
            let mut expect = 0;
            for mask in 1u32..(1 << 9) {
                let members: Vec<usize> = (0..9).filter(|&k| mask & (1 << k) != 0).collect();
                let diam_ok = members.iter().all(|&a| members.iter().all(|&b| d[a][b] <= Distance::Finite(range)));
                let sub = Lattice::explicit(2, members.iter().map(|&u| grid.site(u).to_vec()).collect()).unwrap();
                if diam_ok && sub.distances_from(0).iter().all(|x| x.is_finite()) {
                    expect += 1;
                }
            }
            assert_eq!(grid.connected_sets(range).len(), expect, "range {range}");
        }
    }

    #[test]
    fn supports_widen_the_family() {
        let lat = chain(10);
        let half = Region::new(&lat, (0..4).collect()).unwrap();
        let gap = Region::new(&lat, vec![2, 4]).unwrap();
        let fam = lat.bipartition_boundaries_with(&half, 2, std::slice::from_ref(&gap)).unwrap();
        assert!(fam.crossing_sets.contains(&gap));
    }

    #[test]
    fn json_round_trip() {
        let ring = Lattice::ring(5).unwrap();
        let text = serde_json::to_string(&ring).unwrap();
        let back: Lattice = serde_json::from_str(&text).unwrap();
        assert_eq!(back, ring);
        let plain: Lattice = serde_json::from_str(r#"{"dimension": 2, "sites": [[0,0],[0,1]]}"#).unwrap();
        assert_eq!(plain.edges(), vec![(0, 1)]);
    }

    fn random_subset_of_box() -> impl Strategy<Value = Lattice> {
        proptest::collection::vec(any::<bool>(), 16).prop_filter_map("empty", |mask| {
            let sites: Vec<Vec<i64>> =
                (0..16).filter(|&k| mask[k]).map(|k| vec![(k / 4) as i64, (k % 4) as i64]).collect();
            Lattice::explicit(2, sites).ok()
        })
    }

    proptest! {
        #[test]
        fn distance_is_a_metric_on_components(lat in random_subset_of_box()) {
            let d = lat.distance_matrix();
            for x in 0..lat.len() {
                prop_assert_eq!(d[x][x], Distance::Finite(0));
                for y in 0..lat.len() {
                    prop_assert_eq!(d[x][y], d[y][x]);
                    for z in 0..lat.len() {
                        if let (Some(a), Some(b)) = (d[x][y].finite(), d[y][z].finite()) {
                            prop_assert!(d[x][z].finite().unwrap() <= a + b);
                        }
                    }
                }
            }
        }

        #[test]
        fn full_box_distance_is_l1(e0 in 1usize..5, e1 in 1usize..5, e2 in 1usize..3) {
            let lat = Lattice::box_lattice(&[e0, e1, e2]).unwrap();
            let d = lat.distance_matrix();
            for x in 0..lat.len() {
                for y in 0..lat.len() {
                    let l1: i64 = lat.site(x).iter().zip(lat.site(y)).map(|(a, b)| (a - b).abs()).sum();
                    prop_assert_eq!(d[x][y], Distance::Finite(l1 as usize));
                }
            }
        }

        #[test]
        fn balls_are_nested(lat in random_subset_of_box(), r1 in 0.0f64..4.0, extra in 0.0f64..3.0) {
            let small = lat.ball(0, r1).unwrap();
            let large = lat.ball(0, r1 + extra).unwrap();
            prop_assert!(small.is_subset(&large));
        }

        #[test]
        fn crossing_sets_meet_both_halves(lat in random_subset_of_box(), split in proptest::collection::vec(any::<bool>(), 16), range in 0usize..3) {
            let half = Region::from_mask(&lat, |u| split[u]);
            let fam = lat.bipartition_boundaries(&half, range).unwrap();
            for z in &fam.crossing_sets {
                prop_assert!(z.diameter(&lat) <= Distance::Finite(range));
                prop_assert!(z.intersects(&half));
                prop_assert!(z.members().iter().any(|&u| !half.contains(u)));
            }
            for u in fam.r_boundary.members() {
                let to_half = lat.distances_from_set(half.members())[*u];
                let to_comp = lat.distances_from_set(half.complement(&lat).members())[*u];
                prop_assert!(to_half.max(to_comp) <= Distance::Finite(range));
            }
        }

        #[test]
        fn connected_sets_are_unique_and_connected(lat in random_subset_of_box(), range in 0usize..3) {
            let sets = lat.connected_sets(range);
            let unique: HashSet<Vec<usize>> = sets.iter().map(|z| z.members().to_vec()).collect();
            prop_assert_eq!(unique.len(), sets.len());
            for z in &sets {
                let sub = Lattice::explicit(2, z.members().iter().map(|&u| lat.site(u).to_vec()).collect()).unwrap();
                prop_assert!(sub.distances_from(0).iter().all(|d| d.is_finite()));
            }
        }
    }
}

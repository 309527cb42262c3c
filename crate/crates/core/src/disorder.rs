// Copyright 2026 The lindloc Contributors
// SPDX-License-Identifier: Apache-2.0

//! Dissipative Anderson models `A_λ = A₀ + iλV`: seeded potentials, Monte-Carlo
//! fractional moments of resolvent entries, the strong-disorder threshold and
//! disorder-averaged coherences.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::abel_average_raw;
use crate::error::{Error, Result};
use crate::lattice::{Distance, Lattice};
use crate::linalg::{c, unit_vector, CMatrix, C64};
use crate::model::{Kinetic, LindbladModel};

/// Values below this are treated as numerical zero by the decay fit.
pub const FIT_FLOOR: f64 = 1e-13;

/// Single-site distribution of the potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Distribution {
    Uniform { a: f64, b: f64 },
}

impl Distribution {
    /// `‖p‖_∞`.
    pub fn density_sup(&self) -> f64 {
        match *self {
            Distribution::Uniform { a, b } => 1.0 / (b - a),
        }
    }

    fn check(&self) -> Result<()> {
        match *self {
            Distribution::Uniform { a, b } if a.is_finite() && b.is_finite() && a < b => Ok(()),
            Distribution::Uniform { a, b } => Err(Error::Precondition(format!("uniform({a}, {b}) needs finite a < b"))),
        }
    }

    fn draw(&self, u: f64) -> f64 {
        match *self {
            Distribution::Uniform { a, b } => a + (b - a) * u,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderSpec {
    pub distribution: Distribution,
    pub lambda: f64,
    pub master_seed: u64,
}

impl DisorderSpec {
    pub fn uniform(a: f64, b: f64, lambda: f64, master_seed: u64) -> Self {
        DisorderSpec { distribution: Distribution::Uniform { a, b }, lambda, master_seed }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        DisorderSpec { lambda, ..*self }
    }
}

/// Site potential of one realization.
///
/// Each value depends only on `(master_seed, realization, site)`: the generator is
/// keyed by the seed, the realization selects the stream and the site the position
/// within it, so draws can be made in any order and on any thread.
pub fn sample_potential(spec: &DisorderSpec, n_sites: usize, realization: u64) -> Result<Vec<f64>> {
    spec.distribution.check()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.master_seed);
    rng.set_stream(realization);
    Ok((0..n_sites)
        .map(|x| {
            rng.set_word_pos(2 * x as u128);
            spec.distribution.draw(rng.random::<f64>())
        })
        .collect())
}

/// Monte-Carlo estimate of `𝔼|⟨δ_x, (z - A_λ)^{-1} δ_y⟩|^s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub s: f64,
    pub re_z: f64,
    pub im_z: f64,
    pub x: usize,
    pub y: usize,
    pub mean: f64,
    pub std_error: f64,
    /// Median of ten group means, a robustness column.
    pub median_of_means: f64,
    pub n_samples: usize,
}

/// Sample mean, standard error and median of means, summed in index order.
fn summarize(samples: &[f64]) -> (f64, f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let se = if n > 1 {
        let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    let groups = n.min(10);
    let mut means: Vec<f64> = (0..groups)
        .map(|g| {
            let lo = g * n / groups;
            let hi = (g + 1) * n / groups;
            samples[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    means.sort_by(f64::total_cmp);
    let median = if groups % 2 == 1 { means[groups / 2] } else { 0.5 * (means[groups / 2 - 1] + means[groups / 2]) };
    (mean, se, median)
}

/// Runs `f` on each realization index in parallel and returns results in index
/// order. A realization whose solve is singular is redrawn from a shifted stream.
fn per_realization<T: Send>(n_samples: usize, f: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    (0..n_samples as u64)
        .into_par_iter()
        .map(|r| {
            let mut stream = r;
            for attempt in 0..8u64 {
                match f(stream) {
                    Err(Error::Singular(msg)) => {
                        log::warn!("realization {r}: singular solve ({msg}), redrawing (attempt {attempt})");
                        stream = r | ((attempt + 1) << 48);
                    }
                    other => return other,
                }
            }
            Err(Error::Singular(format!("realization {r} stayed singular")))
        })
        .collect()
}

fn check_s(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Precondition(format!("s = {s} must lie in (0, 1)")));
    }
    Ok(())
}

/// Fractional moments of resolvent entries of `A_λ = A₀ + iλV` for each pair.
pub fn fractional_moment_mc(
    a0: &CMatrix,
    spec: &DisorderSpec,
    s: f64,
    z: C64,
    pairs: &[(usize, usize)],
    n_samples: usize,
) -> Result<Vec<MomentEstimate>> {
    check_s(s)?;
    let n = a0.nrows();
    if let Some(&(x, y)) = pairs.iter().find(|&&(x, y)| x >= n || y >= n) {
        return Err(Error::Precondition(format!("pair ({x}, {y}) outside a {n}-site operator")));
    }
    let columns: Vec<usize> = pairs.iter().map(|p| p.1).collect::<BTreeSet<_>>().into_iter().collect();
    let samples: Vec<Vec<f64>> = per_realization(n_samples, |r| {
        let v = sample_potential(spec, n, r)?;
        let mut m = CMatrix::identity(n, n) * z - a0;
        for (k, vk) in v.iter().enumerate() {
            m[(k, k)] -= c(0.0, spec.lambda * vk);
        }
        let lu = m.lu();
        let mut cols = Vec::with_capacity(columns.len());
        for &y in &columns {
            cols.push(lu.solve(&unit_vector(n, y)).ok_or_else(|| Error::Singular("z - A_λ".into()))?);
        }
        Ok(pairs
            .iter()
            .map(|&(x, y)| {
                let k = columns.binary_search(&y).expect("column present");
                cols[k][x].norm().powf(s)
            })
            .collect())
    })?;
    Ok(pairs
        .iter()
        .enumerate()
        .map(|(p, &(x, y))| {
            let column: Vec<f64> = samples.iter().map(|row| row[p]).collect();
            let (mean, std_error, median_of_means) = summarize(&column);
            MomentEstimate { s, re_z: z.re, im_z: z.im, x, y, mean, std_error, median_of_means, n_samples }
        })
        .collect())
}

/// `C_s = 2^s ‖p‖_∞^s / (1 - s)`.
pub fn c_s(density_sup: f64, s: f64) -> f64 {
    2f64.powf(s) * density_sup.powf(s) / (1.0 - s)
}

/// A-priori bounds on single-site (`x = y`) and two-site averaged fractional moments.
pub fn a_priori_bound(spec: &DisorderSpec, s: f64, diagonal: bool) -> f64 {
    let base = if diagonal { 2f64 } else { 4f64 };
    base.powf(s) * spec.distribution.density_sup().powf(s) / ((1.0 - s) * spec.lambda.abs().powf(s))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalizationThreshold {
    pub s: f64,
    pub mu: f64,
    #[serde(rename = "C_s")]
    pub c_s: f64,
    /// `C_s sup_x Σ_{y'≠x} e^{μ d(x,y')} |A₀(x,y')|^s`.
    pub lambda_s_mu: f64,
    /// Smallest `|λ|` with `|λ|^s > λ_s(μ)`, i.e. `λ_s(μ)^{1/s}`.
    pub lambda_min: f64,
    /// `C_s / (|λ|^s - λ_s(μ))` at the spec's `λ`, when positive.
    pub prefactor: Option<f64>,
}

pub fn localization_threshold(a0: &CMatrix, lat: &Lattice, spec: &DisorderSpec, s: f64, mu: f64) -> Result<LocalizationThreshold> {
    check_s(s)?;
    if !(mu >= 0.0) {
        return Err(Error::Precondition(format!("μ = {mu} must be nonnegative")));
    }
    let n = a0.nrows();
    if n != lat.len() {
        return Err(Error::LatticeMismatch);
    }
    let cs = c_s(spec.distribution.density_sup(), s);
    let mut sup = 0.0f64;
    for x in 0..n {
        let dist = lat.distances_from(x);
        let mut row = 0.0;
        for y in (0..n).filter(|&y| y != x) {
            let a = a0[(x, y)].norm();
            if a == 0.0 {
                continue;
            }
            match dist[y] {
                Distance::Finite(d) => row += (mu * d as f64).exp() * a.powf(s),
                Distance::Infinite => {
                    return Err(Error::Precondition(format!("A₀ couples disconnected sites {x} and {y}")))
                }
            }
        }
        sup = sup.max(row);
    }
    let lambda_s_mu = cs * sup;
    let margin = spec.lambda.abs().powf(s) - lambda_s_mu;
    Ok(LocalizationThreshold {
        s,
        mu,
        c_s: cs,
        lambda_s_mu,
        lambda_min: lambda_s_mu.powf(1.0 / s),
        prefactor: (margin > 0.0).then(|| cs / margin),
    })
}

/// `𝔼|⟨δ_x, A_ε(|δ_{x0}⟩⟨δ_{x0}|) δ_y⟩|` for one `y`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoherenceEstimate {
    pub x: usize,
    pub y: usize,
    pub distance: usize,
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

/// Disorder average of Abel-averaged coherences for `base ∘ H_λ`, where `H_λ` is the
/// Anderson Hamiltonian with a freshly drawn potential per realization.
#[allow(clippy::too_many_arguments)]
pub fn disordered_coherence_mc(
    base: &LindbladModel,
    kinetic: Kinetic,
    spec: &DisorderSpec,
    x0: usize,
    x: usize,
    ys: &[usize],
    eps: f64,
    n_samples: usize,
) -> Result<Vec<CoherenceEstimate>> {
    let lat: &Arc<Lattice> = base.lattice();
    let n = lat.len();
    for &u in [x0, x].iter().chain(ys) {
        lat.check_site(u)?;
    }
    let mut rho = CMatrix::zeros(n, n);
    rho[(x0, x0)] = c(1.0, 0.0);
    let samples: Vec<Vec<f64>> = per_realization(n_samples, |r| {
        let v = sample_potential(spec, n, r)?;
        let model = base.compose(&LindbladModel::anderson(lat, kinetic, spec.lambda, &v)?)?;
        let avg = abel_average_raw(&model, &rho, eps)?;
        Ok(ys.iter().map(|&y| avg[(x, y)].norm()).collect())
    })?;
    let dist = lat.distances_from(x);
    ys.iter()
        .enumerate()
        .map(|(k, &y)| {
            let column: Vec<f64> = samples.iter().map(|row| row[k]).collect();
            let (mean, std_error, _) = summarize(&column);
            let distance = dist[y].finite().ok_or_else(|| Error::Precondition(format!("{y} is not connected to {x}")))?;
            Ok(CoherenceEstimate { x, y, distance, mean, std_error, n_samples })
        })
        .collect()
}

/// `magnitude ≈ prefactor · exp(-rate · distance)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    #[serde(rename = "C")]
    pub prefactor: f64,
    #[serde(rename = "mu")]
    pub rate: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Least-squares fit of `ln magnitude` against an integer distance.
///
/// Magnitudes below [`FIT_FLOOR`] are dropped; at least three points at two or more
/// distinct distances must remain.
pub fn fit_exponential_decay(values: &[(f64, f64)]) -> Result<DecayFit> {
    if let Some(&(d, _)) = values.iter().find(|(d, _)| !(d.is_finite() && *d >= 0.0 && (d - d.round()).abs() <= 1e-9)) {
        return Err(Error::NotADistanceSeries(format!("{d} is not a lattice distance")));
    }
    let pts: Vec<(f64, f64)> =
        values.iter().filter(|(_, m)| m.is_finite() && *m >= FIT_FLOOR).map(|&(d, m)| (d.round(), m.ln())).collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientPoints { found: pts.len() });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientPoints { found: 1 });
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(DecayFit { prefactor: intercept.exp(), rate: 0.0 - slope, r_squared, points: pts.len() })
}

// Copyright 2026 The lindloc Contributors
// SPDX-License-Identifier: Apache-2.0

//! Experiment configuration files.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use lindloc::ct::EpsRule;
use lindloc::disorder::Distribution;
use lindloc::dissipative::Grid;
use lindloc::linalg::{c, CMatrix, CVector};
use lindloc::{ClosureSpec, ContourOptions, DensityMatrix, Geometry, Kinetic, Lattice, LatticeKind, LindbladModel, ModelSpec, Region};
use serde::de::DeserializeOwned;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub lattice: LatticeKind,
    pub model: ModelSpec,
    #[serde(default)]
    pub master_seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Command-specific parameters, validated once the command is known.
    #[serde(default)]
    pub params: serde_json::Value,
}

/// A loaded configuration with its raw bytes (for hashing) and location (for
/// resolving relative paths).
pub struct Loaded {
    pub config: ExperimentConfig,
    pub raw: Vec<u8>,
    pub dir: PathBuf,
}

impl Loaded {
    pub fn read(path: &Path) -> Result<Self> {
        let raw = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let config: ExperimentConfig =
            serde_json::from_slice(&raw).with_context(|| format!("schema error in {}", path.display()))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Loaded { config, raw, dir })
    }

    pub fn params<T: DeserializeOwned>(&self) -> Result<T> {
        let value = match &self.config.params {
            serde_json::Value::Null => serde_json::Value::Object(Default::default()),
            v => v.clone(),
        };
        serde_json::from_value(value).context("schema error in params")
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.dir.join(p)
        }
    }

    pub fn lattice(&self) -> Result<Arc<Lattice>> {
        Ok(Arc::new(Lattice::build(&self.config.lattice)?))
    }

    pub fn model(&self) -> Result<LindbladModel> {
        Ok(self.config.model.build(&self.lattice()?)?)
    }

    pub fn seed(&self) -> Result<u64> {
        self.config.master_seed.context("schema error: this command requires master_seed")
    }
}

/// Initial state of a run.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Site { x: usize },
    MaximallyMixed,
    /// Normalised on load.
    Pure { amplitudes: Vec<[f64; 2]> },
    /// A density-matrix CSV `(row_site, col_site, re, im)`; missing entries are zero.
    File { path: PathBuf },
}

impl StateSpec {
    pub fn build(&self, loaded: &Loaded, n: usize) -> Result<DensityMatrix> {
        match self {
            StateSpec::Site { x } => {
                if *x >= n {
                    bail!("site {x} outside a {n}-site lattice");
                }
                Ok(DensityMatrix::site(n, *x))
            }
            StateSpec::MaximallyMixed => Ok(DensityMatrix::maximally_mixed(n)),
            StateSpec::Pure { amplitudes } => {
                if amplitudes.len() != n {
                    bail!("{} amplitudes for a {n}-site lattice", amplitudes.len());
                }
                let psi = CVector::from_iterator(n, amplitudes.iter().map(|a| c(a[0], a[1])));
                let norm = psi.norm();
                if norm == 0.0 {
                    bail!("zero state vector");
                }
                Ok(DensityMatrix::pure(&(psi / c(norm, 0.0)))?)
            }
            StateSpec::File { path } => Ok(DensityMatrix::new(read_matrix_csv(&loaded.resolve(path), n)?)?),
        }
    }
}

#[derive(Debug, Deserialize)]
struct MatrixRow {
    row_site: usize,
    col_site: usize,
    re: f64,
    im: f64,
}

pub fn read_matrix_csv(path: &Path, n: usize) -> Result<CMatrix> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut m = CMatrix::zeros(n, n);
    for row in reader.deserialize() {
        let r: MatrixRow = row.with_context(|| format!("malformed row in {}", path.display()))?;
        if r.row_site >= n || r.col_site >= n {
            bail!("entry ({}, {}) outside a {n}-site lattice", r.row_site, r.col_site);
        }
        m[(r.row_site, r.col_site)] = c(r.re, r.im);
    }
    Ok(m)
}

/// Region of a dissipative operator: the whole lattice unless sites are listed.
pub fn region(lat: &Lattice, sites: &Option<Vec<usize>>) -> Result<Region> {
    Ok(match sites {
        Some(s) => Region::new(lat, s.clone())?,
        None => Region::full(lat),
    })
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateParams {
    /// Random rank-one inputs for the trace-norm bound check; 0 skips it.
    #[serde(default)]
    pub trace_norm_samples: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveParams {
    pub times: Vec<f64>,
    pub initial: StateSpec,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadyParams {
    #[serde(default = "default_residual_tol")]
    pub residual_tol: f64,
}

fn default_residual_tol() -> f64 {
    1e-8
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbelParams {
    pub eps: Vec<f64>,
    pub initial: StateSpec,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeParams {
    #[serde(default)]
    pub region: Option<Vec<usize>>,
    #[serde(default)]
    pub closure: ClosureSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PseudospecParams {
    #[serde(default)]
    pub region: Option<Vec<usize>>,
    #[serde(default)]
    pub closure: ClosureSpec,
    pub grid: Grid,
    pub eps: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelParams {
    pub x: usize,
    pub y: usize,
    pub eps: f64,
    #[serde(default)]
    pub closure: ClosureSpec,
    #[serde(default)]
    pub geometry: Geometry,
    #[serde(default)]
    pub contour: ContourOptions,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherenceBoundParams {
    pub x: usize,
    pub y: usize,
    pub eps: f64,
    pub initial: StateSpec,
    #[serde(default)]
    pub closure: ClosureSpec,
    #[serde(default)]
    pub contour: ContourOptions,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CtParams {
    /// Matrix to test: the dissipative operator of the model or its Hamiltonian.
    #[serde(default)]
    pub operator: CtOperator,
    #[serde(default)]
    pub region: Option<Vec<usize>>,
    #[serde(default)]
    pub closure: ClosureSpec,
    pub grid: Grid,
    pub alpha: f64,
    #[serde(default)]
    pub eps_rule: EpsRule,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CtOperator {
    #[default]
    Dissipative,
    Hamiltonian,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderParams {
    pub distribution: Distribution,
    pub lambdas: Vec<f64>,
    pub n_samples: usize,
    pub observable: Observable,
    /// `μ` for the localization threshold report; omitted means no report.
    #[serde(default)]
    pub threshold_mu: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Observable {
    /// `𝔼|(z - A_λ)^{-1}(x, y)|^s` with `A₀` the dissipative operator of the model.
    Moment { s: Vec<f64>, z: [f64; 2], x: usize, ys: Vec<usize> },
    /// `𝔼|⟨δ_x, A_ε(|δ_{x0}⟩⟨δ_{x0}|) δ_y⟩|` for the model plus an Anderson Hamiltonian.
    Coherence {
        #[serde(default)]
        kinetic: Kinetic,
        x0: usize,
        x: usize,
        ys: Vec<usize>,
        eps: f64,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitParams {
    pub input: PathBuf,
    #[serde(default = "default_distance_column")]
    pub distance_column: String,
    #[serde(default = "default_value_column")]
    pub value_column: String,
    /// Columns whose values split the rows into separately fitted series.
    #[serde(default)]
    pub group_by: Vec<String>,
}

fn default_distance_column() -> String {
    "d_xy".into()
}

fn default_value_column() -> String {
    "mean".into()
}

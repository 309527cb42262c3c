// Copyright 2026 The lindloc Contributors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors raised by lattice construction, model validation and the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("site {0} is not part of the lattice")]
    UnknownSite(String),

    #[error("region is not a subset of the lattice")]
    RegionOutsideLattice,

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("models live on different lattices")]
    LatticeMismatch,

    #[error("dimension {dim} exceeds the cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("solver workspace of {entries} entries exceeds the cap {cap}")]
    WorkspaceCap { entries: usize, cap: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("distance {distance} between sites is below the required threshold {threshold}")]
    DistanceBelowThreshold { distance: String, threshold: usize },

    #[error("contour construction failed: {0}")]
    Contour(String),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid boundary closure: {0}")]
    InvalidClosure(String),

    #[error("not enough points above the numerical floor to fit a decay ({found} found, 3 needed)")]
    InsufficientPoints { found: usize },

    #[error("input is not a distance series: {0}")]
    NotADistanceSeries(String),
}

pub type Result<T> = std::result::Result<T, Error>;

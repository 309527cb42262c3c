// Copyright 2026 The lindloc Contributors
// SPDX-License-Identifier: Apache-2.0

//! Local single-particle Lindbladians on finite subsets of ℤ^d.
//!
//! The crate assembles Lindblad generators from local Hamiltonian terms and jump
//! operators, evolves and averages states, and evaluates the coherence kernel built
//! from resolvents of non-hermitian block Hamiltonians. Around that sit checks for the
//! resolvent estimates (pseudospectra, Combes-Thomas bounds) and Monte-Carlo
//! fractional moments for disordered models.

pub mod ct;
pub mod disorder;
pub mod dissipative;
pub mod dynamics;
pub mod error;
pub mod kernel;
pub mod lattice;
pub mod linalg;
pub mod model;

pub use error::{Error, Result};

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use lattice::{BoundaryFamily, Distance, Lattice, LatticeKind, Region};
pub use model::{JumpOperator, Kinetic, LindbladModel, LocalTerm, Locality, LocalityReport, ModelSpec, TermSpec};
pub use dynamics::{abel_average, assemble_superoperator, evolve, steady_states, DensityMatrix, SteadyBasis, Superoperator};
pub use dissipative::{build_dissipative, spectral_envelope, BoundaryClosure, ClosureSpec, DissipativeHamiltonian, SpectralEnvelope};
pub use kernel::{compute_kernel, coherence_bound_report, CoherenceBoundReport, CoherenceKernel, Contour, ContourOptions, Geometry};
pub use ct::{ct_bound, ct_verify_region, s_alpha, CtMode, EpsRule, Indexing, SAlphaProfile};
pub use disorder::{fit_exponential_decay, fractional_moment_mc, localization_threshold, sample_potential, DecayFit, DisorderSpec, Distribution};

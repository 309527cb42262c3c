// Copyright 2026 The lindloc Contributors
// SPDX-License-Identifier: Apache-2.0

//! Python bindings. Matrices cross the boundary as lists of lists of `complex`;
//! structured results come back as dicts.

use std::sync::Arc;

use lindloc::disorder::{self, DisorderSpec};
use lindloc::dissipative::{self, ClosureSpec};
use lindloc::kernel::{self, ContourOptions, Geometry};
use lindloc::linalg::{CMatrix, C64};
use lindloc::{dynamics, Kinetic, LatticeKind, ModelSpec, Region};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyAny;
use serde::Serialize;

create_exception!(lindloc, LindlocError, PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    LindlocError::new_err(e.to_string())
}

fn to_py_json<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_json<T: serde::de::DeserializeOwned>(text: &str) -> PyResult<T> {
    serde_json::from_str(text).map_err(err)
}

fn matrix_in(rows: Vec<Vec<C64>>) -> PyResult<CMatrix> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(err("matrix must be square"));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn matrix_out(m: &CMatrix) -> Vec<Vec<C64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn state_in(rows: Vec<Vec<C64>>) -> PyResult<dynamics::DensityMatrix> {
    dynamics::DensityMatrix::new(matrix_in(rows)?).map_err(err)
}

fn closure_in(closure: Option<&str>) -> PyResult<ClosureSpec> {
    closure.map_or(Ok(ClosureSpec::None), from_json)
}

/// A finite subset of ℤ^d with nearest-neighbour edges.
#[pyclass(name = "Lattice", module = "lindloc", frozen)]
struct PyLattice {
    inner: Arc<lindloc::Lattice>,
}

#[pymethods]
impl PyLattice {
    #[staticmethod]
    fn chain(n: usize) -> PyResult<Self> {
        Self::build(LatticeKind::Chain { n })
    }

    #[staticmethod]
    fn ring(n: usize) -> PyResult<Self> {
        Self::build(LatticeKind::Ring { n })
    }

    /// The box `[0, e_1) × ... × [0, e_d)`.
    #[staticmethod]
    #[pyo3(name = "box")]
    fn box_(extents: Vec<usize>) -> PyResult<Self> {
        Self::build(LatticeKind::Box { extents })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Self::build(from_json(text)?)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Graph distance, or `None` between disconnected sites.
    fn distance(&self, x: usize, y: usize) -> PyResult<Option<usize>> {
        Ok(self.inner.graph_distance(x, y).map_err(err)?.finite())
    }

    fn sites(&self) -> Vec<Vec<i64>> {
        self.inner.sites().to_vec()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&*self.inner).map_err(err)
    }

    /// Lowest eigenvalue of the Dirichlet Laplacian of `sites`.
    fn dirichlet_gap(&self, sites: Vec<usize>) -> PyResult<f64> {
        let region = Region::new(&self.inner, sites).map_err(err)?;
        dissipative::dirichlet_gap(&self.inner, &region).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Lattice(dimension={}, sites={})", self.inner.dimension(), self.inner.len())
    }
}

impl PyLattice {
    fn build(kind: LatticeKind) -> PyResult<Self> {
        Ok(PyLattice { inner: Arc::new(lindloc::Lattice::build(&kind).map_err(err)?) })
    }
}

/// A local Lindbladian on a lattice.
#[pyclass(name = "Model", module = "lindloc", frozen)]
struct PyModel {
    inner: lindloc::LindbladModel,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    #[pyo3(signature = (lattice, rate = 1.0))]
    fn dephasing(lattice: &PyLattice, rate: f64) -> PyResult<Self> {
        Self::wrap(lindloc::LindbladModel::dephasing(&lattice.inner, rate))
    }

    #[staticmethod]
    fn coherence_creation(lattice: &PyLattice) -> PyResult<Self> {
        Self::wrap(lindloc::LindbladModel::coherence_creation(&lattice.inner))
    }

    #[staticmethod]
    fn incoherent_hopping(lattice: &PyLattice) -> PyResult<Self> {
        Self::wrap(lindloc::LindbladModel::incoherent_hopping(&lattice.inner))
    }

    /// `H = -Δ + λ Σ ω(x) |x⟩⟨x|` (or pure hopping with `kinetic="hopping"`).
    #[staticmethod]
    #[pyo3(signature = (lattice, lam, potential, kinetic = "laplacian"))]
    fn anderson(lattice: &PyLattice, lam: f64, potential: Vec<f64>, kinetic: &str) -> PyResult<Self> {
        let kinetic: Kinetic = from_json(&format!("{kinetic:?}"))?;
        Self::wrap(lindloc::LindbladModel::anderson(&lattice.inner, kinetic, lam, &potential))
    }

    /// Builds a model from the JSON model specification used by configuration files.
    #[staticmethod]
    fn from_spec(lattice: &PyLattice, spec: &str) -> PyResult<Self> {
        let spec: ModelSpec = from_json(spec)?;
        Self::wrap(spec.build(&lattice.inner))
    }

    fn compose(&self, other: &PyModel) -> PyResult<Self> {
        Self::wrap(self.inner.compose(&other.inner))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn hamiltonian(&self) -> Vec<Vec<C64>> {
        matrix_out(&self.inner.hamiltonian())
    }

    fn jump_operators(&self) -> Vec<Vec<Vec<C64>>> {
        self.inner.jump_matrices().iter().map(matrix_out).collect()
    }

    fn validate_locality<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py_json(py, &self.inner.validate_locality())
    }

    /// `D_Ω = -i(H_Ω + b) - ½ Σ (L*L + B*B)` on `sites` (default: everything).
    #[pyo3(signature = (sites = None, closure = None))]
    fn dissipative(&self, sites: Option<Vec<usize>>, closure: Option<&str>) -> PyResult<Vec<Vec<C64>>> {
        let lat = self.inner.lattice();
        let region = match sites {
            Some(s) => Region::new(lat, s).map_err(err)?,
            None => Region::full(lat),
        };
        let closure = dissipative::BoundaryClosure::build(&closure_in(closure)?, &self.inner, &region).map_err(err)?;
        let d = dissipative::build_dissipative(&self.inner, &region, &closure).map_err(err)?;
        Ok(matrix_out(&d.matrix))
    }

    fn to_json(&self) -> String {
        self.inner.to_json().to_string()
    }

    fn __repr__(&self) -> String {
        format!("Model(kind={:?}, sites={})", self.inner.kind(), self.inner.dim())
    }
}

impl PyModel {
    fn wrap(m: lindloc::Result<lindloc::LindbladModel>) -> PyResult<Self> {
        Ok(PyModel { inner: m.map_err(err)? })
    }
}

/// `e^{tL}(ρ)`.
#[pyfunction]
fn evolve(py: Python<'_>, model: &PyModel, rho: Vec<Vec<C64>>, t: f64) -> PyResult<Vec<Vec<C64>>> {
    let rho = state_in(rho)?;
    let out = py.detach(|| dynamics::evolve(&model.inner, &rho, t)).map_err(err)?;
    Ok(matrix_out(out.matrix()))
}

/// `ε(ε - L)^{-1}(ρ)`.
#[pyfunction]
fn abel_average(py: Python<'_>, model: &PyModel, rho: Vec<Vec<C64>>, eps: f64) -> PyResult<Vec<Vec<C64>>> {
    let rho = state_in(rho)?;
    let out = py.detach(|| dynamics::abel_average(&model.inner, &rho, eps)).map_err(err)?;
    Ok(matrix_out(out.matrix()))
}

/// States spanning the kernel of `L`.
#[pyfunction]
fn steady_states(py: Python<'_>, model: &PyModel) -> PyResult<Vec<Vec<Vec<C64>>>> {
    let basis = py.detach(|| dynamics::steady_states(&model.inner)).map_err(err)?;
    Ok(basis.states.iter().map(|s| matrix_out(s.matrix())).collect())
}

fn geometry_in(name: &str) -> PyResult<Geometry> {
    from_json(&format!("{name:?}"))
}

/// Coherence kernel between `x` and `y`: a dict with the blocks, the kernel entries
/// and a decay fit.
#[pyfunction]
#[pyo3(signature = (model, x, y, eps, closure = None, geometry = "three_block"))]
fn coherence_kernel<'py>(
    py: Python<'py>,
    model: &PyModel,
    x: usize,
    y: usize,
    eps: f64,
    closure: Option<&str>,
    geometry: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let closure = closure_in(closure)?;
    let geometry = geometry_in(geometry)?;
    let k = py
        .detach(|| kernel::compute_kernel(&model.inner, x, y, eps, &closure, geometry, &ContourOptions::default()))
        .map_err(err)?;
    let lat = model.inner.lattice();
    let value = serde_json::json!({
        "lambda_x": k.blocks.lambda_x.members(),
        "lambda_y": k.blocks.lambda_y.members(),
        "entries": k.entries(lat),
        "quadrature": k.quadrature,
        "fit": k.decay_fit(lat).ok(),
    });
    to_py_json(py, &value)
}

/// Checks the coherence bound for the state `rho`.
#[pyfunction]
#[pyo3(signature = (model, rho, x, y, eps, closure = None))]
fn coherence_bound<'py>(
    py: Python<'py>,
    model: &PyModel,
    rho: Vec<Vec<C64>>,
    x: usize,
    y: usize,
    eps: f64,
    closure: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    let rho = state_in(rho)?;
    let closure = closure_in(closure)?;
    let report = py
        .detach(|| kernel::coherence_bound_report(&model.inner, &rho, x, y, eps, &closure, &ContourOptions::default()))
        .map_err(err)?;
    to_py_json(py, &report)
}

/// Combes-Thomas check of the dissipative operator of `model` on a grid of `z`.
#[pyfunction]
#[pyo3(signature = (model, points, alpha = 1.0))]
fn ct_verify<'py>(py: Python<'py>, model: &PyModel, points: Vec<C64>, alpha: f64) -> PyResult<Bound<'py, PyAny>> {
    let lat = model.inner.lattice();
    let d = dissipative::build_dissipative(&model.inner, &Region::full(lat), &dissipative::BoundaryClosure::none())
        .map_err(err)?;
    let idx = lindloc::Indexing::full(lat);
    let report = py
        .detach(|| lindloc::ct_verify_region(&d.matrix, &idx, &points, lindloc::EpsRule::default(), alpha))
        .map_err(err)?;
    let value = serde_json::json!({
        "alpha": report.alpha,
        "s_alpha": report.s_alpha,
        "points_checked": report.points_checked,
        "points_skipped": report.points_skipped,
        "violations": report.violations,
    });
    to_py_json(py, &value)
}

/// Monte-Carlo `𝔼|(z - A₀ - iλV)^{-1}(x, y)|^s` with `V` uniform on `[a, b]` and
/// `A₀` the dissipative operator of `model`.
#[pyfunction]
#[pyo3(signature = (model, lam, s, z, pairs, n_samples, seed, a = 0.0, b = 1.0))]
#[allow(clippy::too_many_arguments)]
fn fractional_moments<'py>(
    py: Python<'py>,
    model: &PyModel,
    lam: f64,
    s: f64,
    z: C64,
    pairs: Vec<(usize, usize)>,
    n_samples: usize,
    seed: u64,
    a: f64,
    b: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let lat = model.inner.lattice();
    let a0 = dissipative::build_dissipative(&model.inner, &Region::full(lat), &dissipative::BoundaryClosure::none())
        .map_err(err)?
        .matrix;
    let spec = DisorderSpec::uniform(a, b, lam, seed);
    let est = py.detach(|| disorder::fractional_moment_mc(&a0, &spec, s, z, &pairs, n_samples)).map_err(err)?;
    to_py_json(py, &est)
}

/// Least-squares fit of `magnitude ≈ C e^{-μ d}` over `(distance, magnitude)` pairs.
#[pyfunction]
fn fit_exponential_decay<'py>(py: Python<'py>, points: Vec<(f64, f64)>) -> PyResult<Bound<'py, PyAny>> {
    to_py_json(py, &disorder::fit_exponential_decay(&points).map_err(err)?)
}

#[pymodule(name = "lindloc")]
fn lindloc_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", lindloc::VERSION)?;
    m.add("LindlocError", m.py().get_type::<LindlocError>())?;
    m.add_class::<PyLattice>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(abel_average, m)?)?;
    m.add_function(wrap_pyfunction!(steady_states, m)?)?;
    m.add_function(wrap_pyfunction!(coherence_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(coherence_bound, m)?)?;
    m.add_function(wrap_pyfunction!(ct_verify, m)?)?;
    m.add_function(wrap_pyfunction!(fractional_moments, m)?)?;
    m.add_function(wrap_pyfunction!(fit_exponential_decay, m)?)?;
    Ok(())
}

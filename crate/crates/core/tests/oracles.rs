// Copyright 2026 The lindloc Contributors
// SPDX-License-Identifier: Apache-2.0

//! Library results against the reference computations in `common`.

mod common;

use std::sync::Arc;

use common::*;
use lindloc::dynamics::{abel_average_raw, evolve_raw, EvolveMethod};
use lindloc::linalg::{c, CMatrix};
use lindloc::*;
use proptest::prelude::*;

fn chain(n: usize) -> Arc<Lattice> {
    Arc::new(Lattice::chain(n).unwrap())
}

fn mixed_model(n: usize, seed: u64, rates: (f64, f64, f64)) -> LindbladModel {
    let lat = chain(n);
    let omega = random_potential(n, &mut rng(seed));
    let mut model = LindbladModel::anderson(&lat, Kinetic::Laplacian, 1.0, &omega).unwrap();
    if rates.0 > 0.0 {
        model = model.compose(&LindbladModel::dephasing(&lat, rates.0).unwrap()).unwrap();
    }
    if rates.1 > 0.0 {
        model = model.compose(&LindbladModel::coherence_creation(&lat).unwrap()).unwrap();
    }
    if rates.2 > 0.0 {
        model = model.compose(&LindbladModel::incoherent_hopping(&lat).unwrap()).unwrap();
    }
    model
}

#[test]
fn superoperator_matches_kronecker_generator() {
    for (k, rates) in [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0), (0.5, 1.0, 1.0)].into_iter().enumerate() {
        let model = mixed_model(5, k as u64, rates);
        let gen = dense_generator(&model);
        let sup = assemble_superoperator(&model, false).unwrap().to_dense();
        assert!(max_abs(&(sup - &gen)) < 1e-13);
        let adj = assemble_superoperator(&model, true).unwrap().to_dense();
        assert!(max_abs(&(adj - gen.adjoint())) < 1e-13);
    }
}

#[test]
fn runge_kutta_path_matches_the_matrix_exponential() {
    let model = mixed_model(12, 4, (1.0, 0.0, 1.0));
    let gen = dense_generator(&model);
    let rho = random_state(12, &mut rng(5));
    for t in [0.3, 2.0] {
        let oracle = evolve_dense(&gen, &rho, t);
        let rk = evolve_raw(&model, &rho, t, EvolveMethod::RungeKutta).unwrap();
        assert!(max_abs(&(rk - oracle)) < 1e-8, "t = {t}");
    }
}

#[test]
fn abel_average_is_a_resolvent() {
    let model = mixed_model(7, 6, (0.0, 1.0, 0.0));
    let gen = dense_generator(&model);
    let rho = random_state(7, &mut rng(7));
    let eps = 0.2;
    let shifted = CMatrix::identity(49, 49) * c(eps, 0.0) - gen;
    let oracle = unvec(&(shifted.lu().solve(&vec_of(&rho)).unwrap() * c(eps, 0.0)), 7);
    let lib = abel_average_raw(&model, &rho, eps).unwrap();
    assert!(max_abs(&(lib - oracle)) < 1e-12);
}

#[test]
fn steady_states_lie_in_the_kernel_of_the_reference_generator() {
    for (k, rates) in [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)].into_iter().enumerate() {
        let model = mixed_model(6, 10 + k as u64, rates);
        let gen = dense_generator(&model);
        let basis = steady_states(&model).unwrap();
        assert!(!basis.is_empty());
        for s in &basis.states {
            let m = s.matrix();
            assert!((m.trace() - c(1.0, 0.0)).norm() < 1e-10);
            assert!(min_hermitian_eigenvalue(m) > -1e-10);
            assert!((&gen * vec_of(m)).norm() < 1e-9);
        }
    }
}

#[test]
fn large_chain_steady_state_is_stationary() {
    // Above the dense threshold the kernel comes from inverse iteration.
    let model = mixed_model(24, 12, (1.0, 0.0, 0.0));
    let basis = steady_states(&model).unwrap();
    assert_eq!(basis.dimension(), 1);
    let m = basis.states[0].matrix();
    let mixed = CMatrix::identity(24, 24) / c(24.0, 0.0);
    assert!(max_abs(&(m - mixed)) < 1e-9);
}

#[test]
fn kernel_geometries_agree_on_the_coherence_term_for_dephasing() {
    // With pure dephasing and no Hamiltonian every kernel is diagonal in (x, y).
    let lat = chain(12);
    let model = LindbladModel::dephasing(&lat, 2.0).unwrap();
    let opts = ContourOptions::default();
    for geometry in [Geometry::ThreeBlock, Geometry::TwoBlock] {
        let k = compute_kernel(&model, 1, 10, 0.3, &ClosureSpec::None, geometry, &opts).unwrap();
        assert!((k.at(1, 10) - c(1.0 / 2.3, 0.0)).norm() < 1e-10);
    }
}

#[test]
fn seeded_potentials_are_reproducible_and_independent_of_site_count() {
    let spec = DisorderSpec::uniform(0.0, 1.0, 3.0, 42);
    let a = sample_potential(&spec, 30, 5).unwrap();
    let b = sample_potential(&spec, 30, 5).unwrap();
    let shorter = sample_potential(&spec, 10, 5).unwrap();
    let other = sample_potential(&spec, 30, 6).unwrap();
    assert_eq!(a, b);
    assert_eq!(&a[..10], &shorter[..]);
    assert_ne!(a, other);
    assert!(a.iter().all(|&v| (0.0..1.0).contains(&v)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn evolution_keeps_states_states(
        seed in 0u64..1000,
        g in 0.0f64..2.0,
        cc in 0.0f64..1.0,
        ih in 0.0f64..1.0,
        t in 0.0f64..5.0,
    ) {
        let model = mixed_model(5, seed, (g, cc, ih));
        let rho = random_state(5, &mut rng(seed + 1));
        let rt = evolve_raw(&model, &rho, t, EvolveMethod::Dense).unwrap();
        prop_assert!((rt.trace() - c(1.0, 0.0)).norm() < 1e-10);
        prop_assert!(min_hermitian_eigenvalue(&rt) > -1e-10);
        prop_assert!(max_abs(&(&rt - rt.adjoint())) < 1e-10);
        let oracle = evolve_dense(&dense_generator(&model), &rho, t);
        prop_assert!(max_abs(&(rt - oracle)) < 1e-9);
    }

    #[test]
    fn abel_average_is_a_state_and_interpolates(seed in 0u64..1000, eps in 0.01f64..10.0) {
        let model = mixed_model(4, seed, (1.0, 0.5, 0.0));
        let rho = random_state(4, &mut rng(seed));
        let avg = abel_average_raw(&model, &rho, eps).unwrap();
        prop_assert!((avg.trace() - c(1.0, 0.0)).norm() < 1e-10);
        prop_assert!(min_hermitian_eigenvalue(&avg) > -1e-10);
        prop_assert!(trace_norm(&avg) <= 1.0 + 1e-10);
    }
}

mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use tubal_core::measurement::{gaussian_map, GaussianLinearMap, VarianceMode};
use tubal_core::solver::{admm_solve, prox_optimality_check, tsvt, z_update, AdmmSolver, NormalEquations, SolverConfig};
use tubal_core::*;

#[test]
fn tsvt_is_matrix_svt_for_one_slice() {
    let mut r = rng(30);
    let x = gaussian_tensor(&mut r, (5, 5, 1));
    let out = tsvt(&x, 0.3).unwrap();
    let expected = matrix_svt(&x.frontal_slice(0), 0.3);
    assert!((out.frontal_slice(0) - expected).norm() <= 1e-10);
}

#[test]
fn tsvt_is_slicewise_svt_in_the_fourier_domain() {
    let mut r = rng(31);
    let x = gaussian_tensor(&mut r, (4, 3, 5));
    let tau = 0.7;
    let out = tsvt(&x, tau).unwrap();
    let fx = naive_dft(&x);
    let fo = naive_dft(&out);
    for (a, b) in fx.iter().zip(&fo) {
        let sa = complex_singular_values(a);
        let sb = complex_singular_values(b);
        for (u, v) in sa.iter().zip(&sb) {
            assert!(((u - tau).max(0.0) - v).abs() < 1e-10);
        }
    }
    assert!(tubal_rank(&out, DEFAULT_RANK_TOL).unwrap() <= tubal_rank(&x, DEFAULT_RANK_TOL).unwrap());
}

#[test]
fn tsvt_extremes() {
    let mut r = rng(32);
    let x = gaussian_tensor(&mut r, (4, 4, 3));
    let top = naive_dft(&x)
        .iter()
        .map(|s| complex_singular_values(s)[0])
        .fold(0.0, f64::max);
    assert_eq!(tsvt(&x, top * 1.0001).unwrap().fro_norm(), 0.0);
    assert!(rel_err(&tsvt(&x, 1e-14).unwrap(), &x) < 1e-12);
    assert!(tsvt(&x, 0.0).is_err());
}

#[test]
fn prox_check_detects_non_minimizers() {
    let mut r = rng(33);
    let y = gaussian_tensor(&mut r, (4, 4, 3));
    let x = tsvt(&y, 0.5).unwrap();
    assert!(prox_optimality_check(&y, 0.5, &x, 1).unwrap() <= 1e-9);
    assert!(prox_optimality_check(&y, 5.0, &y, 1).unwrap() > 0.0);
    assert!(prox_optimality_check(&y, 1e-12, &y, 1).unwrap() <= 1e-9);
}

#[test]
fn z_update_cases() {
    let mut r = rng(34);
    let dims = (3, 2, 2);
    let x = gaussian_tensor(&mut r, dims);
    let k = gaussian_tensor(&mut r, dims);
    let zero = GaussianLinearMap::from_matrix(dims, DMatrix::zeros(5, 12)).unwrap();
    let y = DVector::from_fn(5, |_, _| StandardNormal.sample(&mut r));
    let z = z_update(&zero, &y, &k, &x, 0.7).unwrap();
    assert!(rel_err(&z, &x.axpy(1.0 / 0.7, &k).unwrap()) < 1e-12);

    let map = gaussian_map(5, dims, 3, VarianceMode::OneOverM).unwrap();
    let z = z_update(&map, &y, &k, &x, 1e12).unwrap();
    assert!(z.sub(&x).unwrap().inf_norm() < 1e-6);

    for (m, rho) in [(5, 0.3), (20, 2.0), (12, 1e-4)] {
        let map = gaussian_map(m, dims, 4, VarianceMode::OneOverM).unwrap();
        let y = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut r));
        let z = z_update(&map, &y, &k, &x, rho).unwrap();
        let a = map.matrix().transpose() * map.matrix() + DMatrix::identity(12, 12) * rho;
        let b = map.matrix().transpose() * &y + vec_oracle(&k) + vec_oracle(&x) * rho;
        let expected = a.lu().solve(&b).unwrap();
        assert!((vec_oracle(&z) - &expected).norm() <= 1e-10 * expected.norm());
    }
}

#[test]
fn normal_equations_reused_across_penalties() {
    let map = gaussian_map(30, (4, 4, 3), 9, VarianceMode::OneOverM).unwrap();
    let ne = NormalEquations::new(&map).unwrap();
    let b = DVector::from_fn(48, |i, _| (i as f64).sin());
    for rho in [1e-4, 1e-2, 1.0, 1e3, 1e8] {
        let z = ne.solve(&b, rho).unwrap();
        let back = map.matrix().transpose() * (map.matrix() * &z) + &z * rho;
        assert!((back - &b).norm() <= 1e-9 * b.norm());
    }
    assert!(ne.solve(&b, 0.0).is_err());
}

#[test]
fn zero_measurements_give_zero() {
    let map = gaussian_map(20, (4, 4, 2), 1, VarianceMode::OneOverM).unwrap();
    for lambda in [1e-3, 1.0] {
        let res = admm_solve(&map, &DVector::zeros(20), &SolverConfig::new(lambda)).unwrap();
        assert!(res.x_hat.inf_norm() <= SolverConfig::DEFAULT_VARPI);
        assert!(res.converged);
    }
}

#[test]
fn histories_objective_and_determinism() {
    let dims = (6, 6, 3);
    let x = generate_lowrank(6, 6, 3, 1, 5).unwrap();
    let map = gaussian_map(80, dims, 6, VarianceMode::OneOverM).unwrap();
    let y = map.apply(&x).unwrap();
    let cfg = SolverConfig::new(0.05);
    let a = admm_solve(&map, &y, &cfg).unwrap();
    let b = admm_solve(&map, &y, &cfg).unwrap();
    assert_eq!(a.x_hat, b.x_hat);
    assert_eq!(a.residual_history, b.residual_history);
    assert_eq!(a.residual_history.len(), a.iterations);
    assert_eq!(a.objective_history.len(), a.iterations);
    let initial = y.norm_squared() / (2.0 * cfg.lambda);
    assert!(*a.objective_history.last().unwrap() <= initial);
    if a.converged {
        assert!(a.residual_history.last().unwrap().iter().all(|&g| g <= cfg.varpi));
    }
}

#[test]
fn kkt_spot_check_at_convergence() {
    let dims = (5, 5, 3);
    let x = generate_lowrank(5, 5, 3, 1, 8).unwrap();
    let map = gaussian_map(60, dims, 8, VarianceMode::OneOverM).unwrap();
    let y = map.apply(&x).unwrap();
    let ne = NormalEquations::new(&map).unwrap();
    let mut solver = AdmmSolver::new(&map, &ne, &y, SolverConfig::new(0.1)).unwrap();
    loop {
        let rep = solver.step().unwrap();
        if rep.converged || solver.state().iter >= 500 {
            break;
        }
    }
    let (center, tau) = solver.last_prox().unwrap().clone();
    let v = prox_optimality_check(&center, tau, &solver.state().x, 3).unwrap();
    assert!(v <= 1e-6, "violation {v}");
}

#[test]
fn solver_rejects_bad_input() {
    let map = gaussian_map(10, (3, 3, 2), 1, VarianceMode::OneOverM).unwrap();
    assert!(admm_solve(&map, &DVector::zeros(9), &SolverConfig::new(1.0)).is_err());
    assert!(admm_solve(&map, &DVector::zeros(10), &SolverConfig::new(-1.0)).is_err());
    let mut y = DVector::zeros(10);
    y[0] = f64::NAN;
    assert!(admm_solve(&map, &y, &SolverConfig::new(1.0)).is_err());
}

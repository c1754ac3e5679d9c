use approx::assert_relative_eq;
use isac_conic::{
    embed_hermitian, extract_hermitian, solve, ConicError, ConicProblem, LinExpr, ScalarDomain,
    SolveStatus,
};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-8;

fn random_symmetric(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    (&a + a.transpose()) * 0.5
}

fn max_trace_problem(c: &DMatrix<f64>) -> ConicProblem {
    let mut p = ConicProblem::new();
    let x = p.add_psd(c.nrows());
    let mut obj = LinExpr::new();
    obj.add_psd(x, c);
    p.maximize(obj);
    let mut tr = LinExpr::new();
    tr.add_psd(x, &DMatrix::identity(c.nrows(), c.nrows()));
    p.add_eq(tr, 1.0);
    p
}

#[test]
fn trace_constrained_sdp_matches_largest_eigenvalue() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in [2, 3, 5] {
        let c = random_symmetric(n, &mut rng);
        let lmax = SymmetricEigen::new(c.clone()).eigenvalues.max();
        let sol = solve(&max_trace_problem(&c), TOL, 100).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_relative_eq!(sol.objective, lmax, epsilon = 1e-6);
        assert!(sol.dual_bound >= sol.objective - 1e-6);
    }
}

#[test]
fn diagonal_sdp_picks_the_larger_entry() {
    let c = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0]));
    let mut p = ConicProblem::new();
    let x = p.add_psd(2);
    let mut obj = LinExpr::new();
    obj.add_psd(x, &c);
    p.maximize(obj);
    let mut tr = LinExpr::new();
    tr.add_psd(x, &DMatrix::identity(2, 2));
    p.add_le(tr, 1.0);
    let sol = solve(&p, TOL, 100).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert_relative_eq!(sol.objective, 2.0, epsilon = 1e-6);
    assert_relative_eq!(sol.psd(x)[(1, 1)], 1.0, epsilon = 1e-5);
}

#[test]
fn linear_objective_over_unit_disc() {
    let mut p = ConicProblem::new();
    let x = p.add_scalar(ScalarDomain::Free);
    let y = p.add_scalar(ScalarDomain::Free);
    let mut obj = LinExpr::scalar(x, -3.0);
    obj.add_scalar(y, -4.0);
    p.maximize(obj);
    p.add_soc(LinExpr::constant(1.0), vec![LinExpr::scalar(x, 1.0), LinExpr::scalar(y, 1.0)]);
    let sol = solve(&p, TOL, 100).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert_relative_eq!(sol.objective, 5.0, epsilon = 1e-6);
    assert_relative_eq!(sol.scalar(x), -0.6, epsilon = 1e-4);
    assert_relative_eq!(sol.scalar(y), -0.8, epsilon = 1e-4);
}

#[test]
fn soc_variable_bounds_its_vector_part() {
    // max u1 + u2  s.t. (t, u1, u2) in SOC, t <= 2
    let mut p = ConicProblem::new();
    let v = p.add_soc_var(3);
    let mut obj = LinExpr::new();
    obj.add_soc_entry(v, 1, 1.0).add_soc_entry(v, 2, 1.0);
    p.maximize(obj);
    let mut t = LinExpr::new();
    t.add_soc_entry(v, 0, 1.0);
    p.add_le(t, 2.0);
    let sol = solve(&p, TOL, 100).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert_relative_eq!(sol.objective, 2.0 * 2f64.sqrt(), epsilon = 1e-6);
}

#[test]
fn hermitian_sdp_through_embedding() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 3;
    let a = DMatrix::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let h = (&a + a.adjoint()).map(|v| v * 0.5);
    let lmax = nalgebra::SymmetricEigen::new(embed_hermitian(&h).unwrap()).eigenvalues.max();

    let mut p = ConicProblem::new();
    let z = p.add_psd(2 * n);
    let mut obj = LinExpr::new();
    obj.add_psd(z, &(embed_hermitian(&h).unwrap() * 0.5));
    p.maximize(obj);
    let mut tr = LinExpr::new();
    tr.add_psd(z, &(DMatrix::identity(2 * n, 2 * n) * 0.5));
    p.add_eq(tr, 1.0);
    let sol = solve(&p, TOL, 100).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert_relative_eq!(sol.objective, lmax, epsilon = 1e-6);
    let w = extract_hermitian(sol.psd(z));
    let tr_w: Complex64 = w.trace();
    assert_relative_eq!(tr_w.re, 1.0, epsilon = 1e-6);
    let re_tr_hw = (&h * &w).trace().re;
    assert_relative_eq!(re_tr_hw, lmax, epsilon = 1e-6);
}

#[test]
fn embedding_of_pauli_y_has_doubled_spectrum() {
    let j = Complex64::new(0.0, 1.0);
    let z = Complex64::new(0.0, 0.0);
    let h = DMatrix::from_row_slice(2, 2, &[z, -j, j, z]);
    let e = embed_hermitian(&h).unwrap();
    let mut ev: Vec<f64> = SymmetricEigen::new(e).eigenvalues.iter().cloned().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for (got, want) in ev.iter().zip([-1.0, -1.0, 1.0, 1.0]) {
        assert_relative_eq!(*got, want, epsilon = 1e-12);
    }
    let back = extract_hermitian(&embed_hermitian(&h).unwrap());
    assert_relative_eq!((back - h).norm(), 0.0, epsilon = 1e-15);
}

#[test]
fn non_hermitian_input_is_rejected() {
    let h = DMatrix::from_row_slice(2, 2, &[
        Complex64::new(1.0, 0.0),
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(1.0, 0.0),
    ]);
    assert!(matches!(embed_hermitian(&h), Err(ConicError::NotHermitian(_))));
}

#[test]
fn infeasible_problem_is_reported() {
    let mut p = ConicProblem::new();
    let x = p.add_scalar(ScalarDomain::NonNeg);
    p.maximize(LinExpr::scalar(x, 1.0));
    p.add_ge(LinExpr::scalar(x, 1.0), 2.0);
    p.add_le(LinExpr::scalar(x, 1.0), 1.0);
    let sol = solve(&p, TOL, 100).unwrap();
    assert_eq!(sol.status, SolveStatus::Infeasible);
}

#[test]
fn infeasible_sdp_is_reported() {
    let mut p = ConicProblem::new();
    let x = p.add_psd(2);
    p.maximize(LinExpr::new());
    let mut tr = LinExpr::new();
    tr.add_psd(x, &DMatrix::identity(2, 2));
    p.add_eq(tr, -1.0);
    let sol = solve(&p, TOL, 100).unwrap();
    assert_eq!(sol.status, SolveStatus::Infeasible);
}

#[test]
fn unbounded_problem_is_reported() {
    let mut p = ConicProblem::new();
    let x = p.add_scalar(ScalarDomain::NonNeg);
    let y = p.add_scalar(ScalarDomain::NonNeg);
    p.maximize(LinExpr::scalar(x, 1.0));
    let mut e = LinExpr::scalar(x, 1.0);
    e.add_scalar(y, -1.0);
    p.add_le(e, 1.0);
    let sol = solve(&p, TOL, 100).unwrap();
    assert_eq!(sol.status, SolveStatus::Unbounded);
}

#[test]
fn tolerance_out_of_range_is_an_error() {
    let p = max_trace_problem(&DMatrix::identity(2, 2));
    assert!(matches!(solve(&p, 1e-3, 50), Err(ConicError::Tolerance(_))));
    assert!(matches!(solve(&p, 1e-12, 50), Err(ConicError::Tolerance(_))));
}

#[test]
fn bad_dimensions_are_rejected() {
    let mut p = ConicProblem::new();
    let x = p.add_psd(2);
    let mut obj = LinExpr::new();
    obj.add_psd(x, &DMatrix::identity(3, 3));
    p.maximize(obj);
    assert!(matches!(solve(&p, TOL, 50), Err(ConicError::Dimension(_))));
}

#[test]
fn repeated_solves_are_bitwise_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let c = random_symmetric(4, &mut rng);
    let p = max_trace_problem(&c);
    let a = solve(&p, TOL, 100).unwrap();
    let b = solve(&p, TOL, 100).unwrap();
    assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    assert_eq!(a.psd[0], b.psd[0]);
}

#[test]
fn objective_scaling_does_not_move_the_solution() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let c = random_symmetric(3, &mut rng);
    let a = solve(&max_trace_problem(&c), TOL, 100).unwrap();
    let b = solve(&max_trace_problem(&(c.clone() * 1e4)), TOL, 100).unwrap();
    assert_relative_eq!(a.objective * 1e4, b.objective, max_relative = 1e-6);
    assert!((&a.psd[0] - &b.psd[0]).norm() < 1e-4);
}

/// Random feasible, bounded LP: max c^T x s.t. A x <= b, 0 <= x <= 1.
fn random_lp(seed: u64, n: usize, m: usize) -> ConicProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ConicProblem::new();
    let xs: Vec<_> = (0..n).map(|_| p.add_scalar(ScalarDomain::NonNeg)).collect();
    let mut obj = LinExpr::new();
    for &x in &xs {
        obj.add_scalar(x, rng.gen_range(-1.0..1.0));
        p.add_le(LinExpr::scalar(x, 1.0), 1.0);
    }
    p.maximize(obj);
    for _ in 0..m {
        let mut e = LinExpr::new();
        for &x in &xs {
            e.add_scalar(x, rng.gen_range(-1.0..1.0));
        }
        p.add_le(e, rng.gen_range(0.1..2.0));
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn weak_duality_and_feasibility_hold(seed in 0u64..10_000, n in 1usize..6, m in 0usize..5) {
        let p = random_lp(seed, n, m);
        let sol = solve(&p, TOL, 100).unwrap();
        prop_assert_eq!(sol.status, SolveStatus::Optimal);
        prop_assert!(sol.objective <= sol.dual_bound + 1e-6 * (1.0 + sol.objective.abs()));
        prop_assert!(sol.residuals.primal <= TOL);
        for v in &sol.scalars {
            prop_assert!(*v >= -1e-9 && *v <= 1.0 + 1e-6);
        }
    }

    #[test]
    fn returned_psd_blocks_are_psd(seed in 0u64..10_000, n in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_symmetric(n, &mut rng);
        let sol = solve(&max_trace_problem(&c), TOL, 100).unwrap();
        let x = &sol.psd[0];
        let emin = SymmetricEigen::new(x.clone()).eigenvalues.min();
        prop_assert!(emin >= -TOL * (1.0 + x.trace()));
    }
}

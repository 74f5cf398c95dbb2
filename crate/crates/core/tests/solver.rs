use std::f64::consts::PI;
use std::sync::Arc;

use nlhelm_core::solver::nominal_h;
use nlhelm_core::{
    build_disk_mesh_level, energy_norm, make_space, smallness_diagnostics, solve_nonlinear, solve_nonlinear_from,
    FeField, FeSpace, FemError, Outcome, ProblemSpec, Scheme, SolverError, Source,
};

fn space(level: usize, p: usize) -> Arc<FeSpace> {
    make_space(build_disk_mesh_level(level, p).unwrap(), p).unwrap()
}

fn constant(k: f64, eps: f64, f: f64) -> ProblemSpec {
    ProblemSpec::new(k, eps).with_source(Source::Constant(f))
}

#[test]
fn linear_problem_converges_in_one_step() {
    let s = space(3, 2);
    for scheme in [Scheme::Frozen, Scheme::NewtonLike] {
        let (_, tr) = solve_nonlinear(&s, &constant(8.0, 0.0, 50.0).with_scheme(scheme)).unwrap();
        assert_eq!(tr.outcome, Outcome::Converged { iterations: 1 });
        assert!(tr.final_residual() <= 1e-10);
        assert!(tr.records[0].sigma.is_none());
    }
}

#[test]
fn schemes_share_the_first_iterate() {
    let s = space(3, 2);
    for eps in [0.0, 0.1] {
        let spec = constant(8.0, eps, 50.0).with_max_iter(1);
        let (a, _) = solve_nonlinear(&s, &spec).unwrap();
        let (b, _) = solve_nonlinear(&s, &spec.clone().with_scheme(Scheme::NewtonLike)).unwrap();
        for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
            assert!((x - y).norm() <= 1e-12 * x.norm().max(1.0));
        }
    }
}

#[test]
fn frozen_iteration_count_at_moderate_data() {
    let s = space(4, 2);
    let (_, tr) = solve_nonlinear(&s, &constant(8.0, 0.1, 50.0)).unwrap();
    assert!(tr.outcome.is_converged(), "{:?}", tr.outcome);
    assert!(tr.iterations().abs_diff(15) <= 3, "{} iterations", tr.iterations());
    assert!(tr.final_residual() < 5e-7);
}

#[test]
fn large_data_separates_the_schemes() {
    let s = space(5, 2);
    let spec = constant(16.0, 0.1, 150.0).with_max_iter(50);
    let (_, frozen) = solve_nonlinear(&s, &spec).unwrap();
    match frozen.outcome {
        Outcome::MaxIterReached { residual } => assert!(residual > 0.05 && residual < 1.0, "residual {residual}"),
        other => panic!("frozen scheme ended with {other:?}"),
    }
    assert_eq!(frozen.iterations(), 50);
    let (_, newton) = solve_nonlinear(&s, &spec.with_scheme(Scheme::NewtonLike)).unwrap();
    assert!(newton.outcome.is_converged(), "{:?}", newton.outcome);
}

#[test]
fn converged_field_is_a_fixed_point() {
    let s = space(3, 2);
    for scheme in [Scheme::Frozen, Scheme::NewtonLike] {
        let spec = constant(8.0, 0.1, 50.0).with_scheme(scheme);
        let (u, tr) = solve_nonlinear(&s, &spec).unwrap();
        assert!(tr.outcome.is_converged());
        let norm = energy_norm(&u, spec.k);
        let step = spec.clone().with_scheme(Scheme::Frozen).with_max_iter(1);
        let (_, again) = solve_nonlinear_from(&s, &step, u).unwrap();
        let inc = again.records[0].increment_energy;
        assert!(inc <= 10.0 * spec.tol * norm, "{scheme:?}: increment {inc} vs norm {norm}");
    }
}

#[test]
fn trace_is_consistent() {
    let s = space(3, 2);
    let (_, tr) = solve_nonlinear(&s, &constant(8.0, 0.1, 50.0)).unwrap();
    assert!(tr.iterations() >= 6);
    for (l, r) in tr.records.iter().enumerate() {
        assert_eq!(r.iter, l + 1);
        assert!(r.rel_residual.is_finite() && r.increment_energy.is_finite() && r.wall_ms >= 0.0);
        match l {
            0 => assert!(r.sigma.is_none()),
            _ => assert_eq!(r.sigma, Some(r.increment_energy / tr.records[l - 1].increment_energy)),
        }
    }
    let tail = &tr.records[tr.iterations() - 5..];
    assert!(tail.iter().all(|r| r.sigma.unwrap() < 1.0));
    let last = tr.records.last().unwrap();
    assert_eq!(tr.outcome, Outcome::Converged { iterations: last.iter });
    assert!(tr.records[..tr.iterations() - 1].iter().all(|r| r.rel_residual > 5e-7));
}

#[test]
fn max_iter_reports_the_last_residual() {
    let s = space(2, 1);
    let (_, tr) = solve_nonlinear(&s, &constant(8.0, 0.1, 50.0).with_max_iter(2)).unwrap();
    assert_eq!(tr.iterations(), 2);
    assert_eq!(tr.outcome, Outcome::MaxIterReached { residual: tr.final_residual() });
}

#[test]
fn invalid_input_is_rejected() {
    let s = space(1, 1);
    let bad = constant(0.5, 0.1, 1.0);
    assert!(matches!(solve_nonlinear(&s, &bad), Err(SolverError::Fem(FemError::Argument(_)))));
    let other = space(1, 1);
    let res = solve_nonlinear_from(&s, &constant(8.0, 0.1, 1.0), FeField::zeros(&other));
    assert!(matches!(res, Err(SolverError::Fem(FemError::Argument(_)))));
}

#[test]
fn smallness_quantities() {
    let s = space(4, 2);
    let rep = smallness_diagnostics(&constant(8.0, 0.1, 50.0), &s);
    assert_eq!(nominal_h(&s), 1.0 / 16.0);
    assert!((rep.resolution.k_kh_2p - 0.5).abs() < 1e-14);
    // The discrete disk is slightly smaller than the unit disk.
    assert!((rep.c_data - 50.0 * PI.sqrt()).abs() < 1e-5 * 50.0 * PI.sqrt(), "{}", rep.c_data);
    assert!((rep.eps_data - 0.1 * rep.c_data * rep.c_data).abs() < 1e-9);
    assert_eq!(rep.log_weighted, rep.eps_data);

    let zero = smallness_diagnostics(&constant(8.0, 0.0, 50.0), &s);
    assert_eq!((zero.eps_data, zero.log_weighted), (0.0, 0.0));

    let s1 = space(4, 1);
    let rep1 = smallness_diagnostics(&constant(8.0, 0.1, 50.0), &s1);
    let ln2 = (16.0f64).ln().powi(2);
    assert!((rep1.log_weighted - ln2 * rep1.eps_data).abs() < 1e-9 * rep1.log_weighted);
}

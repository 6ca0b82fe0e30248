mod common;

use std::f64::consts::PI;

use charperiodic::cases::{remark1_problem, remark2_problem};
use charperiodic::expr::CoefficientExpr;
use charperiodic::model::ProblemSpec;
use charperiodic::operators::{apply_c, apply_d, Discretization, PeriodicGridFunction};
use charperiodic::solver::*;
use common::*;

const STEPS: usize = 256;

fn dissipative_diagonal() -> ProblemSpec {
    ProblemSpec::new(2, 1, vec![p("-1 - 0.2*sin(t)"), p("1.5 + 0.3*x")])
        .unwrap()
        .with_b(0, 0, p("0.5 + 0.2*cos(x + t)"))
        .with_b(1, 1, c(0.3))
        .with_r(0, 1, p("0.8*cos(t)"))
        .with_r(1, 0, c(0.6))
        .with_f(0, p("sin(t) + x"))
        .with_f(1, p("cos(2*t)*x"))
}

fn weakly_coupled() -> ProblemSpec {
    let mut spec = remark2_problem().spec;
    spec.b[1][0] = c(0.1);
    spec.with_f(0, p("cos(t + x)")).with_f(1, p("1 + sin(t)"))
}

fn inverse_defect(disc: &Discretization, u: &PeriodicGridFunction, g: &PeriodicGridFunction) -> f64 {
    let mut r = u.clone();
    r.axpy(-1.0, &disc.apply_c(u));
    r.distance(g)
}

#[test]
fn inverse_without_reflection_is_identity() {
    let spec = ProblemSpec::new(2, 1, vec![c(1.0), c(-1.0)]).unwrap();
    let disc = Discretization::new(&spec, 6, 8, STEPS).unwrap();
    let g = random_grid(&mut rng(1), 2, 6, 8);
    let inv = invert_i_minus_c(&disc, &g, 1e-12, 10);
    assert!(inv.converged);
    assert_eq!(inv.u.distance(&g), 0.0);
}

#[test]
fn inverse_of_zero_is_zero() {
    let disc = Discretization::new(&remark2_problem().spec, 6, 8, STEPS).unwrap();
    let inv = invert_i_minus_c(&disc, &disc.zeros(), 1e-12, 10);
    assert!(inv.converged);
    assert_eq!(inv.u.sup_norm(), 0.0);
}

#[test]
fn inverse_contracts_at_the_gain_product() {
    let disc = Discretization::new(&remark2_problem().spec, 16, 16, STEPS).unwrap();
    assert!(invert_i_minus_c(&disc, &disc.zeros(), 1e-8, 100).dissipative);
    let mut r = rng(2);
    for _ in 0..5 {
        let g = random_grid(&mut r, 2, 16, 16);
        let inv = invert_i_minus_c(&disc, &g, 1e-10, 200);
        assert!(inv.converged);
        assert!(inverse_defect(&disc, &inv.u, &g) <= 1e-8);
        let tail = &inv.update_ratios[inv.update_ratios.len().saturating_sub(3)..];
        assert!(tail.iter().all(|&q| q <= 0.30), "{:?}", inv.update_ratios);
    }
}

#[test]
fn inverse_flags_non_dissipative_reflection() {
    let disc = Discretization::new(&remark1_problem(0.8).unwrap().spec, 6, 8, STEPS).unwrap();
    let inv = invert_i_minus_c(&disc, &random_grid(&mut rng(4), 2, 6, 8), 1e-10, 20);
    assert!(!inv.dissipative);
    assert!(!inv.converged);
    assert_eq!(inv.iterations, 20);
}

#[test]
fn diagonal_picard_needs_one_outer_iteration() {
    let spec = dissipative_diagonal();
    let disc = Discretization::new(&spec, 12, 16, STEPS).unwrap();
    let cfg = SolverConfig::default();
    let res = solve_picard(&disc, disc.forcing(), &cfg);
    assert!(res.converged);
    assert_eq!(res.outer_iters, 1);
    assert!(res.contraction_estimates.is_empty());
    assert!(res.residual_sup <= cfg.tol);
    let direct = solve_direct(&disc, disc.forcing(), &cfg).unwrap();
    assert!(direct.u.distance(&res.u) <= 1e-8);
    assert!(residual(&spec, &res.u, &spec.f, STEPS).unwrap() <= cfg.tol);
}

#[test]
fn zero_source_gives_zero_solution() {
    let spec = weakly_coupled().with_f(0, CoefficientExpr::zero()).with_f(1, CoefficientExpr::zero());
    let disc = Discretization::new(&spec, 8, 8, STEPS).unwrap();
    let cfg = SolverConfig::default();
    let res = solve_picard(&disc, disc.forcing(), &cfg);
    assert!(res.converged);
    assert_eq!(res.u.sup_norm(), 0.0);
    let direct = solve_direct(&disc, disc.forcing(), &cfg).unwrap();
    assert_eq!(direct.u.sup_norm(), 0.0);
}

#[test]
fn weak_coupling_picard_agrees_with_direct() {
    let spec = weakly_coupled();
    let disc = Discretization::new(&spec, 16, 16, STEPS).unwrap();
    let cfg = SolverConfig::default();
    let picard = solve_picard(&disc, disc.forcing(), &cfg);
    assert!(picard.converged);
    assert!(picard.outer_iters > 1);
    assert_eq!(picard.contraction_estimates.len(), picard.outer_iters - 1);
    let direct = solve_direct(&disc, disc.forcing(), &cfg).unwrap();
    assert!(direct.converged);
    assert!(picard.u.distance(&direct.u) <= 1e-6);
    assert!(picard.u.distance(&direct.u) <= 10.0 * cfg.tol);
    for res in [&picard, &direct] {
        assert!(residual(&spec, &res.u, &spec.f, STEPS).unwrap() <= cfg.tol);
    }
}

#[test]
fn strong_coupling_picard_reports_divergence() {
    let mut spec = weakly_coupled();
    spec.b[0][1] = c(6.0);
    spec.b[1][0] = c(-6.0);
    let disc = Discretization::new(&spec, 8, 8, STEPS).unwrap();
    let cfg = SolverConfig { max_outer: 30, ..SolverConfig::default() };
    let res = solve_picard(&disc, disc.forcing(), &cfg);
    assert!(!res.converged);
    assert_eq!(res.contraction_estimates.len(), res.outer_iters - 1);
    assert!(res.contraction_estimates.last().unwrap() > &1.0);
}

#[test]
fn uncoupled_unreflected_matrix_is_identity() {
    let spec = ProblemSpec::new(2, 1, vec![c(1.0), c(-1.0)]).unwrap().with_b(0, 0, c(3.0));
    let disc = Discretization::new(&spec, 4, 6, STEPS).unwrap();
    let a = assemble_dense(&disc, 1000).unwrap();
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            assert_eq!(a[(i, j)], if i == j { 1.0 } else { 0.0 });
        }
    }
    let probe = kernel_probe(&disc, DEFAULT_KERNEL_THRESHOLD, 1000).unwrap();
    assert_eq!(probe.estimated_dim, 0);
    assert!(probe.singular_values.iter().all(|&s| (s - 1.0).abs() <= 1e-12));
}

#[test]
fn matrix_matches_matrix_free_application() {
    let spec = weakly_coupled().with_r(0, 1, p("0.5 + 0.2*sin(t)")).with_b(0, 1, p("x*cos(t)"));
    let (nx, nt) = (6, 10);
    let disc = Discretization::new(&spec, nx, nt, STEPS).unwrap();
    let a = assemble_dense(&disc, 1000).unwrap();
    let u = random_grid(&mut rng(3), 2, nx, nt);
    let mut expect = u.clone();
    expect.axpy(-1.0, &apply_c(&spec, &u, STEPS).unwrap());
    expect.axpy(-1.0, &apply_d(&spec, &u, STEPS).unwrap());
    for r in 0..a.nrows() {
        let au: f64 = (0..a.ncols()).map(|k| a[(r, k)] * u.values()[k]).sum();
        assert!((au - expect.values()[r]).abs() <= 1e-10);
    }
    // column k is the image of the k-th unit grid function
    for k in [0, 17, a.ncols() - 1] {
        let mut e = disc.zeros();
        e.values_mut()[k] = 1.0;
        let mut col = e.clone();
        col.axpy(-1.0, &disc.apply_c(&e));
        col.axpy(-1.0, &disc.apply_d(&e));
        for r in 0..a.nrows() {
            assert!((a[(r, k)] - col.values()[r]).abs() <= 1e-15);
        }
    }
}

#[test]
fn assembly_cap_is_enforced() {
    let disc = Discretization::new(&remark2_problem().spec, 4, 4, STEPS).unwrap();
    assert!(matches!(assemble_dense(&disc, 39), Err(SolveError::CapExceeded { unknowns: 40, cap: 39 })));
    assert!(assemble_dense(&disc, 40).is_ok());
}

#[test]
fn matrix_does_not_depend_on_the_source() {
    let spec = weakly_coupled();
    let scaled = spec.clone().with_f(0, p("100*cos(t + x)")).with_f(1, p("-3*(1 + sin(t))"));
    let a = assemble_dense(&Discretization::new(&spec, 4, 6, STEPS).unwrap(), 1000).unwrap();
    let b = assemble_dense(&Discretization::new(&scaled, 4, 6, STEPS).unwrap(), 1000).unwrap();
    assert_eq!(a, b);
}

#[test]
fn travelling_kernel_makes_direct_solve_singular() {
    let disc = Discretization::new(&remark2_problem().spec, 8, 8, STEPS).unwrap();
    let err = solve_direct(&disc, disc.forcing(), &SolverConfig::default()).unwrap_err();
    assert!(matches!(err, SolveError::Singular { .. }), "{err}");
    assert!(err.to_string().contains("kernel"));
    let probe = kernel_probe(&disc, DEFAULT_KERNEL_THRESHOLD, 1000).unwrap();
    assert!(probe.estimated_dim >= 1);
    assert!(probe.singular_values.windows(2).all(|w| w[0] >= w[1]));
    assert!(probe.estimated_dim <= probe.singular_values.len());
}

#[test]
fn commensurate_lossless_pair_has_kernel() {
    let spec = remark1_problem(1.0 / (2.0 * PI)).unwrap().spec;
    let disc = Discretization::new(&spec, 16, 16, STEPS).unwrap();
    let probe = kernel_probe(&disc, DEFAULT_KERNEL_THRESHOLD, 1000).unwrap();
    assert!(probe.estimated_dim >= 1);
}

#[test]
fn residual_of_zero_is_zero() {
    let spec = weakly_coupled();
    let no_f = vec![CoefficientExpr::zero(); 2];
    let z = PeriodicGridFunction::zeros(2, 5, 8);
    assert_eq!(residual(&spec, &z, &no_f, STEPS).unwrap(), 0.0);
}

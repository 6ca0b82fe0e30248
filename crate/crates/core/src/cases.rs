//! Built-in problems: two counterexamples with explicit kernels and a
//! generator of manufactured right-hand sides.

use std::fmt::Write as _;

use thiserror::Error;

use crate::expr::{CoefficientExpr, EvalError};
use crate::model::{ModelError, ProblemSpec, PERIOD};

/// Step of the central differences used for manufactured right-hand sides.
pub const FD_STEP: f64 = 1e-6;
/// Allowed defect of an exact solution in periodicity and boundary conditions.
pub const EXACT_TOL: f64 = 1e-8;
/// Largest denominator tried when testing a shift for commensurability with 2π.
pub const MAX_DENOMINATOR: u64 = 64;

const SAMPLES: usize = 64;

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("alpha must be finite and nonzero, got {0}")]
    InvalidAlpha(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("expected {expected} exact components, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("exact component {j} is not 2π-periodic: defect {defect:.3e} at x = {x}, t = {t}")]
    Periodicity { j: usize, x: f64, t: f64, defect: f64 },
    #[error("exact solution violates the boundary condition of component {j}: defect {defect:.3e} at t = {t}")]
    BoundaryCondition { j: usize, t: f64, defect: f64 },
}

#[derive(Debug, Clone)]
pub struct CaseBundle {
    /// The problem, right-hand side included.
    pub spec: ProblemSpec,
    pub exact: Option<Vec<CoefficientExpr>>,
    pub notes: String,
}

impl CaseBundle {
    pub fn f(&self) -> &[CoefficientExpr] {
        &self.spec.f
    }
}

fn c(v: f64) -> CoefficientExpr {
    CoefficientExpr::constant(v)
}

/// Time a signal needs to travel from `x = 0` to `x = 1` and back when both
/// speeds have modulus `|alpha|`.
pub fn round_trip_shift(alpha: f64) -> f64 {
    2.0 / alpha.abs()
}

/// `Some((p, q))` with `shift / 2π = p / q` up to 1e-9, `q ≤ max_q` smallest.
pub fn commensurability(shift: f64, max_q: u64) -> Option<(u64, u64)> {
    let ratio = shift / PERIOD;
    (1..=max_q).find_map(|q| {
        let p = (ratio * q as f64).round();
        ((ratio * q as f64 - p).abs() <= 1e-9 && p >= 1.0).then_some((p as u64, q))
    })
}

/// Two waves of speed `±alpha` reflected into each other without loss.
///
/// Every solution of the homogeneous problem is determined by a boundary
/// trace that repeats after the round-trip shift `2/|alpha|`; the kernel is
/// infinite-dimensional when the shift is a rational multiple of 2π.
pub fn remark1_problem(alpha: f64) -> Result<CaseBundle, CaseError> {
    if !alpha.is_finite() || alpha == 0.0 {
        return Err(CaseError::InvalidAlpha(alpha));
    }
    let spec = ProblemSpec::new(2, 1, vec![c(alpha), c(-alpha)])?
        .with_r(0, 1, c(1.0))
        .with_r(1, 0, c(1.0));
    let shift = round_trip_shift(alpha);
    let mut notes = String::new();
    let _ = write!(
        notes,
        "a1 = {alpha:?}, a2 = {:?}, r12 = r21 = 1, b = 0, f = 0. S0 = T0 = 1, so S0*T0 < 1 fails. \
         Characteristics give u1(x,t) = u2(0, t - x/alpha); the round-trip boundary shift is \
         2/|alpha| = {shift:?}. ",
        -alpha
    );
    match commensurability(shift, MAX_DENOMINATOR) {
        Some((p, q)) => {
            let _ = write!(
                notes,
                "shift/(2 pi) = {p}/{q}: commensurate, the homogeneous problem has an \
                 infinite-dimensional kernel."
            );
        }
        None => {
            let _ = write!(
                notes,
                "shift/(2 pi) is not p/q with q <= {MAX_DENOMINATOR}: the kernel reduces to the constants \
                 up to resonances invisible at that denominator."
            );
        }
    }
    Ok(CaseBundle { spec, exact: None, notes })
}

/// Constant speeds, a single coupling `b21 = 3/2` and reflections `1/2`.
///
/// Although `S0 T0 = 1/4`, every `u1 = U(t - x)`, `u2 = (2 - 3x/2) U(t - x)`
/// with `U` 2π-periodic solves the homogeneous problem. The bundle's exact
/// field is the member with `U = sin`.
pub fn remark2_problem() -> CaseBundle {
    let spec = ProblemSpec::new(2, 1, vec![c(1.0), c(1.0)])
        .expect("valid sizes")
        .with_b(1, 0, c(1.5))
        .with_r(0, 1, c(0.5))
        .with_r(1, 0, c(0.5));
    let wave = CoefficientExpr::parse("sin(t - x)").expect("valid expression");
    let profile = CoefficientExpr::parse("2 - 3*x/2").expect("valid expression");
    let exact = vec![wave.clone(), profile * wave];
    let notes = "a1 = a2 = 1, b21 = 3/2, r12 = r21 = 1/2, f = 0. S0 = T0 = 1/2 so S0*T0 = 1/4 < 1, \
                 yet u1 = U(t - x), u2 = (2 - 3x/2) U(t - x) solves the homogeneous problem for every \
                 2pi-periodic U: the kernel is infinite-dimensional. exact uses U = sin."
        .to_string();
    CaseBundle { spec, exact: Some(exact), notes }
}

fn sample_x(i: usize) -> f64 {
    i as f64 / (SAMPLES - 1) as f64
}

fn sample_t(l: usize) -> f64 {
    PERIOD * l as f64 / SAMPLES as f64
}

fn check_exact(skeleton: &ProblemSpec, exact: &[CoefficientExpr]) -> Result<(), CaseError> {
    let n = skeleton.n();
    for (j, u) in exact.iter().enumerate() {
        for i in 0..SAMPLES {
            for l in 0..SAMPLES {
                let (x, t) = (sample_x(i), sample_t(l));
                let defect = (u.evaluate(x, t + PERIOD)? - u.evaluate(x, t)?).abs();
                if !(defect <= EXACT_TOL) {
                    return Err(CaseError::Periodicity { j, x, t, defect });
                }
            }
        }
    }
    for j in 0..n {
        let xb = skeleton.boundary_x(j);
        for l in 0..SAMPLES {
            let t = sample_t(l);
            let mut reflected = 0.0;
            for k in skeleton.partners(j) {
                reflected += skeleton.r[j][k].evaluate(xb, t)? * exact[k].evaluate(xb, t)?;
            }
            let defect = (exact[j].evaluate(xb, t)? - reflected).abs();
            if !(defect <= EXACT_TOL) {
                return Err(CaseError::BoundaryCondition { j, t, defect });
            }
        }
    }
    Ok(())
}

/// Central difference `(g(x + dx, t + dt) - g(x - dx, t - dt)) / 2h` as an
/// expression.
fn central_difference(g: &CoefficientExpr, dx: f64, dt: f64) -> CoefficientExpr {
    (g.shifted(dx, dt) - g.shifted(-dx, -dt)) / c(2.0 * FD_STEP)
}

/// Sets `f` so that `exact` solves the skeleton's equations, with the
/// derivatives of `exact` replaced by central differences of step
/// [`FD_STEP`]. Coupling given through `tilde_b` (for every off-diagonal
/// pair) is assembled first.
pub fn manufactured(skeleton: &ProblemSpec, exact: Vec<CoefficientExpr>) -> Result<CaseBundle, CaseError> {
    let mut spec = match skeleton.tilde_b {
        Some(_) => skeleton.assemble_b_from_tilde()?,
        None => skeleton.clone(),
    };
    let n = spec.n();
    if exact.len() != n {
        return Err(CaseError::Shape { expected: n, found: exact.len() });
    }
    check_exact(&spec, &exact)?;

    for j in 0..n {
        let u = &exact[j];
        let mut f = if u.is_zero() {
            CoefficientExpr::zero()
        } else {
            let dt = central_difference(u, 0.0, FD_STEP);
            let dx = central_difference(u, FD_STEP, 0.0);
            dt + spec.a[j].clone() * dx
        };
        for k in 0..n {
            if !spec.b[j][k].is_zero() && !exact[k].is_zero() {
                f = f + spec.b[j][k].clone() * exact[k].clone();
            }
        }
        spec.f[j] = f;
    }
    let notes = format!(
        "manufactured right-hand side for the exact solution ({}); derivatives by central differences \
         with step {FD_STEP:e}.",
        exact.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(", ")
    );
    Ok(CaseBundle { spec, exact: Some(exact), notes })
}

//! Solution of the discretized system `u = Cu + Du + Ff`.
//!
//! * [`invert_i_minus_c`] inverts `I - C` by iterating the reduced boundary
//!   equation `v = K(Lv + g_w) + g_v`, a contraction with rate `‖K‖‖L‖`.
//! * [`solve_picard`] wraps it in the fixed-point iteration
//!   `u ← (I - C)⁻¹(Du + Ff)`, which need not converge when `D` is large.
//! * [`solve_direct`] factors the dense matrix of `I - C - D`.
//! * [`kernel_probe`] counts the near-zero singular values of that matrix.

use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::Serialize;
use thiserror::Error;

use crate::characteristics::TraceError;
use crate::expr::CoefficientExpr;
use crate::model::ProblemSpec;
use crate::operators::{Discretization, PeriodicGridFunction};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_ASSEMBLY_CAP: usize = 20_000;
pub const DEFAULT_KERNEL_THRESHOLD: f64 = 1e-6;
/// Relative pivot size below which the factored matrix is called singular.
pub const SINGULAR_PIVOT_RATIO: f64 = 1e-11;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("{unknowns} unknowns exceed the dense assembly cap {cap}")]
    CapExceeded { unknowns: usize, cap: usize },
    #[error(
        "matrix of I - C - D is numerically singular (min/max pivot {pivot_ratio:.3e}); \
         the homogeneous problem likely has a nontrivial kernel, see `kernel`"
    )]
    Singular { pivot_ratio: f64 },
    #[error("singular value decomposition failed to converge")]
    Svd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub assembly_cap: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol: DEFAULT_TOL, max_outer: 200, max_inner: 500, assembly_cap: DEFAULT_ASSEMBLY_CAP }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Picard,
    Direct,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub u: PeriodicGridFunction,
    /// `max |u - (Cu + Du + Ff)|` over the grid.
    pub residual_sup: f64,
    pub outer_iters: usize,
    pub inner_iters_total: usize,
    pub converged: bool,
    pub method: Method,
    /// Ratios of successive outer update norms.
    pub contraction_estimates: Vec<f64>,
}

/// Result of [`invert_i_minus_c`].
#[derive(Debug, Clone)]
pub struct InnerSolve {
    pub u: PeriodicGridFunction,
    pub iterations: usize,
    pub converged: bool,
    /// Ratios of successive update norms of the boundary iteration.
    pub update_ratios: Vec<f64>,
    /// Discrete `S⁰ T⁰ < 1` on this grid.
    pub dissipative: bool,
}

/// Solves `(I - C) u = g`.
pub fn invert_i_minus_c(disc: &Discretization, g: &PeriodicGridFunction, tol: f64, max_iter: usize) -> InnerSolve {
    let spec = disc.spec();
    let (m, n) = (spec.m(), spec.n());
    let g_v = g.components(0..m);
    let g_w = g.components(m..n);
    let (s0, t0) = disc.boundary_gains();

    let mut v = g_v.clone();
    let mut ratios = Vec::new();
    let mut last_update: Option<f64> = None;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut w = disc.apply_l(&v);
        w.axpy(1.0, &g_w);
        let mut next = disc.apply_k(&w);
        next.axpy(1.0, &g_v);
        let update = next.distance(&v);
        iterations += 1;
        if let Some(prev) = last_update {
            if prev > 0.0 {
                ratios.push(update / prev);
            }
        }
        last_update = Some(update);
        v = next;
        if update <= tol {
            converged = true;
            break;
        }
        if !update.is_finite() {
            break;
        }
    }
    let mut w = disc.apply_l(&v);
    w.axpy(1.0, &g_w);
    InnerSolve {
        u: PeriodicGridFunction::stack(&v, &w),
        iterations,
        converged,
        update_ratios: ratios,
        dissipative: s0 * t0 < 1.0,
    }
}

/// Picard iteration `uᵏ = (I - C)⁻¹(D uᵏ⁻¹ + Ff)` from `u⁻¹ = 0`, stopped
/// once the stencil residual drops to `tol`.
pub fn solve_picard(disc: &Discretization, forcing: &PeriodicGridFunction, cfg: &SolverConfig) -> SolveResult {
    let inner_tol = 0.1 * cfg.tol;
    let mut u = disc.zeros();
    let mut inner_total = 0;
    let mut updates: Vec<f64> = Vec::new();
    let mut outer = 0;
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let scale = forcing.sup_norm().max(1.0);
    while outer < cfg.max_outer {
        let mut rhs = disc.apply_d(&u);
        rhs.axpy(1.0, forcing);
        let inner = invert_i_minus_c(disc, &rhs, inner_tol, cfg.max_inner);
        inner_total += inner.iterations;
        outer += 1;
        updates.push(inner.u.distance(&u));
        u = inner.u;
        residual = disc.defect(&u, forcing).sup_norm();
        if residual <= cfg.tol {
            converged = true;
            break;
        }
        // a diverging iteration is reported, not continued forever
        if !residual.is_finite() || u.sup_norm() > 1e12 * scale {
            break;
        }
    }
    let contraction_estimates = updates.windows(2).map(|w| w[1] / w[0]).collect();
    SolveResult {
        u,
        residual_sup: residual,
        outer_iters: outer,
        inner_iters_total: inner_total,
        converged,
        method: Method::Picard,
        contraction_estimates,
    }
}

fn check_cap(disc: &Discretization, cap: usize) -> Result<(), SolveError> {
    if disc.unknowns() > cap {
        return Err(SolveError::CapExceeded { unknowns: disc.unknowns(), cap });
    }
    Ok(())
}

/// Dense matrix of `I - C - D` in the flattened grid ordering.
pub fn assemble_dense(disc: &Discretization, cap: usize) -> Result<Mat<f64>, SolveError> {
    check_cap(disc, cap)?;
    let n = disc.unknowns();
    let mut a = Mat::<f64>::identity(n, n);
    for rows in [disc.c_rows(), disc.d_rows()] {
        for r in 0..n {
            let (cols, vals) = rows.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                a[(r, c as usize)] -= v;
            }
        }
    }
    Ok(a)
}

/// Solves `(I - C - D) u = forcing` by LU factorization with partial
/// pivoting.
pub fn solve_direct(
    disc: &Discretization,
    forcing: &PeriodicGridFunction,
    cfg: &SolverConfig,
) -> Result<SolveResult, SolveError> {
    let a = assemble_dense(disc, cfg.assembly_cap)?;
    let n = a.nrows();
    let lu = a.partial_piv_lu();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..n {
        let p = lu.U()[(i, i)].abs();
        lo = lo.min(p);
        hi = hi.max(p);
    }
    let pivot_ratio = if hi > 0.0 { lo / hi } else { 0.0 };
    if !(pivot_ratio >= SINGULAR_PIVOT_RATIO) {
        return Err(SolveError::Singular { pivot_ratio });
    }
    let rhs = Mat::<f64>::from_fn(n, 1, |i, _| forcing.values()[i]);
    let sol = lu.solve(&rhs);
    let u = PeriodicGridFunction::from_values(
        forcing.n_comp(),
        forcing.nx(),
        forcing.nt(),
        (0..n).map(|i| sol[(i, 0)]).collect(),
    );
    let residual_sup = disc.defect(&u, forcing).sup_norm();
    Ok(SolveResult {
        u,
        residual_sup,
        outer_iters: 1,
        inner_iters_total: 0,
        converged: residual_sup <= cfg.tol,
        method: Method::Direct,
        contraction_estimates: Vec::new(),
    })
}

/// `max |u - (Cu + Du + Ff)|` over the grid nodes of `u`, evaluated
/// matrix-free with freshly traced characteristics.
pub fn residual(
    spec: &ProblemSpec,
    u: &PeriodicGridFunction,
    f: &[CoefficientExpr],
    n_steps: usize,
) -> Result<f64, TraceError> {
    crate::operators::system_defect(spec, u, f, n_steps)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelProbe {
    /// Descending.
    pub singular_values: Vec<f64>,
    pub threshold: f64,
    /// Number of singular values below `threshold · σ_max`.
    pub estimated_dim: usize,
}

impl KernelProbe {
    pub fn smallest_relative(&self) -> f64 {
        match (self.singular_values.first(), self.singular_values.last()) {
            (Some(&max), Some(&min)) if max > 0.0 => min / max,
            _ => 0.0,
        }
    }
}

/// Singular values of the dense `I - C - D` and the count of relatively
/// small ones.
pub fn kernel_probe(disc: &Discretization, threshold: f64, cap: usize) -> Result<KernelProbe, SolveError> {
    let a = assemble_dense(disc, cap)?;
    let mut singular_values = a.singular_values().map_err(|_| SolveError::Svd)?;
    singular_values.sort_by(|a, b| b.total_cmp(a));
    let max = singular_values.first().copied().unwrap_or(0.0);
    let estimated_dim = singular_values.iter().filter(|&&s| s < threshold * max).count();
    Ok(KernelProbe { singular_values, threshold, estimated_dim })
}

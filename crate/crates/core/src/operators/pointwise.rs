use std::ops::Range;

use rayon::prelude::*;

use super::{d_weight, PeriodicGridFunction, Segment};
use crate::characteristics::{trace, CharacteristicTrace, TraceError, TraceOptions};
use crate::expr::{CoefficientExpr, EvalError};
use crate::model::ProblemSpec;

/// The three terms of the integral system at one node.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NodeValues {
    /// `(Cu)_j(x, t)`
    pub c: f64,
    /// `(Du)_j(x, t)`
    pub d: f64,
    /// `(Ff)_j(x, t)`
    pub f: f64,
}

/// Boundary term: `c_j(x_j,x,t) Σ_k r_jk(τ_b) u_k(x_j, τ_b)`.
pub(crate) fn boundary_term(spec: &ProblemSpec, tr: &CharacteristicTrace, u: &PeriodicGridFunction) -> Result<f64, EvalError> {
    let left = spec.is_left(tr.j);
    let q = if left { 0 } else { tr.last_index() };
    let line = if left { 0 } else { u.nx() };
    let tau_b = tr.tau_values()[q];
    let mut sum = 0.0;
    for k in spec.partners(tr.j) {
        if spec.r[tr.j][k].is_zero() {
            continue;
        }
        sum += spec.r[tr.j][k].evaluate(0.0, tau_b)? * u.interp_line(k, line, tau_b);
    }
    Ok(tr.log_c_values()[q].exp() * sum)
}

pub(crate) fn coupling_term(spec: &ProblemSpec, tr: &CharacteristicTrace, u: &PeriodicGridFunction) -> Result<f64, EvalError> {
    let j = tr.j;
    let seg = Segment::new(tr, spec.is_left(j));
    let (xi, tau) = (tr.xi_nodes(), tr.tau_values());
    let mut total = 0.0;
    for q in seg.nodes() {
        let mut inner = 0.0;
        for k in (0..spec.n()).filter(|&k| k != j && !spec.b[j][k].is_zero()) {
            inner += spec.b[j][k].evaluate(xi[q], tau[q])? * u.interp(k, xi[q], tau[q]);
        }
        total += seg.weight(q) * d_weight(tr, q) * inner;
    }
    Ok(-seg.sign * total)
}

pub(crate) fn source_term(spec: &ProblemSpec, tr: &CharacteristicTrace, f: &[CoefficientExpr]) -> Result<f64, EvalError> {
    let j = tr.j;
    if f[j].is_zero() {
        return Ok(0.0);
    }
    let seg = Segment::new(tr, spec.is_left(j));
    let (xi, tau) = (tr.xi_nodes(), tr.tau_values());
    let mut total = 0.0;
    for q in seg.nodes() {
        total += seg.weight(q) * d_weight(tr, q) * f[j].evaluate(xi[q], tau[q])?;
    }
    Ok(seg.sign * total)
}

/// All three terms at the anchor of `tr`.
pub(crate) fn node_values(
    spec: &ProblemSpec,
    tr: &CharacteristicTrace,
    u: &PeriodicGridFunction,
    f: &[CoefficientExpr],
) -> Result<NodeValues, EvalError> {
    Ok(NodeValues { c: boundary_term(spec, tr, u)?, d: coupling_term(spec, tr, u)?, f: source_term(spec, tr, f)? })
}

/// Evaluates `eval` at every grid node of the components in `comps`, tracing
/// each node's characteristic afresh.
pub(crate) fn map_nodes<F>(
    spec: &ProblemSpec,
    nx: usize,
    nt: usize,
    comps: Range<usize>,
    n_steps: usize,
    eval: F,
) -> Result<PeriodicGridFunction, TraceError>
where
    F: Fn(&CharacteristicTrace) -> Result<f64, EvalError> + Sync,
{
    let mut out = PeriodicGridFunction::zeros(comps.len(), nx, nt);
    let offset = comps.start;
    let shape = out.clone();
    out.values_mut().par_iter_mut().enumerate().try_for_each(|(idx, slot)| {
        let (c, i, l) = shape.node_of(idx);
        let tr = trace(spec, c + offset, shape.x_node(i), shape.t_node(l), TraceOptions::without_stretch(n_steps))?;
        *slot = eval(&tr)?;
        Ok::<_, TraceError>(())
    })?;
    Ok(out)
}

/// `Kw` for `w` holding the components `m..n`; returns components `0..m`.
pub fn apply_k(spec: &ProblemSpec, w: &PeriodicGridFunction, n_steps: usize) -> Result<PeriodicGridFunction, TraceError> {
    assert_eq!(w.n_comp(), spec.n() - spec.m(), "w must hold the components m..n");
    let u = PeriodicGridFunction::stack(&w.zeros_like(spec.m()), w);
    map_nodes(spec, w.nx(), w.nt(), 0..spec.m(), n_steps, |tr| boundary_term(spec, tr, &u))
}

/// `Lv` for `v` holding the components `0..m`; returns components `m..n`.
pub fn apply_l(spec: &ProblemSpec, v: &PeriodicGridFunction, n_steps: usize) -> Result<PeriodicGridFunction, TraceError> {
    assert_eq!(v.n_comp(), spec.m(), "v must hold the components 0..m");
    let u = PeriodicGridFunction::stack(v, &v.zeros_like(spec.n() - spec.m()));
    map_nodes(spec, v.nx(), v.nt(), spec.m()..spec.n(), n_steps, |tr| boundary_term(spec, tr, &u))
}

/// `Cu = (Kw, Lv)` for `u = (v, w)`.
pub fn apply_c(spec: &ProblemSpec, u: &PeriodicGridFunction, n_steps: usize) -> Result<PeriodicGridFunction, TraceError> {
    assert_eq!(u.n_comp(), spec.n());
    map_nodes(spec, u.nx(), u.nt(), 0..spec.n(), n_steps, |tr| boundary_term(spec, tr, u))
}

pub fn apply_d(spec: &ProblemSpec, u: &PeriodicGridFunction, n_steps: usize) -> Result<PeriodicGridFunction, TraceError> {
    assert_eq!(u.n_comp(), spec.n());
    if spec.is_diagonal() {
        return Ok(u.zeros_like(spec.n()));
    }
    map_nodes(spec, u.nx(), u.nt(), 0..spec.n(), n_steps, |tr| coupling_term(spec, tr, u))
}

/// `Ff` on an `nx × nt` grid.
pub fn apply_f(
    spec: &ProblemSpec,
    f: &[CoefficientExpr],
    nx: usize,
    nt: usize,
    n_steps: usize,
) -> Result<PeriodicGridFunction, TraceError> {
    assert_eq!(f.len(), spec.n());
    map_nodes(spec, nx, nt, 0..spec.n(), n_steps, |tr| source_term(spec, tr, f))
}

/// `max |u - (Cu + Du + Ff)|` over the grid nodes, one trace per node.
pub(crate) fn system_defect(
    spec: &ProblemSpec,
    u: &PeriodicGridFunction,
    f: &[CoefficientExpr],
    n_steps: usize,
) -> Result<f64, TraceError> {
    let terms = map_nodes(spec, u.nx(), u.nt(), 0..spec.n(), n_steps, |tr| {
        let v = node_values(spec, tr, u, f)?;
        Ok(v.c + v.d + v.f)
    })?;
    Ok(u.distance(&terms))
}

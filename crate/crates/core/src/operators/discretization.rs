use rayon::prelude::*;

use super::{bilinear_stencil, cubic_stencil, d_weight, pointwise, PeriodicGridFunction, Segment};
use crate::characteristics::{trace, CharacteristicTrace, TraceError, TraceOptions};
use crate::expr::{CoefficientExpr, EvalError};
use crate::model::ProblemSpec;

/// Row-compressed sparse matrix over flattened grid indices.
#[derive(Debug, Clone, Default)]
pub struct SparseRows {
    offsets: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SparseRows {
    fn from_rows(rows: Vec<Vec<(u32, f64)>>) -> Self {
        let mut out = SparseRows { offsets: Vec::with_capacity(rows.len() + 1), ..Default::default() };
        out.offsets.push(0);
        for row in rows {
            for (c, v) in row {
                out.cols.push(c);
                out.vals.push(v);
            }
            out.offsets.push(out.cols.len());
        }
        out
    }

    pub fn n_rows(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.offsets[r], self.offsets[r + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(r, out)| {
            let (cols, vals) = self.row(r);
            *out = cols.iter().zip(vals).map(|(&c, &v)| v * x[c as usize]).sum();
        });
    }
}

/// Sort by column and merge duplicates.
fn compress(mut row: Vec<(u32, f64)>) -> Vec<(u32, f64)> {
    row.sort_unstable_by_key(|e| e.0);
    let mut out: Vec<(u32, f64)> = Vec::with_capacity(row.len());
    for (c, v) in row {
        match out.last_mut() {
            Some(last) if last.0 == c => last.1 += v,
            _ => out.push((c, v)),
        }
    }
    out.retain(|e| e.1 != 0.0);
    out
}

struct NodeRows {
    c_row: Vec<(u32, f64)>,
    d_row: Vec<(u32, f64)>,
    forcing: f64,
    gain: f64,
}

/// The integral system discretized on one grid: sparse rows of `C` and `D`
/// and the source term `Ff` for the problem's own right-hand side.
///
/// Each node's characteristic is traced exactly once; all later operator
/// applications reuse the stored stencils.
#[derive(Debug, Clone)]
pub struct Discretization {
    spec: ProblemSpec,
    nx: usize,
    nt: usize,
    n_steps: usize,
    c_rows: SparseRows,
    d_rows: SparseRows,
    forcing: PeriodicGridFunction,
    // R⁰ sampled at the grid nodes
    gain: PeriodicGridFunction,
}

impl Discretization {
    pub fn new(spec: &ProblemSpec, nx: usize, nt: usize, n_steps: usize) -> Result<Self, TraceError> {
        let shape = PeriodicGridFunction::zeros(spec.n(), nx, nt);
        let rows: Vec<NodeRows> = (0..shape.len())
            .into_par_iter()
            .map(|idx| {
                let (j, i, l) = shape.node_of(idx);
                let tr = trace(spec, j, shape.x_node(i), shape.t_node(l), TraceOptions::without_stretch(n_steps))?;
                Ok(node_rows(spec, &shape, &tr)?)
            })
            .collect::<Result<_, TraceError>>()?;

        let mut forcing = shape.clone();
        let mut gain = shape.clone();
        let mut c_rows = Vec::with_capacity(rows.len());
        let mut d_rows = Vec::with_capacity(rows.len());
        for (idx, r) in rows.into_iter().enumerate() {
            forcing.values_mut()[idx] = r.forcing;
            gain.values_mut()[idx] = r.gain;
            c_rows.push(r.c_row);
            d_rows.push(r.d_row);
        }
        Ok(Discretization {
            spec: spec.clone(),
            nx,
            nt,
            n_steps,
            c_rows: SparseRows::from_rows(c_rows),
            d_rows: SparseRows::from_rows(d_rows),
            forcing,
            gain,
        })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of grid unknowns `n (nx + 1) nt`.
    pub fn unknowns(&self) -> usize {
        self.forcing.len()
    }

    pub fn c_rows(&self) -> &SparseRows {
        &self.c_rows
    }

    pub fn d_rows(&self) -> &SparseRows {
        &self.d_rows
    }

    /// A zero function on this grid with all `n` components.
    pub fn zeros(&self) -> PeriodicGridFunction {
        PeriodicGridFunction::zeros(self.spec.n(), self.nx, self.nt)
    }

    fn apply_rows(&self, rows: &SparseRows, u: &PeriodicGridFunction) -> PeriodicGridFunction {
        assert_eq!(u.len(), self.unknowns(), "grid mismatch");
        let mut out = self.zeros();
        rows.matvec(u.values(), out.values_mut());
        out
    }

    pub fn apply_c(&self, u: &PeriodicGridFunction) -> PeriodicGridFunction {
        self.apply_rows(&self.c_rows, u)
    }

    pub fn apply_d(&self, u: &PeriodicGridFunction) -> PeriodicGridFunction {
        self.apply_rows(&self.d_rows, u)
    }

    /// `Kw` for `w` over components `m..n`; returns components `0..m`.
    pub fn apply_k(&self, w: &PeriodicGridFunction) -> PeriodicGridFunction {
        let m = self.spec.m();
        let u = PeriodicGridFunction::stack(&w.zeros_like(m), w);
        self.apply_c(&u).components(0..m)
    }

    /// `Lv` for `v` over components `0..m`; returns components `m..n`.
    pub fn apply_l(&self, v: &PeriodicGridFunction) -> PeriodicGridFunction {
        let (m, n) = (self.spec.m(), self.spec.n());
        let u = PeriodicGridFunction::stack(v, &v.zeros_like(n - m));
        self.apply_c(&u).components(m..n)
    }

    /// `Ff` for the problem's own right-hand side.
    pub fn forcing(&self) -> &PeriodicGridFunction {
        &self.forcing
    }

    /// `Ff` for another right-hand side on the same grid (traces again).
    pub fn apply_f(&self, f: &[CoefficientExpr]) -> Result<PeriodicGridFunction, TraceError> {
        pointwise::apply_f(&self.spec, f, self.nx, self.nt, self.n_steps)
    }

    /// Grid maxima of `R⁰` over the components reflected at `x = 0` and
    /// at `x = 1`: the discrete bounds on `‖K‖` and `‖L‖`.
    pub fn boundary_gains(&self) -> (f64, f64) {
        let m = self.spec.m();
        (self.gain.components(0..m).sup_norm(), self.gain.components(m..self.spec.n()).sup_norm())
    }

    /// `u - Cu - Du - forcing`, using the stored stencils.
    pub fn defect(&self, u: &PeriodicGridFunction, forcing: &PeriodicGridFunction) -> PeriodicGridFunction {
        let mut r = u.clone();
        r.axpy(-1.0, &self.apply_c(u));
        r.axpy(-1.0, &self.apply_d(u));
        r.axpy(-1.0, forcing);
        r
    }
}

fn node_rows(spec: &ProblemSpec, shape: &PeriodicGridFunction, tr: &CharacteristicTrace) -> Result<NodeRows, EvalError> {
    let j = tr.j;
    let left = spec.is_left(j);
    let (nx, nt) = (shape.nx(), shape.nt());

    // boundary reflection
    let q = if left { 0 } else { tr.last_index() };
    let line = if left { 0 } else { nx };
    let tau_b = tr.tau_values()[q];
    let c_b = tr.log_c_values()[q].exp();
    let mut c_row = Vec::new();
    let mut reflect = 0.0;
    for k in spec.partners(j) {
        if spec.r[j][k].is_zero() {
            continue;
        }
        let r = spec.r[j][k].evaluate(0.0, tau_b)?;
        reflect += r.abs();
        for (l, w) in cubic_stencil(nt, tau_b) {
            c_row.push((shape.index(k, line, l) as u32, c_b * r * w));
        }
    }

    // coupling and source along the characteristic
    let seg = Segment::new(tr, left);
    let (xi, tau) = (tr.xi_nodes(), tr.tau_values());
    let mut d_row = Vec::new();
    let mut forcing = 0.0;
    let coupled: Vec<usize> = (0..spec.n()).filter(|&k| k != j && !spec.b[j][k].is_zero()).collect();
    let has_source = !spec.f[j].is_zero();
    if !coupled.is_empty() || has_source {
        for qn in seg.nodes() {
            let wq = seg.weight(qn) * d_weight(tr, qn);
            if has_source {
                forcing += wq * spec.f[j].evaluate(xi[qn], tau[qn])?;
            }
            for &k in &coupled {
                let b = spec.b[j][k].evaluate(xi[qn], tau[qn])?;
                if b == 0.0 {
                    continue;
                }
                let coef = -seg.sign * wq * b;
                for (i, l, w) in bilinear_stencil(nx, nt, xi[qn], tau[qn]) {
                    if w != 0.0 {
                        d_row.push((shape.index(k, i, l) as u32, coef * w));
                    }
                }
            }
        }
    }

    Ok(NodeRows {
        c_row: compress(c_row),
        d_row: compress(d_row),
        forcing: seg.sign * forcing,
        gain: c_b * reflect,
    })
}

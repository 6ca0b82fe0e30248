//! Characteristic curves `ξ ↦ τ_j(ξ, x, t)` solving `dτ/dξ = 1/a_j(ξ, τ)`,
//! `τ_j(x, x, t) = t`, and the quantities integrated along them.
//!
//! A trace integrates, together with `τ`, the two exponents
//!
//! * `∫_x^ξ b_jj / a_j dη` (log of the weight `c_j`), and
//! * `∫_x^ξ ∂_t a_j / a_j² dη` (the stretch exponent of `∂_x τ_j`, `∂_t τ_j`),
//!
//! with the classical fourth-order Runge-Kutta scheme. For integrands that do
//! not feed back into the state this is composite Simpson quadrature with the
//! midpoint sampled at the Runge-Kutta stages.

use thiserror::Error;

use crate::expr::EvalError;
use crate::model::ProblemSpec;

pub const DEFAULT_ODE_STEPS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum TraceError {
    #[error("characteristic {j} blows up: |a| = {a_abs} at (ξ, τ) = ({xi}, {tau})")]
    Blowup { j: usize, xi: f64, tau: f64, a_abs: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions {
    /// Steps per unit length of `ξ`; each side of the anchor uses an even
    /// number of equal steps no longer than `1 / n_steps`.
    pub n_steps: usize,
    /// Also integrate `∂_t a_j / a_j²` (two extra evaluations of `a_j`).
    pub with_stretch: bool,
}

impl TraceOptions {
    pub fn new(n_steps: usize) -> Self {
        TraceOptions { n_steps, with_stretch: true }
    }

    pub fn without_stretch(n_steps: usize) -> Self {
        TraceOptions { n_steps, with_stretch: false }
    }
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions::new(DEFAULT_ODE_STEPS)
    }
}

/// Sampled characteristic through `(x, t)` over all of `[0, 1]`.
#[derive(Debug, Clone)]
pub struct CharacteristicTrace {
    pub j: usize,
    pub x: f64,
    pub t: f64,
    n_left: usize,
    h_left: f64,
    h_right: f64,
    xi: Vec<f64>,
    tau: Vec<f64>,
    slope: Vec<f64>,
    log_c: Vec<f64>,
    log_c_rate: Vec<f64>,
    stretch: Option<(Vec<f64>, Vec<f64>)>,
}

/// Rates of the augmented system at one point: `1/a`, `b_jj/a`, `∂_t a/a²`.
#[derive(Clone, Copy)]
struct Rates {
    slope: f64,
    log_c: f64,
    stretch: f64,
}

struct Integrand<'a> {
    spec: &'a ProblemSpec,
    j: usize,
    with_stretch: bool,
    b_zero: bool,
    // sign of a_j at the anchor; a sign change along the curve is a blow-up
    sign: f64,
}

impl Integrand<'_> {
    fn rates(&self, xi: f64, tau: f64) -> Result<Rates, TraceError> {
        let a = self.spec.a_at(self.j, xi, tau)?;
        if !(a.abs() >= self.spec.eps_a) || a * self.sign < 0.0 {
            return Err(TraceError::Blowup { j: self.j, xi, tau, a_abs: a.abs() });
        }
        let slope = 1.0 / a;
        let log_c = if self.b_zero { 0.0 } else { self.spec.b[self.j][self.j].evaluate(xi, tau)? * slope };
        let stretch = if self.with_stretch { self.spec.dt_a_at(self.j, xi, tau)? * slope * slope } else { 0.0 };
        Ok(Rates { slope, log_c, stretch })
    }
}

/// Even step count covering a segment of length `len`.
fn even_steps(len: f64, n_steps: usize) -> usize {
    if len <= 0.0 {
        return 0;
    }
    let half = (len * n_steps as f64 / 2.0 - 1e-9).ceil().max(1.0);
    2 * half as usize
}

/// Integrates the characteristic of component `j` through `(x, t)`.
pub fn trace(
    spec: &ProblemSpec,
    j: usize,
    x: f64,
    t: f64,
    opts: TraceOptions,
) -> Result<CharacteristicTrace, TraceError> {
    assert!(j < spec.n(), "component index {j} out of range");
    assert!((0.0..=1.0).contains(&x), "anchor x = {x} outside [0, 1]");
    let n_steps = opts.n_steps.max(2);
    let n_left = even_steps(x, n_steps);
    let n_right = even_steps(1.0 - x, n_steps);
    let h_left = if n_left > 0 { x / n_left as f64 } else { 0.0 };
    let h_right = if n_right > 0 { (1.0 - x) / n_right as f64 } else { 0.0 };
    let len = n_left + n_right + 1;

    let sign = spec.a_at(j, x, t)?.signum();
    let f = Integrand { spec, j, with_stretch: opts.with_stretch, b_zero: spec.b[j][j].is_zero(), sign };

    let mut xi = vec![0.0; len];
    let mut tau = vec![0.0; len];
    let mut slope = vec![0.0; len];
    let mut log_c = vec![0.0; len];
    let mut log_c_rate = vec![0.0; len];
    let mut stretch = vec![0.0; len];
    let mut stretch_rate = vec![0.0; len];

    for k in 0..n_left {
        xi[k] = k as f64 * h_left;
    }
    xi[n_left] = x;
    for k in 1..=n_right {
        xi[n_left + k] = if k == n_right { 1.0 } else { x + k as f64 * h_right };
    }

    let r0 = f.rates(x, t)?;
    tau[n_left] = t;
    slope[n_left] = r0.slope;
    log_c_rate[n_left] = r0.log_c;
    stretch_rate[n_left] = r0.stretch;

    let mut step = |from: usize, to: usize| -> Result<(), TraceError> {
        let h = xi[to] - xi[from];
        let (x0, y0) = (xi[from], tau[from]);
        let k1 = Rates { slope: slope[from], log_c: log_c_rate[from], stretch: stretch_rate[from] };
        let k2 = f.rates(x0 + 0.5 * h, y0 + 0.5 * h * k1.slope)?;
        let k3 = f.rates(x0 + 0.5 * h, y0 + 0.5 * h * k2.slope)?;
        let k4 = f.rates(x0 + h, y0 + h * k3.slope)?;
        let comb = |a: f64, b: f64, c: f64, d: f64| h / 6.0 * (a + 2.0 * b + 2.0 * c + d);
        tau[to] = y0 + comb(k1.slope, k2.slope, k3.slope, k4.slope);
        log_c[to] = log_c[from] + comb(k1.log_c, k2.log_c, k3.log_c, k4.log_c);
        stretch[to] = stretch[from] + comb(k1.stretch, k2.stretch, k3.stretch, k4.stretch);
        let r = f.rates(xi[to], tau[to])?;
        slope[to] = r.slope;
        log_c_rate[to] = r.log_c;
        stretch_rate[to] = r.stretch;
        Ok(())
    };

    for k in (0..n_left).rev() {
        step(k + 1, k)?;
    }
    for k in n_left..n_left + n_right {
        step(k, k + 1)?;
    }

    Ok(CharacteristicTrace {
        j,
        x,
        t,
        n_left,
        h_left,
        h_right,
        xi,
        tau,
        slope,
        log_c,
        log_c_rate,
        stretch: opts.with_stretch.then_some((stretch, stretch_rate)),
    })
}

fn hermite(h: f64, s: f64, y0: f64, m0: f64, y1: f64, m1: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1
}

impl CharacteristicTrace {
    pub fn xi_nodes(&self) -> &[f64] {
        &self.xi
    }

    pub fn tau_values(&self) -> &[f64] {
        &self.tau
    }

    /// `1 / a_j(ξ, τ)` at the nodes.
    pub fn slopes(&self) -> &[f64] {
        &self.slope
    }

    /// `∫_x^ξ b_jj/a_j dη` at the nodes.
    pub fn log_c_values(&self) -> &[f64] {
        &self.log_c
    }

    pub fn anchor_index(&self) -> usize {
        self.n_left
    }

    pub fn last_index(&self) -> usize {
        self.xi.len() - 1
    }

    /// Step length left of the anchor.
    pub fn h_left(&self) -> f64 {
        self.h_left
    }

    pub fn h_right(&self) -> f64 {
        self.h_right
    }

    /// Index of the node interval containing `xi` and its local coordinate.
    fn locate(&self, xi: f64) -> (usize, f64) {
        let xi = xi.clamp(0.0, 1.0);
        if xi <= self.x && self.n_left > 0 {
            let s = xi / self.h_left;
            let k = (s.floor() as usize).min(self.n_left - 1);
            (k, (xi - self.xi[k]) / (self.xi[k + 1] - self.xi[k]))
        } else if xi > self.x {
            let s = (xi - self.x) / self.h_right;
            let n_right = self.xi.len() - 1 - self.n_left;
            let k = (s.floor() as usize).min(n_right - 1) + self.n_left;
            (k, (xi - self.xi[k]) / (self.xi[k + 1] - self.xi[k]))
        } else {
            (self.n_left, 0.0)
        }
    }

    fn dense(&self, xi: f64, y: &[f64], dy: &[f64]) -> f64 {
        if xi == self.x {
            return y[self.n_left];
        }
        let (k, s) = self.locate(xi);
        if s == 0.0 || self.xi.len() == 1 {
            return y[k];
        }
        let h = self.xi[k + 1] - self.xi[k];
        hermite(h, s, y[k], dy[k], y[k + 1], dy[k + 1])
    }

    /// `τ_j(ξ, x, t)` by cubic Hermite dense output.
    pub fn tau(&self, xi: f64) -> f64 {
        self.dense(xi, &self.tau, &self.slope)
    }

    /// `∫_x^ξ b_jj/a_j dη`.
    pub fn log_c(&self, xi: f64) -> f64 {
        self.dense(xi, &self.log_c, &self.log_c_rate)
    }

    /// `c_j(ξ, x, t)`.
    pub fn c(&self, xi: f64) -> f64 {
        self.log_c(xi).exp()
    }

    /// `∫_x^ξ ∂_t a_j / a_j² dη`; `None` when traced without stretch.
    pub fn stretch(&self, xi: f64) -> Option<f64> {
        let (s, ds) = self.stretch.as_ref()?;
        Some(self.dense(xi, s, ds))
    }
}

/// `∂_x τ_j(ξ, x, t) = -(1/a_j(x,t)) exp ∫_ξ^x ∂_t a_j / a_j² dη`.
pub fn dtau_dx(spec: &ProblemSpec, j: usize, xi: f64, x: f64, t: f64, n_steps: usize) -> Result<f64, TraceError> {
    let tr = trace(spec, j, x, t, TraceOptions::new(n_steps))?;
    let a = spec.a_at(j, x, t)?;
    Ok(-(-tr.stretch(xi).unwrap_or(0.0)).exp() / a)
}

/// `∂_t τ_j(ξ, x, t) = exp ∫_ξ^x ∂_t a_j / a_j² dη`.
pub fn dtau_dt(spec: &ProblemSpec, j: usize, xi: f64, x: f64, t: f64, n_steps: usize) -> Result<f64, TraceError> {
    let tr = trace(spec, j, x, t, TraceOptions::new(n_steps))?;
    Ok((-tr.stretch(xi).unwrap_or(0.0)).exp())
}

/// `c_j(ξ, x, t) = exp ∫_x^ξ b_jj / a_j dη` along the characteristic.
pub fn c_factor(spec: &ProblemSpec, j: usize, xi: f64, x: f64, t: f64, n_steps: usize) -> Result<f64, TraceError> {
    let tr = trace(spec, j, x, t, TraceOptions::without_stretch(n_steps))?;
    Ok(tr.c(xi))
}

/// `d_j(ξ, x, t) = c_j(ξ, x, t) / a_j(ξ, τ_j(ξ, x, t))`.
pub fn d_factor(spec: &ProblemSpec, j: usize, xi: f64, x: f64, t: f64, n_steps: usize) -> Result<f64, TraceError> {
    let tr = trace(spec, j, x, t, TraceOptions::without_stretch(n_steps))?;
    let a = spec.a_at(j, xi, tr.tau(xi))?;
    Ok(tr.c(xi) / a)
}

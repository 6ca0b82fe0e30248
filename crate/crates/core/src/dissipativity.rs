//! Boundary amplification profiles `R⁰_j`, `R¹_j` and their maxima
//! `S⁰, T⁰, S¹, T¹`.
//!
//! `R⁰_j(x,t)` is the weight `c_j` carried from the reflecting endpoint to
//! `(x,t)` times `Σ_k |r_jk|` evaluated where the characteristic meets that
//! endpoint. `R¹_j` additionally multiplies by `∂_t τ_j` at the endpoint.
//! `S` collects the maxima over the components reflected at `x = 0`, `T` over
//! those reflected at `x = 1`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::characteristics::{trace, TraceError, TraceOptions};
use crate::model::ProblemSpec;

pub const DEFAULT_GRID: usize = 128;

/// `(R⁰_j(x,t), R¹_j(x,t))` from a single trace.
pub fn profiles(spec: &ProblemSpec, j: usize, x: f64, t: f64, n_steps: usize) -> Result<(f64, f64), TraceError> {
    let tr = trace(spec, j, x, t, TraceOptions::new(n_steps))?;
    let xb = spec.boundary_x(j);
    let tau_b = tr.tau(xb);
    let mut sum = 0.0;
    for k in spec.partners(j) {
        if !spec.r[j][k].is_zero() {
            sum += spec.r[j][k].evaluate(0.0, tau_b)?.abs();
        }
    }
    let r0 = tr.c(xb) * sum;
    let r1 = r0 * (-tr.stretch(xb).unwrap_or(0.0)).exp();
    Ok((r0, r1))
}

pub fn r0_profile(spec: &ProblemSpec, j: usize, x: f64, t: f64, n_steps: usize) -> Result<f64, TraceError> {
    profiles(spec, j, x, t, n_steps).map(|p| p.0)
}

pub fn r1_profile(spec: &ProblemSpec, j: usize, x: f64, t: f64, n_steps: usize) -> Result<f64, TraceError> {
    profiles(spec, j, x, t, n_steps).map(|p| p.1)
}

/// Where a maximum was attained. `j` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Argmax {
    pub j: usize,
    pub x: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DissipativityReport {
    #[serde(rename = "S0")]
    pub s0: f64,
    #[serde(rename = "T0")]
    pub t0: f64,
    #[serde(rename = "S1")]
    pub s1: f64,
    #[serde(rename = "T1")]
    pub t1: f64,
    /// `S⁰ T⁰ < 1`
    pub cond_t8: bool,
    /// `S¹ T¹ < 1`
    pub cond_t81: bool,
    pub argmax_s0: Argmax,
    pub argmax_t0: Argmax,
    pub argmax_s1: Argmax,
    pub argmax_t1: Argmax,
    pub grid_x: usize,
    pub grid_t: usize,
    pub ode_steps: usize,
}

#[derive(Clone, Copy)]
struct Best {
    value: f64,
    at: Argmax,
}

impl Best {
    fn new() -> Self {
        Best { value: f64::NEG_INFINITY, at: Argmax { j: 0, x: f64::NAN, t: f64::NAN } }
    }

    fn offer(&mut self, value: f64, at: Argmax) {
        if value > self.value {
            *self = Best { value, at };
        }
    }
}

/// Maximizes both profiles over the grid `x_i = i/(grid_x - 1)`,
/// `t_l = 2π l / grid_t`.
pub fn constants(
    spec: &ProblemSpec,
    grid_x: usize,
    grid_t: usize,
    n_steps: usize,
) -> Result<DissipativityReport, TraceError> {
    let grid_x = grid_x.max(2);
    let grid_t = grid_t.max(1);
    let nodes: Vec<(usize, usize, usize)> = (0..spec.n())
        .flat_map(|j| (0..grid_x).flat_map(move |i| (0..grid_t).map(move |l| (j, i, l))))
        .collect();
    let values: Vec<(f64, f64)> = nodes
        .par_iter()
        .map(|&(j, i, l)| {
            let x = i as f64 / (grid_x - 1) as f64;
            let t = 2.0 * PI * l as f64 / grid_t as f64;
            profiles(spec, j, x, t, n_steps)
        })
        .collect::<Result<_, _>>()?;

    let (mut s0, mut t0, mut s1, mut t1) = (Best::new(), Best::new(), Best::new(), Best::new());
    for (&(j, i, l), &(r0, r1)) in nodes.iter().zip(&values) {
        let at = Argmax { j: j + 1, x: i as f64 / (grid_x - 1) as f64, t: 2.0 * PI * l as f64 / grid_t as f64 };
        if spec.is_left(j) {
            s0.offer(r0, at);
            s1.offer(r1, at);
        } else {
            t0.offer(r0, at);
            t1.offer(r1, at);
        }
    }
    Ok(DissipativityReport {
        s0: s0.value,
        t0: t0.value,
        s1: s1.value,
        t1: t1.value,
        cond_t8: s0.value * t0.value < 1.0,
        cond_t81: s1.value * t1.value < 1.0,
        argmax_s0: s0.at,
        argmax_t0: t0.at,
        argmax_s1: s1.at,
        argmax_t1: t1.at,
        grid_x,
        grid_t,
        ode_steps: n_steps,
    })
}

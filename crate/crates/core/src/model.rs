//! Problem data: wave speeds, coupling, reflection coefficients and the
//! right-hand side of a time-periodic hyperbolic system on `[0,1]`, together
//! with sampled validation of the standing assumptions.

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::expr::{CoefficientExpr, EvalError};

pub const PERIOD: f64 = 2.0 * PI;

/// Default lower bound on `|a_j|`.
pub const DEFAULT_EPS_A: f64 = 1e-6;

/// Step for the central difference of `a_j` in `t`.
pub const DT_STEP: f64 = 1e-6;

pub const PERIODICITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid sizes n = {n}, m = {m}: need 1 <= m < n")]
    InvalidSizes { n: usize, m: usize },
    #[error("{field} has {found} entries, expected {expected}")]
    Shape { field: &'static str, expected: usize, found: usize },
    #[error("missing tilde_b[{j},{k}]")]
    MissingTildeB { j: usize, k: usize },
}

/// The full problem. Indices are 0-based in the API; `0..m` are the
/// components reflected at `x = 0`, `m..n` those reflected at `x = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    n: usize,
    m: usize,
    pub a: Vec<CoefficientExpr>,
    pub b: Vec<Vec<CoefficientExpr>>,
    pub tilde_b: Option<Vec<Vec<Option<CoefficientExpr>>>>,
    pub r: Vec<Vec<CoefficientExpr>>,
    pub f: Vec<CoefficientExpr>,
    pub eps_a: f64,
}

impl ProblemSpec {
    /// A problem with the given wave speeds and every other field zero.
    pub fn new(n: usize, m: usize, a: Vec<CoefficientExpr>) -> Result<Self, ModelError> {
        if m == 0 || m >= n {
            return Err(ModelError::InvalidSizes { n, m });
        }
        if a.len() != n {
            return Err(ModelError::Shape { field: "a", expected: n, found: a.len() });
        }
        let zeros = || vec![vec![CoefficientExpr::zero(); n]; n];
        Ok(ProblemSpec {
            n,
            m,
            a,
            b: zeros(),
            tilde_b: None,
            r: zeros(),
            f: vec![CoefficientExpr::zero(); n],
            eps_a: DEFAULT_EPS_A,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// `true` for components with boundary data at `x = 0`.
    pub fn is_left(&self, j: usize) -> bool {
        j < self.m
    }

    /// Endpoint `x_j` where component `j` takes its reflected boundary value.
    pub fn boundary_x(&self, j: usize) -> f64 {
        if self.is_left(j) {
            0.0
        } else {
            1.0
        }
    }

    /// Components whose boundary traces feed component `j` through `r`.
    pub fn partners(&self, j: usize) -> std::ops::Range<usize> {
        if self.is_left(j) {
            self.m..self.n
        } else {
            0..self.m
        }
    }

    pub fn with_b(mut self, j: usize, k: usize, e: CoefficientExpr) -> Self {
        self.b[j][k] = e;
        self
    }

    pub fn with_r(mut self, j: usize, k: usize, e: CoefficientExpr) -> Self {
        self.r[j][k] = e;
        self
    }

    pub fn with_f(mut self, j: usize, e: CoefficientExpr) -> Self {
        self.f[j] = e;
        self
    }

    pub fn with_tilde_b(mut self, j: usize, k: usize, e: CoefficientExpr) -> Self {
        let n = self.n;
        self.tilde_b.get_or_insert_with(|| vec![vec![None; n]; n])[j][k] = Some(e);
        self
    }

    pub fn with_eps_a(mut self, eps_a: f64) -> Self {
        self.eps_a = eps_a;
        self
    }

    /// `true` when every off-diagonal `b_jk` is a literal zero.
    pub fn is_diagonal(&self) -> bool {
        (0..self.n).all(|j| (0..self.n).all(|k| j == k || self.b[j][k].is_zero()))
    }

    pub fn a_at(&self, j: usize, x: f64, t: f64) -> Result<f64, EvalError> {
        self.a[j].evaluate(x, t)
    }

    /// `∂_t a_j` by central differences.
    pub fn dt_a_at(&self, j: usize, x: f64, t: f64) -> Result<f64, EvalError> {
        let hi = self.a[j].evaluate(x, t + DT_STEP)?;
        let lo = self.a[j].evaluate(x, t - DT_STEP)?;
        Ok((hi - lo) / (2.0 * DT_STEP))
    }

    /// Returns a copy whose off-diagonal coupling is `tilde_b_jk (a_k - a_j)`.
    pub fn assemble_b_from_tilde(&self) -> Result<ProblemSpec, ModelError> {
        let mut out = self.clone();
        for j in 0..self.n {
            for k in 0..self.n {
                if j == k {
                    continue;
                }
                let tb = self
                    .tilde_b
                    .as_ref()
                    .and_then(|tb| tb[j][k].as_ref())
                    .ok_or(ModelError::MissingTildeB { j, k })?;
                out.b[j][k] = tb * &(&self.a[k] - &self.a[j]);
            }
        }
        Ok(out)
    }

    /// Every named field, for sweeps over all coefficients.
    fn fields(&self) -> Vec<(String, &CoefficientExpr)> {
        let mut out = Vec::new();
        for j in 0..self.n {
            out.push((format!("a[{}]", j + 1), &self.a[j]));
        }
        for j in 0..self.n {
            for k in 0..self.n {
                out.push((format!("b[{},{}]", j + 1, k + 1), &self.b[j][k]));
            }
        }
        if let Some(tb) = &self.tilde_b {
            for j in 0..self.n {
                for k in 0..self.n {
                    if let Some(e) = &tb[j][k] {
                        out.push((format!("tilde_b[{},{}]", j + 1, k + 1), e));
                    }
                }
            }
        }
        for j in 0..self.n {
            for k in 0..self.n {
                out.push((format!("r[{},{}]", j + 1, k + 1), &self.r[j][k]));
            }
        }
        for j in 0..self.n {
            out.push((format!("f[{}]", j + 1), &self.f[j]));
        }
        out
    }

    /// Sampled check of the standing assumptions. Violations are reported,
    /// never raised.
    pub fn validate(&self, samples_x: usize, samples_t: usize) -> ValidationReport {
        let samples_x = samples_x.max(2);
        let samples_t = samples_t.max(2);
        let xs: Vec<f64> = (0..samples_x).map(|i| i as f64 / (samples_x - 1) as f64).collect();
        let ts: Vec<f64> = (0..samples_t).map(|l| PERIOD * l as f64 / samples_t as f64).collect();
        let mut checks = Vec::new();

        for j in 0..self.n {
            checks.push(self.check_nonvanishing(j, &xs, &ts));
        }
        for (name, e) in self.fields() {
            checks.push(check_periodic(&name, e, &xs, &ts));
        }
        for j in 0..self.n {
            for k in 0..self.n {
                let allowed = self.is_left(j) != self.is_left(k);
                let e = &self.r[j][k];
                let name = format!("r[{},{}]", j + 1, k + 1);
                if e.depends_on_x() {
                    checks.push(CheckRecord::fail("reflection depends only on t", &name, None, f64::NAN, 0.0));
                }
                if !allowed {
                    let (worst, mag) = scan_max(e, &[0.0], &ts);
                    let passed = mag == 0.0;
                    let rec = CheckRecord {
                        check: "reflection pattern".into(),
                        field: name,
                        passed,
                        worst_x: worst.map(|w| w.0),
                        worst_t: worst.map(|w| w.1),
                        measured: mag,
                        tolerance: 0.0,
                    };
                    checks.push(rec);
                }
            }
        }
        let passed = checks.iter().all(|c| c.passed);
        ValidationReport { passed, checks }
    }

    fn check_nonvanishing(&self, j: usize, xs: &[f64], ts: &[f64]) -> CheckRecord {
        let name = format!("a[{}]", j + 1);
        let mut min_abs = f64::INFINITY;
        let mut worst = None;
        let mut pos = false;
        let mut neg = false;
        for &x in xs {
            for &t in ts {
                match self.a[j].evaluate(x, t) {
                    Ok(v) => {
                        pos |= v > 0.0;
                        neg |= v < 0.0;
                        if v.abs() < min_abs {
                            min_abs = v.abs();
                            worst = Some((x, t));
                        }
                    }
                    Err(_) => {
                        return CheckRecord::fail("nonvanishing a", &name, Some((x, t)), f64::NAN, self.eps_a);
                    }
                }
            }
        }
        CheckRecord {
            check: "nonvanishing a".into(),
            field: name,
            passed: !(pos && neg) && min_abs >= self.eps_a,
            worst_x: worst.map(|w| w.0),
            worst_t: worst.map(|w| w.1),
            measured: min_abs,
            tolerance: self.eps_a,
        }
    }
}

fn scan_max(e: &CoefficientExpr, xs: &[f64], ts: &[f64]) -> (Option<(f64, f64)>, f64) {
    let mut best = (None, 0.0f64);
    for &x in xs {
        for &t in ts {
            let v = e.evaluate(x, t).map(f64::abs).unwrap_or(f64::INFINITY);
            if v > best.1 || best.0.is_none() {
                best = (Some((x, t)), v);
            }
        }
    }
    best
}

fn check_periodic(name: &str, e: &CoefficientExpr, xs: &[f64], ts: &[f64]) -> CheckRecord {
    let mut worst = None;
    let mut max_dev = 0.0f64;
    for &x in xs {
        for &t in ts {
            let dev = match (e.evaluate(x, t), e.evaluate(x, t + PERIOD)) {
                (Ok(a), Ok(b)) => (a - b).abs(),
                _ => f64::INFINITY,
            };
            if dev > max_dev || worst.is_none() {
                max_dev = dev;
                worst = Some((x, t));
            }
        }
    }
    CheckRecord {
        check: "periodicity".into(),
        field: name.to_string(),
        passed: max_dev <= PERIODICITY_TOL,
        worst_x: worst.map(|w| w.0),
        worst_t: worst.map(|w| w.1),
        measured: max_dev,
        tolerance: PERIODICITY_TOL,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub check: String,
    pub field: String,
    pub passed: bool,
    pub worst_x: Option<f64>,
    pub worst_t: Option<f64>,
    pub measured: f64,
    pub tolerance: f64,
}

impl CheckRecord {
    fn fail(check: &str, field: &str, at: Option<(f64, f64)>, measured: f64, tolerance: f64) -> Self {
        CheckRecord {
            check: check.into(),
            field: field.into(),
            passed: false,
            worst_x: at.map(|a| a.0),
            worst_t: at.map(|a| a.1),
            measured,
            tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub checks: Vec<CheckRecord>,
}

impl ValidationReport {
    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

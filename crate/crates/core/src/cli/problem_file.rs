//! TOML problem files.
//!
//! ```toml
//! [sizes]
//! n = 2
//! m = 1
//!
//! [a]            # one entry per component, 1-based
//! 1 = "1"
//! 2 = "1"
//!
//! [b]            # "j,k" keys; omitted entries are zero
//! "2,1" = "3/2"
//!
//! [tilde_b]      # alternative to b off the diagonal: b_jk = tilde_b_jk (a_k - a_j)
//!
//! [r]
//! "1,2" = "1/2"
//! "2,1" = "1/2"
//!
//! [f]
//!
//! [exact]        # optional closed-form solution, used by `case manufactured`
//!
//! [numerics]     # every field optional
//! nx = 64
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::characteristics::DEFAULT_ODE_STEPS;
use crate::dissipativity::DEFAULT_GRID;
use crate::expr::{CoefficientExpr, ParseError};
use crate::model::{ModelError, ProblemSpec, DEFAULT_EPS_A};
use crate::solver::{SolverConfig, DEFAULT_ASSEMBLY_CAP, DEFAULT_KERNEL_THRESHOLD, DEFAULT_TOL};

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Toml(#[from] toml::de::Error),
    #[error("{field}: {source} (at offset {offset} of {text:?})", offset = source.offset())]
    Expr { field: String, text: String, source: ParseError },
    #[error("[{table}] key {key:?}: {reason}")]
    Key { table: &'static str, key: String, reason: String },
    #[error("both b and tilde_b given for the pair ({j},{k})")]
    Conflict { j: usize, k: usize },
    #[error("missing wave speed a[{0}]")]
    MissingSpeed(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("numerics: {0}")]
    Numerics(String),
}

/// Discretization and solver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsConfig {
    pub nx: usize,
    pub nt: usize,
    pub ode_steps: usize,
    pub tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub assembly_cap: usize,
    pub kernel_threshold: f64,
    pub eps_a: f64,
    /// Points in x of the dissipativity grid (both ends included).
    pub check_grid_x: usize,
    pub check_grid_t: usize,
    pub validate_samples_x: usize,
    pub validate_samples_t: usize,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        NumericsConfig {
            nx: 64,
            nt: 64,
            ode_steps: DEFAULT_ODE_STEPS,
            tol: DEFAULT_TOL,
            max_outer: 200,
            max_inner: 500,
            assembly_cap: DEFAULT_ASSEMBLY_CAP,
            kernel_threshold: DEFAULT_KERNEL_THRESHOLD,
            eps_a: DEFAULT_EPS_A,
            check_grid_x: DEFAULT_GRID + 1,
            check_grid_t: DEFAULT_GRID,
            validate_samples_x: 65,
            validate_samples_t: 64,
        }
    }
}

impl NumericsConfig {
    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            tol: self.tol,
            max_outer: self.max_outer,
            max_inner: self.max_inner,
            assembly_cap: self.assembly_cap,
        }
    }

    fn check(&self) -> Result<(), LoadError> {
        let bad = |msg: &str| Err(LoadError::Numerics(msg.to_string()));
        if self.nx < 1 {
            return bad("nx must be at least 1");
        }
        if self.nt < crate::operators::MIN_NT {
            return bad("nt must be at least 4");
        }
        if self.ode_steps < 2 {
            return bad("ode_steps must be at least 2");
        }
        if !(self.tol > 0.0) || !(self.kernel_threshold > 0.0) || !(self.eps_a > 0.0) {
            return bad("tol, kernel_threshold and eps_a must be positive");
        }
        Ok(())
    }
}

/// Everything a problem file holds.
#[derive(Debug, Clone)]
pub struct ProblemFile {
    pub spec: ProblemSpec,
    pub numerics: NumericsConfig,
    pub exact: Option<Vec<CoefficientExpr>>,
    pub notes: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Sizes {
    n: usize,
    m: usize,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct Meta {
    notes: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Raw {
    sizes: Sizes,
    a: BTreeMap<String, String>,
    #[serde(default)]
    b: BTreeMap<String, String>,
    #[serde(default)]
    tilde_b: BTreeMap<String, String>,
    #[serde(default)]
    r: BTreeMap<String, String>,
    #[serde(default)]
    f: BTreeMap<String, String>,
    exact: Option<BTreeMap<String, String>>,
    #[serde(default)]
    numerics: NumericsConfig,
    #[serde(default)]
    meta: Meta,
}

fn index(table: &'static str, key: &str, n: usize) -> Result<usize, LoadError> {
    let err = |reason: String| LoadError::Key { table, key: key.to_string(), reason };
    let j: usize = key.trim().parse().map_err(|_| err("expected a component index".into()))?;
    if j < 1 || j > n {
        return Err(err(format!("index outside 1..={n}")));
    }
    Ok(j - 1)
}

fn pair(table: &'static str, key: &str, n: usize) -> Result<(usize, usize), LoadError> {
    let (j, k) = key.split_once(',').ok_or_else(|| LoadError::Key {
        table,
        key: key.to_string(),
        reason: "expected \"j,k\"".into(),
    })?;
    let err = |e: LoadError| match e {
        LoadError::Key { table, reason, .. } => LoadError::Key { table, key: key.to_string(), reason },
        other => other,
    };
    Ok((index(table, j, n).map_err(err)?, index(table, k, n).map_err(err)?))
}

fn expr(field: String, text: &str) -> Result<CoefficientExpr, LoadError> {
    CoefficientExpr::parse(text).map_err(|source| LoadError::Expr { field, text: text.to_string(), source })
}

fn vector(table: &'static str, raw: &BTreeMap<String, String>, n: usize) -> Result<Vec<Option<CoefficientExpr>>, LoadError> {
    let mut out = vec![None; n];
    for (key, text) in raw {
        let j = index(table, key, n)?;
        out[j] = Some(expr(format!("{table}[{}]", j + 1), text)?);
    }
    Ok(out)
}

/// `((j, k), expression)` with 0-based indices.
type Entries = Vec<((usize, usize), CoefficientExpr)>;

fn matrix(table: &'static str, raw: &BTreeMap<String, String>, n: usize) -> Result<Entries, LoadError> {
    raw.iter()
        .map(|(key, text)| {
            let (j, k) = pair(table, key, n)?;
            Ok(((j, k), expr(format!("{table}[{},{}]", j + 1, k + 1), text)?))
        })
        .collect()
}

/// Parses the text of a problem file.
pub fn parse(text: &str) -> Result<ProblemFile, LoadError> {
    let raw: Raw = toml::from_str(text)?;
    let n = raw.sizes.n;
    if raw.sizes.m == 0 || raw.sizes.m >= n {
        return Err(ModelError::InvalidSizes { n, m: raw.sizes.m }.into());
    }
    raw.numerics.check()?;
    let a = vector("a", &raw.a, n)?
        .into_iter()
        .enumerate()
        .map(|(j, e)| e.ok_or(LoadError::MissingSpeed(j + 1)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut spec = ProblemSpec::new(n, raw.sizes.m, a)?.with_eps_a(raw.numerics.eps_a);
    for ((j, k), e) in matrix("b", &raw.b, n)? {
        spec.b[j][k] = e;
    }
    for ((j, k), e) in matrix("tilde_b", &raw.tilde_b, n)? {
        if j == k {
            return Err(LoadError::Key {
                table: "tilde_b",
                key: format!("{},{}", j + 1, k + 1),
                reason: "only off-diagonal entries are factored".into(),
            });
        }
        if raw.b.keys().any(|key| pair("b", key, n).ok() == Some((j, k))) {
            return Err(LoadError::Conflict { j: j + 1, k: k + 1 });
        }
        spec.b[j][k] = &e * &(&spec.a[k] - &spec.a[j]);
        spec = spec.with_tilde_b(j, k, e);
    }
    for ((j, k), e) in matrix("r", &raw.r, n)? {
        spec.r[j][k] = e;
    }
    for (j, e) in vector("f", &raw.f, n)?.into_iter().enumerate() {
        if let Some(e) = e {
            spec.f[j] = e;
        }
    }
    let exact = match &raw.exact {
        Some(table) => Some(
            vector("exact", table, n)?
                .into_iter()
                .map(|e| e.unwrap_or_else(CoefficientExpr::zero))
                .collect(),
        ),
        None => None,
    };
    Ok(ProblemFile { spec, numerics: raw.numerics, exact, notes: raw.meta.notes })
}

pub fn load(path: &Path) -> Result<ProblemFile, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.to_path_buf(), source })?;
    parse(&text)
}

fn quoted(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

/// `[name]` followed by its `key = "expr"` lines; nothing when empty.
fn write_section(out: &mut String, name: &str, entries: Vec<(String, &CoefficientExpr)>) {
    if entries.is_empty() {
        return;
    }
    let _ = writeln!(out, "\n[{name}]");
    for (key, e) in entries {
        let _ = writeln!(out, "{key} = {}", quoted(&e.to_string()));
    }
}

fn numbered(v: &[CoefficientExpr], skip_zero: bool) -> Vec<(String, &CoefficientExpr)> {
    v.iter().enumerate().filter(|(_, e)| !(skip_zero && e.is_zero())).map(|(j, e)| ((j + 1).to_string(), e)).collect()
}

fn pairs<'a>(n: usize, entry: impl Fn(usize, usize) -> Option<&'a CoefficientExpr>) -> Vec<(String, &'a CoefficientExpr)> {
    (0..n)
        .flat_map(|j| (0..n).map(move |k| (j, k)))
        .filter_map(|(j, k)| entry(j, k).map(|e| (format!("\"{},{}\"", j + 1, k + 1), e)))
        .collect()
}

/// Renders a problem file that [`parse`] reads back to the same problem.
/// Zero coefficients are omitted; pairs with a factored coupling are written
/// to `[tilde_b]`.
pub fn render(file: &ProblemFile) -> String {
    let spec = &file.spec;
    let n = spec.n();
    let tilde = |j: usize, k: usize| spec.tilde_b.as_ref().and_then(|tb| tb[j][k].as_ref());
    let mut out = String::new();
    if let Some(notes) = &file.notes {
        let _ = writeln!(out, "[meta]\nnotes = {}\n", quoted(notes));
    }
    let _ = writeln!(out, "[sizes]\nn = {n}\nm = {}", spec.m());

    write_section(&mut out, "a", numbered(&spec.a, false));
    write_section(&mut out, "b", pairs(n, |j, k| (tilde(j, k).is_none() && !spec.b[j][k].is_zero()).then(|| &spec.b[j][k])));
    write_section(&mut out, "tilde_b", pairs(n, tilde));
    write_section(&mut out, "r", pairs(n, |j, k| (!spec.r[j][k].is_zero()).then(|| &spec.r[j][k])));
    write_section(&mut out, "f", numbered(&spec.f, true));
    if let Some(exact) = &file.exact {
        write_section(&mut out, "exact", numbered(exact, false));
    }

    let numerics = NumericsConfig { eps_a: spec.eps_a, ..file.numerics.clone() };
    let _ = writeln!(out, "\n[numerics]");
    let ints = [
        ("nx", numerics.nx),
        ("nt", numerics.nt),
        ("ode_steps", numerics.ode_steps),
        ("max_outer", numerics.max_outer),
        ("max_inner", numerics.max_inner),
        ("assembly_cap", numerics.assembly_cap),
        ("check_grid_x", numerics.check_grid_x),
        ("check_grid_t", numerics.check_grid_t),
        ("validate_samples_x", numerics.validate_samples_x),
        ("validate_samples_t", numerics.validate_samples_t),
    ];
    for (key, v) in ints {
        let _ = writeln!(out, "{key} = {v}");
    }
    // shortest round-trip form, which is valid TOML for finite values
    for (key, v) in [("tol", numerics.tol), ("kernel_threshold", numerics.kernel_threshold), ("eps_a", numerics.eps_a)] {
        let _ = writeln!(out, "{key} = {v:?}");
    }
    out
}

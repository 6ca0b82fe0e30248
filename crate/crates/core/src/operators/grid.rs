use std::io::{self, Read, Write};
use std::ops::Range;

use thiserror::Error;

use crate::model::PERIOD;

pub const BINARY_MAGIC: &[u8; 4] = b"PGF1";

/// Smallest admissible number of time nodes (the boundary stencil is cubic).
pub const MIN_NT: usize = 4;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("not a grid dump (bad magic)")]
    BadMagic,
    #[error("invalid grid header n_comp = {n_comp}, nx = {nx}, nt = {nt}")]
    BadHeader { n_comp: usize, nx: usize, nt: usize },
}

/// Vector-valued function on the uniform grid `x_i = i/nx` (`i = 0..=nx`),
/// `t_l = 2π l/nt` (`l = 0..nt`), periodic in `t`.
///
/// Values are stored component-major, then by `x`, then by `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicGridFunction {
    n_comp: usize,
    nx: usize,
    nt: usize,
    values: Vec<f64>,
}

// Snap coordinates that are within rounding of a node onto it, so node
// queries return stored values exactly.
fn snap(s: f64) -> f64 {
    let r = s.round();
    if (s - r).abs() < 1e-9 {
        r
    } else {
        s
    }
}

/// Corner indices `(i, l)` and weights of bilinear interpolation at `(x, t)`.
pub fn bilinear_stencil(nx: usize, nt: usize, x: f64, t: f64) -> [(usize, usize, f64); 4] {
    let sx = snap(x.clamp(0.0, 1.0) * nx as f64);
    let i0 = (sx.floor() as usize).min(nx - 1);
    let fx = sx - i0 as f64;
    let st = snap(t / PERIOD * nt as f64);
    let fl = st.floor();
    let ft = st - fl;
    let l0 = (fl as i64).rem_euclid(nt as i64) as usize;
    let l1 = (l0 + 1) % nt;
    [
        (i0, l0, (1.0 - fx) * (1.0 - ft)),
        (i0, l1, (1.0 - fx) * ft),
        (i0 + 1, l0, fx * (1.0 - ft)),
        (i0 + 1, l1, fx * ft),
    ]
}

/// Time indices and weights of periodic four-point (cubic Lagrange)
/// interpolation at `t`.
pub fn cubic_stencil(nt: usize, t: f64) -> [(usize, f64); 4] {
    let st = snap(t / PERIOD * nt as f64);
    let fl = st.floor();
    let s = st - fl;
    let l0 = (fl as i64).rem_euclid(nt as i64) as usize;
    let at = |off: i64| ((l0 as i64 + off).rem_euclid(nt as i64)) as usize;
    [
        (at(-1), -s * (s - 1.0) * (s - 2.0) / 6.0),
        (l0, (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0),
        (at(1), -(s + 1.0) * s * (s - 2.0) / 2.0),
        (at(2), (s + 1.0) * s * (s - 1.0) / 6.0),
    ]
}

impl PeriodicGridFunction {
    pub fn zeros(n_comp: usize, nx: usize, nt: usize) -> Self {
        assert!(n_comp >= 1 && nx >= 1 && nt >= MIN_NT, "invalid grid {n_comp}x{nx}x{nt}");
        PeriodicGridFunction { n_comp, nx, nt, values: vec![0.0; n_comp * (nx + 1) * nt] }
    }

    pub fn from_fn(n_comp: usize, nx: usize, nt: usize, mut f: impl FnMut(usize, f64, f64) -> f64) -> Self {
        let mut g = Self::zeros(n_comp, nx, nt);
        for c in 0..n_comp {
            for i in 0..=nx {
                for l in 0..nt {
                    let v = f(c, g.x_node(i), g.t_node(l));
                    g.set(c, i, l, v);
                }
            }
        }
        g
    }

    pub fn try_from_fn<E>(
        n_comp: usize,
        nx: usize,
        nt: usize,
        mut f: impl FnMut(usize, f64, f64) -> Result<f64, E>,
    ) -> Result<Self, E> {
        let mut g = Self::zeros(n_comp, nx, nt);
        for c in 0..n_comp {
            for i in 0..=nx {
                for l in 0..nt {
                    let v = f(c, g.x_node(i), g.t_node(l))?;
                    g.set(c, i, l, v);
                }
            }
        }
        Ok(g)
    }

    pub fn from_values(n_comp: usize, nx: usize, nt: usize, values: Vec<f64>) -> Self {
        let g = Self::zeros(n_comp, nx, nt);
        assert_eq!(values.len(), g.values.len(), "value count does not match grid");
        PeriodicGridFunction { values, ..g }
    }

    /// Same grid, different number of components, all zero.
    pub fn zeros_like(&self, n_comp: usize) -> Self {
        Self::zeros(n_comp, self.nx, self.nt)
    }

    pub fn n_comp(&self) -> usize {
        self.n_comp
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x_node(&self, i: usize) -> f64 {
        i as f64 / self.nx as f64
    }

    pub fn t_node(&self, l: usize) -> f64 {
        PERIOD * l as f64 / self.nt as f64
    }

    #[inline]
    pub fn index(&self, c: usize, i: usize, l: usize) -> usize {
        (c * (self.nx + 1) + i) * self.nt + l
    }

    /// Inverse of [`index`](Self::index).
    pub fn node_of(&self, idx: usize) -> (usize, usize, usize) {
        let l = idx % self.nt;
        let rest = idx / self.nt;
        (rest / (self.nx + 1), rest % (self.nx + 1), l)
    }

    #[inline]
    pub fn get(&self, c: usize, i: usize, l: usize) -> f64 {
        self.values[self.index(c, i, l)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, i: usize, l: usize, v: f64) {
        let k = self.index(c, i, l);
        self.values[k] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.n_comp == other.n_comp && self.nx == other.nx && self.nt == other.nt
    }

    /// Bilinear interpolation of component `c`; `t` is taken modulo 2π and
    /// `x` is clamped to `[0, 1]`.
    pub fn interp(&self, c: usize, x: f64, t: f64) -> f64 {
        bilinear_stencil(self.nx, self.nt, x, t).iter().map(|&(i, l, w)| w * self.get(c, i, l)).sum()
    }

    /// Periodic cubic interpolation in `t` along the grid line `x = x_i`.
    pub fn interp_line(&self, c: usize, i: usize, t: f64) -> f64 {
        cubic_stencil(self.nt, t).iter().map(|&(l, w)| w * self.get(c, i, l)).sum()
    }

    /// `max |u_c(x_i, t_l)|` over all stored entries.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// The components in `range`, renumbered from zero.
    pub fn components(&self, range: Range<usize>) -> Self {
        let block = (self.nx + 1) * self.nt;
        let values = self.values[range.start * block..range.end * block].to_vec();
        Self::from_values(range.len(), self.nx, self.nt, values)
    }

    /// Concatenates the components of `first` and `second`.
    pub fn stack(first: &Self, second: &Self) -> Self {
        assert!(first.nx == second.nx && first.nt == second.nt, "grid mismatch");
        let mut values = first.values.clone();
        values.extend_from_slice(&second.values);
        Self::from_values(first.n_comp + second.n_comp, first.nx, first.nt, values)
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        assert!(self.same_shape(other), "grid mismatch");
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// `max |self - other|`.
    pub fn distance(&self, other: &Self) -> f64 {
        assert!(self.same_shape(other), "grid mismatch");
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// CSV with header `component,x,t,value`; components are 1-based.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "component,x,t,value")?;
        for c in 0..self.n_comp {
            for i in 0..=self.nx {
                for l in 0..self.nt {
                    writeln!(w, "{},{:?},{:?},{:?}", c + 1, self.x_node(i), self.t_node(l), self.get(c, i, l))?;
                }
            }
        }
        Ok(())
    }

    /// `PGF1` magic, then `n_comp`, `nx`, `nt` as little-endian `u32`, then
    /// the values as little-endian `f64` in storage order.
    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(BINARY_MAGIC)?;
        for v in [self.n_comp, self.nx, self.nt] {
            w.write_all(&(v as u32).to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self, GridError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(GridError::BadMagic);
        }
        let mut word = [0u8; 4];
        let mut header = [0usize; 3];
        for h in &mut header {
            r.read_exact(&mut word)?;
            *h = u32::from_le_bytes(word) as usize;
        }
        let [n_comp, nx, nt] = header;
        if n_comp == 0 || nx == 0 || nt < MIN_NT {
            return Err(GridError::BadHeader { n_comp, nx, nt });
        }
        let mut values = vec![0.0; n_comp * (nx + 1) * nt];
        let mut buf = [0u8; 8];
        for v in &mut values {
            r.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        Ok(Self::from_values(n_comp, nx, nt, values))
    }
}

/// `max |g|` over all stored entries.
pub fn sup_norm(g: &PeriodicGridFunction) -> f64 {
    g.sup_norm()
}

//! The boundary operator `C = (K, L)`, the coupling operator `D` and the
//! source operator `F` of the integral formulation, acting on periodic grid
//! functions.
//!
//! Two routes evaluate them. The free functions in this module work
//! matrix-free: every output node traces its characteristic and samples the
//! input by interpolation. [`Discretization`] traces each node once and keeps
//! the resulting sparse stencils, which is what the solvers use.

mod discretization;
mod grid;
mod pointwise;

pub use discretization::{Discretization, SparseRows};
pub use grid::{bilinear_stencil, cubic_stencil, sup_norm, GridError, PeriodicGridFunction, BINARY_MAGIC, MIN_NT};
pub use pointwise::{apply_c, apply_d, apply_f, apply_k, apply_l, NodeValues};
pub(crate) use pointwise::system_defect;

use crate::characteristics::CharacteristicTrace;

/// Trace nodes of the integral from `x_j` to `x`, its Simpson step, and the
/// orientation sign: `∫_{x_j}^x g = sign · Σ w_q g(ξ_q)`.
pub(crate) struct Segment {
    pub first: usize,
    pub last: usize,
    pub h: f64,
    pub sign: f64,
}

impl Segment {
    pub fn new(tr: &CharacteristicTrace, left: bool) -> Segment {
        if left {
            Segment { first: 0, last: tr.anchor_index(), h: tr.h_left(), sign: 1.0 }
        } else {
            Segment { first: tr.anchor_index(), last: tr.last_index(), h: tr.h_right(), sign: -1.0 }
        }
    }

    /// Composite Simpson weight of node `q` (an even number of intervals is
    /// guaranteed by the trace layout).
    pub fn weight(&self, q: usize) -> f64 {
        let k = q - self.first;
        let n = self.last - self.first;
        let w = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        w * self.h / 3.0
    }

    pub fn nodes(&self) -> std::ops::RangeInclusive<usize> {
        if self.last > self.first {
            self.first..=self.last
        } else {
            // empty integral
            #[allow(clippy::reversed_empty_ranges)]
            {
                1..=0
            }
        }
    }
}

/// `d_j(ξ_q, x, t)` at trace node `q`.
#[inline]
pub(crate) fn d_weight(tr: &CharacteristicTrace, q: usize) -> f64 {
    tr.log_c_values()[q].exp() * tr.slopes()[q]
}

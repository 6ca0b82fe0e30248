//! Time-periodic solutions of one-dimensional first-order hyperbolic systems
//! with reflection boundary conditions, computed through the integral
//! formulation along characteristics.

// Index loops mirror the matrix notation; `!(a <= b)` comparisons are
// deliberate so that NaN takes the failing branch.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod characteristics;
pub mod dissipativity;
pub mod expr;
pub mod model;
pub mod operators;
pub mod solver;
pub mod cases;
pub mod cli;

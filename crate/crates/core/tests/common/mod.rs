#![allow(dead_code)]

use charperiodic::expr::CoefficientExpr;
use charperiodic::operators::PeriodicGridFunction;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn p(s: &str) -> CoefficientExpr {
    CoefficientExpr::parse(s).unwrap_or_else(|e| panic!("{s}: {e}"))
}

pub fn c(v: f64) -> CoefficientExpr {
    CoefficientExpr::constant(v)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_grid(rng: &mut ChaCha8Rng, n_comp: usize, nx: usize, nt: usize) -> PeriodicGridFunction {
    PeriodicGridFunction::from_fn(n_comp, nx, nt, |_, _, _| rng.random_range(-1.0..1.0))
}

pub fn sample(exprs: &[CoefficientExpr], nx: usize, nt: usize) -> PeriodicGridFunction {
    PeriodicGridFunction::from_fn(exprs.len(), nx, nt, |j, x, t| exprs[j].evaluate(x, t).unwrap())
}

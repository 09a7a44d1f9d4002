//! Numerical kernels used by the designs.

mod beta;
mod isotonic;
mod rng;

pub use beta::{beta_cdf, posterior_update, BetaParams};
pub use isotonic::{is_monotone, isotonic_2d, lower_sets, pava};
pub use rng::{choose, Dist, RngStream};

use crate::error::{invalid, Result};

/// `(x_1 * ... * x_N)^(1/N)`; zero if any element is zero.
pub fn geometric_mean(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(invalid("geometric mean of an empty list"));
    }
    if xs.iter().any(|x| !(*x >= 0.0)) {
        return Err(invalid("geometric mean needs non-negative inputs"));
    }
    if xs.contains(&0.0) {
        return Ok(0.0);
    }
    Ok((xs.iter().map(|x| x.ln()).sum::<f64>() / xs.len() as f64).exp())
}

/// Indices of the minima of `score`, treating values within `tol` as tied.
pub(crate) fn argmin_ties<T: Copy>(items: &[T], score: impl Fn(T) -> f64, tol: f64) -> Vec<T> {
    let best = items.iter().map(|&c| score(c)).fold(f64::INFINITY, f64::min);
    items
        .iter()
        .copied()
        .filter(|&c| score(c) <= best + tol)
        .collect()
}

pub(crate) fn argmax_ties<T: Copy>(items: &[T], score: impl Fn(T) -> f64, tol: f64) -> Vec<T> {
    argmin_ties(items, |c| -score(c), tol)
}

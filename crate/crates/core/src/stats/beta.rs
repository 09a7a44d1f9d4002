use serde::{Deserialize, Serialize};
use statrs::function::beta::checked_beta_reg;

use crate::error::{invalid, Result};

/// Beta(a, b) shape parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub a: f64,
    pub b: f64,
}

impl BetaParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(invalid(format!("Beta shapes must be positive, got ({a}, {b})")));
        }
        Ok(Self { a, b })
    }

    pub const UNIFORM: BetaParams = BetaParams { a: 1.0, b: 1.0 };

    /// Beta with the given mean and effective sample size `a + b`.
    pub fn from_mean_ess(mean: f64, ess: f64) -> Result<Self> {
        if !(mean > 0.0 && mean < 1.0) {
            return Err(invalid(format!("prior mean {mean} must lie in (0,1)")));
        }
        Self::new(mean * ess, (1.0 - mean) * ess)
    }

    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }

    pub fn variance(&self) -> f64 {
        let s = self.a + self.b;
        self.a * self.b / (s * s * (s + 1.0))
    }

    pub fn ess(&self) -> f64 {
        self.a + self.b
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        beta_cdf(x, *self)
    }

    /// P(lo < X < hi).
    pub fn prob_between(&self, lo: f64, hi: f64) -> Result<f64> {
        Ok((self.cdf(hi)? - self.cdf(lo)?).max(0.0))
    }

    /// P(X > x).
    pub fn sf(&self, x: f64) -> Result<f64> {
        Ok(1.0 - self.cdf(x)?)
    }
}

/// Regularized incomplete beta function I_x(a, b).
pub fn beta_cdf(x: f64, p: BetaParams) -> Result<f64> {
    if !x.is_finite() || !(0.0..=1.0).contains(&x) {
        return Err(invalid(format!("beta_cdf argument {x} outside [0,1]")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    checked_beta_reg(p.a, p.b, x)
        .map(|v| v.clamp(0.0, 1.0))
        .map_err(|e| invalid(e.to_string()))
}

/// Conjugate update of a Beta prior with `y` events in `n` binomial trials.
pub fn posterior_update(prior: BetaParams, n: u32, y: u32) -> Result<BetaParams> {
    if y > n {
        return Err(invalid(format!("{y} events exceed {n} trials")));
    }
    Ok(BetaParams {
        a: prior.a + y as f64,
        b: prior.b + (n - y) as f64,
    })
}

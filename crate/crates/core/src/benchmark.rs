//! Complete-information benchmark: every simulated patient's latent
//! tolerance is observed at every combination, giving an upper reference for
//! what any design could select with the same sample size.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{Combo, Matrix};
use crate::scenario::Scenario;
use crate::sim::{SelectionSummary, SimSettings};
use crate::stats::{argmin_ties, choose, isotonic_2d, pava, RngStream};
use crate::trial::TrialConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkMode {
    /// Two-dimensional isotonic projection of the pooled estimates.
    #[default]
    Isotonic,
    /// Average of one-dimensional fits along the row-major and column-major
    /// orderings of the grid.
    OrderingAverage,
}

/// DLT indicator of each patient at each combination: patient `k` with
/// latent uniform `u_k` has a DLT at `(i,j)` iff `u_k < pi_ij`.
pub fn profile_indicators(truth: &Matrix<f64>, uniforms: &[f64]) -> Vec<Matrix<bool>> {
    uniforms.iter().map(|&u| truth.map(|&p| u < p)).collect()
}

/// Pooled complete-information estimate for one replicate.
pub fn pooled_estimate(truth: &Matrix<f64>, uniforms: &[f64]) -> Matrix<f64> {
    let n = uniforms.len() as f64;
    truth.map(|&p| uniforms.iter().filter(|&&u| u < p).count() as f64 / n)
}

fn ordering_average(est: &Matrix<f64>) -> Matrix<f64> {
    let w = vec![1.0; est.as_slice().len()];
    let by_rows = pava(est.as_slice(), &w);
    let t = est.transpose();
    let by_cols_t = pava(t.as_slice(), &w);
    let mut by_cols = Matrix::filled(t.rows(), t.cols(), 0.0);
    by_cols.as_mut_slice().copy_from_slice(&by_cols_t);
    let by_cols = by_cols.transpose();
    let mut out = est.clone();
    for (k, v) in out.as_mut_slice().iter_mut().enumerate() {
        *v = 0.5 * (by_rows[k] + by_cols.as_slice()[k]);
    }
    out
}

pub fn fit(est: &Matrix<f64>, mode: BenchmarkMode) -> Result<Matrix<f64>> {
    match mode {
        BenchmarkMode::Isotonic => isotonic_2d(est, &est.map(|_| 1.0)),
        BenchmarkMode::OrderingAverage => Ok(ordering_average(est)),
    }
}

pub fn benchmark_replicate(
    scenario: &Scenario,
    cfg: &TrialConfig,
    mode: BenchmarkMode,
    master_seed: u64,
    replicate: u64,
) -> Result<Combo> {
    let mut rng = RngStream::new(master_seed, replicate);
    let uniforms: Vec<f64> = (0..cfg.max_n).map(|_| rng.uniform()).collect();
    let fitted = fit(&pooled_estimate(&scenario.truth, &uniforms), mode)?;
    let combos: Vec<Combo> = fitted.iter().map(|(c, _)| c).collect();
    let best = argmin_ties(&combos, |c| (fitted[c] - cfg.target).abs(), 1e-12);
    Ok(choose(&mut rng, &best).expect("non-empty grid"))
}

pub fn benchmark(
    scenario: &Scenario,
    cfg: &TrialConfig,
    mode: BenchmarkMode,
    sim: SimSettings,
) -> Result<SelectionSummary> {
    if sim.nsim == 0 {
        return Err(invalid("nsim must be at least 1"));
    }
    scenario.validate()?;
    let picks: Vec<Option<Combo>> = (0..sim.nsim as u64)
        .into_par_iter()
        .map(|r| benchmark_replicate(scenario, cfg, mode, sim.master_seed, r).map(Some))
        .collect::<Result<_>>()?;
    SelectionSummary::from_selections(&picks, scenario, cfg)
}

//! Surface-free design: the non-toxicity probability of `(i, j)` is the
//! product of a base probability and one ratio per escalation step in each
//! drug, so monotonicity holds by construction without a parametric surface.

use serde::{Deserialize, Serialize};

use super::{check_epsilon, drop_below, rule_disabled, Design, McmcConfig, PosteriorSummary};
use crate::error::{invalid, Result};
use crate::grid::{admissible_set, AdmissibilityMode, Combo, DoseGrid, Matrix};
use crate::stats::{argmin_ties, choose, BetaParams, RngStream};
use crate::trial::{DesignDecision, TrialConfig, TrialState};

const TIE_TOL: f64 = 1e-12;
const RHAT_WARN: f64 = 1.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SfdConfig {
    /// Prior mean of every ratio.
    pub m: f64,
    /// Prior sample size of every ratio.
    pub s: f64,
    pub epsilon: f64,
    pub mcmc: McmcConfig,
}

impl Default for SfdConfig {
    fn default() -> Self {
        Self {
            m: 0.875,
            s: 4.0,
            epsilon: 0.65,
            mcmc: McmcConfig {
                burn_in: 2000,
                iterations: 8000,
            },
        }
    }
}

/// `pi_ij = 1 - theta * prod(row_ratios[..i-1]) * prod(col_ratios[..j-1])`.
pub fn surface_from_ratios(theta: f64, row_ratios: &[f64], col_ratios: &[f64]) -> Matrix<f64> {
    let rows = row_ratios.len() + 1;
    let cols = col_ratios.len() + 1;
    let mut m = Matrix::filled(rows, cols, 0.0);
    let mut a = theta;
    for r in 0..rows {
        if r > 0 {
            a *= row_ratios[r - 1];
        }
        let mut v = a;
        for c in 0..cols {
            if c > 0 {
                v *= col_ratios[c - 1];
            }
            *m.at_mut(r, c) = 1.0 - v;
        }
    }
    m
}

#[derive(Debug, Clone)]
pub struct SfdPosterior {
    pub mean: Matrix<f64>,
    /// P(pi_ij > target).
    pub exceedance: Matrix<f64>,
    /// Largest split-chain potential scale reduction across combinations.
    pub rhat: f64,
}

impl SfdPosterior {
    pub fn converged(&self) -> bool {
        self.rhat <= RHAT_WARN
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// A tested cell: `log(1 - pi)` is the sum of the log base probability and
/// the log ratios along the path from `(1,1)`.
struct Cell {
    r: usize,
    c: usize,
    safe: f64,
    dlt: f64,
    log_safe: f64,
    q: f64,
    ll: f64,
}

impl Cell {
    /// Log-likelihood at non-toxicity probability `q = exp(log_safe)`.
    fn ll_at(&self, log_safe: f64, q: f64) -> f64 {
        let mut ll = self.safe * log_safe;
        if self.dlt > 0.0 {
            let pi = if q > 0.9999 { -log_safe.exp_m1() } else { 1.0 - q };
            ll += self.dlt * pi.ln();
        }
        ll
    }
}

/// Running split-chain moments for one cell.
#[derive(Clone, Copy, Default)]
struct Halves {
    sum: [f64; 2],
    sumsq: [f64; 2],
}

fn split_rhat(h: &Halves, len: usize) -> f64 {
    if len < 2 {
        return f64::NAN;
    }
    let n = len as f64;
    let means = [h.sum[0] / n, h.sum[1] / n];
    let var = |k: usize| ((h.sumsq[k] - n * means[k] * means[k]) / (n - 1.0)).max(0.0);
    let w = (var(0) + var(1)) / 2.0;
    let grand = (means[0] + means[1]) / 2.0;
    let b = n * ((means[0] - grand).powi(2) + (means[1] - grand).powi(2));
    if w <= 1e-300 {
        return if b <= 1e-300 { 1.0 } else { f64::INFINITY };
    }
    let v = (n - 1.0) / n * w + b / n;
    (v / w).sqrt()
}

/// Componentwise random-walk Metropolis on the logit of every ratio, with
/// step sizes tuned during burn-in. Parameter 0 is the base probability,
/// then the row ratios, then the column ratios.
pub fn sfd_posterior(
    n: &Matrix<u32>,
    y: &Matrix<u32>,
    prior: BetaParams,
    target: f64,
    mcmc: &McmcConfig,
    rng: &mut RngStream,
) -> Result<SfdPosterior> {
    mcmc.validate()?;
    let (rows, cols) = (n.rows(), n.cols());
    let d = rows + cols - 1;
    let x0 = (prior.mean() / (1.0 - prior.mean())).ln();
    let mut x = vec![x0; d];
    let mut lr: Vec<f64> = x.iter().map(|&v| -softplus(-v)).collect();
    let mut ratio: Vec<f64> = x.iter().map(|&v| 1.0 / (1.0 + (-v).exp())).collect();
    let log_prior = |x: f64, lr: f64| prior.a * lr + prior.b * (lr - x);
    let mut lp: Vec<f64> = x.iter().zip(&lr).map(|(&x, &l)| log_prior(x, l)).collect();

    let mut cells: Vec<Cell> = Vec::new();
    for (combo, &nn) in n.iter() {
        if nn == 0 {
            continue;
        }
        let (r, c) = (combo.i - 1, combo.j - 1);
        let yy = y[combo];
        let log_safe = lr[0] + lr[1..=r].iter().sum::<f64>() + lr[rows..rows + c].iter().sum::<f64>();
        let mut cell = Cell {
            r,
            c,
            safe: (nn - yy) as f64,
            dlt: yy as f64,
            log_safe,
            q: log_safe.exp(),
            ll: 0.0,
        };
        cell.ll = cell.ll_at(log_safe, cell.q);
        cells.push(cell);
    }
    // Cells whose path runs through each parameter.
    let touches: Vec<Vec<usize>> = (0..d)
        .map(|k| {
            (0..cells.len())
                .filter(|&i| {
                    let cell = &cells[i];
                    k == 0 || (k < rows && cell.r >= k) || (k >= rows && cell.c >= k - rows + 1)
                })
                .collect()
        })
        .collect();

    let mut step = vec![1.0; d];
    let mut accepted = vec![0usize; d];
    let cut = 1.0 - target;
    let ncell = rows * cols;
    let mut mean = vec![0.0; ncell];
    let mut exceed = vec![0.0; ncell];
    let mut halves = vec![Halves::default(); ncell];
    let half = mcmc.iterations / 2;
    let mut new_ll = Vec::with_capacity(cells.len());
    let mut row_safe = vec![0.0; rows];

    for it in 0..mcmc.burn_in + mcmc.iterations {
        for k in 0..d {
            let prop = x[k] + step[k] * rng.normal01();
            let e = (-prop).exp();
            let r_new = 1.0 / (1.0 + e);
            let lr_new = -e.ln_1p();
            let delta = lr_new - lr[k];
            let scale = r_new / ratio[k];
            new_ll.clear();
            let mut dll = 0.0;
            for &i in &touches[k] {
                let cell = &cells[i];
                let v = cell.ll_at(cell.log_safe + delta, cell.q * scale);
                dll += v - cell.ll;
                new_ll.push(v);
            }
            let lp_new = log_prior(prop, lr_new);
            let log_ratio = dll + lp_new - lp[k];
            if log_ratio >= 0.0 || -rng.exp1() < log_ratio {
                x[k] = prop;
                lr[k] = lr_new;
                ratio[k] = r_new;
                lp[k] = lp_new;
                for (&i, &v) in touches[k].iter().zip(&new_ll) {
                    let cell = &mut cells[i];
                    cell.log_safe += delta;
                    cell.q *= scale;
                    cell.ll = v;
                }
                accepted[k] += 1;
            }
        }
        if it < mcmc.burn_in {
            if (it + 1) % 50 == 0 {
                for k in 0..d {
                    let rate = accepted[k] as f64 / 50.0;
                    step[k] *= if rate > 0.44 { 1.25 } else { 0.8 };
                    accepted[k] = 0;
                }
            }
            continue;
        }
        let t = it - mcmc.burn_in;
        let slot = if t < half { 0 } else if t < 2 * half { 1 } else { 2 };
        let mut acc = ratio[0];
        for r in 0..rows {
            if r > 0 {
                acc *= ratio[r];
            }
            row_safe[r] = acc;
        }
        for (r, &rs) in row_safe.iter().enumerate() {
            let mut q = rs;
            for c in 0..cols {
                if c > 0 {
                    q *= ratio[rows + c - 1];
                }
                let idx = r * cols + c;
                let pi = 1.0 - q;
                mean[idx] += pi;
                if q < cut {
                    exceed[idx] += 1.0;
                }
                if slot < 2 {
                    halves[idx].sum[slot] += pi;
                    halves[idx].sumsq[slot] += pi * pi;
                }
            }
        }
    }
    let total = mcmc.iterations as f64;
    let mut m = Matrix::filled(rows, cols, 0.0);
    let mut e = m.clone();
    for idx in 0..ncell {
        m.as_mut_slice()[idx] = mean[idx] / total;
        e.as_mut_slice()[idx] = exceed[idx] / total;
    }
    let rhat = halves
        .iter()
        .map(|h| split_rhat(h, half))
        .filter(|r| r.is_finite())
        .fold(1.0, f64::max);
    Ok(SfdPosterior {
        mean: m,
        exceedance: e,
        rhat,
    })
}

#[derive(Debug, Clone)]
pub struct Sfd {
    pub prior: BetaParams,
    pub epsilon: f64,
    pub mcmc: McmcConfig,
}

impl Sfd {
    pub fn new(cfg: &SfdConfig, _grid: &DoseGrid) -> Result<Self> {
        check_epsilon(cfg.epsilon)?;
        if !(cfg.m > 0.0 && cfg.m < 1.0 && cfg.s > 0.0) {
            return Err(invalid("SFD ratio prior needs 0 < m < 1 and s > 0"));
        }
        cfg.mcmc.validate()?;
        Ok(Self {
            prior: BetaParams::from_mean_ess(cfg.m, cfg.s)?,
            epsilon: cfg.epsilon,
            mcmc: cfg.mcmc,
        })
    }

    pub fn posterior(
        &self,
        state: &TrialState,
        target: f64,
        rng: &mut RngStream,
    ) -> Result<SfdPosterior> {
        sfd_posterior(&state.n, &state.y, self.prior, target, &self.mcmc, rng)
    }

    fn barred(&self, post: &SfdPosterior) -> Matrix<bool> {
        if rule_disabled(self.epsilon) {
            post.exceedance.map(|_| false)
        } else {
            post.exceedance.map(|&p| p >= self.epsilon)
        }
    }
}

impl Design for Sfd {
    fn id(&self) -> &'static str {
        "sfd"
    }

    fn admissibility(&self) -> AdmissibilityMode {
        AdmissibilityMode::Extended
    }

    fn decide(
        &self,
        state: &mut TrialState,
        cfg: &TrialConfig,
        rng: &mut RngStream,
    ) -> Result<DesignDecision> {
        let post = self.posterior(state, cfg.target, rng)?;
        let barred = self.barred(&post);
        if barred[Combo::new(1, 1)] {
            state.terminated = true;
            return Ok(DesignDecision::TerminateForSafety);
        }
        let candidates = admissible_set(state.current, &state.grid, self.admissibility(), &barred);
        if candidates.is_empty() {
            return Ok(DesignDecision::Continue(drop_below(state, &barred, rng)));
        }
        let best = argmin_ties(&candidates, |c| (post.mean[c] - cfg.target).abs(), TIE_TOL);
        Ok(DesignDecision::Continue(choose(rng, &best).expect("non-empty")))
    }

    fn select_mtc(
        &self,
        state: &TrialState,
        cfg: &TrialConfig,
        rng: &mut RngStream,
    ) -> Result<Option<Combo>> {
        if state.terminated {
            return Ok(None);
        }
        let post = self.posterior(state, cfg.target, rng)?;
        let barred = self.barred(&post);
        let open: Vec<Combo> = state.grid.combos().filter(|c| !barred[*c]).collect();
        let best = argmin_ties(&open, |c| (post.mean[c] - cfg.target).abs(), TIE_TOL);
        Ok(choose(rng, &best))
    }

    fn summary(
        &self,
        state: &TrialState,
        cfg: &TrialConfig,
        rng: &mut RngStream,
    ) -> Result<PosteriorSummary> {
        let post = self.posterior(state, cfg.target, rng)?;
        Ok(PosteriorSummary {
            mean: post.mean,
            exceedance: post.exceedance,
        })
    }
}

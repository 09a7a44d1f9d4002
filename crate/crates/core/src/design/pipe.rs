//! PIPE: posterior over monotone partitions of the grid into safe and toxic
//! regions, built from independent Beta posteriors per combination.

use serde::{Deserialize, Serialize};

use super::{check_epsilon, drop_below, rule_disabled, Design, PosteriorSummary};
use crate::error::{invalid, Error, Result};
use crate::grid::{admissible_set, AdmissibilityMode, Combo, DoseGrid, Matrix};
use crate::stats::{argmax_ties, argmin_ties, choose, lower_sets, BetaParams, RngStream};
use crate::trial::{DesignDecision, TrialConfig, TrialState};

/// Contour enumeration is exponential in the grid size.
pub const MAX_CONTOUR_DIM: usize = 20;

const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipeConfig {
    /// Prior mean on the lowest anti-diagonal.
    pub rho: f64,
    /// Prior mean increment per anti-diagonal.
    pub delta: f64,
    /// Prior sample size per combination.
    pub prior_ss: f64,
    pub epsilon: f64,
    /// Whether `rho` and `delta` place prior medians or prior means.
    pub prior_location: PriorLocation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorLocation {
    Mean,
    #[default]
    Median,
}

impl Default for PipeConfig {
    fn default() -> Self {
        Self {
            rho: 0.05,
            delta: 0.025,
            prior_ss: 1.0 / 18.0,
            epsilon: 0.50,
            prior_location: PriorLocation::Median,
        }
    }
}

/// Beta prior with total sample size `ess` whose median is `median`.
pub fn beta_from_median_ess(median: f64, ess: f64) -> Result<BetaParams> {
    if !(median > 0.0 && median < 1.0 && ess > 0.0) {
        return Err(invalid("prior median must lie in (0,1) with a positive sample size"));
    }
    // The cdf at the median falls as `a` grows with `a + b` held fixed.
    let (mut lo, mut hi) = (0.0, ess);
    for _ in 0..200 {
        let a = 0.5 * (lo + hi);
        if BetaParams::new(a, ess - a)?.cdf(median)? > 0.5 {
            lo = a;
        } else {
            hi = a;
        }
        if hi - lo < 1e-15 * ess {
            break;
        }
    }
    let a = 0.5 * (lo + hi);
    BetaParams::new(a, ess - a)
}

/// Every monotone partition of a `rows x cols` grid. Entry `true` marks the
/// toxic side; the toxic side is closed upwards in both drugs.
pub fn enumerate_contours(rows: usize, cols: usize) -> Result<Vec<Matrix<bool>>> {
    if rows == 0 || cols == 0 {
        return Err(invalid("empty grid"));
    }
    if rows + cols > MAX_CONTOUR_DIM {
        return Err(Error::GridTooLarge(rows, cols));
    }
    // The safe side of a contour is a lower set of the lattice.
    let out = lower_sets(rows, cols)
        .into_iter()
        .map(|counts| {
            let mut m = Matrix::filled(rows, cols, true);
            for (r, &t) in counts.iter().enumerate() {
                for c in 0..t {
                    *m.at_mut(r, c) = false;
                }
            }
            m
        })
        .collect();
    Ok(out)
}

/// Safe-side cells with no safe cell above them in either drug.
pub fn maximal_safe(contour: &Matrix<bool>) -> Vec<Combo> {
    contour
        .iter()
        .filter(|(c, &toxic)| {
            !toxic
                && [c.offset(1, 0), c.offset(0, 1)]
                    .iter()
                    .flatten()
                    .all(|u| !contour.contains(*u) || contour[*u])
        })
        .map(|(c, _)| c)
        .collect()
}

/// Tested safe-side cells with no tested safe cell above them.
pub fn recommended(contour: &Matrix<bool>, n: &Matrix<u32>) -> Vec<Combo> {
    let pool: Vec<Combo> = contour
        .iter()
        .filter(|(c, &toxic)| !toxic && n[*c] > 0)
        .map(|(c, _)| c)
        .collect();
    pool.iter()
        .copied()
        .filter(|c| !pool.iter().any(|o| o != c && o.dominates(c)))
        .collect()
}

/// Cells next to the contour: safe cells with a toxic neighbour one level up
/// in either drug, toxic cells with a safe neighbour one level down. When a
/// side is empty the contour runs along the grid edge, so the top corner
/// (all safe) or the bottom corner (all toxic) is the neighbour.
pub fn contour_neighbours(contour: &Matrix<bool>) -> Vec<Combo> {
    let top = Combo::new(contour.rows(), contour.cols());
    let bottom = Combo::new(1, 1);
    contour
        .iter()
        .filter(|(c, &toxic)| {
            let (di, dj, corner) = if toxic { (-1, 0, bottom) } else { (1, 0, top) };
            *c == corner
                || [c.offset(di, dj), c.offset(dj, di)]
                    .iter()
                    .flatten()
                    .any(|n| contour.contains(*n) && contour[*n] != toxic)
        })
        .map(|(c, _)| c)
        .collect()
}

/// Toxic-side cells with no toxic cell below them in either drug.
pub fn minimal_toxic(contour: &Matrix<bool>) -> Vec<Combo> {
    contour
        .iter()
        .filter(|(c, &toxic)| {
            toxic
                && [c.offset(-1, 0), c.offset(0, -1)]
                    .iter()
                    .flatten()
                    .all(|d| !contour[*d])
        })
        .map(|(c, _)| c)
        .collect()
}

#[derive(Debug, Clone)]
pub struct ContourPosterior {
    pub contours: Vec<Matrix<bool>>,
    pub probs: Vec<f64>,
    /// Per-combination posterior P(pi <= target).
    pub safe_prob: Matrix<f64>,
    /// Posterior probability that each combination lies on the toxic side.
    pub q: Matrix<f64>,
    pub mean: Matrix<f64>,
}

impl ContourPosterior {
    /// Most probable contours; ties within rounding go to the one with the
    /// larger safe side.
    pub fn modal_candidates(&self) -> Vec<usize> {
        let idx: Vec<usize> = (0..self.contours.len()).collect();
        let top = argmax_ties(&idx, |k| self.probs[k], TIE_TOL);
        let safe = |k: usize| self.contours[k].as_slice().iter().filter(|t| !**t).count() as f64;
        argmax_ties(&top, safe, 0.5)
    }
}

pub fn contour_posterior(
    posteriors: &Matrix<BetaParams>,
    target: f64,
) -> Result<ContourPosterior> {
    let contours = enumerate_contours(posteriors.rows(), posteriors.cols())?;
    let mut safe_prob = posteriors.map(|_| 0.0);
    let mut mean = safe_prob.clone();
    for (c, p) in posteriors.iter() {
        safe_prob[c] = p.cdf(target)?;
        mean[c] = p.mean();
    }
    let logs: Vec<f64> = contours
        .iter()
        .map(|m| {
            m.iter()
                .map(|(c, &toxic)| if toxic { (1.0 - safe_prob[c]).ln() } else { safe_prob[c].ln() })
                .sum()
        })
        .collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(invalid("every contour has zero posterior mass"));
    }
    let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    let probs: Vec<f64> = w.iter().map(|x| x / total).collect();
    let mut q = safe_prob.map(|_| 0.0);
    for (m, p) in contours.iter().zip(&probs) {
        for (c, &toxic) in m.iter() {
            if toxic {
                q[c] += p;
            }
        }
    }
    Ok(ContourPosterior {
        contours,
        probs,
        safe_prob,
        q,
        mean,
    })
}

#[derive(Debug, Clone)]
pub struct Pipe {
    pub priors: Matrix<BetaParams>,
    pub prior_ss: f64,
    pub epsilon: f64,
}

impl Pipe {
    pub fn new(cfg: &PipeConfig, grid: &DoseGrid) -> Result<Self> {
        check_epsilon(cfg.epsilon)?;
        if grid.rows() + grid.cols() > MAX_CONTOUR_DIM {
            return Err(Error::GridTooLarge(grid.rows(), grid.cols()));
        }
        if !(cfg.prior_ss > 0.0) {
            return Err(invalid("PIPE prior sample size must be positive"));
        }
        let mut priors = grid.matrix(BetaParams::UNIFORM);
        for c in grid.combos() {
            let m = cfg.rho + (c.i + c.j - 2) as f64 * cfg.delta;
            if !(m > 0.0 && m < 1.0) {
                return Err(invalid(format!("PIPE prior mean {m} at {c} outside (0,1)")));
            }
            priors[c] = match cfg.prior_location {
                PriorLocation::Mean => BetaParams::from_mean_ess(m, cfg.prior_ss)?,
                PriorLocation::Median => beta_from_median_ess(m, cfg.prior_ss)?,
            };
        }
        Ok(Self {
            priors,
            prior_ss: cfg.prior_ss,
            epsilon: cfg.epsilon,
        })
    }

    pub fn posterior(&self, state: &TrialState, target: f64) -> Result<ContourPosterior> {
        let mut post = self.priors.clone();
        for c in state.grid.combos() {
            let p = self.priors[c];
            post[c] = BetaParams::new(
                p.a + state.y[c] as f64,
                p.b + (state.n[c] - state.y[c]) as f64,
            )?;
        }
        contour_posterior(&post, target)
    }

    fn barred(&self, cp: &ContourPosterior) -> Matrix<bool> {
        if rule_disabled(self.epsilon) {
            cp.q.map(|_| false)
        } else {
            cp.q.map(|&x| x >= self.epsilon)
        }
    }
}

impl Design for Pipe {
    fn id(&self) -> &'static str {
        "pipe"
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
        let cp = self.posterior(state, cfg.target)?;
        let barred = self.barred(&cp);
        if barred[Combo::new(1, 1)] {
            state.terminated = true;
            return Ok(DesignDecision::TerminateForSafety);
        }
        let modal = choose(rng, &cp.modal_candidates()).expect("contours exist");
        let contour = &cp.contours[modal];
        let closest = contour_neighbours(contour);

        let admissible = admissible_set(state.current, &state.grid, self.admissibility(), &barred);
        let mut candidates: Vec<Combo> = admissible
            .iter()
            .copied()
            .filter(|c| closest.contains(c))
            .collect();
        if candidates.is_empty() {
            let dist = |c: Combo| {
                closest
                    .iter()
                    .map(|k| k.i.abs_diff(c.i) + k.j.abs_diff(c.j))
                    .min()
                    .unwrap_or(0) as f64
            };
            candidates = argmin_ties(&admissible, dist, 0.5);
        }
        if candidates.is_empty() {
            return Ok(DesignDecision::Continue(drop_below(state, &barred, rng)));
        }
        let weights: Vec<f64> = candidates
            .iter()
            .map(|c| 1.0 / (state.n[*c] as f64 + self.prior_ss))
            .collect();
        let total: f64 = weights.iter().sum();
        let mut u = rng.uniform() * total;
        let mut next = *candidates.last().unwrap();
        for (c, w) in candidates.iter().zip(&weights) {
            if u < *w {
                next = *c;
                break;
            }
            u -= w;
        }
        Ok(DesignDecision::Continue(next))
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
        let cp = self.posterior(state, cfg.target)?;
        let modal = choose(rng, &cp.modal_candidates()).expect("contours exist");
        let tops = recommended(&cp.contours[modal], &state.n);
        let best = argmin_ties(&tops, |c| (cp.mean[c] - cfg.target).abs(), TIE_TOL);
        Ok(choose(rng, &best))
    }

    fn summary(
        &self,
        state: &TrialState,
        cfg: &TrialConfig,
        _rng: &mut RngStream,
    ) -> Result<PosteriorSummary> {
        let cp = self.posterior(state, cfg.target)?;
        Ok(PosteriorSummary {
            mean: cp.mean,
            exceedance: cp.q,
        })
    }
}

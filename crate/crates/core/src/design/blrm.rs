//! Five-parameter Bayesian logistic regression for two agents with
//! escalation with overdose control, used as a model-based comparator.

use serde::{Deserialize, Serialize};

use super::{check_epsilon, rule_disabled, Design, McmcConfig, PosteriorSummary};
use crate::error::{invalid, Result};
use crate::grid::{admissible_set, AdmissibilityMode, Combo, DoseGrid, Matrix};
use crate::stats::{argmax_ties, choose, RngStream};
use crate::trial::{DesignDecision, TrialConfig, TrialState};

const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalPrior {
    pub mean: f64,
    /// Zero fixes the parameter at its mean.
    pub sd: f64,
}

/// Parameter vectors are ordered `[log alpha_A, log alpha_B, log beta_A, log beta_B, eta]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlrmPriors {
    pub log_alpha_a: NormalPrior,
    pub log_alpha_b: NormalPrior,
    pub log_beta_a: NormalPrior,
    pub log_beta_b: NormalPrior,
    pub eta: NormalPrior,
}

impl BlrmPriors {
    pub fn as_array(&self) -> [NormalPrior; 5] {
        [
            self.log_alpha_a,
            self.log_alpha_b,
            self.log_beta_a,
            self.log_beta_b,
            self.eta,
        ]
    }
}

impl Default for BlrmPriors {
    fn default() -> Self {
        let alpha = NormalPrior {
            mean: 0.25f64.ln(),
            sd: 1.0,
        };
        let zero = NormalPrior { mean: 0.0, sd: 1.0 };
        Self {
            log_alpha_a: alpha,
            log_alpha_b: alpha,
            log_beta_a: zero,
            log_beta_b: zero,
            eta: zero,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlrmConfig {
    pub priors: BlrmPriors,
    /// Standardising doses `(d*_A, d*_B)`; defaults to the top dose of each drug.
    pub reference_doses: Option<(f64, f64)>,
    /// EWOC threshold on P(pi > overdose_cut).
    pub epsilon: f64,
    pub target_band: (f64, f64),
    pub overdose_cut: f64,
    /// Minimum patients on a combination for it to be recommended.
    pub min_n_for_mtc: u32,
    pub mcmc: McmcConfig,
}

impl Default for BlrmConfig {
    fn default() -> Self {
        Self {
            priors: BlrmPriors::default(),
            reference_doses: None,
            epsilon: 0.25,
            target_band: (0.16, 0.33),
            overdose_cut: 0.33,
            min_n_for_mtc: 6,
            mcmc: McmcConfig {
                burn_in: 4000,
                iterations: 16000,
            },
        }
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn log_sigmoid(x: f64) -> f64 {
    -softplus(-x)
}

/// Log-odds of toxicity at standardised doses `(da, db)`.
pub fn blrm_logit(params: &[f64; 5], da: f64, db: f64) -> f64 {
    let la = softplus(params[0] + params[2].exp() * da.ln());
    let lb = softplus(params[1] + params[3].exp() * db.ln());
    let l = la + lb;
    // logit of 1 - exp(-l), evaluated without cancellation
    l + (-(-l).exp_m1()).ln() + params[4] * da * db
}

pub fn blrm_prob(params: &[f64; 5], da: f64, db: f64) -> f64 {
    1.0 / (1.0 + (-blrm_logit(params, da, db)).exp())
}

#[derive(Debug, Clone)]
pub struct BlrmPosterior {
    pub mean: Matrix<f64>,
    /// P(pi in target band).
    pub band: Matrix<f64>,
    /// P(pi > overdose cut).
    pub overdose: Matrix<f64>,
    pub acceptance: f64,
}

#[derive(Debug, Clone)]
pub struct Blrm {
    cfg: BlrmConfig,
    prior_mean: [f64; 5],
    prior_sd: [f64; 5],
    da: Vec<f64>,
    db: Vec<f64>,
}

impl Blrm {
    pub fn new(cfg: &BlrmConfig, grid: &DoseGrid) -> Result<Self> {
        check_epsilon(cfg.epsilon)?;
        cfg.mcmc.validate()?;
        let priors = cfg.priors.as_array();
        let prior_mean = priors.map(|p| p.mean);
        let prior_sd = priors.map(|p| p.sd);
        if prior_sd.iter().any(|s| !(*s >= 0.0) || !s.is_finite())
            || prior_mean.iter().any(|m| !m.is_finite())
        {
            return Err(invalid("BLRM priors need finite means and non-negative sds"));
        }
        let (lo, hi) = cfg.target_band;
        if !(0.0 < lo && lo < hi && hi < 1.0 && 0.0 < cfg.overdose_cut && cfg.overdose_cut < 1.0) {
            return Err(invalid("BLRM target band and overdose cut must lie in (0,1)"));
        }
        let top_a = *grid.doses_a().last().expect("non-empty grid");
        let top_b = *grid.doses_b().last().expect("non-empty grid");
        let (ra, rb) = cfg.reference_doses.unwrap_or((top_a, top_b));
        if !(ra > 0.0 && rb > 0.0) {
            return Err(invalid("reference doses must be positive"));
        }
        let da: Vec<f64> = grid.doses_a().iter().map(|d| d / ra).collect();
        let db: Vec<f64> = grid.doses_b().iter().map(|d| d / rb).collect();
        if da.iter().chain(&db).any(|d| !(*d > 0.0)) {
            return Err(invalid("BLRM needs positive doses"));
        }
        Ok(Self {
            cfg: cfg.clone(),
            prior_mean,
            prior_sd,
            da,
            db,
        })
    }

    pub fn config(&self) -> &BlrmConfig {
        &self.cfg
    }

    fn log_lik(&self, p: &[f64; 5], n: &Matrix<u32>, y: &Matrix<u32>) -> f64 {
        let mut ll = 0.0;
        for (c, &nc) in n.iter() {
            if nc == 0 {
                continue;
            }
            let z = blrm_logit(p, self.da[c.i - 1], self.db[c.j - 1]);
            let yc = y[c] as f64;
            ll += yc * log_sigmoid(z) + (nc as f64 - yc) * log_sigmoid(-z);
        }
        ll
    }

    fn log_prior(&self, p: &[f64; 5]) -> f64 {
        (0..5)
            .filter(|&k| self.prior_sd[k] > 0.0)
            .map(|k| -0.5 * ((p[k] - self.prior_mean[k]) / self.prior_sd[k]).powi(2))
            .sum()
    }

    /// Joint random-walk Metropolis; proposal scales are the prior sds times a
    /// common factor tuned during burn-in.
    pub fn posterior(
        &self,
        n: &Matrix<u32>,
        y: &Matrix<u32>,
        rng: &mut RngStream,
    ) -> Result<BlrmPosterior> {
        let free: Vec<usize> = (0..5).filter(|&k| self.prior_sd[k] > 0.0).collect();
        let mut p = self.prior_mean;
        let mut lpost = self.log_lik(&p, n, y) + self.log_prior(&p);
        let mut scale = 2.4 / (free.len().max(1) as f64).sqrt();
        let (rows, cols) = (n.rows(), n.cols());
        let mut mean = Matrix::filled(rows, cols, 0.0);
        let mut band = mean.clone();
        let mut over = mean.clone();
        let (lo, hi) = self.cfg.target_band;
        let cut = self.cfg.overdose_cut;
        let mut window = 0usize;
        let mut kept_acc = 0usize;
        let mcmc = self.cfg.mcmc;
        for it in 0..mcmc.burn_in + mcmc.iterations {
            let mut prop = p;
            for &k in &free {
                prop[k] += scale * self.prior_sd[k] * rng.normal01();
            }
            let lp = self.log_lik(&prop, n, y) + self.log_prior(&prop);
            let diff = lp - lpost;
            let accept = diff.is_finite() && (diff >= 0.0 || rng.uniform().ln() < diff);
            if accept {
                p = prop;
                lpost = lp;
            }
            if it < mcmc.burn_in {
                window += accept as usize;
                if (it + 1) % 100 == 0 {
                    let rate = window as f64 / 100.0;
                    scale *= if rate > 0.234 { 1.2 } else { 1.0 / 1.2 };
                    window = 0;
                }
                continue;
            }
            kept_acc += accept as usize;
            for r in 0..rows {
                for c in 0..cols {
                    let pi = blrm_prob(&p, self.da[r], self.db[c]);
                    *mean.at_mut(r, c) += pi;
                    if pi > lo && pi < hi {
                        *band.at_mut(r, c) += 1.0;
                    }
                    if pi > cut {
                        *over.at_mut(r, c) += 1.0;
                    }
                }
            }
        }
        let t = mcmc.iterations as f64;
        let norm = |m: Matrix<f64>| m.map(|x| x / t);
        Ok(BlrmPosterior {
            mean: norm(mean),
            band: norm(band),
            overdose: norm(over),
            acceptance: kept_acc as f64 / t,
        })
    }

    fn passes_ewoc(&self, overdose: f64) -> bool {
        rule_disabled(self.cfg.epsilon) || overdose < self.cfg.epsilon
    }

    /// Decision given posterior interval probabilities, so the rule can be
    /// exercised with a fixed posterior.
    pub fn decide_from_posterior(
        &self,
        state: &mut TrialState,
        band: &Matrix<f64>,
        overdose: &Matrix<f64>,
        rng: &mut RngStream,
    ) -> Result<DesignDecision> {
        let none = state.grid.matrix(false);
        let candidates: Vec<Combo> =
            admissible_set(state.current, &state.grid, AdmissibilityMode::Extended, &none)
                .into_iter()
                .filter(|c| self.passes_ewoc(overdose[*c]))
                .collect();
        if candidates.is_empty() {
            state.terminated = true;
            return Ok(DesignDecision::TerminateForSafety);
        }
        let best = argmax_ties(&candidates, |c| band[c], TIE_TOL);
        Ok(DesignDecision::Continue(choose(rng, &best).expect("non-empty")))
    }

    pub fn mtc_from_posterior(
        &self,
        state: &TrialState,
        band: &Matrix<f64>,
        overdose: &Matrix<f64>,
        rng: &mut RngStream,
    ) -> Option<Combo> {
        if state.terminated {
            return None;
        }
        let eligible: Vec<Combo> = state
            .grid
            .combos()
            .filter(|c| state.n[*c] >= self.cfg.min_n_for_mtc && self.passes_ewoc(overdose[*c]))
            .collect();
        let best = argmax_ties(&eligible, |c| band[c], TIE_TOL);
        choose(rng, &best)
    }
}

impl Design for Blrm {
    fn id(&self) -> &'static str {
        "blrm"
    }

    fn admissibility(&self) -> AdmissibilityMode {
        AdmissibilityMode::Extended
    }

    fn decide(
        &self,
        state: &mut TrialState,
        _cfg: &TrialConfig,
        rng: &mut RngStream,
    ) -> Result<DesignDecision> {
        let post = self.posterior(&state.n, &state.y, rng)?;
        self.decide_from_posterior(state, &post.band, &post.overdose, rng)
    }

    fn select_mtc(
        &self,
        state: &TrialState,
        _cfg: &TrialConfig,
        rng: &mut RngStream,
    ) -> Result<Option<Combo>> {
        if state.terminated {
            return Ok(None);
        }
        let post = self.posterior(&state.n, &state.y, rng)?;
        Ok(self.mtc_from_posterior(state, &post.band, &post.overdose, rng))
    }

    fn summary(
        &self,
        state: &TrialState,
        _cfg: &TrialConfig,
        rng: &mut RngStream,
    ) -> Result<PosteriorSummary> {
        let post = self.posterior(&state.n, &state.y, rng)?;
        Ok(PosteriorSummary {
            mean: post.mean,
            exceedance: post.overdose,
        })
    }
}

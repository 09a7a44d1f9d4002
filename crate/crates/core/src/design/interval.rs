//! BOIN and Keyboard: interval-based escalation with independent Beta(1,1)
//! posteriors per combination, permanent overdose elimination, and
//! isotonic-regression MTC selection.

use serde::{Deserialize, Serialize};

use super::{check_epsilon, drop_below, rule_disabled, Design, PosteriorSummary};
use crate::error::{invalid, Result};
use crate::grid::{AdmissibilityMode, Combo, Matrix};
use crate::stats::{argmax_ties, argmin_ties, choose, isotonic_2d, BetaParams, RngStream};
use crate::trial::{DesignDecision, TrialConfig, TrialState};

const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoinConfig {
    pub a1: f64,
    pub a2: f64,
    pub epsilon: f64,
}

impl Default for BoinConfig {
    fn default() -> Self {
        Self {
            a1: 0.65,
            a2: 1.40,
            epsilon: 0.84,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KeyboardConfig {
    pub b1: f64,
    pub b2: f64,
    pub epsilon: f64,
}

impl Default for KeyboardConfig {
    fn default() -> Self {
        Self {
            b1: 0.21,
            b2: 0.39,
            epsilon: 0.84,
        }
    }
}

/// Escalation and de-escalation boundaries `(lambda_e, lambda_d)` that
/// locally minimise incorrect decisions for target `phi`, given the highest
/// sub-therapeutic rate `phi1` and lowest overly toxic rate `phi2`.
pub fn boin_boundaries(phi: f64, phi1: f64, phi2: f64) -> Result<(f64, f64)> {
    if !(0.0 < phi1 && phi1 < phi && phi < phi2 && phi2 < 1.0) {
        return Err(invalid(format!(
            "need 0 < phi1 < phi < phi2 < 1, got ({phi1}, {phi}, {phi2})"
        )));
    }
    let lambda_e = ((1.0 - phi1) / (1.0 - phi)).ln()
        / ((phi * (1.0 - phi1)) / (phi1 * (1.0 - phi))).ln();
    let lambda_d = ((1.0 - phi) / (1.0 - phi2)).ln()
        / ((phi2 * (1.0 - phi)) / (phi * (1.0 - phi2))).ln();
    Ok((lambda_e, lambda_d))
}

/// Partition of (0,1) into equal-width keys built outward from the target
/// key, with shorter remainder keys at either end.
#[derive(Debug, Clone, PartialEq)]
pub struct Keys {
    keys: Vec<(f64, f64)>,
    target: usize,
}

impl Keys {
    pub fn new(b1: f64, b2: f64) -> Result<Self> {
        if !(0.0 < b1 && b1 < b2 && b2 < 1.0) {
            return Err(invalid(format!("target key ({b1}, {b2}) must satisfy 0 < b1 < b2 < 1")));
        }
        let width = b2 - b1;
        // Remainders thinner than this are rounding noise, not keys.
        let eps = 1e-9;
        let mut below = Vec::new();
        let mut hi = b1;
        while hi > eps {
            let lo = (hi - width).max(0.0);
            below.push((if lo < eps { 0.0 } else { lo }, hi));
            hi = lo;
        }
        let mut keys: Vec<(f64, f64)> = below.into_iter().rev().collect();
        let target = keys.len();
        keys.push((b1, b2));
        let mut lo = b2;
        while lo < 1.0 - eps {
            let hi = (lo + width).min(1.0);
            keys.push((lo, if hi > 1.0 - eps { 1.0 } else { hi }));
            lo = hi;
        }
        Ok(Self { keys, target })
    }

    pub fn keys(&self) -> &[(f64, f64)] {
        &self.keys
    }

    pub fn target_index(&self) -> usize {
        self.target
    }

    pub fn target_key(&self) -> (f64, f64) {
        self.keys[self.target]
    }

    /// Index of the key holding the most posterior mass. Exact ties go to
    /// the key nearest the target key, then the lower one.
    pub fn most_likely(&self, post: &BetaParams) -> Result<usize> {
        let mut best = (f64::NEG_INFINITY, usize::MAX, 0usize);
        for (k, &(lo, hi)) in self.keys.iter().enumerate() {
            let mass = post.prob_between(lo, hi)?;
            let dist = k.abs_diff(self.target);
            let better = mass > best.0 + TIE_TOL
                || ((mass - best.0).abs() <= TIE_TOL && dist < best.1);
            if better {
                best = (mass, dist, k);
            }
        }
        Ok(best.2)
    }
}

fn posterior(state: &TrialState, c: Combo) -> BetaParams {
    let (n, y) = (state.n[c] as f64, state.y[c] as f64);
    BetaParams {
        a: 1.0 + y,
        b: 1.0 + n - y,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Escalate,
    Stay,
    DeEscalate,
}

/// Eliminate every tested combination (and its up-set) whose posterior
/// overdose probability reaches `epsilon`. Returns true when the lowest
/// combination is eliminated.
pub fn apply_elimination(state: &mut TrialState, target: f64, epsilon: f64) -> Result<bool> {
    if rule_disabled(epsilon) {
        return Ok(false);
    }
    let combos: Vec<Combo> = state.grid.combos().collect();
    for c in combos {
        if state.eliminated[c] || !state.is_tested(c) {
            continue;
        }
        if posterior(state, c).sf(target)? >= epsilon {
            state.eliminate_upset(c);
        }
    }
    Ok(state.eliminated[Combo::new(1, 1)])
}

/// Shared escalation flow. `direction` classifies the current combination's
/// data; `score` ranks candidate combinations (higher is better).
fn interval_decide(
    state: &mut TrialState,
    target: f64,
    epsilon: f64,
    rng: &mut RngStream,
    direction: impl Fn(&BetaParams, f64) -> Result<Direction>,
    score: impl Fn(&BetaParams) -> Result<f64>,
) -> Result<DesignDecision> {
    if apply_elimination(state, target, epsilon)? {
        state.terminated = true;
        return Ok(DesignDecision::TerminateForSafety);
    }
    let cur = state.current;
    let up = [cur.offset(1, 0), cur.offset(0, 1)];
    let down = [cur.offset(-1, 0), cur.offset(0, -1)];
    let open = |set: &[Option<Combo>]| -> Vec<Combo> {
        set.iter()
            .flatten()
            .copied()
            .filter(|c| state.grid.contains(*c) && !state.eliminated[*c])
            .collect()
    };

    let mv = if state.eliminated[cur] {
        Direction::DeEscalate
    } else if let Some(rate) = state.empirical_rate(cur) {
        direction(&posterior(state, cur), rate)?
    } else {
        Direction::Stay
    };

    let candidates = match mv {
        Direction::Stay => return Ok(DesignDecision::Continue(cur)),
        Direction::Escalate => open(&up),
        Direction::DeEscalate => open(&down),
    };
    if candidates.is_empty() {
        if !state.eliminated[cur] {
            return Ok(DesignDecision::Continue(cur));
        }
        // Both lower neighbours are gone; (1,1) survives or we would have stopped.
        return Ok(DesignDecision::Continue(drop_below(state, &state.eliminated, rng)));
    }
    let mut scores = Vec::with_capacity(candidates.len());
    for &c in &candidates {
        scores.push((c, score(&posterior(state, c))?));
    }
    let best = argmax_ties(&scores, |(_, s)| s, TIE_TOL);
    let (next, _) = choose(rng, &best).expect("non-empty candidates");
    Ok(DesignDecision::Continue(next))
}

/// Isotonic-regression MTC selection over tested, non-eliminated combinations.
pub fn interval_select_mtc(
    state: &TrialState,
    target: f64,
    rng: &mut RngStream,
) -> Result<Option<Combo>> {
    if state.terminated {
        return Ok(None);
    }
    // Lightly shrunk observed rates, weighted by patients; untested cells
    // carry no weight and only follow their neighbours.
    let mut rates = state.n.map(|_| 0.5);
    let mut weights = state.n.map(|&n| n as f64);
    for c in state.grid.combos() {
        let n = state.n[c] as f64;
        rates[c] = (state.y[c] as f64 + 0.05) / (n + 0.1);
        weights[c] = n;
    }
    if weights.as_slice().iter().all(|w| *w == 0.0) {
        return Ok(None);
    }
    let fit = isotonic_2d(&rates, &weights)?;
    let eligible: Vec<Combo> = state
        .grid
        .combos()
        .filter(|c| state.is_tested(*c) && !state.eliminated[*c])
        .collect();
    let best = argmin_ties(&eligible, |c| (fit[c] - target).abs(), TIE_TOL);
    Ok(choose(rng, &best))
}

fn independent_summary(state: &TrialState, target: f64) -> Result<PosteriorSummary> {
    let mut mean = Matrix::filled(state.grid.rows(), state.grid.cols(), 0.0);
    let mut exceedance = mean.clone();
    for c in state.grid.combos() {
        let p = posterior(state, c);
        mean[c] = p.mean();
        exceedance[c] = p.sf(target)?;
    }
    Ok(PosteriorSummary { mean, exceedance })
}

#[derive(Debug, Clone)]
pub struct Boin {
    pub phi: f64,
    pub lambda_e: f64,
    pub lambda_d: f64,
    pub epsilon: f64,
}

impl Boin {
    pub fn new(cfg: &BoinConfig, phi: f64) -> Result<Self> {
        if !(cfg.a1 < 1.0 && cfg.a2 > 1.0) {
            return Err(invalid("BOIN needs a1 < 1 < a2"));
        }
        check_epsilon(cfg.epsilon)?;
        let (lambda_e, lambda_d) = boin_boundaries(phi, cfg.a1 * phi, cfg.a2 * phi)?;
        Ok(Self {
            phi,
            lambda_e,
            lambda_d,
            epsilon: cfg.epsilon,
        })
    }

    pub fn direction(&self, rate: f64) -> Direction {
        if rate <= self.lambda_e {
            Direction::Escalate
        } else if rate >= self.lambda_d {
            Direction::DeEscalate
        } else {
            Direction::Stay
        }
    }
}

impl Design for Boin {
    fn id(&self) -> &'static str {
        "boin"
    }

    fn admissibility(&self) -> AdmissibilityMode {
        AdmissibilityMode::Rectilinear
    }

    fn decide(
        &self,
        state: &mut TrialState,
        _cfg: &TrialConfig,
        rng: &mut RngStream,
    ) -> Result<DesignDecision> {
        let (le, ld) = (self.lambda_e, self.lambda_d);
        interval_decide(
            state,
            self.phi,
            self.epsilon,
            rng,
            |_, rate| Ok(self.direction(rate)),
            |p| p.prob_between(le, ld),
        )
    }

    fn select_mtc(
        &self,
        state: &TrialState,
        _cfg: &TrialConfig,
        rng: &mut RngStream,
    ) -> Result<Option<Combo>> {
        interval_select_mtc(state, self.phi, rng)
    }

    fn summary(
        &self,
        state: &TrialState,
        _cfg: &TrialConfig,
        _rng: &mut RngStream,
    ) -> Result<PosteriorSummary> {
        independent_summary(state, self.phi)
    }
}

#[derive(Debug, Clone)]
pub struct Keyboard {
    pub phi: f64,
    pub keys: Keys,
    pub epsilon: f64,
}

impl Keyboard {
    pub fn new(cfg: &KeyboardConfig, phi: f64) -> Result<Self> {
        check_epsilon(cfg.epsilon)?;
        let keys = Keys::new(cfg.b1, cfg.b2)?;
        if !(cfg.b1 < phi && phi < cfg.b2) {
            return Err(invalid("Keyboard target key must contain the target"));
        }
        Ok(Self {
            phi,
            keys,
            epsilon: cfg.epsilon,
        })
    }

    pub fn direction(&self, post: &BetaParams) -> Result<Direction> {
        let k = self.keys.most_likely(post)?;
        let t = self.keys.target_index();
        Ok(match k.cmp(&t) {
            std::cmp::Ordering::Less => Direction::Escalate,
            std::cmp::Ordering::Equal => Direction::Stay,
            std::cmp::Ordering::Greater => Direction::DeEscalate,
        })
    }
}

impl Design for Keyboard {
    fn id(&self) -> &'static str {
        "keyboard"
    }

    fn admissibility(&self) -> AdmissibilityMode {
        AdmissibilityMode::Rectilinear
    }

    fn decide(
        &self,
        state: &mut TrialState,
        _cfg: &TrialConfig,
        rng: &mut RngStream,
    ) -> Result<DesignDecision> {
        let (lo, hi) = self.keys.target_key();
        interval_decide(
            state,
            self.phi,
            self.epsilon,
            rng,
            |post, _| Ok(self.direction(post)?),
            |p| p.prob_between(lo, hi),
        )
    }

    fn select_mtc(
        &self,
        state: &TrialState,
        _cfg: &TrialConfig,
        rng: &mut RngStream,
    ) -> Result<Option<Combo>> {
        interval_select_mtc(state, self.phi, rng)
    }

    fn summary(
        &self,
        state: &TrialState,
        _cfg: &TrialConfig,
        _rng: &mut RngStream,
    ) -> Result<PosteriorSummary> {
        independent_summary(state, self.phi)
    }
}

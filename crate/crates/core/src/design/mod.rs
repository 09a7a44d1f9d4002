//! Escalation designs and their JSON configuration.
//!
//! Every design implements [`Design`]: after each cohort it decides where
//! the next cohort goes (or stops the trial for safety), and at the end of
//! the trial it selects the maximum tolerated combination.

pub mod blrm;
pub mod interval;
pub mod pipe;
pub mod sfd;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{AdmissibilityMode, Combo, DoseGrid, Matrix};
use crate::stats::RngStream;
use crate::trial::{DesignDecision, TrialConfig, TrialState};

pub use blrm::{Blrm, BlrmConfig};
pub use interval::{Boin, BoinConfig, Keyboard, KeyboardConfig};
pub use pipe::{Pipe, PipeConfig};
pub use sfd::{Sfd, SfdConfig};

/// Posterior snapshot reported alongside recommendations.
///
/// `exceedance` is the statistic each design's safety rule compares with its
/// threshold: P(pi > target) for BOIN, Keyboard and SFD, the expected
/// above-contour indicator for PIPE, and P(pi > overdose cut) for BLRM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub mean: Matrix<f64>,
    pub exceedance: Matrix<f64>,
}

pub trait Design: Send + Sync {
    fn id(&self) -> &'static str;

    fn admissibility(&self) -> AdmissibilityMode;

    /// Next move after the most recent cohort. Designs with permanent
    /// elimination record it in `state.eliminated`; a safety stop also sets
    /// `state.terminated`.
    fn decide(
        &self,
        state: &mut TrialState,
        cfg: &TrialConfig,
        rng: &mut RngStream,
    ) -> Result<DesignDecision>;

    /// Final recommendation, `None` when the trial stopped or nothing qualifies.
    fn select_mtc(
        &self,
        state: &TrialState,
        cfg: &TrialConfig,
        rng: &mut RngStream,
    ) -> Result<Option<Combo>>;

    fn summary(
        &self,
        state: &TrialState,
        cfg: &TrialConfig,
        rng: &mut RngStream,
    ) -> Result<PosteriorSummary>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "design", rename_all = "snake_case")]
pub enum DesignConfig {
    Boin(BoinConfig),
    Keyboard(KeyboardConfig),
    Pipe(PipeConfig),
    Sfd(SfdConfig),
    Blrm(BlrmConfig),
}

#[derive(Deserialize)]
struct Versioned {
    #[serde(default)]
    schema: Option<u32>,
    #[serde(flatten)]
    config: DesignConfig,
}

pub const DESIGN_IDS: [&str; 5] = ["boin", "keyboard", "pipe", "sfd", "blrm"];

impl DesignConfig {
    /// Calibrated defaults for a design id (`key` is accepted for Keyboard).
    pub fn default_for(id: &str) -> Result<Self> {
        match id.to_ascii_lowercase().as_str() {
            "boin" => Ok(Self::Boin(BoinConfig::default())),
            "keyboard" | "key" => Ok(Self::Keyboard(KeyboardConfig::default())),
            "pipe" => Ok(Self::Pipe(PipeConfig::default())),
            "sfd" | "surface_free" => Ok(Self::Sfd(SfdConfig::default())),
            "blrm" => Ok(Self::Blrm(BlrmConfig::default())),
            _ => Err(Error::Unknown {
                kind: "design",
                name: id.to_string(),
            }),
        }
    }

    pub fn defaults() -> Vec<Self> {
        DESIGN_IDS
            .iter()
            .map(|id| Self::default_for(id).expect("known id"))
            .collect()
    }

    /// Parse a config document; an optional `schema` field must be 1.
    pub fn from_json(json: &str) -> Result<Self> {
        let v: Versioned = serde_json::from_str(json)?;
        match v.schema {
            None | Some(1) => Ok(v.config),
            Some(other) => Err(Error::InvalidParameter(format!(
                "unsupported config schema version {other}"
            ))),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Self::Boin(_) => "boin",
            Self::Keyboard(_) => "keyboard",
            Self::Pipe(_) => "pipe",
            Self::Sfd(_) => "sfd",
            Self::Blrm(_) => "blrm",
        }
    }

    pub fn epsilon(&self) -> f64 {
        match self {
            Self::Boin(c) => c.epsilon,
            Self::Keyboard(c) => c.epsilon,
            Self::Pipe(c) => c.epsilon,
            Self::Sfd(c) => c.epsilon,
            Self::Blrm(c) => c.epsilon,
        }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            Self::Boin(c) => c.epsilon = epsilon,
            Self::Keyboard(c) => c.epsilon = epsilon,
            Self::Pipe(c) => c.epsilon = epsilon,
            Self::Sfd(c) => c.epsilon = epsilon,
            Self::Blrm(c) => c.epsilon = epsilon,
        }
        out
    }

    pub fn build(&self, grid: &DoseGrid, cfg: &TrialConfig) -> Result<Box<dyn Design>> {
        cfg.validate()?;
        Ok(match self {
            Self::Boin(c) => Box::new(Boin::new(c, cfg.target)?),
            Self::Keyboard(c) => Box::new(Keyboard::new(c, cfg.target)?),
            Self::Pipe(c) => Box::new(Pipe::new(c, grid)?),
            Self::Sfd(c) => Box::new(Sfd::new(c, grid)?),
            Self::Blrm(c) => Box::new(Blrm::new(c, grid)?),
        })
    }
}

/// Markov chain lengths for the model-based designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub burn_in: usize,
    pub iterations: usize,
}

impl McmcConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.iterations < 10 {
            return Err(Error::InvalidParameter(
                "MCMC needs at least 10 retained iterations".into(),
            ));
        }
        Ok(())
    }
}

/// Highest surviving combination below `current`, used when every
/// admissible move is closed. Needs `(1,1)` open.
pub(crate) fn drop_below(
    state: &TrialState,
    closed: &Matrix<bool>,
    rng: &mut RngStream,
) -> Combo {
    let cur = state.current;
    let lower: Vec<Combo> = state
        .grid
        .combos()
        .filter(|c| cur.dominates(c) && !closed[*c])
        .collect();
    let best = crate::stats::argmax_ties(&lower, |c| (c.i + c.j) as f64, 0.5);
    crate::stats::choose(rng, &best).expect("lowest combination is open")
}

/// Overdose thresholds at or above one switch the safety rule off.
pub(crate) fn rule_disabled(epsilon: f64) -> bool {
    epsilon >= 1.0
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "overdose threshold {epsilon} must lie in (0,1]"
        )))
    }
}

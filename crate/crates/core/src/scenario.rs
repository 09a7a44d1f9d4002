//! True toxicity scenarios and the correct/acceptable/toxic classification
//! used to score selections.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{Combo, Matrix};
use crate::trial::TrialConfig;

const SHIPPED: &str = include_str!("../data/scenarios.json");

/// Absolute tolerance for "truth equals the target".
pub const TARGET_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(rename = "rows")]
    pub truth: Matrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Correct,
    Acceptable,
    OverlyToxic,
    Subtherapeutic,
}

impl Classification {
    /// Correct selections also count as acceptable.
    pub fn is_acceptable(self) -> bool {
        matches!(self, Classification::Correct | Classification::Acceptable)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScenarioFile {
    Wrapped {
        #[allow(dead_code)]
        #[serde(default)]
        schema: Option<u32>,
        scenarios: Vec<Scenario>,
    },
    Many(Vec<Scenario>),
    One(Scenario),
}

impl Scenario {
    pub fn new(name: impl Into<String>, truth: Matrix<f64>) -> Result<Self> {
        let s = Self {
            name: name.into(),
            truth,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.truth.as_slice().iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(invalid(format!(
                "scenario '{}' has toxicity outside [0,1]",
                self.name
            )));
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.truth.rows()
    }

    pub fn cols(&self) -> usize {
        self.truth.cols()
    }

    pub fn classify(&self, cfg: &TrialConfig, combo: Combo) -> Classification {
        classify(self.truth[combo], cfg)
    }

    /// Whether any combination sits exactly at the target.
    pub fn has_correct(&self, cfg: &TrialConfig) -> bool {
        self.truth
            .as_slice()
            .iter()
            .any(|p| classify(*p, cfg) == Classification::Correct)
    }

    pub fn classification(&self, cfg: &TrialConfig) -> Matrix<Classification> {
        self.truth.map(|p| classify(*p, cfg))
    }
}

pub fn classify(truth: f64, cfg: &TrialConfig) -> Classification {
    let (lo, hi) = cfg.acceptable_band;
    if (truth - cfg.target).abs() <= TARGET_TOL {
        Classification::Correct
    } else if truth > cfg.toxic_cutoff {
        Classification::OverlyToxic
    } else if truth >= lo && truth <= hi {
        Classification::Acceptable
    } else {
        Classification::Subtherapeutic
    }
}

pub fn parse_scenarios(json: &str) -> Result<Vec<Scenario>> {
    let list = match serde_json::from_str::<ScenarioFile>(json)? {
        ScenarioFile::Wrapped { scenarios, .. } => scenarios,
        ScenarioFile::Many(v) => v,
        ScenarioFile::One(s) => vec![s],
    };
    for s in &list {
        s.validate()?;
    }
    Ok(list)
}

pub fn load_scenarios(path: impl AsRef<Path>) -> Result<Vec<Scenario>> {
    parse_scenarios(&std::fs::read_to_string(path)?)
}

/// The fifteen 3x3 scenarios of the simulation study, in order.
pub fn builtin() -> Vec<Scenario> {
    parse_scenarios(SHIPPED).expect("shipped scenario file is valid")
}

/// Look a built-in scenario up by number ("8", "s8", "scenario 8").
pub fn builtin_by_name(name: &str) -> Result<Scenario> {
    let key = name
        .trim()
        .to_ascii_lowercase()
        .trim_start_matches("scenario")
        .trim_start_matches('s')
        .trim()
        .to_string();
    builtin()
        .into_iter()
        .find(|s| s.name == key)
        .ok_or_else(|| Error::Unknown {
            kind: "scenario",
            name: name.to_string(),
        })
}

pub fn builtin_many(ids: &[usize]) -> Vec<Scenario> {
    let all = builtin();
    ids.iter().map(|&k| all[k - 1].clone()).collect()
}

//! Running trial tallies and the trial-level configuration.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{Combo, DoseGrid, Matrix};

/// Trial-level settings shared by all designs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialConfig {
    pub target: f64,
    pub cohort_size: u32,
    pub max_n: u32,
    pub start: Combo,
    pub acceptable_band: (f64, f64),
    pub toxic_cutoff: f64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            target: 0.30,
            cohort_size: 3,
            max_n: 36,
            start: Combo::new(1, 1),
            acceptable_band: (0.16, 0.33),
            toxic_cutoff: 0.33,
        }
    }
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.target > 0.0 && self.target < 1.0) {
            return Err(invalid("target must lie in (0,1)"));
        }
        if self.cohort_size == 0 || self.max_n == 0 || self.max_n % self.cohort_size != 0 {
            return Err(invalid("cohort_size must be positive and divide max_n"));
        }
        let (lo, hi) = self.acceptable_band;
        if !(lo <= self.target && self.target <= hi) {
            return Err(invalid("acceptable band must contain the target"));
        }
        if !(0.0..=1.0).contains(&self.toxic_cutoff) {
            return Err(invalid("toxic cutoff must be a probability"));
        }
        Ok(())
    }

    pub fn cohorts(&self) -> u32 {
        self.max_n / self.cohort_size
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortRecord {
    pub combo: Combo,
    pub size: u32,
    pub dlts: u32,
    /// Dosed away from the design's recommendation.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub overridden: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", content = "combo", rename_all = "snake_case")]
pub enum DesignDecision {
    Continue(Combo),
    TerminateForSafety,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialState {
    pub grid: DoseGrid,
    pub n: Matrix<u32>,
    pub y: Matrix<u32>,
    pub current: Combo,
    pub eliminated: Matrix<bool>,
    pub terminated: bool,
    pub cohort_log: Vec<CohortRecord>,
}

impl TrialState {
    pub fn new(grid: DoseGrid, start: Combo) -> Result<Self> {
        grid.check(start)?;
        Ok(Self {
            n: grid.matrix(0),
            y: grid.matrix(0),
            eliminated: grid.matrix(false),
            current: start,
            terminated: false,
            cohort_log: Vec::new(),
            grid,
        })
    }

    pub fn total_n(&self) -> u32 {
        self.n.as_slice().iter().sum()
    }

    pub fn total_dlts(&self) -> u32 {
        self.y.as_slice().iter().sum()
    }

    pub fn record_cohort(&mut self, combo: Combo, size: u32, dlts: u32) -> Result<()> {
        self.record(CohortRecord {
            combo,
            size,
            dlts,
            overridden: false,
        })
    }

    pub fn record(&mut self, rec: CohortRecord) -> Result<()> {
        if self.terminated {
            return Err(Error::TrialStopped);
        }
        self.grid.check(rec.combo)?;
        if rec.size == 0 || rec.dlts > rec.size {
            return Err(Error::InvalidCohort {
                size: rec.size,
                dlts: rec.dlts,
            });
        }
        if self.eliminated[rec.combo] {
            return Err(Error::Eliminated(rec.combo));
        }
        self.n[rec.combo] += rec.size;
        self.y[rec.combo] += rec.dlts;
        self.current = rec.combo;
        self.cohort_log.push(rec);
        Ok(())
    }

    /// Eliminate `combo` and every combination at least as high in both drugs.
    pub fn eliminate_upset(&mut self, combo: Combo) {
        for i in combo.i..=self.grid.rows() {
            for j in combo.j..=self.grid.cols() {
                self.eliminated[Combo::new(i, j)] = true;
            }
        }
    }

    pub fn is_tested(&self, c: Combo) -> bool {
        self.n[c] > 0
    }

    pub fn empirical_rate(&self, c: Combo) -> Option<f64> {
        let n = self.n[c];
        (n > 0).then(|| self.y[c] as f64 / n as f64)
    }
}

//! Trial simulation and operating characteristics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{Design, DesignConfig};
use crate::error::{invalid, Result};
use crate::grid::{Combo, DoseGrid, Matrix};
use crate::scenario::{Classification, Scenario};
use crate::stats::RngStream;
use crate::trial::{CohortRecord, DesignDecision, TrialConfig, TrialState};

const COHORT_STREAM: u64 = 1;
const DESIGN_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub selected: Option<Combo>,
    pub n: Matrix<u32>,
    pub y: Matrix<u32>,
    pub terminated: bool,
    pub cohort_log: Vec<CohortRecord>,
}

/// Source of DLT counts for a cohort; lets replays feed recorded responses.
pub trait Responder {
    fn respond(&mut self, cohort: u32, combo: Combo, size: u32) -> Result<u32>;
}

/// Binomial responses from a known toxicity surface. Patient `m` of cohort
/// `k` always sees the same latent uniform, whatever combination it gets.
pub struct ScenarioResponder<'a> {
    pub truth: &'a Matrix<f64>,
    pub stream: RngStream,
}

impl Responder for ScenarioResponder<'_> {
    fn respond(&mut self, cohort: u32, combo: Combo, size: u32) -> Result<u32> {
        let p = self.truth[combo];
        Ok(self.stream.derive2(COHORT_STREAM, cohort as u64).binomial(size, p))
    }
}

/// Runs one trial: the first cohort goes to the start combination, then the
/// design chooses after every cohort while patients remain.
pub fn run_trial(
    design: &dyn Design,
    grid: &DoseGrid,
    cfg: &TrialConfig,
    responder: &mut dyn Responder,
    rng: &mut RngStream,
) -> Result<TrialOutcome> {
    let mut state = TrialState::new(grid.clone(), cfg.start)?;
    let cohorts = cfg.cohorts();
    let mut next = cfg.start;
    for k in 0..cohorts {
        let dlts = responder.respond(k, next, cfg.cohort_size)?;
        state.record_cohort(next, cfg.cohort_size, dlts)?;
        if k + 1 == cohorts {
            break;
        }
        match design.decide(&mut state, cfg, rng)? {
            DesignDecision::Continue(c) => next = c,
            DesignDecision::TerminateForSafety => break,
        }
    }
    let selected = if state.terminated {
        None
    } else {
        design.select_mtc(&state, cfg, rng)?
    };
    Ok(TrialOutcome {
        selected,
        n: state.n,
        y: state.y,
        terminated: state.terminated,
        cohort_log: state.cohort_log,
    })
}

/// Replicate `r` of a simulation: its own stream for responses and for the design.
pub fn run_replicate(
    design: &dyn Design,
    scenario: &Scenario,
    cfg: &TrialConfig,
    master_seed: u64,
    replicate: u64,
) -> Result<TrialOutcome> {
    let base = RngStream::new(master_seed, replicate);
    let grid = DoseGrid::levels(scenario.rows(), scenario.cols())?;
    let mut responder = ScenarioResponder {
        truth: &scenario.truth,
        stream: base.clone(),
    };
    let mut rng = base.derive(DESIGN_STREAM);
    run_trial(design, &grid, cfg, &mut responder, &mut rng)
}

/// Selection metrics shared by simulated designs and the benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub nsim: usize,
    /// `None` when the scenario has no combination at the target.
    pub pcs: Option<f64>,
    pub pas: f64,
    pub toxic_selection: f64,
    pub no_selection: f64,
    /// Fraction of trials selecting each combination.
    pub selection: Matrix<f64>,
}

impl SelectionSummary {
    pub fn from_selections(
        selections: &[Option<Combo>],
        scenario: &Scenario,
        cfg: &TrialConfig,
    ) -> Result<Self> {
        if selections.is_empty() {
            return Err(invalid("need at least one replicate"));
        }
        let total = selections.len() as f64;
        let mut selection = Matrix::filled(scenario.rows(), scenario.cols(), 0.0);
        let (mut correct, mut acceptable, mut toxic, mut none) = (0usize, 0usize, 0usize, 0usize);
        for s in selections {
            match s {
                None => none += 1,
                Some(c) => {
                    selection[*c] += 1.0;
                    let class = scenario.classify(cfg, *c);
                    correct += (class == Classification::Correct) as usize;
                    acceptable += class.is_acceptable() as usize;
                    toxic += (class == Classification::OverlyToxic) as usize;
                }
            }
        }
        Ok(Self {
            nsim: selections.len(),
            pcs: scenario.has_correct(cfg).then(|| correct as f64 / total),
            pas: acceptable as f64 / total,
            toxic_selection: toxic as f64 / total,
            no_selection: none as f64 / total,
            selection: selection.map(|x| x / total),
        })
    }

    /// PCS with scenarios lacking a target combination counted as zero.
    pub fn pcs_or_zero(&self) -> f64 {
        self.pcs.unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingCharacteristics {
    pub design: String,
    pub scenario: String,
    pub master_seed: u64,
    #[serde(flatten)]
    pub selection: SelectionSummary,
    pub mean_patients: f64,
    pub mean_dlts: f64,
    pub mean_patients_at_toxic: f64,
    pub terminated: f64,
    /// Mean patients per combination.
    pub allocation: Matrix<f64>,
}

/// One CSV row per (design, scenario); percentages are fractions in [0,1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcRow {
    pub design: String,
    pub scenario: String,
    pub nsim: usize,
    pub seed: u64,
    pub pcs: Option<f64>,
    pub pas: f64,
    pub toxic_selection: f64,
    pub no_selection: f64,
    pub terminated: f64,
    pub mean_patients: f64,
    pub mean_dlts: f64,
    pub mean_patients_at_toxic: f64,
}

impl OperatingCharacteristics {
    pub fn row(&self) -> OcRow {
        OcRow {
            design: self.design.clone(),
            scenario: self.scenario.clone(),
            nsim: self.selection.nsim,
            seed: self.master_seed,
            pcs: self.selection.pcs,
            pas: self.selection.pas,
            toxic_selection: self.selection.toxic_selection,
            no_selection: self.selection.no_selection,
            terminated: self.terminated,
            mean_patients: self.mean_patients,
            mean_dlts: self.mean_dlts,
            mean_patients_at_toxic: self.mean_patients_at_toxic,
        }
    }

    pub fn aggregate(
        design: &str,
        scenario: &Scenario,
        cfg: &TrialConfig,
        master_seed: u64,
        outcomes: &[TrialOutcome],
    ) -> Result<Self> {
        let selections: Vec<Option<Combo>> = outcomes.iter().map(|o| o.selected).collect();
        let selection = SelectionSummary::from_selections(&selections, scenario, cfg)?;
        let total = outcomes.len() as f64;
        let mut allocation = Matrix::filled(scenario.rows(), scenario.cols(), 0.0);
        let (mut patients, mut dlts, mut at_toxic, mut terminated) = (0.0, 0.0, 0.0, 0.0);
        for o in outcomes {
            for (c, &n) in o.n.iter() {
                allocation[c] += n as f64;
                patients += n as f64;
                if scenario.classify(cfg, c) == Classification::OverlyToxic {
                    at_toxic += n as f64;
                }
            }
            dlts += o.y.as_slice().iter().sum::<u32>() as f64;
            terminated += o.terminated as u8 as f64;
        }
        Ok(Self {
            design: design.to_string(),
            scenario: scenario.name.clone(),
            master_seed,
            selection,
            mean_patients: patients / total,
            mean_dlts: dlts / total,
            mean_patients_at_toxic: at_toxic / total,
            terminated: terminated / total,
            allocation: allocation.map(|x| x / total),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimSettings {
    pub nsim: usize,
    pub master_seed: u64,
}

/// All replicates of one design under one scenario. Replicates run in
/// parallel; results are combined in replicate order.
pub fn simulate_outcomes(
    design: &DesignConfig,
    scenario: &Scenario,
    cfg: &TrialConfig,
    sim: SimSettings,
) -> Result<Vec<TrialOutcome>> {
    if sim.nsim == 0 {
        return Err(invalid("nsim must be at least 1"));
    }
    scenario.validate()?;
    let grid = DoseGrid::levels(scenario.rows(), scenario.cols())?;
    let built = design.build(&grid, cfg)?;
    (0..sim.nsim as u64)
        .into_par_iter()
        .map(|r| run_replicate(built.as_ref(), scenario, cfg, sim.master_seed, r))
        .collect()
}

pub fn simulate(
    design: &DesignConfig,
    scenario: &Scenario,
    cfg: &TrialConfig,
    sim: SimSettings,
) -> Result<OperatingCharacteristics> {
    let outcomes = simulate_outcomes(design, scenario, cfg, sim)?;
    OperatingCharacteristics::aggregate(design.id(), scenario, cfg, sim.master_seed, &outcomes)
}

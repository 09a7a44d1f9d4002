//! Dose-finding engine for two-drug combination trials.

pub mod benchmark;
pub mod calibrate;
pub mod case_study;
pub mod design;
pub mod error;
pub mod grid;
pub mod scenario;
pub mod sim;
pub mod stats;
pub mod trial;

pub use design::{Design, DesignConfig, PosteriorSummary};
pub use error::{Error, Result};
pub use grid::{admissible_set, AdmissibilityMode, Combo, DoseGrid, Matrix};
pub use scenario::{Classification, Scenario};
pub use sim::{simulate, OperatingCharacteristics, SimSettings};
pub use stats::RngStream;
pub use trial::{CohortRecord, DesignDecision, TrialConfig, TrialState};

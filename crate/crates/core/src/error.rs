use thiserror::Error;

use crate::grid::Combo;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("combination {0} is outside the {1}x{2} grid")]
    OutOfGrid(Combo, usize, usize),

    #[error("cohort reports {dlts} DLTs out of {size} patients")]
    InvalidCohort { size: u32, dlts: u32 },

    #[error("combination {0} has been eliminated")]
    Eliminated(Combo),

    #[error("trial has already stopped")]
    TrialStopped,

    #[error("grid {0}x{1} is too large for exhaustive contour enumeration")]
    GridTooLarge(usize, usize),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("unknown {kind} '{name}'")]
    Unknown { kind: &'static str, name: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

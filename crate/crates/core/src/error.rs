use std::io;

use thiserror::Error;

use crate::geometry::VehicleId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("vehicle {vehicle}: {reason}")]
    Data { vehicle: VehicleId, reason: String },

    #[error("malformed record at line {line}: {reason}")]
    Record { line: u64, reason: String },

    #[error("vehicle {0} is not part of the scene")]
    UnknownVehicle(VehicleId),

    #[error("numerical degeneracy: {0}")]
    Degenerate(String),

    #[error("predicted trajectories are not aligned: {0}")]
    Alignment(String),

    #[error("no samples available for statistics")]
    EmptyStatistics,

    #[error("not enough events for matched binning: need {needed}, have {available} (short by {})", needed - available)]
    InsufficientEvents { needed: usize, available: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("incompatible outputs: {0}")]
    Incompatible(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter { name, reason: reason.into() }
    }

    /// True for errors caused by the caller's input or configuration rather
    /// than by the environment.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Parameter { .. } | Error::MissingColumn(_) | Error::Config(_)
        )
    }
}

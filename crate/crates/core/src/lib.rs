//! Risk spot detection on recorded vehicle trajectories.
//!
//! Pairwise collision probabilities between predicted Gaussian footprints
//! are turned into collision rates and accumulated with a survival function
//! into one integrated risk value per ego vehicle and frame. Events are
//! binned by criticality and projected onto a spatial map.

pub mod analysis;
pub mod baselines;
pub mod collision;
pub mod config;
pub mod error;
pub mod geometry;
pub mod ingest;
pub mod predict;
pub mod run;
pub mod survival;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use geometry::{KinematicState, Participant, Path, Pose, SceneSnapshot, Vec2, VehicleId};

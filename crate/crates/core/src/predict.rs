//! Longitudinal prediction along recorded paths and partner selection.

use std::cmp::Ordering;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::collision::{sigma_growth, UncertaintyGrowth};
use crate::error::{Error, Result};
use crate::geometry::{KinematicState, Path, SceneSnapshot, Vec2, VehicleId};

/// Longitudinal behavior assumed for the prediction horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorModel {
    #[default]
    ConstantVelocity,
    /// The vehicle stays at its current arc length.
    SuddenStop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictedSample {
    pub s: f64,
    pub arclength: f64,
    pub position: Vec2,
    pub heading: f64,
    pub velocity: f64,
    /// Longitudinal position σ, m.
    pub sigma_lon: f64,
}

#[derive(Debug, Clone)]
pub struct PredictedTrajectory {
    pub vehicle: VehicleId,
    pub ds: f64,
    pub path: Arc<Path>,
    pub samples: Vec<PredictedSample>,
}

/// Prediction grid settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionGrid {
    pub ds: f64,
    pub s_max: f64,
}

impl PredictionGrid {
    pub fn new(ds: f64, s_max: f64) -> Result<Self> {
        if !(ds > 0.0) || !ds.is_finite() {
            return Err(Error::param("ds", format!("must be > 0, got {ds}")));
        }
        if !(s_max >= ds) || !s_max.is_finite() {
            return Err(Error::param("s_max", format!("must be >= ds ({ds}), got {s_max}")));
        }
        Ok(PredictionGrid { ds, s_max })
    }

    /// Number of samples including s = 0 and s = s_max.
    pub fn len(&self) -> usize {
        (self.s_max / self.ds).round() as usize + 1
    }
}

impl Default for PredictionGrid {
    fn default() -> Self {
        PredictionGrid { ds: 0.1, s_max: 12.0 }
    }
}

/// Predicts `state` along `path`. Arc length advances by v·Δs per step
/// under constant velocity; it is evaluated as l₀ + v·k·Δs so no rounding
/// accumulates over the horizon.
pub fn predict(
    vehicle: VehicleId,
    state: &KinematicState,
    path: Arc<Path>,
    behavior: BehaviorModel,
    growth: &UncertaintyGrowth,
    grid: PredictionGrid,
) -> Result<PredictedTrajectory> {
    if !(state.velocity >= 0.0) {
        return Err(Error::param("velocity", format!("must be >= 0, got {}", state.velocity)));
    }
    let n = grid.len();
    let v0 = state.velocity;
    let velocities: Vec<f64> = (0..n)
        .map(|k| match behavior {
            BehaviorModel::ConstantVelocity => v0,
            BehaviorModel::SuddenStop if k == 0 => v0,
            BehaviorModel::SuddenStop => 0.0,
        })
        .collect();
    let sigmas = sigma_growth(growth, &velocities, grid.ds)?;
    let samples = (0..n)
        .map(|k| {
            let s = k as f64 * grid.ds;
            let arclength = match behavior {
                BehaviorModel::ConstantVelocity => state.arclength + v0 * s,
                BehaviorModel::SuddenStop => state.arclength,
            };
            let pose = path.pose_at_arclength(arclength);
            PredictedSample {
                s,
                arclength,
                position: pose.position,
                heading: pose.heading,
                velocity: velocities[k],
                sigma_lon: sigmas[k],
            }
        })
        .collect();
    Ok(PredictedTrajectory { vehicle, ds: grid.ds, path, samples })
}

/// Sensor range used in the evaluation, m.
pub const DEFAULT_SENSOR_RANGE: f64 = 50.0;
/// Half a lane width, m.
pub const DEFAULT_LANE_THRESHOLD: f64 = 1.8;

/// Other participants within Euclidean distance `range` of the ego,
/// nearest first, ties by id.
pub fn neighbors_in_range(scene: &SceneSnapshot, ego: VehicleId, range: f64) -> Result<Vec<VehicleId>> {
    if !(range > 0.0) {
        return Err(Error::param("sensor_range", format!("must be > 0, got {range}")));
    }
    let me = scene.get(ego).ok_or(Error::UnknownVehicle(ego))?;
    let mut found: Vec<(f64, VehicleId)> = scene
        .participants()
        .iter()
        .filter(|p| p.id != ego)
        .map(|p| (me.state.position.distance(p.state.position), p.id))
        .filter(|(d, _)| *d <= range)
        .collect();
    found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(found.into_iter().map(|(_, id)| id).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontVehicle {
    pub vehicle: VehicleId,
    /// l_ego − l_front, negative when the front vehicle is ahead.
    pub delta_l: f64,
    /// v_ego − v_front.
    pub delta_v: f64,
}

/// Nearest vehicle ahead of the ego on the ego's own path: projected arc
/// length beyond the ego's, lateral offset below `lane_threshold`, and
/// within `range`.
pub fn front_vehicle(
    scene: &SceneSnapshot,
    ego: VehicleId,
    range: f64,
    lane_threshold: f64,
) -> Result<Option<FrontVehicle>> {
    let me = scene.get(ego).ok_or(Error::UnknownVehicle(ego))?;
    let mut best: Option<FrontVehicle> = None;
    for other in scene.participants().iter().filter(|p| p.id != ego) {
        if me.state.position.distance(other.state.position) > range {
            continue;
        }
        let proj = me.path.project(other.state.position);
        if proj.arclength <= me.state.arclength || proj.distance >= lane_threshold {
            continue;
        }
        let candidate = FrontVehicle {
            vehicle: other.id,
            delta_l: me.state.arclength - proj.arclength,
            delta_v: me.state.velocity - other.state.velocity,
        };
        let closer = match &best {
            None => true,
            Some(b) => match candidate.delta_l.total_cmp(&b.delta_l) {
                Ordering::Greater => true,
                Ordering::Equal => candidate.vehicle < b.vehicle,
                Ordering::Less => false,
            },
        };
        if closer {
            best = Some(candidate);
        }
    }
    Ok(best)
}

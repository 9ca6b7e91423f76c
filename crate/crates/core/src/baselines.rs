//! Time Headway and Time-To-Collision with a vehicle-size correction.

use serde::{Deserialize, Serialize};

/// Added to the centre gap so the metrics act on bumper distance, m.
pub const DEFAULT_SIZE_CORRECTION: f64 = 4.0;
/// Below this follower speed Time Headway is undefined, m/s.
pub const TH_MIN_SPEED: f64 = 0.1;
/// Closing speeds up to this value count as zero for Time-To-Collision, so
/// rounding noise between equal speeds does not produce huge TTC values, m/s.
pub const TTC_MIN_CLOSING_SPEED: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BaselineKind {
    #[serde(rename = "TH")]
    TimeHeadway,
    #[serde(rename = "TTC")]
    TimeToCollision,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub kind: BaselineKind,
    /// Seconds; `None` when the metric does not apply.
    pub value: Option<f64>,
}

impl BaselineResult {
    fn new(kind: BaselineKind, value: Option<f64>) -> Self {
        BaselineResult { kind, value }
    }

    pub fn is_defined(&self) -> bool {
        self.value.is_some()
    }

    /// 1/value, or 0 when undefined.
    pub fn inverse(&self) -> f64 {
        self.value.map_or(0.0, |v| 1.0 / v)
    }
}

/// TH = −Δl*/v₁ with Δl* = Δl + size correction.
pub fn time_headway(delta_l: f64, v_follower: f64, size_correction: f64) -> BaselineResult {
    time_headway_with_min_speed(delta_l, v_follower, size_correction, TH_MIN_SPEED)
}

pub fn time_headway_with_min_speed(
    delta_l: f64,
    v_follower: f64,
    size_correction: f64,
    min_speed: f64,
) -> BaselineResult {
    let gap = -(delta_l + size_correction);
    let value = (gap > 0.0 && v_follower > min_speed).then(|| gap / v_follower);
    BaselineResult::new(BaselineKind::TimeHeadway, value)
}

/// TTC = −Δl*/Δv, valid only for a positive gap and a closing speed.
pub fn time_to_collision(delta_l: f64, delta_v: f64, size_correction: f64) -> BaselineResult {
    time_to_collision_with_min_closing(delta_l, delta_v, size_correction, TTC_MIN_CLOSING_SPEED)
}

pub fn time_to_collision_with_min_closing(
    delta_l: f64,
    delta_v: f64,
    size_correction: f64,
    min_closing: f64,
) -> BaselineResult {
    let gap = -(delta_l + size_correction);
    let value = (gap > 0.0 && delta_v > min_closing).then(|| gap / delta_v);
    BaselineResult::new(BaselineKind::TimeToCollision, value)
}

//! Shared geometry and scene types.
//!
//! Paths are piecewise-linear polylines parametrized by arc length. Vehicles
//! are predicted to move along them, so every longitudinal quantity in the
//! crate (positions, gaps, uncertainty) is measured in path coordinates.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VehicleId(pub i64);

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn from_heading(heading: f64) -> Self {
        let (s, c) = heading.sin_cos();
        Vec2::new(c, s)
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (other - self).norm()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Rotates counter-clockwise by `angle` radians.
    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Maps an angle into (-π, π].
pub fn normalize_angle(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    // rem_euclid can return exactly 2π for tiny negative inputs
    if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec2,
    pub heading: f64,
}

/// Result of projecting a point onto a [`Path`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub arclength: f64,
    /// Euclidean distance between the point and its closest polyline point.
    pub distance: f64,
    /// Positive when the point lies left of the path direction.
    pub signed_offset: f64,
}

/// Piecewise-linear path with cumulative arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    points: Vec<Vec2>,
    cumulative: Vec<f64>,
}

impl Path {
    /// Builds a path from an ordered point list. Fails on fewer than two
    /// points, non-finite coordinates or zero-length segments.
    pub fn new(points: Vec<Vec2>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidPath(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidPath(format!("point {i} is not finite")));
        }
        let mut cumulative = Vec::with_capacity(points.len());
        cumulative.push(0.0);
        for (i, w) in points.windows(2).enumerate() {
            let len = w[0].distance(w[1]);
            if len <= 0.0 {
                return Err(Error::InvalidPath(format!(
                    "segment {i} has zero length"
                )));
            }
            let last = *cumulative.last().unwrap();
            cumulative.push(last + len);
        }
        Ok(Path { points, cumulative })
    }

    /// Builds a path from recorded positions, skipping points closer than
    /// `min_spacing` to the previously kept one.
    pub fn from_recorded(positions: &[Vec2], min_spacing: f64) -> Result<Self> {
        let mut kept: Vec<Vec2> = Vec::with_capacity(positions.len());
        for &p in positions {
            match kept.last() {
                Some(&last) if last.distance(p) < min_spacing => {}
                _ => kept.push(p),
            }
        }
        Path::new(kept)
    }

    /// Arc length of each recorded position on the path that
    /// [`Path::from_recorded`] builds from the same input.
    pub fn recorded_arclengths(positions: &[Vec2], min_spacing: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(positions.len());
        let mut kept: Option<(Vec2, f64)> = None;
        for &p in positions {
            match kept {
                Some((last, l)) if last.distance(p) < min_spacing => out.push(l + last.distance(p)),
                Some((last, l)) => {
                    let l = l + last.distance(p);
                    kept = Some((p, l));
                    out.push(l);
                }
                None => {
                    kept = Some((p, 0.0));
                    out.push(0.0);
                }
            }
        }
        out
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn cumulative_arclength(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn total_length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    fn segment_index(&self, l: f64) -> usize {
        let n = self.points.len();
        let after = self.cumulative.partition_point(|&c| c <= l);
        after.saturating_sub(1).min(n - 2)
    }

    fn segment_direction(&self, i: usize) -> Vec2 {
        let d = self.points[i + 1] - self.points[i];
        d * (1.0 / d.norm())
    }

    /// Position and heading at arc length `l`. Values outside `[0, total]`
    /// extrapolate along the first or last segment. At a vertex the outgoing
    /// segment defines the heading.
    pub fn pose_at_arclength(&self, l: f64) -> Pose {
        let i = self.segment_index(l);
        let dir = self.segment_direction(i);
        Pose {
            position: self.points[i] + dir * (l - self.cumulative[i]),
            heading: dir.angle(),
        }
    }

    /// Closest point on the polyline; ties resolve toward the smaller arc
    /// length.
    pub fn project(&self, point: Vec2) -> Projection {
        let mut best: Option<(f64, f64, f64)> = None; // (dist², arclength, signed)
        for i in 0..self.points.len() - 1 {
            let a = self.points[i];
            let d = self.points[i + 1] - a;
            let len2 = d.norm_squared();
            let t = ((point - a).dot(d) / len2).clamp(0.0, 1.0);
            let closest = a + d * t;
            let rel = point - closest;
            let dist2 = rel.norm_squared();
            if best.is_none_or(|(b, _, _)| dist2 < b) {
                let len = self.cumulative[i + 1] - self.cumulative[i];
                let side = d.cross(rel).signum();
                best = Some((dist2, self.cumulative[i] + t * len, side * dist2.sqrt()));
            }
        }
        let (dist2, arclength, signed_offset) = best.expect("path has a segment");
        Projection {
            arclength,
            distance: dist2.sqrt(),
            signed_offset,
        }
    }

    pub fn project_to_path(&self, point: Vec2) -> f64 {
        self.project(point).arclength
    }

    /// Appends a straight segment of `length` metres continuing the final
    /// segment's direction.
    pub fn extended(&self, length: f64) -> Path {
        if length <= 0.0 {
            return self.clone();
        }
        let n = self.points.len();
        let dir = self.segment_direction(n - 2);
        let mut points = self.points.clone();
        let mut cumulative = self.cumulative.clone();
        points.push(self.points[n - 1] + dir * length);
        cumulative.push(self.total_length() + length);
        Path { points, cumulative }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicState {
    pub position: Vec2,
    /// Radians in (-π, π].
    pub heading: f64,
    /// Longitudinal speed, m/s, never negative.
    pub velocity: f64,
    pub acceleration: f64,
    /// Position along the vehicle's own path, m.
    pub arclength: f64,
}

impl KinematicState {
    pub fn new(
        position: Vec2,
        heading: f64,
        velocity: f64,
        acceleration: f64,
        arclength: f64,
    ) -> Result<Self> {
        if !(velocity >= 0.0) || !velocity.is_finite() {
            return Err(Error::param("velocity", format!("must be finite and >= 0, got {velocity}")));
        }
        if !position.is_finite() || !heading.is_finite() || !arclength.is_finite() {
            return Err(Error::param("state", "non-finite component"));
        }
        Ok(KinematicState {
            position,
            heading: normalize_angle(heading),
            velocity,
            acceleration,
            arclength,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Participant {
    pub id: VehicleId,
    pub state: KinematicState,
    pub path: Arc<Path>,
}

/// All vehicles present at one instant.
#[derive(Debug, Clone)]
pub struct SceneSnapshot {
    pub time: f64,
    participants: Vec<Participant>,
}

impl SceneSnapshot {
    pub fn new(time: f64, participants: Vec<Participant>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(participants.len());
        for p in &participants {
            if !seen.insert(p.id) {
                return Err(Error::Data {
                    vehicle: p.id,
                    reason: "appears twice in the same scene".into(),
                });
            }
        }
        Ok(SceneSnapshot { time, participants })
    }

    pub fn participants(&self) -> &[Participant] {
        &self.participants
    }

    pub fn get(&self, id: VehicleId) -> Option<&Participant> {
        self.participants.iter().find(|p| p.id == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn straight() -> Path {
        Path::new(vec![Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0)]).unwrap()
    }

    fn l_shape() -> Path {
        Path::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(10.0, 0.0),
            Vec2::new(10.0, 10.0),
        ])
        .unwrap()
    }

    #[test]
    fn pose_interpolates_and_extrapolates() {
        let p = straight().pose_at_arclength(5.0);
        assert_eq!(p.position, Vec2::new(5.0, 0.0));
        assert_eq!(p.heading, 0.0);

        let p = straight().pose_at_arclength(12.0);
        assert_eq!(p.position, Vec2::new(12.0, 0.0));
        assert_eq!(p.heading, 0.0);

        let p = l_shape().pose_at_arclength(15.0);
        assert!((p.position.x - 10.0).abs() < 1e-12);
        assert!((p.position.y - 5.0).abs() < 1e-12);
        assert!((p.heading - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn vertex_uses_outgoing_segment() {
        let p = l_shape().pose_at_arclength(10.0);
        assert!((p.heading - PI / 2.0).abs() < 1e-12);
        // end of path keeps the last segment
        let p = l_shape().pose_at_arclength(20.0);
        assert!((p.heading - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn projection_examples() {
        assert_eq!(straight().project_to_path(Vec2::new(3.0, 2.0)), 3.0);
        assert_eq!(straight().project_to_path(Vec2::new(-5.0, 0.0)), 0.0);
        assert_eq!(l_shape().project_to_path(Vec2::new(11.0, 11.0)), 20.0);
    }

    #[test]
    fn projection_brute_force_oracle() {
        // dense sampling of the polyline as an independent check
        let path = l_shape();
        let q = Vec2::new(11.0, 11.0);
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..=200_000 {
            let l = 20.0 * k as f64 / 200_000.0;
            let pt = if l <= 10.0 { Vec2::new(l, 0.0) } else { Vec2::new(10.0, l - 10.0) };
            let d = pt.distance(q);
            if d < best.0 {
                best = (d, l);
            }
        }
        assert!((best.1 - path.project_to_path(q)).abs() < 1e-9);
        assert!((best.0 - path.project(q).distance).abs() < 1e-9);
    }

    #[test]
    fn projection_tie_prefers_smaller_arclength() {
        // point equidistant from both ends of a U
        let path = Path::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(10.0, 0.0),
            Vec2::new(10.0, 4.0),
            Vec2::new(0.0, 4.0),
        ])
        .unwrap();
        let proj = path.project(Vec2::new(5.0, 2.0));
        assert_eq!(proj.arclength, 5.0);
        assert!(proj.signed_offset > 0.0);
    }

    #[test]
    fn invalid_paths_rejected() {
        assert!(matches!(Path::new(vec![Vec2::ZERO]), Err(Error::InvalidPath(_))));
        assert!(matches!(
            Path::new(vec![Vec2::ZERO, Vec2::ZERO]),
            Err(Error::InvalidPath(_))
        ));
        let recorded = [Vec2::ZERO, Vec2::new(1e-4, 0.0), Vec2::new(1.0, 0.0)];
        let p = Path::from_recorded(&recorded, 1e-3).unwrap();
        assert_eq!(p.points().len(), 2);
    }

    #[test]
    fn extended_path_continues_straight() {
        let p = l_shape().extended(5.0);
        assert_eq!(p.total_length(), 25.0);
        assert_eq!(p.project_to_path(Vec2::new(10.0, 14.0)), 24.0);
    }

    #[test]
    fn angle_normalization() {
        assert_eq!(normalize_angle(PI), PI);
        assert!((normalize_angle(-PI) - PI).abs() < 1e-15);
        assert!((normalize_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert!((normalize_angle(0.1 + 4.0 * PI) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn scene_rejects_duplicate_ids() {
        let path = Arc::new(straight());
        let st = KinematicState::new(Vec2::ZERO, 0.0, 1.0, 0.0, 0.0).unwrap();
        let p = Participant { id: VehicleId(1), state: st, path };
        assert!(SceneSnapshot::new(0.0, vec![p.clone(), p]).is_err());
    }

    #[test]
    fn negative_velocity_rejected() {
        assert!(KinematicState::new(Vec2::ZERO, 0.0, -1.0, 0.0, 0.0).is_err());
    }

    /// Monotone x, bounded y: never self-intersecting.
    fn monotone_path() -> impl Strategy<Value = Path> {
        prop::collection::vec((0.5f64..5.0, -3.0f64..3.0), 1..8).prop_map(|steps| {
            let mut pts = vec![Vec2::ZERO];
            let mut x = 0.0;
            for (dx, y) in steps {
                x += dx;
                pts.push(Vec2::new(x, y));
            }
            Path::new(pts).unwrap()
        })
    }

    proptest! {
        #[test]
        fn project_pose_round_trip(path in monotone_path(), frac in 0.0f64..=1.0) {
            let l = frac * path.total_length();
            let pose = path.pose_at_arclength(l);
            let back = path.project_to_path(pose.position);
            prop_assert!((back - l).abs() < 1e-9, "l={l} back={back}");
        }

        #[test]
        fn pose_is_continuous(path in monotone_path(), frac in 0.0f64..=1.0, eps in 1e-9f64..1e-3) {
            let l = frac * path.total_length();
            let a = path.pose_at_arclength(l).position;
            let b = path.pose_at_arclength(l + eps).position;
            prop_assert!(a.distance(b) <= eps + 1e-9);
        }
    }
}

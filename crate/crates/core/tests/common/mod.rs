#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use riskspot::ingest::{dataset_from_records, smooth_dataset, RawTrajectoryRecord, SmoothingWidths, TrajectoryDataset, VehicleClass};
use riskspot::VehicleId;

pub const DT: f64 = 0.1;

/// `n` frames of vehicle `id`, position given per time.
pub fn track(id: i64, n: usize, pos: impl Fn(f64) -> (f64, f64)) -> Vec<RawTrajectoryRecord> {
    (0..n)
        .map(|k| {
            let t = k as f64 * DT;
            let (x, y) = pos(t);
            RawTrajectoryRecord {
                vehicle: VehicleId(id),
                frame: k as i64,
                timestamp: t,
                x,
                y,
                class: VehicleClass::Car,
            }
        })
        .collect()
}

/// Follower (id 1) and leader (id 2) on the x axis, same speed, centre
/// distance `gap`.
pub fn follower_pair(gap: f64, v: f64, n: usize) -> Vec<RawTrajectoryRecord> {
    let mut r = track(1, n, |t| (v * t, 0.0));
    r.extend(track(2, n, |t| (gap + v * t, 0.0)));
    r
}

/// Eastbound (1) and northbound (2) vehicles reaching the origin together
/// after 10 s, and a third (3) driving far away.
pub fn crossing(n: usize) -> Vec<RawTrajectoryRecord> {
    let mut r = track(1, n, |t| (-100.0 + 10.0 * t, 0.0));
    r.extend(track(2, n, |t| (0.0, -100.0 + 10.0 * t)));
    r.extend(track(3, n, |t| (-300.0 + 10.0 * t, 400.0)));
    r
}

pub fn smoothed(records: Vec<RawTrajectoryRecord>) -> TrajectoryDataset {
    let raw = dataset_from_records(records, DT).unwrap();
    smooth_dataset(&raw, SmoothingWidths::default()).unwrap()
}

/// NGSIM-style CSV in metres.
pub fn to_csv(records: &[RawTrajectoryRecord]) -> String {
    let mut s = String::from("Vehicle_ID,Frame_ID,Local_X,Local_Y,v_Class\n");
    for r in records {
        writeln!(s, "{},{},{},{},2", r.vehicle.0, r.frame, r.x, r.y).unwrap();
    }
    s
}

pub fn write_csv(dir: &Path, name: &str, records: &[RawTrajectoryRecord]) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, to_csv(records)).unwrap();
    path
}

/// Config keeping inputs in metres.
pub fn metric_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, format!("feet_to_meters = false\n{extra}")).unwrap();
    path
}

//! Trajectory loading, smoothing and dataset kinematics statistics.
//!
//! Input follows the NGSIM column layout by default. Positions are shifted
//! so the dataset bounding box starts at the origin, then velocity and
//! acceleration are derived by finite differences of the (smoothed)
//! position series.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, KinematicState, Path, Vec2, VehicleId};

pub const FEET_TO_METERS: f64 = 0.3048;
/// Recorded positions closer than this to the previous path vertex are not
/// new vertices, m.
pub const PATH_MIN_SPACING: f64 = 0.01;
/// Below this speed the heading is carried over from neighbouring samples.
const HEADING_MIN_SPEED: f64 = 1e-3;

/// CSV column names for each required field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ColumnMapping {
    pub vehicle_id: String,
    pub frame: String,
    pub x: String,
    pub y: String,
    /// Optional; vehicles default to `car` when absent.
    pub vehicle_class: Option<String>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            vehicle_id: "Vehicle_ID".into(),
            frame: "Frame_ID".into(),
            x: "Local_X".into(),
            y: "Local_Y".into(),
            vehicle_class: Some("v_Class".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleClass {
    Car,
    TruckBus,
    Motorbike,
}

impl VehicleClass {
    /// NGSIM codes: 1 motorcycle, 2 auto, 3 truck.
    fn from_code(code: &str) -> VehicleClass {
        match code.trim() {
            "1" => VehicleClass::Motorbike,
            "3" => VehicleClass::TruckBus,
            _ => VehicleClass::Car,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawTrajectoryRecord {
    pub vehicle: VehicleId,
    pub frame: i64,
    pub timestamp: f64,
    pub x: f64,
    pub y: f64,
    pub class: VehicleClass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleTrack {
    pub id: VehicleId,
    pub class: VehicleClass,
    pub first_frame: i64,
    /// One state per frame, starting at `first_frame`.
    pub states: Vec<KinematicState>,
}

impl VehicleTrack {
    pub fn last_frame(&self) -> i64 {
        self.first_frame + self.states.len() as i64 - 1
    }

    pub fn state_at_frame(&self, frame: i64) -> Option<&KinematicState> {
        let idx = frame.checked_sub(self.first_frame)?;
        usize::try_from(idx).ok().and_then(|i| self.states.get(i))
    }

    pub fn positions(&self) -> Vec<Vec2> {
        self.states.iter().map(|s| s.position).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDataset {
    /// Frame step, s.
    pub dt: f64,
    /// Sorted by vehicle id.
    pub tracks: Vec<VehicleTrack>,
    /// Offset subtracted from every input position, m.
    pub origin: Vec2,
    /// Vehicles dropped for having fewer than two frames.
    pub dropped_short: usize,
}

impl TrajectoryDataset {
    pub fn frame_range(&self) -> Option<(i64, i64)> {
        let first = self.tracks.iter().map(|t| t.first_frame).min()?;
        let last = self.tracks.iter().map(|t| t.last_frame()).max()?;
        Some((first, last))
    }

    pub fn time_range(&self) -> Option<(f64, f64)> {
        self.frame_range()
            .map(|(a, b)| (a as f64 * self.dt, b as f64 * self.dt))
    }

    pub fn track(&self, id: VehicleId) -> Option<&VehicleTrack> {
        self.tracks
            .binary_search_by_key(&id, |t| t.id)
            .ok()
            .map(|i| &self.tracks[i])
    }

    pub fn sample_count(&self) -> usize {
        self.tracks.iter().map(|t| t.states.len()).sum()
    }
}

/// Ingest options.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestOptions {
    pub columns: ColumnMapping,
    pub dt: f64,
    pub feet_to_meters: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions { columns: ColumnMapping::default(), dt: 0.1, feet_to_meters: true }
    }
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

fn parse_int(field: &str, line: u64, what: &str) -> Result<i64> {
    let f = field.trim();
    if let Ok(v) = f.parse::<i64>() {
        return Ok(v);
    }
    match f.parse::<f64>() {
        Ok(v) if v.fract() == 0.0 && v.abs() < 9.0e15 => Ok(v as i64),
        _ => Err(Error::Record { line, reason: format!("{what} `{f}` is not an integer") }),
    }
}

fn parse_float(field: &str, line: u64, what: &str) -> Result<f64> {
    let f = field.trim();
    match f.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Record { line, reason: format!("{what} `{f}` is not a finite number") }),
    }
}

/// Reads the raw records of a trajectory CSV.
pub fn read_records<R: Read>(source: R, options: &IngestOptions) -> Result<Vec<RawTrajectoryRecord>> {
    if !(options.dt > 0.0) {
        return Err(Error::param("dt", format!("must be > 0, got {}", options.dt)));
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers()?.clone();
    let cols = &options.columns;
    let id_col = column_index(&headers, &cols.vehicle_id)?;
    let frame_col = column_index(&headers, &cols.frame)?;
    let x_col = column_index(&headers, &cols.x)?;
    let y_col = column_index(&headers, &cols.y)?;
    let class_col = match &cols.vehicle_class {
        Some(name) => headers.iter().position(|h| h.trim() == name),
        None => None,
    };
    let scale = if options.feet_to_meters { FEET_TO_METERS } else { 1.0 };

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let get = |i: usize| record.get(i).unwrap_or("");
        let frame = parse_int(get(frame_col), line, "frame")?;
        out.push(RawTrajectoryRecord {
            vehicle: VehicleId(parse_int(get(id_col), line, "vehicle id")?),
            frame,
            timestamp: frame as f64 * options.dt,
            x: parse_float(get(x_col), line, "x")? * scale,
            y: parse_float(get(y_col), line, "y")? * scale,
            class: class_col.map_or(VehicleClass::Car, |i| VehicleClass::from_code(get(i))),
        });
    }
    Ok(out)
}

/// Loads a trajectory CSV into a dataset with unsmoothed kinematics.
pub fn parse_trajectories<R: Read>(source: R, options: &IngestOptions) -> Result<TrajectoryDataset> {
    let records = read_records(source, options)?;
    dataset_from_records(records, options.dt)
}

/// Groups records per vehicle, checks frame continuity, normalizes
/// positions and derives kinematics.
pub fn dataset_from_records(records: Vec<RawTrajectoryRecord>, dt: f64) -> Result<TrajectoryDataset> {
    let mut origin = Vec2::new(f64::INFINITY, f64::INFINITY);
    for r in &records {
        origin.x = origin.x.min(r.x);
        origin.y = origin.y.min(r.y);
    }
    if records.is_empty() {
        origin = Vec2::ZERO;
    }

    let mut grouped: BTreeMap<VehicleId, Vec<RawTrajectoryRecord>> = BTreeMap::new();
    for r in records {
        grouped.entry(r.vehicle).or_default().push(r);
    }

    let mut tracks = Vec::with_capacity(grouped.len());
    let mut dropped_short = 0;
    for (id, mut rows) in grouped {
        rows.sort_by_key(|r| r.frame);
        for w in rows.windows(2) {
            if w[1].frame == w[0].frame {
                return Err(Error::Data {
                    vehicle: id,
                    reason: format!("duplicate frame {}", w[0].frame),
                });
            }
            if w[1].frame != w[0].frame + 1 {
                return Err(Error::Data {
                    vehicle: id,
                    reason: format!("frame gap between {} and {}", w[0].frame, w[1].frame),
                });
            }
        }
        if rows.len() < 2 {
            dropped_short += 1;
            continue;
        }
        let positions: Vec<Vec2> = rows
            .iter()
            .map(|r| Vec2::new(r.x - origin.x, r.y - origin.y))
            .collect();
        let xs: Vec<f64> = positions.iter().map(|p| p.x).collect();
        let ys: Vec<f64> = positions.iter().map(|p| p.y).collect();
        let vx = differentiate(&xs, dt)?;
        let vy = differentiate(&ys, dt)?;
        let states = build_states(&positions, &vx, &vy, None, dt)?;
        tracks.push(VehicleTrack { id, class: rows[0].class, first_frame: rows[0].frame, states });
    }
    if dropped_short > 0 {
        warn!("dropped {dropped_short} vehicle(s) with fewer than 2 frames");
    }
    Ok(TrajectoryDataset { dt, tracks, origin, dropped_short })
}

/// Assembles states from positions and velocity components. Acceleration
/// is the derivative of speed unless given.
fn build_states(
    positions: &[Vec2],
    vx: &[f64],
    vy: &[f64],
    acceleration: Option<Vec<f64>>,
    dt: f64,
) -> Result<Vec<KinematicState>> {
    let speed: Vec<f64> = vx.iter().zip(vy).map(|(x, y)| x.hypot(*y)).collect();
    let acceleration = match acceleration {
        Some(a) => a,
        None => differentiate(&speed, dt)?,
    };
    let headings = headings(vx, vy, positions);
    let arclengths = Path::recorded_arclengths(positions, PATH_MIN_SPACING);
    positions
        .iter()
        .enumerate()
        .map(|(i, &p)| KinematicState::new(p, headings[i], speed[i], acceleration[i], arclengths[i]))
        .collect()
}

/// Direction of travel per sample; standing samples inherit the nearest
/// moving sample's heading (earlier first), or the overall displacement.
fn headings(vx: &[f64], vy: &[f64], positions: &[Vec2]) -> Vec<f64> {
    let n = vx.len();
    let mut out: Vec<Option<f64>> = (0..n)
        .map(|i| (vx[i].hypot(vy[i]) > HEADING_MIN_SPEED).then(|| vy[i].atan2(vx[i])))
        .collect();
    let mut last = None;
    for h in out.iter_mut() {
        match h {
            Some(v) => last = Some(*v),
            None => *h = last,
        }
    }
    let first_valid = out.iter().flatten().next().copied();
    let fallback = first_valid.unwrap_or_else(|| {
        let d = positions[n - 1] - positions[0];
        if d.norm() > 0.0 { d.angle() } else { 0.0 }
    });
    out.into_iter().map(|h| normalize_angle(h.unwrap_or(fallback))).collect()
}

/// Padding on each side of a smoothed series, in smoothing widths. The seed
/// transient decays to e^{-12} of its size before the data starts.
const EMA_PAD_WIDTHS: f64 = 12.0;

/// Sample `i` of the odd-periodic extension of `series`: the series is
/// point-reflected about its end samples over and over, so affine series
/// extend to the same line.
fn odd_extension(series: &[f64], i: i64) -> f64 {
    let n = series.len() as i64;
    if n == 1 {
        return series[0];
    }
    let period = 2 * (n - 1);
    let first = series[0];
    let last = series[(n - 1) as usize];
    let q = i.div_euclid(period);
    let r = i.rem_euclid(period);
    let glide = q as f64 * 2.0 * (last - first);
    if r < n {
        series[r as usize] + glide
    } else {
        2.0 * last - series[(period - r) as usize] + glide
    }
}

/// Forward exponential moving average followed by a backward pass over the
/// forward result, with λ = Δt/T clamped to (0, 1].
///
/// Both ends are padded with the odd-periodic extension of the series so
/// the passes start settled; constant and linear series come out unchanged
/// up to the decayed seed transient.
pub fn ema_smooth_bidirectional(series: &[f64], width: f64, dt: f64) -> Result<Vec<f64>> {
    if !(width > 0.0) {
        return Err(Error::param("smoothing_width", format!("must be > 0, got {width}")));
    }
    if !(dt > 0.0) {
        return Err(Error::param("dt", format!("must be > 0, got {dt}")));
    }
    if series.is_empty() {
        return Err(Error::param("series", "must not be empty"));
    }
    let lambda = (dt / width).min(1.0);
    let keep = 1.0 - lambda;
    let n = series.len() as i64;
    let pad = (EMA_PAD_WIDTHS * width / dt).ceil().min(1e7) as i64;
    let mut padded = Vec::with_capacity((n + 2 * pad) as usize);
    let mut acc = odd_extension(series, -pad);
    for i in -pad..n + pad {
        acc = lambda * odd_extension(series, i) + keep * acc;
        padded.push(acc);
    }
    let mut acc = *padded.last().unwrap();
    for y in padded.iter_mut().rev() {
        acc = lambda * *y + keep * acc;
        *y = acc;
    }
    Ok(padded[pad as usize..(pad + n) as usize].to_vec())
}

/// Central differences inside, one-sided at both ends.
pub fn differentiate(series: &[f64], dt: f64) -> Result<Vec<f64>> {
    let n = series.len();
    if n < 2 {
        return Err(Error::param("series", format!("need at least 2 samples, got {n}")));
    }
    if !(dt > 0.0) {
        return Err(Error::param("dt", format!("must be > 0, got {dt}")));
    }
    let mut out = Vec::with_capacity(n);
    out.push((series[1] - series[0]) / dt);
    for i in 1..n - 1 {
        out.push((series[i + 1] - series[i - 1]) / (2.0 * dt));
    }
    out.push((series[n - 1] - series[n - 2]) / dt);
    Ok(out)
}

/// Smoothing widths for position, velocity and acceleration, s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingWidths {
    pub position: f64,
    pub velocity: f64,
    pub acceleration: f64,
}

impl Default for SmoothingWidths {
    fn default() -> Self {
        SmoothingWidths { position: 10.0, velocity: 20.0, acceleration: 80.0 }
    }
}

/// Re-derives every track's kinematics from smoothed positions.
pub fn smooth_dataset(dataset: &TrajectoryDataset, widths: SmoothingWidths) -> Result<TrajectoryDataset> {
    let dt = dataset.dt;
    let tracks = dataset
        .tracks
        .iter()
        .map(|track| {
            let xs: Vec<f64> = track.states.iter().map(|s| s.position.x).collect();
            let ys: Vec<f64> = track.states.iter().map(|s| s.position.y).collect();
            let xs = ema_smooth_bidirectional(&xs, widths.position, dt)?;
            let ys = ema_smooth_bidirectional(&ys, widths.position, dt)?;
            let vx = ema_smooth_bidirectional(&differentiate(&xs, dt)?, widths.velocity, dt)?;
            let vy = ema_smooth_bidirectional(&differentiate(&ys, dt)?, widths.velocity, dt)?;
            let speed: Vec<f64> = vx.iter().zip(&vy).map(|(x, y)| x.hypot(*y)).collect();
            let accel = ema_smooth_bidirectional(&differentiate(&speed, dt)?, widths.acceleration, dt)?;
            let positions: Vec<Vec2> = xs.iter().zip(&ys).map(|(&x, &y)| Vec2::new(x, y)).collect();
            let states = build_states(&positions, &vx, &vy, Some(accel), dt)?;
            Ok(VehicleTrack { states, ..track.clone() })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectoryDataset { tracks, ..dataset.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatVariable {
    Velocity,
    Acceleration,
    /// −Δl, the positive centre gap to the front vehicle.
    Gap,
    DeltaV,
}

impl StatVariable {
    pub fn default_bin_width(self) -> f64 {
        match self {
            StatVariable::Velocity => 1.0,
            StatVariable::Acceleration => 0.1,
            StatVariable::Gap => 1.0,
            StatVariable::DeltaV => 0.5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StatVariable::Velocity => "v",
            StatVariable::Acceleration => "a",
            StatVariable::Gap => "neg_delta_l",
            StatVariable::DeltaV => "delta_v",
        }
    }
}

/// Binned distribution of one scalar variable. Bin `i` covers
/// `[bin_edges[i], bin_edges[i+1])`, edges at multiples of `bin_width`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramStats {
    pub variable: StatVariable,
    pub bin_width: f64,
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub pmf: Vec<f64>,
    pub cdf: Vec<f64>,
    pub samples: usize,
    pub mean: f64,
    pub std_dev: f64,
}

impl HistogramStats {
    pub fn from_samples(variable: StatVariable, values: &[f64], bin_width: f64) -> Result<Self> {
        if !(bin_width > 0.0) {
            return Err(Error::param("bin_width", format!("must be > 0, got {bin_width}")));
        }
        let values: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        if values.is_empty() {
            return Ok(HistogramStats {
                variable,
                bin_width,
                bin_edges: Vec::new(),
                counts: Vec::new(),
                pmf: Vec::new(),
                cdf: Vec::new(),
                samples: 0,
                mean: 0.0,
                std_dev: 0.0,
            });
        }
        // tolerance keeps values like 0.3/0.1 in their intended bin
        let index = |v: f64| (v / bin_width + 1e-9).floor() as i64;
        let lo = values.iter().copied().map(index).min().unwrap();
        let hi = values.iter().copied().map(index).max().unwrap();
        let mut counts = vec![0u64; (hi - lo + 1) as usize];
        for &v in &values {
            counts[(index(v) - lo) as usize] += 1;
        }
        let n = values.len() as f64;
        let pmf: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
        let mut cdf = Vec::with_capacity(pmf.len());
        let mut running = 0u64;
        for &c in &counts {
            running += c;
            cdf.push(running as f64 / n);
        }
        let bin_edges = (lo..=hi + 1).map(|i| i as f64 * bin_width).collect();
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Ok(HistogramStats {
            variable,
            bin_width,
            bin_edges,
            counts,
            pmf,
            cdf,
            samples: values.len(),
            mean,
            std_dev: var.sqrt(),
        })
    }

    pub fn is_empty(&self) -> bool {
        self.samples == 0
    }

    /// Lower edge of the bin with the most mass among bins whose lower edge
    /// lies in `[lo, hi)`.
    pub fn mode_in(&self, lo: f64, hi: f64) -> Option<f64> {
        (0..self.counts.len())
            .filter(|&i| self.bin_edges[i] >= lo && self.bin_edges[i] < hi)
            .max_by(|&a, &b| self.counts[a].cmp(&self.counts[b]).then(b.cmp(&a)))
            .map(|i| self.bin_edges[i])
    }
}

/// Gap and speed difference to the front vehicle at one ego sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontPairSample {
    pub ego: VehicleId,
    pub frame: i64,
    pub delta_l: f64,
    pub delta_v: f64,
}

/// Velocity, acceleration, gap and speed-difference histograms.
pub fn kinematics_statistics(
    dataset: &TrajectoryDataset,
    front_pairs: &[FrontPairSample],
) -> Result<Vec<HistogramStats>> {
    if dataset.sample_count() == 0 {
        return Err(Error::EmptyStatistics);
    }
    let states = || dataset.tracks.iter().flat_map(|t| t.states.iter());
    let v: Vec<f64> = states().map(|s| s.velocity).collect();
    let a: Vec<f64> = states().map(|s| s.acceleration).collect();
    let gap: Vec<f64> = front_pairs.iter().map(|p| -p.delta_l).collect();
    let dv: Vec<f64> = front_pairs.iter().map(|p| p.delta_v).collect();
    [
        (StatVariable::Velocity, v),
        (StatVariable::Acceleration, a),
        (StatVariable::Gap, gap),
        (StatVariable::DeltaV, dv),
    ]
    .into_iter()
    .map(|(var, values)| HistogramStats::from_samples(var, &values, var.default_bin_width()))
    .collect()
}

/// One row per bin: `variable,bin_low,bin_high,pmf,cdf`.
pub fn write_statistics_csv<W: Write>(writer: W, stats: &[HistogramStats]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["variable", "bin_low", "bin_high", "pmf", "cdf"])?;
    for h in stats {
        for i in 0..h.counts.len() {
            w.write_record([
                h.variable.name().to_string(),
                h.bin_edges[i].to_string(),
                h.bin_edges[i + 1].to_string(),
                h.pmf[i].to_string(),
                h.cdf[i].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    const HEADER: &str = "Vehicle_ID,Frame_ID,Global_Time,Local_X,Local_Y,v_Class\n";

    fn meters() -> IngestOptions {
        IngestOptions { feet_to_meters: false, ..IngestOptions::default() }
    }

    #[test]
    fn two_row_file() {
        let csv = format!("{HEADER}1,10,0,100,200,2\n1,11,100,101,200,2\n");
        let ds = parse_trajectories(csv.as_bytes(), &meters()).unwrap();
        assert_eq!(ds.tracks.len(), 1);
        let t = &ds.tracks[0];
        assert_eq!(t.states[0].position, Vec2::new(0.0, 0.0));
        assert_eq!(t.states[1].position, Vec2::new(1.0, 0.0));
        assert!((t.states[0].velocity - 10.0).abs() < 1e-9);
        assert_eq!(t.class, VehicleClass::Car);
        assert_eq!(ds.frame_range(), Some((10, 11)));
    }

    #[test]
    fn column_order_does_not_matter() {
        let a = format!("{HEADER}1,1,0,3,4,2\n1,2,0,4,4,2\n2,1,0,0,0,3\n2,2,0,0,1,3\n");
        let b = "Local_Y,v_Class,Local_X,Frame_ID,Vehicle_ID\n4,2,3,1,1\n4,2,4,2,1\n0,3,0,1,2\n1,3,0,2,2\n";
        let da = parse_trajectories(a.as_bytes(), &meters()).unwrap();
        let db = parse_trajectories(b.as_bytes(), &meters()).unwrap();
        assert_eq!(da, db);
    }

    #[test]
    fn custom_mapping() {
        let csv = "id,f,east,north\n1,1,0,0\n1,2,1,0\n";
        let opts = IngestOptions {
            columns: ColumnMapping {
                vehicle_id: "id".into(),
                frame: "f".into(),
                x: "east".into(),
                y: "north".into(),
                vehicle_class: None,
            },
            ..meters()
        };
        let ds = parse_trajectories(csv.as_bytes(), &opts).unwrap();
        assert_eq!(ds.tracks[0].states.len(), 2);
    }

    #[test]
    fn feet_are_converted() {
        let csv = format!("{HEADER}1,1,0,0,0,2\n1,2,0,10,0,2\n");
        let ds = parse_trajectories(csv.as_bytes(), &IngestOptions::default()).unwrap();
        assert!((ds.tracks[0].states[1].position.x - 3.048).abs() < 1e-12);
    }

    #[test]
    fn duplicate_frame_is_an_error() {
        let csv = format!("{HEADER}7,1,0,0,0,2\n7,1,0,1,0,2\n");
        match parse_trajectories(csv.as_bytes(), &meters()) {
            Err(Error::Data { vehicle, .. }) => assert_eq!(vehicle, VehicleId(7)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn frame_gap_is_an_error() {
        let csv = format!("{HEADER}7,1,0,0,0,2\n7,3,0,1,0,2\n");
        assert!(matches!(parse_trajectories(csv.as_bytes(), &meters()), Err(Error::Data { .. })));
    }

    #[test]
    fn missing_column_named() {
        let csv = "Vehicle_ID,Frame_ID,Local_X\n1,1,0\n";
        match parse_trajectories(csv.as_bytes(), &meters()) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "Local_Y"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unordered_rows_are_sorted_and_singletons_dropped() {
        let csv = format!("{HEADER}1,3,0,2,0,2\n1,1,0,0,0,2\n1,2,0,1,0,2\n9,5,0,7,7,2\n");
        let ds = parse_trajectories(csv.as_bytes(), &meters()).unwrap();
        assert_eq!(ds.tracks.len(), 1);
        assert_eq!(ds.dropped_short, 1);
        let xs: Vec<f64> = ds.tracks[0].states.iter().map(|s| s.position.x).collect();
        assert_eq!(xs, vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn ema_constant_is_fixed_point() {
        let out = ema_smooth_bidirectional(&[3.5; 50], 10.0, 0.1).unwrap();
        assert!(out.iter().all(|&x| (x - 3.5).abs() < 1e-12));
    }

    #[test]
    fn ema_impulse_response_is_symmetric() {
        let mut x = vec![0.0; 101];
        x[50] = 1.0;
        let y = ema_smooth_bidirectional(&x, 0.2, 0.1).unwrap();
        for k in 0..=50 {
            assert!((y[50 - k] - y[50 + k]).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn ema_reduces_noise_variance() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal = Normal::new(0.0, 1.0).unwrap();
            let x: Vec<f64> = (0..2000).map(|_| normal.sample(&mut rng)).collect();
            let y = ema_smooth_bidirectional(&x, 10.0, 0.1).unwrap();
            let var = |s: &[f64]| {
                let m = s.iter().sum::<f64>() / s.len() as f64;
                s.iter().map(|v| (v - m).powi(2)).sum::<f64>() / s.len() as f64
            };
            assert!(var(&y) < var(&x));
        }
    }

    #[test]
    fn odd_extension_continues_lines() {
        let x = [1.0, 3.0, 5.0, 7.0];
        for i in -20..20 {
            assert_eq!(odd_extension(&x, i), 1.0 + 2.0 * i as f64);
        }
        let x = [0.0, 2.0, 1.0];
        assert_eq!(odd_extension(&x, -1), -2.0);
        assert_eq!(odd_extension(&x, 3), 0.0);
        assert_eq!(odd_extension(&[4.0], -7), 4.0);
    }

    #[test]
    fn ema_keeps_short_ramps_up_to_the_ends() {
        // 30 s of data against a 10 s width
        let x: Vec<f64> = (0..300).map(|i| 10.0 * i as f64 * 0.1).collect();
        let y = ema_smooth_bidirectional(&x, 10.0, 0.1).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
    }

    #[test]
    fn ema_parameter_errors() {
        assert!(ema_smooth_bidirectional(&[1.0], 0.0, 0.1).is_err());
        assert!(ema_smooth_bidirectional(&[1.0], 1.0, 0.0).is_err());
        assert!(ema_smooth_bidirectional(&[], 1.0, 0.1).is_err());
    }

    #[test]
    fn ema_preserves_monotonicity() {
        let x: Vec<f64> = (0..300).map(|i| (i as f64 * 0.05).exp().min(1e3)).collect();
        let y = ema_smooth_bidirectional(&x, 1.0, 0.1).unwrap();
        assert!(y.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn differentiate_examples() {
        let ramp: Vec<f64> = (0..20).map(|i| 3.0 * i as f64 * 0.1).collect();
        assert!(differentiate(&ramp, 0.1).unwrap().iter().all(|d| (d - 3.0).abs() < 1e-12));
        assert!(differentiate(&[2.0; 5], 0.1).unwrap().iter().all(|&d| d == 0.0));

        let t: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let quad: Vec<f64> = t.iter().map(|t| 0.5 * 2.0 * t * t).collect();
        let d = differentiate(&quad, 0.1).unwrap();
        for i in 1..49 {
            assert!((d[i] - 2.0 * t[i]).abs() < 1e-9);
        }
        assert!(differentiate(&[1.0], 0.1).is_err());
    }

    fn straight_track(v: f64, n: usize) -> TrajectoryDataset {
        let records = (0..n)
            .map(|i| RawTrajectoryRecord {
                vehicle: VehicleId(1),
                frame: i as i64,
                timestamp: i as f64 * 0.1,
                x: v * i as f64 * 0.1,
                y: 5.0,
                class: VehicleClass::Car,
            })
            .collect();
        dataset_from_records(records, 0.1).unwrap()
    }

    #[test]
    fn smoothing_keeps_constant_velocity() {
        let n = 40_000;
        let ds = smooth_dataset(&straight_track(12.0, n), SmoothingWidths::default()).unwrap();
        let states = &ds.tracks[0].states;
        for s in &states[n / 2 - 500..n / 2 + 500] {
            assert!((s.velocity - 12.0).abs() < 1e-6, "v = {}", s.velocity);
            assert!(s.acceleration.abs() < 1e-6, "a = {}", s.acceleration);
            assert!(s.heading.abs() < 1e-9);
        }
    }

    #[test]
    fn smoothing_keeps_constant_velocity_on_short_tracks() {
        let ds = smooth_dataset(&straight_track(12.0, 300), SmoothingWidths::default()).unwrap();
        for s in &ds.tracks[0].states {
            assert!((s.velocity - 12.0).abs() < 1e-3, "v = {}", s.velocity);
            assert!(s.acceleration.abs() < 1e-3, "a = {}", s.acceleration);
        }
    }

    #[test]
    fn smoothing_keeps_standing_vehicle_still() {
        let ds = smooth_dataset(&straight_track(0.0, 200), SmoothingWidths::default()).unwrap();
        assert!(ds.tracks[0].states.iter().all(|s| s.velocity == 0.0 && s.acceleration == 0.0));
    }

    #[test]
    fn smoothing_beats_raw_differentiation_on_noisy_data() {
        let n = 6000;
        let dt = 0.1;
        let omega = 2.0 * std::f64::consts::PI / 300.0;
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let noise = Normal::new(0.0, 0.6).unwrap();
            let truth_x = |t: f64| 10.0 * t + 20.0 * (omega * t).sin();
            let records: Vec<RawTrajectoryRecord> = (0..n)
                .map(|i| {
                    let t = i as f64 * dt;
                    RawTrajectoryRecord {
                        vehicle: VehicleId(1),
                        frame: i as i64,
                        timestamp: t,
                        x: truth_x(t) + noise.sample(&mut rng),
                        y: noise.sample(&mut rng),
                        class: VehicleClass::Car,
                    }
                })
                .collect();
            let raw = dataset_from_records(records, dt).unwrap();
            let smooth = smooth_dataset(&raw, SmoothingWidths::default()).unwrap();
            let rms = |ds: &TrajectoryDataset| {
                let range = n / 4..3 * n / 4;
                let sum: f64 = range
                    .clone()
                    .map(|i| {
                        let t = i as f64 * dt;
                        let v_true = 10.0 + 20.0 * omega * (omega * t).cos();
                        (ds.tracks[0].states[i].velocity - v_true).powi(2)
                    })
                    .sum();
                (sum / range.len() as f64).sqrt()
            };
            assert!(rms(&smooth) < rms(&raw), "seed {seed}");
        }
    }

    #[test]
    fn histogram_examples() {
        let h = HistogramStats::from_samples(StatVariable::Velocity, &[0.0; 10], 1.0).unwrap();
        assert_eq!(h.bin_edges, vec![0.0, 1.0]);
        assert_eq!(h.pmf, vec![1.0]);

        let h = HistogramStats::from_samples(StatVariable::Velocity, &[12.0, 12.0, 12.5], 1.0).unwrap();
        assert_eq!(h.bin_edges, vec![12.0, 13.0]);
        assert_eq!(h.cdf, vec![1.0]);

        let h = HistogramStats::from_samples(StatVariable::Acceleration, &[0.3, -0.25, 0.05], 0.1).unwrap();
        assert!((h.pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(h.counts.len(), 7);
        assert_eq!(*h.counts.last().unwrap(), 1);
        assert_eq!(h.cdf.last().copied(), Some(1.0));
    }

    #[test]
    fn statistics_need_samples() {
        let ds = TrajectoryDataset { dt: 0.1, tracks: vec![], origin: Vec2::ZERO, dropped_short: 0 };
        assert!(matches!(kinematics_statistics(&ds, &[]), Err(Error::EmptyStatistics)));
    }

    #[test]
    fn statistics_for_standing_and_cruising_vehicles() {
        let ds = smooth_dataset(&straight_track(0.0, 100), SmoothingWidths::default()).unwrap();
        let stats = kinematics_statistics(&ds, &[]).unwrap();
        assert_eq!(stats[0].bin_edges[0], 0.0);
        assert_eq!(stats[0].pmf, vec![1.0]);
        assert!(stats[2].is_empty());
    }
}

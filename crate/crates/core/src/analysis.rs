//! Dataset-wide evaluation of a risk metric, criticality binning,
//! criticality maps and per-bin velocity histograms.
//!
//! Every vehicle takes the ego role at every frame it is present. Baseline
//! metrics are ranked by their inverse (1/TH, 1/TTC) so a larger value is
//! always more critical; bin boundaries are reported in natural units.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{time_headway_with_min_speed, time_to_collision_with_min_closing};
use crate::error::{Error, Result};
use crate::geometry::{Participant, Path, SceneSnapshot, Vec2, VehicleId};
use crate::ingest::{FrontPairSample, HistogramStats, StatVariable, TrajectoryDataset, PATH_MIN_SPACING};
use crate::predict::{front_vehicle, neighbors_in_range, predict, BehaviorModel, PredictedTrajectory, PredictionGrid};
use crate::survival::{scene_risk, RiskConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "RSD_front")]
    RsdFront,
    #[serde(rename = "RSD_all")]
    RsdAll,
    #[serde(rename = "TH")]
    Th,
    #[serde(rename = "TTC")]
    Ttc,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::RsdFront, Metric::RsdAll, Metric::Th, Metric::Ttc];

    pub fn name(self) -> &'static str {
        match self {
            Metric::RsdFront => "RSD_front",
            Metric::RsdAll => "RSD_all",
            Metric::Th => "TH",
            Metric::Ttc => "TTC",
        }
    }

    /// Converts a ranking value back into the metric's own unit.
    pub fn natural(self, value: f64) -> f64 {
        match self {
            Metric::Th | Metric::Ttc => 1.0 / value,
            Metric::RsdFront | Metric::RsdAll => value,
        }
    }

    pub fn is_rsd(self) -> bool {
        matches!(self, Metric::RsdFront | Metric::RsdAll)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown metric `{s}` (expected RSD_front, RSD_all, TH or TTC)")))
    }
}

/// Per-vehicle paths and frame lookup for building scenes.
pub struct SceneIndex<'a> {
    dataset: &'a TrajectoryDataset,
    paths: Vec<Arc<Path>>,
}

impl<'a> SceneIndex<'a> {
    /// `extension` is appended to every path end so vehicles ahead of a
    /// track's last recorded point can still be projected onto it.
    pub fn new(dataset: &'a TrajectoryDataset, extension: f64) -> Result<Self> {
        let paths = dataset
            .tracks
            .iter()
            .map(|t| {
                let positions = t.positions();
                let path = match Path::from_recorded(&positions, PATH_MIN_SPACING) {
                    Ok(p) => p,
                    Err(_) => {
                        // standing for the whole recording
                        let p0 = positions[0];
                        let dir = Vec2::from_heading(t.states[0].heading);
                        Path::new(vec![p0, p0 + dir])?
                    }
                };
                Ok(Arc::new(path.extended(extension)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SceneIndex { dataset, paths })
    }

    pub fn dataset(&self) -> &TrajectoryDataset {
        self.dataset
    }

    pub fn frames(&self) -> Vec<i64> {
        match self.dataset.frame_range() {
            Some((a, b)) => (a..=b).collect(),
            None => Vec::new(),
        }
    }

    pub fn scene(&self, frame: i64) -> Result<SceneSnapshot> {
        let participants = self
            .dataset
            .tracks
            .iter()
            .zip(&self.paths)
            .filter_map(|(t, path)| {
                t.state_at_frame(frame).map(|s| Participant {
                    id: t.id,
                    state: *s,
                    path: Arc::clone(path),
                })
            })
            .collect();
        SceneSnapshot::new(frame as f64 * self.dataset.dt, participants)
    }
}

/// Settings for a dataset run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisConfig {
    pub risk: RiskConfig,
    pub grid: PredictionGrid,
    /// Behavior assumed for partners; the ego always keeps its velocity.
    pub partner_behavior: BehaviorModel,
    pub sensor_range: f64,
    pub lane_threshold: f64,
    pub size_correction: f64,
    pub th_min_speed: f64,
    pub ttc_min_closing_speed: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            risk: RiskConfig::default(),
            grid: PredictionGrid::default(),
            partner_behavior: BehaviorModel::ConstantVelocity,
            sensor_range: crate::predict::DEFAULT_SENSOR_RANGE,
            lane_threshold: crate::predict::DEFAULT_LANE_THRESHOLD,
            size_correction: crate::baselines::DEFAULT_SIZE_CORRECTION,
            th_min_speed: crate::baselines::TH_MIN_SPEED,
            ttc_min_closing_speed: crate::baselines::TTC_MIN_CLOSING_SPEED,
        }
    }
}

impl AnalysisConfig {
    fn path_extension(&self) -> f64 {
        self.sensor_range + 10.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEvent {
    pub ego: VehicleId,
    pub frame: i64,
    pub t: f64,
    pub position: Vec2,
    pub ego_velocity: f64,
    /// Larger is more critical: R for RSD, 1/TH or 1/TTC for baselines.
    pub metric_value: f64,
}

impl RiskEvent {
    fn key(&self) -> (i64, VehicleId) {
        (self.frame, self.ego)
    }
}

/// Events of one run plus the number of (ego, frame) samples inspected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub metric: Metric,
    pub events: Vec<RiskEvent>,
    pub samples: usize,
}

/// Front-vehicle gap and speed difference for every ego sample that has
/// one.
pub fn front_pairs(dataset: &TrajectoryDataset, sensor_range: f64, lane_threshold: f64) -> Result<Vec<FrontPairSample>> {
    let index = SceneIndex::new(dataset, sensor_range + 10.0)?;
    let per_frame = index
        .frames()
        .into_par_iter()
        .map(|frame| {
            let scene = index.scene(frame)?;
            let mut out = Vec::new();
            for p in scene.participants() {
                if let Some(f) = front_vehicle(&scene, p.id, sensor_range, lane_threshold)? {
                    out.push(FrontPairSample { ego: p.id, frame, delta_l: f.delta_l, delta_v: f.delta_v });
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_frame.into_iter().flatten().collect())
}

fn frame_events(index: &SceneIndex<'_>, frame: i64, metric: Metric, config: &AnalysisConfig) -> Result<(Vec<RiskEvent>, usize)> {
    let scene = index.scene(frame)?;
    let parts = scene.participants();
    let mut events = Vec::with_capacity(parts.len());

    let predict_all = |behavior: BehaviorModel| -> Result<HashMap<VehicleId, PredictedTrajectory>> {
        parts
            .iter()
            .map(|p| {
                let tr = predict(p.id, &p.state, Arc::clone(&p.path), behavior, &config.risk.collision.growth, config.grid)?;
                Ok((p.id, tr))
            })
            .collect()
    };
    let (ego_pred, partner_pred) = if metric.is_rsd() {
        let ego = predict_all(BehaviorModel::ConstantVelocity)?;
        let partner = if config.partner_behavior == BehaviorModel::ConstantVelocity {
            None
        } else {
            Some(predict_all(config.partner_behavior)?)
        };
        (ego, partner)
    } else {
        (HashMap::new(), None)
    };
    let partner_of = |id: VehicleId| partner_pred.as_ref().unwrap_or(&ego_pred)[&id].clone();

    for p in parts {
        let value = match metric {
            Metric::Th | Metric::Ttc => {
                let Some(front) = front_vehicle(&scene, p.id, config.sensor_range, config.lane_threshold)? else {
                    continue;
                };
                let result = if metric == Metric::Th {
                    time_headway_with_min_speed(front.delta_l, p.state.velocity, config.size_correction, config.th_min_speed)
                } else {
                    time_to_collision_with_min_closing(
                        front.delta_l,
                        front.delta_v,
                        config.size_correction,
                        config.ttc_min_closing_speed,
                    )
                };
                if !result.is_defined() {
                    continue;
                }
                result.inverse()
            }
            Metric::RsdFront | Metric::RsdAll => {
                let partner_ids: Vec<VehicleId> = if metric == Metric::RsdFront {
                    front_vehicle(&scene, p.id, config.sensor_range, config.lane_threshold)?
                        .map(|f| vec![f.vehicle])
                        .unwrap_or_default()
                } else {
                    neighbors_in_range(&scene, p.id, config.sensor_range)?
                };
                let partners: Vec<PredictedTrajectory> = partner_ids.into_iter().map(partner_of).collect();
                scene_risk(scene.time, &ego_pred[&p.id], &partners, &config.risk)?.risk
            }
        };
        events.push(RiskEvent {
            ego: p.id,
            frame,
            t: scene.time,
            position: p.state.position,
            ego_velocity: p.state.velocity,
            metric_value: value,
        });
    }
    Ok((events, parts.len()))
}

/// Runs `metric` with every vehicle as ego at every frame. Events come out
/// ordered by (frame, ego id) whatever the thread schedule.
pub fn evaluate_dataset(dataset: &TrajectoryDataset, metric: Metric, config: &AnalysisConfig) -> Result<Evaluation> {
    config.risk.collision.validate()?;
    let index = SceneIndex::new(dataset, config.path_extension())?;
    let per_frame = index
        .frames()
        .into_par_iter()
        .map(|frame| frame_events(&index, frame, metric, config))
        .collect::<Result<Vec<_>>>()?;
    let samples = per_frame.iter().map(|(_, n)| n).sum();
    let events = per_frame.into_iter().flat_map(|(e, _)| e).collect();
    Ok(Evaluation { metric, events, samples })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalityLabel {
    Dangerous,
    Offensive,
    Uncomfortable,
    Noticeable,
}

impl CriticalityLabel {
    pub const ORDER: [CriticalityLabel; 4] = [
        CriticalityLabel::Dangerous,
        CriticalityLabel::Offensive,
        CriticalityLabel::Uncomfortable,
        CriticalityLabel::Noticeable,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinningMode {
    Fixed,
    Matched,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalityBin {
    pub label: CriticalityLabel,
    /// Fixed mode: interval bounds. Matched mode: natural value of the
    /// first (most critical) member; `None` for an empty bin.
    pub boundary_low: Option<f64>,
    /// Fixed mode: interval bounds. Matched mode: natural value of the last
    /// member.
    pub boundary_high: Option<f64>,
    /// Ordered most to least critical.
    pub members: Vec<RiskEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalityBinning {
    pub metric: Metric,
    pub mode: BinningMode,
    /// Most critical first.
    pub bins: Vec<CriticalityBin>,
    pub unbinned_count: usize,
}

impl CriticalityBinning {
    pub fn counts(&self) -> [usize; 4] {
        let mut c = [0; 4];
        for (i, b) in self.bins.iter().enumerate() {
            c[i] = b.members.len();
        }
        c
    }

    pub fn binned_count(&self) -> usize {
        self.counts().iter().sum()
    }
}

/// Sorts most critical first; ties by (frame, ego id).
pub fn sort_by_criticality(events: &mut [RiskEvent]) {
    events.sort_by(|a, b| {
        b.metric_value
            .total_cmp(&a.metric_value)
            .then_with(|| a.key().cmp(&b.key()))
    });
}

/// Paper-style fixed intervals for Time Headway, s.
pub const TH_BINS: [(f64, f64); 4] = [(0.0, 0.5), (0.5, 1.0), (1.0, 2.0), (2.0, 4.0)];

pub fn validate_intervals(intervals: &[(f64, f64); 4]) -> Result<()> {
    for (i, &(lo, hi)) in intervals.iter().enumerate() {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Config(format!("bin {} has invalid bounds [{lo}, {hi})", i + 1)));
        }
        for (j, &(lo2, hi2)) in intervals.iter().enumerate().skip(i + 1) {
            if lo < hi2 && lo2 < hi {
                return Err(Error::Config(format!("bins {} and {} overlap", i + 1, j + 1)));
            }
        }
    }
    Ok(())
}

/// Assigns each event to the half-open interval `[lo, hi)` containing its
/// natural value; events outside every interval stay unbinned.
pub fn bin_fixed(events: &[RiskEvent], metric: Metric, intervals: &[(f64, f64); 4]) -> Result<CriticalityBinning> {
    validate_intervals(intervals)?;
    let mut sorted = events.to_vec();
    sort_by_criticality(&mut sorted);
    let mut bins: Vec<CriticalityBin> = CriticalityLabel::ORDER
        .iter()
        .zip(intervals)
        .map(|(&label, &(lo, hi))| CriticalityBin {
            label,
            boundary_low: Some(lo),
            boundary_high: Some(hi),
            members: Vec::new(),
        })
        .collect();
    let mut unbinned = 0;
    for e in sorted {
        let x = metric.natural(e.metric_value);
        match intervals.iter().position(|&(lo, hi)| lo <= x && x < hi) {
            Some(i) => bins[i].members.push(e),
            None => unbinned += 1,
        }
    }
    Ok(CriticalityBinning { metric, mode: BinningMode::Fixed, bins, unbinned_count: unbinned })
}

/// Fills the bins with the most critical events first until each holds its
/// reference count; boundaries come from each bin's first and last member.
pub fn bin_matched(events: &[RiskEvent], metric: Metric, reference_counts: [usize; 4]) -> Result<CriticalityBinning> {
    let needed: usize = reference_counts.iter().sum();
    if needed > events.len() {
        return Err(Error::InsufficientEvents { needed, available: events.len() });
    }
    Ok(bin_matched_available(events, metric, reference_counts).0)
}

/// Same protocol as [`bin_matched`], but bins that run out of events stay
/// short. Returns the binning and the number of missing events.
pub fn bin_matched_available(
    events: &[RiskEvent],
    metric: Metric,
    reference_counts: [usize; 4],
) -> (CriticalityBinning, usize) {
    let needed: usize = reference_counts.iter().sum();
    let mut sorted = events.to_vec();
    sort_by_criticality(&mut sorted);
    let mut rest = sorted.into_iter();
    let bins: Vec<CriticalityBin> = CriticalityLabel::ORDER
        .iter()
        .zip(reference_counts)
        .map(|(&label, n)| {
            let members: Vec<RiskEvent> = rest.by_ref().take(n).collect();
            CriticalityBin {
                label,
                boundary_low: members.first().map(|e| metric.natural(e.metric_value)),
                boundary_high: members.last().map(|e| metric.natural(e.metric_value)),
                members,
            }
        })
        .collect();
    let binned: usize = bins.iter().map(|b| b.members.len()).sum();
    let binning = CriticalityBinning {
        metric,
        mode: BinningMode::Matched,
        bins,
        unbinned_count: events.len() - binned,
    };
    (binning, needed - binned)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapCell {
    /// 0 is the most critical bin.
    pub bin: usize,
    pub counts: [u64; 4],
}

/// Grid of the most critical bin seen in each cell. Cell `(i, j)` covers
/// `[i·size, (i+1)·size) × [j·size, (j+1)·size)` in the local frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalityMap {
    pub cell_size: f64,
    /// Lower-left corner of the occupied extent, m.
    pub origin: Vec2,
    /// Cell index extent `[min_east, min_north, max_east, max_north]`.
    pub extent: Option<[i64; 4]>,
    #[serde(with = "cell_list")]
    pub cells: BTreeMap<(i64, i64), MapCell>,
}

/// JSON objects need string keys, so cells travel as a list.
mod cell_list {
    use super::MapCell;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    #[derive(Serialize, Deserialize)]
    struct Entry {
        east: i64,
        north: i64,
        bin: usize,
        counts: [u64; 4],
    }

    pub fn serialize<S: Serializer>(cells: &BTreeMap<(i64, i64), MapCell>, s: S) -> Result<S::Ok, S::Error> {
        let list: Vec<Entry> = cells
            .iter()
            .map(|(&(east, north), c)| Entry { east, north, bin: c.bin, counts: c.counts })
            .collect();
        list.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<(i64, i64), MapCell>, D::Error> {
        let list = Vec::<Entry>::deserialize(d)?;
        Ok(list
            .into_iter()
            .map(|e| ((e.east, e.north), MapCell { bin: e.bin, counts: e.counts }))
            .collect())
    }
}

impl CriticalityMap {
    pub fn cell_of(position: Vec2, cell_size: f64) -> (i64, i64) {
        ((position.x / cell_size).floor() as i64, (position.y / cell_size).floor() as i64)
    }

    pub fn total_count(&self) -> u64 {
        self.cells.values().flat_map(|c| c.counts).sum()
    }
}

pub fn build_map(binning: &CriticalityBinning, cell_size: f64) -> Result<CriticalityMap> {
    if !(cell_size > 0.0) {
        return Err(Error::param("cell_size", format!("must be > 0, got {cell_size}")));
    }
    let mut cells: BTreeMap<(i64, i64), MapCell> = BTreeMap::new();
    for (bin, b) in binning.bins.iter().enumerate() {
        for e in &b.members {
            let cell = cells
                .entry(CriticalityMap::cell_of(e.position, cell_size))
                .or_insert(MapCell { bin, counts: [0; 4] });
            cell.bin = cell.bin.min(bin);
            cell.counts[bin] += 1;
        }
    }
    let extent = cells.keys().fold(None, |acc: Option<[i64; 4]>, &(i, j)| {
        Some(match acc {
            None => [i, j, i, j],
            Some([a, b, c, d]) => [a.min(i), b.min(j), c.max(i), d.max(j)],
        })
    });
    let origin = extent.map_or(Vec2::ZERO, |[a, b, _, _]| {
        Vec2::new(a as f64 * cell_size, b as f64 * cell_size)
    });
    Ok(CriticalityMap { cell_size, origin, extent, cells })
}

/// Ego-velocity histogram per criticality bin.
pub fn velocity_histograms(binning: &CriticalityBinning, bin_width: f64) -> Result<Vec<HistogramStats>> {
    binning
        .bins
        .iter()
        .map(|b| {
            let v: Vec<f64> = b.members.iter().map(|e| e.ego_velocity).collect();
            HistogramStats::from_samples(StatVariable::Velocity, &v, bin_width)
        })
        .collect()
}

/// Shares of binned events relative to the defined events and to every
/// inspected (ego, frame) sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinShare {
    pub binned: usize,
    pub defined_events: usize,
    pub samples: usize,
    pub share_of_defined: f64,
    pub share_of_samples: f64,
}

pub fn bin_share(binning: &CriticalityBinning, evaluation: &Evaluation) -> BinShare {
    let binned = binning.binned_count();
    let ratio = |n: usize| if n == 0 { 0.0 } else { binned as f64 / n as f64 };
    BinShare {
        binned,
        defined_events: evaluation.events.len(),
        samples: evaluation.samples,
        share_of_defined: ratio(evaluation.events.len()),
        share_of_samples: ratio(evaluation.samples),
    }
}

pub fn write_events_csv<W: Write>(writer: W, events: &[RiskEvent]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["ego_id", "frame", "t", "x", "y", "ego_velocity", "metric_value"])?;
    for e in events {
        w.write_record([
            e.ego.to_string(),
            e.frame.to_string(),
            e.t.to_string(),
            e.position.x.to_string(),
            e.position.y.to_string(),
            e.ego_velocity.to_string(),
            e.metric_value.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_map_csv<W: Write>(writer: W, map: &CriticalityMap) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["east_cell", "north_cell", "bin_index", "count_1", "count_2", "count_3", "count_4"])?;
    for (&(i, j), c) in &map.cells {
        let mut row = vec![i.to_string(), j.to_string(), (c.bin + 1).to_string()];
        row.extend(c.counts.iter().map(|n| n.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Rows of `criticality_bin,velocity_bin_low,velocity_bin_high,pmf,cdf`.
pub fn write_histograms_csv<W: Write>(writer: W, histograms: &[HistogramStats]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["criticality_bin", "velocity_bin_low", "velocity_bin_high", "pmf", "cdf"])?;
    for (b, h) in histograms.iter().enumerate() {
        for i in 0..h.counts.len() {
            w.write_record([
                (b + 1).to_string(),
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

/// Comparison input: one analyzed run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub name: String,
    pub binning: CriticalityBinning,
    pub map: CriticalityMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinBoundaryReport {
    pub run: String,
    pub metric: Metric,
    pub label: CriticalityLabel,
    pub boundary_low: Option<f64>,
    pub boundary_high: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub label: CriticalityLabel,
    pub left_count: usize,
    pub right_count: usize,
    pub shared: usize,
    /// |A ∩ B| / |A ∪ B|; 1 when both bins are empty.
    pub jaccard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDisagreement {
    pub east_cell: i64,
    pub north_cell: i64,
    /// 1-based bin index, absent when the run has no event in the cell.
    pub left_bin: Option<usize>,
    pub right_bin: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub left: String,
    pub right: String,
    pub bin_overlap: Vec<OverlapReport>,
    pub total_overlap: f64,
    pub disagreeing_cells: Vec<CellDisagreement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub boundaries: Vec<BinBoundaryReport>,
    pub pairs: Vec<PairReport>,
}

fn jaccard(a: &HashSet<(i64, VehicleId)>, b: &HashSet<(i64, VehicleId)>) -> (usize, f64) {
    let shared = a.intersection(b).count();
    let union = a.len() + b.len() - shared;
    (shared, if union == 0 { 1.0 } else { shared as f64 / union as f64 })
}

fn compare_pair(left: &RunSummary, right: &RunSummary) -> Result<PairReport> {
    let (lm, rm) = (&left.map, &right.map);
    if lm.cell_size != rm.cell_size {
        return Err(Error::Incompatible(format!(
            "{} uses {} m cells, {} uses {} m",
            left.name, lm.cell_size, right.name, rm.cell_size
        )));
    }
    if let (Some([a0, b0, a1, b1]), Some([c0, d0, c1, d1])) = (lm.extent, rm.extent) {
        if a1 < c0 || c1 < a0 || b1 < d0 || d1 < b0 {
            return Err(Error::Incompatible(format!(
                "map extents of {} and {} do not intersect",
                left.name, right.name
            )));
        }
    }
    let members = |b: &CriticalityBin| b.members.iter().map(RiskEvent::key).collect::<HashSet<_>>();
    let mut bin_overlap = Vec::new();
    let (mut all_l, mut all_r) = (HashSet::new(), HashSet::new());
    for (bl, br) in left.binning.bins.iter().zip(&right.binning.bins) {
        let (sl, sr) = (members(bl), members(br));
        let (shared, j) = jaccard(&sl, &sr);
        bin_overlap.push(OverlapReport {
            label: bl.label,
            left_count: sl.len(),
            right_count: sr.len(),
            shared,
            jaccard: j,
        });
        // binned events with their bin index, so total overlap needs same-bin agreement
        all_l.extend(sl.into_iter().map(|k| (k, bl.label)));
        all_r.extend(sr.into_iter().map(|k| (k, br.label)));
    }
    let shared = all_l.intersection(&all_r).count();
    let union = all_l.len() + all_r.len() - shared;
    let total_overlap = if union == 0 { 1.0 } else { shared as f64 / union as f64 };

    let mut disagreeing_cells = Vec::new();
    let keys: std::collections::BTreeSet<_> = lm.cells.keys().chain(rm.cells.keys()).copied().collect();
    for k in keys {
        let l = lm.cells.get(&k).map(|c| c.bin + 1);
        let r = rm.cells.get(&k).map(|c| c.bin + 1);
        if l != r {
            disagreeing_cells.push(CellDisagreement { east_cell: k.0, north_cell: k.1, left_bin: l, right_bin: r });
        }
    }
    Ok(PairReport {
        left: left.name.clone(),
        right: right.name.clone(),
        bin_overlap,
        total_overlap,
        disagreeing_cells,
    })
}

/// Per-bin boundaries of every run, and bin occupancy overlap and map
/// disagreement for every pair of runs.
pub fn compare_runs(runs: &[RunSummary]) -> Result<ComparisonReport> {
    if runs.len() < 2 {
        return Err(Error::Config(format!("need at least 2 runs to compare, got {}", runs.len())));
    }
    let boundaries = runs
        .iter()
        .flat_map(|r| {
            r.binning.bins.iter().map(move |b| BinBoundaryReport {
                run: r.name.clone(),
                metric: r.binning.metric,
                label: b.label,
                boundary_low: b.boundary_low,
                boundary_high: b.boundary_high,
                count: b.members.len(),
            })
        })
        .collect();
    let mut pairs = Vec::new();
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            pairs.push(compare_pair(&runs[i], &runs[j])?);
        }
    }
    Ok(ComparisonReport { boundaries, pairs })
}

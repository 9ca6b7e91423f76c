//! End-to-end pipeline steps and the on-disk layout of run outputs.
//!
//! An analyze output directory holds:
//!
//! | file | content |
//! |------|---------|
//! | `config.toml` | fully resolved run configuration |
//! | `manifest.json` | version, command, metric, input checksum |
//! | `events.csv` | every defined (ego, frame) event |
//! | `binning.json` | the four criticality bins with their members |
//! | `map.csv`, `map.json` | criticality map |
//! | `histograms.csv` | ego-velocity pmf/cdf per bin |
//! | `reference_counts.json` | TH runs only: bin counts for matched binning |

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    bin_fixed, bin_matched_available, bin_share, build_map, evaluate_dataset, front_pairs,
    velocity_histograms, write_events_csv, write_histograms_csv, write_map_csv, BinShare,
    CriticalityBinning, CriticalityMap, Evaluation, Metric, RunSummary,
};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::ingest::{kinematics_statistics, parse_trajectories, smooth_dataset, write_statistics_csv, HistogramStats, TrajectoryDataset};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Hex SHA-256 of a byte stream.
pub fn sha256_hex<R: Read>(mut source: R) -> Result<String> {
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = source.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Parses and smooths a trajectory file.
pub fn load_dataset(input: &FsPath, config: &RunConfig) -> Result<TrajectoryDataset> {
    let file = File::open(input)?;
    let raw = parse_trajectories(BufReader::new(file), &config.ingest())?;
    smooth_dataset(&raw, config.smoothing())
}

/// Kinematics histograms of a smoothed dataset.
pub fn statistics(dataset: &TrajectoryDataset, config: &RunConfig) -> Result<Vec<HistogramStats>> {
    let pairs = front_pairs(dataset, config.sensor_range_m, config.lane_threshold_m)?;
    kinematics_statistics(dataset, &pairs)
}

/// Bin counts a TH run hands to the matched binning of other metrics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceCounts {
    pub metric: Metric,
    pub counts: [usize; 4],
}

/// Reads either a `reference_counts.json` document or a bare array of four
/// counts.
pub fn parse_counts(text: &str) -> Result<[usize; 4]> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Doc {
        Full(ReferenceCounts),
        Bare([usize; 4]),
    }
    match serde_json::from_str::<Doc>(text) {
        Ok(Doc::Full(r)) => Ok(r.counts),
        Ok(Doc::Bare(c)) => Ok(c),
        Err(e) => Err(Error::Config(format!("counts must be four non-negative integers: {e}"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinningReport {
    pub binning: CriticalityBinning,
    /// Events missing to reach the reference counts.
    pub shortfall: usize,
    pub share: BinShare,
}

#[derive(Debug, Clone)]
pub struct AnalysisOutput {
    pub evaluation: Evaluation,
    pub report: BinningReport,
    pub map: CriticalityMap,
    pub histograms: Vec<HistogramStats>,
}

/// Evaluates one metric and bins it. TH uses the configured fixed bins;
/// every other metric needs reference counts.
pub fn analyze(dataset: &TrajectoryDataset, config: &RunConfig, counts: Option<[usize; 4]>) -> Result<AnalysisOutput> {
    let metric = config.metric;
    let (counts, fixed) = match (metric, counts) {
        (Metric::Th, _) => (None, true),
        (_, Some(c)) => (Some(c), false),
        (_, None) => {
            return Err(Error::Config(format!(
                "{metric} uses matched binning and needs reference counts: run the TH analysis first \
                 and pass its reference_counts.json with --counts, or pass four counts"
            )))
        }
    };
    let analysis = config.analysis()?;
    let evaluation = evaluate_dataset(dataset, metric, &analysis)?;
    let (binning, shortfall) = if fixed {
        (bin_fixed(&evaluation.events, metric, &config.th_bins())?, 0)
    } else {
        let counts = counts.expect("matched binning has counts");
        let (b, short) = bin_matched_available(&evaluation.events, metric, counts);
        if short > 0 {
            log::warn!(
                "{metric}: {} defined events for {} reference slots; bins stay short by {short}",
                evaluation.events.len(),
                counts.iter().sum::<usize>()
            );
        }
        (b, short)
    };
    let map = build_map(&binning, config.cell_size_m)?;
    let histograms = velocity_histograms(&binning, config.velocity_bin_mps)?;
    let share = bin_share(&binning, &evaluation);
    Ok(AnalysisOutput {
        evaluation,
        report: BinningReport { binning, shortfall, share },
        map,
        histograms,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub metric: Option<Metric>,
    pub input_sha256: String,
    pub vehicles: usize,
    pub samples: usize,
}

fn create<P: AsRef<FsPath>>(path: P) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<T: Serialize>(path: &FsPath, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn write_preamble(out: &FsPath, config: &RunConfig, manifest: &Manifest) -> Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join("config.toml"), config.to_toml_string())?;
    write_json(&out.join("manifest.json"), manifest)
}

pub fn manifest(command: &str, metric: Option<Metric>, input: &FsPath, dataset: &TrajectoryDataset) -> Result<Manifest> {
    Ok(Manifest {
        tool: "riskspot".into(),
        version: VERSION.into(),
        command: command.into(),
        metric,
        input_sha256: sha256_hex(BufReader::new(File::open(input)?))?,
        vehicles: dataset.tracks.len(),
        samples: dataset.sample_count(),
    })
}

/// Writes `statistics.csv` and `statistics.json` plus config and manifest.
pub fn write_statistics(out: &FsPath, config: &RunConfig, manifest: &Manifest, stats: &[HistogramStats]) -> Result<()> {
    write_preamble(out, config, manifest)?;
    let mut w = create(out.join("statistics.csv"))?;
    write_statistics_csv(&mut w, stats)?;
    w.flush()?;
    write_json(&out.join("statistics.json"), &stats)
}

pub fn write_analysis(out: &FsPath, config: &RunConfig, manifest: &Manifest, output: &AnalysisOutput) -> Result<()> {
    write_preamble(out, config, manifest)?;
    let mut w = create(out.join("events.csv"))?;
    write_events_csv(&mut w, &output.evaluation.events)?;
    w.flush()?;
    write_json(&out.join("binning.json"), &output.report)?;
    let mut w = create(out.join("map.csv"))?;
    write_map_csv(&mut w, &output.map)?;
    w.flush()?;
    write_json(&out.join("map.json"), &output.map)?;
    let mut w = create(out.join("histograms.csv"))?;
    write_histograms_csv(&mut w, &output.histograms)?;
    w.flush()?;
    if output.report.binning.metric == Metric::Th {
        let counts = ReferenceCounts { metric: Metric::Th, counts: output.report.binning.counts() };
        write_json(&out.join("reference_counts.json"), &counts)?;
    }
    Ok(())
}

/// Loads the binning and map of an analyze output directory.
pub fn load_run(dir: &FsPath) -> Result<RunSummary> {
    let read = |name: &str| -> Result<String> {
        fs::read_to_string(dir.join(name)).map_err(|e| {
            Error::Incompatible(format!("{} is not an analyze output ({name}: {e})", dir.display()))
        })
    };
    let report: BinningReport = serde_json::from_str(&read("binning.json")?)?;
    let map: CriticalityMap = serde_json::from_str(&read("map.json")?)?;
    Ok(RunSummary { name: dir.display().to_string(), binning: report.binning, map })
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use riskspot::analysis::{compare_runs, Metric};
use riskspot::run::{self, load_dataset, load_run, parse_counts};
use riskspot::{Error, RunConfig};

/// Collision risk analysis of recorded vehicle trajectories.
#[derive(Parser)]
#[command(name = "riskspot", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Velocity, acceleration, gap and speed-difference histograms.
    Stats(Common),
    /// Evaluate a metric, bin the events and build the criticality map.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// RSD_front, RSD_all, TH or TTC; overrides the config.
        #[arg(long)]
        metric: Option<String>,
        /// Reference bin counts: a TH run's reference_counts.json or a JSON
        /// array of four integers.
        #[arg(long)]
        counts: Option<PathBuf>,
    },
    /// Compare two or more analyze output directories.
    Compare {
        #[arg(required = true, num_args = 2..)]
        runs: Vec<PathBuf>,
        /// Report file; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; overrides the config, 0 uses every core.
    #[arg(long)]
    threads: Option<usize>,
}

fn load_config(common: &Common) -> Result<RunConfig, Error> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(t) = common.threads {
        config.threads = t;
    }
    Ok(config)
}

fn with_threads<T>(threads: usize, f: impl FnOnce() -> Result<T, Error> + Send) -> Result<T, Error>
where
    T: Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} worker threads: {e}")))?;
    pool.install(f)
}

fn stats(common: &Common) -> Result<(), Error> {
    let config = load_config(common)?;
    with_threads(config.threads, || {
        let dataset = load_dataset(&common.input, &config)?;
        let stats = run::statistics(&dataset, &config)?;
        let manifest = run::manifest("stats", None, &common.input, &dataset)?;
        run::write_statistics(&common.out, &config, &manifest, &stats)?;
        eprintln!("{} vehicles, {} samples -> {}", dataset.tracks.len(), dataset.sample_count(), common.out.display());
        Ok(())
    })
}

fn analyze(common: &Common, metric: Option<&str>, counts: Option<&Path>) -> Result<(), Error> {
    let mut config = load_config(common)?;
    if let Some(m) = metric {
        config.metric = m.parse::<Metric>()?;
    }
    let counts = match counts {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read counts {}: {e}", path.display())))?;
            Some(parse_counts(&text)?)
        }
        None => None,
    };
    if config.metric != Metric::Th && counts.is_none() {
        // fail before the expensive part
        return Err(Error::Config(format!(
            "{} uses matched binning and needs reference counts: run `riskspot analyze --metric TH` first \
             and pass its reference_counts.json with --counts, or pass a JSON array of four counts",
            config.metric
        )));
    }
    with_threads(config.threads, || {
        let dataset = load_dataset(&common.input, &config)?;
        let output = run::analyze(&dataset, &config, counts)?;
        let manifest = run::manifest("analyze", Some(config.metric), &common.input, &dataset)?;
        run::write_analysis(&common.out, &config, &manifest, &output)?;
        let b = &output.report.binning;
        eprintln!(
            "{}: {} events, bins {:?}, {} unbinned -> {}",
            config.metric,
            output.evaluation.events.len(),
            b.counts(),
            b.unbinned_count,
            common.out.display()
        );
        Ok(())
    })
}

fn compare(runs: &[PathBuf], out: Option<&Path>) -> Result<(), Error> {
    let summaries = runs.iter().map(|d| load_run(d)).collect::<Result<Vec<_>, _>>()?;
    let report = compare_runs(&summaries)?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Stats(common) => stats(common),
        Command::Analyze { common, metric, counts } => analyze(common, metric.as_deref(), counts.as_deref()),
        Command::Compare { runs, out } => compare(runs, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}

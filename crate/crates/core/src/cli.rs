//! Command-line interface: `run`, `validate`, `sweep`, and
//! `topology-export`, plus the on-disk artifact formats they write.

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::metrics::{
    self, congestion_map, default_delay_grid, delay_cdf, fidelity_bin_low, fidelity_histogram,
    RunSummary, SplitBy, SweepAxis, FIDELITY_BINS,
};
use crate::pipeline::{self, RunOutput};
use crate::scheduler::sagas_to_jsonl;
use crate::traffic::objectives_to_jsonl;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

/// Saga-based scheduling and simulation of entanglement distribution.
#[derive(Debug, Parser)]
#[command(name = "saganet", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the configured experiment once and write all artifacts.
    Run(RunArgs),
    /// Check a config file and print its fully resolved form.
    Validate {
        /// Path to the TOML config.
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the sweep declared in the config, one output directory per value.
    Sweep(RunArgs),
    /// Build the configured topology and write it as JSON.
    TopologyExport {
        /// Path to the TOML config.
        #[arg(long)]
        config: PathBuf,
        /// Output file (defaults to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Path to the TOML config.
    #[arg(long)]
    pub config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps (defaults to the number of cores).
    #[arg(long)]
    pub jobs: Option<usize>,
}

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Parses `argv` and runs the chosen command, returning the exit code.
pub fn main_entry<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version land here too; they are not failures.
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(Phased::Config(e)) => {
            eprintln!("config error: {e}");
            EXIT_CONFIG
        }
        Err(Phased::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

/// An error tagged with the phase it occurred in, which fixes the exit code.
enum Phased {
    Config(Error),
    Runtime(Error),
}

/// Prints to stdout, treating a closed pipe (e.g. `saganet ... | head`) as
/// a normal early exit instead of a panic.
fn emit(text: std::fmt::Arguments<'_>) -> std::result::Result<(), Phased> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match out.write_fmt(text).and_then(|()| out.flush()) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        Err(e) => Err(Phased::Runtime(Error::io("stdout", e))),
    }
}

fn dispatch(cli: Cli) -> std::result::Result<(), Phased> {
    match cli.command {
        Command::Run(args) => {
            let config = load_config(&args).map_err(Phased::Config)?;
            let dir = run_experiment(&config).map_err(Phased::Runtime)?;
            emit(format_args!("wrote {}\n", dir.display()))
        }
        Command::Validate { config } => {
            let report = validate_config(&config).map_err(Phased::Config)?;
            emit(format_args!("{report}"))
        }
        Command::Sweep(args) => {
            if let Some(jobs) = args.jobs {
                // Best effort: the global pool can only be set once per process.
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(jobs)
                    .build_global();
            }
            let config = load_config(&args).map_err(Phased::Config)?;
            if config.sweep.is_none() {
                return Err(Phased::Config(Error::Config(
                    "sweep requires a [sweep] section with axis and values".to_string(),
                )));
            }
            let dir = run_sweep(&config).map_err(Phased::Runtime)?;
            emit(format_args!("wrote {}\n", dir.display()))
        }
        Command::TopologyExport { config, out } => {
            let config = RunConfig::load(&config).map_err(Phased::Config)?;
            let topo = config.build_topology().map_err(Phased::Config)?;
            let json = topo.to_json_string().map_err(Phased::Runtime)?;
            match out {
                Some(path) => {
                    fs::write(&path, json).map_err(|e| Phased::Runtime(Error::io(path, e)))?;
                    Ok(())
                }
                None => emit(format_args!("{json}\n")),
            }
        }
    }
}

/// Loads a config and applies command-line overrides.
fn load_config(args: &RunArgs) -> Result<RunConfig> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.run.seed = seed;
    }
    if let Some(out) = &args.out {
        config.run.out_dir = out.display().to_string();
    }
    config.validate()?;
    Ok(config)
}

/// Validates a config file and renders the resolved settings plus any
/// feasibility warnings.
pub fn validate_config(path: &Path) -> Result<String> {
    let config = RunConfig::load(path)?;
    config.validate()?;
    let mut report = String::new();
    report.push_str("config ok\n\n");
    report.push_str(&config.to_toml_string()?);
    let topo = config.build_topology()?;
    let k = config.traffic.memories;
    let mut warned = false;
    for node in &topo.nodes {
        let needed_as_relay = 2 * k;
        if node.memory_count < needed_as_relay {
            report.push_str(&format!(
                "\nwarning: node {} holds {} memories; objectives with k = {k} need {} \
                 to relay there and will never be approved on such a path\n",
                node.id, node.memory_count, needed_as_relay
            ));
            warned = true;
        } else if topo.is_processor(node.id) && node.memory_count < k {
            report.push_str(&format!(
                "\nwarning: processor {} holds {} memories, fewer than k = {k}; it can \
                 never terminate an objective\n",
                node.id, node.memory_count
            ));
            warned = true;
        }
    }
    if !warned {
        report.push_str("\nall nodes can serve the configured memory demand\n");
    }
    Ok(report)
}

/// Runs one experiment and writes every artifact into the configured
/// output directory, which is created if needed. Returns that directory.
pub fn run_experiment(config: &RunConfig) -> Result<PathBuf> {
    let out = pipeline::run_single(config)?;
    let dir = PathBuf::from(&config.run.out_dir);
    write_run_artifacts(&dir, config, &out)?;
    Ok(dir)
}

/// Runs the configured sweep: per-value output directories plus a
/// top-level `sweep_summary.csv`.
pub fn run_sweep(config: &RunConfig) -> Result<PathBuf> {
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("no [sweep] section".to_string()))?;
    let dir = PathBuf::from(&config.run.out_dir);
    fs::create_dir_all(&dir).map_err(|e| Error::io(dir.clone(), e))?;
    let outcomes: Vec<(f64, Result<RunSummary>)> = sweep
        .values
        .par_iter()
        .map(|&value| (value, sweep_one(config, sweep.axis, value, &dir)))
        .collect();
    write_sweep_summary(&dir.join("sweep_summary.csv"), sweep.axis, &outcomes)?;
    Ok(dir)
}

/// Runs one sweep point into its own subdirectory and returns its summary.
fn sweep_one(base: &RunConfig, axis: SweepAxis, value: f64, dir: &Path) -> Result<RunSummary> {
    let mut config = metrics::sweep_config(axis, value, base)?;
    let subdir = dir.join(format!("{}_{}", axis.label(), value));
    config.run.out_dir = subdir.display().to_string();
    let out = pipeline::run_single(&config)?;
    write_run_artifacts(&subdir, &config, &out)?;
    Ok(out.summary)
}

#[derive(Serialize)]
struct Manifest<'a> {
    fingerprint: String,
    seed: u64,
    version: &'static str,
    created_unix_ms: u128,
    counts: ManifestCounts,
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct ManifestCounts {
    objectives: u64,
    approved: u64,
    delivered: u64,
    below_target: u64,
    total_rejections: u64,
}

/// Writes the full artifact set for one run into `dir`.
pub fn write_run_artifacts(dir: &Path, config: &RunConfig, out: &RunOutput) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.to_path_buf(), e))?;
    let write = |name: &str, text: String| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(path, e))
    };

    let manifest = Manifest {
        fingerprint: out.summary.fingerprint.clone(),
        seed: out.summary.seed,
        version: env!("CARGO_PKG_VERSION"),
        created_unix_ms: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0),
        counts: ManifestCounts {
            objectives: out.summary.objectives,
            approved: out.summary.approved,
            delivered: out.summary.delivered,
            below_target: out.summary.below_target,
            total_rejections: out.summary.total_rejections,
        },
        config,
    };
    write(
        "manifest.json",
        serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Serialization(e.to_string()))?,
    )?;
    write("topology.json", out.topology.to_json_string()?)?;
    write("objectives.jsonl", objectives_to_jsonl(&out.objectives)?)?;
    write("schedule.jsonl", sagas_to_jsonl(&out.sagas)?)?;
    write("deliveries.csv", render_deliveries(out))?;
    write("cdf.csv", render_cdf(&out.summary)?)?;
    write("fidelity_hist.csv", render_fidelity_hist(out)?)?;
    write("congestion.csv", render_congestion(out))?;
    Ok(())
}

fn render_deliveries(out: &RunOutput) -> String {
    let mut text = String::from(
        "saga_id,pair_seq,delivered_at_s,fidelity,hops,priority,time_to_serve_s\n",
    );
    for r in &out.deliveries {
        text.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.saga_id,
            r.pair_seq,
            r.delivered_at.as_secs_f64(),
            r.fidelity.value(),
            r.hops,
            r.priority,
            r.time_to_serve.as_secs_f64(),
        ));
    }
    text
}

/// Per-priority request-delay CDFs on one shared grid.
fn render_cdf(summary: &RunSummary) -> Result<String> {
    let mut text = String::from("priority,delay_s,cum_fraction\n");
    let all = summary.all_delays();
    if all.is_empty() {
        return Ok(text);
    }
    let grid = default_delay_grid(&all);
    for (priority, samples) in summary.delays_by_priority.iter().enumerate() {
        if samples.is_empty() {
            continue;
        }
        for (delay, fraction) in delay_cdf(samples, &grid)? {
            text.push_str(&format!("{priority},{delay},{fraction}\n"));
        }
    }
    Ok(text)
}

fn render_fidelity_hist(out: &RunOutput) -> Result<String> {
    let mut text = String::from("split,key,bin,bin_low,bin_high,count\n");
    if out.deliveries.is_empty() {
        return Ok(text);
    }
    for (name, split) in [("hops", SplitBy::Hops), ("priority", SplitBy::Priority)] {
        for (key, bins) in fidelity_histogram(&out.deliveries, split)? {
            for (bin, &count) in bins.iter().enumerate() {
                if count == 0 {
                    continue;
                }
                text.push_str(&format!(
                    "{name},{key},{bin},{},{},{count}\n",
                    fidelity_bin_low(bin),
                    fidelity_bin_low(bin + 1),
                ));
            }
        }
    }
    let _ = FIDELITY_BINS; // bins per split are fixed at this width
    Ok(text)
}

fn render_congestion(out: &RunOutput) -> String {
    let mut text = String::from(
        "node,rejection_events,share_of_total,share_of_max,objectives_conflicted,share_of_objectives\n",
    );
    for e in congestion_map(&out.conflicts) {
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            e.node,
            e.rejection_events,
            e.share_of_total,
            e.share_of_max,
            e.objectives_conflicted,
            e.share_of_objectives,
        ));
    }
    text
}

fn write_sweep_summary(
    path: &Path,
    axis: SweepAxis,
    outcomes: &[(f64, Result<RunSummary>)],
) -> Result<()> {
    let mut text = String::from(
        "axis,value,seed,status,objectives,approved,delivered,below_target,\
         total_rejections,median_delay_s,mean_fidelity,mean_completion_s,mean_time_to_serve_s\n",
    );
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (value, outcome) in outcomes {
        match outcome {
            Ok(s) => text.push_str(&format!(
                "{},{},{},ok,{},{},{},{},{},{},{},{},{}\n",
                axis.label(),
                value,
                s.seed,
                s.objectives,
                s.approved,
                s.delivered,
                s.below_target,
                s.total_rejections,
                s.median_delay_s,
                opt(s.mean_fidelity),
                opt(s.mean_completion_s),
                opt(s.mean_time_to_serve_s),
            )),
            Err(e) => {
                let message = e.to_string().replace(['\n', ','], ";");
                text.push_str(&format!(
                    "{},{},,{message},,,,,,,,\n",
                    axis.label(),
                    value
                ));
            }
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path.to_path_buf(), e))
}

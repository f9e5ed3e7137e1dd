//! Aggregation of run outputs: delay CDFs, fidelity histograms, congestion
//! shares, run summaries, and parameter sweeps.

use crate::error::{Error, Result};
use crate::kernel::DeliveryRecord;
use crate::pipeline;
use crate::scheduler::{ConflictLog, Saga};
use crate::seeds::derive_seed_with;
use crate::time::TimePs;
use crate::topology::NodeId;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Number of uniform fidelity bins over the Werner range `[0.25, 1.0]`.
pub const FIDELITY_BINS: usize = 50;

/// Empirical CDF of `samples` evaluated at each grid point: the fraction
/// of samples `<= g`. The grid must be non-empty and ascending.
pub fn delay_cdf(samples: &[f64], grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("no delay samples"));
    }
    if grid.is_empty() {
        return Err(Error::EmptyInput("empty CDF grid"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(grid
        .iter()
        .map(|&g| (g, sorted.partition_point(|&s| s <= g) as f64 / n))
        .collect())
}

/// Default CDF grid: zero, then logarithmically spaced points from 1 ms up
/// to the maximum observed sample (the last point is exactly that maximum,
/// so the CDF ends at exactly 1).
pub fn default_delay_grid(samples: &[f64]) -> Vec<f64> {
    let max = samples.iter().copied().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return vec![0.0];
    }
    let lo = 1e-3f64;
    if max <= lo {
        return vec![0.0, max];
    }
    let points = 64usize;
    let mut grid = Vec::with_capacity(points + 1);
    grid.push(0.0);
    let (ln_lo, ln_hi) = (lo.ln(), max.ln());
    for i in 0..points {
        let t = i as f64 / (points - 1) as f64;
        grid.push((ln_lo + t * (ln_hi - ln_lo)).exp());
    }
    // Pin both endpoints exactly: ln/exp round trips drift by an ulp.
    grid[1] = lo;
    *grid.last_mut().unwrap() = max;
    grid
}

/// What to split the fidelity histogram by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitBy {
    Hops,
    Priority,
}

/// Histogram of delivered fidelities, [`FIDELITY_BINS`] uniform bins over
/// `[0.25, 1.0]`, one per split value (hop count or priority class).
pub fn fidelity_histogram(
    records: &[DeliveryRecord],
    split: SplitBy,
) -> Result<BTreeMap<u32, Vec<u64>>> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no delivery records"));
    }
    let mut out: BTreeMap<u32, Vec<u64>> = BTreeMap::new();
    for r in records {
        let key = match split {
            SplitBy::Hops => r.hops,
            SplitBy::Priority => r.priority as u32,
        };
        let bins = out.entry(key).or_insert_with(|| vec![0; FIDELITY_BINS]);
        bins[fidelity_bin(r.fidelity.value())] += 1;
    }
    Ok(out)
}

/// Bin index of a fidelity in `[0.25, 1.0]`.
pub fn fidelity_bin(fidelity: f64) -> usize {
    let t = (fidelity - 0.25) / 0.75;
    ((t * FIDELITY_BINS as f64) as usize).min(FIDELITY_BINS - 1)
}

/// Lower edge of a fidelity bin.
pub fn fidelity_bin_low(bin: usize) -> f64 {
    0.25 + 0.75 * bin as f64 / FIDELITY_BINS as f64
}

/// Per-node congestion, under both normalizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CongestionEntry {
    pub node: NodeId,
    /// Rejection events charged to this node.
    pub rejection_events: u64,
    /// Rejection events over all rejection events.
    pub share_of_total: f64,
    /// Rejection events over the most-charged node's events.
    pub share_of_max: f64,
    /// Distinct objectives this node rejected at least once.
    pub objectives_conflicted: u64,
    /// Those objectives over all objectives.
    pub share_of_objectives: f64,
}

/// Congestion shares per node, ascending by node id. A run with no
/// conflicts anywhere yields an empty map.
pub fn congestion_map(log: &ConflictLog) -> Vec<CongestionEntry> {
    if log.total_rejections == 0 {
        return Vec::new();
    }
    let max = log
        .nodes()
        .map(|n| log.rejection_events(n))
        .max()
        .unwrap_or(0);
    log.nodes()
        .map(|node| {
            let events = log.rejection_events(node);
            CongestionEntry {
                node,
                rejection_events: events,
                share_of_total: events as f64 / log.total_rejections as f64,
                share_of_max: events as f64 / max as f64,
                objectives_conflicted: log.objectives_conflicted(node),
                share_of_objectives: log.objectives_conflicted(node) as f64
                    / log.total_objectives as f64,
            }
        })
        .collect()
}

/// Headline numbers of one complete run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub fingerprint: String,
    pub seed: u64,
    pub objectives: u64,
    pub approved: u64,
    pub delivered: u64,
    pub below_target: u64,
    pub total_rejections: u64,
    /// Request delays (scheduled start minus requested start) in seconds,
    /// split by priority class.
    pub delays_by_priority: [Vec<f64>; 3],
    /// Median request delay over all objectives.
    pub median_delay_s: f64,
    /// Mean delivered fidelity; `None` when nothing was delivered.
    pub mean_fidelity: Option<f64>,
    /// Mean over sagas of (last delivery − scheduled start), seconds.
    pub mean_completion_s: Option<f64>,
    /// Mean over sagas of (last delivery − requested start), seconds.
    pub mean_time_to_serve_s: Option<f64>,
}

impl RunSummary {
    /// All request delays pooled across priorities.
    pub fn all_delays(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self
            .delays_by_priority
            .iter()
            .flat_map(|v| v.iter().copied())
            .collect();
        all.sort_by(f64::total_cmp);
        all
    }
}

/// Median of an unsorted sample set (mean of the middle two when even).
pub fn median(samples: &[f64]) -> f64 {
    assert!(!samples.is_empty(), "median of nothing");
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Folds one run's outputs into a [`RunSummary`].
pub fn summarize(
    fingerprint: String,
    seed: u64,
    sagas: &[Saga],
    conflicts: &ConflictLog,
    deliveries: &[DeliveryRecord],
) -> RunSummary {
    let mut delays_by_priority: [Vec<f64>; 3] = Default::default();
    let mut all_delays = Vec::with_capacity(sagas.len());
    for s in sagas {
        let d = s.delay.as_secs_f64();
        delays_by_priority[(s.objective.priority as usize).min(2)].push(d);
        all_delays.push(d);
    }
    // Last delivery per saga, for completion statistics.
    let mut last_delivery: BTreeMap<u64, TimePs> = BTreeMap::new();
    for r in deliveries {
        let t = last_delivery.entry(r.saga_id).or_insert(r.delivered_at);
        *t = (*t).max(r.delivered_at);
    }
    let mut completion = Vec::new();
    let mut time_to_serve = Vec::new();
    for s in sagas {
        if let Some(&last) = last_delivery.get(&s.objective.id) {
            completion.push((last - s.scheduled_start).as_secs_f64());
            time_to_serve.push((last - s.requested_start()).as_secs_f64());
        }
    }
    let mean = |v: &[f64]| {
        if v.is_empty() {
            None
        } else {
            Some(v.iter().sum::<f64>() / v.len() as f64)
        }
    };
    RunSummary {
        fingerprint,
        seed,
        objectives: sagas.len() as u64,
        approved: sagas.len() as u64,
        delivered: deliveries.len() as u64,
        below_target: deliveries.iter().filter(|r| r.below_target).count() as u64,
        total_rejections: conflicts.total_rejections,
        median_delay_s: if all_delays.is_empty() {
            0.0
        } else {
            median(&all_delays)
        },
        mean_fidelity: mean(
            &deliveries
                .iter()
                .map(|r| r.fidelity.value())
                .collect::<Vec<_>>(),
        ),
        mean_completion_s: mean(&completion),
        mean_time_to_serve_s: mean(&time_to_serve),
        delays_by_priority,
    }
}

/// Which parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Number of objectives (`traffic.objective_count`).
    QueueSize,
    /// Arrival rate λ (`traffic.arrival_rate`).
    ArrivalRate,
}

impl SweepAxis {
    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::QueueSize => "queue_size",
            SweepAxis::ArrivalRate => "arrival_rate",
        }
    }
}

/// One sweep point: the swept value and the run outcome (errors isolate to
/// their point; the sweep itself continues).
#[derive(Debug)]
pub struct SweepPoint {
    pub value: f64,
    pub outcome: Result<RunSummary>,
}

/// Seed for one sweep point, derived so that adding or reordering values
/// never changes the seed of an existing value.
pub fn sweep_point_seed(base_seed: u64, axis: SweepAxis, value: f64) -> u64 {
    derive_seed_with(base_seed, axis.label(), value.to_bits())
}

/// Runs the full pipeline once per value (in parallel), varying `axis`.
pub fn sweep(
    axis: SweepAxis,
    values: &[f64],
    base: &crate::config::RunConfig,
) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(Error::EmptyInput("no sweep values"));
    }
    Ok(values
        .par_iter()
        .map(|&value| SweepPoint {
            value,
            outcome: sweep_point(axis, value, base),
        })
        .collect())
}

/// The base config specialized to one sweep point: the axis value applied
/// and the seed re-derived for that value.
pub fn sweep_config(
    axis: SweepAxis,
    value: f64,
    base: &crate::config::RunConfig,
) -> Result<crate::config::RunConfig> {
    let mut config = base.clone();
    config.run.seed = sweep_point_seed(base.run.seed, axis, value);
    match axis {
        SweepAxis::QueueSize => {
            if !(value >= 1.0) || value.fract() != 0.0 {
                return Err(Error::invalid(
                    "sweep.values",
                    format!("queue_size values must be positive integers, got {value}"),
                ));
            }
            config.traffic.objective_count = value as u64;
        }
        SweepAxis::ArrivalRate => {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::invalid(
                    "sweep.values",
                    format!("arrival_rate values must be > 0, got {value}"),
                ));
            }
            config.traffic.arrival_rate = value;
        }
    }
    Ok(config)
}

fn sweep_point(
    axis: SweepAxis,
    value: f64,
    base: &crate::config::RunConfig,
) -> Result<RunSummary> {
    let config = sweep_config(axis, value, base)?;
    Ok(pipeline::run_single(&config)?.summary)
}

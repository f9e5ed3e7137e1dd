//! End-to-end composition: config → topology → traffic → schedule →
//! simulation → summary.

use crate::config::RunConfig;
use crate::error::Result;
use crate::kernel::{self, DeliveryRecord, KernelParams};
use crate::metrics::{self, RunSummary};
use crate::scheduler::{schedule_all, ConflictLog, Saga};
use crate::topology::Topology;
use crate::traffic::{generate_objectives, Objective, TrafficMatrix};

/// Everything one run produces.
#[derive(Debug)]
pub struct RunOutput {
    pub topology: Topology,
    pub objectives: Vec<Objective>,
    pub sagas: Vec<Saga>,
    pub conflicts: ConflictLog,
    pub deliveries: Vec<DeliveryRecord>,
    pub summary: RunSummary,
}

/// Runs the full pipeline once, deterministically in the config's seed.
pub fn run_single(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let seed = config.run.seed;
    let topology = config.build_topology()?;
    let noise = config.noise_params()?;
    let traffic = config.traffic_params()?;
    let control = config.control_params()?;

    let matrix = TrafficMatrix::build(&topology, config.traffic.arrival_rate, seed)?;
    let objectives = generate_objectives(&matrix, &traffic, seed)?;
    let (sagas, conflicts) = schedule_all(&objectives, &topology)?;
    let params = KernelParams::from_noise(&noise, topology.link_length_km, &control);
    let deliveries = kernel::run(&sagas, &params, seed)?;
    let summary = metrics::summarize(
        config.fingerprint(),
        seed,
        &sagas,
        &conflicts,
        &deliveries,
    );
    Ok(RunOutput {
        topology,
        objectives,
        sagas,
        conflicts,
        deliveries,
        summary,
    })
}

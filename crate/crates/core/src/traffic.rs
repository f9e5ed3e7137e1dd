//! Randomized demand generation.
//!
//! Demand is drawn in two stages. First a traffic matrix `M` assigns every
//! ordered pair of distinct processors a Poisson-distributed weight, which
//! is normalized into a sampling distribution `P`. Then a stream of
//! *objectives* (end-to-end entanglement requests) is generated: endpoint
//! pairs sampled from `P`, arrival times from an exponential inter-arrival
//! process, and priorities uniform over `{0, 1, 2}` (0 most urgent).

use crate::error::{Error, Result};
use crate::physics::WernerFidelity;
use crate::seeds::derive_seed;
use crate::time::TimePs;
use crate::topology::{NodeId, Topology};
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// Number of priority classes; priorities are `0..PRIORITY_CLASSES`.
pub const PRIORITY_CLASSES: u8 = 3;

/// One end-to-end entanglement request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    /// Unique id, assigned in arrival order starting at 0.
    pub id: u64,
    pub source: NodeId,
    pub destination: NodeId,
    /// Requested reservation start.
    pub arrival: TimePs,
    /// Requested reservation end (exclusive).
    pub end: TimePs,
    /// Memory qubits reserved per link at each path node.
    pub memories: u32,
    /// Minimum acceptable delivered fidelity; recorded with each delivery.
    pub target_fidelity: WernerFidelity,
    /// Number of end-to-end pairs requested.
    pub pair_count: u32,
    /// Priority class, 0 = most urgent.
    pub priority: u8,
}

impl Objective {
    /// Requested reservation duration.
    pub fn duration(&self) -> TimePs {
        self.end - self.arrival
    }
}

/// Wire form used for objectives.jsonl: times in seconds, short field
/// names.
#[derive(Debug, Serialize, Deserialize)]
struct ObjectiveRecord {
    iota: u64,
    i: u32,
    j: u32,
    t_a: f64,
    t_e: f64,
    k: u32,
    #[serde(rename = "F")]
    target_fidelity: f64,
    n_p: u32,
    p: u8,
}

impl From<&Objective> for ObjectiveRecord {
    fn from(o: &Objective) -> Self {
        ObjectiveRecord {
            iota: o.id,
            i: o.source.0,
            j: o.destination.0,
            t_a: o.arrival.as_secs_f64(),
            t_e: o.end.as_secs_f64(),
            k: o.memories,
            target_fidelity: o.target_fidelity.value(),
            n_p: o.pair_count,
            p: o.priority,
        }
    }
}

impl TryFrom<ObjectiveRecord> for Objective {
    type Error = Error;
    fn try_from(r: ObjectiveRecord) -> Result<Objective> {
        Ok(Objective {
            id: r.iota,
            source: NodeId(r.i),
            destination: NodeId(r.j),
            arrival: TimePs::from_secs_f64(r.t_a),
            end: TimePs::from_secs_f64(r.t_e),
            memories: r.k,
            target_fidelity: WernerFidelity::new(r.target_fidelity)?,
            pair_count: r.n_p,
            priority: r.p,
        })
    }
}

/// Serializes objectives as one JSON object per line.
pub fn objectives_to_jsonl(objectives: &[Objective]) -> Result<String> {
    let mut out = String::new();
    for o in objectives {
        let line = serde_json::to_string(&ObjectiveRecord::from(o))
            .map_err(|e| Error::Serialization(e.to_string()))?;
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

pub fn objectives_from_jsonl(text: &str) -> Result<Vec<Objective>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let rec: ObjectiveRecord =
                serde_json::from_str(l).map_err(|e| Error::Serialization(e.to_string()))?;
            Objective::try_from(rec)
        })
        .collect()
}

/// Normalized demand distribution over ordered processor pairs.
#[derive(Debug, Clone)]
pub struct TrafficMatrix {
    /// Ordered distinct processor pairs with nonzero weight, ascending.
    pairs: Vec<(NodeId, NodeId)>,
    /// Raw Poisson counts aligned with `pairs`.
    weights: Vec<u64>,
    total: u64,
}

impl TrafficMatrix {
    /// Draws `M_ij ~ Poisson(mean_demand)` for every ordered pair of
    /// distinct processors. If every entry comes out zero the matrix is
    /// redrawn once; a second all-zero draw is an error (practically
    /// impossible unless `mean_demand` is tiny).
    pub fn build(topo: &Topology, mean_demand: f64, seed: u64) -> Result<TrafficMatrix> {
        if !(mean_demand > 0.0) || !mean_demand.is_finite() {
            return Err(Error::invalid(
                "mean_demand",
                format!("must be > 0, got {mean_demand}"),
            ));
        }
        let processors = topo.processors();
        if processors.len() < 2 {
            return Err(Error::invalid(
                "topology",
                "traffic needs at least two processor nodes",
            ));
        }
        let poisson = rand_distr::Poisson::new(mean_demand)
            .map_err(|e| Error::invalid("mean_demand", e.to_string()))?;
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, "traffic-matrix"));
        for _attempt in 0..2 {
            let mut counts = Vec::new();
            for &i in &processors {
                for &j in &processors {
                    if i != j {
                        counts.push(((i, j), poisson.sample(&mut rng) as u64));
                    }
                }
            }
            if counts.iter().any(|&(_, c)| c > 0) {
                return Self::from_counts(counts);
            }
        }
        Err(Error::invalid(
            "mean_demand",
            "traffic matrix was all zeros twice in a row",
        ))
    }

    /// Builds the distribution from explicit per-pair counts (zero entries
    /// are dropped). Exposed for replay and tests.
    pub fn from_counts(counts: Vec<((NodeId, NodeId), u64)>) -> Result<TrafficMatrix> {
        let mut pairs = Vec::new();
        let mut weights = Vec::new();
        let mut total = 0u64;
        for ((i, j), c) in counts {
            if i == j {
                return Err(Error::invalid("counts", format!("diagonal entry at {i}")));
            }
            if c > 0 {
                pairs.push((i, j));
                weights.push(c);
                total += c;
            }
        }
        if total == 0 {
            return Err(Error::EmptyInput("traffic matrix has no nonzero entries"));
        }
        Ok(TrafficMatrix {
            pairs,
            weights,
            total,
        })
    }

    /// Sampling probability of the ordered pair `(i, j)`.
    pub fn probability(&self, i: NodeId, j: NodeId) -> f64 {
        match self.pairs.binary_search(&(i, j)) {
            Ok(idx) => self.weights[idx] as f64 / self.total as f64,
            Err(_) => 0.0,
        }
    }

    pub fn pairs(&self) -> &[(NodeId, NodeId)] {
        &self.pairs
    }

    pub fn weights(&self) -> &[u64] {
        &self.weights
    }
}

/// Knobs for one demand set.
#[derive(Debug, Clone)]
pub struct TrafficParams {
    /// Number of objectives to generate.
    pub objective_count: u64,
    /// Arrival rate: inter-arrival gaps are `Exp(rate)` (mean `1/rate`
    /// seconds).
    pub arrival_rate: f64,
    /// Reservation duration of every objective.
    pub duration: TimePs,
    /// Memory qubits per link (`k`).
    pub memories: u32,
    pub target_fidelity: WernerFidelity,
    /// End-to-end pairs requested per objective (`n_p`).
    pub pair_count: u32,
}

impl Default for TrafficParams {
    fn default() -> Self {
        TrafficParams {
            objective_count: 100,
            arrival_rate: 50.0,
            duration: TimePs::from_secs_f64(1.0),
            memories: 1,
            target_fidelity: WernerFidelity::new(0.5).unwrap(),
            pair_count: 100,
        }
    }
}

impl TrafficParams {
    pub fn validate(&self) -> Result<()> {
        if self.objective_count == 0 {
            return Err(Error::invalid("objective_count", "must be >= 1"));
        }
        if !(self.arrival_rate > 0.0) || !self.arrival_rate.is_finite() {
            return Err(Error::invalid(
                "arrival_rate",
                format!("must be > 0, got {}", self.arrival_rate),
            ));
        }
        if self.duration == TimePs::ZERO {
            return Err(Error::invalid("duration", "must be > 0"));
        }
        if self.memories == 0 {
            return Err(Error::invalid("memories", "must be >= 1"));
        }
        if self.pair_count == 0 {
            return Err(Error::invalid("pair_count", "must be >= 1"));
        }
        Ok(())
    }
}

/// Draws the objective stream: ids in arrival order, strictly increasing
/// arrival times, endpoints from the traffic matrix, priorities uniform
/// over the three classes.
///
/// Endpoints, priorities, and inter-arrivals each consume an independent
/// random stream derived from `seed`, so the draws stay aligned under
/// parameter changes that only affect one stream.
pub fn generate_objectives(
    matrix: &TrafficMatrix,
    params: &TrafficParams,
    seed: u64,
) -> Result<Vec<Objective>> {
    params.validate()?;
    let weighted = rand::distr::weighted::WeightedIndex::new(matrix.weights())
        .map_err(|e| Error::invalid("traffic matrix", e.to_string()))?;
    let exp = rand_distr::Exp::new(params.arrival_rate)
        .map_err(|e| Error::invalid("arrival_rate", e.to_string()))?;
    let mut pair_rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, "endpoint-pairs"));
    let mut priority_rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, "priorities"));
    let mut arrival_rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, "inter-arrivals"));

    let mut objectives = Vec::with_capacity(params.objective_count as usize);
    let mut clock = TimePs::ZERO;
    for id in 0..params.objective_count {
        // Gaps round to >= 1 ps so arrival times are strictly increasing.
        let gap_s: f64 = exp.sample(&mut arrival_rng);
        clock += TimePs(TimePs::from_secs_f64(gap_s).0.max(1));
        let (source, destination) = matrix.pairs()[weighted.sample(&mut pair_rng)];
        let priority = priority_rng.random_range(0..PRIORITY_CLASSES);
        objectives.push(Objective {
            id,
            source,
            destination,
            arrival: clock,
            end: clock + params.duration,
            memories: params.memories,
            target_fidelity: params.target_fidelity,
            pair_count: params.pair_count,
            priority,
        });
    }
    Ok(objectives)
}

//! Run configuration: TOML schema, defaults, validation, and fingerprints.
//!
//! Every knob has a default, so a minimal config only has to pick a
//! topology:
//!
//! ```toml
//! [topology]
//! kind = "star"
//! leaves = 25
//! ```

use crate::error::{Error, Result};
use crate::kernel::ControlParams;
use crate::physics::{NoiseParams, WernerFidelity};
use crate::seeds::fnv1a64;
use crate::time::TimePs;
use crate::topology::{
    make_bottleneck, make_caveman, make_grid, make_star, Topology, DEFAULT_LINK_LENGTH_KM,
};
use crate::traffic::TrafficParams;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

/// Complete configuration of one run (or one sweep).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub topology: TopologySection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub traffic: TrafficSection,
    #[serde(default)]
    pub control: ControlSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

/// Which topology to build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    /// One of `star`, `bottleneck`, `grid`, `caveman`, `file`.
    pub kind: String,
    /// Star: number of processor leaves.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaves: Option<u32>,
    /// Bottleneck: leaves on the first hub.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left_leaves: Option<u32>,
    /// Bottleneck: leaves on the second hub.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right_leaves: Option<u32>,
    /// Grid: row count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<u32>,
    /// Grid: column count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cols: Option<u32>,
    /// Caveman: number of cliques.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cliques: Option<u32>,
    /// Caveman: nodes per clique.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clique_size: Option<u32>,
    /// File: path to a topology JSON document.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    /// Fibre length of every link, km.
    #[serde(default = "default_link_length")]
    pub link_length_km: f64,
}

fn default_link_length() -> f64 {
    DEFAULT_LINK_LENGTH_KM
}

/// How the two-qubit and measurement quality numbers are to be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QualityConvention {
    /// `cnot`/`measurement` are fidelities; error rates are one minus them.
    #[default]
    Fidelities,
    /// `cnot`/`measurement` are error probabilities, used directly.
    Errors,
}

/// Physical-noise knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    /// Interpretation of `cnot` and `measurement`.
    pub table_values_are: QualityConvention,
    /// Two-qubit gate quality (fidelity 0.99 by default).
    pub cnot: f64,
    /// Measurement quality (fidelity 0.995 by default).
    pub measurement: f64,
    /// Memory coherence time τ, seconds.
    pub coherence_time_s: f64,
    /// Fidelity of a freshly heralded link pair.
    pub initial_fidelity: f64,
    /// Fibre attenuation, dB/km.
    pub attenuation_db_per_km: f64,
    /// Entanglement-generation repetition rate, Hz.
    pub repetition_rate_hz: f64,
    /// Speed of light in fibre, km/s.
    pub light_speed_km_per_s: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            table_values_are: QualityConvention::Fidelities,
            cnot: 0.99,
            measurement: 0.995,
            coherence_time_s: 2.0,
            initial_fidelity: 0.9,
            attenuation_db_per_km: 0.2,
            repetition_rate_hz: 1e10,
            light_speed_km_per_s: 2e5,
        }
    }
}

impl NoiseSection {
    /// Resolves the section into simulator noise parameters.
    pub fn to_noise_params(&self) -> Result<NoiseParams> {
        let (gate_error, measurement_error) = match self.table_values_are {
            QualityConvention::Fidelities => (1.0 - self.cnot, 1.0 - self.measurement),
            QualityConvention::Errors => (self.cnot, self.measurement),
        };
        let params = NoiseParams {
            gate_error,
            measurement_error,
            coherence_time_s: self.coherence_time_s,
            initial_fidelity: WernerFidelity::new(self.initial_fidelity)
                .map_err(|_| Error::invalid("noise.initial_fidelity", "outside [0.25, 1]"))?,
            attenuation_db_per_km: self.attenuation_db_per_km,
            repetition_rate_hz: self.repetition_rate_hz,
            light_speed_km_per_s: self.light_speed_km_per_s,
        };
        params.validate()?;
        Ok(params)
    }
}

/// Workload shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficSection {
    /// λ: mean of the traffic-matrix entries and the arrival rate (1/s).
    pub arrival_rate: f64,
    /// Number of objectives to generate.
    pub objective_count: u64,
    /// Reservation window length Δt, seconds.
    pub duration_s: f64,
    /// Memories k requested per endpoint (relays hold 2k).
    pub memories: u32,
    /// Entangled pairs each objective asks for.
    pub pair_count: u32,
    /// Fidelity floor recorded with each objective.
    pub target_fidelity: f64,
}

impl Default for TrafficSection {
    fn default() -> Self {
        TrafficSection {
            arrival_rate: 50.0,
            objective_count: 100,
            duration_s: 1.0,
            memories: 1,
            pair_count: 100,
            target_fidelity: 0.5,
        }
    }
}

/// Control-plane timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlSection {
    /// One-way classical message delay, seconds.
    pub classical_delay_s: f64,
    /// How far ahead of a saga's start its notifications are sent, seconds.
    pub buffer_s: f64,
}

impl Default for ControlSection {
    fn default() -> Self {
        ControlSection {
            classical_delay_s: 1e-3,
            buffer_s: 50e-3,
        }
    }
}

/// Run identity and output placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub out_dir: String,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 1,
            out_dir: "results".to_string(),
        }
    }
}

/// Optional sweep declaration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: crate::metrics::SweepAxis,
    pub values: Vec<f64>,
}

impl RunConfig {
    /// Parses a TOML document.
    pub fn from_toml_str(text: &str) -> Result<RunConfig> {
        if text.trim().is_empty() {
            return Err(Error::Config(
                "empty config: expected a TOML document with a [topology] section".to_string(),
            ));
        }
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads and parses a TOML config file.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path.to_path_buf(), e))?;
        Self::from_toml_str(&text)
    }

    /// Serializes the fully resolved config back to TOML.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// Builds the configured topology.
    pub fn build_topology(&self) -> Result<Topology> {
        let t = &self.topology;
        if !(t.link_length_km > 0.0) || !t.link_length_km.is_finite() {
            return Err(Error::invalid(
                "topology.link_length_km",
                format!("must be positive and finite, got {}", t.link_length_km),
            ));
        }
        let need = |field: &'static str, v: Option<u32>| {
            v.ok_or_else(|| {
                Error::invalid(
                    "topology",
                    format!("kind {:?} requires field {field:?}", t.kind),
                )
            })
        };
        let mut topo = match t.kind.as_str() {
            "star" => make_star(need("leaves", t.leaves)?)?,
            "bottleneck" => make_bottleneck(
                need("left_leaves", t.left_leaves)?,
                need("right_leaves", t.right_leaves)?,
            )?,
            "grid" => make_grid(need("rows", t.rows)?, need("cols", t.cols)?)?,
            "caveman" => make_caveman(
                need("cliques", t.cliques)?,
                need("clique_size", t.clique_size)?,
            )?,
            "file" => {
                let path = t.path.as_deref().ok_or_else(|| {
                    Error::invalid("topology", "kind \"file\" requires field \"path\"")
                })?;
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::io(Path::new(path).to_path_buf(), e))?;
                Topology::from_json_str(&text)?
            }
            other => {
                return Err(Error::invalid(
                    "topology.kind",
                    format!(
                        "unknown kind {other:?}; expected star, bottleneck, grid, caveman, or file"
                    ),
                ))
            }
        };
        topo.link_length_km = t.link_length_km;
        Ok(topo)
    }

    /// Resolves the noise section.
    pub fn noise_params(&self) -> Result<NoiseParams> {
        self.noise.to_noise_params()
    }

    /// Resolves the traffic section.
    pub fn traffic_params(&self) -> Result<TrafficParams> {
        let t = &self.traffic;
        let params = TrafficParams {
            objective_count: t.objective_count,
            arrival_rate: t.arrival_rate,
            duration: TimePs::from_secs_f64(t.duration_s),
            memories: t.memories,
            target_fidelity: WernerFidelity::new(t.target_fidelity)
                .map_err(|_| Error::invalid("traffic.target_fidelity", "outside [0.25, 1]"))?,
            pair_count: t.pair_count,
        };
        params.validate()?;
        Ok(params)
    }

    /// Resolves the control section.
    pub fn control_params(&self) -> Result<ControlParams> {
        let c = &self.control;
        if !(c.classical_delay_s >= 0.0) || !c.classical_delay_s.is_finite() {
            return Err(Error::invalid(
                "control.classical_delay_s",
                format!("must be non-negative and finite, got {}", c.classical_delay_s),
            ));
        }
        if c.buffer_s < c.classical_delay_s || !c.buffer_s.is_finite() {
            return Err(Error::invalid(
                "control.buffer_s",
                format!(
                    "must be finite and at least classical_delay_s ({}), got {}",
                    c.classical_delay_s, c.buffer_s
                ),
            ));
        }
        Ok(ControlParams {
            classical_delay: TimePs::from_secs_f64(c.classical_delay_s),
            buffer: TimePs::from_secs_f64(c.buffer_s),
        })
    }

    /// Validates every section, building each derived object once.
    pub fn validate(&self) -> Result<()> {
        self.build_topology()?;
        self.noise_params()?;
        self.traffic_params()?;
        self.control_params()?;
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(Error::invalid("sweep.values", "must not be empty"));
            }
        }
        Ok(())
    }

    /// Stable hex fingerprint of everything that shapes results (the output
    /// directory does not).
    pub fn fingerprint(&self) -> String {
        let mut canonical = self.clone();
        canonical.run.out_dir = String::new();
        let text = canonical
            .to_toml_string()
            .expect("a validated config serializes");
        format!("{:016x}", fnv1a64(text.as_bytes()))
    }
}

//! Closed-form Werner-state fidelity arithmetic.
//!
//! Every entangled pair is modelled as a Werner state — a Bell state mixed
//! with white noise — so a single scalar, the fidelity with the target Bell
//! state, captures the full quantum state. Storage decay and entanglement
//! swapping both map Werner states to Werner states, which gives closed
//! forms for everything the simulator needs and makes density-matrix
//! simulation unnecessary at run time.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Fidelity of the fully mixed two-qubit state, the floor of the Werner
/// range.
pub const MIN_WERNER_FIDELITY: f64 = 0.25;

/// Fidelity of a Werner state with its target Bell state, in `[1/4, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WernerFidelity(f64);

impl WernerFidelity {
    /// Wraps a fidelity, rejecting values outside `[1/4, 1]`.
    pub fn new(value: f64) -> Result<WernerFidelity> {
        if !value.is_finite() || !(MIN_WERNER_FIDELITY..=1.0).contains(&value) {
            return Err(Error::invalid(
                "fidelity",
                format!("must lie in [0.25, 1], got {value}"),
            ));
        }
        Ok(WernerFidelity(value))
    }

    /// Wraps a fidelity, clamping into `[1/4, 1]`. Swap output can land
    /// below 1/4 when the measurement-error probability exceeds 1/2; the
    /// state is then no better than fully mixed, which is what the clamp
    /// expresses.
    pub fn clamped(value: f64) -> WernerFidelity {
        WernerFidelity(value.clamp(MIN_WERNER_FIDELITY, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Physical-layer noise and timing parameters.
///
/// `gate_error` and `measurement_error` are *error probabilities* (a
/// perfect device has 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Two-qubit depolarizing error probability of the swap's CNOT.
    pub gate_error: f64,
    /// Classical readout flip probability per measured qubit.
    pub measurement_error: f64,
    /// Memory coherence time `tau` in seconds.
    pub coherence_time_s: f64,
    /// Fidelity of a freshly heralded link-level pair.
    pub initial_fidelity: WernerFidelity,
    /// Fiber attenuation in dB/km.
    pub attenuation_db_per_km: f64,
    /// Entanglement-source repetition rate in Hz.
    pub repetition_rate_hz: f64,
    /// Speed of light in fiber, km/s.
    pub light_speed_km_per_s: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            // Written as one minus the gate/measurement fidelities so the
            // values are bit-identical to what a config resolves to.
            gate_error: 1.0 - 0.99,
            measurement_error: 1.0 - 0.995,
            coherence_time_s: 2.0,
            initial_fidelity: WernerFidelity(0.9),
            attenuation_db_per_km: 0.2,
            repetition_rate_hz: 1e10,
            light_speed_km_per_s: 2e5,
        }
    }
}

impl NoiseParams {
    pub fn validate(&self) -> Result<()> {
        let check_prob = |name, v: f64| {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                Err(Error::invalid(name, format!("must lie in [0, 1], got {v}")))
            } else {
                Ok(())
            }
        };
        check_prob("gate_error", self.gate_error)?;
        check_prob("measurement_error", self.measurement_error)?;
        let check_pos = |name, v: f64| {
            if !(v > 0.0) || !v.is_finite() {
                Err(Error::invalid(name, format!("must be > 0, got {v}")))
            } else {
                Ok(())
            }
        };
        check_pos("coherence_time_s", self.coherence_time_s)?;
        check_pos("repetition_rate_hz", self.repetition_rate_hz)?;
        check_pos("light_speed_km_per_s", self.light_speed_km_per_s)?;
        if self.attenuation_db_per_km < 0.0 || !self.attenuation_db_per_km.is_finite() {
            return Err(Error::invalid(
                "attenuation_db_per_km",
                format!("must be >= 0, got {}", self.attenuation_db_per_km),
            ));
        }
        Ok(())
    }
}

/// Fidelity after a pair sits in memory for `elapsed_s` seconds.
///
/// Each qubit independently depolarizes with probability `1 - e^(-t/tau)`
/// (replacement by the maximally mixed state), which drives the pair
/// toward the fully mixed state:
///
/// `F(t) = F_in * e^(-2t/tau) + (1 - e^(-2t/tau)) / 4`
pub fn decay_fidelity(f_in: WernerFidelity, elapsed_s: f64, tau_s: f64) -> Result<WernerFidelity> {
    if !(elapsed_s >= 0.0) || !elapsed_s.is_finite() {
        return Err(Error::invalid(
            "elapsed_s",
            format!("must be >= 0, got {elapsed_s}"),
        ));
    }
    if !(tau_s > 0.0) || !tau_s.is_finite() {
        return Err(Error::invalid("tau_s", format!("must be > 0, got {tau_s}")));
    }
    let keep = (-2.0 * elapsed_s / tau_s).exp();
    // Exact convex combination of f_in and 1/4; stays in range by
    // construction, so no clamping is needed.
    Ok(WernerFidelity(
        f_in.0 * keep + (1.0 - keep) * MIN_WERNER_FIDELITY,
    ))
}

/// Raw fidelity produced by swapping two Werner pairs at a common node.
///
/// The node applies CNOT + Bell-basis readout on its two qubits; the CNOT
/// depolarizes both qubits with probability `gate_error`, and each readout
/// bit independently flips with probability `measurement_error`, applying
/// the wrong Pauli correction at the far end. With `e_i = (1 - F_i)/3`:
///
/// - both readouts correct, probability `(1-pm)^2`: target weight
///   `F1*F2 + 3*e1*e2`;
/// - at least one flipped, probability `pm*(2-pm)`: the correction maps a
///   matched error branch onto the target, weight `F1*e2 + e1*F2 + 2*e1*e2`.
///
/// Returned unclamped (and thus possibly below 1/4 when
/// `measurement_error > 1/2`): exactness here is what the density-matrix
/// equivalence tests check. [`swap_fidelity`] is the clamped public form.
pub fn swap_fidelity_value(f1: f64, f2: f64, gate_error: f64, measurement_error: f64) -> f64 {
    let e1 = (1.0 - f1) / 3.0;
    let e2 = (1.0 - f2) / 3.0;
    let both_correct = (1.0 - measurement_error) * (1.0 - measurement_error);
    let any_flip = measurement_error * (2.0 - measurement_error);
    gate_error / 4.0
        + (1.0 - gate_error)
            * (both_correct * (f1 * f2 + 3.0 * e1 * e2)
                + any_flip * (f1 * e2 + e1 * f2 + 2.0 * e1 * e2))
}

/// Fidelity of the pair produced by swapping `f1` and `f2`, clamped to the
/// Werner range.
pub fn swap_fidelity(
    f1: WernerFidelity,
    f2: WernerFidelity,
    params: &NoiseParams,
) -> WernerFidelity {
    WernerFidelity::clamped(swap_fidelity_value(
        f1.0,
        f2.0,
        params.gate_error,
        params.measurement_error,
    ))
}

/// Probability that one generation attempt over a fiber link of
/// `link_length_km` heralds a pair: a 1/2 intrinsic factor times the fiber
/// transmission `10^(-attenuation * L / 10)`.
pub fn link_success_probability(params: &NoiseParams, link_length_km: f64) -> f64 {
    0.5 * 10f64.powf(-params.attenuation_db_per_km * link_length_km / 10.0)
}

/// Seconds between consecutive generation attempts on a link: the source
/// cannot fire faster than its repetition rate, nor faster than light
/// crosses the fiber to herald the outcome.
pub fn attempt_period_s(params: &NoiseParams, link_length_km: f64) -> f64 {
    (1.0 / params.repetition_rate_hz).max(link_length_km / params.light_speed_km_per_s)
}

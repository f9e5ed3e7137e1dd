//! Discrete-event simulator for entanglement distribution in quantum
//! networks, driven by a centralized, resource-centric control plane.
//!
//! The pipeline has three stages:
//!
//! 1. [`traffic`] draws a randomized demand set (objectives) over the
//!    processor nodes of a [`topology`].
//! 2. [`scheduler`] turns objectives into *sagas*: conflict-free
//!    reservations of memory qubits along shortest paths, found offline by
//!    priority-ordered backoff search over per-memory timecards.
//! 3. [`kernel`] executes the approved sagas as a discrete-event
//!    simulation — heralded link-level entanglement generation, storage
//!    decay, and entanglement swapping — producing end-to-end delivery
//!    records that [`metrics`] aggregates.
//!
//! Pair quality is tracked analytically in the Werner-state model
//! implemented by [`physics`]; no density matrices are simulated at run
//! time. All stages are deterministic for a fixed seed.

pub mod cli;
pub mod config;
pub mod error;
pub mod kernel;
pub mod metrics;
pub mod physics;
pub mod pipeline;
pub mod scheduler;
pub mod seeds;
pub mod time;
pub mod topology;
pub mod traffic;

pub use error::{Error, Result};

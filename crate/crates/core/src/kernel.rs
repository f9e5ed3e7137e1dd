//! Discrete-event execution of approved sagas.
//!
//! Each saga owns the memory cells the scheduler reserved for it: one cell
//! per (path position, facing direction, channel). Links attempt heralded
//! entanglement generation on a fixed grid of attempt slots whenever both
//! facing cells are free; a successful attempt heralds one attempt-period
//! later and materializes a link-level pair. The swap policy is eager: the
//! moment a relay holds pairs arriving from both sides it schedules a swap,
//! which completes one classical delay later, consuming the inputs (decayed
//! to the swap instant) and producing a longer pair. A pair spanning the
//! whole path is delivered on the spot. Everything is driven by one event
//! calendar ordered by `(time, insertion sequence)`, so runs are exactly
//! reproducible for a fixed seed.

use crate::error::{Error, Result};
use crate::physics::{
    attempt_period_s, decay_fidelity, link_success_probability, swap_fidelity_value, NoiseParams,
    WernerFidelity,
};
use crate::scheduler::{emit_sagas, Saga};
use crate::time::TimePs;
use crate::topology::NodeId;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Classical control-plane timing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlParams {
    /// One-way classical message delay between neighbors.
    pub classical_delay: TimePs,
    /// How far ahead of its window a saga is announced to its path nodes.
    pub buffer: TimePs,
}

impl Default for ControlParams {
    fn default() -> Self {
        ControlParams {
            classical_delay: TimePs::from_secs_f64(1e-3),
            buffer: TimePs::from_secs_f64(0.05),
        }
    }
}

/// Everything the event loop needs, with link physics already folded in.
#[derive(Debug, Clone)]
pub struct KernelParams {
    /// Herald probability of one generation attempt.
    pub success_prob: f64,
    /// Spacing of the attempt grid (also the attempt-to-herald latency).
    pub attempt_period: TimePs,
    pub classical_delay: TimePs,
    pub buffer: TimePs,
    /// Fidelity of a freshly heralded link pair.
    pub initial_fidelity: WernerFidelity,
    pub coherence_time_s: f64,
    pub gate_error: f64,
    pub measurement_error: f64,
}

impl KernelParams {
    pub fn from_noise(
        noise: &NoiseParams,
        link_length_km: f64,
        control: &ControlParams,
    ) -> KernelParams {
        KernelParams {
            success_prob: link_success_probability(noise, link_length_km),
            attempt_period: TimePs::from_secs_f64(attempt_period_s(noise, link_length_km)),
            classical_delay: control.classical_delay,
            buffer: control.buffer,
            initial_fidelity: noise.initial_fidelity,
            coherence_time_s: noise.coherence_time_s,
            gate_error: noise.gate_error,
            measurement_error: noise.measurement_error,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.success_prob > 0.0 && self.success_prob <= 1.0) {
            return Err(Error::invalid(
                "success_prob",
                format!("must lie in (0, 1], got {}", self.success_prob),
            ));
        }
        if self.attempt_period == TimePs::ZERO {
            return Err(Error::invalid("attempt_period", "must be > 0"));
        }
        if self.buffer < self.classical_delay {
            return Err(Error::invalid(
                "buffer",
                format!(
                    "buffer {} is shorter than the classical delay {}",
                    self.buffer, self.classical_delay
                ),
            ));
        }
        if !(self.coherence_time_s > 0.0) || !self.coherence_time_s.is_finite() {
            return Err(Error::invalid(
                "coherence_time_s",
                format!("must be > 0, got {}", self.coherence_time_s),
            ));
        }
        Ok(())
    }
}

/// One delivered end-to-end pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveryRecord {
    /// Objective id of the saga that produced the pair.
    pub saga_id: u64,
    /// 0-based index of the pair within its saga.
    pub pair_seq: u32,
    pub delivered_at: TimePs,
    pub fidelity: WernerFidelity,
    /// Path length of the saga in links.
    pub hops: u32,
    pub priority: u8,
    /// Delivery time minus the objective's originally requested start.
    pub time_to_serve: TimePs,
    /// True when the delivered fidelity missed the objective's target.
    pub below_target: bool,
}

/// What can happen on the event calendar.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    /// A path node receives the advance announcement of a saga.
    Notify { saga: usize, node: NodeId },
    /// A saga's reservation window opens (all nodes already notified).
    SagaStart { saga: usize },
    /// A saga's reservation window closes; late events are discarded.
    SagaEnd { saga: usize },
    /// A link fires one generation attempt on one channel.
    GenerationAttempt { saga: usize, link: usize, channel: usize },
    /// The attempt one period ago succeeded; the link pair now exists.
    GenerationHerald { saga: usize, link: usize, channel: usize },
    /// A scheduled swap at a relay fires, merging two pairs.
    SwapComplete {
        saga: usize,
        path_pos: usize,
        left_pair: usize,
        right_pair: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Event {
    time: TimePs,
    seq: u64,
    kind: EventKind,
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// One swap as it fired, for causality and fidelity checks.
#[derive(Debug, Clone, PartialEq)]
pub struct SwapTraceEntry {
    pub saga_index: usize,
    pub node: NodeId,
    pub fired_at: TimePs,
    pub left_created_at: TimePs,
    pub right_created_at: TimePs,
    pub output_fidelity: f64,
}

/// One herald as it landed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeraldTraceEntry {
    pub saga_index: usize,
    pub link: usize,
    pub time: TimePs,
}

/// Optional run trace (tests and diagnostics only).
#[derive(Debug, Clone, Default)]
pub struct KernelTrace {
    pub swaps: Vec<SwapTraceEntry>,
    pub heralds: Vec<HeraldTraceEntry>,
}

/// Runs every saga to completion or window close; deliveries come back in
/// delivery-time order.
pub fn run(sagas: &[Saga], params: &KernelParams, seed: u64) -> Result<Vec<DeliveryRecord>> {
    Ok(Kernel::new(sagas, params, seed, false)?.run().0)
}

/// [`run`] plus a full trace of heralds and swaps.
pub fn run_traced(
    sagas: &[Saga],
    params: &KernelParams,
    seed: u64,
) -> Result<(Vec<DeliveryRecord>, KernelTrace)> {
    let (records, trace) = Kernel::new(sagas, params, seed, true)?.run();
    Ok((records, trace.unwrap_or_default()))
}

const LEFT: usize = 0; // facing the previous path node
const RIGHT: usize = 1; // facing the next path node

/// State of one reserved memory cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CellStatus {
    Free,
    /// Committed to a generation attempt whose outcome is pending.
    AwaitingHerald,
    /// Storing one qubit of the pair with this arena index.
    Holding(usize),
}

/// One entangled pair held by a saga, spanning path positions
/// `[left_pos, right_pos]`.
#[derive(Debug, Clone, Copy)]
struct PairState {
    left_pos: usize,
    right_pos: usize,
    /// Channel of the right-facing cell occupied at `left_pos`.
    left_channel: usize,
    /// Channel of the left-facing cell occupied at `right_pos`.
    right_channel: usize,
    fidelity_at_creation: f64,
    created_at: TimePs,
    consumed: bool,
}

/// Execution state of one saga.
struct SagaRun {
    saga_id: u64,
    priority: u8,
    hops: u32,
    target_fidelity: f64,
    pair_goal: u32,
    requested_start: TimePs,
    effective_start: TimePs,
    window_end: TimePs,
    channels: usize,
    path: Vec<NodeId>,
    active: bool,
    delivered: u32,
    notified: usize,
    /// `cells[pos][side][channel]`; endpoint sides that face off-path are
    /// empty vectors.
    cells: Vec<[Vec<CellStatus>; 2]>,
    /// Pair arena; consumed slots are recycled through `free_slots` so
    /// memory use tracks live pairs, not total pairs ever created.
    pairs: Vec<PairState>,
    free_slots: Vec<usize>,
    /// Unlocked pairs by left endpoint position.
    ready_left: Vec<Vec<usize>>,
    /// Unlocked pairs by right endpoint position.
    ready_right: Vec<Vec<usize>>,
}

struct Kernel {
    params: KernelParams,
    sagas: Vec<SagaRun>,
    events: BinaryHeap<Reverse<Event>>,
    seq: u64,
    rng: ChaCha12Rng,
    records: Vec<DeliveryRecord>,
    trace: Option<KernelTrace>,
}

impl Kernel {
    fn new(sagas: &[Saga], params: &KernelParams, seed: u64, traced: bool) -> Result<Kernel> {
        params.validate()?;
        let mut kernel = Kernel {
            params: params.clone(),
            sagas: Vec::with_capacity(sagas.len()),
            events: BinaryHeap::new(),
            seq: 0,
            rng: ChaCha12Rng::seed_from_u64(crate::seeds::derive_seed(seed, "kernel")),
            records: Vec::new(),
            trace: traced.then(KernelTrace::default),
        };
        let notifications = emit_sagas(sagas, params.classical_delay, params.buffer)?;
        // All of a saga's notifications arrive at the same instant, so the
        // window effectively opens at the later of the scheduled start and
        // that arrival.
        let mut latest_notify = vec![TimePs::ZERO; sagas.len()];
        for n in &notifications {
            latest_notify[n.saga_index] = latest_notify[n.saga_index].max(n.arrival_time);
            kernel.push(
                n.arrival_time,
                EventKind::Notify {
                    saga: n.saga_index,
                    node: n.node,
                },
            );
        }
        for (idx, saga) in sagas.iter().enumerate() {
            let positions = saga.path.len();
            let k = saga.objective.memories as usize;
            let mut cells = Vec::with_capacity(positions);
            for pos in 0..positions {
                let left = if pos == 0 { 0 } else { k };
                let right = if pos + 1 == positions { 0 } else { k };
                cells.push([
                    vec![CellStatus::Free; left],
                    vec![CellStatus::Free; right],
                ]);
            }
            let effective_start = saga.scheduled_start.max(latest_notify[idx]);
            kernel.sagas.push(SagaRun {
                saga_id: saga.objective.id,
                priority: saga.objective.priority,
                hops: saga.hops(),
                target_fidelity: saga.objective.target_fidelity.value(),
                pair_goal: saga.objective.pair_count,
                requested_start: saga.requested_start(),
                effective_start,
                window_end: saga.scheduled_end,
                channels: k,
                path: saga.path.clone(),
                active: false,
                delivered: 0,
                notified: 0,
                cells,
                pairs: Vec::new(),
                free_slots: Vec::new(),
                ready_left: vec![Vec::new(); positions],
                ready_right: vec![Vec::new(); positions],
            });
            kernel.push(effective_start, EventKind::SagaStart { saga: idx });
            kernel.push(saga.scheduled_end, EventKind::SagaEnd { saga: idx });
        }
        Ok(kernel)
    }

    fn push(&mut self, time: TimePs, kind: EventKind) {
        self.events.push(Reverse(Event {
            time,
            seq: self.seq,
            kind,
        }));
        self.seq += 1;
    }

    fn run(mut self) -> (Vec<DeliveryRecord>, Option<KernelTrace>) {
        while let Some(Reverse(event)) = self.events.pop() {
            let now = event.time;
            match event.kind {
                EventKind::Notify { saga, .. } => {
                    self.sagas[saga].notified += 1;
                }
                EventKind::SagaStart { saga } => self.on_saga_start(saga, now),
                EventKind::SagaEnd { saga } => {
                    self.sagas[saga].active = false;
                }
                EventKind::GenerationAttempt {
                    saga,
                    link,
                    channel,
                } => self.on_attempt(saga, link, channel, now),
                EventKind::GenerationHerald {
                    saga,
                    link,
                    channel,
                } => self.on_herald(saga, link, channel, now),
                EventKind::SwapComplete {
                    saga,
                    path_pos,
                    left_pair,
                    right_pair,
                } => self.on_swap_complete(saga, path_pos, left_pair, right_pair, now),
            }
        }
        (self.records, self.trace)
    }

    fn on_saga_start(&mut self, si: usize, now: TimePs) {
        {
            let s = &self.sagas[si];
            // A degenerate window that closed before it could open.
            if now >= s.window_end {
                return;
            }
            debug_assert_eq!(s.notified, s.path.len(), "saga started before notification");
        }
        self.sagas[si].active = true;
        let (links, channels) = {
            let s = &self.sagas[si];
            (s.path.len() - 1, s.channels)
        };
        for link in 0..links {
            for ch in 0..channels {
                self.try_begin_generation(si, link, ch, now);
            }
        }
    }

    /// Starts attempting on `link`/`channel` if both facing cells are free
    /// and a herald could still land inside the window. Attempts snap to
    /// the saga's attempt grid (anchored at its effective start).
    fn try_begin_generation(&mut self, si: usize, link: usize, ch: usize, now: TimePs) {
        let period = self.params.attempt_period;
        let s = &mut self.sagas[si];
        if !s.active {
            return;
        }
        if s.cells[link][RIGHT][ch] != CellStatus::Free
            || s.cells[link + 1][LEFT][ch] != CellStatus::Free
        {
            return;
        }
        let slot = now.align_up(s.effective_start, period);
        if slot + period >= s.window_end {
            return;
        }
        s.cells[link][RIGHT][ch] = CellStatus::AwaitingHerald;
        s.cells[link + 1][LEFT][ch] = CellStatus::AwaitingHerald;
        self.push(
            slot,
            EventKind::GenerationAttempt {
                saga: si,
                link,
                channel: ch,
            },
        );
    }

    fn on_attempt(&mut self, si: usize, link: usize, ch: usize, now: TimePs) {
        if !self.sagas[si].active {
            return;
        }
        debug_assert_eq!(
            self.sagas[si].cells[link][RIGHT][ch],
            CellStatus::AwaitingHerald
        );
        let period = self.params.attempt_period;
        if self.rng.random_bool(self.params.success_prob) {
            self.push(
                now + period,
                EventKind::GenerationHerald {
                    saga: si,
                    link,
                    channel: ch,
                },
            );
        } else {
            // The outcome is known one period from now; retry right away if
            // another herald could still land inside the window.
            let next = now + period;
            if next + period < self.sagas[si].window_end {
                self.push(
                    next,
                    EventKind::GenerationAttempt {
                        saga: si,
                        link,
                        channel: ch,
                    },
                );
            } else {
                let s = &mut self.sagas[si];
                s.cells[link][RIGHT][ch] = CellStatus::Free;
                s.cells[link + 1][LEFT][ch] = CellStatus::Free;
            }
        }
    }

    fn alloc_pair(&mut self, si: usize, pair: PairState) -> usize {
        let s = &mut self.sagas[si];
        match s.free_slots.pop() {
            Some(idx) => {
                s.pairs[idx] = pair;
                idx
            }
            None => {
                s.pairs.push(pair);
                s.pairs.len() - 1
            }
        }
    }

    fn consume_pair(&mut self, si: usize, idx: usize) {
        let s = &mut self.sagas[si];
        debug_assert!(!s.pairs[idx].consumed, "pair consumed twice");
        s.pairs[idx].consumed = true;
        s.free_slots.push(idx);
    }

    fn on_herald(&mut self, si: usize, link: usize, ch: usize, now: TimePs) {
        if !self.sagas[si].active {
            return;
        }
        if let Some(trace) = &mut self.trace {
            trace.heralds.push(HeraldTraceEntry {
                saga_index: si,
                link,
                time: now,
            });
        }
        let idx = self.alloc_pair(
            si,
            PairState {
                left_pos: link,
                right_pos: link + 1,
                left_channel: ch,
                right_channel: ch,
                fidelity_at_creation: self.params.initial_fidelity.value(),
                created_at: now,
                consumed: false,
            },
        );
        let s = &mut self.sagas[si];
        s.cells[link][RIGHT][ch] = CellStatus::Holding(idx);
        s.cells[link + 1][LEFT][ch] = CellStatus::Holding(idx);
        self.on_pair_created(si, idx, now);
    }

    /// Routes a fresh pair: immediate delivery if it spans the whole path,
    /// otherwise into the ready lists followed by eager swap checks at both
    /// interior endpoints.
    fn on_pair_created(&mut self, si: usize, idx: usize, now: TimePs) {
        let (l, r, last) = {
            let s = &self.sagas[si];
            let p = &s.pairs[idx];
            (p.left_pos, p.right_pos, s.path.len() - 1)
        };
        if l == 0 && r == last {
            self.deliver(si, idx, now);
            return;
        }
        {
            let s = &mut self.sagas[si];
            s.ready_left[l].push(idx);
            s.ready_right[r].push(idx);
        }
        if l != 0 {
            self.try_swap_at(si, l, now);
        }
        if r != last {
            self.try_swap_at(si, r, now);
        }
    }

    /// Schedules swaps at a relay while it holds a pair from each side.
    /// The earliest-created pair on each side goes first; chosen pairs are
    /// locked (left the ready lists) until their swap fires.
    fn try_swap_at(&mut self, si: usize, pos: usize, now: TimePs) {
        loop {
            let (a, b) = {
                let s = &mut self.sagas[si];
                let (Some(&a), Some(&b)) = (s.ready_right[pos].first(), s.ready_left[pos].first())
                else {
                    return;
                };
                let a_left = s.pairs[a].left_pos;
                let b_right = s.pairs[b].right_pos;
                s.ready_right[pos].retain(|&x| x != a);
                s.ready_left[a_left].retain(|&x| x != a);
                s.ready_left[pos].retain(|&x| x != b);
                s.ready_right[b_right].retain(|&x| x != b);
                (a, b)
            };
            self.push(
                now + self.params.classical_delay,
                EventKind::SwapComplete {
                    saga: si,
                    path_pos: pos,
                    left_pair: a,
                    right_pair: b,
                },
            );
        }
    }

    fn decayed(&self, pair: &PairState, at: TimePs) -> f64 {
        let elapsed = (at - pair.created_at).as_secs_f64();
        decay_fidelity(
            WernerFidelity::clamped(pair.fidelity_at_creation),
            elapsed,
            self.params.coherence_time_s,
        )
        .expect("elapsed time is non-negative")
        .value()
    }

    fn on_swap_complete(&mut self, si: usize, pos: usize, a: usize, b: usize, now: TimePs) {
        if !self.sagas[si].active {
            return;
        }
        let (pa, pb) = {
            let s = &self.sagas[si];
            (s.pairs[a], s.pairs[b])
        };
        debug_assert!(!pa.consumed && !pb.consumed);
        debug_assert_eq!(pa.right_pos, pos);
        debug_assert_eq!(pb.left_pos, pos);
        let fa = self.decayed(&pa, now);
        let fb = self.decayed(&pb, now);
        let f_out = swap_fidelity_value(
            fa,
            fb,
            self.params.gate_error,
            self.params.measurement_error,
        )
        .clamp(0.25, 1.0);
        if let Some(trace) = &mut self.trace {
            trace.swaps.push(SwapTraceEntry {
                saga_index: si,
                node: self.sagas[si].path[pos],
                fired_at: now,
                left_created_at: pa.created_at,
                right_created_at: pb.created_at,
                output_fidelity: f_out,
            });
        }
        self.consume_pair(si, a);
        self.consume_pair(si, b);
        let merged = self.alloc_pair(
            si,
            PairState {
                left_pos: pa.left_pos,
                right_pos: pb.right_pos,
                left_channel: pa.left_channel,
                right_channel: pb.right_channel,
                fidelity_at_creation: f_out,
                created_at: now,
                consumed: false,
            },
        );
        {
            let s = &mut self.sagas[si];
            // The relay's two cells are free again; the far cells now hold
            // the merged pair.
            s.cells[pos][LEFT][pa.right_channel] = CellStatus::Free;
            s.cells[pos][RIGHT][pb.left_channel] = CellStatus::Free;
            s.cells[pa.left_pos][RIGHT][pa.left_channel] = CellStatus::Holding(merged);
            s.cells[pb.right_pos][LEFT][pb.right_channel] = CellStatus::Holding(merged);
        }
        // Freed relay cells may restart generation on the adjacent links.
        self.try_begin_generation(si, pos - 1, pa.right_channel, now);
        self.try_begin_generation(si, pos, pb.left_channel, now);
        self.on_pair_created(si, merged, now);
    }

    fn deliver(&mut self, si: usize, idx: usize, now: TimePs) {
        let (left_channel, right_channel, fidelity) = {
            let s = &self.sagas[si];
            let p = &s.pairs[idx];
            debug_assert_eq!(p.created_at, now, "delivery must happen at creation");
            (p.left_channel, p.right_channel, p.fidelity_at_creation)
        };
        let s = &mut self.sagas[si];
        let last = s.path.len() - 1;
        let fidelity = WernerFidelity::clamped(fidelity);
        self.records.push(DeliveryRecord {
            saga_id: s.saga_id,
            pair_seq: s.delivered,
            delivered_at: now,
            fidelity,
            hops: s.hops,
            priority: s.priority,
            time_to_serve: now - s.requested_start,
            below_target: fidelity.value() < s.target_fidelity,
        });
        s.delivered += 1;
        s.cells[0][RIGHT][left_channel] = CellStatus::Free;
        s.cells[last][LEFT][right_channel] = CellStatus::Free;
        let done = s.delivered == s.pair_goal;
        if done {
            s.active = false;
        }
        self.consume_pair(si, idx);
        if !done {
            let last_link = last - 1;
            self.try_begin_generation(si, 0, left_channel, now);
            self.try_begin_generation(si, last_link, right_channel, now);
        }
    }
}

//! Centralized offline scheduling of objectives into sagas.
//!
//! Every memory qubit keeps a *timecard*: a sorted set of disjoint
//! half-open reservation intervals. The scheduler drains objectives from a
//! priority queue ordered by `(priority, arrival, id)`; for each objective
//! it computes the shortest path between the endpoints and walks the path
//! trying to reserve, per node, `k` memories at an endpoint or `2k` at a
//! relay (one set per adjacent link). The first node without enough free
//! memories aborts the attempt: reservations made so far roll back, the
//! conflict is charged to that node, and the objective is pushed back with
//! its window shifted by `(priority + 1)` durations — urgent traffic
//! retries sooner. Objectives that survive the walk become *sagas*:
//! immutable distributed transactions every node along the path can
//! execute without further negotiation.

use crate::error::{Error, Result};
use crate::time::TimePs;
use crate::topology::{dijkstra_path, NodeId, Topology};
use crate::traffic::Objective;
use serde::{Deserialize, Serialize};
use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};

/// One reservation on one memory qubit: the half-open window
/// `[start, end)` belongs to `objective`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reservation {
    pub start: TimePs,
    pub end: TimePs,
    pub objective: u64,
}

/// Sorted, disjoint reservations of a single memory qubit.
#[derive(Debug, Clone, Default)]
pub struct MemoryTimecard {
    entries: Vec<Reservation>,
}

impl MemoryTimecard {
    /// True if `[start, end)` overlaps an existing reservation. Binary
    /// search: only the predecessor interval can reach into the window, and
    /// the successor only conflicts if it starts before `end`.
    pub fn conflicts(&self, start: TimePs, end: TimePs) -> bool {
        let idx = self.entries.partition_point(|r| r.start < start);
        if idx > 0 && self.entries[idx - 1].end > start {
            return true;
        }
        idx < self.entries.len() && self.entries[idx].start < end
    }

    /// Inserts a reservation known not to conflict.
    fn insert(&mut self, r: Reservation) {
        debug_assert!(r.start < r.end);
        debug_assert!(!self.conflicts(r.start, r.end));
        let idx = self.entries.partition_point(|e| e.start < r.start);
        self.entries.insert(idx, r);
    }

    /// Removes the reservation starting at `start` held by `objective`.
    fn remove(&mut self, start: TimePs, objective: u64) {
        let idx = self.entries.partition_point(|e| e.start < start);
        debug_assert!(
            idx < self.entries.len()
                && self.entries[idx].start == start
                && self.entries[idx].objective == objective,
            "rollback of a reservation that is not present"
        );
        self.entries.remove(idx);
    }

    pub fn reservations(&self) -> &[Reservation] {
        &self.entries
    }
}

/// Timecards of every memory qubit at one node.
#[derive(Debug, Clone)]
pub struct NodeTimecards {
    pub node: NodeId,
    memories: Vec<MemoryTimecard>,
}

/// Result of asking a node for `count` memories over a window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReserveOutcome {
    /// Reserved; the indices of the memories taken, ascending.
    Assigned(Vec<u32>),
    /// Fewer than `count` memories are free over the window right now.
    Conflict,
}

impl NodeTimecards {
    pub fn new(node: NodeId, memory_count: u32) -> NodeTimecards {
        NodeTimecards {
            node,
            memories: vec![MemoryTimecard::default(); memory_count as usize],
        }
    }

    pub fn memory_count(&self) -> u32 {
        self.memories.len() as u32
    }

    pub fn memory(&self, idx: u32) -> &MemoryTimecard {
        &self.memories[idx as usize]
    }

    /// Tries to reserve `count` memories for `[start, end)`, scanning
    /// memories in index order (lowest free indices win, which keeps
    /// assignment deterministic). Asking for more memories than the node
    /// owns can never succeed, now or after any backoff, so it is a hard
    /// error rather than a conflict.
    pub fn try_reserve(
        &mut self,
        objective: u64,
        start: TimePs,
        end: TimePs,
        count: u32,
    ) -> Result<ReserveOutcome> {
        if count > self.memory_count() {
            return Err(Error::InfeasibleObjective {
                objective,
                node: self.node,
                needed: count,
                available: self.memory_count(),
            });
        }
        let mut taken = Vec::with_capacity(count as usize);
        for (idx, card) in self.memories.iter().enumerate() {
            if !card.conflicts(start, end) {
                taken.push(idx as u32);
                if taken.len() == count as usize {
                    break;
                }
            }
        }
        if taken.len() < count as usize {
            return Ok(ReserveOutcome::Conflict);
        }
        for &idx in &taken {
            self.memories[idx as usize].insert(Reservation {
                start,
                end,
                objective,
            });
        }
        Ok(ReserveOutcome::Assigned(taken))
    }

    /// Releases the reservations of `objective` at `start` on the given
    /// memories (rollback of a failed path walk).
    fn release(&mut self, objective: u64, start: TimePs, indices: &[u32]) {
        for &idx in indices {
            self.memories[idx as usize].remove(start, objective);
        }
    }
}

/// Timecards for the whole network, indexed by node id.
#[derive(Debug, Clone)]
pub struct Timecards {
    nodes: Vec<NodeTimecards>,
}

impl Timecards {
    pub fn new(topo: &Topology) -> Timecards {
        Timecards {
            nodes: topo
                .nodes
                .iter()
                .map(|n| NodeTimecards::new(n.id, n.memory_count))
                .collect(),
        }
    }

    pub fn node(&self, id: NodeId) -> &NodeTimecards {
        &self.nodes[id.index()]
    }

    pub fn node_mut(&mut self, id: NodeId) -> &mut NodeTimecards {
        &mut self.nodes[id.index()]
    }
}

/// An approved objective: a path, a reservation window, and the concrete
/// memory indices pinned at every path node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Saga {
    /// The objective as scheduled (its window reflects any backoff).
    pub objective: Objective,
    pub path: Vec<NodeId>,
    /// Memory indices reserved at each path node, aligned with `path`:
    /// `k` entries at the endpoints, `2k` at relays (first `k` face the
    /// previous node, last `k` the next).
    pub assignments: Vec<Vec<u32>>,
    pub scheduled_start: TimePs,
    pub scheduled_end: TimePs,
    /// Total backoff the objective absorbed before fitting.
    pub delay: TimePs,
}

impl Saga {
    /// The arrival time originally requested, before any backoff.
    pub fn requested_start(&self) -> TimePs {
        self.scheduled_start - self.delay
    }

    pub fn hops(&self) -> u32 {
        (self.path.len() - 1) as u32
    }
}

/// Where conflicts piled up during scheduling.
///
/// Two views are kept per node: the number of rejection *events* charged
/// to it (one per failed reservation attempt; these sum to
/// `total_rejections`), and the number of *distinct objectives* it
/// rejected at least once (at most the number of objectives, so shares
/// derived from it stay in `[0, 1]`).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ConflictLog {
    rejection_events: BTreeMap<NodeId, u64>,
    #[serde(skip)]
    objectives_seen: BTreeMap<NodeId, BTreeSet<u64>>,
    objectives_conflicted: BTreeMap<NodeId, u64>,
    pub total_rejections: u64,
    pub total_objectives: u64,
}

impl ConflictLog {
    fn charge(&mut self, node: NodeId, objective: u64) {
        *self.rejection_events.entry(node).or_insert(0) += 1;
        self.total_rejections += 1;
        let set = self.objectives_seen.entry(node).or_default();
        if set.insert(objective) {
            *self.objectives_conflicted.entry(node).or_insert(0) += 1;
        }
    }

    pub fn rejection_events(&self, node: NodeId) -> u64 {
        self.rejection_events.get(&node).copied().unwrap_or(0)
    }

    pub fn objectives_conflicted(&self, node: NodeId) -> u64 {
        self.objectives_conflicted.get(&node).copied().unwrap_or(0)
    }

    /// Nodes with at least one charged rejection, ascending by id.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.rejection_events.keys().copied()
    }
}

/// Shifts an objective's window back by `(priority + 1)` times its own
/// duration: priority 0 retries after one duration, priority 2 after
/// three.
pub fn backoff(mut objective: Objective) -> Objective {
    let shift = objective.duration().scaled(objective.priority as u64 + 1);
    objective.arrival += shift;
    objective.end += shift;
    objective
}

/// Per-pop record of what the scheduler did, for inspection and tests.
#[derive(Debug, Clone, Default)]
pub struct ScheduleTrace {
    /// Objective ids in the order they were popped for the *first* time.
    pub first_pops: Vec<u64>,
    /// Every rejection as `(objective id, node charged)`.
    pub rejections: Vec<(u64, NodeId)>,
}

/// Number of memories an objective needs at one path node: `k` at the
/// endpoints, `2k` at relays (one set per adjacent link).
pub fn memories_needed(objective: &Objective, position: usize, path_len: usize) -> u32 {
    if position == 0 || position + 1 == path_len {
        objective.memories
    } else {
        2 * objective.memories
    }
}

/// Schedules every objective, returning the approved sagas in approval
/// order together with the conflict log.
pub fn schedule_all(objectives: &[Objective], topo: &Topology) -> Result<(Vec<Saga>, ConflictLog)> {
    let (sagas, log, _) = schedule_all_traced(objectives, topo)?;
    Ok((sagas, log))
}

/// [`schedule_all`] plus a trace of pops and rejections.
pub fn schedule_all_traced(
    objectives: &[Objective],
    topo: &Topology,
) -> Result<(Vec<Saga>, ConflictLog, ScheduleTrace)> {
    if objectives.is_empty() {
        return Err(Error::EmptyInput("no objectives to schedule"));
    }
    let mut requested: HashMap<u64, TimePs> = HashMap::with_capacity(objectives.len());
    for o in objectives {
        if requested.insert(o.id, o.arrival).is_some() {
            return Err(Error::invalid(
                "objective",
                format!("duplicate objective id {}", o.id),
            ));
        }
        if !topo.is_processor(o.source) || !topo.is_processor(o.destination) {
            return Err(Error::invalid(
                "objective",
                format!(
                    "objective {} endpoints ({}, {}) must both be processors",
                    o.id, o.source, o.destination
                ),
            ));
        }
        if o.arrival >= o.end {
            return Err(Error::invalid(
                "objective",
                format!("objective {} has an empty window", o.id),
            ));
        }
    }

    let mut cards = Timecards::new(topo);
    let mut log = ConflictLog {
        total_objectives: objectives.len() as u64,
        ..ConflictLog::default()
    };
    let mut trace = ScheduleTrace::default();
    let mut paths: HashMap<(NodeId, NodeId), Vec<NodeId>> = HashMap::new();

    // Min-heap on (priority, arrival, id). Entries carry their own copy of
    // the (possibly backed-off) objective.
    let mut heap: BinaryHeap<Reverse<HeapEntry>> = objectives
        .iter()
        .map(|o| {
            Reverse(HeapEntry {
                priority: o.priority,
                arrival: o.arrival,
                id: o.id,
                objective: o.clone(),
            })
        })
        .collect();

    let mut popped_once = BTreeSet::new();
    let mut sagas = Vec::new();
    while let Some(Reverse(entry)) = heap.pop() {
        let obj = entry.objective;
        if popped_once.insert(obj.id) {
            trace.first_pops.push(obj.id);
        }
        let path = match paths.entry((obj.source, obj.destination)) {
            std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(dijkstra_path(topo, obj.source, obj.destination)?)
            }
        };

        let mut assignments: Vec<Vec<u32>> = Vec::with_capacity(path.len());
        let mut failed_at = None;
        for (pos, &node) in path.iter().enumerate() {
            let count = memories_needed(&obj, pos, path.len());
            match cards
                .node_mut(node)
                .try_reserve(obj.id, obj.arrival, obj.end, count)?
            {
                ReserveOutcome::Assigned(mems) => assignments.push(mems),
                ReserveOutcome::Conflict => {
                    failed_at = Some(node);
                    break;
                }
            }
        }

        match failed_at {
            None => sagas.push(Saga {
                scheduled_start: obj.arrival,
                scheduled_end: obj.end,
                delay: obj.arrival - requested[&obj.id],
                path: path.clone(),
                assignments,
                objective: obj,
            }),
            Some(node) => {
                // Roll back this attempt's reservations, charge the node
                // that refused, and retry later.
                for (pos, mems) in assignments.iter().enumerate() {
                    cards.node_mut(path[pos]).release(obj.id, obj.arrival, mems);
                }
                log.charge(node, obj.id);
                trace.rejections.push((obj.id, node));
                let shifted = backoff(obj);
                heap.push(Reverse(HeapEntry {
                    priority: shifted.priority,
                    arrival: shifted.arrival,
                    id: shifted.id,
                    objective: shifted,
                }));
            }
        }
    }
    Ok((sagas, log, trace))
}

/// Heap key: priority class first, then arrival, then id.
#[derive(Debug, Clone)]
struct HeapEntry {
    priority: u8,
    arrival: TimePs,
    id: u64,
    objective: Objective,
}

impl HeapEntry {
    fn key(&self) -> (u8, TimePs, u64) {
        (self.priority, self.arrival, self.id)
    }
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key().cmp(&other.key())
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// A "start your saga" message to one path node, sent ahead of the window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Notification {
    pub saga_index: usize,
    pub node: NodeId,
    pub send_time: TimePs,
    /// When the node has the message: one classical delay after sending.
    pub arrival_time: TimePs,
}

/// Emits per-node start notifications for every saga, `buffer` ahead of
/// the scheduled start (clamped to the run origin for sagas that start
/// early). The buffer must cover at least one classical delay or nodes
/// could hear about sagas after they were supposed to start.
pub fn emit_sagas(
    sagas: &[Saga],
    classical_delay: TimePs,
    buffer: TimePs,
) -> Result<Vec<Notification>> {
    if buffer < classical_delay {
        return Err(Error::invalid(
            "buffer",
            format!("buffer {buffer} is shorter than the classical delay {classical_delay}"),
        ));
    }
    let mut out = Vec::new();
    for (saga_index, saga) in sagas.iter().enumerate() {
        let send_time = saga.scheduled_start.saturating_sub(buffer);
        for &node in &saga.path {
            out.push(Notification {
                saga_index,
                node,
                send_time,
                arrival_time: send_time + classical_delay,
            });
        }
    }
    out.sort_by_key(|n| (n.send_time, n.saga_index, n.node));
    Ok(out)
}

/// Wire form for schedule.jsonl: times in seconds, one saga per line.
#[derive(Debug, Serialize, Deserialize)]
struct SagaRecord {
    iota: u64,
    p: u8,
    path: Vec<u32>,
    assignments: Vec<Vec<u32>>,
    scheduled_start: f64,
    scheduled_end: f64,
    delay: f64,
}

/// Serializes sagas as one JSON object per line.
pub fn sagas_to_jsonl(sagas: &[Saga]) -> Result<String> {
    let mut out = String::new();
    for s in sagas {
        let rec = SagaRecord {
            iota: s.objective.id,
            p: s.objective.priority,
            path: s.path.iter().map(|n| n.0).collect(),
            assignments: s.assignments.clone(),
            scheduled_start: s.scheduled_start.as_secs_f64(),
            scheduled_end: s.scheduled_end.as_secs_f64(),
            delay: s.delay.as_secs_f64(),
        };
        let line =
            serde_json::to_string(&rec).map_err(|e| Error::Serialization(e.to_string()))?;
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::WernerFidelity;
    use crate::time::PS_PER_SEC;
    use crate::topology::{make_grid, make_star};
    use proptest::prelude::*;

    fn sec(s: f64) -> TimePs {
        TimePs::from_secs_f64(s)
    }

    fn obj(id: u64, src: u32, dst: u32, arrival_s: f64, priority: u8) -> Objective {
        Objective {
            id,
            source: NodeId(src),
            destination: NodeId(dst),
            arrival: sec(arrival_s),
            end: sec(arrival_s + 1.0),
            memories: 1,
            target_fidelity: WernerFidelity::new(0.5).unwrap(),
            pair_count: 100,
            priority,
        }
    }

    #[test]
    fn timecard_conflict_detection() {
        let mut card = MemoryTimecard::default();
        card.insert(Reservation {
            start: sec(1.0),
            end: sec(2.0),
            objective: 0,
        });
        card.insert(Reservation {
            start: sec(3.0),
            end: sec(4.0),
            objective: 1,
        });
        // Touching endpoints of half-open intervals do not conflict.
        assert!(!card.conflicts(sec(0.0), sec(1.0)));
        assert!(!card.conflicts(sec(2.0), sec(3.0)));
        assert!(!card.conflicts(sec(4.0), sec(9.0)));
        assert!(card.conflicts(sec(0.5), sec(1.5)));
        assert!(card.conflicts(sec(1.2), sec(1.3)));
        assert!(card.conflicts(sec(1.5), sec(3.5)));
        assert!(card.conflicts(sec(0.0), sec(10.0)));
    }

    #[test]
    fn try_reserve_picks_lowest_free_indices() {
        let mut node = NodeTimecards::new(NodeId(0), 3);
        let got = node.try_reserve(0, sec(0.0), sec(1.0), 2).unwrap();
        assert_eq!(got, ReserveOutcome::Assigned(vec![0, 1]));
        // Memory 2 is the only one left over that window.
        let got = node.try_reserve(1, sec(0.5), sec(0.7), 1).unwrap();
        assert_eq!(got, ReserveOutcome::Assigned(vec![2]));
        let got = node.try_reserve(2, sec(0.5), sec(0.6), 1).unwrap();
        assert_eq!(got, ReserveOutcome::Conflict);
        // After the first window ends everything is free again.
        let got = node.try_reserve(3, sec(1.0), sec(2.0), 3).unwrap();
        assert_eq!(got, ReserveOutcome::Assigned(vec![0, 1, 2]));
    }

    #[test]
    fn try_reserve_rejects_impossible_demands() {
        let mut node = NodeTimecards::new(NodeId(5), 2);
        let err = node.try_reserve(9, sec(0.0), sec(1.0), 3).unwrap_err();
        match err {
            Error::InfeasibleObjective {
                objective,
                node,
                needed,
                available,
            } => {
                assert_eq!((objective, node, needed, available), (9, NodeId(5), 3, 2));
            }
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn backoff_shifts_by_priority_plus_one_durations() {
        for p in 0..3u8 {
            let o = backoff(obj(0, 1, 2, 5.0, p));
            let want = 5.0 + (p as f64 + 1.0);
            assert_eq!(o.arrival, sec(want));
            assert_eq!(o.end, sec(want + 1.0));
            assert_eq!(o.duration(), sec(1.0));
        }
    }

    #[test]
    fn two_leaves_contending_for_one_hub_memory() {
        // Star with 3 leaves: the hub holds 3 memories and a relay saga
        // takes 2, so two overlapping sagas cannot share it. The second
        // objective starts from the idle leaf 3, so its walk reaches the
        // hub first and the conflict is charged there.
        let topo = make_star(3).unwrap();
        let objectives = vec![obj(0, 1, 2, 0.0, 0), obj(1, 3, 1, 0.5, 0)];
        let (sagas, log, trace) = schedule_all_traced(&objectives, &topo).unwrap();
        assert_eq!(sagas.len(), 2);
        assert_eq!(sagas[0].scheduled_start, sec(0.0));
        assert_eq!(sagas[0].delay, TimePs::ZERO);
        // Objective 1 conflicts at the hub at 0.5, backs off by 1 duration,
        // and fits at 1.5.
        assert_eq!(sagas[1].scheduled_start, sec(1.5));
        assert_eq!(sagas[1].delay, sec(1.0));
        assert_eq!(log.total_rejections, 1);
        assert_eq!(log.rejection_events(NodeId(0)), 1);
        assert_eq!(log.objectives_conflicted(NodeId(0)), 1);
        assert_eq!(trace.rejections, vec![(1, NodeId(0))]);
    }

    #[test]
    fn priority_beats_arrival_in_pop_order() {
        let topo = make_star(4).unwrap();
        let objectives = vec![
            obj(0, 1, 2, 0.0, 2),
            obj(1, 1, 2, 0.1, 0),
            obj(2, 3, 4, 0.2, 1),
            obj(3, 3, 4, 0.05, 0),
        ];
        let (_, _, trace) = schedule_all_traced(&objectives, &topo).unwrap();
        // (p, t_a, id): (0, 0.05, 3) < (0, 0.1, 1) < (1, 0.2, 2) < (2, 0, 0).
        assert_eq!(trace.first_pops, vec![3, 1, 2, 0]);
    }

    #[test]
    fn first_pop_order_is_sorted_even_with_conflicts() {
        // Re-pushed objectives only move later in time, so the first-pop
        // sequence must equal the objectives sorted by (p, t_a, id).
        let topo = make_star(3).unwrap();
        let objectives = vec![
            obj(0, 1, 2, 0.00, 1),
            obj(1, 1, 3, 0.01, 0),
            obj(2, 2, 3, 0.02, 0),
            obj(3, 1, 2, 0.03, 2),
            obj(4, 2, 3, 0.04, 1),
        ];
        let (_, _, trace) = schedule_all_traced(&objectives, &topo).unwrap();
        let mut want: Vec<_> = objectives
            .iter()
            .map(|o| (o.priority, o.arrival, o.id))
            .collect();
        want.sort();
        let want: Vec<u64> = want.into_iter().map(|(_, _, id)| id).collect();
        assert_eq!(trace.first_pops, want);
    }

    #[test]
    fn endpoints_take_k_and_relays_take_2k() {
        let topo = make_grid(1, 3).unwrap(); // path 0 - 1 - 2
        let mut o = obj(0, 0, 2, 0.0, 0);
        o.memories = 1;
        let (sagas, _) = schedule_all(&[o], &topo).unwrap();
        assert_eq!(sagas[0].path, vec![NodeId(0), NodeId(1), NodeId(2)]);
        assert_eq!(sagas[0].assignments[0].len(), 1);
        assert_eq!(sagas[0].assignments[1].len(), 2);
        assert_eq!(sagas[0].assignments[2].len(), 1);
    }

    #[test]
    fn infeasible_objective_is_a_hard_error() {
        let topo = make_grid(1, 3).unwrap(); // middle node has 2 memories
        let mut o = obj(0, 0, 2, 0.0, 0);
        o.memories = 2; // relay needs 2k = 4 > 2
        let err = schedule_all(&[o], &topo).unwrap_err();
        assert!(matches!(err, Error::InfeasibleObjective { .. }), "{err}");
    }

    #[test]
    fn rollback_frees_partial_reservations() {
        // Path 0-1-2-3; objective A holds node 2 over [0, 1). Objective B
        // (same window, whole path) must fail at node 2 and release what it
        // took at 0 and 1, so objective C over nodes 0-1 still fits.
        let topo = make_grid(1, 4).unwrap();
        let mut blocker = obj(0, 2, 3, 0.0, 0);
        blocker.priority = 0;
        let full_path = obj(1, 0, 3, 0.0, 1);
        let little = obj(2, 0, 1, 0.0, 2);
        let (sagas, log, trace) = schedule_all_traced(
            &[blocker, full_path, little],
            &topo,
        )
        .unwrap();
        assert_eq!(sagas.len(), 3);
        // The little objective fits in its original window even though the
        // full-path one grabbed nodes 0 and 1 first during its failed walk.
        let little_saga = sagas.iter().find(|s| s.objective.id == 2).unwrap();
        assert_eq!(little_saga.delay, TimePs::ZERO);
        let full_saga = sagas.iter().find(|s| s.objective.id == 1).unwrap();
        assert!(full_saga.delay > TimePs::ZERO);
        // The conflict was charged to node 2, where the walk stopped.
        assert!(trace.rejections.iter().all(|&(id, n)| id == 1 && n == NodeId(2)));
        assert_eq!(log.total_rejections, trace.rejections.len() as u64);
    }

    #[test]
    fn delays_are_exact_backoff_sums() {
        let topo = make_star(2).unwrap();
        // Five identical objectives fighting for one hub slot serialize
        // into consecutive windows; each delay is a whole number of
        // durations.
        let objectives: Vec<_> = (0..5).map(|i| obj(i, 1, 2, 0.0, 0)).collect();
        let mut objectives = objectives;
        for (i, o) in objectives.iter_mut().enumerate() {
            o.arrival = TimePs(i as u64); // 1 ps apart: all overlap
            o.end = o.arrival + sec(1.0);
        }
        let (sagas, _) = schedule_all(&objectives, &topo).unwrap();
        assert_eq!(sagas.len(), 5);
        for s in &sagas {
            assert_eq!(
                s.delay.0 % (s.objective.duration().0),
                0,
                "delay {} is not a whole number of durations",
                s.delay
            );
            assert_eq!(s.scheduled_end - s.scheduled_start, s.objective.duration());
            assert_eq!(s.requested_start() + s.delay, s.scheduled_start);
        }
    }

    #[test]
    fn no_two_sagas_share_a_memory_over_overlapping_windows() {
        // Brute-force overlap oracle over every (node, memory) pair.
        let topo = make_star(5).unwrap();
        let objectives: Vec<_> = (0..40)
            .map(|i| {
                obj(
                    i,
                    1 + (i % 5) as u32,
                    1 + ((i + 2) % 5) as u32,
                    (i as f64) * 0.01,
                    (i % 3) as u8,
                )
            })
            .collect();
        let (sagas, _) = schedule_all(&objectives, &topo).unwrap();
        assert_eq!(sagas.len(), 40);
        let mut claims: BTreeMap<(NodeId, u32), Vec<(TimePs, TimePs)>> = BTreeMap::new();
        for s in &sagas {
            for (pos, mems) in s.assignments.iter().enumerate() {
                for &m in mems {
                    claims
                        .entry((s.path[pos], m))
                        .or_default()
                        .push((s.scheduled_start, s.scheduled_end));
                }
            }
        }
        for ((node, mem), windows) in claims {
            for (a, w1) in windows.iter().enumerate() {
                for w2 in windows.iter().skip(a + 1) {
                    assert!(
                        w1.1 <= w2.0 || w2.1 <= w1.0,
                        "node {node} memory {mem}: {w1:?} overlaps {w2:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn emit_sagas_sends_buffer_ahead() {
        let topo = make_star(2).unwrap();
        let (sagas, _) = schedule_all(&[obj(0, 1, 2, 1.0, 0)], &topo).unwrap();
        let notes = emit_sagas(&sagas, sec(0.001), sec(0.05)).unwrap();
        assert_eq!(notes.len(), 3); // one per path node
        for n in &notes {
            assert_eq!(n.send_time, sec(0.95));
            assert_eq!(n.arrival_time, sec(0.951));
        }
        // A saga that starts before the buffer window clamps to t = 0.
        let (early, _) = schedule_all(&[obj(0, 1, 2, 0.01, 0)], &topo).unwrap();
        let notes = emit_sagas(&early, sec(0.001), sec(0.05)).unwrap();
        assert!(notes.iter().all(|n| n.send_time == TimePs::ZERO));
        assert!(emit_sagas(&sagas, sec(0.05), sec(0.001)).is_err());
    }

    #[test]
    fn sagas_serialize_one_per_line() {
        let topo = make_star(2).unwrap();
        let (sagas, _) = schedule_all(&[obj(3, 1, 2, 1.0, 2)], &topo).unwrap();
        let text = sagas_to_jsonl(&sagas).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.contains("\"iota\":3"));
        assert!(text.contains("\"path\":[1,0,2]"));
    }

    #[test]
    fn empty_objective_list_is_an_error() {
        let topo = make_star(2).unwrap();
        assert!(matches!(
            schedule_all(&[], &topo).unwrap_err(),
            Error::EmptyInput(_)
        ));
    }

    proptest! {
        /// However contended the network, approved sagas never overlap on
        /// any memory, every objective is eventually approved, and every
        /// delay is a whole number of backoff quanta.
        #[test]
        fn scheduling_is_safe_and_complete(
            n in 1usize..60,
            seed in 0u64..500,
        ) {
            use rand::{Rng, SeedableRng};
            let topo = make_star(4).unwrap();
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            let objectives: Vec<_> = (0..n)
                .map(|i| {
                    let src = 1 + rng.random_range(0..4u32);
                    let mut dst = 1 + rng.random_range(0..4u32);
                    if dst == src {
                        dst = 1 + (dst % 4);
                    }
                    let t = rng.random_range(0..3 * PS_PER_SEC);
                    let mut o = obj(i as u64, src, dst, 0.0, rng.random_range(0..3u8));
                    o.arrival = TimePs(t);
                    o.end = o.arrival + sec(1.0);
                    o
                })
                .collect();
            let (sagas, log) = schedule_all(&objectives, &topo).unwrap();
            prop_assert_eq!(sagas.len(), n);
            // Overlap oracle.
            let mut claims: BTreeMap<(NodeId, u32), Vec<(TimePs, TimePs)>> = BTreeMap::new();
            for s in &sagas {
                prop_assert_eq!(s.delay.0 % s.objective.duration().0, 0);
                for (pos, mems) in s.assignments.iter().enumerate() {
                    prop_assert_eq!(
                        mems.len() as u32,
                        memories_needed(&s.objective, pos, s.path.len())
                    );
                    for &m in mems {
                        claims.entry((s.path[pos], m)).or_default().push((
                            s.scheduled_start,
                            s.scheduled_end,
                        ));
                    }
                }
            }
            for windows in claims.values() {
                for (a, w1) in windows.iter().enumerate() {
                    for w2 in windows.iter().skip(a + 1) {
                        prop_assert!(w1.1 <= w2.0 || w2.1 <= w1.0);
                    }
                }
            }
            // Rejection events reconcile.
            let by_node: u64 = log.nodes().map(|n| log.rejection_events(n)).sum();
            prop_assert_eq!(by_node, log.total_rejections);
        }
    }
}

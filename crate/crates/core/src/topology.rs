//! Network topologies: generators, validation, and shortest paths.
//!
//! Node ids are dense (`0..n`), which keeps adjacency lookups simple and
//! every generator fully deterministic. A node's memory-qubit count always
//! equals its degree: one interface memory per attached link.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BinaryHeap;
use std::fmt;

/// Default fiber length of every link, in km.
pub const DEFAULT_LINK_LENGTH_KM: f64 = 10.0;

/// Identifier of a network node; dense in `0..node_count`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// What a node can do: routers only relay (swap), processors can also be
/// endpoints of an objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Router,
    Processor,
}

/// One node: id, role, and how many memory qubits it owns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: NodeId,
    pub kind: NodeKind,
    pub memory_count: u32,
}

/// An undirected network of nodes and fiber links, all links the same
/// length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub name: String,
    pub link_length_km: f64,
    pub nodes: Vec<NodeSpec>,
    /// Undirected edges, normalized to `a < b` and sorted.
    pub edges: Vec<(NodeId, NodeId)>,
}

impl Topology {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeSpec> {
        self.nodes.get(id.index())
    }

    pub fn is_processor(&self, id: NodeId) -> bool {
        self.node(id)
            .is_some_and(|n| n.kind == NodeKind::Processor)
    }

    /// Processor node ids in ascending order.
    pub fn processors(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Processor)
            .map(|n| n.id)
            .collect()
    }

    /// Neighbor lists in ascending id order, indexed by node id.
    pub fn adjacency(&self) -> Vec<Vec<NodeId>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(a, b) in &self.edges {
            adj[a.index()].push(b);
            adj[b.index()].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn degree(&self, id: NodeId) -> usize {
        self.edges
            .iter()
            .filter(|&&(a, b)| a == id || b == id)
            .count()
    }

    /// Checks structural invariants: dense ids, valid edges (no self loops,
    /// no duplicates, both endpoints present), connectivity, and
    /// memory-count == degree.
    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::EmptyInput("topology has no nodes"));
        }
        if !(self.link_length_km > 0.0) || !self.link_length_km.is_finite() {
            return Err(Error::invalid(
                "link_length_km",
                format!("must be > 0, got {}", self.link_length_km),
            ));
        }
        for (idx, node) in self.nodes.iter().enumerate() {
            if node.id.index() != idx {
                return Err(Error::invalid(
                    "nodes",
                    format!("ids must be dense 0..n in order; position {idx} holds id {}", node.id),
                ));
            }
        }
        let n = self.nodes.len();
        let mut seen = std::collections::BTreeSet::new();
        for &(a, b) in &self.edges {
            if a == b {
                return Err(Error::invalid("edges", format!("self loop at node {a}")));
            }
            if a.index() >= n || b.index() >= n {
                return Err(Error::invalid(
                    "edges",
                    format!("edge ({a}, {b}) references a missing node"),
                ));
            }
            let key = if a < b { (a, b) } else { (b, a) };
            if !seen.insert(key) {
                return Err(Error::invalid(
                    "edges",
                    format!("duplicate edge ({}, {})", key.0, key.1),
                ));
            }
        }
        let adj = self.adjacency();
        for node in &self.nodes {
            let deg = adj[node.id.index()].len() as u32;
            if node.memory_count != deg {
                return Err(Error::invalid(
                    "memory_count",
                    format!(
                        "node {} has degree {deg} but {} memories; one memory per link is required",
                        node.id, node.memory_count
                    ),
                ));
            }
        }
        // Connectivity via BFS from node 0.
        let mut visited = vec![false; n];
        let mut queue = std::collections::VecDeque::from([0usize]);
        visited[0] = true;
        let mut reached = 1;
        while let Some(u) = queue.pop_front() {
            for v in &adj[u] {
                if !visited[v.index()] {
                    visited[v.index()] = true;
                    reached += 1;
                    queue.push_back(v.index());
                }
            }
        }
        if reached != n {
            return Err(Error::invalid(
                "edges",
                format!("topology is disconnected: reached {reached} of {n} nodes"),
            ));
        }
        Ok(())
    }

    pub fn to_json_string(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json_str(s: &str) -> Result<Topology> {
        let topo: Topology =
            serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))?;
        topo.validate()?;
        Ok(topo)
    }
}

/// Builds a validated topology from node kinds and raw edges, assigning
/// each node one memory per attached link.
fn assemble(name: &str, kinds: Vec<NodeKind>, mut edges: Vec<(u32, u32)>) -> Result<Topology> {
    for e in &mut edges {
        if e.0 > e.1 {
            *e = (e.1, e.0);
        }
    }
    edges.sort_unstable();
    let mut degree = vec![0u32; kinds.len()];
    for &(a, b) in &edges {
        degree[a as usize] += 1;
        degree[b as usize] += 1;
    }
    let nodes = kinds
        .into_iter()
        .enumerate()
        .map(|(i, kind)| NodeSpec {
            id: NodeId(i as u32),
            kind,
            memory_count: degree[i],
        })
        .collect();
    let topo = Topology {
        name: name.to_string(),
        link_length_km: DEFAULT_LINK_LENGTH_KM,
        nodes,
        edges: edges
            .into_iter()
            .map(|(a, b)| (NodeId(a), NodeId(b)))
            .collect(),
    };
    topo.validate()?;
    Ok(topo)
}

/// Star: router hub (id 0) and `leaves` processor leaves (ids `1..=leaves`).
pub fn make_star(leaves: u32) -> Result<Topology> {
    if leaves < 2 {
        return Err(Error::invalid(
            "leaves",
            format!("a star needs at least 2 leaves, got {leaves}"),
        ));
    }
    let mut kinds = vec![NodeKind::Router];
    kinds.extend(std::iter::repeat_n(NodeKind::Processor, leaves as usize));
    let edges = (1..=leaves).map(|leaf| (0, leaf)).collect();
    assemble("star", kinds, edges)
}

/// Two router hubs (ids 0 and 1) joined by one link, with `left` processor
/// leaves (ids `2..2+left`) on hub 0 and `right` leaves on hub 1.
pub fn make_bottleneck(left: u32, right: u32) -> Result<Topology> {
    if left < 1 || right < 1 {
        return Err(Error::invalid(
            "leaves",
            format!("both sides need at least 1 leaf, got {left} and {right}"),
        ));
    }
    let mut kinds = vec![NodeKind::Router, NodeKind::Router];
    kinds.extend(std::iter::repeat_n(
        NodeKind::Processor,
        (left + right) as usize,
    ));
    let mut edges = vec![(0, 1)];
    edges.extend((0..left).map(|i| (0, 2 + i)));
    edges.extend((0..right).map(|i| (1, 2 + left + i)));
    assemble("bottleneck", kinds, edges)
}

/// Rectangular grid of processors, row-major ids (`id = row * cols + col`).
pub fn make_grid(rows: u32, cols: u32) -> Result<Topology> {
    if rows * cols < 2 {
        return Err(Error::invalid(
            "dimensions",
            format!("a grid needs at least 2 nodes, got {rows}x{cols}"),
        ));
    }
    let kinds = vec![NodeKind::Processor; (rows * cols) as usize];
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let id = r * cols + c;
            if c + 1 < cols {
                edges.push((id, id + 1));
            }
            if r + 1 < rows {
                edges.push((id, id + cols));
            }
        }
    }
    assemble("grid", kinds, edges)
}

/// Connected caveman graph: `cliques` complete graphs of `clique_size`
/// processors each, joined into a ring. Clique `c` occupies the id block
/// `[c*k, (c+1)*k)`; within each clique the edge between its first two
/// nodes is rewired to the last node of the previous clique, so every
/// clique keeps `C(k, 2)` edges and the graph stays connected.
pub fn make_caveman(cliques: u32, clique_size: u32) -> Result<Topology> {
    if cliques < 2 {
        return Err(Error::invalid(
            "cliques",
            format!("a caveman graph needs at least 2 cliques, got {cliques}"),
        ));
    }
    if clique_size < 3 {
        return Err(Error::invalid(
            "clique_size",
            format!("cliques need at least 3 nodes to stay connected after rewiring, got {clique_size}"),
        ));
    }
    let k = clique_size;
    let n = cliques * k;
    let kinds = vec![NodeKind::Processor; n as usize];
    let mut edges = Vec::new();
    for c in 0..cliques {
        let start = c * k;
        for a in start..start + k {
            for b in (a + 1)..start + k {
                // The (start, start+1) edge is replaced by the ring edge.
                if a == start && b == start + 1 {
                    continue;
                }
                edges.push((a, b));
            }
        }
        edges.push((start, (start + n - 1) % n));
    }
    assemble("caveman", kinds, edges)
}

/// Shortest path from `from` to `to` (inclusive node list), deterministic:
/// among equal-length paths it takes, at each step backward from the
/// destination, the smallest-id predecessor.
///
/// Dijkstra on unit weights with the heap ordered by `(distance, node id)`
/// and neighbors relaxed in ascending id order; a node's parent is set by
/// the first (hence smallest-id) settled neighbor at the shorter distance,
/// which yields exactly that tie-break.
pub fn dijkstra_path(topo: &Topology, from: NodeId, to: NodeId) -> Result<Vec<NodeId>> {
    if from == to {
        return Err(Error::invalid(
            "endpoints",
            format!("path endpoints must differ, got {from} twice"),
        ));
    }
    let n = topo.node_count();
    if from.index() >= n || to.index() >= n {
        return Err(Error::invalid(
            "endpoints",
            format!("unknown node in pair ({from}, {to})"),
        ));
    }
    let adj = topo.adjacency();
    let mut dist = vec![u32::MAX; n];
    let mut parent = vec![NodeId(u32::MAX); n];
    let mut heap = BinaryHeap::new();
    dist[from.index()] = 0;
    heap.push(std::cmp::Reverse((0u32, from)));
    while let Some(std::cmp::Reverse((d, u))) = heap.pop() {
        if d > dist[u.index()] {
            continue;
        }
        if u == to {
            break;
        }
        for &v in &adj[u.index()] {
            if d + 1 < dist[v.index()] {
                dist[v.index()] = d + 1;
                parent[v.index()] = u;
                heap.push(std::cmp::Reverse((d + 1, v)));
            }
        }
    }
    if dist[to.index()] == u32::MAX {
        return Err(Error::NoPath { from, to });
    }
    let mut path = vec![to];
    let mut cur = to;
    while cur != from {
        cur = parent[cur.index()];
        path.push(cur);
    }
    path.reverse();
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::VecDeque;

    /// Independent breadth-first distance, used as an oracle for Dijkstra.
    fn bfs_distance(topo: &Topology, from: NodeId, to: NodeId) -> Option<u32> {
        let adj = topo.adjacency();
        let mut dist = vec![None; topo.node_count()];
        dist[from.index()] = Some(0u32);
        let mut queue = VecDeque::from([from]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u.index()] {
                if dist[v.index()].is_none() {
                    dist[v.index()] = Some(dist[u.index()].unwrap() + 1);
                    queue.push_back(v);
                }
            }
        }
        dist[to.index()]
    }

    fn assert_path_is_valid(topo: &Topology, path: &[NodeId], from: NodeId, to: NodeId) {
        assert_eq!(path.first(), Some(&from));
        assert_eq!(path.last(), Some(&to));
        let adj = topo.adjacency();
        for pair in path.windows(2) {
            assert!(
                adj[pair[0].index()].contains(&pair[1]),
                "{} and {} are not adjacent",
                pair[0],
                pair[1]
            );
        }
        let mut dedup = path.to_vec();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), path.len(), "path revisits a node");
    }

    #[test]
    fn star_shape() {
        let topo = make_star(25).unwrap();
        assert_eq!(topo.node_count(), 26);
        assert_eq!(topo.edge_count(), 25);
        assert_eq!(topo.nodes[0].kind, NodeKind::Router);
        assert_eq!(topo.nodes[0].memory_count, 25);
        for leaf in 1..=25u32 {
            assert_eq!(topo.nodes[leaf as usize].kind, NodeKind::Processor);
            assert_eq!(topo.nodes[leaf as usize].memory_count, 1);
        }
        assert_eq!(topo.processors().len(), 25);
        assert!(make_star(1).is_err());
    }

    #[test]
    fn bottleneck_shape() {
        let topo = make_bottleneck(12, 13).unwrap();
        assert_eq!(topo.node_count(), 27);
        assert_eq!(topo.edge_count(), 26);
        assert_eq!(topo.nodes[0].memory_count, 13); // 12 leaves + hub link
        assert_eq!(topo.nodes[1].memory_count, 14);
        assert_eq!(topo.processors().len(), 25);
        assert!(topo.edges.contains(&(NodeId(0), NodeId(1))));
        // Left leaf 2 hangs off hub 0; right leaf 14 hangs off hub 1.
        assert!(topo.edges.contains(&(NodeId(0), NodeId(2))));
        assert!(topo.edges.contains(&(NodeId(1), NodeId(14))));
        assert!(make_bottleneck(0, 5).is_err());
    }

    #[test]
    fn grid_shape() {
        let topo = make_grid(5, 5).unwrap();
        assert_eq!(topo.node_count(), 25);
        assert_eq!(topo.edge_count(), 40);
        // Corners 2, edges 3, interior 4.
        assert_eq!(topo.nodes[0].memory_count, 2);
        assert_eq!(topo.nodes[2].memory_count, 3);
        assert_eq!(topo.nodes[12].memory_count, 4);
        assert!(topo.nodes.iter().all(|n| n.kind == NodeKind::Processor));
        assert!(make_grid(1, 1).is_err());
        let line = make_grid(1, 4).unwrap();
        assert_eq!(line.edge_count(), 3);
    }

    #[test]
    fn caveman_shape() {
        let topo = make_caveman(5, 5).unwrap();
        assert_eq!(topo.node_count(), 25);
        // 5 cliques * C(5,2) = 50: one edge per clique is rewired, not lost.
        assert_eq!(topo.edge_count(), 50);
        assert!(topo.nodes.iter().all(|n| n.kind == NodeKind::Processor));
        topo.validate().unwrap();
        assert!(make_caveman(1, 5).is_err());
        assert!(make_caveman(5, 2).is_err());
    }

    #[test]
    fn caveman_matches_reference_construction() {
        // Independent reference: build the adjacency matrix directly from
        // the definition — complete cliques, then rewire each clique's
        // (start, start+1) edge to (start, start-1 mod n).
        let (l, k) = (4u32, 4u32);
        let n = (l * k) as usize;
        let mut want = vec![vec![false; n]; n];
        for c in 0..l {
            let s = (c * k) as usize;
            for a in s..s + k as usize {
                for b in s..s + k as usize {
                    if a != b {
                        want[a][b] = true;
                    }
                }
            }
        }
        for c in 0..l {
            let s = (c * k) as usize;
            want[s][s + 1] = false;
            want[s + 1][s] = false;
            let prev = (s + n - 1) % n;
            want[s][prev] = true;
            want[prev][s] = true;
        }
        let topo = make_caveman(l, k).unwrap();
        let mut got = vec![vec![false; n]; n];
        for &(a, b) in &topo.edges {
            got[a.index()][b.index()] = true;
            got[b.index()][a.index()] = true;
        }
        assert_eq!(got, want);
    }

    #[test]
    fn validation_catches_defects() {
        let mut topo = make_star(3).unwrap();
        topo.nodes[0].memory_count = 99;
        assert!(topo.validate().is_err());

        let mut topo = make_star(3).unwrap();
        topo.edges.push((NodeId(1), NodeId(1)));
        assert!(topo.validate().is_err());

        let mut topo = make_grid(2, 2).unwrap();
        topo.edges.clear();
        for n in &mut topo.nodes {
            n.memory_count = 0;
        }
        let err = topo.validate().unwrap_err().to_string();
        assert!(err.contains("disconnected"), "{err}");
    }

    #[test]
    fn dijkstra_on_the_star_routes_through_the_hub() {
        let topo = make_star(5).unwrap();
        let path = dijkstra_path(&topo, NodeId(2), NodeId(4)).unwrap();
        assert_eq!(path, vec![NodeId(2), NodeId(0), NodeId(4)]);
    }

    #[test]
    fn dijkstra_across_the_grid_diagonal() {
        let topo = make_grid(5, 5).unwrap();
        let path = dijkstra_path(&topo, NodeId(0), NodeId(24)).unwrap();
        assert_eq!(path.len(), 9); // 8 hops
        assert_path_is_valid(&topo, &path, NodeId(0), NodeId(24));
        // Smallest-id tie-break: from 0, the first step is to node 1, and
        // every backward predecessor is the smallest-id option, which pins
        // the full path.
        assert_eq!(
            path,
            [0, 1, 2, 3, 4, 9, 14, 19, 24]
                .map(NodeId)
                .to_vec()
        );
    }

    #[test]
    fn dijkstra_is_deterministic_and_rejects_bad_endpoints() {
        let topo = make_caveman(4, 4).unwrap();
        let a = dijkstra_path(&topo, NodeId(1), NodeId(14)).unwrap();
        let b = dijkstra_path(&topo, NodeId(1), NodeId(14)).unwrap();
        assert_eq!(a, b);
        assert!(dijkstra_path(&topo, NodeId(1), NodeId(1)).is_err());
        assert!(dijkstra_path(&topo, NodeId(1), NodeId(99)).is_err());
    }

    #[test]
    fn dijkstra_length_matches_bfs_on_all_generators() {
        let topos = [
            make_star(25).unwrap(),
            make_bottleneck(12, 13).unwrap(),
            make_grid(5, 5).unwrap(),
            make_caveman(5, 5).unwrap(),
        ];
        for topo in &topos {
            let procs = topo.processors();
            for &a in &procs {
                for &b in &procs {
                    if a >= b {
                        continue;
                    }
                    let path = dijkstra_path(topo, a, b).unwrap();
                    assert_path_is_valid(topo, &path, a, b);
                    let hops = (path.len() - 1) as u32;
                    assert_eq!(
                        Some(hops),
                        bfs_distance(topo, a, b),
                        "{}: ({a}, {b})",
                        topo.name
                    );
                }
            }
        }
    }

    #[test]
    fn json_round_trip_preserves_everything() {
        let topo = make_bottleneck(3, 4).unwrap();
        let json = topo.to_json_string().unwrap();
        let back = Topology::from_json_str(&json).unwrap();
        assert_eq!(topo, back);
        // Spot-check the wire format.
        assert!(json.contains("\"Router\""));
        assert!(json.contains("\"memory_count\""));
    }

    proptest! {
        /// Every generator keeps memory_count == degree on every node.
        #[test]
        fn memory_always_equals_degree(
            leaves in 2u32..30,
            rows in 1u32..7,
            cols in 2u32..7,
            cliques in 2u32..6,
            clique_size in 3u32..7,
        ) {
            for topo in [
                make_star(leaves).unwrap(),
                make_bottleneck(leaves, leaves + 1).unwrap(),
                make_grid(rows, cols).unwrap(),
                make_caveman(cliques, clique_size).unwrap(),
            ] {
                for node in &topo.nodes {
                    prop_assert_eq!(node.memory_count as usize, topo.degree(node.id));
                }
                prop_assert!(topo.validate().is_ok());
            }
        }

        /// Generators are pure: the same arguments give identical graphs.
        #[test]
        fn generators_are_deterministic(rows in 1u32..6, cols in 2u32..6) {
            prop_assert_eq!(make_grid(rows, cols).unwrap(), make_grid(rows, cols).unwrap());
        }
    }
}

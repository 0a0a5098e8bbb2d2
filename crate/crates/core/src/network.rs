//! Road network interchange format and free-flow routing.
//!
//! The on-disk format is a single JSON document with three top-level arrays:
//!
//! ```json
//! {
//!   "nodes": [{"id": "n0"}],
//!   "edges": [{"id": "e0", "from": "n0", "to": "n1",
//!              "length_m": 150.0, "free_speed_mps": 13.9,
//!              "lanes": 1, "capacity_vph": 900.0}],
//!   "zones": [{"id": "z0", "edges": ["e0"]}]
//! }
//! ```
//!
//! `capacity_vph` may be omitted and defaults to 1800 vehicles/hour per lane.
//! Routing is edge-based: a path is a sequence of edge ids, and its cost is the
//! summed free-flow traversal time of every edge after the first. That way the
//! identity path (origin == destination) costs exactly zero and concatenating
//! paths composes costs without double counting.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

pub const DEFAULT_LANE_CAPACITY_VPH: f64 = 1800.0;

/// Sentinel parent index in a shortest-path tree.
const NO_PARENT: u32 = u32::MAX;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("cannot read network file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("network file is not valid JSON at line {line}, column {column}: {msg}")]
    Format { line: usize, column: usize, msg: String },
    /// Semantic violations; every one found is listed, not just the first.
    #[error("invalid network: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("unknown edge id {0:?}")]
    UnknownEdge(String),
    #[error("no path from edge {from:?} to edge {to:?}")]
    NoPath { from: String, to: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    DuplicateId,
    DanglingReference,
    NonPositive,
}

#[derive(Debug, Clone)]
pub struct Violation {
    pub kind: ViolationKind,
    /// The offending identifier (node/edge/zone id).
    pub subject: String,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ViolationKind::DuplicateId => "duplicate id",
            ViolationKind::DanglingReference => "dangling reference",
            ViolationKind::NonPositive => "non-positive value",
        };
        write!(f, "{kind} {}: {}", self.subject, self.detail)
    }
}

fn format_violations(violations: &[Violation]) -> String {
    violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone)]
pub struct Node {
    pub id: String,
}

#[derive(Debug, Clone)]
pub struct Edge {
    pub id: String,
    /// Index into `NetworkGraph::nodes`.
    pub from: u32,
    pub to: u32,
    pub length_m: f64,
    pub free_speed_mps: f64,
    pub lanes: u32,
    pub capacity_vph: f64,
}

impl Edge {
    pub fn free_flow_time_s(&self) -> f64 {
        self.length_m / self.free_speed_mps
    }
}

#[derive(Debug, Clone)]
pub struct Zone {
    pub id: String,
    /// Edge indices in declaration order (sampling order is file order).
    pub edges: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct NetworkGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub zones: Vec<Zone>,
    edge_index: HashMap<String, u32>,
    zone_index: HashMap<String, u32>,
    /// Outgoing edge indices per node, sorted by edge-id lexicographic rank so
    /// traversal order never depends on file row order.
    out_edges: Vec<Vec<u32>>,
    /// Lexicographic rank of each edge id among all edge ids.
    lex_rank: Vec<u32>,
}

impl NetworkGraph {
    pub fn edge_idx(&self, id: &str) -> Option<u32> {
        self.edge_index.get(id).copied()
    }

    pub fn edge(&self, idx: u32) -> &Edge {
        &self.edges[idx as usize]
    }

    pub fn zone_idx(&self, id: &str) -> Option<u32> {
        self.zone_index.get(id).copied()
    }

    pub fn zone(&self, idx: u32) -> &Zone {
        &self.zones[idx as usize]
    }

    fn successors(&self, edge: u32) -> &[u32] {
        &self.out_edges[self.edges[edge as usize].to as usize]
    }
}

#[derive(Deserialize)]
struct RawNetwork {
    nodes: Vec<RawNode>,
    edges: Vec<RawEdge>,
    zones: Vec<RawZone>,
}

#[derive(Deserialize)]
struct RawNode {
    id: String,
}

#[derive(Deserialize)]
struct RawEdge {
    id: String,
    from: String,
    to: String,
    length_m: f64,
    free_speed_mps: f64,
    lanes: u32,
    #[serde(default)]
    capacity_vph: Option<f64>,
}

#[derive(Deserialize)]
struct RawZone {
    id: String,
    edges: Vec<String>,
}

pub fn load_network(path: &Path) -> Result<NetworkGraph, NetworkError> {
    let text = std::fs::read_to_string(path).map_err(|source| NetworkError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_network(&text)
}

pub fn parse_network(text: &str) -> Result<NetworkGraph, NetworkError> {
    let raw: RawNetwork = serde_json::from_str(text).map_err(|e| NetworkError::Format {
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    })?;

    let mut violations = Vec::new();

    let mut node_index = HashMap::new();
    for (i, n) in raw.nodes.iter().enumerate() {
        if node_index.insert(n.id.clone(), i as u32).is_some() {
            violations.push(Violation {
                kind: ViolationKind::DuplicateId,
                subject: n.id.clone(),
                detail: "node id declared more than once".into(),
            });
        }
    }

    let mut edge_index = HashMap::new();
    let mut edges = Vec::with_capacity(raw.edges.len());
    for (i, e) in raw.edges.iter().enumerate() {
        if edge_index.insert(e.id.clone(), i as u32).is_some() {
            violations.push(Violation {
                kind: ViolationKind::DuplicateId,
                subject: e.id.clone(),
                detail: "edge id declared more than once".into(),
            });
        }
        let from = node_index.get(&e.from).copied();
        let to = node_index.get(&e.to).copied();
        if from.is_none() {
            violations.push(Violation {
                kind: ViolationKind::DanglingReference,
                subject: e.from.clone(),
                detail: format!("edge {:?} references undefined from-node {:?}", e.id, e.from),
            });
        }
        if to.is_none() {
            violations.push(Violation {
                kind: ViolationKind::DanglingReference,
                subject: e.to.clone(),
                detail: format!("edge {:?} references undefined to-node {:?}", e.id, e.to),
            });
        }
        if !(e.length_m > 0.0) {
            violations.push(Violation {
                kind: ViolationKind::NonPositive,
                subject: e.id.clone(),
                detail: format!("length_m = {}", e.length_m),
            });
        }
        if !(e.free_speed_mps > 0.0) {
            violations.push(Violation {
                kind: ViolationKind::NonPositive,
                subject: e.id.clone(),
                detail: format!("free_speed_mps = {}", e.free_speed_mps),
            });
        }
        if e.lanes == 0 {
            violations.push(Violation {
                kind: ViolationKind::NonPositive,
                subject: e.id.clone(),
                detail: "lanes = 0".into(),
            });
        }
        let capacity = e.capacity_vph.unwrap_or(DEFAULT_LANE_CAPACITY_VPH * e.lanes as f64);
        if !(capacity > 0.0) {
            violations.push(Violation {
                kind: ViolationKind::NonPositive,
                subject: e.id.clone(),
                detail: format!("capacity_vph = {capacity}"),
            });
        }
        edges.push(Edge {
            id: e.id.clone(),
            from: from.unwrap_or(0),
            to: to.unwrap_or(0),
            length_m: e.length_m,
            free_speed_mps: e.free_speed_mps,
            lanes: e.lanes,
            capacity_vph: capacity,
        });
    }

    let mut zone_index = HashMap::new();
    let mut zones = Vec::with_capacity(raw.zones.len());
    for (i, z) in raw.zones.iter().enumerate() {
        if zone_index.insert(z.id.clone(), i as u32).is_some() {
            violations.push(Violation {
                kind: ViolationKind::DuplicateId,
                subject: z.id.clone(),
                detail: "zone id declared more than once".into(),
            });
        }
        let mut zone_edges = Vec::with_capacity(z.edges.len());
        for eid in &z.edges {
            match edge_index.get(eid) {
                Some(&idx) => zone_edges.push(idx),
                None => violations.push(Violation {
                    kind: ViolationKind::DanglingReference,
                    subject: eid.clone(),
                    detail: format!("zone {:?} references undefined edge {:?}", z.id, eid),
                }),
            }
        }
        zones.push(Zone { id: z.id.clone(), edges: zone_edges });
    }

    if !violations.is_empty() {
        return Err(NetworkError::Invalid(violations));
    }

    // Lexicographic rank of each edge id; drives every tie-break downstream.
    let mut by_id: Vec<u32> = (0..edges.len() as u32).collect();
    by_id.sort_by(|&a, &b| edges[a as usize].id.cmp(&edges[b as usize].id));
    let mut lex_rank = vec![0u32; edges.len()];
    for (rank, &idx) in by_id.iter().enumerate() {
        lex_rank[idx as usize] = rank as u32;
    }

    let mut out_edges = vec![Vec::new(); raw.nodes.len()];
    for (i, e) in edges.iter().enumerate() {
        out_edges[e.from as usize].push(i as u32);
    }
    for list in &mut out_edges {
        list.sort_by_key(|&e| lex_rank[e as usize]);
    }

    Ok(NetworkGraph {
        nodes: raw.nodes.into_iter().map(|n| Node { id: n.id }).collect(),
        edges,
        zones,
        edge_index,
        zone_index,
        out_edges,
        lex_rank,
    })
}

/// Single-source shortest-path tree over the edge graph.
///
/// Costs exclude the origin edge's own traversal, so `cost_to(origin) == 0`.
/// Among equal-cost paths the lexicographically smallest edge-id sequence wins.
#[derive(Debug, Clone)]
pub struct PathTree {
    pub origin: u32,
    dist: Vec<f64>,
    parent: Vec<u32>,
}

impl PathTree {
    pub fn cost_to(&self, dest: u32) -> Option<f64> {
        let d = self.dist[dest as usize];
        d.is_finite().then_some(d)
    }

    /// Edge indices from origin to dest inclusive, or `None` if unreachable.
    pub fn path_to(&self, dest: u32) -> Option<Vec<u32>> {
        if !self.dist[dest as usize].is_finite() {
            return None;
        }
        let mut path = vec![dest];
        let mut cur = dest;
        while cur != self.origin {
            cur = self.parent[cur as usize];
            path.push(cur);
        }
        path.reverse();
        Some(path)
    }
}

struct HeapEntry {
    cost: f64,
    rank: u32,
    edge: u32,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cost == other.cost && self.rank == other.rank
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    // Reversed: BinaryHeap is a max-heap and we want the cheapest entry first.
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.rank.cmp(&self.rank))
    }
}

pub fn shortest_path_tree(graph: &NetworkGraph, origin: u32) -> PathTree {
    dijkstra(graph, origin, None)
}

/// One full shortest-path tree per origin, in input order.
///
/// Dispatches to the rayon build when the `parallel` feature is on; trees are
/// independent, so the result is identical either way.
pub fn path_trees(graph: &NetworkGraph, origins: &[u32]) -> Vec<PathTree> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        origins.par_iter().map(|&o| shortest_path_tree(graph, o)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        path_trees_seq(graph, origins)
    }
}

/// Sequential counterpart of [`path_trees`]; always available for comparison.
pub fn path_trees_seq(graph: &NetworkGraph, origins: &[u32]) -> Vec<PathTree> {
    origins.iter().map(|&o| shortest_path_tree(graph, o)).collect()
}

/// Shortest path by id, with cost. The path includes both endpoint edges.
pub fn shortest_path(
    graph: &NetworkGraph,
    origin_edge: &str,
    dest_edge: &str,
) -> Result<(Vec<String>, f64), NetworkError> {
    let origin = graph
        .edge_idx(origin_edge)
        .ok_or_else(|| NetworkError::UnknownEdge(origin_edge.to_string()))?;
    let dest = graph
        .edge_idx(dest_edge)
        .ok_or_else(|| NetworkError::UnknownEdge(dest_edge.to_string()))?;
    let tree = dijkstra(graph, origin, Some(dest));
    match (tree.path_to(dest), tree.cost_to(dest)) {
        (Some(path), Some(cost)) => {
            let ids = path.iter().map(|&e| graph.edge(e).id.clone()).collect();
            Ok((ids, cost))
        }
        _ => Err(NetworkError::NoPath {
            from: origin_edge.to_string(),
            to: dest_edge.to_string(),
        }),
    }
}

fn dijkstra(graph: &NetworkGraph, origin: u32, stop_at: Option<u32>) -> PathTree {
    let n = graph.edges.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut parent = vec![NO_PARENT; n];
    let mut settled = vec![false; n];
    let mut heap = std::collections::BinaryHeap::new();

    dist[origin as usize] = 0.0;
    heap.push(HeapEntry { cost: 0.0, rank: graph.lex_rank[origin as usize], edge: origin });

    while let Some(HeapEntry { cost, edge, .. }) = heap.pop() {
        if settled[edge as usize] {
            continue;
        }
        settled[edge as usize] = true;
        if stop_at == Some(edge) {
            break;
        }
        for &next in graph.successors(edge) {
            if settled[next as usize] {
                continue;
            }
            let cand = cost + graph.edge(next).free_flow_time_s();
            let cur = dist[next as usize];
            if cand < cur {
                dist[next as usize] = cand;
                parent[next as usize] = edge;
                heap.push(HeapEntry {
                    cost: cand,
                    rank: graph.lex_rank[next as usize],
                    edge: next,
                });
            } else if cand == cur
                && lex_path_less(graph, &parent, origin, edge, parent[next as usize])
            {
                // Same cost via a lexicographically smaller prefix: adopt it.
                // All candidate predecessors are already settled (their cost is
                // strictly smaller since traversal times are positive), so both
                // prefixes are final and comparable.
                parent[next as usize] = edge;
            }
        }
    }

    PathTree { origin, dist, parent }
}

/// Is the settled path origin->a lexicographically smaller than origin->b?
fn lex_path_less(graph: &NetworkGraph, parent: &[u32], origin: u32, a: u32, b: u32) -> bool {
    if b == NO_PARENT {
        return true;
    }
    let chain = |mut e: u32| {
        let mut ranks = Vec::new();
        loop {
            ranks.push(graph.lex_rank[e as usize]);
            if e == origin {
                break;
            }
            e = parent[e as usize];
        }
        ranks.reverse();
        ranks
    };
    chain(a) < chain(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        r#"{
            "nodes": [{"id": "a"}, {"id": "b"}],
            "edges": [{"id": "e0", "from": "a", "to": "b",
                       "length_m": 100.0, "free_speed_mps": 10.0, "lanes": 2}],
            "zones": [{"id": "z0", "edges": ["e0"]}]
        }"#
    }

    #[test]
    fn minimal_network_loads() {
        let g = parse_network(minimal()).unwrap();
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.nodes.len(), 2);
        assert_eq!(g.zones[0].edges, vec![0]);
    }

    #[test]
    fn capacity_defaults_to_1800_per_lane() {
        let g = parse_network(minimal()).unwrap();
        assert_eq!(g.edges[0].capacity_vph, 3600.0);
    }

    #[test]
    fn explicit_capacity_is_kept() {
        let text = minimal().replace("\"lanes\": 2", "\"lanes\": 2, \"capacity_vph\": 1234.0");
        let g = parse_network(&text).unwrap();
        assert_eq!(g.edges[0].capacity_vph, 1234.0);
    }

    #[test]
    fn missing_field_reports_position() {
        let text = r#"{"nodes": [{"id": "a"}], "edges": [{"id": "e0"}], "zones": []}"#;
        match parse_network(text) {
            Err(NetworkError::Format { line, .. }) => assert!(line >= 1),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn dangling_zone_edge_names_the_id() {
        let text = minimal().replace("\"e0\"]", "\"e0\", \"e9\"]");
        match parse_network(&text) {
            Err(NetworkError::Invalid(v)) => {
                assert_eq!(v.len(), 1);
                assert_eq!(v[0].kind, ViolationKind::DanglingReference);
                assert_eq!(v[0].subject, "e9");
            }
            other => panic!("expected invalid, got {other:?}"),
        }
    }

    #[test]
    fn all_violations_are_reported_not_just_the_first() {
        let text = r#"{
            "nodes": [{"id": "a"}, {"id": "a"}],
            "edges": [{"id": "e0", "from": "a", "to": "missing",
                       "length_m": -5.0, "free_speed_mps": 10.0, "lanes": 1}],
            "zones": []
        }"#;
        match parse_network(text) {
            Err(NetworkError::Invalid(v)) => {
                assert_eq!(v.len(), 3);
                assert!(v.iter().any(|x| x.kind == ViolationKind::DuplicateId));
                assert!(v.iter().any(|x| x.kind == ViolationKind::DanglingReference));
                assert!(v.iter().any(|x| x.kind == ViolationKind::NonPositive));
            }
            other => panic!("expected invalid, got {other:?}"),
        }
    }

    fn triangle() -> NetworkGraph {
        // origin -> (slow direct | two fast hops) -> dest
        parse_network(
            r#"{
            "nodes": [{"id": "s"}, {"id": "m"}, {"id": "t"}, {"id": "u"}],
            "edges": [
                {"id": "orig", "from": "s", "to": "m", "length_m": 50.0, "free_speed_mps": 10.0, "lanes": 1},
                {"id": "slow", "from": "m", "to": "t", "length_m": 300.0, "free_speed_mps": 10.0, "lanes": 1},
                {"id": "hop1", "from": "m", "to": "u", "length_m": 100.0, "free_speed_mps": 20.0, "lanes": 1},
                {"id": "hop2", "from": "u", "to": "t", "length_m": 100.0, "free_speed_mps": 20.0, "lanes": 1},
                {"id": "dest", "from": "t", "to": "s", "length_m": 50.0, "free_speed_mps": 10.0, "lanes": 1}
            ],
            "zones": []
        }"#,
        )
        .unwrap()
    }

    #[test]
    fn identity_path_costs_zero() {
        let g = triangle();
        let (path, cost) = shortest_path(&g, "orig", "orig").unwrap();
        assert_eq!(path, vec!["orig"]);
        assert_eq!(cost, 0.0);
    }

    #[test]
    fn two_fast_hops_beat_one_slow_edge() {
        let g = triangle();
        let (path, cost) = shortest_path(&g, "orig", "dest").unwrap();
        assert_eq!(path, vec!["orig", "hop1", "hop2", "dest"]);
        // 2 * (100 / 20) + 5 for dest, versus 30 + 5 via the slow edge.
        assert!((cost - 15.0).abs() < 1e-12);
    }

    #[test]
    fn equal_cost_paths_break_ties_lexicographically() {
        // Two parallel middle edges with identical geometry; only ids differ.
        let g = parse_network(
            r#"{
            "nodes": [{"id": "s"}, {"id": "m"}, {"id": "t"}],
            "edges": [
                {"id": "a_orig", "from": "s", "to": "m", "length_m": 100.0, "free_speed_mps": 10.0, "lanes": 1},
                {"id": "mid_z", "from": "m", "to": "t", "length_m": 100.0, "free_speed_mps": 10.0, "lanes": 1},
                {"id": "mid_a", "from": "m", "to": "t", "length_m": 100.0, "free_speed_mps": 10.0, "lanes": 1},
                {"id": "z_dest", "from": "t", "to": "s", "length_m": 100.0, "free_speed_mps": 10.0, "lanes": 1}
            ],
            "zones": []
        }"#,
        )
        .unwrap();
        let (path, _) = shortest_path(&g, "a_orig", "z_dest").unwrap();
        assert_eq!(path, vec!["a_orig", "mid_a", "z_dest"]);
    }

    #[test]
    fn path_is_invariant_under_row_permutation() {
        let g1 = triangle();
        // Same network, edge rows listed in a different order.
        let g2 = parse_network(
            r#"{
            "nodes": [{"id": "u"}, {"id": "t"}, {"id": "m"}, {"id": "s"}],
            "edges": [
                {"id": "dest", "from": "t", "to": "s", "length_m": 50.0, "free_speed_mps": 10.0, "lanes": 1},
                {"id": "hop2", "from": "u", "to": "t", "length_m": 100.0, "free_speed_mps": 20.0, "lanes": 1},
                {"id": "slow", "from": "m", "to": "t", "length_m": 300.0, "free_speed_mps": 10.0, "lanes": 1},
                {"id": "orig", "from": "s", "to": "m", "length_m": 50.0, "free_speed_mps": 10.0, "lanes": 1},
                {"id": "hop1", "from": "m", "to": "u", "length_m": 100.0, "free_speed_mps": 20.0, "lanes": 1}
            ],
            "zones": []
        }"#,
        )
        .unwrap();
        let p1 = shortest_path(&g1, "orig", "dest").unwrap();
        let p2 = shortest_path(&g2, "orig", "dest").unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn unknown_edge_is_an_error() {
        let g = triangle();
        assert!(matches!(
            shortest_path(&g, "nope", "dest"),
            Err(NetworkError::UnknownEdge(id)) if id == "nope"
        ));
    }

    #[test]
    fn unreachable_pair_is_a_no_path_error() {
        let g = parse_network(
            r#"{
            "nodes": [{"id": "a"}, {"id": "b"}, {"id": "c"}, {"id": "d"}],
            "edges": [
                {"id": "e0", "from": "a", "to": "b", "length_m": 10.0, "free_speed_mps": 1.0, "lanes": 1},
                {"id": "e1", "from": "c", "to": "d", "length_m": 10.0, "free_speed_mps": 1.0, "lanes": 1}
            ],
            "zones": []
        }"#,
        )
        .unwrap();
        assert!(matches!(
            shortest_path(&g, "e0", "e1"),
            Err(NetworkError::NoPath { .. })
        ));
    }
}

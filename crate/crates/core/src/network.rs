//! Street graph, the operator's per-edge travel-time estimates, and
//! fastest-path queries against an immutable estimate snapshot.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::io::Read;
use std::path::Path as FsPath;
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::ids::{EdgeId, NodeId};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("{file} line {line}: malformed row: {reason}")]
    MalformedRow {
        file: String,
        line: u64,
        reason: String,
    },
    #[error("{file} line {line}: edge {edge} references unknown node {node}")]
    DanglingEndpoint {
        file: String,
        line: u64,
        edge: EdgeId,
        node: NodeId,
    },
    #[error("{file} line {line}: duplicate id {id}")]
    DuplicateId { file: String, line: u64, id: u32 },
    #[error("edge {edge}: {reason}")]
    InvalidEdge { edge: EdgeId, reason: String },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("unknown edge {0}")]
    UnknownEdge(EdgeId),
    #[error("node {destination} is unreachable from node {origin}")]
    Unreachable { origin: NodeId, destination: NodeId },
    #[error("edge {edge}: travel-time mean must be positive, got {value}")]
    NonPositiveMean { edge: EdgeId, value: f64 },
    #[error("{file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub id: EdgeId,
    pub from: NodeId,
    pub to: NodeId,
    /// Meters.
    pub distance: f64,
    /// Seconds.
    pub free_flow_time: f64,
}

/// Directed street graph. Nodes and edges are kept sorted by id; the
/// position of an edge in [`NetworkGraph::edges`] is its dense index.
#[derive(Debug, Clone)]
pub struct NetworkGraph {
    nodes: Vec<NodeId>,
    edges: Vec<Edge>,
    node_index: HashMap<NodeId, usize>,
    edge_index: HashMap<EdgeId, usize>,
    /// Outgoing dense edge indices per node index, in edge-id order.
    out_edges: Vec<Vec<usize>>,
}

impl NetworkGraph {
    pub fn new(mut nodes: Vec<NodeId>, mut edges: Vec<Edge>) -> Result<Self, NetworkError> {
        nodes.sort();
        for w in nodes.windows(2) {
            if w[0] == w[1] {
                return Err(NetworkError::DuplicateId {
                    file: "<nodes>".into(),
                    line: 0,
                    id: w[0].0,
                });
            }
        }
        edges.sort_by_key(|e| e.id);
        for w in edges.windows(2) {
            if w[0].id == w[1].id {
                return Err(NetworkError::DuplicateId {
                    file: "<edges>".into(),
                    line: 0,
                    id: w[0].id.0,
                });
            }
        }
        let node_index: HashMap<NodeId, usize> =
            nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        let mut out_edges = vec![Vec::new(); nodes.len()];
        let mut edge_index = HashMap::with_capacity(edges.len());
        for (i, e) in edges.iter().enumerate() {
            if !(e.distance > 0.0 && e.distance.is_finite()) {
                return Err(NetworkError::InvalidEdge {
                    edge: e.id,
                    reason: format!("distance must be positive, got {}", e.distance),
                });
            }
            if !(e.free_flow_time > 0.0 && e.free_flow_time.is_finite()) {
                return Err(NetworkError::InvalidEdge {
                    edge: e.id,
                    reason: format!("free-flow time must be positive, got {}", e.free_flow_time),
                });
            }
            let from = *node_index.get(&e.from).ok_or(NetworkError::DanglingEndpoint {
                file: "<edges>".into(),
                line: 0,
                edge: e.id,
                node: e.from,
            })?;
            if !node_index.contains_key(&e.to) {
                return Err(NetworkError::DanglingEndpoint {
                    file: "<edges>".into(),
                    line: 0,
                    edge: e.id,
                    node: e.to,
                });
            }
            out_edges[from].push(i);
            edge_index.insert(e.id, i);
        }
        Ok(Self {
            nodes,
            edges,
            node_index,
            edge_index,
            out_edges,
        })
    }

    /// Bidirectional `rows x cols` grid. Node ids are `row * cols + col`;
    /// edge ids are assigned in (from, to) order.
    pub fn grid(rows: u32, cols: u32, edge_length: f64, free_flow_time: f64) -> Result<Self, NetworkError> {
        let nodes: Vec<NodeId> = (0..rows * cols).map(NodeId).collect();
        let mut pairs = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let n = r * cols + c;
                if c + 1 < cols {
                    pairs.push((n, n + 1));
                    pairs.push((n + 1, n));
                }
                if r + 1 < rows {
                    pairs.push((n, n + cols));
                    pairs.push((n + cols, n));
                }
            }
        }
        pairs.sort();
        let edges = pairs
            .into_iter()
            .enumerate()
            .map(|(i, (a, b))| Edge {
                id: EdgeId(i as u32),
                from: NodeId(a),
                to: NodeId(b),
                distance: edge_length,
                free_flow_time,
            })
            .collect();
        Self::new(nodes, edges)
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_index(&self, node: NodeId) -> Option<usize> {
        self.node_index.get(&node).copied()
    }

    pub fn edge_index(&self, edge: EdgeId) -> Option<usize> {
        self.edge_index.get(&edge).copied()
    }

    pub fn edge(&self, edge: EdgeId) -> Option<&Edge> {
        self.edge_index(edge).map(|i| &self.edges[i])
    }

    pub fn contains_node(&self, node: NodeId) -> bool {
        self.node_index.contains_key(&node)
    }

    pub fn out_degree(&self, node: NodeId) -> usize {
        self.node_index(node).map_or(0, |i| self.out_edges[i].len())
    }
}

fn csv_reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source)
}

pub(crate) fn check_header(
    reader: &mut csv::Reader<impl Read>,
    file: &str,
    expected: &[&str],
) -> Result<(), String> {
    let headers = reader.headers().map_err(|e| e.to_string())?;
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(format!(
            "{file}: expected header `{}`, got `{}`",
            expected.join(","),
            got.join(",")
        ));
    }
    Ok(())
}

pub(crate) fn parse_field<T: std::str::FromStr>(
    record: &csv::StringRecord,
    idx: usize,
    name: &str,
) -> Result<T, String> {
    let raw = record
        .get(idx)
        .ok_or_else(|| format!("missing column `{name}`"))?;
    raw.parse()
        .map_err(|_| format!("cannot parse `{raw}` as {name}"))
}

/// Reads the nodes (`node_id`) and edges
/// (`edge_id,from_node,to_node,distance_m,free_flow_time_s`) CSV sources.
pub fn load_network(nodes_source: impl Read, edges_source: impl Read) -> Result<NetworkGraph, NetworkError> {
    let mut nodes = Vec::new();
    let mut seen = HashMap::new();
    let mut rdr = csv_reader(nodes_source);
    check_header(&mut rdr, "nodes", &["node_id"]).map_err(|reason| NetworkError::MalformedRow {
        file: "nodes".into(),
        line: 1,
        reason,
    })?;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| NetworkError::MalformedRow {
            file: "nodes".into(),
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let malformed = |reason| NetworkError::MalformedRow {
            file: "nodes".into(),
            line,
            reason,
        };
        if rec.len() != 1 {
            return Err(malformed(format!("expected 1 column, got {}", rec.len())));
        }
        let id: u32 = parse_field(&rec, 0, "node_id").map_err(malformed)?;
        if seen.insert(id, line).is_some() {
            return Err(NetworkError::DuplicateId {
                file: "nodes".into(),
                line,
                id,
            });
        }
        nodes.push(NodeId(id));
    }

    let mut edges = Vec::new();
    let mut seen_edges = HashMap::new();
    let mut rdr = csv_reader(edges_source);
    check_header(
        &mut rdr,
        "edges",
        &["edge_id", "from_node", "to_node", "distance_m", "free_flow_time_s"],
    )
    .map_err(|reason| NetworkError::MalformedRow {
        file: "edges".into(),
        line: 1,
        reason,
    })?;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| NetworkError::MalformedRow {
            file: "edges".into(),
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let malformed = |reason| NetworkError::MalformedRow {
            file: "edges".into(),
            line,
            reason,
        };
        if rec.len() != 5 {
            return Err(malformed(format!("expected 5 columns, got {}", rec.len())));
        }
        let id: u32 = parse_field(&rec, 0, "edge_id").map_err(malformed)?;
        let from: u32 = parse_field(&rec, 1, "from_node").map_err(malformed)?;
        let to: u32 = parse_field(&rec, 2, "to_node").map_err(malformed)?;
        let distance: f64 = parse_field(&rec, 3, "distance_m").map_err(malformed)?;
        let free_flow_time: f64 = parse_field(&rec, 4, "free_flow_time_s").map_err(malformed)?;
        if seen_edges.insert(id, line).is_some() {
            return Err(NetworkError::DuplicateId {
                file: "edges".into(),
                line,
                id,
            });
        }
        for node in [from, to] {
            if !seen.contains_key(&node) {
                return Err(NetworkError::DanglingEndpoint {
                    file: "edges".into(),
                    line,
                    edge: EdgeId(id),
                    node: NodeId(node),
                });
            }
        }
        if !(distance > 0.0 && distance.is_finite()) {
            return Err(malformed(format!("distance_m must be positive, got {distance}")));
        }
        if !(free_flow_time > 0.0 && free_flow_time.is_finite()) {
            return Err(malformed(format!(
                "free_flow_time_s must be positive, got {free_flow_time}"
            )));
        }
        edges.push(Edge {
            id: EdgeId(id),
            from: NodeId(from),
            to: NodeId(to),
            distance,
            free_flow_time,
        });
    }
    NetworkGraph::new(nodes, edges)
}

pub fn load_network_files(nodes: &FsPath, edges: &FsPath) -> Result<NetworkGraph, NetworkError> {
    let open = |p: &FsPath| {
        std::fs::File::open(p).map_err(|source| NetworkError::Io {
            file: p.display().to_string(),
            source,
        })
    };
    load_network(open(nodes)?, open(edges)?).map_err(|e| match e {
        NetworkError::MalformedRow { file, line, reason } => NetworkError::MalformedRow {
            file: if file == "nodes" { nodes } else { edges }.display().to_string(),
            line,
            reason,
        },
        other => other,
    })
}

/// The operator's current per-edge travel-time estimates (seconds).
#[derive(Debug, Clone, PartialEq)]
pub struct TravelTimeTable {
    estimates: Vec<f64>,
    floors: Vec<f64>,
    valid_from: f64,
}

impl TravelTimeTable {
    /// Every edge starts at its free-flow time.
    pub fn free_flow(graph: &NetworkGraph, floor_factor: f64, valid_from: f64) -> Self {
        let floors: Vec<f64> = graph
            .edges()
            .iter()
            .map(|e| e.free_flow_time * floor_factor)
            .collect();
        let estimates = graph
            .edges()
            .iter()
            .zip(&floors)
            .map(|(e, f)| e.free_flow_time.max(*f))
            .collect();
        Self {
            estimates,
            floors,
            valid_from,
        }
    }

    pub fn valid_from(&self) -> f64 {
        self.valid_from
    }

    /// Estimate by dense edge index.
    pub fn estimate(&self, edge_idx: usize) -> f64 {
        self.estimates[edge_idx]
    }

    pub fn estimates(&self) -> &[f64] {
        &self.estimates
    }

    /// Sets a single estimate (clamped to the floor). Test and setup helper.
    pub fn with_estimate(mut self, edge_idx: usize, seconds: f64) -> Self {
        self.estimates[edge_idx] = seconds.max(self.floors[edge_idx]);
        self
    }

    /// New snapshot where observed edges take their interval mean (clamped to
    /// the floor) and all other edges keep their estimate.
    pub fn apply_observations(
        &self,
        graph: &NetworkGraph,
        per_edge_mean: &BTreeMap<EdgeId, f64>,
        valid_from: f64,
    ) -> Result<Self, NetworkError> {
        let mut next = self.clone();
        for (&edge, &mean) in per_edge_mean {
            if !(mean > 0.0 && mean.is_finite()) {
                return Err(NetworkError::NonPositiveMean { edge, value: mean });
            }
            let idx = graph.edge_index(edge).ok_or(NetworkError::UnknownEdge(edge))?;
            next.estimates[idx] = mean.max(self.floors[idx]);
        }
        next.valid_from = valid_from;
        Ok(next)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub origin: NodeId,
    pub destination: NodeId,
    pub edges: Vec<EdgeId>,
    pub total_time: f64,
    pub total_distance: f64,
}

impl Path {
    pub fn empty(node: NodeId) -> Self {
        Self {
            origin: node,
            destination: node,
            edges: Vec::new(),
            total_time: 0.0,
            total_distance: 0.0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// One-to-all fastest-path tree from a single origin.
#[derive(Debug)]
struct Tree {
    time: Vec<f64>,
    distance: Vec<f64>,
    hops: Vec<u32>,
    pred: Vec<Option<usize>>,
}

#[derive(Copy, Clone, PartialEq)]
struct HeapEntry {
    time: f64,
    hops: u32,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed for a min-heap
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.hops.cmp(&self.hops))
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn edge_sequence(graph: &NetworkGraph, pred: &[Option<usize>], mut node: usize) -> Vec<EdgeId> {
    let mut seq = Vec::new();
    while let Some(e) = pred[node] {
        seq.push(graph.edges[e].id);
        node = graph.node_index[&graph.edges[e].from];
    }
    seq.reverse();
    seq
}

/// Dijkstra under the label order (time, edge count, edge-id sequence).
fn build_tree(graph: &NetworkGraph, table: &TravelTimeTable, origin: usize) -> Tree {
    let n = graph.nodes.len();
    let mut time = vec![f64::INFINITY; n];
    let mut distance = vec![f64::INFINITY; n];
    let mut hops = vec![u32::MAX; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();
    time[origin] = 0.0;
    distance[origin] = 0.0;
    hops[origin] = 0;
    heap.push(HeapEntry {
        time: 0.0,
        hops: 0,
        node: origin,
    });
    while let Some(HeapEntry { time: t, hops: h, node: u }) = heap.pop() {
        if settled[u] || t != time[u] || h != hops[u] {
            continue;
        }
        settled[u] = true;
        for &e in &graph.out_edges[u] {
            let edge = &graph.edges[e];
            let v = graph.node_index[&edge.to];
            if settled[v] {
                continue;
            }
            let nt = t + table.estimates[e];
            let nh = h + 1;
            let better = match nt.total_cmp(&time[v]).then(nh.cmp(&hops[v])) {
                Ordering::Less => true,
                Ordering::Greater => false,
                Ordering::Equal => {
                    let mut cand = edge_sequence(graph, &pred, u);
                    cand.push(edge.id);
                    cand < edge_sequence(graph, &pred, v)
                }
            };
            if better {
                let push = nt != time[v] || nh != hops[v];
                time[v] = nt;
                hops[v] = nh;
                distance[v] = distance[u] + edge.distance;
                pred[v] = Some(e);
                if push {
                    heap.push(HeapEntry {
                        time: nt,
                        hops: nh,
                        node: v,
                    });
                }
            }
        }
    }
    Tree {
        time,
        distance,
        hops,
        pred,
    }
}

/// Fastest-path oracle bound to one immutable estimate snapshot. One-to-all
/// trees are cached per origin; cached answers are identical to fresh ones.
#[derive(Debug)]
pub struct Router {
    graph: Arc<NetworkGraph>,
    table: Arc<TravelTimeTable>,
    trees: Mutex<HashMap<usize, Arc<Tree>>>,
}

impl Router {
    pub fn new(graph: Arc<NetworkGraph>, table: Arc<TravelTimeTable>) -> Self {
        Self {
            graph,
            table,
            trees: Mutex::new(HashMap::new()),
        }
    }

    pub fn graph(&self) -> &Arc<NetworkGraph> {
        &self.graph
    }

    pub fn table(&self) -> &Arc<TravelTimeTable> {
        &self.table
    }

    fn tree(&self, origin: usize) -> Arc<Tree> {
        if let Some(t) = self.trees.lock().expect("router cache poisoned").get(&origin) {
            return Arc::clone(t);
        }
        let tree = Arc::new(build_tree(&self.graph, &self.table, origin));
        self.trees
            .lock()
            .expect("router cache poisoned")
            .entry(origin)
            .or_insert(tree)
            .clone()
    }

    fn indices(&self, origin: NodeId, destination: NodeId) -> Result<(usize, usize), NetworkError> {
        let o = self
            .graph
            .node_index(origin)
            .ok_or(NetworkError::UnknownNode(origin))?;
        let d = self
            .graph
            .node_index(destination)
            .ok_or(NetworkError::UnknownNode(destination))?;
        Ok((o, d))
    }

    pub fn fastest_path(&self, origin: NodeId, destination: NodeId) -> Result<Path, NetworkError> {
        let (o, d) = self.indices(origin, destination)?;
        if o == d {
            return Ok(Path::empty(origin));
        }
        let tree = self.tree(o);
        if !tree.time[d].is_finite() {
            return Err(NetworkError::Unreachable {
                origin,
                destination,
            });
        }
        let mut idx = Vec::with_capacity(tree.hops[d] as usize);
        let mut node = d;
        while let Some(e) = tree.pred[node] {
            idx.push(e);
            node = self.graph.node_index[&self.graph.edges[e].from];
        }
        idx.reverse();
        let mut total_time = 0.0;
        let mut total_distance = 0.0;
        for &e in &idx {
            total_time += self.table.estimates[e];
            total_distance += self.graph.edges[e].distance;
        }
        Ok(Path {
            origin,
            destination,
            edges: idx.iter().map(|&e| self.graph.edges[e].id).collect(),
            total_time,
            total_distance,
        })
    }

    pub fn travel_time(&self, origin: NodeId, destination: NodeId) -> Result<f64, NetworkError> {
        let (o, d) = self.indices(origin, destination)?;
        if o == d {
            return Ok(0.0);
        }
        let t = self.tree(o).time[d];
        if t.is_finite() {
            Ok(t)
        } else {
            Err(NetworkError::Unreachable {
                origin,
                destination,
            })
        }
    }

    /// Distance of the fastest path, meters.
    pub fn travel_distance(&self, origin: NodeId, destination: NodeId) -> Result<f64, NetworkError> {
        let (o, d) = self.indices(origin, destination)?;
        if o == d {
            return Ok(0.0);
        }
        let t = self.tree(o);
        if t.time[d].is_finite() {
            Ok(t.distance[d])
        } else {
            Err(NetworkError::Unreachable {
                origin,
                destination,
            })
        }
    }

    /// Travel times from `origin` to every node in `destinations`.
    pub fn travel_times_from(
        &self,
        origin: NodeId,
        destinations: &[NodeId],
    ) -> Vec<Result<f64, NetworkError>> {
        destinations
            .iter()
            .map(|&d| self.travel_time(origin, d))
            .collect()
    }
}

/// Free-function form of [`Router::fastest_path`] for one-off queries.
pub fn fastest_path(
    graph: &Arc<NetworkGraph>,
    table: &Arc<TravelTimeTable>,
    origin: NodeId,
    destination: NodeId,
) -> Result<Path, NetworkError> {
    Router::new(Arc::clone(graph), Arc::clone(table)).fastest_path(origin, destination)
}

pub fn travel_time(
    graph: &Arc<NetworkGraph>,
    table: &Arc<TravelTimeTable>,
    origin: NodeId,
    destination: NodeId,
) -> Result<f64, NetworkError> {
    Router::new(Arc::clone(graph), Arc::clone(table)).travel_time(origin, destination)
}

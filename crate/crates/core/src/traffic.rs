//! Ground-truth movement of fleet vehicles. Realizes dynamic and stochastic
//! edge traversal times, emits arrivals and per-edge duration observations.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};
use std::io::Read;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::ids::{EdgeId, NodeId, VehicleId};
use crate::network::{check_header, parse_field, Edge, NetworkGraph, Path, TravelTimeTable};

#[derive(Debug, Error, PartialEq)]
pub enum TrafficError {
    #[error("profile line {line}: {reason}")]
    Profile { line: u64, reason: String },
    #[error("vehicle {vehicle}: route starts at node {got}, vehicle is at node {expected}")]
    OriginMismatch {
        vehicle: VehicleId,
        expected: NodeId,
        got: NodeId,
    },
    #[error("vehicle {0} is not registered with the traffic layer")]
    UnknownVehicle(VehicleId),
    #[error("route references unknown edge {0}")]
    UnknownEdge(EdgeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingMode {
    /// Realized times follow the profile and lognormal noise.
    Coupled,
    /// Realized times equal the operator's current estimate.
    NotCoupled,
}

/// Piecewise-constant travel-time multiplier over simulation time.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedProfile {
    intervals: Vec<(f64, f64)>,
}

pub const MIN_MULTIPLIER: f64 = 0.1;

impl SpeedProfile {
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self, TrafficError> {
        if intervals.is_empty() {
            return Err(TrafficError::Profile {
                line: 0,
                reason: "profile has no intervals".into(),
            });
        }
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (i, w) in intervals.windows(2).enumerate() {
            if w[0].0 == w[1].0 {
                return Err(TrafficError::Profile {
                    line: i as u64 + 2,
                    reason: format!("duplicate interval start {}", w[0].0),
                });
            }
        }
        for &(start, m) in &intervals {
            if !start.is_finite() || !(m >= MIN_MULTIPLIER && m.is_finite()) {
                return Err(TrafficError::Profile {
                    line: 0,
                    reason: format!("interval at {start}: multiplier {m} below {MIN_MULTIPLIER}"),
                });
            }
        }
        Ok(Self { intervals })
    }

    pub fn flat() -> Self {
        Self {
            intervals: vec![(0.0, 1.0)],
        }
    }

    /// `steps` equal intervals over `[start, end)` with multipliers linearly
    /// spaced from `from` to `to`.
    pub fn ramp(start: f64, end: f64, steps: usize, from: f64, to: f64) -> Result<Self, TrafficError> {
        let steps = steps.max(1);
        let width = (end - start) / steps as f64;
        let intervals = (0..steps)
            .map(|k| {
                let frac = if steps == 1 { 0.0 } else { k as f64 / (steps - 1) as f64 };
                (start + width * k as f64, from + (to - from) * frac)
            })
            .collect();
        Self::new(intervals)
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    /// True when the first interval starts at or before `t`.
    pub fn covers(&self, t: f64) -> bool {
        self.intervals[0].0 <= t
    }

    pub fn multiplier(&self, t: f64) -> f64 {
        let idx = self.intervals.partition_point(|(s, _)| *s <= t);
        self.intervals[idx.saturating_sub(1)].1
    }
}

/// Reads a `interval_start_s,multiplier` CSV.
pub fn load_profile(source: impl Read) -> Result<SpeedProfile, TrafficError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    check_header(&mut rdr, "profile", &["interval_start_s", "multiplier"])
        .map_err(|reason| TrafficError::Profile { line: 1, reason })?;
    let mut intervals = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| TrafficError::Profile {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let start: f64 = parse_field(&rec, 0, "interval_start_s")
            .map_err(|reason| TrafficError::Profile { line, reason })?;
        let m: f64 = parse_field(&rec, 1, "multiplier")
            .map_err(|reason| TrafficError::Profile { line, reason })?;
        if !(m >= MIN_MULTIPLIER) {
            return Err(TrafficError::Profile {
                line,
                reason: format!("multiplier {m} below {MIN_MULTIPLIER}"),
            });
        }
        intervals.push((start, m));
    }
    SpeedProfile::new(intervals)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficModel {
    pub profile: SpeedProfile,
    /// Shape of the unit-mean lognormal traversal noise.
    pub noise_sigma: f64,
    pub seed: u64,
    pub mode: CouplingMode,
}

impl TrafficModel {
    pub fn deterministic(mode: CouplingMode) -> Self {
        Self {
            profile: SpeedProfile::flat(),
            noise_sigma: 0.0,
            seed: 0,
            mode,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent noise stream for one edge entry of one vehicle.
pub fn noise_stream(seed: u64, vehicle: VehicleId, entry: u64) -> ChaCha8Rng {
    let key = splitmix64(splitmix64(splitmix64(seed) ^ u64::from(vehicle.0)) ^ entry);
    ChaCha8Rng::seed_from_u64(key)
}

/// Realized traversal time in seconds for entering `edge` at `enter_time`.
/// `estimate` is the operator's current estimate for the edge.
pub fn realized_traversal(
    model: &TrafficModel,
    edge: &Edge,
    estimate: f64,
    enter_time: f64,
    rng: &mut impl Rng,
) -> f64 {
    match model.mode {
        CouplingMode::NotCoupled => estimate,
        CouplingMode::Coupled => {
            let base = edge.free_flow_time * model.profile.multiplier(enter_time);
            if model.noise_sigma == 0.0 {
                return base;
            }
            let z: f64 = rng.sample(StandardNormal);
            let s = model.noise_sigma;
            base * (s * z - 0.5 * s * s).exp()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeObservation {
    pub vehicle: VehicleId,
    pub edge: EdgeId,
    pub enter: f64,
    pub exit: f64,
}

impl EdgeObservation {
    pub fn duration(&self) -> f64 {
        self.exit - self.enter
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub vehicle: VehicleId,
    pub node: NodeId,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Traversal {
    edge: usize,
    enter: f64,
    exit: f64,
}

#[derive(Debug, Clone)]
struct Track {
    /// Last node reached.
    node: NodeId,
    current: Option<Traversal>,
    remaining: VecDeque<usize>,
    entries: u64,
}

/// Where a vehicle is, as seen by the operator (the realized exit time of the
/// current edge is not exposed).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Position {
    AtNode(NodeId),
    OnEdge {
        edge: EdgeId,
        enter: f64,
        head: NodeId,
    },
}

#[derive(Debug, Copy, Clone, PartialEq)]
struct ExitEvent {
    time: f64,
    vehicle: VehicleId,
}

impl Eq for ExitEvent {}

impl Ord for ExitEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.vehicle.cmp(&self.vehicle))
    }
}

impl PartialOrd for ExitEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Movement state of every fleet vehicle.
#[derive(Debug)]
pub struct TrafficState {
    graph: Arc<NetworkGraph>,
    model: TrafficModel,
    time: f64,
    tracks: BTreeMap<VehicleId, Track>,
    exits: BinaryHeap<ExitEvent>,
    immediate: Vec<Arrival>,
}

impl TrafficState {
    pub fn new(graph: Arc<NetworkGraph>, model: TrafficModel, start: f64) -> Self {
        Self {
            graph,
            model,
            time: start,
            tracks: BTreeMap::new(),
            exits: BinaryHeap::new(),
            immediate: Vec::new(),
        }
    }

    pub fn model(&self) -> &TrafficModel {
        &self.model
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn place_vehicle(&mut self, vehicle: VehicleId, node: NodeId) {
        self.tracks.insert(
            vehicle,
            Track {
                node,
                current: None,
                remaining: VecDeque::new(),
                entries: 0,
            },
        );
    }

    pub fn is_moving(&self, vehicle: VehicleId) -> bool {
        self.tracks
            .get(&vehicle)
            .is_some_and(|t| t.current.is_some())
            || self.immediate.iter().any(|a| a.vehicle == vehicle)
    }

    pub fn position(&self, vehicle: VehicleId) -> Option<Position> {
        let t = self.tracks.get(&vehicle)?;
        Some(match t.current {
            None => Position::AtNode(t.node),
            Some(tr) => {
                let e = &self.graph.edges()[tr.edge];
                Position::OnEdge {
                    edge: e.id,
                    enter: tr.enter,
                    head: e.to,
                }
            }
        })
    }

    /// Edges still to be entered after the current one.
    pub fn remaining_route(&self, vehicle: VehicleId) -> Vec<EdgeId> {
        self.tracks.get(&vehicle).map_or_else(Vec::new, |t| {
            t.remaining
                .iter()
                .map(|&e| self.graph.edges()[e].id)
                .collect()
        })
    }

    pub fn next_event_time(&self) -> Option<f64> {
        let heap = self.exits.peek().map(|e| e.time);
        let imm = self.immediate.iter().map(|a| a.time).min_by(f64::total_cmp);
        match (heap, imm) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    fn enter_edge(&mut self, vehicle: VehicleId, edge: usize, at: f64, table: &TravelTimeTable) {
        let track = self.tracks.get_mut(&vehicle).expect("registered vehicle");
        let entry = track.entries;
        track.entries += 1;
        let mut rng = noise_stream(self.model.seed, vehicle, entry);
        let e = &self.graph.edges()[edge];
        let dur = realized_traversal(&self.model, e, table.estimate(edge), at, &mut rng);
        let exit = at + dur;
        track.current = Some(Traversal {
            edge,
            enter: at,
            exit,
        });
        self.exits.push(ExitEvent {
            time: exit,
            vehicle,
        });
    }

    /// Sends a vehicle along `path`. A vehicle on an edge keeps that edge and
    /// switches to the new route at its head node.
    pub fn dispatch_route(
        &mut self,
        vehicle: VehicleId,
        path: &Path,
        depart: f64,
        table: &TravelTimeTable,
    ) -> Result<(), TrafficError> {
        let track = self
            .tracks
            .get(&vehicle)
            .ok_or(TrafficError::UnknownVehicle(vehicle))?;
        let mut edges = VecDeque::with_capacity(path.edges.len());
        for id in &path.edges {
            edges.push_back(
                self.graph
                    .edge_index(*id)
                    .ok_or(TrafficError::UnknownEdge(*id))?,
            );
        }
        if let Some(cur) = track.current {
            let head = self.graph.edges()[cur.edge].to;
            if path.origin != head {
                return Err(TrafficError::OriginMismatch {
                    vehicle,
                    expected: head,
                    got: path.origin,
                });
            }
            self.tracks.get_mut(&vehicle).expect("checked").remaining = edges;
            return Ok(());
        }
        if path.origin != track.node {
            return Err(TrafficError::OriginMismatch {
                vehicle,
                expected: track.node,
                got: path.origin,
            });
        }
        self.immediate.retain(|a| a.vehicle != vehicle);
        match edges.pop_front() {
            None => self.immediate.push(Arrival {
                vehicle,
                node: path.origin,
                time: depart,
            }),
            Some(first) => {
                self.tracks.get_mut(&vehicle).expect("checked").remaining = edges;
                self.enter_edge(vehicle, first, depart, table);
            }
        }
        Ok(())
    }

    /// Processes every edge exit at or before `until`.
    pub fn advance(&mut self, until: f64, table: &TravelTimeTable) -> (Vec<Arrival>, Vec<EdgeObservation>) {
        let mut arrivals = Vec::new();
        let mut observations = Vec::new();
        let (due, later): (Vec<_>, Vec<_>) = self.immediate.drain(..).partition(|a| a.time <= until);
        self.immediate = later;
        arrivals.extend(due);

        while let Some(&ExitEvent { time, vehicle }) = self.exits.peek() {
            if time > until {
                break;
            }
            self.exits.pop();
            let track = self.tracks.get_mut(&vehicle).expect("registered vehicle");
            let cur = track.current.take().expect("exit event for a moving vehicle");
            let edge = &self.graph.edges()[cur.edge];
            track.node = edge.to;
            observations.push(EdgeObservation {
                vehicle,
                edge: edge.id,
                enter: cur.enter,
                exit: cur.exit,
            });
            match track.remaining.pop_front() {
                Some(next) => self.enter_edge(vehicle, next, cur.exit, table),
                None => arrivals.push(Arrival {
                    vehicle,
                    node: edge.to,
                    time: cur.exit,
                }),
            }
        }
        arrivals.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.vehicle.cmp(&b.vehicle)));
        self.time = self.time.max(until);
        (arrivals, observations)
    }
}

/// Mean traversal duration per edge over observations whose exit lies in
/// `[interval_start, interval_end)`.
pub fn interval_statistics(
    observations: &[EdgeObservation],
    interval_start: f64,
    interval_end: f64,
) -> BTreeMap<EdgeId, f64> {
    let mut acc: BTreeMap<EdgeId, (f64, u32)> = BTreeMap::new();
    for o in observations
        .iter()
        .filter(|o| o.exit >= interval_start && o.exit < interval_end)
    {
        let slot = acc.entry(o.edge).or_insert((0.0, 0));
        slot.0 += o.duration();
        slot.1 += 1;
    }
    acc.into_iter()
        .map(|(e, (sum, n))| (e, sum / f64::from(n)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Router;

    fn line(n: u32, ff: f64) -> Arc<NetworkGraph> {
        let edges = (0..n - 1)
            .map(|i| Edge {
                id: EdgeId(i),
                from: NodeId(i),
                to: NodeId(i + 1),
                distance: 100.0,
                free_flow_time: ff,
            })
            .collect();
        Arc::new(NetworkGraph::new((0..n).map(NodeId).collect(), edges).unwrap())
    }

    fn coupled(sigma: f64, profile: SpeedProfile) -> TrafficModel {
        TrafficModel {
            profile,
            noise_sigma: sigma,
            seed: 7,
            mode: CouplingMode::Coupled,
        }
    }

    fn edge10() -> Edge {
        Edge {
            id: EdgeId(0),
            from: NodeId(0),
            to: NodeId(1),
            distance: 100.0,
            free_flow_time: 10.0,
        }
    }

    #[test]
    fn degenerate_noise_is_deterministic() {
        let mut rng = noise_stream(1, VehicleId(0), 0);
        let m = coupled(0.0, SpeedProfile::flat());
        assert_eq!(realized_traversal(&m, &edge10(), 99.0, 0.0, &mut rng), 10.0);
        let m = coupled(0.0, SpeedProfile::new(vec![(0.0, 1.5)]).unwrap());
        assert_eq!(realized_traversal(&m, &edge10(), 99.0, 0.0, &mut rng), 15.0);
    }

    #[test]
    fn not_coupled_returns_estimate() {
        let mut rng = noise_stream(1, VehicleId(0), 0);
        let m = TrafficModel {
            mode: CouplingMode::NotCoupled,
            ..coupled(0.3, SpeedProfile::new(vec![(0.0, 1.6)]).unwrap())
        };
        assert_eq!(realized_traversal(&m, &edge10(), 12.5, 0.0, &mut rng), 12.5);
    }

    #[test]
    fn profile_lookup() {
        let p = SpeedProfile::new(vec![(0.0, 1.0), (600.0, 1.2), (1200.0, 1.4)]).unwrap();
        assert_eq!(p.multiplier(0.0), 1.0);
        assert_eq!(p.multiplier(599.9), 1.0);
        assert_eq!(p.multiplier(600.0), 1.2);
        assert_eq!(p.multiplier(1e9), 1.4);
        assert!(SpeedProfile::new(vec![(0.0, 0.05)]).is_err());
        let r = SpeedProfile::ramp(0.0, 7200.0, 4, 1.0, 1.6).unwrap();
        assert_eq!(r.intervals().len(), 4);
        assert_eq!(r.multiplier(7199.0), 1.6);
        let loaded = load_profile("interval_start_s,multiplier\n0,1.0\n600,1.3\n".as_bytes()).unwrap();
        assert_eq!(loaded.multiplier(700.0), 1.3);
        assert!(load_profile("interval_start_s,multiplier\n0,0.0\n".as_bytes()).is_err());
    }

    #[test]
    fn idle_traffic_emits_nothing() {
        let g = line(2, 10.0);
        let table = TravelTimeTable::free_flow(&g, 1.0, 0.0);
        let mut s = TrafficState::new(g, TrafficModel::deterministic(CouplingMode::Coupled), 0.0);
        let (a, o) = s.advance(100.0, &table);
        assert!(a.is_empty() && o.is_empty());
    }

    #[test]
    fn single_edge_trip() {
        let g = line(2, 10.0);
        let table = TravelTimeTable::free_flow(&g, 1.0, 0.0);
        let router = Router::new(Arc::clone(&g), Arc::new(table.clone()));
        let mut s = TrafficState::new(g, TrafficModel::deterministic(CouplingMode::Coupled), 0.0);
        s.place_vehicle(VehicleId(0), NodeId(0));
        let p = router.fastest_path(NodeId(0), NodeId(1)).unwrap();
        s.dispatch_route(VehicleId(0), &p, 0.0, &table).unwrap();
        let (a, o) = s.advance(60.0, &table);
        assert_eq!(a, vec![Arrival { vehicle: VehicleId(0), node: NodeId(1), time: 10.0 }]);
        assert_eq!(o.len(), 1);
        assert_eq!((o[0].enter, o[0].exit), (0.0, 10.0));
    }

    #[test]
    fn partial_advance_over_three_edges() {
        let g = line(4, 10.0);
        let table = TravelTimeTable::free_flow(&g, 1.0, 0.0);
        let router = Router::new(Arc::clone(&g), Arc::new(table.clone()));
        let mut s = TrafficState::new(g, TrafficModel::deterministic(CouplingMode::Coupled), 0.0);
        s.place_vehicle(VehicleId(3), NodeId(0));
        let p = router.fastest_path(NodeId(0), NodeId(3)).unwrap();
        s.dispatch_route(VehicleId(3), &p, 0.0, &table).unwrap();
        let (a, o) = s.advance(25.0, &table);
        assert!(a.is_empty());
        assert_eq!(o.len(), 2);
        // third edge is being traversed; nothing left after it
        assert!(s.remaining_route(VehicleId(3)).is_empty());
        assert!(matches!(s.position(VehicleId(3)), Some(Position::OnEdge { edge: EdgeId(2), .. })));
        let (a, _) = s.advance(100.0, &table);
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].time, 30.0);
    }

    #[test]
    fn empty_path_arrives_immediately() {
        let g = line(2, 10.0);
        let table = TravelTimeTable::free_flow(&g, 1.0, 0.0);
        let mut s = TrafficState::new(g, TrafficModel::deterministic(CouplingMode::Coupled), 0.0);
        s.place_vehicle(VehicleId(0), NodeId(1));
        s.dispatch_route(VehicleId(0), &Path::empty(NodeId(1)), 42.0, &table).unwrap();
        assert_eq!(s.next_event_time(), Some(42.0));
        let (a, o) = s.advance(42.0, &table);
        assert_eq!(a, vec![Arrival { vehicle: VehicleId(0), node: NodeId(1), time: 42.0 }]);
        assert!(o.is_empty());
    }

    #[test]
    fn origin_mismatch_rejected() {
        let g = line(3, 10.0);
        let table = TravelTimeTable::free_flow(&g, 1.0, 0.0);
        let router = Router::new(Arc::clone(&g), Arc::new(table.clone()));
        let mut s = TrafficState::new(g, TrafficModel::deterministic(CouplingMode::Coupled), 0.0);
        s.place_vehicle(VehicleId(0), NodeId(0));
        let p = router.fastest_path(NodeId(1), NodeId(2)).unwrap();
        assert!(matches!(
            s.dispatch_route(VehicleId(0), &p, 0.0, &table),
            Err(TrafficError::OriginMismatch { .. })
        ));
    }

    #[test]
    fn redispatch_mid_edge_takes_effect_at_head() {
        // 0 -> 1 -> 2 -> 3 line plus a spur 1 -> 4
        let mut edges: Vec<Edge> = (0..3)
            .map(|i| Edge {
                id: EdgeId(i),
                from: NodeId(i),
                to: NodeId(i + 1),
                distance: 100.0,
                free_flow_time: 10.0,
            })
            .collect();
        edges.push(Edge {
            id: EdgeId(3),
            from: NodeId(1),
            to: NodeId(4),
            distance: 100.0,
            free_flow_time: 10.0,
        });
        let g = Arc::new(NetworkGraph::new((0..5).map(NodeId).collect(), edges).unwrap());
        let table = TravelTimeTable::free_flow(&g, 1.0, 0.0);
        let router = Router::new(Arc::clone(&g), Arc::new(table.clone()));
        let mut s = TrafficState::new(Arc::clone(&g), TrafficModel::deterministic(CouplingMode::Coupled), 0.0);
        s.place_vehicle(VehicleId(0), NodeId(0));
        s.dispatch_route(VehicleId(0), &router.fastest_path(NodeId(0), NodeId(3)).unwrap(), 0.0, &table)
            .unwrap();
        s.advance(5.0, &table);
        // from the middle node of the first edge, go to the spur instead
        let wrong = router.fastest_path(NodeId(0), NodeId(4)).unwrap();
        assert!(s.dispatch_route(VehicleId(0), &wrong, 5.0, &table).is_err());
        let p = router.fastest_path(NodeId(1), NodeId(4)).unwrap();
        s.dispatch_route(VehicleId(0), &p, 5.0, &table).unwrap();
        let (a, o) = s.advance(100.0, &table);
        assert_eq!(o.iter().map(|o| o.edge).collect::<Vec<_>>(), vec![EdgeId(0), EdgeId(3)]);
        assert_eq!(a, vec![Arrival { vehicle: VehicleId(0), node: NodeId(4), time: 20.0 }]);
    }

    #[test]
    fn statistics_average_per_edge() {
        assert!(interval_statistics(&[], 0.0, 10.0).is_empty());
        let obs = |edge, enter, exit| EdgeObservation {
            vehicle: VehicleId(0),
            edge: EdgeId(edge),
            enter,
            exit,
        };
        let s = interval_statistics(&[obs(1, 0.0, 10.0), obs(1, 5.0, 25.0), obs(2, 0.0, 40.0)], 0.0, 30.0);
        assert_eq!(s, BTreeMap::from([(EdgeId(1), 15.0)]));
    }

    #[test]
    fn identical_seeds_identical_draws() {
        let m = coupled(0.3, SpeedProfile::flat());
        let a: Vec<f64> = (0..20)
            .map(|k| realized_traversal(&m, &edge10(), 10.0, 0.0, &mut noise_stream(5, VehicleId(2), k)))
            .collect();
        let b: Vec<f64> = (0..20)
            .map(|k| realized_traversal(&m, &edge10(), 10.0, 0.0, &mut noise_stream(5, VehicleId(2), k)))
            .collect();
        assert_eq!(a, b);
        assert!(a.windows(2).any(|w| w[0] != w[1]));
    }
}

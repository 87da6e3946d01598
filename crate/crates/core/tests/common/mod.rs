//! Independent reference implementations shared by the integration tests.
//!
//! Nothing here calls into the solver code it is used to check: shortest
//! paths come from Floyd–Warshall, stop orderings from plain enumeration and
//! assignments from exhaustive 0-1 search.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use fleetsim::ids::{EdgeId, NodeId, RequestId, VehicleId};
use fleetsim::network::{Edge, NetworkGraph, Router, TravelTimeTable};
use fleetsim::operator::{
    best_permutation, solve_assignment, AssignmentProblem, OnboardPassenger, OperatorConfig, RequestBook, Schedule,
    TripInfo, VehicleState,
};
use fleetsim::traffic::{noise_stream, realized_traversal, CouplingMode, SpeedProfile, TrafficModel};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random digraph on `n` nodes with integer travel times in `1..=max_time`.
/// `ring` adds a directed cycle through all nodes so every pair is
/// connected. Edge ids are shuffled so id order differs from insertion
/// order; parallel edges are allowed to provoke ties.
pub fn random_graph(rng: &mut impl Rng, n: u32, extra: usize, ring: bool, max_time: u32) -> NetworkGraph {
    let mut ends: Vec<(u32, u32)> = Vec::new();
    if ring && n > 1 {
        ends.extend((0..n).map(|i| (i, (i + 1) % n)));
    }
    while ends.len() < extra + if ring { n as usize } else { 0 } && n > 1 {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            ends.push((a, b));
        }
    }
    let mut ids: Vec<u32> = (0..ends.len() as u32).map(|i| i * 3 + 1).collect();
    ids.shuffle(rng);
    let edges = ends
        .iter()
        .zip(ids)
        .map(|(&(a, b), id)| Edge {
            id: EdgeId(id),
            from: NodeId(a),
            to: NodeId(b),
            distance: f64::from(rng.random_range(50..500u32)),
            free_flow_time: f64::from(rng.random_range(1..=max_time)),
        })
        .collect();
    NetworkGraph::new((0..n).map(NodeId).collect(), edges).expect("generated graph is valid")
}

pub fn router(graph: NetworkGraph) -> Router {
    let table = TravelTimeTable::free_flow(&graph, 1.0, 0.0);
    Router::new(Arc::new(graph), Arc::new(table))
}

/// All-pairs (time, hop count) minima, lexicographic, indexed by node
/// position. Unreachable pairs hold infinite time.
pub fn floyd_warshall(graph: &NetworkGraph, times: &[f64]) -> Vec<Vec<(f64, u32)>> {
    let n = graph.nodes().len();
    let mut d = vec![vec![(f64::INFINITY, u32::MAX); n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = (0.0, 0);
    }
    for (k, e) in graph.edges().iter().enumerate() {
        let a = graph.node_index(e.from).unwrap();
        let b = graph.node_index(e.to).unwrap();
        if (times[k], 1) < d[a][b] {
            d[a][b] = (times[k], 1);
        }
    }
    for k in 0..n {
        for i in 0..n {
            if d[i][k].0.is_infinite() {
                continue;
            }
            for j in 0..n {
                if d[k][j].0.is_infinite() {
                    continue;
                }
                let via = (d[i][k].0 + d[k][j].0, d[i][k].1 + d[k][j].1);
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

/// One trip as the ordering oracle sees it.
#[derive(Debug, Clone)]
pub struct OracleTrip {
    pub id: RequestId,
    pub origin: NodeId,
    pub destination: NodeId,
    pub request_time: f64,
    pub direct_time: f64,
    /// Set for passengers already on board.
    pub onboard_at: Option<f64>,
}

#[derive(Clone, Copy)]
enum Ev {
    Pu(usize),
    Do(usize),
}

/// Minimum cost over every precedence-respecting stop ordering that meets
/// capacity, waiting and detour limits. Consecutive events at one node share
/// a stop. `None` when no ordering is feasible.
pub fn brute_force_best(
    start: NodeId,
    available_at: f64,
    t_sim: f64,
    trips: &[OracleTrip],
    time: &dyn Fn(NodeId, NodeId) -> Option<f64>,
    config: &OperatorConfig,
) -> Option<f64> {
    let mut events: Vec<Ev> = Vec::new();
    let mut best: Option<f64> = None;
    let mut used_pu = vec![false; trips.len()];
    let mut used_do = vec![false; trips.len()];
    enumerate(trips, &mut events, &mut used_pu, &mut used_do, &mut |seq| {
        if let Some(c) = evaluate(start, available_at, t_sim, trips, seq, time, config) {
            if best.is_none_or(|b| c < b) {
                best = Some(c);
            }
        }
    });
    best
}

fn enumerate(
    trips: &[OracleTrip],
    seq: &mut Vec<Ev>,
    used_pu: &mut [bool],
    used_do: &mut [bool],
    leaf: &mut dyn FnMut(&[Ev]),
) {
    let mut any = false;
    for i in 0..trips.len() {
        let onboard = trips[i].onboard_at.is_some();
        if !onboard && !used_pu[i] {
            any = true;
            used_pu[i] = true;
            seq.push(Ev::Pu(i));
            enumerate(trips, seq, used_pu, used_do, leaf);
            seq.pop();
            used_pu[i] = false;
        } else if !used_do[i] {
            any = true;
            used_do[i] = true;
            seq.push(Ev::Do(i));
            enumerate(trips, seq, used_pu, used_do, leaf);
            seq.pop();
            used_do[i] = false;
        }
    }
    if !any {
        leaf(seq);
    }
}

fn evaluate(
    start: NodeId,
    available_at: f64,
    t_sim: f64,
    trips: &[OracleTrip],
    seq: &[Ev],
    time: &dyn Fn(NodeId, NodeId) -> Option<f64>,
    config: &OperatorConfig,
) -> Option<f64> {
    // group into stops: (node, boarding, alighting)
    let mut stops: Vec<(NodeId, Vec<usize>, Vec<usize>)> = Vec::new();
    for &ev in seq {
        let node = match ev {
            Ev::Pu(i) => trips[i].origin,
            Ev::Do(i) => trips[i].destination,
        };
        if stops.last().map(|s| s.0) != Some(node) {
            stops.push((node, Vec::new(), Vec::new()));
        }
        let s = stops.last_mut().unwrap();
        match ev {
            Ev::Pu(i) => s.1.push(i),
            Ev::Do(i) => s.2.push(i),
        }
    }
    let mut load = trips.iter().filter(|t| t.onboard_at.is_some()).count() as u32;
    let mut pickup = vec![None; trips.len()];
    let mut t = available_at;
    let mut pos = start;
    for (node, boarding, alighting) in &stops {
        let arrival = t + time(pos, *node)?;
        let departure = arrival + config.boarding_time;
        for &i in alighting {
            load -= 1;
            if config.capacity > 1 {
                let anchor = trips[i].onboard_at.or(pickup[i]).unwrap();
                if arrival > anchor + (1.0 + config.max_detour) * trips[i].direct_time {
                    return None;
                }
            }
        }
        for &i in boarding {
            load += 1;
            if departure > trips[i].request_time + config.max_wait {
                return None;
            }
            pickup[i] = Some(departure);
        }
        if load > config.capacity {
            return None;
        }
        t = departure;
        pos = *node;
    }
    let served = trips.iter().filter(|t| t.onboard_at.is_none()).count();
    Some((t - t_sim) - config.assignment_reward * served as f64)
}

/// Exhaustive 0-1 search over "at most one schedule per vehicle". Returns
/// the optimum and the lexicographically first optimal choice (vehicles in
/// id order, schedules in index order, no schedule last), or `None` when no
/// choice covers every assigned request.
pub fn exhaustive_assignment(p: &AssignmentProblem) -> Option<(f64, BTreeMap<VehicleId, usize>)> {
    let mut vehicles = p.vehicles.clone();
    vehicles.sort();
    vehicles.dedup();
    let options: Vec<Vec<usize>> = vehicles
        .iter()
        .map(|v| (0..p.schedules.len()).filter(|&i| p.schedules[i].vehicle == *v).collect())
        .collect();
    let mut best: Option<(f64, Vec<Option<usize>>)> = None;
    let mut choice = vec![None; vehicles.len()];
    let mut covered = BTreeSet::new();
    // partial choices that cover a request twice are skipped; every
    // remaining 0-1 vector is visited
    fn go(
        d: usize,
        p: &AssignmentProblem,
        options: &[Vec<usize>],
        choice: &mut Vec<Option<usize>>,
        covered: &mut BTreeSet<RequestId>,
        best: &mut Option<(f64, Vec<Option<usize>>)>,
    ) {
        if d == options.len() {
            if !p.assigned.is_subset(covered) {
                return;
            }
            let cost = choice.iter().flatten().fold(0.0, |acc, i| acc + p.schedules[*i].cost);
            if best.as_ref().is_none_or(|(b, _)| cost < *b) {
                *best = Some((cost, choice.clone()));
            }
            return;
        }
        for &i in &options[d] {
            let served = &p.schedules[i].served;
            if !served.is_disjoint(covered) {
                continue;
            }
            covered.extend(served.iter().copied());
            choice[d] = Some(i);
            go(d + 1, p, options, choice, covered, best);
            for r in served {
                covered.remove(r);
            }
        }
        choice[d] = None;
        go(d + 1, p, options, choice, covered, best);
    }
    go(0, p, &options, &mut choice, &mut covered, &mut best);
    best.map(|(c, ch)| {
        let chosen = ch
            .iter()
            .enumerate()
            .filter_map(|(d, i)| i.map(|i| (vehicles[d], i)))
            .collect();
        (c, chosen)
    })
}

/// Fastest paths on random graphs against Floyd–Warshall: time, hop count,
/// contiguity, additive totals and unreachability. Returns the number of
/// reachable pairs checked.
pub fn check_routing(seed: u64, graphs: usize) -> Result<usize, String> {
    let mut rng = rng(seed);
    let mut checked = 0;
    for g in 0..graphs {
        let n = rng.random_range(2..=50u32);
        let extra = rng.random_range(0..=3 * n as usize);
        let ring = rng.random_bool(0.6);
        let max_time = rng.random_range(1..=20u32);
        let graph = random_graph(&mut rng, n, extra, ring, max_time);
        let router = router(graph.clone());
        let fw = floyd_warshall(&graph, router.table().estimates());
        for (i, &o) in graph.nodes().iter().enumerate() {
            for (j, &d) in graph.nodes().iter().enumerate() {
                let (want_time, want_hops) = fw[i][j];
                let got = router.fastest_path(o, d);
                if want_time.is_infinite() {
                    if got.is_ok() || router.travel_time(o, d).is_ok() {
                        return Err(format!("graph {g}: {o}->{d} should be unreachable"));
                    }
                    continue;
                }
                let path = got.map_err(|e| format!("graph {g}: {o}->{d}: {e}"))?;
                if path.total_time != want_time || path.edges.len() as u32 != want_hops {
                    return Err(format!(
                        "graph {g}: {o}->{d} got ({}, {}) want ({want_time}, {want_hops})",
                        path.total_time,
                        path.edges.len()
                    ));
                }
                if router.travel_time(o, d).ok() != Some(want_time) {
                    return Err(format!("graph {g}: {o}->{d} travel_time disagrees"));
                }
                let mut at = o;
                let (mut time, mut dist) = (0.0, 0.0);
                for id in &path.edges {
                    let e = graph.edge(*id).ok_or(format!("graph {g}: unknown edge {id}"))?;
                    if e.from != at {
                        return Err(format!("graph {g}: {o}->{d} path is not contiguous"));
                    }
                    at = e.to;
                    time += router.table().estimate(graph.edge_index(*id).unwrap());
                    dist += e.distance;
                }
                if at != d || time != path.total_time || dist != path.total_distance {
                    return Err(format!("graph {g}: {o}->{d} totals or endpoint mismatch"));
                }
                if router.travel_distance(o, d).ok() != Some(path.total_distance) {
                    return Err(format!("graph {g}: {o}->{d} travel_distance disagrees"));
                }
                checked += 1;
            }
        }
    }
    Ok(checked)
}

/// A random ordering instance on a strongly connected integer-time graph.
pub struct OrderingInstance {
    pub router: Router,
    pub vehicle: VehicleState,
    pub requests: BTreeSet<RequestId>,
    pub book: RequestBook,
    pub trips: Vec<OracleTrip>,
    pub t_sim: f64,
    pub config: OperatorConfig,
}

pub fn random_config(rng: &mut impl Rng) -> OperatorConfig {
    let mut config = if rng.random_bool(0.3) { OperatorConfig::hailing() } else { OperatorConfig::pooling() };
    config.max_wait = [60.0, 120.0, 240.0, 480.0][rng.random_range(0..4)];
    config.boarding_time = [0.0, 10.0, 30.0][rng.random_range(0..3)];
    config.max_detour = [0.0, 0.4, 1.0][rng.random_range(0..3)];
    if config.capacity > 1 {
        config.capacity = rng.random_range(2..=4);
    }
    config
}

/// Up to `max_trips` trips, some possibly on board already.
pub fn ordering_instance(rng: &mut impl Rng, max_trips: usize) -> OrderingInstance {
    let n = rng.random_range(3..=12u32);
    let extra = rng.random_range(n as usize..=3 * n as usize);
    let graph = random_graph(rng, n, extra, true, 60);
    let router = router(graph);
    let config = random_config(rng);
    let t_sim = 1000.0;
    let node = |rng: &mut dyn rand::RngCore| NodeId(rng.random_range(0..n));
    let mut vehicle = VehicleState::idle(VehicleId(7), config.capacity, node(rng), t_sim + f64::from(rng.random_range(0..30u32)));
    let k = rng.random_range(1..=max_trips);
    let mut requests = BTreeSet::new();
    let mut book = RequestBook::new();
    let mut trips = Vec::new();
    for i in 0..k {
        let id = RequestId(100 + i as u32);
        let origin = node(rng);
        let mut destination = node(rng);
        while destination == origin {
            destination = node(rng);
        }
        let direct_time = router.travel_time(origin, destination).unwrap();
        let request_time = t_sim - f64::from(rng.random_range(0..200u32));
        let onboard = vehicle.onboard.len() < config.capacity as usize && rng.random_bool(0.25);
        let onboard_at = onboard.then(|| t_sim - f64::from(rng.random_range(0..100u32)));
        if let Some(at) = onboard_at {
            vehicle.onboard.push(OnboardPassenger { request: id, destination, picked_up_at: at, direct_time });
        } else {
            requests.insert(id);
        }
        book.insert(
            id,
            TripInfo { id, origin, destination, request_time, direct_time, promised_pickup: None },
        );
        trips.push(OracleTrip { id, origin, destination, request_time, direct_time, onboard_at });
    }
    OrderingInstance { router, vehicle, requests, book, trips, t_sim, config }
}

impl OrderingInstance {
    pub fn oracle(&self) -> Option<f64> {
        let time = |a: NodeId, b: NodeId| self.router.travel_time(a, b).ok();
        brute_force_best(self.vehicle.node, self.vehicle.available_at, self.t_sim, &self.trips, &time, &self.config)
    }

    pub fn library(&self) -> Option<f64> {
        best_permutation(&self.vehicle, &self.requests, &self.book, &self.router, self.t_sim, &self.config)
            .filter(|s| s.feasible)
            .map(|s| s.cost)
    }
}

/// Best ordering cost against the brute-force oracle. Returns the number of
/// feasible instances.
pub fn check_permutations(seed: u64, instances: usize) -> Result<usize, String> {
    let mut rng = rng(seed);
    let mut feasible = 0;
    for i in 0..instances {
        let inst = ordering_instance(&mut rng, 4);
        let (want, got) = (inst.oracle(), inst.library());
        if want != got {
            return Err(format!("instance {i}: got {got:?} want {want:?}"));
        }
        feasible += usize::from(want.is_some());
    }
    Ok(feasible)
}

/// Random assignment program with integer costs.
pub fn assignment_problem(rng: &mut impl Rng, max_vehicles: usize, max_schedules: usize, max_requests: u32) -> AssignmentProblem {
    let mut ids: Vec<u32> = (0..20).collect();
    ids.shuffle(rng);
    let mut vehicles: Vec<VehicleId> = ids[..rng.random_range(1..=max_vehicles)].iter().map(|&i| VehicleId(i)).collect();
    vehicles.sort();
    let requests: Vec<RequestId> = (0..rng.random_range(1..=max_requests)).map(|i| RequestId(50 + i)).collect();
    let assigned: BTreeSet<RequestId> = requests.iter().copied().filter(|_| rng.random_bool(0.3)).collect();
    let unassigned = requests.iter().copied().filter(|r| !assigned.contains(r)).collect();
    let mut schedules = Vec::new();
    for &v in &vehicles {
        let mut own = Vec::new();
        for _ in 0..rng.random_range(0..=max_schedules) {
            let size = rng.random_range(0..=3.min(requests.len()));
            let served: BTreeSet<RequestId> = requests.choose_multiple(rng, size).copied().collect();
            let cost = f64::from(rng.random_range(0..900u32)) - 1_000_000.0 * served.len() as f64;
            own.push(Schedule::bare(v, served, cost));
        }
        own.sort_by(|a: &Schedule, b: &Schedule| a.cost.total_cmp(&b.cost));
        schedules.extend(own);
    }
    AssignmentProblem { vehicles, schedules, assigned, unassigned, cap_hits: 0 }
}

/// Assignment optimum and chosen schedules against exhaustive enumeration.
/// Returns the number of feasible programs.
pub fn check_assignments(seed: u64, problems: usize) -> Result<usize, String> {
    let mut rng = rng(seed);
    let mut feasible = 0;
    for i in 0..problems {
        let p = assignment_problem(&mut rng, 6, 10, 8);
        let got = solve_assignment(&p, &OperatorConfig::default());
        match (exhaustive_assignment(&p), got) {
            (None, Err(_)) => {}
            (Some((cost, chosen)), Ok(a)) => {
                if a.objective != cost || a.chosen != chosen {
                    return Err(format!(
                        "problem {i}: got {} {:?} want {cost} {chosen:?}",
                        a.objective, a.chosen
                    ));
                }
                feasible += 1;
            }
            (want, got) => return Err(format!("problem {i}: got {got:?} want {want:?}")),
        }
    }
    Ok(feasible)
}

/// Noise mean at 10^5 samples within 1% of the profile-scaled free-flow
/// time, and exact deterministic times at zero noise.
pub fn check_noise(seed: u64) -> Result<f64, String> {
    let edge = Edge { id: EdgeId(1), from: NodeId(0), to: NodeId(1), distance: 100.0, free_flow_time: 10.0 };
    let profile = SpeedProfile::ramp(0.0, 7200.0, 8, 1.0, 1.6).map_err(|e| e.to_string())?;
    let mut model = TrafficModel { profile, noise_sigma: 0.3, seed, mode: CouplingMode::Coupled };
    let mut rel = 0.0_f64;
    for enter in [0.0, 3000.0, 7000.0] {
        let base = edge.free_flow_time * model.profile.multiplier(enter);
        let n = 100_000u64;
        let sum: f64 = (0..n)
            .map(|i| realized_traversal(&model, &edge, 99.0, enter, &mut noise_stream(seed, VehicleId(3), i)))
            .sum();
        let err = (sum / n as f64 - base).abs() / base;
        if err >= 0.01 {
            return Err(format!("enter {enter}: relative mean error {err}"));
        }
        rel = rel.max(err);
    }
    model.noise_sigma = 0.0;
    for i in 0..1000u64 {
        let enter = i as f64 * 7.2;
        let want = edge.free_flow_time * model.profile.multiplier(enter);
        let got = realized_traversal(&model, &edge, 99.0, enter, &mut noise_stream(seed, VehicleId(3), i));
        if got != want {
            return Err(format!("sigma 0 at {enter}: got {got} want {want}"));
        }
    }
    Ok(rel)
}

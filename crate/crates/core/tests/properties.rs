mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use fleetsim::demand::{generate_requests, OdRates, Request, RequestStatus};
use fleetsim::eval::{delta_wait, export_histogram};
use fleetsim::ids::{EdgeId, NodeId, RequestId, VehicleId};
use fleetsim::network::{NetworkGraph, Router, TravelTimeTable};
use fleetsim::operator::{
    best_permutation, build_candidates, simulate_schedule, solve_assignment, OperatorConfig, RequestBook, TripInfo,
    VehicleState,
};
use fleetsim::sim::{run, SimConfig, SimInput};
use fleetsim::traffic::{noise_stream, CouplingMode, SpeedProfile, TrafficModel, TrafficState};
use proptest::prelude::*;
use rand::Rng;

const STATUSES: [RequestStatus; 5] = [
    RequestStatus::Pending,
    RequestStatus::Assigned,
    RequestStatus::OnBoard,
    RequestStatus::Served,
    RequestStatus::Rejected,
];

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn estimates_never_drop_below_floor(
        seed in any::<u64>(),
        floor in 0.05f64..=1.0,
        means in proptest::collection::vec(0.01f64..100.0, 0..24),
    ) {
        let g = NetworkGraph::grid(3, 3, 100.0, 10.0).unwrap();
        let base = TravelTimeTable::free_flow(&g, floor, 0.0);
        let mut rng = common::rng(seed);
        let obs: BTreeMap<EdgeId, f64> = means
            .iter()
            .map(|&m| (g.edges()[rng.random_range(0..g.edges().len())].id, m))
            .collect();
        let next = base.apply_observations(&g, &obs, 60.0).unwrap();
        prop_assert_eq!(next.valid_from(), 60.0);
        for (i, e) in g.edges().iter().enumerate() {
            let floor_s = e.free_flow_time * floor;
            prop_assert!(next.estimate(i) >= floor_s);
            match obs.get(&e.id) {
                Some(&m) => prop_assert_eq!(next.estimate(i), m.max(floor_s)),
                None => prop_assert_eq!(next.estimate(i), base.estimate(i)),
            }
        }
    }

    #[test]
    fn planned_times_are_non_decreasing(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let inst = common::ordering_instance(&mut rng, 4);
        let Some(best) = best_permutation(&inst.vehicle, &inst.requests, &inst.book, &inst.router, inst.t_sim, &inst.config) else {
            return Ok(());
        };
        let again = simulate_schedule(&inst.vehicle, &best.plans(), &inst.book, &inst.router, inst.t_sim, &inst.config);
        prop_assert_eq!(again.cost, best.cost);
        let mut t = inst.vehicle.available_at;
        for s in &best.stops {
            prop_assert!(t <= s.planned_arrival && s.planned_arrival <= s.planned_departure);
            t = s.planned_departure;
        }
        prop_assert_eq!(best.t_end, t);
        for (r, pu) in &best.pickups {
            prop_assert!(pu < &best.dropoffs[r]);
        }
    }

    #[test]
    fn assignment_respects_structure(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let p = common::assignment_problem(&mut rng, 6, 10, 8);
        let Ok(a) = solve_assignment(&p, &OperatorConfig::default()) else {
            return Ok(());
        };
        let mut covered = BTreeSet::new();
        let mut total = 0.0;
        for (v, &i) in &a.chosen {
            prop_assert_eq!(p.schedules[i].vehicle, *v);
            for r in &p.schedules[i].served {
                prop_assert!(covered.insert(*r), "request {} covered twice", r);
            }
            total += p.schedules[i].cost;
        }
        prop_assert!(p.assigned.is_subset(&covered));
        let rejected: BTreeSet<RequestId> = p.unassigned.difference(&covered).copied().collect();
        prop_assert_eq!(&a.rejected, &rejected);
        prop_assert_eq!(a.objective, total);
    }

    #[test]
    fn histogram_counts_every_finite_value_once(
        values in proptest::collection::vec(-2000.0f64..2000.0, 0..200),
        width in 1.0f64..120.0,
    ) {
        let bins = export_histogram(&values, width);
        prop_assert_eq!(bins.iter().map(|b| b.count).sum::<u64>(), values.len() as u64);
        for w in bins.windows(2) {
            prop_assert_eq!(w[0].bin_end_s, w[1].bin_start_s);
        }
        for v in &values {
            let hits = bins.iter().filter(|b| b.bin_start_s <= *v && *v < b.bin_end_s && b.count > 0).count();
            prop_assert_eq!(hits, 1);
        }
    }

    #[test]
    fn traffic_conserves_routes(seed in any::<u64>(), coupled in any::<bool>()) {
        let g = Arc::new(NetworkGraph::grid(5, 5, 100.0, 10.0).unwrap());
        let table = TravelTimeTable::free_flow(&g, 1.0, 0.0);
        let router = Router::new(g.clone(), Arc::new(table.clone()));
        let mode = if coupled { CouplingMode::Coupled } else { CouplingMode::NotCoupled };
        let model = TrafficModel { profile: SpeedProfile::flat(), noise_sigma: 0.4, seed, mode };
        let mut state = TrafficState::new(g.clone(), model, 0.0);
        let mut rng = common::rng(seed);
        let mut routes = BTreeMap::new();
        for v in 0..6u32 {
            let from = g.nodes()[rng.random_range(0..25)];
            let to = g.nodes()[rng.random_range(0..25)];
            state.place_vehicle(VehicleId(v), from);
            let path = router.fastest_path(from, to).unwrap();
            let depart = f64::from(rng.random_range(0..50u32));
            state.dispatch_route(VehicleId(v), &path, depart, &table).unwrap();
            routes.insert(VehicleId(v), (path, depart));
        }
        let (arrivals, obs) = state.advance(1e6, &table);
        prop_assert_eq!(arrivals.len(), 6);
        prop_assert_eq!(obs.len(), routes.values().map(|(p, _)| p.edges.len()).sum::<usize>());
        for a in &arrivals {
            let (path, depart) = &routes[&a.vehicle];
            prop_assert_eq!(a.node, path.destination);
            let mine: Vec<_> = obs.iter().filter(|o| o.vehicle == a.vehicle).collect();
            prop_assert_eq!(mine.iter().map(|o| o.edge).collect::<Vec<_>>(), path.edges.clone());
            let mut t = *depart;
            for o in &mine {
                prop_assert_eq!(o.enter, t);
                prop_assert!(o.exit > o.enter);
                t = o.exit;
            }
            prop_assert_eq!(a.time, t);
            if !coupled {
                let sum: f64 = mine.iter().fold(0.0, |s, o| s + o.duration());
                prop_assert!((sum - path.total_time).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn reassignment_never_worsens_the_objective(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let n = rng.random_range(4..=9u32);
        let graph = common::random_graph(&mut rng, n, 2 * n as usize, true, 60);
        let router = common::router(graph);
        let mut config = common::random_config(&mut rng);
        config.max_wait = 480.0;
        let t0 = 0.0;
        let mut vehicles: Vec<VehicleState> = (0..3)
            .map(|v| VehicleState::idle(VehicleId(v), config.capacity, NodeId(rng.random_range(0..n)), t0))
            .collect();
        let mut book = RequestBook::new();
        let trip = |rng: &mut rand_chacha::ChaCha8Rng, id: u32, t: f64| {
            let origin = NodeId(rng.random_range(0..n));
            let destination = NodeId((origin.0 + rng.random_range(1..n)) % n);
            let direct_time = router.travel_time(origin, destination).unwrap();
            TripInfo { id: RequestId(id), origin, destination, request_time: t, direct_time, promised_pickup: None }
        };
        for i in 0..3 {
            book.insert(RequestId(i), trip(&mut rng, i, t0));
        }
        let first: BTreeSet<RequestId> = book.keys().copied().collect();
        let p = build_candidates(&vehicles, &BTreeSet::new(), &first, &book, &router, t0, &config);
        let a = solve_assignment(&p, &config).unwrap();
        let mut assigned = BTreeSet::new();
        for v in vehicles.iter_mut() {
            if let Some(&i) = a.chosen.get(&v.id) {
                let s = &p.schedules[i];
                v.assigned = s.served.clone();
                v.current_stops = s.plans();
                for (r, pu) in &s.pickups {
                    book.get_mut(r).unwrap().promised_pickup = Some(*pu);
                    assigned.insert(*r);
                }
            }
        }
        for i in 3..6 {
            book.insert(RequestId(i), trip(&mut rng, i, t0));
        }
        let fresh: BTreeSet<RequestId> = (3..6).map(RequestId).collect();
        let objective = |reassign: bool| {
            let mut c = config.clone();
            c.reassignment = reassign;
            let p = build_candidates(&vehicles, &assigned, &fresh, &book, &router, t0, &c);
            solve_assignment(&p, &c).unwrap().objective
        };
        let (nr, wr) = (objective(false), objective(true));
        prop_assert!(wr <= nr, "with {} without {}", wr, nr);
    }
}

#[test]
fn status_transitions_follow_the_lifecycle() {
    use RequestStatus::*;
    let allowed = [(Pending, Assigned), (Pending, Rejected), (Assigned, OnBoard), (OnBoard, Served)];
    for a in STATUSES {
        for b in STATUSES {
            let ok = allowed.contains(&(a, b));
            assert_eq!(a.can_become(b), ok, "{a:?} -> {b:?}");
            let mut r = Request::new(RequestId(0), NodeId(0), NodeId(1), 0.0);
            r.status = a;
            assert_eq!(r.set_status(b).is_ok(), ok);
            assert_eq!(r.status, if ok { b } else { a });
        }
    }
}

fn small_input(seed: u64, pooling: bool, reassign: bool, coupled: bool) -> SimInput {
    let graph = Arc::new(NetworkGraph::grid(4, 4, 100.0, 10.0).unwrap());
    let sim = SimConfig {
        start: 0.0,
        end: 2400.0,
        control_interval: 60.0,
        statistics_interval: 300.0,
        warmup: 300.0,
        cooldown: 300.0,
        seed,
    };
    let requests = generate_requests(&OdRates::uniform(&graph, 120.0, 0.0, 2400.0).unwrap(), seed);
    let mut operator = if pooling { OperatorConfig::pooling() } else { OperatorConfig::hailing() };
    operator.reassignment = reassign;
    let fleet = (0..4).map(|i| (VehicleId(i), graph.nodes()[i as usize * 4])).collect();
    SimInput {
        graph,
        requests,
        fleet,
        traffic: TrafficModel {
            profile: SpeedProfile::ramp(0.0, 2400.0, 4, 1.0, 1.6).unwrap(),
            noise_sigma: 0.3,
            seed,
            mode: if coupled { CouplingMode::Coupled } else { CouplingMode::NotCoupled },
        },
        operator,
        sim,
        floor_factor: 1.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn small_simulations_keep_their_invariants(
        seed in 0u64..1000,
        pooling in any::<bool>(),
        reassign in any::<bool>(),
        coupled in any::<bool>(),
    ) {
        let input = small_input(seed, pooling, reassign, coupled);
        let capacity = input.operator.capacity;
        let out = run(input.clone()).unwrap();
        prop_assert_eq!(out.stats.wait_violations, 0);
        prop_assert_eq!(out.stats.detour_violations, 0);
        prop_assert_eq!(out.stats.capacity_violations, 0);
        for v in &out.vehicles {
            prop_assert!(v.max_onboard <= capacity);
        }
        for r in &out.requests {
            if r.status == RequestStatus::Served {
                let (pu, d) = (r.actual_pickup.unwrap(), r.actual_dropoff.unwrap());
                prop_assert!(r.request_time <= pu && pu < d, "request {}", r.id);
                if !coupled && !reassign {
                    prop_assert_eq!(delta_wait(r), Some(0.0));
                }
            }
        }
        let again = run(input).unwrap();
        prop_assert_eq!(format!("{:?}", out), format!("{:?}", again));
    }
}

#[test]
fn noise_streams_do_not_depend_on_call_order() {
    let a: Vec<u64> = (0..50).map(|e| noise_stream(3, VehicleId(1), e).random()).collect();
    let b: Vec<u64> = (0..50).rev().map(|e| noise_stream(3, VehicleId(1), e).random()).collect();
    assert_eq!(a, b.into_iter().rev().collect::<Vec<_>>());
}

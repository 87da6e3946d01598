use std::collections::{BTreeSet, HashMap, VecDeque};
use std::sync::Arc;

use crate::demand::{Request, RequestStatus};
use crate::eval::{compute_kpis, EvalWindow};
use crate::ids::{NodeId, RequestId, VehicleId};
use crate::network::{NetworkGraph, Router, TravelTimeTable};
use crate::operator::{
    best_permutation, build_candidates, make_offer, rebalance, solve_assignment, OnboardPassenger,
    OperatorConfig, RequestBook, Schedule, StopPlan, TripInfo, VehicleState,
};
use crate::traffic::{interval_statistics, Arrival, EdgeObservation, Position, TrafficState};

use super::{
    FleetState, RunStats, SimConfig, SimError, SimInput, SimOutput, TtLogRow, VehicleActivity, VehicleRecord,
};

/// Give up if requests are still open this long after the horizon.
const DRAIN_LIMIT: f64 = 86_400.0;

#[derive(Debug, Clone)]
struct Dwell {
    start: f64,
    until: f64,
    boarding: Vec<RequestId>,
}

#[derive(Debug, Clone)]
struct Vehicle {
    id: VehicleId,
    /// Last node reached.
    node: NodeId,
    stops: VecDeque<StopPlan>,
    onboard: Vec<OnboardPassenger>,
    dwell: Option<Dwell>,
    /// Destination of the route handed to the traffic layer.
    target: Option<NodeId>,
    rebalancing: bool,
    record: VehicleRecord,
}

struct Engine {
    graph: Arc<NetworkGraph>,
    op: OperatorConfig,
    cfg: SimConfig,
    window: (f64, f64),
    router: Arc<Router>,
    prev_router: Arc<Router>,
    traffic: TrafficState,
    vehicles: Vec<Vehicle>,
    requests: Vec<Request>,
    ridx: HashMap<RequestId, usize>,
    next_request: usize,
    observations: Vec<EdgeObservation>,
    tt_log: Vec<TtLogRow>,
    fleet_states: Vec<FleetState>,
    stats: RunStats,
}

fn in_window(window: (f64, f64), t: f64) -> bool {
    t >= window.0 && t < window.1
}

impl Engine {
    fn new(input: SimInput) -> Result<Self, SimError> {
        input.sim.validate()?;
        input
            .operator
            .validate()
            .map_err(|source| SimError::Operator { time: input.sim.start, source })?;
        let graph = input.graph;
        let table = Arc::new(TravelTimeTable::free_flow(&graph, input.floor_factor, input.sim.start));
        let router = Arc::new(Router::new(graph.clone(), table));
        let mut traffic = TrafficState::new(graph.clone(), input.traffic, input.sim.start);

        let mut fleet = input.fleet;
        fleet.sort_by_key(|(v, _)| *v);
        let mut vehicles = Vec::with_capacity(fleet.len());
        for (i, &(id, node)) in fleet.iter().enumerate() {
            if i > 0 && fleet[i - 1].0 == id {
                return Err(SimError::InvalidConfig(format!("vehicle {id} listed twice")));
            }
            if !graph.contains_node(node) {
                return Err(SimError::InvalidConfig(format!("vehicle {id} starts at unknown node {node}")));
            }
            traffic.place_vehicle(id, node);
            vehicles.push(Vehicle {
                id,
                node,
                stops: VecDeque::new(),
                onboard: Vec::new(),
                dwell: None,
                target: None,
                rebalancing: false,
                record: VehicleRecord::new(id),
            });
        }

        let mut requests = input.requests;
        requests.sort_by(|a, b| a.request_time.total_cmp(&b.request_time).then(a.id.cmp(&b.id)));
        let mut ridx = HashMap::with_capacity(requests.len());
        for (i, r) in requests.iter().enumerate() {
            if ridx.insert(r.id, i).is_some() {
                return Err(SimError::InvalidConfig(format!("duplicate request id {}", r.id)));
            }
            if r.status != RequestStatus::Pending {
                return Err(SimError::InvalidConfig(format!("request {} is not pending", r.id)));
            }
        }

        let mut engine = Self {
            window: input.sim.window(),
            graph,
            op: input.operator,
            cfg: input.sim,
            prev_router: router.clone(),
            router,
            traffic,
            vehicles,
            requests,
            ridx,
            next_request: 0,
            observations: Vec::new(),
            tt_log: Vec::new(),
            fleet_states: Vec::new(),
            stats: RunStats::default(),
        };
        engine.log_table();
        Ok(engine)
    }

    fn log_table(&mut self) {
        let table = self.router.table();
        for (i, e) in self.graph.edges().iter().enumerate() {
            self.tt_log.push(TtLogRow {
                interval_start: table.valid_from(),
                edge: e.id,
                estimate: table.estimate(i),
            });
        }
    }

    fn req(&mut self, id: RequestId) -> &mut Request {
        let i = self.ridx[&id];
        &mut self.requests[i]
    }

    fn set_status(&mut self, id: RequestId, status: RequestStatus) -> Result<(), SimError> {
        self.req(id).set_status(status)?;
        Ok(())
    }

    fn head_of(&self, v: usize) -> NodeId {
        match self.traffic.position(self.vehicles[v].id) {
            Some(Position::OnEdge { head, .. }) => head,
            _ => self.vehicles[v].node,
        }
    }

    /// Routes vehicle `v` to `target`; a vehicle on an edge reroutes at its head.
    fn dispatch(&mut self, v: usize, target: NodeId, depart: f64) -> Result<(), SimError> {
        let from = self.head_of(v);
        let path = self.router.fastest_path(from, target)?;
        let table = self.router.table().clone();
        self.traffic.dispatch_route(self.vehicles[v].id, &path, depart, &table)?;
        self.vehicles[v].target = Some(target);
        Ok(())
    }

    fn next_dwell_end(&self) -> Option<f64> {
        self.vehicles
            .iter()
            .filter_map(|v| v.dwell.as_ref().map(|d| d.until))
            .min_by(f64::total_cmp)
    }

    /// Processes boarding ends and traffic events up to and including `t`.
    fn run_events(&mut self, t: f64) -> Result<(), SimError> {
        loop {
            let dwell = self.next_dwell_end().filter(|&x| x <= t);
            let moving = self.traffic.next_event_time().filter(|&x| x <= t);
            match (dwell, moving) {
                (None, None) => return Ok(()),
                (Some(d), m) if m.is_none_or(|m| d <= m) => self.finish_dwells(d)?,
                (_, Some(m)) => {
                    let table = self.router.table().clone();
                    let (arrivals, obs) = self.traffic.advance(m, &table);
                    self.account(&obs);
                    self.observations.extend(obs);
                    for a in arrivals {
                        self.arrive(a)?;
                    }
                }
                (Some(_), None) => unreachable!("guard covers a missing traffic event"),
            }
        }
    }

    fn vehicle_pos(&self, id: VehicleId) -> usize {
        self.vehicles
            .binary_search_by_key(&id, |v| v.id)
            .expect("traffic reports only fleet vehicles")
    }

    fn account(&mut self, obs: &[EdgeObservation]) {
        for o in obs {
            let v = self.vehicle_pos(o.vehicle);
            let distance = self.graph.edge(o.edge).map_or(0.0, |e| e.distance);
            let veh = &mut self.vehicles[v];
            veh.record.total_distance_m += distance;
            if in_window(self.window, o.exit) {
                veh.record.distance_m += distance;
                veh.record.passenger_distance_m += distance * veh.onboard.len() as f64;
                veh.record.busy_s += o.duration();
            }
        }
    }

    fn arrive(&mut self, a: Arrival) -> Result<(), SimError> {
        let v = self.vehicle_pos(a.vehicle);
        let veh = &mut self.vehicles[v];
        veh.node = a.node;
        veh.target = None;
        veh.rebalancing = false;
        match veh.stops.front().map(|s| s.node) {
            Some(n) if n == a.node => self.open_stop(v, a.time),
            Some(n) => self.dispatch(v, n, a.time),
            None => Ok(()),
        }
    }

    /// Alighting completes on arrival; boarders are on board from arrival and
    /// picked up when the dwell ends.
    fn open_stop(&mut self, v: usize, at: f64) -> Result<(), SimError> {
        let stop = self.vehicles[v].stops.pop_front().expect("caller checked");
        let until = at + self.op.boarding_time;
        for r in &stop.alighting {
            self.vehicles[v].onboard.retain(|p| p.request != *r);
            self.req(*r).actual_dropoff = Some(at);
            self.set_status(*r, RequestStatus::Served)?;
        }
        for r in &stop.boarding {
            self.set_status(*r, RequestStatus::OnBoard)?;
            let req = self.req(*r);
            let p = OnboardPassenger {
                request: req.id,
                destination: req.destination,
                picked_up_at: until,
                direct_time: req.direct_time.unwrap_or(0.0),
            };
            self.vehicles[v].onboard.push(p);
        }
        let veh = &mut self.vehicles[v];
        let load = veh.onboard.len() as u32;
        if load > veh.record.max_onboard {
            veh.record.max_onboard = load;
        }
        if load > self.op.capacity {
            self.stats.capacity_violations += 1;
        }
        veh.dwell = Some(Dwell {
            start: at,
            until,
            boarding: stop.boarding,
        });
        Ok(())
    }

    fn finish_dwells(&mut self, t: f64) -> Result<(), SimError> {
        for v in 0..self.vehicles.len() {
            if self.vehicles[v].dwell.as_ref().is_none_or(|d| d.until != t) {
                continue;
            }
            let dwell = self.vehicles[v].dwell.take().expect("checked");
            for r in &dwell.boarding {
                self.req(*r).actual_pickup = Some(dwell.until);
            }
            if in_window(self.window, dwell.until) {
                self.vehicles[v].record.busy_s += dwell.until - dwell.start;
            }
            if let Some(next) = self.vehicles[v].stops.front().map(|s| s.node) {
                self.dispatch(v, next, t)?;
            }
        }
        Ok(())
    }

    fn update_estimates(&mut self, boundary: f64) -> Result<(), SimError> {
        let from = boundary - self.cfg.statistics_interval;
        let means = interval_statistics(&self.observations, from, boundary);
        let table = self.router.table().apply_observations(&self.graph, &means, boundary)?;
        self.prev_router = self.router.clone();
        self.router = Arc::new(Router::new(self.graph.clone(), Arc::new(table)));
        self.observations.retain(|o| o.exit >= boundary);
        self.log_table();
        Ok(())
    }

    fn planning_state(&self, v: usize, t: f64) -> VehicleState {
        let veh = &self.vehicles[v];
        let (node, available_at) = match (&veh.dwell, self.traffic.position(veh.id)) {
            (Some(d), _) => (veh.node, d.until),
            (None, Some(Position::OnEdge { edge, enter, head })) => {
                let idx = self.graph.edge_index(edge).expect("known edge");
                (head, (enter + self.router.table().estimate(idx)).max(t))
            }
            _ => (veh.node, t),
        };
        VehicleState {
            id: veh.id,
            capacity: self.op.capacity,
            node,
            available_at,
            onboard: veh.onboard.clone(),
            assigned: veh.stops.iter().flat_map(|s| s.boarding.iter().copied()).collect(),
            current_stops: veh.stops.iter().cloned().collect(),
        }
    }

    fn trip_info(r: &Request) -> TripInfo {
        TripInfo {
            id: r.id,
            origin: r.origin,
            destination: r.destination,
            request_time: r.request_time,
            direct_time: r.direct_time.unwrap_or(0.0),
            promised_pickup: r.expected_pickup,
        }
    }

    /// One fleet-control step at tick time `t`.
    fn control(&mut self, t: f64) -> Result<(), SimError> {
        // new requests, with the direct trip frozen under the table in force at t_i
        let mut fresh = Vec::new();
        let mut rejected_nodes = Vec::new();
        while self.next_request < self.requests.len() && self.requests[self.next_request].request_time <= t {
            let i = self.next_request;
            self.next_request += 1;
            let router = if self.requests[i].request_time >= self.router.table().valid_from() {
                &self.router
            } else {
                &self.prev_router
            };
            let router = router.clone();
            if self.requests[i].freeze_direct_trip(&router).is_err() {
                let id = self.requests[i].id;
                rejected_nodes.push(self.requests[i].origin);
                self.set_status(id, RequestStatus::Rejected)?;
                continue;
            }
            fresh.push(self.requests[i].id);
        }

        let assigned: BTreeSet<RequestId> = self
            .vehicles
            .iter()
            .flat_map(|v| v.stops.iter().flat_map(|s| s.boarding.iter().copied()))
            .collect();
        if !fresh.is_empty() || !assigned.is_empty() {
            self.optimize(t, &fresh, &assigned, &mut rejected_nodes)?;
        }
        self.rebalance(t, &rejected_nodes)
    }

    fn optimize(
        &mut self,
        t: f64,
        fresh: &[RequestId],
        assigned: &BTreeSet<RequestId>,
        rejected_nodes: &mut Vec<NodeId>,
    ) -> Result<(), SimError> {
        let states: Vec<VehicleState> = (0..self.vehicles.len()).map(|v| self.planning_state(v, t)).collect();
        let unassigned: BTreeSet<RequestId> = fresh.iter().copied().collect();
        let mut book = RequestBook::new();
        for r in assigned.iter().chain(&unassigned) {
            let req = &self.requests[self.ridx[r]];
            book.insert(*r, Self::trip_info(req));
        }
        let problem = build_candidates(&states, assigned, &unassigned, &book, &self.router, t, &self.op);
        let solution = solve_assignment(&problem, &self.op).map_err(|source| SimError::Operator { time: t, source })?;
        self.stats.optimizations += 1;
        self.stats.candidate_schedules += problem.schedules.len() as u64;
        self.stats.cap_hits += problem.cap_hits as u64;

        for (v, state) in states.iter().enumerate() {
            let schedule = match solution.chosen.get(&state.id) {
                Some(&i) => problem.schedules[i].clone(),
                None if state.onboard.is_empty() => Schedule::idle(state, t),
                None => best_permutation(state, &BTreeSet::new(), &book, &self.router, t, &self.op)
                    .unwrap_or_else(|| Schedule::idle(state, t)),
            };
            if !schedule.feasible {
                self.stats.damage_control += 1;
            }
            for r in &schedule.served {
                self.confirm(*r, state.id, &schedule)?;
            }
            self.apply_schedule(v, &schedule, t)?;
        }

        for r in fresh {
            if solution.rejected.contains(r) {
                rejected_nodes.push(self.req(*r).origin);
                self.set_status(*r, RequestStatus::Rejected)?;
            }
        }
        Ok(())
    }

    fn confirm(&mut self, r: RequestId, vehicle: VehicleId, schedule: &Schedule) -> Result<(), SimError> {
        let op = self.op.clone();
        let req = self.req(r);
        match req.status {
            RequestStatus::Pending => {
                let offer = make_offer(schedule, r).map_err(|source| SimError::Operator {
                    time: schedule.t_end,
                    source,
                })?;
                req.expected_pickup = Some(offer.expected_pickup);
                req.expected_dropoff = Some(offer.expected_dropoff);
                req.vehicle = Some(vehicle);
                let wait_bad = offer.expected_pickup > op.latest_pickup(req.request_time);
                let detour_bad = op.detour_limited()
                    && offer.expected_dropoff
                        > op.latest_dropoff(offer.expected_pickup, req.direct_time.unwrap_or(0.0));
                req.set_status(RequestStatus::Assigned)?;
                self.stats.wait_violations += u64::from(wait_bad);
                self.stats.detour_violations += u64::from(detour_bad);
            }
            RequestStatus::Assigned if req.vehicle != Some(vehicle) => {
                req.vehicle = Some(vehicle);
                req.reassignments += 1;
                self.stats.reassignments += 1;
            }
            _ => {}
        }
        Ok(())
    }

    fn apply_schedule(&mut self, v: usize, schedule: &Schedule, t: f64) -> Result<(), SimError> {
        let stops: VecDeque<StopPlan> = schedule.plans().into();
        let first = stops.front().map(|s| s.node);
        let veh = &mut self.vehicles[v];
        veh.stops = stops;
        if veh.dwell.is_some() {
            return Ok(());
        }
        match (first, veh.target) {
            (Some(n), Some(cur)) if n == cur => {
                veh.rebalancing = false;
                Ok(())
            }
            (Some(n), _) => {
                veh.rebalancing = false;
                self.dispatch(v, n, t)
            }
            (None, Some(_)) if !veh.rebalancing => {
                // nothing left to do: stop at the next node
                let head = self.head_of(v);
                self.dispatch(v, head, t)
            }
            (None, _) => Ok(()),
        }
    }

    fn rebalance(&mut self, t: f64, rejected_nodes: &[NodeId]) -> Result<(), SimError> {
        if rejected_nodes.is_empty() {
            return Ok(());
        }
        let idle: Vec<(VehicleId, NodeId)> = (0..self.vehicles.len())
            .filter(|&v| {
                let veh = &self.vehicles[v];
                veh.stops.is_empty()
                    && veh.onboard.is_empty()
                    && veh.dwell.is_none()
                    && (veh.target.is_none() || veh.rebalancing)
            })
            .map(|v| (self.vehicles[v].id, self.head_of(v)))
            .collect();
        let moves = rebalance(&idle, rejected_nodes, &self.router);
        for (id, node) in moves {
            let v = self.vehicle_pos(id);
            let veh = &self.vehicles[v];
            if veh.target == Some(node) || (veh.target.is_none() && veh.node == node) {
                continue;
            }
            self.dispatch(v, node, t)?;
            self.vehicles[v].rebalancing = true;
            self.stats.rebalancing_trips += 1;
        }
        Ok(())
    }

    fn snapshot(&mut self, t: f64) {
        for v in 0..self.vehicles.len() {
            let veh = &self.vehicles[v];
            let activity = if veh.dwell.is_some() {
                VehicleActivity::Boarding
            } else if self.traffic.is_moving(veh.id) {
                VehicleActivity::Moving
            } else {
                VehicleActivity::Idle
            };
            let node = self.head_of(v);
            let veh = &self.vehicles[v];
            self.fleet_states.push(FleetState {
                time: t,
                vehicle: veh.id,
                node,
                onboard: veh.onboard.len() as u32,
                activity,
            });
        }
    }

    fn open_requests(&self) -> bool {
        self.next_request < self.requests.len()
            || self.requests.iter().any(|r| {
                matches!(
                    r.status,
                    RequestStatus::Pending | RequestStatus::Assigned | RequestStatus::OnBoard
                )
            })
    }

    fn run(mut self) -> Result<SimOutput, SimError> {
        let per_stat = self.cfg.ticks_per_statistics();
        let mut k: u64 = 0;
        loop {
            let t = self.cfg.start + k as f64 * self.cfg.control_interval;
            self.run_events(t)?;
            if k > 0 && k.is_multiple_of(per_stat) {
                self.update_estimates(t)?;
            }
            self.control(t)?;
            self.snapshot(t);
            if t >= self.cfg.end && !self.open_requests() {
                break;
            }
            if t > self.cfg.end + DRAIN_LIMIT {
                return Err(SimError::NotDrained(t));
            }
            k += 1;
        }
        let vehicles: Vec<VehicleRecord> = self.vehicles.iter().map(|v| v.record.clone()).collect();
        let window = EvalWindow {
            start: self.window.0,
            end: self.window.1,
            fleet_size: vehicles.len(),
        };
        let kpis = compute_kpis(&self.requests, &vehicles, &window);
        Ok(SimOutput {
            requests: self.requests,
            vehicles,
            fleet_states: self.fleet_states,
            tt_log: self.tt_log,
            stats: self.stats,
            kpis,
        })
    }
}

/// Runs one scenario to completion: every request is served or rejected.
pub fn run(input: SimInput) -> Result<SimOutput, SimError> {
    Engine::new(input)?.run()
}

use std::collections::{BTreeMap, BTreeSet};

use crate::ids::{NodeId, RequestId, VehicleId};
use crate::network::Router;

use super::OperatorConfig;

/// Operator-side view of a request that may appear in a schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripInfo {
    pub id: RequestId,
    pub origin: NodeId,
    pub destination: NodeId,
    pub request_time: f64,
    pub direct_time: f64,
    /// Pickup time communicated at first assignment.
    pub promised_pickup: Option<f64>,
}

pub type RequestBook = BTreeMap<RequestId, TripInfo>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnboardPassenger {
    pub request: RequestId,
    pub destination: NodeId,
    /// Actual (or in-progress boarding) pickup time; anchors the detour limit.
    pub picked_up_at: f64,
    pub direct_time: f64,
}

/// A vehicle as the operator plans it: the node it can next act from and
/// when, who is on board, and its current commitments.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub id: VehicleId,
    pub capacity: u32,
    pub node: NodeId,
    pub available_at: f64,
    pub onboard: Vec<OnboardPassenger>,
    /// Not-yet-picked-up requests currently assigned to this vehicle.
    pub assigned: BTreeSet<RequestId>,
    /// Remaining stops of the current schedule.
    pub current_stops: Vec<StopPlan>,
}

impl VehicleState {
    pub fn idle(id: VehicleId, capacity: u32, node: NodeId, at: f64) -> Self {
        Self {
            id,
            capacity,
            node,
            available_at: at,
            onboard: Vec::new(),
            assigned: BTreeSet::new(),
            current_stops: Vec::new(),
        }
    }

    pub fn is_idle(&self) -> bool {
        self.onboard.is_empty() && self.assigned.is_empty() && self.current_stops.is_empty()
    }
}

/// A stop without timing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopPlan {
    pub node: NodeId,
    pub boarding: Vec<RequestId>,
    pub alighting: Vec<RequestId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stop {
    pub node: NodeId,
    pub boarding: Vec<RequestId>,
    pub alighting: Vec<RequestId>,
    pub planned_arrival: f64,
    pub planned_departure: f64,
}

impl Stop {
    pub fn plan(&self) -> StopPlan {
        StopPlan {
            node: self.node,
            boarding: self.boarding.clone(),
            alighting: self.alighting.clone(),
        }
    }
}

/// Why a schedule is infeasible. Ordered by reporting priority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Infeasibility {
    Precedence,
    Capacity,
    Unreachable,
    Waiting,
    Detour,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub vehicle: VehicleId,
    pub stops: Vec<Stop>,
    /// Requests picked up by this schedule.
    pub served: BTreeSet<RequestId>,
    pub pickups: BTreeMap<RequestId, f64>,
    pub dropoffs: BTreeMap<RequestId, f64>,
    pub latest_pickup: BTreeMap<RequestId, f64>,
    pub latest_dropoff: BTreeMap<RequestId, f64>,
    pub t_end: f64,
    pub feasible: bool,
    pub reason: Option<Infeasibility>,
    pub cost: f64,
}

impl Schedule {
    /// A schedule carrying only coverage and cost, for assignment-level use.
    pub fn bare(vehicle: VehicleId, served: BTreeSet<RequestId>, cost: f64) -> Self {
        Self {
            vehicle,
            stops: Vec::new(),
            served,
            pickups: BTreeMap::new(),
            dropoffs: BTreeMap::new(),
            latest_pickup: BTreeMap::new(),
            latest_dropoff: BTreeMap::new(),
            t_end: 0.0,
            feasible: true,
            reason: None,
            cost,
        }
    }

    pub fn idle(vehicle: &VehicleState, t_sim: f64) -> Self {
        let mut s = Self::bare(vehicle.id, BTreeSet::new(), 0.0);
        s.t_end = vehicle.available_at.max(t_sim);
        s
    }

    pub fn plans(&self) -> Vec<StopPlan> {
        self.stops.iter().map(Stop::plan).collect()
    }

    pub fn same_route(&self, other: &Schedule) -> bool {
        self.vehicle == other.vehicle
            && self.stops.len() == other.stops.len()
            && self
                .stops
                .iter()
                .zip(&other.stops)
                .all(|(a, b)| a.node == b.node && a.boarding == b.boarding && a.alighting == b.alighting)
    }
}

/// Cost to be minimized: execution time minus a reward per served request
/// plus weighted delays beyond the latest pickup and dropoff times.
pub fn schedule_cost(schedule: &Schedule, t_sim: f64, config: &OperatorConfig) -> f64 {
    if schedule.stops.is_empty() {
        return 0.0;
    }
    let pickup_delay: f64 = schedule
        .pickups
        .iter()
        .map(|(r, pu)| schedule.latest_pickup.get(r).map_or(0.0, |l| (pu - l).max(0.0)))
        .sum();
    let dropoff_delay: f64 = schedule
        .dropoffs
        .iter()
        .map(|(r, d)| schedule.latest_dropoff.get(r).map_or(0.0, |l| (d - l).max(0.0)))
        .sum();
    (schedule.t_end - t_sim) - config.assignment_reward * schedule.served.len() as f64
        + config.delay_penalty * pickup_delay
        + config.delay_penalty * dropoff_delay
}

/// Times a fixed stop sequence for `vehicle` and checks precedence,
/// capacity, waiting and detour conditions.
pub fn simulate_schedule(
    vehicle: &VehicleState,
    stops: &[StopPlan],
    book: &RequestBook,
    router: &Router,
    t_sim: f64,
    config: &OperatorConfig,
) -> Schedule {
    let mut sched = Schedule::idle(vehicle, t_sim);
    let mut violations = BTreeSet::new();
    let onboard: BTreeMap<RequestId, &OnboardPassenger> =
        vehicle.onboard.iter().map(|p| (p.request, p)).collect();
    let mut aboard: BTreeSet<RequestId> = onboard.keys().copied().collect();
    if aboard.len() > vehicle.capacity as usize {
        violations.insert(Infeasibility::Capacity);
    }
    let mut pos = vehicle.node;
    let mut t = vehicle.available_at;

    for sp in stops {
        let leg = match router.travel_time(pos, sp.node) {
            Ok(x) => x,
            Err(_) => {
                violations.insert(Infeasibility::Unreachable);
                break;
            }
        };
        let arrival = t + leg;
        let departure = if sp.boarding.is_empty() && sp.alighting.is_empty() {
            arrival
        } else {
            arrival + config.boarding_time
        };
        for r in &sp.alighting {
            if aboard.remove(r) {
                sched.dropoffs.insert(*r, arrival);
            } else {
                violations.insert(Infeasibility::Precedence);
            }
        }
        for r in &sp.boarding {
            let known = book.contains_key(r);
            if !known || onboard.contains_key(r) || sched.pickups.contains_key(r) || sp.alighting.contains(r) {
                violations.insert(Infeasibility::Precedence);
                continue;
            }
            sched.pickups.insert(*r, departure);
            sched.served.insert(*r);
            aboard.insert(*r);
        }
        if aboard.len() > vehicle.capacity as usize {
            violations.insert(Infeasibility::Capacity);
        }
        sched.stops.push(Stop {
            node: sp.node,
            boarding: sp.boarding.clone(),
            alighting: sp.alighting.clone(),
            planned_arrival: arrival,
            planned_departure: departure,
        });
        t = departure;
        pos = sp.node;
    }
    if !aboard.is_empty() {
        violations.insert(Infeasibility::Precedence);
    }
    if violations.contains(&Infeasibility::Unreachable) {
        sched.feasible = false;
        sched.reason = violations.first().copied();
        sched.cost = f64::INFINITY;
        return sched;
    }

    for (r, pu) in &sched.pickups {
        let latest = config.latest_pickup(book[r].request_time);
        sched.latest_pickup.insert(*r, latest);
        if *pu > latest {
            violations.insert(Infeasibility::Waiting);
        }
    }
    if config.detour_limited() {
        for (r, d) in &sched.dropoffs {
            let (anchor, direct) = match onboard.get(r) {
                Some(p) => (p.picked_up_at, p.direct_time),
                None => (sched.pickups[r], book[r].direct_time),
            };
            let latest = config.latest_dropoff(anchor, direct);
            sched.latest_dropoff.insert(*r, latest);
            if *d > latest {
                violations.insert(Infeasibility::Detour);
            }
        }
    }
    if !sched.stops.is_empty() {
        sched.t_end = t;
    }
    sched.feasible = violations.is_empty();
    sched.reason = violations.first().copied();
    sched.cost = schedule_cost(&sched, t_sim, config);
    sched
}

#[derive(Debug, Clone, Copy)]
enum Event {
    Pickup(usize),
    Dropoff(usize),
}

#[derive(Debug)]
struct Trip {
    id: RequestId,
    origin: NodeId,
    destination: NodeId,
    latest_pickup: f64,
    /// Pickup time for passengers already on board.
    onboard_at: Option<f64>,
    direct_time: f64,
}

struct OrderingSearch<'a> {
    vehicle: &'a VehicleState,
    trips: Vec<Trip>,
    book: &'a RequestBook,
    router: &'a Router,
    config: &'a OperatorConfig,
    t_sim: f64,
    enforce_time: bool,
    served: usize,
    seq: Vec<Event>,
    picked: Vec<Option<f64>>,
    dropped: Vec<bool>,
    best: Option<Schedule>,
}

#[derive(Clone, Copy)]
struct Cursor {
    node: NodeId,
    /// Departure from the last stop (or availability time before any stop).
    t: f64,
    last_arrival: f64,
    stop_open: bool,
    load: u32,
    penalty: f64,
}

impl OrderingSearch<'_> {
    fn node_of(&self, ev: Event) -> NodeId {
        match ev {
            Event::Pickup(i) => self.trips[i].origin,
            Event::Dropoff(i) => self.trips[i].destination,
        }
    }

    fn best_cost(&self) -> f64 {
        self.best.as_ref().map_or(f64::INFINITY, |s| s.cost)
    }

    fn stops(&self) -> Vec<StopPlan> {
        let mut out: Vec<StopPlan> = Vec::new();
        for &ev in &self.seq {
            let node = self.node_of(ev);
            if out.last().map(|s| s.node) != Some(node) {
                out.push(StopPlan {
                    node,
                    boarding: Vec::new(),
                    alighting: Vec::new(),
                });
            }
            let stop = out.last_mut().expect("pushed above");
            match ev {
                Event::Pickup(i) => stop.boarding.push(self.trips[i].id),
                Event::Dropoff(i) => stop.alighting.push(self.trips[i].id),
            }
        }
        out
    }

    fn leaf(&mut self) {
        let stops = self.stops();
        let s = simulate_schedule(self.vehicle, &stops, self.book, self.router, self.t_sim, self.config);
        if self.enforce_time && !s.feasible {
            return;
        }
        if s.reason.is_some_and(|r| matches!(r, Infeasibility::Precedence | Infeasibility::Capacity)) {
            return;
        }
        if s.cost < self.best_cost() {
            self.best = Some(s);
        }
    }

    fn step(&self, cur: Cursor, ev: Event) -> Option<Cursor> {
        let node = self.node_of(ev);
        let (arrival, departure) = if cur.stop_open && node == cur.node {
            (cur.last_arrival, cur.t)
        } else {
            let leg = self.router.travel_time(cur.node, node).ok()?;
            let a = cur.t + leg;
            (a, a + self.config.boarding_time)
        };
        let mut next = Cursor {
            node,
            t: departure,
            last_arrival: arrival,
            stop_open: true,
            ..cur
        };
        match ev {
            Event::Pickup(i) => {
                if next.load + 1 > self.vehicle.capacity {
                    return None;
                }
                next.load += 1;
                let late = departure - self.trips[i].latest_pickup;
                if late > 0.0 {
                    if self.enforce_time {
                        return None;
                    }
                    next.penalty += late;
                }
            }
            Event::Dropoff(i) => {
                next.load -= 1;
                if self.config.detour_limited() {
                    let trip = &self.trips[i];
                    let anchor = trip.onboard_at.or(self.picked[i]).expect("picked before dropoff");
                    let late = arrival - self.config.latest_dropoff(anchor, trip.direct_time);
                    if late > 0.0 {
                        if self.enforce_time {
                            return None;
                        }
                        next.penalty += late;
                    }
                }
            }
        }
        if self.enforce_time
            && self
                .trips
                .iter()
                .enumerate()
                .any(|(j, tr)| tr.onboard_at.is_none() && self.picked[j].is_none() && !matches!(ev, Event::Pickup(k) if k == j) && tr.latest_pickup < departure)
        {
            return None;
        }
        Some(next)
    }

    fn search(&mut self, cur: Cursor) {
        let total = self.trips.iter().map(|t| if t.onboard_at.is_some() { 1 } else { 2 }).sum::<usize>();
        if self.seq.len() == total {
            self.leaf();
            return;
        }
        for i in 0..self.trips.len() {
            let ev = if self.dropped[i] {
                continue;
            } else if self.trips[i].onboard_at.is_some() || self.picked[i].is_some() {
                Event::Dropoff(i)
            } else {
                Event::Pickup(i)
            };
            let Some(next) = self.step(cur, ev) else {
                continue;
            };
            let bound = (next.t - self.t_sim) - self.config.assignment_reward * self.served as f64
                + self.config.delay_penalty * next.penalty;
            if bound > self.best_cost() {
                continue;
            }
            match ev {
                Event::Pickup(_) => self.picked[i] = Some(next.t),
                Event::Dropoff(_) => self.dropped[i] = true,
            }
            self.seq.push(ev);
            self.search(next);
            self.seq.pop();
            match ev {
                Event::Pickup(_) => self.picked[i] = None,
                Event::Dropoff(_) => self.dropped[i] = false,
            }
        }
    }
}

fn search_orderings(
    vehicle: &VehicleState,
    requests: &BTreeSet<RequestId>,
    book: &RequestBook,
    router: &Router,
    t_sim: f64,
    config: &OperatorConfig,
    enforce_time: bool,
) -> Option<Schedule> {
    let mut trips: Vec<Trip> = vehicle
        .onboard
        .iter()
        .map(|p| Trip {
            id: p.request,
            origin: p.destination,
            destination: p.destination,
            latest_pickup: f64::INFINITY,
            onboard_at: Some(p.picked_up_at),
            direct_time: p.direct_time,
        })
        .collect();
    for r in requests {
        if vehicle.onboard.iter().any(|p| p.request == *r) {
            continue;
        }
        let info = book.get(r)?;
        trips.push(Trip {
            id: *r,
            origin: info.origin,
            destination: info.destination,
            latest_pickup: config.latest_pickup(info.request_time),
            onboard_at: None,
            direct_time: info.direct_time,
        });
    }
    trips.sort_by_key(|t| t.id);
    let n = trips.len();
    let served = trips.iter().filter(|t| t.onboard_at.is_none()).count();
    let mut search = OrderingSearch {
        vehicle,
        trips,
        book,
        router,
        config,
        t_sim,
        enforce_time,
        served,
        seq: Vec::with_capacity(2 * n),
        picked: vec![None; n],
        dropped: vec![false; n],
        best: None,
    };
    search.search(Cursor {
        node: vehicle.node,
        t: vehicle.available_at,
        last_arrival: vehicle.available_at,
        stop_open: false,
        load: vehicle.onboard.len() as u32,
        penalty: 0.0,
    });
    search.best
}

/// Minimum-cost stop ordering serving `requests` plus everyone on board.
///
/// Feasible orderings win. An infeasible one is returned only when every
/// request is already assigned to this vehicle (damage control); otherwise
/// `None` means the set cannot be served.
pub fn best_permutation(
    vehicle: &VehicleState,
    requests: &BTreeSet<RequestId>,
    book: &RequestBook,
    router: &Router,
    t_sim: f64,
    config: &OperatorConfig,
) -> Option<Schedule> {
    if requests.is_empty() && vehicle.onboard.is_empty() {
        return None;
    }
    if requests.len() + vehicle.onboard.len() > config.max_schedule_requests {
        return None;
    }
    if let Some(s) = search_orderings(vehicle, requests, book, router, t_sim, config, true) {
        return Some(s);
    }
    if requests.is_subset(&vehicle.assigned) {
        return search_orderings(vehicle, requests, book, router, t_sim, config, false);
    }
    None
}

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rayon::prelude::*;

use crate::ids::{RequestId, VehicleId};
use crate::network::Router;

use super::schedule::{best_permutation, simulate_schedule, RequestBook, Schedule, VehicleState};
use super::OperatorConfig;

/// Candidate schedules for one optimization, grouped by vehicle id and,
/// within a vehicle, ordered by cost. A schedule's position inside its
/// vehicle group is its schedule index.
#[derive(Debug, Clone, Default)]
pub struct AssignmentProblem {
    pub vehicles: Vec<VehicleId>,
    pub schedules: Vec<Schedule>,
    /// Requests confirmed in earlier optimizations; must be covered again.
    pub assigned: BTreeSet<RequestId>,
    /// New requests; may stay uncovered.
    pub unassigned: BTreeSet<RequestId>,
    /// Combinations skipped because they would exceed the size cap.
    pub cap_hits: usize,
}

impl AssignmentProblem {
    /// Indices into `schedules` of every schedule covering `request`.
    pub fn covering(&self, request: RequestId) -> Vec<usize> {
        self.schedules
            .iter()
            .enumerate()
            .filter(|(_, s)| s.served.contains(&request))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn schedules_of(&self, vehicle: VehicleId) -> impl Iterator<Item = (usize, &Schedule)> {
        self.schedules
            .iter()
            .enumerate()
            .filter(move |(_, s)| s.vehicle == vehicle)
    }
}

struct VehicleCandidates {
    schedules: Vec<Schedule>,
    cap_hits: usize,
}

fn push_unique(list: &mut Vec<Schedule>, s: Schedule) {
    if s.cost.is_finite() && !list.iter().any(|x| x.same_route(&s)) {
        list.push(s);
    }
}

#[allow(clippy::too_many_arguments)]
fn vehicle_candidates(
    vehicle: &VehicleState,
    current: Schedule,
    caps: &BTreeMap<RequestId, f64>,
    assigned: &BTreeSet<RequestId>,
    unassigned: &BTreeSet<RequestId>,
    book: &RequestBook,
    router: &Router,
    t_sim: f64,
    config: &OperatorConfig,
) -> VehicleCandidates {
    let mut out = Vec::new();
    let mut cap_hits = 0;

    // keep-current (damage control)
    push_unique(&mut out, current);

    let own = &vehicle.assigned;
    let own_best = if own.is_empty() && vehicle.onboard.is_empty() {
        Some(Schedule::idle(vehicle, t_sim))
    } else {
        best_permutation(vehicle, own, book, router, t_sim, config)
    };
    let blocked = own_best.as_ref().is_none_or(|s| !s.feasible);
    if let Some(s) = own_best.clone() {
        push_unique(&mut out, s);
    }

    let (seed, pool): (BTreeSet<RequestId>, Vec<RequestId>) = if config.reassignment {
        let pool = if blocked {
            own.iter().copied().collect()
        } else {
            unassigned.iter().chain(assigned.iter()).copied().collect()
        };
        (BTreeSet::new(), pool)
    } else {
        let pool = if blocked { Vec::new() } else { unassigned.iter().copied().collect() };
        (own.clone(), pool)
    };

    // a request is only worth trying if the vehicle can reach its origin in time
    let pool: Vec<RequestId> = pool
        .into_iter()
        .filter(|r| {
            let info = &book[r];
            router.travel_time(vehicle.node, info.origin).is_ok_and(|tt| {
                vehicle.available_at + tt + config.boarding_time <= config.latest_pickup(info.request_time)
            })
        })
        .collect();

    let seed_feasible = if config.reassignment {
        // the vehicle may hand over every assigned request
        let base = if vehicle.onboard.is_empty() {
            Some(Schedule::idle(vehicle, t_sim))
        } else {
            best_permutation(vehicle, &BTreeSet::new(), book, router, t_sim, config)
        };
        let feasible = base.as_ref().is_some_and(|s| s.feasible);
        if let Some(s) = base {
            push_unique(&mut out, s);
        }
        feasible
    } else {
        !blocked
    };
    if !seed_feasible {
        return VehicleCandidates { schedules: out, cap_hits };
    }

    let mut visited: HashSet<BTreeSet<RequestId>> = HashSet::new();
    visited.insert(seed.clone());
    let mut level = vec![seed];
    while !level.is_empty() {
        let mut next = Vec::new();
        for set in &level {
            for &r in &pool {
                if set.contains(&r) {
                    continue;
                }
                let mut grown = set.clone();
                grown.insert(r);
                if !visited.insert(grown.clone()) {
                    continue;
                }
                if grown.len() + vehicle.onboard.len() > config.max_schedule_requests {
                    cap_hits += 1;
                    continue;
                }
                if let Some(s) = best_permutation(vehicle, &grown, book, router, t_sim, config) {
                    if s.feasible && keeps_promises(&s, caps) {
                        push_unique(&mut out, s);
                        next.push(grown);
                    }
                }
            }
        }
        level = next;
    }
    VehicleCandidates {
        schedules: out,
        cap_hits,
    }
}

/// Confirmed customers are never picked up later than both their
/// communicated time and their current plan because of added requests.
/// Dropping requests only moves pickups earlier, so this prunes like the
/// time constraints do.
fn keeps_promises(s: &Schedule, caps: &BTreeMap<RequestId, f64>) -> bool {
    s.pickups.iter().all(|(r, pu)| caps.get(r).is_none_or(|cap| pu <= cap))
}

/// The existing stop order of `vehicle`, re-timed from its current state.
fn current_schedule(vehicle: &VehicleState, book: &RequestBook, router: &Router, t_sim: f64, config: &OperatorConfig) -> Schedule {
    if vehicle.current_stops.is_empty() && vehicle.onboard.is_empty() {
        Schedule::idle(vehicle, t_sim)
    } else {
        simulate_schedule(vehicle, &vehicle.current_stops, book, router, t_sim, config)
    }
}

/// Builds the candidate set: every vehicle's current schedule (even if now
/// infeasible), plus feasible request combinations grown one request at a
/// time from feasible smaller ones. Without re-assignment, an assigned
/// request only appears in schedules of its current vehicle. A vehicle whose
/// commitments can no longer be met feasibly takes no new requests, and
/// added requests never push a confirmed pickup past both its communicated
/// time and its current plan.
pub fn build_candidates(
    vehicles: &[VehicleState],
    assigned: &BTreeSet<RequestId>,
    unassigned: &BTreeSet<RequestId>,
    book: &RequestBook,
    router: &Router,
    t_sim: f64,
    config: &OperatorConfig,
) -> AssignmentProblem {
    let mut sorted: Vec<&VehicleState> = vehicles.iter().collect();
    sorted.sort_by_key(|v| v.id);
    let current: Vec<Schedule> = sorted
        .par_iter()
        .map(|v| current_schedule(v, book, router, t_sim, config))
        .collect();
    let mut caps: BTreeMap<RequestId, f64> = BTreeMap::new();
    for r in assigned {
        if let Some(p) = book.get(r).and_then(|i| i.promised_pickup) {
            caps.insert(*r, p);
        }
    }
    for s in &current {
        for (r, pu) in &s.pickups {
            if assigned.contains(r) {
                let cap = caps.entry(*r).or_insert(*pu);
                *cap = cap.max(*pu);
            }
        }
    }
    let per_vehicle: Vec<VehicleCandidates> = sorted
        .par_iter()
        .zip(current)
        .map(|(v, cur)| vehicle_candidates(v, cur, &caps, assigned, unassigned, book, router, t_sim, config))
        .collect();

    let mut problem = AssignmentProblem {
        vehicles: sorted.iter().map(|v| v.id).collect(),
        assigned: assigned.clone(),
        unassigned: unassigned.clone(),
        ..Default::default()
    };
    for mut vc in per_vehicle {
        // stable: generation order breaks cost ties
        vc.schedules.sort_by(|a, b| a.cost.total_cmp(&b.cost));
        problem.schedules.extend(vc.schedules);
        problem.cap_hits += vc.cap_hits;
    }
    problem
}

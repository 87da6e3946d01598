use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::ids::{RequestId, VehicleId};

use super::candidates::AssignmentProblem;
use super::{OperatorConfig, OperatorError};

/// Optimal 0-1 choice of at most one schedule per vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Vehicle -> index into `AssignmentProblem::schedules`.
    pub chosen: BTreeMap<VehicleId, usize>,
    /// New requests left uncovered.
    pub rejected: BTreeSet<RequestId>,
    pub objective: f64,
}

struct Option_ {
    schedule: usize,
    cost: f64,
    /// Bitset over the component's requests.
    covers: Box<[u64]>,
}

/// One group of vehicles linked through shared requests.
struct Component {
    /// Per vehicle (in id order): its options in schedule-index order.
    options: Vec<Vec<Option_>>,
    /// `future[d]`: requests some vehicle at depth >= d can still cover.
    future: Vec<Box<[u64]>>,
    /// `due[d]`: assigned requests whose last coverer sits at depth d.
    due: Vec<Box<[u64]>>,
}

fn disjoint(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x & y == 0)
}

fn contains(set: &[u64], sub: &[u64]) -> bool {
    set.iter().zip(sub).all(|(x, y)| x & y == *y)
}

fn union(a: &[u64], b: &[u64]) -> Box<[u64]> {
    a.iter().zip(b).map(|(x, y)| x | y).collect()
}

fn restrict(a: &[u64], mask: &[u64]) -> Box<[u64]> {
    a.iter().zip(mask).map(|(x, y)| x & y).collect()
}

/// Memoized search over (depth, covered requests still reachable).
///
/// The best completion from depth d depends only on which still reachable
/// requests are taken, so each such state is solved once. Options are tried
/// in order and replaced only on strict improvement, which makes the
/// reconstructed choice the lexicographically smallest optimum.
struct Search<'a> {
    c: &'a Component,
    /// Per depth. Infinite cost marks a state from which some assigned
    /// request can no longer be covered.
    memo: Vec<Memo>,
}

/// Covered set -> (best completion cost, pick).
type Memo = HashMap<Box<[u64]>, (f64, Option<usize>)>;

impl Search<'_> {
    fn solve(&mut self, depth: usize, covered: Box<[u64]>) -> f64 {
        if depth == self.c.options.len() {
            return 0.0;
        }
        if let Some(&(v, _)) = self.memo[depth].get(&covered) {
            return v;
        }
        let c = self.c;
        let next = |set: &[u64]| -> Option<Box<[u64]>> {
            contains(set, &c.due[depth]).then(|| restrict(set, &c.future[depth + 1]))
        };
        let mut best = (f64::INFINITY, None);
        for (k, opt) in c.options[depth].iter().enumerate() {
            if !disjoint(&opt.covers, &covered) {
                continue;
            }
            let Some(state) = next(&union(&covered, &opt.covers)) else {
                continue;
            };
            let v = opt.cost + self.solve(depth + 1, state);
            if v < best.0 {
                best = (v, Some(k));
            }
        }
        if let Some(state) = next(&covered) {
            let v = self.solve(depth + 1, state);
            if v < best.0 {
                best = (v, None);
            }
        }
        self.memo[depth].insert(covered, best);
        best.0
    }

    /// Walks the memo from the root along the recorded picks.
    fn picks(&self, root: Box<[u64]>) -> Vec<Option<usize>> {
        let mut covered = root;
        let mut out = Vec::with_capacity(self.c.options.len());
        for depth in 0..self.c.options.len() {
            let pick = self.memo[depth][&covered].1;
            if let Some(k) = pick {
                covered = union(&covered, &self.c.options[depth][k].covers);
            }
            covered = restrict(&covered, &self.c.future[depth + 1]);
            out.push(pick);
        }
        out
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Exact optimum of the assignment program:
/// minimize the summed schedule cost with at most one schedule per vehicle,
/// every previously assigned request covered exactly once and every new
/// request at most once.
///
/// Vehicles linked through shared requests are solved together, independent
/// groups separately. Among optimal solutions the lexicographically smallest
/// (vehicle id, schedule index) choice wins, with "no schedule" ordered last.
pub fn solve_assignment(problem: &AssignmentProblem, _config: &OperatorConfig) -> Result<Assignment, OperatorError> {
    let mut vehicles = problem.vehicles.clone();
    vehicles.sort();
    vehicles.dedup();
    let vpos: BTreeMap<VehicleId, usize> = vehicles.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let all_requests: Vec<RequestId> = problem.assigned.union(&problem.unassigned).copied().collect();
    let rpos: BTreeMap<RequestId, usize> = all_requests.iter().enumerate().map(|(i, r)| (*r, i)).collect();

    let mut per_vehicle: Vec<Vec<usize>> = vec![Vec::new(); vehicles.len()];
    for (i, s) in problem.schedules.iter().enumerate() {
        let v = *vpos.get(&s.vehicle).ok_or_else(|| {
            OperatorError::InfeasibleProgram(format!("schedule {i} belongs to unknown vehicle {}", s.vehicle))
        })?;
        for r in &s.served {
            if !rpos.contains_key(r) {
                return Err(OperatorError::InfeasibleProgram(format!(
                    "schedule {i} covers request {r} outside the assigned and new sets"
                )));
            }
        }
        per_vehicle[v].push(i);
    }

    let mut parent: Vec<usize> = (0..vehicles.len()).collect();
    let mut first_cover: Vec<Option<usize>> = vec![None; all_requests.len()];
    for (v, scheds) in per_vehicle.iter().enumerate() {
        for &i in scheds {
            for r in &problem.schedules[i].served {
                let r = rpos[r];
                match first_cover[r] {
                    None => first_cover[r] = Some(v),
                    Some(w) => {
                        let (a, b) = (find(&mut parent, v), find(&mut parent, w));
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
    }
    for r in &problem.assigned {
        if first_cover[rpos[r]].is_none() {
            return Err(OperatorError::InfeasibleProgram(format!(
                "assigned request {r} has no candidate schedule"
            )));
        }
    }

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for v in 0..vehicles.len() {
        let root = find(&mut parent, v);
        groups.entry(root).or_default().push(v);
    }

    let mut chosen = BTreeMap::new();
    for members in groups.values() {
        let mut local: BTreeMap<usize, usize> = BTreeMap::new();
        for &v in members {
            for &i in &per_vehicle[v] {
                for r in &problem.schedules[i].served {
                    let n = local.len();
                    local.entry(rpos[r]).or_insert(n);
                }
            }
        }
        let words = local.len().div_ceil(64).max(1);
        let bits = |rs: &mut dyn Iterator<Item = usize>| -> Box<[u64]> {
            let mut b = vec![0u64; words];
            for r in rs {
                b[r / 64] |= 1 << (r % 64);
            }
            b.into()
        };
        let m = members.len();
        let mut last_cover = vec![0usize; local.len()];
        let options: Vec<Vec<Option_>> = members
            .iter()
            .enumerate()
            .map(|(depth, &v)| {
                per_vehicle[v]
                    .iter()
                    .map(|&i| {
                        let s = &problem.schedules[i];
                        let covers = bits(&mut s.served.iter().map(|r| local[&rpos[r]]));
                        for r in &s.served {
                            last_cover[local[&rpos[r]]] = depth;
                        }
                        Option_ {
                            schedule: i,
                            cost: s.cost,
                            covers,
                        }
                    })
                    .collect()
            })
            .collect();
        let future = (0..=m)
            .map(|d| bits(&mut (0..local.len()).filter(|&r| last_cover[r] >= d && d < m)))
            .collect();
        let due = (0..m)
            .map(|d| {
                bits(&mut local.iter().filter_map(|(&g, &r)| {
                    (problem.assigned.contains(&all_requests[g]) && last_cover[r] == d).then_some(r)
                }))
            })
            .collect();
        let comp = Component { options, future, due };
        let mut search = Search {
            c: &comp,
            memo: (0..m).map(|_| HashMap::new()).collect(),
        };
        let root = bits(&mut std::iter::empty());
        if search.solve(0, root.clone()) == f64::INFINITY {
            return Err(OperatorError::InfeasibleProgram(
                "no choice covers every assigned request".into(),
            ));
        }
        for (depth, pick) in search.picks(root).into_iter().enumerate() {
            if let Some(k) = pick {
                chosen.insert(vehicles[members[depth]], comp.options[depth][k].schedule);
            }
        }
    }

    let mut covered = BTreeSet::new();
    let mut objective = 0.0;
    for idx in chosen.values() {
        let s = &problem.schedules[*idx];
        objective += s.cost;
        covered.extend(s.served.iter().copied());
    }
    let rejected = problem.unassigned.difference(&covered).copied().collect();
    Ok(Assignment {
        chosen,
        rejected,
        objective,
    })
}

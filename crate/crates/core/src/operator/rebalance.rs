use std::collections::{BTreeMap, BTreeSet};

use crate::ids::{NodeId, VehicleId};
use crate::network::Router;

/// Greedy nearest matching of idle vehicles to rejection locations.
///
/// `rejection_nodes` is in rejection-time order; repeated nodes are used once.
/// Each node takes the closest unmatched vehicle by travel time, ties going to
/// the lower vehicle id. Vehicles that cannot reach a node are skipped for it.
pub fn rebalance(
    idle: &[(VehicleId, NodeId)],
    rejection_nodes: &[NodeId],
    router: &Router,
) -> BTreeMap<VehicleId, NodeId> {
    let mut free: Vec<(VehicleId, NodeId)> = idle.to_vec();
    free.sort_by_key(|(v, _)| *v);
    free.dedup_by_key(|(v, _)| *v);
    let mut used_nodes = BTreeSet::new();
    let mut out = BTreeMap::new();
    for &target in rejection_nodes {
        if free.is_empty() {
            break;
        }
        if !used_nodes.insert(target) {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, &(_, at)) in free.iter().enumerate() {
            let Ok(tt) = router.travel_time(at, target) else {
                continue;
            };
            if best.is_none_or(|(_, b)| tt < b) {
                best = Some((i, tt));
            }
        }
        if let Some((i, _)) = best {
            let (v, _) = free.remove(i);
            out.insert(v, target);
        }
    }
    out
}

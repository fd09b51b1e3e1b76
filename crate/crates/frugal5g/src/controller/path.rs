//! Hop-count shortest paths over the access-network graph, with the
//! deterministic tie rule: among equal-length paths the lexicographically
//! smallest node-id sequence wins.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::ids::NodeId;

use super::{AnGraph, ControllerError};

/// Shortest path from `from` to `to` by hop count.
pub fn compute_path(
    graph: &AnGraph,
    from: &NodeId,
    to: &NodeId,
) -> Result<Vec<NodeId>, ControllerError> {
    compute_path_filtered(graph, from, to, &BTreeSet::new())
}

/// Same, treating every node in `excluded` as absent (used to route around
/// sleeping middle-mile nodes). Endpoints are never excluded.
pub fn compute_path_filtered(
    graph: &AnGraph,
    from: &NodeId,
    to: &NodeId,
    excluded: &BTreeSet<NodeId>,
) -> Result<Vec<NodeId>, ControllerError> {
    if !graph.contains(from) || !graph.contains(to) {
        return Err(ControllerError::UnknownNode);
    }
    if from == to {
        return Ok(vec![from.clone()]);
    }
    let usable = |n: &NodeId| n == from || n == to || !excluded.contains(n);

    // distances towards the target, then a greedy min-id walk from the
    // source: always stepping to the smallest neighbour one hop closer
    // yields the lexicographically smallest shortest node sequence
    let mut dist: BTreeMap<NodeId, u32> = BTreeMap::new();
    dist.insert(to.clone(), 0);
    let mut queue = VecDeque::from([to.clone()]);
    while let Some(n) = queue.pop_front() {
        let d = dist[&n];
        for next in graph.neighbors(&n) {
            if usable(next) && !dist.contains_key(next) {
                dist.insert(next.clone(), d + 1);
                queue.push_back(next.clone());
            }
        }
    }
    let Some(&total) = dist.get(from) else {
        return Err(ControllerError::Disconnected);
    };

    let mut path = vec![from.clone()];
    let mut at = from.clone();
    for step in (0..total).rev() {
        let next = graph
            .neighbors(&at)
            .filter(|n| usable(n) && dist.get(*n) == Some(&step))
            .min()
            .expect("bfs distance guarantees a next hop")
            .clone();
        path.push(next.clone());
        at = next;
    }
    Ok(path)
}

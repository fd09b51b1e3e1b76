//! Sleep-set planning for low-traffic periods. Greedy: repeatedly put to
//! sleep the least-utilized WLAN AP or middle-mile node whose removal still
//! leaves (a) every associated UE reachable through some awake AP and
//! (b) every active flow placeable and routable with capacity to spare.
//! The macro cell and the PoP are never candidates.
//!
//! Feasibility is deterministic: flows are re-placed in flow-id order onto
//! fresh load ledgers using the same post-utilization rule as `select_rat`,
//! and each flow's shortest awake path must carry its demand on every link.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use crate::ids::{FlowId, NodeId};
use crate::wlan::{ApKind, PowerState};

use super::{compute_path_filtered, AnNodeKind, FlowDst, RanView};

/// Greedily chosen set of nodes that can sleep without breaking coverage or
/// routability. Always valid to return nothing.
pub fn energy_plan(view: &RanView, horizon_demand: &BTreeMap<FlowId, u64>) -> Vec<NodeId> {
    let candidates = ordered_candidates(view, horizon_demand);
    let mut slept: BTreeSet<NodeId> = BTreeSet::new();
    loop {
        let next = candidates.iter().find(|c| {
            !slept.contains(*c) && {
                let mut trial = slept.clone();
                trial.insert((*c).clone());
                sleep_set_feasible(view, horizon_demand, &trial)
            }
        });
        match next {
            Some(c) => {
                slept.insert(c.clone());
            }
            None => break,
        }
    }
    slept.into_iter().collect()
}

/// Awake WLAN APs and middle-mile nodes, least utilized first, node id as
/// the tie-break.
fn ordered_candidates(view: &RanView, horizon: &BTreeMap<FlowId, u64>) -> Vec<NodeId> {
    let mut cands: Vec<(u128, u128, NodeId)> = Vec::new();
    for (id, d) in &view.aps {
        if d.kind == ApKind::NativeWifi && d.power_state == PowerState::Awake {
            cands.push((
                d.current_load_bps as u128,
                d.capacity_bps.max(1) as u128,
                id.clone(),
            ));
        }
    }
    for id in view.graph.nodes_of_kind(AnNodeKind::MiddleMile) {
        if view.asleep.contains(id) {
            continue;
        }
        let through: u128 = view
            .flows
            .values()
            .filter(|f| f.path.as_ref().is_some_and(|p| p.contains(id)))
            .map(|f| effective_demand(f.demand_bps, &f.flow_id, horizon) as u128)
            .sum();
        let capacity: u128 = view
            .graph
            .neighbors(id)
            .filter_map(|n| view.graph.link_capacity(id, n))
            .map(|c| c as u128)
            .sum();
        cands.push((through, capacity.max(1), id.clone()));
    }
    cands.sort_by(|(an, ad, aid), (bn, bd, bid)| (an * bd).cmp(&(bn * ad)).then(aid.cmp(bid)));
    cands.into_iter().map(|(_, _, id)| id).collect()
}

fn effective_demand(base: u64, flow: &FlowId, horizon: &BTreeMap<FlowId, u64>) -> u64 {
    horizon.get(flow).copied().unwrap_or(base)
}

/// Both constraints for a hypothetical sleep set.
pub fn sleep_set_feasible(
    view: &RanView,
    horizon: &BTreeMap<FlowId, u64>,
    slept: &BTreeSet<NodeId>,
) -> bool {
    coverage_holds(view, slept) && flows_routable(view, horizon, slept)
}

/// (a) every associated UE keeps at least one awake, unslept, reachable AP.
fn coverage_holds(view: &RanView, slept: &BTreeSet<NodeId>) -> bool {
    view.associations
        .keys()
        .all(|ue| view.usable_aps(ue).any(|d| !slept.contains(&d.ap_id)))
}

/// (b) every flow can be re-placed and routed with capacity once the sleep
/// set is applied.
fn flows_routable(
    view: &RanView,
    horizon: &BTreeMap<FlowId, u64>,
    slept: &BTreeSet<NodeId>,
) -> bool {
    let mut ap_load: BTreeMap<NodeId, u64> = BTreeMap::new();
    let mut link_load: BTreeMap<(NodeId, NodeId), u64> = BTreeMap::new();
    let mut excluded: BTreeSet<NodeId> = view.asleep.clone();
    excluded.extend(slept.iter().cloned());

    for flow in view.flows.values() {
        let demand = effective_demand(flow.demand_bps, &flow.flow_id, horizon);
        let chosen = view
            .usable_aps(&flow.ue)
            .filter(|d| !slept.contains(&d.ap_id))
            .filter(|d| ap_load.get(&d.ap_id).copied().unwrap_or(0) + demand <= d.capacity_bps)
            .min_by(|a, b| {
                let la = ap_load.get(&a.ap_id).copied().unwrap_or(0) + demand;
                let lb = ap_load.get(&b.ap_id).copied().unwrap_or(0) + demand;
                (la as u128 * b.capacity_bps as u128)
                    .cmp(&(lb as u128 * a.capacity_bps as u128))
                    .then(kind_order(a.kind, b.kind))
                    .then(a.ap_id.cmp(&b.ap_id))
            })
            .map(|d| d.ap_id.clone());
        let Some(ap) = chosen else {
            return false;
        };

        let target = match &flow.dst {
            FlowDst::External => match view.graph.pop() {
                Some(pop) => pop.clone(),
                None => return false,
            },
            FlowDst::Ue(peer) => match anchor_ap(view, peer, slept) {
                Some(a) => a,
                None => return false,
            },
        };
        let Ok(path) = compute_path_filtered(&view.graph, &ap, &target, &excluded) else {
            return false;
        };
        for pair in path.windows(2) {
            let key = ordered(&pair[0], &pair[1]);
            let cap = view.graph.link_capacity(&pair[0], &pair[1]).unwrap_or(0);
            let used = link_load.get(&key).copied().unwrap_or(0);
            if used + demand > cap {
                return false;
            }
            link_load.insert(key, used + demand);
        }
        *ap_load.entry(ap).or_insert(0) += demand;
    }
    true
}

/// AP that would serve the peer of a local flow under this sleep set: its
/// current AP when still usable, otherwise its smallest usable AP.
fn anchor_ap(view: &RanView, peer: &NodeId, slept: &BTreeSet<NodeId>) -> Option<NodeId> {
    if let Some(current) = view.associations.get(peer) {
        let usable = view
            .aps
            .get(current)
            .is_some_and(|d| d.power_state == PowerState::Awake && !slept.contains(current));
        if usable {
            return Some(current.clone());
        }
    }
    view.usable_aps(peer)
        .filter(|d| !slept.contains(&d.ap_id))
        .map(|d| d.ap_id.clone())
        .min()
}

fn kind_order(a: ApKind, b: ApKind) -> Ordering {
    let rank = |k: ApKind| match k {
        ApKind::NativeWifi => 0u8,
        ApKind::LteEmulated => 1,
    };
    rank(a).cmp(&rank(b))
}

fn ordered(a: &NodeId, b: &NodeId) -> (NodeId, NodeId) {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::{ingest_report, AnGraph, FlowSpec, RscfReport};
    use crate::frames::MacAddress;
    use crate::lte::ServiceClass;
    use crate::wlan::ApDescriptor;

    /// pop - macro (carpet); pop - mm1 - wlan1, mm1 - wlan2.
    fn carpet_view(ue_under_macro: bool) -> RanView {
        let mut g = AnGraph::new();
        g.add_node(NodeId::from("pop"), AnNodeKind::Pop);
        g.add_node(NodeId::from("macro"), AnNodeKind::MacroEnb);
        g.add_node(NodeId::from("mm1"), AnNodeKind::MiddleMile);
        g.add_node(NodeId::from("wlan1"), AnNodeKind::WlanAp);
        g.add_node(NodeId::from("wlan2"), AnNodeKind::WlanAp);
        g.add_link(NodeId::from("pop"), NodeId::from("macro"), 1_000_000_000);
        g.add_link(NodeId::from("pop"), NodeId::from("mm1"), 100_000_000);
        g.add_link(NodeId::from("mm1"), NodeId::from("wlan1"), 100_000_000);
        g.add_link(NodeId::from("mm1"), NodeId::from("wlan2"), 100_000_000);
        let mut view = RanView::new(g);
        for (id, kind) in [
            ("macro", ApKind::LteEmulated),
            ("wlan1", ApKind::NativeWifi),
            ("wlan2", ApKind::NativeWifi),
        ] {
            let mut reachable: BTreeSet<NodeId> = BTreeSet::new();
            if id == "wlan1" || ue_under_macro {
                reachable.insert(NodeId::from("ue1"));
            }
            view = ingest_report(
                &view,
                &RscfReport {
                    at_us: 0,
                    descriptor: ApDescriptor {
                        ap_id: NodeId::from(id),
                        bssid: MacAddress::local(1),
                        ssid: "frugal5g".into(),
                        kind,
                        capacity_bps: 10_000_000,
                        current_load_bps: 0,
                        station_count: 0,
                        power_state: PowerState::Awake,
                    },
                    stations: vec![],
                    reachable_ues: reachable,
                },
            )
            .unwrap();
        }
        view.associations
            .insert(NodeId::from("ue1"), NodeId::from("wlan1"));
        view
    }

    #[test]
    fn zero_traffic_under_carpet_coverage_sleeps_everything_sleepable() {
        let view = carpet_view(true);
        let plan = energy_plan(&view, &BTreeMap::new());
        // wlan1, wlan2 and mm1 all sleep; the macro keeps the ue covered
        let expected: BTreeSet<NodeId> = ["mm1", "wlan1", "wlan2"].map(NodeId::from).into();
        assert_eq!(plan.into_iter().collect::<BTreeSet<_>>(), expected);
    }

    #[test]
    fn sole_covering_ap_never_sleeps() {
        // ue1 is reachable only via wlan1
        let view = carpet_view(false);
        let plan = energy_plan(&view, &BTreeMap::new());
        assert!(!plan.contains(&NodeId::from("wlan1")));
        // the middle mile feeding it must stay awake too once a flow runs
        assert!(plan.contains(&NodeId::from("wlan2")));
    }

    #[test]
    fn active_flow_keeps_its_backhaul_awake() {
        let mut view = carpet_view(false);
        view.flows.insert(
            FlowId::from("f1"),
            FlowSpec {
                flow_id: FlowId::from("f1"),
                ue: NodeId::from("ue1"),
                dst: FlowDst::External,
                service_class: ServiceClass::Background,
                demand_bps: 1_000_000,
                assigned_ap: Some(NodeId::from("wlan1")),
                path: Some(["wlan1", "mm1", "pop"].map(NodeId::from).to_vec()),
            },
        );
        let plan = energy_plan(&view, &BTreeMap::new());
        assert_eq!(plan, vec![NodeId::from("wlan2")]);
    }

    #[test]
    fn horizon_demand_overrides_flow_demand() {
        let mut view = carpet_view(true);
        view.flows.insert(
            FlowId::from("f1"),
            FlowSpec {
                flow_id: FlowId::from("f1"),
                ue: NodeId::from("ue1"),
                dst: FlowDst::External,
                service_class: ServiceClass::Background,
                demand_bps: 20_000_000,
                assigned_ap: Some(NodeId::from("wlan1")),
                path: Some(["wlan1", "mm1", "pop"].map(NodeId::from).to_vec()),
            },
        );
        // taken at face value the flow fits nowhere, so nothing may sleep
        assert!(energy_plan(&view, &BTreeMap::new()).is_empty());
        // the horizon says it will shrink to 1 Mbit/s, which the macro can
        // absorb, so the whole wlan side may sleep
        let horizon: BTreeMap<FlowId, u64> = [(FlowId::from("f1"), 1_000_000)].into();
        let plan = energy_plan(&view, &horizon);
        let expected: BTreeSet<NodeId> = ["mm1", "wlan1", "wlan2"].map(NodeId::from).into();
        assert_eq!(plan.into_iter().collect::<BTreeSet<_>>(), expected);
    }
}

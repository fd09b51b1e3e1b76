//! The layered SDN controller in the fog. RSCF reports feed a RAT-agnostic
//! [`RanView`]; every decision here is a pure function of (view, request),
//! so replaying the same view yields identical decisions.

pub mod energy;
pub mod path;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

pub use energy::energy_plan;
pub use path::{compute_path, compute_path_filtered};

use crate::digest::fnv1a_str;
use crate::ids::{FlowId, NodeId};
use crate::lte::ServiceClass;
use crate::wlan::{ApDescriptor, ApKind, PowerState};

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum ControllerError {
    #[error("report is older than the last one for this ap")]
    StaleReport,
    #[error("no reachable awake ap has spare capacity for the demand")]
    NoCapacity,
    #[error("target ap is asleep or not reachable")]
    Unreachable,
    #[error("no path through the awake topology")]
    Disconnected,
    #[error("ue is not associated anywhere")]
    NotAssociated,
    #[error("node is not part of the topology")]
    UnknownNode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AnNodeKind {
    Pop,
    MacroEnb,
    MiddleMile,
    WlanAp,
}

/// Access-network graph: the PoP, the macro eNB, middle-mile nodes and WLAN
/// APs with their wired/wireless backhaul links. Core and gateway nodes are
/// deliberately not part of it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnGraph {
    kinds: BTreeMap<NodeId, AnNodeKind>,
    adjacency: BTreeMap<NodeId, BTreeSet<NodeId>>,
    capacities: BTreeMap<(NodeId, NodeId), u64>,
}

impl AnGraph {
    pub fn new() -> AnGraph {
        AnGraph::default()
    }

    pub fn add_node(&mut self, id: NodeId, kind: AnNodeKind) {
        self.kinds.insert(id.clone(), kind);
        self.adjacency.entry(id).or_default();
    }

    pub fn add_link(&mut self, a: NodeId, b: NodeId, capacity_bps: u64) {
        self.adjacency
            .entry(a.clone())
            .or_default()
            .insert(b.clone());
        self.adjacency
            .entry(b.clone())
            .or_default()
            .insert(a.clone());
        self.capacities.insert(link_key(&a, &b), capacity_bps);
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.kinds.contains_key(id)
    }

    pub fn kind(&self, id: &NodeId) -> Option<AnNodeKind> {
        self.kinds.get(id).copied()
    }

    pub fn neighbors(&self, id: &NodeId) -> impl Iterator<Item = &NodeId> {
        self.adjacency.get(id).into_iter().flatten()
    }

    pub fn link_capacity(&self, a: &NodeId, b: &NodeId) -> Option<u64> {
        self.capacities.get(&link_key(a, b)).copied()
    }

    pub fn nodes_of_kind(&self, kind: AnNodeKind) -> impl Iterator<Item = &NodeId> {
        self.kinds
            .iter()
            .filter(move |(_, k)| **k == kind)
            .map(|(id, _)| id)
    }

    /// The fiber point of presence (scenario validation enforces exactly one).
    pub fn pop(&self) -> Option<&NodeId> {
        self.nodes_of_kind(AnNodeKind::Pop).next()
    }
}

fn link_key(a: &NodeId, b: &NodeId) -> (NodeId, NodeId) {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

/// Where a flow terminates, as far as routing is concerned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FlowDst {
    /// Leaves the AN at the PoP (core or broadband gateway).
    External,
    /// Local communication to another UE in the AN.
    Ue(NodeId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowSpec {
    pub flow_id: FlowId,
    pub ue: NodeId,
    pub dst: FlowDst,
    pub service_class: ServiceClass,
    pub demand_bps: u64,
    pub assigned_ap: Option<NodeId>,
    pub path: Option<Vec<NodeId>>,
}

/// One RSCF report: the abstract view of a single AP plus what it can see.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RscfReport {
    pub at_us: u64,
    pub descriptor: ApDescriptor,
    pub stations: Vec<NodeId>,
    pub reachable_ues: BTreeSet<NodeId>,
}

/// The unified picture the RAT-agnostic functions decide on.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RanView {
    pub aps: BTreeMap<NodeId, ApDescriptor>,
    pub reachability: BTreeMap<NodeId, BTreeSet<NodeId>>,
    pub associations: BTreeMap<NodeId, NodeId>,
    pub flows: BTreeMap<FlowId, FlowSpec>,
    pub graph: AnGraph,
    /// Middle-mile nodes currently asleep (APs carry their own power state).
    pub asleep: BTreeSet<NodeId>,
    last_report_at: BTreeMap<NodeId, u64>,
}

impl RanView {
    pub fn new(graph: AnGraph) -> RanView {
        RanView {
            graph,
            ..RanView::default()
        }
    }

    /// Stable digest of everything a decision depends on; logged with each
    /// decision record so runs can be audited for view-only behaviour.
    pub fn digest(&self) -> u64 {
        let mut s = String::new();
        for (id, d) in &self.aps {
            let _ = write!(
                s,
                "ap {id} {} {} {} {} {};",
                d.kind.name(),
                d.capacity_bps,
                d.current_load_bps,
                d.station_count,
                if d.power_state == PowerState::Awake {
                    "awake"
                } else {
                    "asleep"
                },
            );
        }
        for (ue, aps) in &self.reachability {
            let _ = write!(s, "reach {ue}:");
            for ap in aps {
                let _ = write!(s, " {ap}");
            }
            s.push(';');
        }
        for (ue, ap) in &self.associations {
            let _ = write!(s, "assoc {ue} {ap};");
        }
        for (id, f) in &self.flows {
            let dst = match &f.dst {
                FlowDst::External => "external".to_string(),
                FlowDst::Ue(u) => u.to_string(),
            };
            let _ = write!(
                s,
                "flow {id} {} {dst} {} {};",
                f.ue,
                f.demand_bps,
                f.assigned_ap.as_ref().map_or("-", |a| a.as_str()),
            );
        }
        for n in &self.asleep {
            let _ = write!(s, "asleep {n};");
        }
        fnv1a_str(&s)
    }

    fn spare(&self, ap: &ApDescriptor) -> u64 {
        ap.capacity_bps.saturating_sub(ap.current_load_bps)
    }

    /// APs currently able to serve this UE: reachable and awake.
    pub fn usable_aps<'a>(&'a self, ue: &NodeId) -> impl Iterator<Item = &'a ApDescriptor> {
        self.reachability
            .get(ue)
            .into_iter()
            .flatten()
            .filter_map(|ap| self.aps.get(ap))
            .filter(|d| d.power_state == PowerState::Awake)
    }
}

/// Merge one RSCF report into the view. Reports older than the last one for
/// the same AP are rejected and the view is returned unchanged.
pub fn ingest_report(view: &RanView, report: &RscfReport) -> Result<RanView, ControllerError> {
    let ap_id = report.descriptor.ap_id.clone();
    if view
        .last_report_at
        .get(&ap_id)
        .is_some_and(|&last| report.at_us < last)
    {
        return Err(ControllerError::StaleReport);
    }
    let mut next = view.clone();
    next.last_report_at.insert(ap_id.clone(), report.at_us);
    next.aps.insert(ap_id.clone(), report.descriptor.clone());
    for (ue, aps) in next.reachability.iter_mut() {
        if report.reachable_ues.contains(ue) {
            aps.insert(ap_id.clone());
        } else {
            aps.remove(&ap_id);
        }
    }
    for ue in &report.reachable_ues {
        next.reachability
            .entry(ue.clone())
            .or_default()
            .insert(ap_id.clone());
    }
    next.associations
        .retain(|ue, ap| *ap != ap_id || report.stations.contains(ue));
    for ue in &report.stations {
        next.associations.insert(ue.clone(), ap_id.clone());
    }
    Ok(next)
}

fn kind_rank(kind: ApKind) -> u8 {
    match kind {
        ApKind::NativeWifi => 0,
        ApKind::LteEmulated => 1,
    }
}

/// Exact comparison of post-assignment utilization `(load + demand) /
/// capacity`, then the tie order: WLAN before the macro cell, then the
/// smaller ap id.
pub fn cmp_post_utilization(
    a: &ApDescriptor,
    b: &ApDescriptor,
    demand_bps: u64,
) -> std::cmp::Ordering {
    let ua = (a.current_load_bps + demand_bps) as u128 * b.capacity_bps as u128;
    let ub = (b.current_load_bps + demand_bps) as u128 * a.capacity_bps as u128;
    ua.cmp(&ub)
        .then(kind_rank(a.kind).cmp(&kind_rank(b.kind)))
        .then(a.ap_id.cmp(&b.ap_id))
}

/// Place a flow: among the reachable awake APs with spare capacity for the
/// demand, pick the one with minimal post-assignment utilization.
pub fn select_rat(view: &RanView, flow: &FlowSpec) -> Result<NodeId, ControllerError> {
    view.usable_aps(&flow.ue)
        .filter(|d| view.spare(d) >= flow.demand_bps)
        .min_by(|a, b| cmp_post_utilization(a, b, flow.demand_bps))
        .map(|d| d.ap_id.clone())
        .ok_or(ControllerError::NoCapacity)
}

/// Ordered steps to move a UE between APs, make-before-break: associate on
/// the target, re-route every flow, only then deauthenticate on the source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HandoverAction {
    AssociateOn(NodeId),
    Reroute { flow: FlowId, path: Vec<NodeId> },
    DeauthFrom(NodeId),
}

pub fn handover(
    view: &RanView,
    ue: &NodeId,
    to_ap: &NodeId,
) -> Result<Vec<HandoverAction>, ControllerError> {
    let current = view.associations.get(ue);
    if current == Some(to_ap) {
        return Ok(vec![]);
    }
    let target = view.aps.get(to_ap).ok_or(ControllerError::Unreachable)?;
    let reachable = view
        .reachability
        .get(ue)
        .is_some_and(|aps| aps.contains(to_ap));
    if target.power_state == PowerState::Asleep || !reachable {
        return Err(ControllerError::Unreachable);
    }
    let ue_flows: Vec<&FlowSpec> = view.flows.values().filter(|f| &f.ue == ue).collect();
    let total_demand: u64 = ue_flows.iter().map(|f| f.demand_bps).sum();
    if view.spare(target) < total_demand {
        return Err(ControllerError::NoCapacity);
    }
    let mut actions = vec![HandoverAction::AssociateOn(to_ap.clone())];
    for flow in ue_flows {
        actions.push(HandoverAction::Reroute {
            flow: flow.flow_id.clone(),
            path: route_for(view, to_ap, &flow.dst)?,
        });
    }
    if let Some(cur) = current {
        actions.push(HandoverAction::DeauthFrom(cur.clone()));
    }
    Ok(actions)
}

/// Infrastructure path a flow takes from its serving AP, avoiding sleeping
/// middle-mile nodes.
pub fn route_for(
    view: &RanView,
    from_ap: &NodeId,
    dst: &FlowDst,
) -> Result<Vec<NodeId>, ControllerError> {
    let target = match dst {
        FlowDst::External => view
            .graph
            .pop()
            .ok_or(ControllerError::UnknownNode)?
            .clone(),
        FlowDst::Ue(peer) => view
            .associations
            .get(peer)
            .ok_or(ControllerError::NotAssociated)?
            .clone(),
    };
    compute_path_filtered(&view.graph, from_ap, &target, &view.asleep)
}

/// Data path for local UE-to-UE communication: UE, its AP, the middle mile
/// if the peers sit under different APs, the peer's AP, peer UE. Never
/// leaves the AN.
pub fn setup_local_path(
    view: &RanView,
    ue_a: &NodeId,
    ue_b: &NodeId,
) -> Result<Vec<NodeId>, ControllerError> {
    let ap_a = view
        .associations
        .get(ue_a)
        .ok_or(ControllerError::NotAssociated)?;
    let ap_b = view
        .associations
        .get(ue_b)
        .ok_or(ControllerError::NotAssociated)?;
    let mut path = vec![ue_a.clone()];
    path.extend(compute_path_filtered(
        &view.graph,
        ap_a,
        ap_b,
        &view.asleep,
    )?);
    path.push(ue_b.clone());
    Ok(path)
}

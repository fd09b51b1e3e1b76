//! The simulated network: every node instance, the event dispatch loop, the
//! forwarding plane, and the glue that executes the pure state machines'
//! actions. Single-threaded by contract; all collections are ordered, so a
//! (scenario, seed) pair fully determines the trace.
//!
//! Radio range gates association establishment and controller decisions;
//! PDUs already accepted by a bearer are delivered regardless of later
//! movement, which is what makes make-before-break handover lossless.

use std::collections::{BTreeMap, BTreeSet};

use crate::controller::{
    self, AnGraph, AnNodeKind, ControllerError, FlowDst, FlowSpec, HandoverAction, RanView,
    RscfReport,
};
use crate::digest::{fnv1a, fnv1a_str};
use crate::emu::EnbEmuContext;
use crate::emu::{
    detect_mode, EmuAction, EmuNotice, EnbEmuEvent, TimerKind, UeEmuEvent, UeEmuState, UeMode,
    UePhase,
};
use crate::frames::{decode_frame, encode_frame, BeaconBody, FrameType, MacAddress, MacFrame};
use crate::ids::{FlowId, NodeId};
use crate::interworking::{
    authenticate, forward_uplink, sync_cn, AuthMsg, AuthSession, AuthState, ForwardTarget,
    NetworkMode, PeerState, UeSummary, UplinkDst,
};
use crate::lte::{Direction, LteCell, RadioEmit, RrcMessage};
use crate::sim::engine::EventQueue;
use crate::sim::metrics::MetricsReport;
use crate::sim::rng::SplitMix64;
use crate::sim::scenario::{NodeKind, Scenario, TrafficDst, TrafficSpec};
use crate::sim::trace::{Trace, TraceKind};
use crate::sim::traffic::arrival_times;
use crate::wlan::{
    AbstractAp, ApEffect, EmulatedCellAp, NativeAp, NativeSta, PowerState, StaNotice, StaPhase,
};

/// One user packet moving through the wired part of the network.
#[derive(Debug, Clone)]
struct Packet {
    flow: FlowId,
    pkt_seq: u32,
    sent_at_us: u64,
    bytes: Vec<u8>,
    /// Infrastructure nodes from the serving AP to the final node.
    path: Vec<NodeId>,
    hop: usize,
}

#[derive(Debug, Clone)]
enum Ev {
    RrcAtEnb {
        ue: NodeId,
        msg: RrcMessage,
    },
    RrcAtUe {
        ue: NodeId,
        msg: RrcMessage,
    },
    DrbAtEnb {
        ue: NodeId,
        drb_id: u8,
        bytes: Vec<u8>,
    },
    DrbAtUe {
        ue: NodeId,
        drb_id: u8,
        bytes: Vec<u8>,
    },
    MrbAtUe {
        ue: NodeId,
        bytes: Vec<u8>,
    },
    MrbControl,
    BeaconSlot,
    NativeBeacon {
        ap: NodeId,
        gen: u64,
    },
    WifiAtAp {
        ap: NodeId,
        ue: NodeId,
        frame: MacFrame,
    },
    WifiAtUe {
        ap: NodeId,
        ue: NodeId,
        frame: MacFrame,
    },
    BeaconTimeout {
        ue: NodeId,
        gen: u64,
    },
    UeSleep {
        ue: NodeId,
    },
    UeWake {
        ue: NodeId,
    },
    UeMove {
        ue: NodeId,
        x: f64,
        y: f64,
    },
    AppArrival {
        flow: FlowId,
        pkt_seq: u32,
    },
    HopArrive {
        node: NodeId,
        pkt: Packet,
    },
    AuthArrive {
        ue: NodeId,
        msg: AuthMsg,
    },
    /// Deferred break half of make-before-break: runs after the drain grace.
    DeauthAt {
        ap: NodeId,
        ue: NodeId,
    },
    RscfTick,
    ControllerTick,
    SyncTick,
    Revoke {
        ue: NodeId,
    },
}

/// Grace between re-routing a handed-over flow and deauthenticating on the
/// old AP, long enough for in-flight PDUs on the old leg to drain.
const HANDOVER_DRAIN_US: u64 = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Serving {
    Lte,
    Wifi,
}

#[derive(Debug, Clone)]
struct PendingHandover {
    to_ap: NodeId,
    reroutes: Vec<(FlowId, Vec<NodeId>)>,
    deauth_from: Option<NodeId>,
}

#[derive(Debug)]
struct UeRt {
    id: NodeId,
    mac: MacAddress,
    pos: (f64, f64),
    credential: String,
    emu: UeEmuState,
    nsta: NativeSta,
    wifi_ap: Option<NodeId>,
    mode: Option<UeMode>,
    beacon_log: Vec<u64>,
    serving: Option<Serving>,
    timer_gen: u64,
    pending_handover: Option<PendingHandover>,
    /// Native AP this UE should attach to next (handover target).
    wifi_target: Option<NodeId>,
}

#[derive(Debug)]
struct EnbRt {
    id: NodeId,
    ap: EmulatedCellAp,
    pos: (f64, f64),
    range: f64,
}

#[derive(Debug)]
struct ApRt {
    ap: NativeAp,
    pos: (f64, f64),
    range: f64,
    beacon_period_us: u64,
    beacon_gen: u64,
}

#[derive(Debug)]
struct MmRt {
    awake: bool,
}

#[derive(Debug)]
struct FlowRt {
    spec: TrafficSpec,
    assigned_ap: Option<NodeId>,
    infra_path: Option<Vec<NodeId>>,
    ap_changes: u64,
}

#[derive(Debug)]
struct LinkRt {
    model: crate::lte::LinkModel,
}

pub struct World {
    scenario: Scenario,
    now_us: u64,
    queue: EventQueue<Ev>,
    trace: Trace,
    metrics: MetricsReport,
    ues: BTreeMap<NodeId, UeRt>,
    enb: Option<EnbRt>,
    aps: BTreeMap<NodeId, ApRt>,
    mm: BTreeMap<NodeId, MmRt>,
    links: BTreeMap<(NodeId, NodeId), LinkRt>,
    view: RanView,
    sessions: BTreeMap<NodeId, AuthSession>,
    cn_state: PeerState,
    sync_epoch: u64,
    pop: NodeId,
    external: Option<NodeId>,
    asleep_since: BTreeMap<NodeId, u64>,
    flows: BTreeMap<FlowId, FlowRt>,
    ctrl_digest: u64,
}

impl World {
    pub fn new(scenario: Scenario) -> World {
        let pop = scenario
            .nodes_of_kind(NodeKind::Pop)
            .next()
            .expect("validated: one pop")
            .id
            .clone();
        let external = scenario
            .nodes_of_kind(NodeKind::Cn)
            .chain(scenario.nodes_of_kind(NodeKind::Gateway))
            .next()
            .map(|n| n.id.clone());

        let mut graph = AnGraph::new();
        for n in scenario.nodes.values() {
            let kind = match n.kind {
                NodeKind::Pop => AnNodeKind::Pop,
                NodeKind::MacroEnb => AnNodeKind::MacroEnb,
                NodeKind::MiddleMile => AnNodeKind::MiddleMile,
                NodeKind::WlanAp => AnNodeKind::WlanAp,
                _ => continue,
            };
            graph.add_node(n.id.clone(), kind);
        }
        for l in &scenario.links {
            if graph.contains(&l.a) && graph.contains(&l.b) {
                graph.add_link(l.a.clone(), l.b.clone(), l.capacity_bps);
            }
        }

        let mut mac_index = 1u32;
        let mut take_mac = || {
            let m = MacAddress::local(mac_index);
            mac_index += 1;
            m
        };

        let enb = scenario.nodes_of_kind(NodeKind::MacroEnb).next().map(|n| {
            let bssid = take_mac();
            let cell = LteCell::new(n.capacity_bps, n.radio_latency_us);
            let ctx = EnbEmuContext::new(bssid, &n.ssid, scenario.radio.beacon_interval_tu);
            EnbRt {
                id: n.id.clone(),
                ap: EmulatedCellAp::new(n.id.clone(), cell, ctx, scenario.policy.load_window_us),
                pos: n.pos,
                range: n.range,
            }
        });

        let mut aps = BTreeMap::new();
        for n in scenario.nodes_of_kind(NodeKind::WlanAp) {
            let bssid = take_mac();
            aps.insert(
                n.id.clone(),
                ApRt {
                    ap: NativeAp::new(
                        n.id.clone(),
                        bssid,
                        &n.ssid,
                        n.capacity_bps,
                        n.radio_latency_us,
                        scenario.radio.beacon_interval_tu,
                        scenario.policy.load_window_us,
                    ),
                    pos: n.pos,
                    range: n.range,
                    beacon_period_us: scenario.radio.beacon_period_us(),
                    beacon_gen: 0,
                },
            );
        }

        let mut ues = BTreeMap::new();
        for n in scenario.nodes_of_kind(NodeKind::Ue) {
            let mac = take_mac();
            ues.insert(
                n.id.clone(),
                UeRt {
                    id: n.id.clone(),
                    mac,
                    pos: n.pos,
                    credential: n.credential.clone().unwrap_or_default(),
                    emu: UeEmuState::new(mac, &n.ssid, scenario.radio.beacon_timeout_us()),
                    nsta: NativeSta::new(mac, &n.ssid),
                    wifi_ap: None,
                    mode: None,
                    beacon_log: Vec::new(),
                    serving: None,
                    timer_gen: 0,
                    pending_handover: None,
                    wifi_target: None,
                },
            );
        }

        let mm = scenario
            .nodes_of_kind(NodeKind::MiddleMile)
            .map(|n| (n.id.clone(), MmRt { awake: true }))
            .collect();

        let links = scenario
            .links
            .iter()
            .map(|l| {
                (
                    ordered_pair(&l.a, &l.b),
                    LinkRt {
                        model: crate::lte::LinkModel::new(l.capacity_bps, l.latency_us),
                    },
                )
            })
            .collect();

        // the CN's initial picture: every registered UE is subscribed
        let mut cn_state = PeerState::default();
        for ue in scenario.registry.ues() {
            cn_state.ues.insert(
                ue.clone(),
                UeSummary {
                    subscribed: true,
                    auth: AuthState::Idle,
                    serving_ap: None,
                    nas_marker: scenario.mode == NetworkMode::FiveGCore,
                },
            );
        }

        let flows = scenario
            .flows
            .iter()
            .map(|spec| {
                (
                    spec.flow_id.clone(),
                    FlowRt {
                        spec: spec.clone(),
                        assigned_ap: None,
                        infra_path: None,
                        ap_changes: 0,
                    },
                )
            })
            .collect();

        World {
            view: RanView::new(graph),
            scenario,
            now_us: 0,
            queue: EventQueue::new(),
            trace: Trace::new(),
            metrics: MetricsReport::default(),
            ues,
            enb,
            aps,
            mm,
            links,
            sessions: BTreeMap::new(),
            cn_state,
            sync_epoch: 0,
            pop,
            external,
            asleep_since: BTreeMap::new(),
            flows,
            ctrl_digest: 0,
        }
    }

    /// Run to the end of the scenario and hand back trace and metrics.
    pub fn run(mut self) -> (Trace, MetricsReport) {
        self.schedule_initial();
        let duration = self.scenario.duration_us;
        while let Some(ev) = self.queue.pop() {
            if ev.at_us > duration {
                break;
            }
            debug_assert!(ev.at_us >= self.now_us, "event scheduled in the past");
            self.now_us = ev.at_us;
            self.handle(ev.payload);
        }
        self.now_us = duration;
        self.finish_metrics();
        (self.trace, self.metrics)
    }

    fn schedule_initial(&mut self) {
        if self.enb.is_some() && self.scenario.radio.mrb_enabled {
            self.queue.push(0, Ev::MrbControl);
            if let Some(enb) = &mut self.enb {
                enb.ap.cell.setup_mrb(
                    0,
                    self.scenario.radio.mcch_period_us,
                    self.scenario.radio.beacon_period_us(),
                );
            }
        }
        let ap_ids: Vec<NodeId> = self.aps.keys().cloned().collect();
        for ap in ap_ids {
            let offset = self
                .scenario
                .node(&ap)
                .map(|n| n.beacon_offset_us)
                .unwrap_or(0);
            self.queue.push(offset, Ev::NativeBeacon { ap, gen: 0 });
        }
        let ue_ids: Vec<NodeId> = self.ues.keys().cloned().collect();
        for ue_id in ue_ids {
            let boot = self.ues[&ue_id].emu.boot();
            self.run_ue_actions(&ue_id, boot);
            let node = self.scenario.node(&ue_id).cloned().expect("ue exists");
            for (at, (x, y)) in node.moves {
                self.queue.push(
                    at,
                    Ev::UeMove {
                        ue: ue_id.clone(),
                        x,
                        y,
                    },
                );
            }
            if let Some(at) = node.sleep_at_us {
                self.queue.push(at, Ev::UeSleep { ue: ue_id.clone() });
            }
            if let Some(at) = node.wake_at_us {
                self.queue.push(at, Ev::UeWake { ue: ue_id.clone() });
            }
        }
        let specs: Vec<TrafficSpec> = self.scenario.flows.clone();
        let rng = SplitMix64::new(self.scenario.seed);
        for spec in specs {
            for (i, at) in arrival_times(&spec, &rng).into_iter().enumerate() {
                self.queue.push(
                    at,
                    Ev::AppArrival {
                        flow: spec.flow_id.clone(),
                        pkt_seq: i as u32,
                    },
                );
            }
        }
        self.queue
            .push(self.scenario.policy.report_period_us, Ev::RscfTick);
        self.queue.push(
            self.scenario.policy.controller_period_us,
            Ev::ControllerTick,
        );
        if self.scenario.mode == NetworkMode::FiveGCore {
            self.queue
                .push(self.scenario.policy.sync_period_us, Ev::SyncTick);
        }
        let revocations = self.scenario.revocations.clone();
        for (ue, at) in revocations {
            self.queue.push(at, Ev::Revoke { ue });
        }
        self.refresh_view();
    }

    // -----------------------------------------------------------------
    // dispatch

    fn handle(&mut self, ev: Ev) {
        match ev {
            Ev::RrcAtEnb { ue, msg } => self.on_rrc_at_enb(&ue, msg),
            Ev::RrcAtUe { ue, msg } => self.on_rrc_at_ue(&ue, msg),
            Ev::DrbAtEnb { ue, drb_id, bytes } => self.on_drb_at_enb(&ue, drb_id, &bytes),
            Ev::DrbAtUe { ue, drb_id, bytes } => self.on_drb_at_ue(&ue, drb_id, &bytes),
            Ev::MrbAtUe { ue, bytes } => self.on_mrb_at_ue(&ue, &bytes),
            Ev::MrbControl => self.on_mrb_control(),
            Ev::BeaconSlot => self.on_beacon_slot(),
            Ev::NativeBeacon { ap, gen } => self.on_native_beacon(&ap, gen),
            Ev::WifiAtAp { ap, ue, frame } => self.on_wifi_at_ap(&ap, &ue, frame),
            Ev::WifiAtUe { ap, ue, frame } => self.on_wifi_at_ue(&ap, &ue, frame),
            Ev::BeaconTimeout { ue, gen } => self.on_beacon_timeout(&ue, gen),
            Ev::UeSleep { ue } => self.on_ue_sleep(&ue),
            Ev::UeWake { ue } => self.on_ue_wake(&ue),
            Ev::UeMove { ue, x, y } => self.on_ue_move(&ue, x, y),
            Ev::AppArrival { flow, pkt_seq } => self.on_app_arrival(&flow, pkt_seq),
            Ev::HopArrive { node, pkt } => self.on_hop_arrive(&node, pkt),
            Ev::AuthArrive { ue, msg } => self.on_auth_arrive(&ue, msg),
            Ev::DeauthAt { ap, ue } => self.deauth_on(&ap, &ue),
            Ev::RscfTick => self.on_rscf_tick(),
            Ev::ControllerTick => self.on_controller_tick(),
            Ev::SyncTick => self.on_sync_tick(),
            Ev::Revoke { ue } => self.on_revoke(&ue),
        }
    }

    // -----------------------------------------------------------------
    // trace helpers

    fn trace(&mut self, node: &NodeId, kind: TraceKind, fields: Vec<(&str, String)>) {
        let fields = fields
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        self.trace.push(self.now_us, node, kind, fields);
    }

    fn trace_ctrl(&mut self, node: &NodeId, fields: Vec<(&str, String)>) {
        self.trace(node, TraceKind::Ctrl, fields);
        let line = self.trace.records.last().expect("just pushed").line();
        // running digest over the decision log
        self.ctrl_digest = fnv1a(format!("{:016x}{line}", self.ctrl_digest).as_bytes());
    }

    fn trace_frame(&mut self, node: &NodeId, frame: &MacFrame, dir: &str, via: &str) {
        let kind = if frame.frame_type == FrameType::Data {
            TraceKind::Data
        } else {
            TraceKind::Mgmt
        };
        let mut fields = vec![
            ("frame", frame.frame_type.name().to_string()),
            ("dir", dir.to_string()),
            ("via", via.to_string()),
        ];
        if frame.frame_type == FrameType::Data {
            if let Some((flow, pkt_seq, _)) = parse_packet(&frame.body) {
                fields.push(("flow", flow.to_string()));
                fields.push(("pkt", pkt_seq.to_string()));
                fields.push(("len", frame.body.len().to_string()));
            }
        }
        if frame.frame_type == FrameType::Beacon {
            if let Ok(body) = BeaconBody::decode(&frame.body) {
                if !body.tim.is_empty() {
                    let ids: Vec<String> = body.tim.ids().map(|i| i.to_string()).collect();
                    fields.push(("tim", ids.join("+")));
                }
            }
        }
        self.trace(node, kind, fields);
    }

    fn trace_drop(&mut self, node: &NodeId, reason: &str, flow: Option<&FlowId>) {
        let mut fields = vec![("reason", reason.to_string())];
        if let Some(f) = flow {
            fields.push(("flow", f.to_string()));
            self.metrics.flow(f).record_dropped();
        }
        self.trace(node, TraceKind::Drop, fields);
    }

    // -----------------------------------------------------------------
    // geometry

    fn in_enb_range(&self, ue: &NodeId) -> bool {
        match (&self.enb, self.ues.get(ue)) {
            (Some(enb), Some(u)) => dist2(enb.pos, u.pos) <= enb.range * enb.range,
            _ => false,
        }
    }

    fn in_ap_range(&self, ap: &ApRt, ue: &UeRt) -> bool {
        dist2(ap.pos, ue.pos) <= ap.range * ap.range
    }

    fn ues_in_enb_range(&self) -> Vec<NodeId> {
        let Some(enb) = &self.enb else { return vec![] };
        self.ues
            .values()
            .filter(|u| dist2(enb.pos, u.pos) <= enb.range * enb.range)
            .map(|u| u.id.clone())
            .collect()
    }

    // -----------------------------------------------------------------
    // MRB machinery and beacons

    fn on_mrb_control(&mut self) {
        let Some(enb) = &mut self.enb else { return };
        let enb_id = enb.id.clone();
        let first = !enb.ap.cell.mrb().is_some_and(|m| m.active);
        self.trace(&enb_id, TraceKind::Mrb, vec![("msg", "sib13".to_string())]);
        if self.now_us > 0 {
            self.trace(&enb_id, TraceKind::Mrb, vec![("msg", "mcch".to_string())]);
            let enb = self.enb.as_mut().expect("checked");
            let sched = enb.ap.cell.on_mcch(self.now_us);
            if first {
                if let Some(at) = sched.next_beacon_at_us {
                    self.queue.push(at, Ev::BeaconSlot);
                }
            }
        }
        let next = self.now_us + self.scenario.radio.mcch_period_us;
        self.queue.push(next, Ev::MrbControl);
    }

    fn on_beacon_slot(&mut self) {
        let in_range = self.ues_in_enb_range();
        let Some(enb) = &mut self.enb else { return };
        let enb_id = enb.id.clone();
        let actions = enb.ap.emu_step(EnbEmuEvent::BeaconTick);
        for action in actions {
            if let EmuAction::BroadcastOnMrb(frame) = action.act {
                let bytes = encode_frame(&frame).expect("beacon encodes");
                let enb = self.enb.as_mut().expect("checked");
                match enb.ap.cell.broadcast_on_mrb(self.now_us, &bytes, &in_range) {
                    Ok(emits) => {
                        self.trace_frame(&enb_id.clone(), &frame, "tx", "mrb");
                        for emit in emits {
                            if let RadioEmit::MrbPdu { ue, bytes, at_us } = emit {
                                self.queue.push(at_us, Ev::MrbAtUe { ue, bytes });
                            }
                        }
                    }
                    Err(_) => {
                        self.trace_drop(&enb_id.clone(), "mrb-not-ready", None);
                    }
                }
            }
        }
        let enb = self.enb.as_mut().expect("checked");
        enb.ap.cell.on_beacon_slot(self.now_us);
        if let Some(at) = enb.ap.cell.mrb().and_then(|m| m.next_beacon_at_us) {
            self.queue.push(at, Ev::BeaconSlot);
        }
    }

    fn on_native_beacon(&mut self, ap_id: &NodeId, gen: u64) {
        let Some(ap) = self.aps.get_mut(ap_id) else {
            return;
        };
        if gen != ap.beacon_gen || !ap.ap.is_awake() {
            return;
        }
        let period = ap.beacon_period_us;
        match ap.ap.beacon(self.now_us) {
            Ok(ApEffect::Air { frame, at_us, .. }) => {
                let recipients: Vec<NodeId> = {
                    let ap = &self.aps[ap_id];
                    self.ues
                        .values()
                        .filter(|u| self.in_ap_range(ap, u))
                        .map(|u| u.id.clone())
                        .collect()
                };
                self.trace_frame(ap_id, &frame, "tx", "air");
                for ue in recipients {
                    self.queue.push(
                        at_us,
                        Ev::WifiAtUe {
                            ap: ap_id.clone(),
                            ue,
                            frame: frame.clone(),
                        },
                    );
                }
            }
            _ => return,
        }
        self.queue.push(
            self.now_us + period,
            Ev::NativeBeacon {
                ap: ap_id.clone(),
                gen,
            },
        );
    }

    // -----------------------------------------------------------------
    // UE machine plumbing

    fn step_ue(&mut self, ue_id: &NodeId, event: UeEmuEvent) {
        let Some(ue) = self.ues.get_mut(ue_id) else {
            return;
        };
        let before = ue.emu.phase;
        let state = std::mem::replace(&mut ue.emu, UeEmuState::new(ue.mac, "-", 1));
        let (state, actions) = crate::emu::ue_emu_step(state, event);
        ue.emu = state;
        let after = ue.emu.phase;
        self.run_ue_actions(ue_id, actions);
        if before != after && after == UePhase::Associated && before != UePhase::Sleeping {
            self.on_ue_attached(ue_id, Serving::Lte);
        }
    }

    fn run_ue_actions(&mut self, ue_id: &NodeId, actions: Vec<EmuAction>) {
        for action in actions {
            match action {
                EmuAction::SendOnSrb(frame) => {
                    self.trace_frame(ue_id, &frame, "tx", "srb");
                    let bytes = encode_frame(&frame).expect("machine frames encode");
                    let Some(enb) = &mut self.enb else { continue };
                    match enb
                        .ap
                        .cell
                        .send_srb(self.now_us, ue_id, Direction::Uplink, bytes)
                    {
                        Ok(RadioEmit::Rrc { ue, msg, at_us, .. }) => {
                            self.queue.push(at_us, Ev::RrcAtEnb { ue, msg });
                        }
                        Ok(RadioEmit::Dropped { .. }) => {
                            self.trace_drop(ue_id, "srb-queue-overflow", None)
                        }
                        Ok(_) => {}
                        Err(_) => self.trace_drop(ue_id, "bearer-not-active", None),
                    }
                }
                EmuAction::SendOnDrb { drb_id, frame } => {
                    let via = "drb";
                    self.trace_frame(ue_id, &frame, "tx", via);
                    let flow = data_flow_id(&frame);
                    let bytes = encode_frame(&frame).expect("machine frames encode");
                    let Some(enb) = &mut self.enb else { continue };
                    match enb
                        .ap
                        .cell
                        .send_drb(self.now_us, ue_id, drb_id, Direction::Uplink, bytes)
                    {
                        Ok(RadioEmit::DrbPdu {
                            ue,
                            drb_id,
                            bytes,
                            at_us,
                            ..
                        }) => {
                            self.queue.push(at_us, Ev::DrbAtEnb { ue, drb_id, bytes });
                        }
                        Ok(RadioEmit::Dropped { .. }) => {
                            self.trace_drop(ue_id, "drb-queue-overflow", flow.as_ref());
                        }
                        Ok(_) => {}
                        Err(_) => {
                            self.trace_drop(ue_id, "bearer-not-active", flow.as_ref());
                        }
                    }
                }
                EmuAction::DeliverUp(sdu) => self.on_ue_delivered(ue_id, &sdu),
                EmuAction::EnterMode(mode) => self.set_ue_mode(ue_id, mode),
                EmuAction::StartTimer {
                    timer: TimerKind::BeaconTimeout,
                    duration_us,
                } => {
                    let Some(ue) = self.ues.get_mut(ue_id) else {
                        continue;
                    };
                    ue.timer_gen += 1;
                    let gen = ue.timer_gen;
                    self.queue.push(
                        self.now_us + duration_us,
                        Ev::BeaconTimeout {
                            ue: ue_id.clone(),
                            gen,
                        },
                    );
                }
                EmuAction::Notify(notice) => self.on_ue_notice(ue_id, notice),
                EmuAction::RequestReconfigure { .. } | EmuAction::BroadcastOnMrb(_) => {
                    // eNB-side actions; a UE machine never emits them
                }
            }
        }
    }

    fn on_ue_notice(&mut self, ue_id: &NodeId, notice: EmuNotice) {
        match notice {
            EmuNotice::ConnectRrc => {
                let reachable = self.in_enb_range(ue_id);
                let Some(enb) = &mut self.enb else { return };
                match enb.ap.cell.rrc_connect(self.now_us, ue_id, reachable) {
                    Ok(RadioEmit::Rrc { ue, msg, at_us, .. }) => {
                        self.trace(
                            ue_id,
                            TraceKind::Rrc,
                            vec![
                                ("msg", msg.kind_name().to_string()),
                                ("dir", "tx".to_string()),
                            ],
                        );
                        self.queue.push(at_us, Ev::RrcAtEnb { ue, msg });
                    }
                    Ok(_) => {}
                    Err(e) => {
                        let e = e.to_string();
                        self.trace_ctrl(ue_id, vec![("op", "error".to_string()), ("what", e)]);
                    }
                }
            }
            EmuNotice::EnteredSleep => {
                let Some(enb) = &mut self.enb else { return };
                enb.ap.emu_step(EnbEmuEvent::SleepStateChanged {
                    ue: ue_id.clone(),
                    sleeping: true,
                });
            }
            EmuNotice::WakeNeeded => {
                self.queue
                    .push(self.now_us, Ev::UeWake { ue: ue_id.clone() });
            }
            EmuNotice::Awake => {
                let Some(enb) = &mut self.enb else { return };
                let effects = enb.ap.step(
                    self.now_us,
                    EnbEmuEvent::SleepStateChanged {
                        ue: ue_id.clone(),
                        sleeping: false,
                    },
                );
                let enb_id = enb.id.clone();
                self.apply_enb_effects(&enb_id, effects);
            }
            EmuNotice::Deauthenticated => {
                if let Some(ue) = self.ues.get_mut(ue_id) {
                    if ue.serving == Some(Serving::Lte) {
                        ue.serving = None;
                    }
                }
                if let Some(enb) = &mut self.enb {
                    enb.ap.cell.release(ue_id);
                }
            }
            EmuNotice::Unexpected { phase, event } => {
                self.trace_ctrl(
                    ue_id,
                    vec![
                        ("op", "unexpected-event".to_string()),
                        ("phase", phase.to_string()),
                        ("event", event.to_string()),
                    ],
                );
            }
            EmuNotice::Error(e) => {
                let e = e.to_string();
                self.trace_ctrl(ue_id, vec![("op", "error".to_string()), ("what", e)]);
            }
        }
    }

    fn set_ue_mode(&mut self, ue_id: &NodeId, mode: UeMode) {
        let Some(ue) = self.ues.get_mut(ue_id) else {
            return;
        };
        if ue.mode.is_some() {
            return;
        }
        ue.mode = Some(mode);
        self.trace_ctrl(
            ue_id,
            vec![
                ("op", "mode".to_string()),
                ("mode", mode.name().to_string()),
            ],
        );
    }

    // -----------------------------------------------------------------
    // LTE radio arrivals

    fn on_rrc_at_enb(&mut self, ue_id: &NodeId, msg: RrcMessage) {
        let Some(enb) = &mut self.enb else { return };
        let enb_id = enb.id.clone();
        match msg {
            RrcMessage::ConnectionRequest => {
                self.trace(
                    &enb_id,
                    TraceKind::Rrc,
                    rrc_fields("connection-request", "rx"),
                );
                let enb = self.enb.as_mut().expect("checked");
                if let Some(RadioEmit::Rrc { ue, msg, at_us, .. }) =
                    enb.ap.cell.on_connection_request(self.now_us, ue_id)
                {
                    self.trace(&enb_id, TraceKind::Rrc, rrc_fields(msg.kind_name(), "tx"));
                    self.queue.push(at_us, Ev::RrcAtUe { ue, msg });
                }
            }
            RrcMessage::SetupComplete => {
                self.trace(&enb_id, TraceKind::Rrc, rrc_fields("setup-complete", "rx"));
                let enb = self.enb.as_mut().expect("checked");
                enb.ap.cell.on_setup_complete(ue_id);
            }
            RrcMessage::UlInformationTransfer { pdu } => {
                let Ok(frame) = decode_frame(&pdu) else {
                    self.trace_drop(&enb_id, "undecodable-pdu", None);
                    return;
                };
                self.trace_frame(&enb_id, &frame, "rx", "srb");
                let service_class = self
                    .scenario
                    .node(ue_id)
                    .map(|n| n.service_class)
                    .unwrap_or(crate::lte::ServiceClass::Background);
                let enb = self.enb.as_mut().expect("checked");
                let actions = enb.ap.emu_step(EnbEmuEvent::PduFromSrb {
                    ue: ue_id.clone(),
                    frame,
                    service_class,
                });
                self.run_enb_actions(&enb_id, actions);
            }
            RrcMessage::ReconfigurationComplete { drb_id } => {
                self.trace(
                    &enb_id,
                    TraceKind::Rrc,
                    vec![
                        ("msg", "reconfiguration-complete".to_string()),
                        ("dir", "rx".to_string()),
                        ("drb", drb_id.to_string()),
                    ],
                );
                let enb = self.enb.as_mut().expect("checked");
                enb.ap.cell.on_reconfiguration_complete(ue_id, drb_id);
                let actions = enb.ap.emu_step(EnbEmuEvent::ReconfigComplete {
                    ue: ue_id.clone(),
                    drb_id,
                });
                self.run_enb_actions(&enb_id, actions);
            }
            _ => {}
        }
    }

    fn on_rrc_at_ue(&mut self, ue_id: &NodeId, msg: RrcMessage) {
        match msg {
            RrcMessage::ConnectionSetup => {
                self.trace(ue_id, TraceKind::Rrc, rrc_fields("connection-setup", "rx"));
                let Some(enb) = &mut self.enb else { return };
                if let Some(RadioEmit::Rrc { ue, msg, at_us, .. }) =
                    enb.ap.cell.on_connection_setup(self.now_us, ue_id)
                {
                    self.trace(ue_id, TraceKind::Rrc, rrc_fields(msg.kind_name(), "tx"));
                    self.queue.push(at_us, Ev::RrcAtEnb { ue, msg });
                }
                self.step_ue(ue_id, UeEmuEvent::RrcConnected);
            }
            RrcMessage::ConnectionReconfiguration { drb_id, qci, pdu } => {
                self.trace(
                    ue_id,
                    TraceKind::Rrc,
                    vec![
                        ("msg", "connection-reconfiguration".to_string()),
                        ("dir", "rx".to_string()),
                        ("drb", drb_id.to_string()),
                        ("qci", qci.value().to_string()),
                        (
                            "pdu",
                            pdu.as_deref()
                                .and_then(|b| decode_frame(b).ok())
                                .map_or("-".to_string(), |f| f.frame_type.name().to_string()),
                        ),
                    ],
                );
                let embedded = pdu.as_deref().and_then(|b| decode_frame(b).ok());
                if let Some(f) = &embedded {
                    self.trace_frame(ue_id, f, "rx", "rrc");
                }
                let Some(enb) = &mut self.enb else { return };
                if let Some(RadioEmit::Rrc { ue, msg, at_us, .. }) =
                    enb.ap.cell.on_reconfiguration(self.now_us, ue_id, drb_id)
                {
                    self.trace(
                        ue_id,
                        TraceKind::Rrc,
                        vec![
                            ("msg", "reconfiguration-complete".to_string()),
                            ("dir", "tx".to_string()),
                            ("drb", drb_id.to_string()),
                        ],
                    );
                    self.queue.push(at_us, Ev::RrcAtEnb { ue, msg });
                }
                self.step_ue(
                    ue_id,
                    UeEmuEvent::DrbActivated {
                        drb_id,
                        pdu: embedded,
                    },
                );
            }
            RrcMessage::DlInformationTransfer { pdu } => {
                let Ok(frame) = decode_frame(&pdu) else {
                    self.trace_drop(ue_id, "undecodable-pdu", None);
                    return;
                };
                self.trace_frame(ue_id, &frame, "rx", "srb");
                self.step_ue(ue_id, UeEmuEvent::PduFromSrb(frame));
            }
            _ => {}
        }
    }

    fn on_drb_at_enb(&mut self, ue_id: &NodeId, _drb_id: u8, bytes: &[u8]) {
        let Some(enb) = &self.enb else { return };
        let enb_id = enb.id.clone();
        let Ok(frame) = decode_frame(bytes) else {
            self.trace_drop(&enb_id, "undecodable-pdu", None);
            return;
        };
        self.trace_frame(&enb_id, &frame, "rx", "drb");
        if frame.frame_type == FrameType::Data {
            let enb = self.enb.as_mut().expect("checked");
            enb.ap
                .load
                .record(self.now_us, (frame.encoded_len() * 8) as u64);
        }
        let enb = self.enb.as_mut().expect("checked");
        let actions = enb.ap.emu_step(EnbEmuEvent::PduFromDrb {
            ue: ue_id.clone(),
            frame,
        });
        self.run_enb_actions(&enb_id, actions);
    }

    fn on_drb_at_ue(&mut self, ue_id: &NodeId, _drb_id: u8, bytes: &[u8]) {
        let Ok(frame) = decode_frame(bytes) else {
            self.trace_drop(ue_id, "undecodable-pdu", None);
            return;
        };
        self.trace_frame(ue_id, &frame, "rx", "drb");
        self.step_ue(ue_id, UeEmuEvent::PduFromDrb(frame));
    }

    fn on_mrb_at_ue(&mut self, ue_id: &NodeId, bytes: &[u8]) {
        let Ok(frame) = decode_frame(bytes) else {
            return;
        };
        self.trace_frame(ue_id, &frame, "rx", "mrb");
        if frame.frame_type != FrameType::Beacon {
            return;
        }
        let Ok(body) = BeaconBody::decode(&frame.body) else {
            return;
        };
        let Some(ue) = self.ues.get_mut(ue_id) else {
            return;
        };
        ue.beacon_log.push(self.now_us);
        let scanning = ue.emu.phase == UePhase::Scanning;
        let pending_to = ue.pending_handover.as_ref().map(|p| p.to_ap.clone());
        let native_busy = ue.nsta.phase != StaPhase::Idle || ue.wifi_target.is_some();
        let enb_id = self.enb.as_ref().map(|e| e.id.clone());
        let lte_pending = pending_to.is_some() && pending_to == enb_id;
        if scanning && native_busy && !lte_pending {
            // the native leg is handling this UE; just log the observation
            return;
        }
        let bssid = frame.bssid;
        self.step_ue(
            ue_id,
            UeEmuEvent::BeaconReceived {
                at_us: self.now_us,
                bssid,
                body,
            },
        );
    }

    // -----------------------------------------------------------------
    // eNB emulation actions

    fn run_enb_actions(&mut self, enb_id: &NodeId, actions: Vec<crate::emu::EnbAction>) {
        for action in actions {
            let subject = action.ue.clone();
            match action.act {
                EmuAction::RequestReconfigure { drb_id, qci, pdu } => {
                    let Some(ue) = subject else { continue };
                    self.trace_frame(enb_id, &pdu, "tx", "rrc");
                    let bytes = encode_frame(&pdu).expect("machine frames encode");
                    let Some(enb) = &mut self.enb else { continue };
                    match enb
                        .ap
                        .cell
                        .reconfigure(self.now_us, &ue, drb_id, qci, Some(bytes))
                    {
                        Ok(RadioEmit::Rrc { ue, msg, at_us, .. }) => {
                            self.trace(
                                enb_id,
                                TraceKind::Rrc,
                                vec![
                                    ("msg", "connection-reconfiguration".to_string()),
                                    ("dir", "tx".to_string()),
                                    ("drb", drb_id.to_string()),
                                    ("qci", qci.value().to_string()),
                                    ("pdu", "probe-response".to_string()),
                                ],
                            );
                            self.queue.push(at_us, Ev::RrcAtUe { ue, msg });
                        }
                        Ok(_) => {}
                        Err(e) => {
                            let e = e.to_string();
                            self.trace_ctrl(enb_id, vec![("op", "error".to_string()), ("what", e)]);
                        }
                    }
                }
                EmuAction::SendOnDrb { drb_id, frame } => {
                    let Some(ue) = subject else { continue };
                    self.trace_frame(enb_id, &frame, "tx", "drb");
                    let flow = data_flow_id(&frame);
                    let Some(enb) = &mut self.enb else { continue };
                    match enb.ap.send_drb_frame(self.now_us, &ue, drb_id, &frame) {
                        Some(ApEffect::Air {
                            ue: Some(ue),
                            frame,
                            at_us,
                        }) => {
                            let bytes = encode_frame(&frame).expect("frame encodes");
                            self.queue.push(at_us, Ev::DrbAtUe { ue, drb_id, bytes });
                        }
                        Some(ApEffect::Dropped { .. }) => {
                            self.trace_drop(enb_id, "drb-queue-overflow", flow.as_ref());
                        }
                        _ => {
                            self.trace_drop(enb_id, "bearer-not-active", flow.as_ref());
                        }
                    }
                }
                EmuAction::DeliverUp(sdu) => {
                    let Some(ue) = subject else { continue };
                    self.forward_uplink_sdu(&enb_id.clone(), &ue, &sdu);
                }
                EmuAction::Notify(EmuNotice::Unexpected { phase, event }) => {
                    self.trace_ctrl(
                        enb_id,
                        vec![
                            ("op", "unexpected-event".to_string()),
                            ("phase", phase.to_string()),
                            ("event", event.to_string()),
                        ],
                    );
                }
                EmuAction::Notify(EmuNotice::Error(e)) => {
                    let e = e.to_string();
                    self.trace_ctrl(enb_id, vec![("op", "error".to_string()), ("what", e)]);
                }
                _ => {}
            }
        }
    }

    fn apply_enb_effects(&mut self, enb_id: &NodeId, effects: Vec<ApEffect>) {
        for effect in effects {
            match effect {
                ApEffect::Air {
                    ue: Some(ue),
                    frame,
                    at_us,
                } => {
                    self.trace_frame(enb_id, &frame, "tx", "drb");
                    let bytes = encode_frame(&frame).expect("frame encodes");
                    self.queue.push(
                        at_us,
                        Ev::DrbAtUe {
                            ue,
                            drb_id: crate::emu::enb::EMU_DRB_ID,
                            bytes,
                        },
                    );
                }
                ApEffect::Dropped { .. } => self.trace_drop(enb_id, "drb-queue-overflow", None),
                _ => {}
            }
        }
    }

    // -----------------------------------------------------------------
    // native Wi-Fi

    fn on_wifi_at_ap(&mut self, ap_id: &NodeId, ue_id: &NodeId, frame: MacFrame) {
        self.trace_frame(ap_id, &frame, "rx", "air");
        let Some(ap) = self.aps.get_mut(ap_id) else {
            return;
        };
        match ap.ap.handle_frame(self.now_us, ue_id, frame) {
            Ok(effects) => {
                for effect in effects {
                    match effect {
                        ApEffect::Air {
                            ue: Some(ue),
                            frame,
                            at_us,
                        } => {
                            self.trace_frame(ap_id, &frame, "tx", "air");
                            self.queue.push(
                                at_us,
                                Ev::WifiAtUe {
                                    ap: ap_id.clone(),
                                    ue,
                                    frame,
                                },
                            );
                        }
                        ApEffect::Uplink { ue, sdu, .. } => {
                            self.forward_uplink_sdu(&ap_id.clone(), &ue, &sdu);
                        }
                        ApEffect::Dropped { .. } => {
                            self.trace_drop(&ap_id.clone(), "air-queue-overflow", None)
                        }
                        _ => {}
                    }
                }
            }
            Err(e) => {
                // a sleeping AP is silent; other errors are worth a drop mark
                if e != crate::wlan::ApError::ApAsleep {
                    let reason = e.to_string();
                    self.trace_drop(ap_id, &reason, None);
                }
            }
        }
    }

    fn on_wifi_at_ue(&mut self, ap_id: &NodeId, ue_id: &NodeId, frame: MacFrame) {
        self.trace_frame(ue_id, &frame, "rx", "air");
        if frame.frame_type == FrameType::Beacon {
            let Some(ue) = self.ues.get_mut(ue_id) else {
                return;
            };
            ue.beacon_log.push(self.now_us);
            let idle = ue.nsta.phase == StaPhase::Idle;
            let lte_busy = ue.emu.phase != UePhase::Scanning;
            let targeted = ue.wifi_target.as_ref() == Some(ap_id);
            let free_choice = ue.mode.is_none() && idle && !lte_busy && ue.wifi_target.is_none();
            if idle && (targeted || free_choice) {
                self.set_ue_mode(ue_id, UeMode::Emulation);
                self.start_native_associate(ue_id, ap_id);
            }
            return;
        }
        let Some(ue) = self.ues.get_mut(ue_id) else {
            return;
        };
        let (reply, notices) = ue.nsta.handle_frame(frame);
        if let Some(reply) = reply {
            self.native_transmit(ue_id, ap_id, reply);
        }
        for notice in notices {
            match notice {
                StaNotice::Associated { .. } => {
                    if let Some(ue) = self.ues.get_mut(ue_id) {
                        ue.wifi_ap = Some(ap_id.clone());
                        ue.wifi_target = None;
                    }
                    self.on_ue_attached(ue_id, Serving::Wifi);
                }
                StaNotice::DeliverUp(sdu) => self.on_ue_delivered(ue_id, &sdu),
                StaNotice::Deauthenticated => {
                    if let Some(ue) = self.ues.get_mut(ue_id) {
                        ue.wifi_ap = None;
                        if ue.serving == Some(Serving::Wifi) {
                            ue.serving = None;
                        }
                    }
                }
            }
        }
    }

    fn start_native_associate(&mut self, ue_id: &NodeId, ap_id: &NodeId) {
        let Some(ap) = self.aps.get(ap_id) else {
            return;
        };
        let bssid = ap.ap.bssid;
        let Some(ue) = self.ues.get_mut(ue_id) else {
            return;
        };
        let probe = ue.nsta.start_associate(ap_id, bssid);
        self.native_transmit(ue_id, ap_id, probe);
    }

    fn native_transmit(&mut self, ue_id: &NodeId, ap_id: &NodeId, frame: MacFrame) {
        self.trace_frame(ue_id, &frame, "tx", "air");
        let flow = data_flow_id(&frame);
        let len = frame.encoded_len();
        let Some(ap) = self.aps.get_mut(ap_id) else {
            return;
        };
        match ap.ap.uplink_transmit(self.now_us, ue_id, len) {
            Ok(at_us) => {
                self.queue.push(
                    at_us,
                    Ev::WifiAtAp {
                        ap: ap_id.clone(),
                        ue: ue_id.clone(),
                        frame,
                    },
                );
            }
            Err(_) => self.trace_drop(ue_id, "air-queue-overflow", flow.as_ref()),
        }
    }

    // -----------------------------------------------------------------
    // UE-level events

    fn on_beacon_timeout(&mut self, ue_id: &NodeId, gen: u64) {
        let Some(ue) = self.ues.get(ue_id) else {
            return;
        };
        if ue.timer_gen != gen || ue.mode.is_some() {
            return;
        }
        // double-check against the observation log before falling back
        let window = self.scenario.radio.beacon_timeout_us();
        if detect_mode(&ue.beacon_log, self.now_us, window) == UeMode::Emulation {
            return;
        }
        self.step_ue(ue_id, UeEmuEvent::BeaconTimeout);
    }

    fn on_ue_sleep(&mut self, ue_id: &NodeId) {
        self.step_ue(ue_id, UeEmuEvent::SleepRequest);
    }

    fn on_ue_wake(&mut self, ue_id: &NodeId) {
        self.step_ue(ue_id, UeEmuEvent::WakeRequest);
    }

    fn on_ue_move(&mut self, ue_id: &NodeId, x: f64, y: f64) {
        if let Some(ue) = self.ues.get_mut(ue_id) {
            ue.pos = (x, y);
        }
        self.reassess();
    }

    fn on_ue_delivered(&mut self, ue_id: &NodeId, sdu: &[u8]) {
        let Some((flow, _seq, sent_at)) = parse_packet(sdu) else {
            return;
        };
        let is_dst = self
            .flows
            .get(&flow)
            .is_some_and(|f| matches!(&f.spec.dst, TrafficDst::Ue(peer) if peer == ue_id));
        if is_dst {
            self.metrics
                .flow(&flow)
                .record_delivered(sent_at, self.now_us, (sdu.len() * 8) as u64);
        }
    }

    fn on_ue_attached(&mut self, ue_id: &NodeId, serving: Serving) {
        if let Some(ue) = self.ues.get_mut(ue_id) {
            ue.serving = Some(serving);
        }
        // unified authentication runs once per UE, whatever the RAT
        let needs_auth = !self
            .sessions
            .get(ue_id)
            .is_some_and(|s| s.state == AuthState::Authenticated);
        if needs_auth {
            let lat = self.auth_leg_latency(ue_id);
            let pop = self.pop.clone();
            self.trace_auth(&pop, ue_id, AuthMsg::IdentityRequest, "tx");
            self.queue.push(
                self.now_us + lat,
                Ev::AuthArrive {
                    ue: ue_id.clone(),
                    msg: AuthMsg::IdentityRequest,
                },
            );
        }
        // finish a pending handover once the target leg is up
        let serving_ap = self.serving_ap_id(ue_id, serving);
        let pending = self.ues.get(ue_id).and_then(|u| u.pending_handover.clone());
        if let (Some(pending), Some(serving_ap)) = (pending, serving_ap) {
            if pending.to_ap == serving_ap {
                self.complete_handover(ue_id, pending);
            }
        }
        self.place_unassigned_flows_of(ue_id);
    }

    fn serving_ap_id(&self, ue_id: &NodeId, serving: Serving) -> Option<NodeId> {
        match serving {
            Serving::Lte => self.enb.as_ref().map(|e| e.id.clone()),
            Serving::Wifi => self.ues.get(ue_id).and_then(|u| u.wifi_ap.clone()),
        }
    }

    fn complete_handover(&mut self, ue_id: &NodeId, pending: PendingHandover) {
        for (flow_id, path) in &pending.reroutes {
            if let Some(flow) = self.flows.get_mut(flow_id) {
                flow.assigned_ap = Some(pending.to_ap.clone());
                flow.infra_path = Some(path.clone());
                flow.ap_changes += 1;
            }
            let fields = vec![
                ("op", "reroute".to_string()),
                ("flow", flow_id.to_string()),
                ("ap", pending.to_ap.to_string()),
                ("path", join_path(path)),
            ];
            let pop = self.pop.clone();
            self.trace_ctrl(&pop, fields);
        }
        if let Some(source) = &pending.deauth_from {
            self.queue.push(
                self.now_us + HANDOVER_DRAIN_US,
                Ev::DeauthAt {
                    ap: source.clone(),
                    ue: ue_id.clone(),
                },
            );
            self.metrics.handover_count += 1;
            let fields = vec![
                ("op", "handover-complete".to_string()),
                ("ue", ue_id.to_string()),
                ("from", source.to_string()),
                ("to", pending.to_ap.to_string()),
            ];
            let pop = self.pop.clone();
            self.trace_ctrl(&pop, fields);
        }
        if let Some(ue) = self.ues.get_mut(ue_id) {
            ue.pending_handover = None;
        }
    }

    fn deauth_on(&mut self, ap_id: &NodeId, ue_id: &NodeId) {
        if self.enb.as_ref().is_some_and(|e| &e.id == ap_id) {
            let enb = self.enb.as_mut().expect("checked");
            let effects = enb
                .ap
                .step(self.now_us, EnbEmuEvent::DetachUe { ue: ue_id.clone() });
            enb.ap.cell.release(ue_id);
            self.apply_enb_effects(&ap_id.clone(), effects);
        } else if let Some(ap) = self.aps.get_mut(ap_id) {
            if let Some(ApEffect::Air {
                ue: Some(ue),
                frame,
                at_us,
            }) = ap.ap.deauth_station(self.now_us, ue_id)
            {
                self.trace_frame(ap_id, &frame, "tx", "air");
                self.queue.push(
                    at_us,
                    Ev::WifiAtUe {
                        ap: ap_id.clone(),
                        ue,
                        frame,
                    },
                );
            }
        }
    }

    // -----------------------------------------------------------------
    // traffic and forwarding

    fn on_app_arrival(&mut self, flow_id: &FlowId, pkt_seq: u32) {
        self.metrics.flow(flow_id).record_sent(self.now_us);
        let Some(flow) = self.flows.get(flow_id) else {
            return;
        };
        let ue_id = flow.spec.ue.clone();
        if flow.assigned_ap.is_none() {
            self.place_flow(flow_id);
        }
        let Some(flow) = self.flows.get(flow_id) else {
            return;
        };
        let Some(assigned) = flow.assigned_ap.clone() else {
            self.trace_drop(&ue_id.clone(), "not-attached", Some(flow_id));
            return;
        };
        let sdu = encode_packet(flow_id, pkt_seq, self.now_us, flow.spec.packet_bytes);
        // send over whichever leg serves the assigned AP
        if self.enb.as_ref().is_some_and(|e| e.id == assigned) {
            self.step_ue(&ue_id, UeEmuEvent::AppData(sdu));
        } else {
            let frame = {
                let Some(ue) = self.ues.get_mut(&ue_id) else {
                    return;
                };
                match ue.nsta.data_frame(&sdu) {
                    Ok(f) => f,
                    Err(_) => {
                        self.trace_drop(&ue_id, "not-associated", Some(flow_id));
                        return;
                    }
                }
            };
            self.native_transmit(&ue_id, &assigned, frame);
        }
    }

    /// An uplink SDU surfaced at the AN edge: check the session, then walk
    /// the flow's infrastructure path.
    fn forward_uplink_sdu(&mut self, edge: &NodeId, ue_id: &NodeId, sdu: &[u8]) {
        let Some((flow_id, pkt_seq, sent_at)) = parse_packet(sdu) else {
            return;
        };
        let Some(flow) = self.flows.get(&flow_id) else {
            return;
        };
        let dst = match &flow.spec.dst {
            TrafficDst::External => UplinkDst::External,
            TrafficDst::Ue(peer) => UplinkDst::Local(peer.clone()),
        };
        let session = self.sessions.get(ue_id).cloned().unwrap_or(AuthSession {
            ue: ue_id.clone(),
            state: AuthState::Idle,
            method: crate::interworking::AuthMethod::Dot1x,
            key_digest: [0; 16],
        });
        match forward_uplink(&session, self.scenario.mode, &dst) {
            Ok(ForwardTarget::Local(_)) | Ok(ForwardTarget::Core) | Ok(ForwardTarget::Gateway) => {}
            Err(e) => {
                let reason = match e {
                    crate::interworking::InterworkingError::NotAuthenticated => "not-authenticated",
                    crate::interworking::InterworkingError::NoExternalNetwork => {
                        "no-external-network"
                    }
                    _ => "forwarding-error",
                };
                self.trace_drop(edge, reason, Some(&flow_id));
                return;
            }
        }
        let mut path = self.flows.get(&flow_id).and_then(|f| f.infra_path.clone());
        // an in-flight PDU may surface at the old AP after a re-route; walk
        // it from where it actually is
        if path.as_ref().and_then(|p| p.first()) != Some(edge) {
            self.refresh_view();
            let dst = self
                .flows
                .get(&flow_id)
                .map(|f| match &f.spec.dst {
                    TrafficDst::External => FlowDst::External,
                    TrafficDst::Ue(peer) => FlowDst::Ue(peer.clone()),
                })
                .expect("flow exists");
            path = controller::route_for(&self.view, edge, &dst).ok();
        }
        let Some(mut path) = path else {
            self.trace_drop(edge, "no-path", Some(&flow_id));
            return;
        };
        // external traffic continues one hop past the pop
        if dst == UplinkDst::External {
            if let Some(external) = &self.external {
                if path.last() != Some(external) {
                    path.push(external.clone());
                }
            }
        }
        let pkt = Packet {
            flow: flow_id,
            pkt_seq,
            sent_at_us: sent_at,
            bytes: sdu.to_vec(),
            path,
            hop: 0,
        };
        self.on_hop_arrive(&edge.clone(), pkt);
    }

    fn on_hop_arrive(&mut self, node: &NodeId, pkt: Packet) {
        if pkt.hop + 1 >= pkt.path.len() {
            self.deliver_at_final(node, pkt);
            return;
        }
        let next = pkt.path[pkt.hop + 1].clone();
        // crossing from the AN into the external network is the boundary
        if node == &self.pop && Some(&next) == self.external.as_ref() {
            let fields = vec![
                ("boundary", "pop-external".to_string()),
                ("flow", pkt.flow.to_string()),
                ("dir", "up".to_string()),
                ("to", next.to_string()),
            ];
            self.trace(&self.pop.clone(), TraceKind::Boundary, fields);
        }
        let key = ordered_pair(node, &next);
        let Some(link) = self.links.get_mut(&key) else {
            self.trace_drop(node, "no-link", Some(&pkt.flow));
            return;
        };
        match link
            .model
            .enqueue(pkt.flow.as_str(), self.now_us, pkt.bytes.len())
        {
            crate::lte::SendOutcome::Delivered { at_us } => {
                let mut pkt = pkt;
                pkt.hop += 1;
                self.queue.push(at_us, Ev::HopArrive { node: next, pkt });
            }
            crate::lte::SendOutcome::Dropped => {
                self.trace_drop(node, "link-queue-overflow", Some(&pkt.flow));
            }
        }
    }

    fn deliver_at_final(&mut self, node: &NodeId, pkt: Packet) {
        let dst = self.flows.get(&pkt.flow).map(|f| f.spec.dst.clone());
        match dst {
            Some(TrafficDst::External) => {
                let fields = vec![
                    ("frame", "data".to_string()),
                    ("dir", "rx".to_string()),
                    ("via", "wire".to_string()),
                    ("flow", pkt.flow.to_string()),
                    ("pkt", pkt.pkt_seq.to_string()),
                    ("len", pkt.bytes.len().to_string()),
                ];
                self.trace(node, TraceKind::Data, fields);
                self.metrics.flow(&pkt.flow).record_delivered(
                    pkt.sent_at_us,
                    self.now_us,
                    (pkt.bytes.len() * 8) as u64,
                );
            }
            Some(TrafficDst::Ue(peer)) => {
                // final infra node is the peer's serving AP
                if self.enb.as_ref().is_some_and(|e| &e.id == node) {
                    let enb = self.enb.as_mut().expect("checked");
                    let effects = enb.ap.step(
                        self.now_us,
                        EnbEmuEvent::DownlinkData {
                            ue: peer.clone(),
                            sdu: pkt.bytes.clone(),
                        },
                    );
                    self.apply_enb_effects(&node.clone(), effects);
                } else if let Some(ap) = self.aps.get_mut(node) {
                    match ap
                        .ap
                        .deliver_downlink(self.now_us, &peer, pkt.bytes.clone())
                    {
                        Ok(effects) => {
                            for effect in effects {
                                match effect {
                                    ApEffect::Air {
                                        ue: Some(ue),
                                        frame,
                                        at_us,
                                    } => {
                                        self.trace_frame(&node.clone(), &frame, "tx", "air");
                                        self.queue.push(
                                            at_us,
                                            Ev::WifiAtUe {
                                                ap: node.clone(),
                                                ue,
                                                frame,
                                            },
                                        );
                                    }
                                    ApEffect::Dropped { .. } => self.trace_drop(
                                        &node.clone(),
                                        "air-queue-overflow",
                                        Some(&pkt.flow),
                                    ),
                                    _ => {}
                                }
                            }
                        }
                        Err(e) => {
                            let reason = e.to_string();
                            self.trace_drop(node, &reason, Some(&pkt.flow));
                        }
                    }
                } else {
                    self.trace_drop(node, "no-serving-ap", Some(&pkt.flow));
                }
            }
            None => {}
        }
    }

    // -----------------------------------------------------------------
    // authentication

    fn auth_leg_latency(&self, ue_id: &NodeId) -> u64 {
        let ue = &self.ues[ue_id];
        match ue.serving {
            Some(Serving::Wifi) => ue
                .wifi_ap
                .as_ref()
                .and_then(|ap| self.aps.get(ap))
                .map(|a| a.ap.base_latency_us())
                .unwrap_or(1_000),
            _ => self
                .enb
                .as_ref()
                .map(|e| e.ap.cell.base_latency_us())
                .unwrap_or(1_000),
        }
    }

    fn trace_auth(&mut self, node: &NodeId, ue: &NodeId, msg: AuthMsg, dir: &str) {
        let fields = vec![
            ("msg", msg.name().to_string()),
            ("dir", dir.to_string()),
            ("ue", ue.to_string()),
            ("method", "dot1x".to_string()),
        ];
        self.trace(node, TraceKind::Auth, fields);
    }

    fn on_auth_arrive(&mut self, ue_id: &NodeId, msg: AuthMsg) {
        let lat = self.auth_leg_latency(ue_id);
        let pop = self.pop.clone();
        match msg {
            AuthMsg::IdentityRequest => {
                self.trace_auth(&ue_id.clone(), ue_id, msg, "rx");
                self.trace_auth(&ue_id.clone(), ue_id, AuthMsg::IdentityResponse, "tx");
                self.queue.push(
                    self.now_us + lat,
                    Ev::AuthArrive {
                        ue: ue_id.clone(),
                        msg: AuthMsg::IdentityResponse,
                    },
                );
            }
            AuthMsg::IdentityResponse => {
                self.trace_auth(&pop, ue_id, msg, "rx");
                self.trace_auth(&pop, ue_id, AuthMsg::Challenge, "tx");
                self.queue.push(
                    self.now_us + lat,
                    Ev::AuthArrive {
                        ue: ue_id.clone(),
                        msg: AuthMsg::Challenge,
                    },
                );
            }
            AuthMsg::Challenge => {
                self.trace_auth(&ue_id.clone(), ue_id, msg, "rx");
                self.trace_auth(&ue_id.clone(), ue_id, AuthMsg::ChallengeResponse, "tx");
                self.queue.push(
                    self.now_us + lat,
                    Ev::AuthArrive {
                        ue: ue_id.clone(),
                        msg: AuthMsg::ChallengeResponse,
                    },
                );
            }
            AuthMsg::ChallengeResponse => {
                self.trace_auth(&pop, ue_id, msg, "rx");
                let credential = self.ues[ue_id].credential.clone();
                let nonce = fnv1a_str(ue_id.as_str()) ^ self.scenario.seed;
                let session = authenticate(ue_id, &credential, &self.scenario.registry, nonce);
                let ok = session.state == AuthState::Authenticated;
                self.sessions.insert(ue_id.clone(), session);
                let fields = vec![
                    ("msg", "result".to_string()),
                    ("ue", ue_id.to_string()),
                    ("method", "dot1x".to_string()),
                    ("status", if ok { "ok" } else { "fail" }.to_string()),
                ];
                self.trace(&pop, TraceKind::Auth, fields);
            }
        }
    }

    // -----------------------------------------------------------------
    // controller

    fn refresh_view(&mut self) {
        // synchronous RSCF pass: every AP reports its abstract view
        let mut reports: Vec<RscfReport> = Vec::new();
        if let Some(enb) = &self.enb {
            let reachable: BTreeSet<NodeId> = self
                .ues
                .values()
                .filter(|u| dist2(enb.pos, u.pos) <= enb.range * enb.range)
                .map(|u| u.id.clone())
                .collect();
            reports.push(RscfReport {
                at_us: self.now_us,
                descriptor: enb.ap.report(self.now_us),
                stations: enb.ap.stations(),
                reachable_ues: reachable,
            });
        }
        for ap in self.aps.values() {
            let reachable: BTreeSet<NodeId> = self
                .ues
                .values()
                .filter(|u| self.in_ap_range(ap, u))
                .map(|u| u.id.clone())
                .collect();
            reports.push(RscfReport {
                at_us: self.now_us,
                descriptor: ap.ap.report(self.now_us),
                stations: ap.ap.stations(),
                reachable_ues: reachable,
            });
        }
        for report in reports {
            if let Ok(next) = controller::ingest_report(&self.view, &report) {
                self.view = next;
            }
        }
        self.view.asleep = self
            .mm
            .iter()
            .filter(|(_, m)| !m.awake)
            .map(|(id, _)| id.clone())
            .collect();
        self.view.flows = self
            .flows
            .values()
            .map(|f| {
                (
                    f.spec.flow_id.clone(),
                    FlowSpec {
                        flow_id: f.spec.flow_id.clone(),
                        ue: f.spec.ue.clone(),
                        dst: match &f.spec.dst {
                            TrafficDst::External => FlowDst::External,
                            TrafficDst::Ue(peer) => FlowDst::Ue(peer.clone()),
                        },
                        service_class: f.spec.service_class,
                        demand_bps: f.spec.rate_bps,
                        assigned_ap: f.assigned_ap.clone(),
                        path: f.infra_path.clone(),
                    },
                )
            })
            .collect();
    }

    fn place_flow(&mut self, flow_id: &FlowId) {
        self.refresh_view();
        let Some(spec) = self.view.flows.get(flow_id).cloned() else {
            return;
        };
        let ue_id = spec.ue.clone();
        let digest = self.view.digest();
        match controller::select_rat(&self.view, &spec) {
            Ok(target) => {
                let pop = self.pop.clone();
                self.trace_ctrl(
                    &pop,
                    vec![
                        ("op", "select-rat".to_string()),
                        ("view", format!("{digest:016x}")),
                        ("flow", flow_id.to_string()),
                        ("ap", target.to_string()),
                    ],
                );
                let serving_ap = self
                    .ues
                    .get(&ue_id)
                    .and_then(|u| u.serving.map(|s| self.serving_ap_id(&ue_id, s)))
                    .flatten();
                match serving_ap {
                    Some(current) => {
                        // route immediately via the current association; if
                        // the policy prefers another AP, hand over to it
                        if let Ok(path) = controller::route_for(&self.view, &current, &spec.dst) {
                            let flow = self.flows.get_mut(flow_id).expect("flow exists");
                            flow.assigned_ap = Some(current.clone());
                            flow.infra_path = Some(path);
                        }
                        if current != target {
                            self.request_handover(&ue_id, &target);
                        }
                    }
                    None => {
                        // not attached yet; the attach completion will call
                        // place_unassigned_flows_of
                    }
                }
            }
            Err(e) => {
                let pop = self.pop.clone();
                let what = e.to_string();
                self.trace_ctrl(
                    &pop,
                    vec![
                        ("op", "select-rat".to_string()),
                        ("view", format!("{digest:016x}")),
                        ("flow", flow_id.to_string()),
                        ("error", what),
                    ],
                );
            }
        }
    }

    fn place_unassigned_flows_of(&mut self, ue_id: &NodeId) {
        let pending: Vec<FlowId> = self
            .flows
            .values()
            .filter(|f| &f.spec.ue == ue_id && f.assigned_ap.is_none())
            .filter(|f| f.spec.start_us <= self.now_us && self.now_us < f.spec.stop_us)
            .map(|f| f.spec.flow_id.clone())
            .collect();
        for flow in pending {
            self.place_flow(&flow);
        }
    }

    fn request_handover(&mut self, ue_id: &NodeId, target: &NodeId) {
        let digest = self.view.digest();
        match controller::handover(&self.view, ue_id, target) {
            Ok(actions) if actions.is_empty() => {}
            Ok(actions) => {
                let pop = self.pop.clone();
                self.trace_ctrl(
                    &pop,
                    vec![
                        ("op", "handover".to_string()),
                        ("view", format!("{digest:016x}")),
                        ("ue", ue_id.to_string()),
                        ("to", target.to_string()),
                    ],
                );
                let mut pending = PendingHandover {
                    to_ap: target.clone(),
                    reroutes: Vec::new(),
                    deauth_from: None,
                };
                for action in actions {
                    match action {
                        HandoverAction::AssociateOn(_) => {}
                        HandoverAction::Reroute { flow, path } => {
                            pending.reroutes.push((flow, path))
                        }
                        HandoverAction::DeauthFrom(source) => pending.deauth_from = Some(source),
                    }
                }
                // already attached on the target leg: complete in place
                let attached = (self.enb.as_ref().is_some_and(|e| &e.id == target)
                    && self
                        .ues
                        .get(ue_id)
                        .is_some_and(|u| u.emu.phase == UePhase::Associated))
                    || self
                        .ues
                        .get(ue_id)
                        .is_some_and(|u| u.wifi_ap.as_ref() == Some(target));
                if attached {
                    self.complete_handover(ue_id, pending);
                } else {
                    if let Some(ue) = self.ues.get_mut(ue_id) {
                        ue.pending_handover = Some(pending);
                    }
                    if self.aps.contains_key(target) {
                        if let Some(ue) = self.ues.get_mut(ue_id) {
                            ue.wifi_target = Some(target.clone());
                        }
                        self.start_native_associate(ue_id, &target.clone());
                    }
                    // LTE targets attach on the next beacon via the pending
                    // handover gate in on_mrb_at_ue
                }
            }
            Err(e) => {
                let pop = self.pop.clone();
                let what = e.to_string();
                self.trace_ctrl(
                    &pop,
                    vec![
                        ("op", "handover".to_string()),
                        ("view", format!("{digest:016x}")),
                        ("ue", ue_id.to_string()),
                        ("to", target.to_string()),
                        ("error", what),
                    ],
                );
            }
        }
    }

    /// Re-evaluate placements: any flow whose serving AP can no longer serve
    /// its UE is handed over to the best candidate.
    fn reassess(&mut self) {
        self.refresh_view();
        let flow_ids: Vec<FlowId> = self.flows.keys().cloned().collect();
        for flow_id in flow_ids {
            let Some(spec) = self.view.flows.get(&flow_id).cloned() else {
                continue;
            };
            let Some(assigned) = spec.assigned_ap.clone() else {
                continue;
            };
            let in_transition = self
                .ues
                .get(&spec.ue)
                .is_some_and(|u| u.pending_handover.is_some());
            if in_transition {
                continue;
            }
            let usable = self.view.usable_aps(&spec.ue).any(|d| d.ap_id == assigned);
            if usable {
                continue;
            }
            match controller::select_rat(&self.view, &spec) {
                Ok(target) if target != assigned => {
                    self.request_handover(&spec.ue.clone(), &target);
                }
                Ok(_) => {}
                Err(ControllerError::NoCapacity) => {
                    let pop = self.pop.clone();
                    self.trace_ctrl(
                        &pop,
                        vec![
                            ("op", "reassess".to_string()),
                            ("flow", flow_id.to_string()),
                            ("error", "no-capacity".to_string()),
                        ],
                    );
                }
                Err(_) => {}
            }
        }
    }

    fn on_rscf_tick(&mut self) {
        let before: BTreeMap<NodeId, u64> = self
            .view
            .aps
            .iter()
            .map(|(id, d)| (id.clone(), d.current_load_bps))
            .collect();
        self.refresh_view();
        for (id, d) in self.view.aps.clone() {
            self.metrics
                .ap_utilization
                .entry(id.clone())
                .or_default()
                .push((self.now_us, d.current_load_bps));
            let delta_triggered = before.get(&id).is_some_and(|&old| {
                let delta = old.abs_diff(d.current_load_bps) as f64;
                d.capacity_bps > 0
                    && delta / d.capacity_bps as f64 > self.scenario.policy.report_delta
            });
            if delta_triggered {
                self.reassess();
            }
        }
        let next = self.now_us + self.scenario.policy.report_period_us;
        self.queue.push(next, Ev::RscfTick);
    }

    fn on_controller_tick(&mut self) {
        self.reassess();
        if self.scenario.policy.energy_planning {
            self.run_energy_plan();
        }
        let next = self.now_us + self.scenario.policy.controller_period_us;
        self.queue.push(next, Ev::ControllerTick);
    }

    fn run_energy_plan(&mut self) {
        self.refresh_view();
        let digest = self.view.digest();
        let plan = controller::energy_plan(&self.view, &BTreeMap::new());
        let pop = self.pop.clone();
        self.trace_ctrl(
            &pop,
            vec![
                ("op", "energy-plan".to_string()),
                ("view", format!("{digest:016x}")),
                ("sleep", join_path(&plan)),
            ],
        );
        for node in plan {
            if let Some(mmrt) = self.mm.get_mut(&node) {
                if mmrt.awake {
                    mmrt.awake = false;
                    self.asleep_since.insert(node.clone(), self.now_us);
                }
                continue;
            }
            let Some(ap) = self.aps.get_mut(&node) else {
                continue;
            };
            if !ap.ap.is_awake() {
                continue;
            }
            ap.beacon_gen += 1;
            let effects = ap.ap.set_power(self.now_us, PowerState::Asleep);
            self.asleep_since.insert(node.clone(), self.now_us);
            for effect in effects {
                if let ApEffect::Air {
                    ue: Some(ue),
                    frame,
                    at_us,
                } = effect
                {
                    self.trace_frame(&node.clone(), &frame, "tx", "air");
                    self.queue.push(
                        at_us,
                        Ev::WifiAtUe {
                            ap: node.clone(),
                            ue,
                            frame,
                        },
                    );
                }
            }
        }
    }

    // -----------------------------------------------------------------
    // interworking

    fn on_sync_tick(&mut self) {
        let mut an = PeerState::default();
        for (ue_id, ue) in &self.ues {
            let serving_ap = ue.serving.and_then(|s| self.serving_ap_id(ue_id, s));
            let auth = self
                .sessions
                .get(ue_id)
                .map(|s| s.state)
                .unwrap_or(AuthState::Idle);
            an.ues.insert(
                ue_id.clone(),
                UeSummary {
                    subscribed: self.scenario.registry.credential(ue_id).is_some(),
                    auth,
                    serving_ap,
                    nas_marker: true,
                },
            );
        }
        self.sync_epoch += 1;
        let epoch = self.sync_epoch;
        let last = if epoch > 1 { Some(epoch - 1) } else { None };
        if let Ok(record) = sync_cn(&an, &self.cn_state, epoch, last, self.scenario.mode) {
            let pop = self.pop.clone();
            let fields = vec![
                ("epoch", record.epoch.to_string()),
                ("an", format!("{:016x}", record.an_digest)),
                ("cn", format!("{:016x}", record.cn_digest)),
            ];
            self.trace(&pop, TraceKind::Sync, fields);
            // CN-side revocations take effect on the AN now
            for (ue, summary) in &record.reconciled {
                if summary.auth == AuthState::Failed {
                    if let Some(session) = self.sessions.get_mut(ue) {
                        session.state = AuthState::Failed;
                    }
                }
            }
            self.cn_state = PeerState {
                ues: record.reconciled,
            };
        }
        let next = self.now_us + self.scenario.policy.sync_period_us;
        self.queue.push(next, Ev::SyncTick);
    }

    fn on_revoke(&mut self, ue_id: &NodeId) {
        if let Some(entry) = self.cn_state.ues.get_mut(ue_id) {
            entry.subscribed = false;
        }
    }

    // -----------------------------------------------------------------

    fn finish_metrics(&mut self) {
        for (node, since) in std::mem::take(&mut self.asleep_since) {
            *self.metrics.asleep_node_us.entry(node).or_insert(0) +=
                self.now_us.saturating_sub(since);
        }
        self.metrics.decision_digest = self.ctrl_digest;
    }
}

fn rrc_fields(msg: &str, dir: &str) -> Vec<(&'static str, String)> {
    vec![("msg", msg.to_string()), ("dir", dir.to_string())]
}

fn ordered_pair(a: &NodeId, b: &NodeId) -> (NodeId, NodeId) {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    let dx = a.0 - b.0;
    let dy = a.1 - b.1;
    dx * dx + dy * dy
}

fn join_path(path: &[NodeId]) -> String {
    if path.is_empty() {
        return "-".to_string();
    }
    path.iter()
        .map(|n| n.as_str())
        .collect::<Vec<_>>()
        .join("+")
}

fn data_flow_id(frame: &MacFrame) -> Option<FlowId> {
    if frame.frame_type != FrameType::Data {
        return None;
    }
    parse_packet(&frame.body).map(|(f, _, _)| f)
}

/// In-simulation packet payload: flow id, packet sequence and send time,
/// padded with zeros to the configured packet size.
fn encode_packet(flow: &FlowId, pkt_seq: u32, sent_at_us: u64, len: usize) -> Vec<u8> {
    let id = flow.as_str().as_bytes();
    let mut out = Vec::with_capacity(len);
    out.extend_from_slice(&(id.len() as u16).to_le_bytes());
    out.extend_from_slice(id);
    out.extend_from_slice(&pkt_seq.to_le_bytes());
    out.extend_from_slice(&sent_at_us.to_le_bytes());
    out.resize(len.max(out.len()), 0);
    out
}

fn parse_packet(bytes: &[u8]) -> Option<(FlowId, u32, u64)> {
    if bytes.len() < 2 {
        return None;
    }
    let id_len = u16::from_le_bytes([bytes[0], bytes[1]]) as usize;
    let rest = bytes.get(2..)?;
    if rest.len() < id_len + 12 {
        return None;
    }
    let id = std::str::from_utf8(&rest[..id_len]).ok()?;
    let seq = u32::from_le_bytes(rest[id_len..id_len + 4].try_into().ok()?);
    let sent = u64::from_le_bytes(rest[id_len + 4..id_len + 12].try_into().ok()?);
    Some((FlowId::from(id), seq, sent))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packet_header_round_trip() {
        let bytes = encode_packet(&FlowId::from("flow-a"), 17, 123_456, 200);
        assert_eq!(bytes.len(), 200);
        let (flow, seq, sent) = parse_packet(&bytes).unwrap();
        assert_eq!(flow, FlowId::from("flow-a"));
        assert_eq!(seq, 17);
        assert_eq!(sent, 123_456);
    }

    #[test]
    fn packet_parse_rejects_garbage() {
        assert!(parse_packet(&[]).is_none());
        assert!(parse_packet(&[255, 255, 1, 2]).is_none());
    }
}

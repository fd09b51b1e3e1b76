//! Scenario files: structured text (key/value plus nested tables) describing
//! topology, mode, radio parameters, traffic and policies. Parsing is strict
//! (unknown fields are errors) and the topology invariants of the reference
//! deployment are enforced here: the macro eNB hangs directly off the PoP,
//! WLAN APs reach the PoP only through middle-mile nodes.
//!
//! The full schema is documented in `docs/scenario-format.md`.

use std::collections::{BTreeMap, BTreeSet};

use serde::Deserialize;
use thiserror::Error;

use crate::ids::{FlowId, NodeId};
use crate::interworking::{NetworkMode, Registry};
use crate::lte::ServiceClass;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemaError {
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> SchemaError {
    SchemaError::Invalid(msg.into())
}

/// Bytes of packet payload reserved for the in-simulation packet header
/// (flow id, sequence number, send timestamp).
pub const PACKET_HEADER_BYTES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Pop,
    MacroEnb,
    MiddleMile,
    WlanAp,
    Ue,
    Cn,
    Gateway,
}

impl NodeKind {
    fn parse(s: &str) -> Option<NodeKind> {
        Some(match s {
            "pop" => NodeKind::Pop,
            "macro-enb" => NodeKind::MacroEnb,
            "middle-mile" => NodeKind::MiddleMile,
            "wlan-ap" => NodeKind::WlanAp,
            "ue" => NodeKind::Ue,
            "cn" => NodeKind::Cn,
            "gateway" => NodeKind::Gateway,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub pos: (f64, f64),
    /// Radio range (macro eNB and WLAN APs).
    pub range: f64,
    pub capacity_bps: u64,
    pub radio_latency_us: u64,
    pub ssid: String,
    pub beacon_offset_us: u64,
    pub service_class: ServiceClass,
    pub credential: Option<String>,
    pub moves: Vec<(u64, (f64, f64))>,
    pub sleep_at_us: Option<u64>,
    pub wake_at_us: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct Link {
    pub a: NodeId,
    pub b: NodeId,
    pub capacity_bps: u64,
    pub latency_us: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrafficKind {
    Cbr,
    Poisson,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TrafficDst {
    External,
    Ue(NodeId),
}

/// One traffic flow template.
#[derive(Debug, Clone)]
pub struct TrafficSpec {
    pub flow_id: FlowId,
    pub ue: NodeId,
    pub dst: TrafficDst,
    pub service_class: ServiceClass,
    pub kind: TrafficKind,
    pub rate_bps: u64,
    pub packet_bytes: usize,
    pub start_us: u64,
    pub stop_us: u64,
}

#[derive(Debug, Clone)]
pub struct Policy {
    pub controller_period_us: u64,
    pub report_period_us: u64,
    /// Load delta (fraction of capacity) that triggers a re-evaluation.
    pub report_delta: f64,
    pub energy_planning: bool,
    pub sync_period_us: u64,
    pub load_window_us: u64,
}

impl Default for Policy {
    fn default() -> Policy {
        Policy {
            controller_period_us: 1_000_000,
            report_period_us: 1_000_000,
            report_delta: 0.10,
            energy_planning: false,
            sync_period_us: 5_000_000,
            load_window_us: 1_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Radio {
    pub beacon_interval_tu: u16,
    pub mcch_period_us: u64,
    /// Beacon-loss window, in beacon periods.
    pub beacon_timeout_beacons: u32,
    pub mrb_enabled: bool,
}

impl Default for Radio {
    fn default() -> Radio {
        Radio {
            beacon_interval_tu: 100,
            mcch_period_us: 100_000,
            beacon_timeout_beacons: 3,
            mrb_enabled: true,
        }
    }
}

impl Radio {
    /// 1 TU = 1.024 ms.
    pub fn beacon_period_us(&self) -> u64 {
        self.beacon_interval_tu as u64 * 1_024
    }

    pub fn beacon_timeout_us(&self) -> u64 {
        self.beacon_period_us() * self.beacon_timeout_beacons as u64
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub mode: NetworkMode,
    pub duration_us: u64,
    pub seed: u64,
    pub policy: Policy,
    pub radio: Radio,
    pub nodes: BTreeMap<NodeId, Node>,
    pub links: Vec<Link>,
    pub flows: Vec<TrafficSpec>,
    pub registry: Registry,
    pub revocations: Vec<(NodeId, u64)>,
}

impl Scenario {
    pub fn node(&self, id: &NodeId) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn nodes_of_kind(&self, kind: NodeKind) -> impl Iterator<Item = &Node> {
        self.nodes.values().filter(move |n| n.kind == kind)
    }
}

// ---------------------------------------------------------------------------
// raw serde layer

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    scenario: RawMeta,
    #[serde(default)]
    policy: RawPolicy,
    #[serde(default)]
    radio: RawRadio,
    #[serde(default)]
    nodes: Vec<RawNode>,
    #[serde(default)]
    links: Vec<RawLink>,
    #[serde(default)]
    flows: Vec<RawFlow>,
    #[serde(default)]
    registry: BTreeMap<String, String>,
    #[serde(default)]
    cn_revocations: Vec<RawRevocation>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeta {
    name: String,
    mode: String,
    duration_ms: u64,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolicy {
    controller_period_ms: Option<u64>,
    report_period_ms: Option<u64>,
    report_delta: Option<f64>,
    energy_planning: Option<bool>,
    sync_period_ms: Option<u64>,
    load_window_ms: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRadio {
    beacon_interval_tu: Option<u16>,
    mcch_period_us: Option<u64>,
    beacon_timeout_beacons: Option<u32>,
    mrb_enabled: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    id: String,
    kind: String,
    #[serde(default)]
    pos: Option<[f64; 2]>,
    range: Option<f64>,
    capacity_bps: Option<u64>,
    radio_latency_us: Option<u64>,
    ssid: Option<String>,
    beacon_offset_us: Option<u64>,
    service_class: Option<String>,
    credential: Option<String>,
    #[serde(default)]
    moves: Vec<RawMove>,
    sleep_at_ms: Option<u64>,
    wake_at_ms: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMove {
    at_ms: u64,
    pos: [f64; 2],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLink {
    a: String,
    b: String,
    capacity_bps: u64,
    latency_us: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFlow {
    id: String,
    ue: String,
    dst: String,
    #[serde(default)]
    service_class: Option<String>,
    #[serde(default)]
    kind: Option<String>,
    rate_bps: u64,
    packet_bytes: usize,
    start_ms: u64,
    stop_ms: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRevocation {
    ue: String,
    at_ms: u64,
}

// ---------------------------------------------------------------------------

/// Parse and validate a scenario file.
pub fn load_scenario(text: &str) -> Result<Scenario, SchemaError> {
    let raw: RawFile = toml::from_str(text).map_err(|e| SchemaError::Parse(e.to_string()))?;

    let mode = match raw.scenario.mode.as_str() {
        "five-g-core" => NetworkMode::FiveGCore,
        "fixed-broadband" => NetworkMode::FixedBroadband,
        "standalone" => NetworkMode::Standalone,
        other => return Err(invalid(format!("unknown mode `{other}`"))),
    };
    if raw.scenario.duration_ms == 0 {
        return Err(invalid("scenario.duration_ms must be positive"));
    }

    let policy = {
        let d = Policy::default();
        Policy {
            controller_period_us: raw
                .policy
                .controller_period_ms
                .map_or(d.controller_period_us, |v| v * 1_000),
            report_period_us: raw
                .policy
                .report_period_ms
                .map_or(d.report_period_us, |v| v * 1_000),
            report_delta: raw.policy.report_delta.unwrap_or(d.report_delta),
            energy_planning: raw.policy.energy_planning.unwrap_or(d.energy_planning),
            sync_period_us: raw
                .policy
                .sync_period_ms
                .map_or(d.sync_period_us, |v| v * 1_000),
            load_window_us: raw
                .policy
                .load_window_ms
                .map_or(d.load_window_us, |v| v * 1_000),
        }
    };
    if policy.controller_period_us == 0
        || policy.report_period_us == 0
        || policy.load_window_us == 0
    {
        return Err(invalid("policy periods must be positive"));
    }

    let radio = {
        let d = Radio::default();
        Radio {
            beacon_interval_tu: raw.radio.beacon_interval_tu.unwrap_or(d.beacon_interval_tu),
            mcch_period_us: raw.radio.mcch_period_us.unwrap_or(d.mcch_period_us),
            beacon_timeout_beacons: raw
                .radio
                .beacon_timeout_beacons
                .unwrap_or(d.beacon_timeout_beacons),
            mrb_enabled: raw.radio.mrb_enabled.unwrap_or(d.mrb_enabled),
        }
    };
    if radio.beacon_interval_tu == 0 {
        return Err(invalid("radio.beacon_interval_tu must be positive"));
    }
    if radio.mcch_period_us == 0 || radio.beacon_timeout_beacons == 0 {
        return Err(invalid("radio periods must be positive"));
    }

    let mut nodes: BTreeMap<NodeId, Node> = BTreeMap::new();
    for n in &raw.nodes {
        let id = NodeId::from(n.id.as_str());
        let Some(kind) = NodeKind::parse(&n.kind) else {
            return Err(invalid(format!("node `{id}`: unknown kind `{}`", n.kind)));
        };
        if nodes.contains_key(&id) {
            return Err(invalid(format!("duplicate node id `{id}`")));
        }
        let pos = n.pos.map(|p| (p[0], p[1])).unwrap_or((0.0, 0.0));
        let (default_range, default_cap, default_lat) = match kind {
            NodeKind::MacroEnb => (10_000.0, 50_000_000, 2_000),
            NodeKind::WlanAp => (100.0, 100_000_000, 1_000),
            _ => (0.0, 0, 0),
        };
        let mut moves: Vec<(u64, (f64, f64))> = n
            .moves
            .iter()
            .map(|m| (m.at_ms * 1_000, (m.pos[0], m.pos[1])))
            .collect();
        moves.sort_by_key(|(t, _)| *t);
        if !n.moves.is_empty() && kind != NodeKind::Ue {
            return Err(invalid(format!("node `{id}`: only UEs may move")));
        }
        nodes.insert(
            id.clone(),
            Node {
                id,
                kind,
                pos,
                range: n.range.unwrap_or(default_range),
                capacity_bps: n.capacity_bps.unwrap_or(default_cap),
                radio_latency_us: n.radio_latency_us.unwrap_or(default_lat),
                ssid: n.ssid.clone().unwrap_or_else(|| "frugal5g".to_string()),
                beacon_offset_us: n.beacon_offset_us.unwrap_or(0),
                service_class: ServiceClass::parse_lenient(
                    n.service_class.as_deref().unwrap_or("background"),
                ),
                credential: n.credential.clone(),
                moves,
                sleep_at_us: n.sleep_at_ms.map(|v| v * 1_000),
                wake_at_us: n.wake_at_ms.map(|v| v * 1_000),
            },
        );
    }

    let kind_of = |id: &NodeId| nodes.get(id).map(|n| n.kind);
    let count = |kind: NodeKind| nodes.values().filter(|n| n.kind == kind).count();

    if count(NodeKind::Pop) != 1 {
        return Err(invalid("exactly one pop node is required"));
    }
    if count(NodeKind::MacroEnb) > 1 {
        return Err(invalid("at most one macro-enb is supported"));
    }
    match mode {
        NetworkMode::FiveGCore => {
            if count(NodeKind::Cn) != 1 {
                return Err(invalid("five-g-core mode requires exactly one cn node"));
            }
            if count(NodeKind::Gateway) != 0 {
                return Err(invalid("five-g-core mode forbids gateway nodes"));
            }
        }
        NetworkMode::FixedBroadband => {
            if count(NodeKind::Gateway) != 1 {
                return Err(invalid(
                    "fixed-broadband mode requires exactly one gateway node",
                ));
            }
            if count(NodeKind::Cn) != 0 {
                return Err(invalid("fixed-broadband mode forbids cn nodes"));
            }
        }
        NetworkMode::Standalone => {
            if count(NodeKind::Cn) != 0 || count(NodeKind::Gateway) != 0 {
                return Err(invalid("standalone mode forbids cn and gateway nodes"));
            }
        }
    }

    let mut links = Vec::new();
    let mut seen_links: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();
    for l in &raw.links {
        let a = NodeId::from(l.a.as_str());
        let b = NodeId::from(l.b.as_str());
        let (Some(ka), Some(kb)) = (kind_of(&a), kind_of(&b)) else {
            return Err(invalid(format!("link {a}–{b}: unknown endpoint")));
        };
        if a == b {
            return Err(invalid(format!("link {a}–{b}: self link")));
        }
        if l.capacity_bps == 0 {
            return Err(invalid(format!("link {a}–{b}: capacity must be positive")));
        }
        let key = if a <= b {
            (a.clone(), b.clone())
        } else {
            (b.clone(), a.clone())
        };
        if !seen_links.insert(key) {
            return Err(invalid(format!("duplicate link {a}–{b}")));
        }
        for (x, kx, other) in [(&a, ka, kb), (&b, kb, ka)] {
            match kx {
                NodeKind::Ue => {
                    return Err(invalid(format!(
                        "link {a}–{b}: UEs attach over radio, not links ({x})"
                    )))
                }
                NodeKind::WlanAp => {
                    if other != NodeKind::MiddleMile {
                        return Err(invalid(format!(
                            "link {a}–{b}: wlan-ap backhaul must go through middle-mile nodes"
                        )));
                    }
                }
                NodeKind::MacroEnb => {
                    if other != NodeKind::Pop {
                        return Err(invalid(format!(
                            "link {a}–{b}: the macro enb connects directly to the pop only"
                        )));
                    }
                }
                NodeKind::Cn | NodeKind::Gateway => {
                    if other != NodeKind::Pop {
                        return Err(invalid(format!(
                            "link {a}–{b}: external networks attach at the pop"
                        )));
                    }
                }
                NodeKind::Pop | NodeKind::MiddleMile => {}
            }
        }
        links.push(Link {
            a,
            b,
            capacity_bps: l.capacity_bps,
            latency_us: l.latency_us,
        });
    }

    // the reference deployment wires the macro cell straight to the pop
    if let Some(enb) = nodes.values().find(|n| n.kind == NodeKind::MacroEnb) {
        let pop = nodes
            .values()
            .find(|n| n.kind == NodeKind::Pop)
            .expect("validated");
        let direct = links
            .iter()
            .any(|l| (l.a == enb.id && l.b == pop.id) || (l.a == pop.id && l.b == enb.id));
        if !direct {
            return Err(invalid("macro-enb must have a direct link to the pop"));
        }
    }
    for (kind, label) in [(NodeKind::Cn, "cn"), (NodeKind::Gateway, "gateway")] {
        if let Some(n) = nodes.values().find(|n| n.kind == kind) {
            let linked = links.iter().any(|l| l.a == n.id || l.b == n.id);
            if !linked {
                return Err(invalid(format!(
                    "{label} node `{}` must link to the pop",
                    n.id
                )));
            }
        }
    }

    let mut flows = Vec::new();
    let mut seen_flows: BTreeSet<FlowId> = BTreeSet::new();
    for f in &raw.flows {
        let flow_id = FlowId::from(f.id.as_str());
        if !seen_flows.insert(flow_id.clone()) {
            return Err(invalid(format!("duplicate flow id `{flow_id}`")));
        }
        let ue = NodeId::from(f.ue.as_str());
        if kind_of(&ue) != Some(NodeKind::Ue) {
            return Err(invalid(format!("flow `{flow_id}`: `{ue}` is not a ue")));
        }
        let dst = if f.dst == "external" {
            if mode == NetworkMode::Standalone {
                return Err(invalid(format!(
                    "flow `{flow_id}`: external destination in standalone mode"
                )));
            }
            TrafficDst::External
        } else {
            let peer = NodeId::from(f.dst.as_str());
            if kind_of(&peer) != Some(NodeKind::Ue) {
                return Err(invalid(format!(
                    "flow `{flow_id}`: dst must be `external` or a ue id"
                )));
            }
            if peer == ue {
                return Err(invalid(format!(
                    "flow `{flow_id}`: ue cannot send to itself"
                )));
            }
            TrafficDst::Ue(peer)
        };
        let kind = match f.kind.as_deref().unwrap_or("cbr") {
            "cbr" => TrafficKind::Cbr,
            "poisson" => TrafficKind::Poisson,
            other => return Err(invalid(format!("flow `{flow_id}`: unknown kind `{other}`"))),
        };
        if f.rate_bps == 0 {
            return Err(invalid(format!(
                "flow `{flow_id}`: rate_bps must be positive"
            )));
        }
        if f.start_ms >= f.stop_ms {
            return Err(invalid(format!(
                "flow `{flow_id}`: start must precede stop"
            )));
        }
        if f.packet_bytes < PACKET_HEADER_BYTES || f.packet_bytes > crate::frames::MAX_BODY_LEN {
            return Err(invalid(format!(
                "flow `{flow_id}`: packet_bytes must be in {PACKET_HEADER_BYTES}..={}",
                crate::frames::MAX_BODY_LEN
            )));
        }
        flows.push(TrafficSpec {
            flow_id,
            ue,
            dst,
            service_class: ServiceClass::parse_lenient(
                f.service_class.as_deref().unwrap_or("background"),
            ),
            kind,
            rate_bps: f.rate_bps,
            packet_bytes: f.packet_bytes,
            start_us: f.start_ms * 1_000,
            stop_us: f.stop_ms * 1_000,
        });
    }

    let mut registry = Registry::new();
    for (ue, cred) in &raw.registry {
        let id = NodeId::from(ue.as_str());
        if kind_of(&id) != Some(NodeKind::Ue) {
            return Err(invalid(format!("registry entry `{ue}` is not a ue")));
        }
        registry.register(id, cred);
    }

    let mut revocations = Vec::new();
    for r in &raw.cn_revocations {
        if mode != NetworkMode::FiveGCore {
            return Err(invalid("cn_revocations require five-g-core mode"));
        }
        let id = NodeId::from(r.ue.as_str());
        if kind_of(&id) != Some(NodeKind::Ue) {
            return Err(invalid(format!("revocation `{}` is not a ue", r.ue)));
        }
        revocations.push((id, r.at_ms * 1_000));
    }

    Ok(Scenario {
        name: raw.scenario.name,
        mode,
        duration_us: raw.scenario.duration_ms * 1_000,
        seed: raw.scenario.seed,
        policy,
        radio,
        nodes,
        links,
        flows,
        registry,
        revocations,
    })
}

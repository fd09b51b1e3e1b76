//! LTE radio legs for the macro cell: RRC connection management, SRB/DRB
//! bearers with QoS classes, and the SIB13/MCCH-gated multicast bearer that
//! carries beacons. The eNB here has no S1 or X2 interface; everything it
//! emits is RRC signalling, MRB broadcast, or MAC frames over a bearer.

pub mod link;

use std::collections::BTreeMap;

use thiserror::Error;

pub use link::{LinkModel, SendOutcome, QUEUE_CAP};

use crate::ids::NodeId;

/// Overhead charged to an RRC message on the radio, in bytes.
pub const RRC_HEADER_BYTES: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LteError {
    #[error("ue is not in radio range of the enb")]
    Unreachable,
    #[error("rrc connection already exists")]
    AlreadyConnected,
    #[error("bearer is not active")]
    BearerNotActive,
    #[error("drb id already configured for this ue")]
    DuplicateDrb,
    #[error("mrb not established yet")]
    MrbNotReady,
}

/// QoS class identifier, 1..=9.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Qci(u8);

impl Qci {
    pub fn new(value: u8) -> Option<Qci> {
        (1..=9).contains(&value).then_some(Qci(value))
    }

    pub fn value(&self) -> u8 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ServiceClass {
    Voice,
    Interactive,
    Background,
}

impl ServiceClass {
    /// Lenient parse used for scenario input: unknown names fall back to
    /// `Background` (QCI 9).
    pub fn parse_lenient(name: &str) -> ServiceClass {
        match name {
            "voice" => ServiceClass::Voice,
            "interactive" => ServiceClass::Interactive,
            _ => ServiceClass::Background,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ServiceClass::Voice => "voice",
            ServiceClass::Interactive => "interactive",
            ServiceClass::Background => "background",
        }
    }
}

/// Fixed service-class → QCI policy table.
pub fn qci_for(class: ServiceClass) -> Qci {
    let v = match class {
        ServiceClass::Voice => 1,
        ServiceClass::Interactive => 8,
        ServiceClass::Background => 9,
    };
    Qci(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum BearerId {
    Srb1,
    Drb(u8),
    Mrb,
}

impl BearerId {
    pub fn queue_key(&self, ue: Option<&NodeId>) -> String {
        let bearer = match self {
            BearerId::Srb1 => "srb1".to_string(),
            BearerId::Drb(n) => format!("drb{n}"),
            BearerId::Mrb => return "mrb".to_string(),
        };
        match ue {
            Some(ue) => format!("{ue}:{bearer}"),
            None => bearer,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BearerState {
    Pending,
    Active,
    Released,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Uplink,
    Downlink,
}

/// RRC message as a structured value; no ASN.1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RrcMessage {
    ConnectionRequest,
    ConnectionSetup,
    SetupComplete,
    DlInformationTransfer {
        pdu: Vec<u8>,
    },
    UlInformationTransfer {
        pdu: Vec<u8>,
    },
    ConnectionReconfiguration {
        drb_id: u8,
        qci: Qci,
        pdu: Option<Vec<u8>>,
    },
    ReconfigurationComplete {
        drb_id: u8,
    },
    Sib13,
    Mcch,
}

impl RrcMessage {
    pub fn kind_name(&self) -> &'static str {
        match self {
            RrcMessage::ConnectionRequest => "connection-request",
            RrcMessage::ConnectionSetup => "connection-setup",
            RrcMessage::SetupComplete => "setup-complete",
            RrcMessage::DlInformationTransfer { .. } => "dl-information-transfer",
            RrcMessage::UlInformationTransfer { .. } => "ul-information-transfer",
            RrcMessage::ConnectionReconfiguration { .. } => "connection-reconfiguration",
            RrcMessage::ReconfigurationComplete { .. } => "reconfiguration-complete",
            RrcMessage::Sib13 => "sib13",
            RrcMessage::Mcch => "mcch",
        }
    }

    pub fn wire_size(&self) -> usize {
        let pdu = match self {
            RrcMessage::DlInformationTransfer { pdu }
            | RrcMessage::UlInformationTransfer { pdu } => pdu.len(),
            RrcMessage::ConnectionReconfiguration { pdu, .. } => pdu.as_ref().map_or(0, Vec::len),
            _ => 0,
        };
        RRC_HEADER_BYTES + pdu
    }
}

/// Something the cell put on the air; the event engine turns these into
/// deliveries and trace records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RadioEmit {
    Rrc {
        ue: NodeId,
        dir: Direction,
        msg: RrcMessage,
        at_us: u64,
    },
    DrbPdu {
        ue: NodeId,
        drb_id: u8,
        dir: Direction,
        bytes: Vec<u8>,
        at_us: u64,
    },
    MrbPdu {
        ue: NodeId,
        bytes: Vec<u8>,
        at_us: u64,
    },
    /// Queue overflow; the PDU never left the node.
    Dropped { queue: String, len_bytes: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct DrbState {
    qci: Qci,
    // set when the ue processed the reconfiguration / when the complete
    // reached the enb; the bearer is Active once the enb side is ready
    ue_ready: bool,
    enb_ready: bool,
    released: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RrcPhase {
    AwaitSetup,
    AwaitComplete,
    Connected,
}

#[derive(Debug, Clone)]
struct RrcConn {
    phase: RrcPhase,
    srb_ue_ready: bool,
    srb_enb_ready: bool,
    drbs: BTreeMap<u8, DrbState>,
}

/// Multicast bearer schedule. Beacons become transmittable only after the
/// first MCCH emission; slots then repeat every `beacon_period_us`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MrbSchedule {
    pub mcch_period_us: u64,
    pub beacon_period_us: u64,
    pub next_mcch_at_us: u64,
    pub next_beacon_at_us: Option<u64>,
    pub active: bool,
}

/// eNB-side radio cell: owns the RRC dialog state for every connected UE,
/// the uplink/downlink serializers and the multicast bearer.
#[derive(Debug, Clone)]
pub struct LteCell {
    uplink: LinkModel,
    downlink: LinkModel,
    conns: BTreeMap<NodeId, RrcConn>,
    mrb: Option<MrbSchedule>,
}

impl LteCell {
    pub fn new(capacity_bps: u64, base_latency_us: u64) -> LteCell {
        LteCell {
            uplink: LinkModel::new(capacity_bps, base_latency_us),
            downlink: LinkModel::new(capacity_bps, base_latency_us),
            conns: BTreeMap::new(),
            mrb: None,
        }
    }

    pub fn is_connected(&self, ue: &NodeId) -> bool {
        self.conns.contains_key(ue)
    }

    pub fn capacity_bps(&self) -> u64 {
        self.downlink.capacity_bps()
    }

    pub fn base_latency_us(&self) -> u64 {
        self.downlink.base_latency_us()
    }

    pub fn srb_state(&self, ue: &NodeId) -> BearerState {
        match self.conns.get(ue) {
            None => BearerState::Released,
            Some(c) if c.srb_enb_ready => BearerState::Active,
            Some(_) => BearerState::Pending,
        }
    }

    pub fn drb_state(&self, ue: &NodeId, drb_id: u8) -> BearerState {
        match self.conns.get(ue).and_then(|c| c.drbs.get(&drb_id)) {
            None => BearerState::Released,
            Some(d) if d.released => BearerState::Released,
            Some(d) if d.enb_ready => BearerState::Active,
            Some(_) => BearerState::Pending,
        }
    }

    fn send(
        &mut self,
        dir: Direction,
        key: &str,
        now_us: u64,
        len: usize,
    ) -> Result<u64, RadioEmit> {
        let link = match dir {
            Direction::Uplink => &mut self.uplink,
            Direction::Downlink => &mut self.downlink,
        };
        match link.enqueue(key, now_us, len) {
            SendOutcome::Delivered { at_us } => Ok(at_us),
            SendOutcome::Dropped => Err(RadioEmit::Dropped {
                queue: key.to_string(),
                len_bytes: len,
            }),
        }
    }

    fn send_rrc(&mut self, now_us: u64, ue: &NodeId, dir: Direction, msg: RrcMessage) -> RadioEmit {
        let key = BearerId::Srb1.queue_key(Some(ue));
        match self.send(dir, &key, now_us, msg.wire_size()) {
            Ok(at_us) => RadioEmit::Rrc {
                ue: ue.clone(),
                dir,
                msg,
                at_us,
            },
            Err(drop) => drop,
        }
    }

    /// UE-initiated connection establishment. Emits the ConnectionRequest;
    /// the rest of the three-message exchange is driven by the arrival
    /// handlers below.
    pub fn rrc_connect(
        &mut self,
        now_us: u64,
        ue: &NodeId,
        reachable: bool,
    ) -> Result<RadioEmit, LteError> {
        if !reachable {
            return Err(LteError::Unreachable);
        }
        if self.conns.contains_key(ue) {
            return Err(LteError::AlreadyConnected);
        }
        self.conns.insert(
            ue.clone(),
            RrcConn {
                phase: RrcPhase::AwaitSetup,
                srb_ue_ready: false,
                srb_enb_ready: false,
                drbs: BTreeMap::new(),
            },
        );
        Ok(self.send_rrc(now_us, ue, Direction::Uplink, RrcMessage::ConnectionRequest))
    }

    /// ConnectionRequest reached the eNB: answer with ConnectionSetup.
    pub fn on_connection_request(&mut self, now_us: u64, ue: &NodeId) -> Option<RadioEmit> {
        let conn = self.conns.get_mut(ue)?;
        if conn.phase != RrcPhase::AwaitSetup {
            return None;
        }
        conn.phase = RrcPhase::AwaitComplete;
        Some(self.send_rrc(now_us, ue, Direction::Downlink, RrcMessage::ConnectionSetup))
    }

    /// ConnectionSetup reached the UE: answer with SetupComplete. The UE leg
    /// of SRB1 is usable from here; FIFO on the uplink serializer guarantees
    /// anything sent next arrives after the SetupComplete.
    pub fn on_connection_setup(&mut self, now_us: u64, ue: &NodeId) -> Option<RadioEmit> {
        let conn = self.conns.get_mut(ue)?;
        if conn.phase != RrcPhase::AwaitComplete {
            return None;
        }
        conn.srb_ue_ready = true;
        Some(self.send_rrc(now_us, ue, Direction::Uplink, RrcMessage::SetupComplete))
    }

    /// SetupComplete reached the eNB: SRB1 fully Active.
    pub fn on_setup_complete(&mut self, ue: &NodeId) {
        if let Some(conn) = self.conns.get_mut(ue) {
            conn.phase = RrcPhase::Connected;
            conn.srb_enb_ready = true;
        }
    }

    /// Wrap an emulation-layer PDU in an information transfer on SRB1.
    pub fn send_srb(
        &mut self,
        now_us: u64,
        ue: &NodeId,
        dir: Direction,
        pdu: Vec<u8>,
    ) -> Result<RadioEmit, LteError> {
        let conn = self.conns.get(ue).ok_or(LteError::BearerNotActive)?;
        let ready = match dir {
            Direction::Uplink => conn.srb_ue_ready,
            Direction::Downlink => conn.srb_enb_ready,
        };
        if !ready {
            return Err(LteError::BearerNotActive);
        }
        let msg = match dir {
            Direction::Uplink => RrcMessage::UlInformationTransfer { pdu },
            Direction::Downlink => RrcMessage::DlInformationTransfer { pdu },
        };
        Ok(self.send_rrc(now_us, ue, dir, msg))
    }

    /// eNB-side DRB activation: emits the ConnectionReconfiguration, which
    /// may carry an emulation-layer PDU (the probe response in the normal
    /// attach flow).
    pub fn reconfigure(
        &mut self,
        now_us: u64,
        ue: &NodeId,
        drb_id: u8,
        qci: Qci,
        pdu: Option<Vec<u8>>,
    ) -> Result<RadioEmit, LteError> {
        let conn = self.conns.get_mut(ue).ok_or(LteError::BearerNotActive)?;
        if !conn.srb_enb_ready {
            return Err(LteError::BearerNotActive);
        }
        if conn.drbs.get(&drb_id).is_some_and(|d| !d.released) {
            return Err(LteError::DuplicateDrb);
        }
        conn.drbs.insert(
            drb_id,
            DrbState {
                qci,
                ue_ready: false,
                enb_ready: false,
                released: false,
            },
        );
        Ok(self.send_rrc(
            now_us,
            ue,
            Direction::Downlink,
            RrcMessage::ConnectionReconfiguration { drb_id, qci, pdu },
        ))
    }

    /// Reconfiguration reached the UE: emit ReconfigurationComplete and open
    /// the UE leg of the DRB.
    pub fn on_reconfiguration(
        &mut self,
        now_us: u64,
        ue: &NodeId,
        drb_id: u8,
    ) -> Option<RadioEmit> {
        let conn = self.conns.get_mut(ue)?;
        let drb = conn.drbs.get_mut(&drb_id)?;
        drb.ue_ready = true;
        Some(self.send_rrc(
            now_us,
            ue,
            Direction::Uplink,
            RrcMessage::ReconfigurationComplete { drb_id },
        ))
    }

    /// Complete reached the eNB: DRB Active.
    pub fn on_reconfiguration_complete(&mut self, ue: &NodeId, drb_id: u8) {
        if let Some(drb) = self.conns.get_mut(ue).and_then(|c| c.drbs.get_mut(&drb_id)) {
            drb.enb_ready = true;
        }
    }

    /// Raw MAC PDU over a data bearer.
    pub fn send_drb(
        &mut self,
        now_us: u64,
        ue: &NodeId,
        drb_id: u8,
        dir: Direction,
        bytes: Vec<u8>,
    ) -> Result<RadioEmit, LteError> {
        let conn = self.conns.get(ue).ok_or(LteError::BearerNotActive)?;
        let drb = conn.drbs.get(&drb_id).ok_or(LteError::BearerNotActive)?;
        let ready = match dir {
            Direction::Uplink => drb.ue_ready && !drb.released,
            Direction::Downlink => drb.enb_ready && !drb.released,
        };
        if !ready {
            return Err(LteError::BearerNotActive);
        }
        let key = BearerId::Drb(drb_id).queue_key(Some(ue));
        let len = bytes.len();
        match self.send(dir, &key, now_us, len) {
            Ok(at_us) => Ok(RadioEmit::DrbPdu {
                ue: ue.clone(),
                drb_id,
                dir,
                bytes,
                at_us,
            }),
            Err(drop) => Ok(drop),
        }
    }

    pub fn drb_qci(&self, ue: &NodeId, drb_id: u8) -> Option<Qci> {
        self.conns
            .get(ue)
            .and_then(|c| c.drbs.get(&drb_id))
            .map(|d| d.qci)
    }

    /// Tear down the RRC connection and all bearers for this UE.
    pub fn release(&mut self, ue: &NodeId) {
        self.conns.remove(ue);
    }

    /// Start the multicast bearer machinery. SIB13 goes out immediately,
    /// the first MCCH one period later; that first MCCH establishes the MRB.
    pub fn setup_mrb(
        &mut self,
        now_us: u64,
        mcch_period_us: u64,
        beacon_period_us: u64,
    ) -> MrbSchedule {
        let sched = MrbSchedule {
            mcch_period_us,
            beacon_period_us,
            next_mcch_at_us: now_us + mcch_period_us,
            next_beacon_at_us: None,
            active: false,
        };
        self.mrb = Some(sched);
        sched
    }

    pub fn mrb(&self) -> Option<&MrbSchedule> {
        self.mrb.as_ref()
    }

    /// An MCCH emission just happened; the first one activates the MRB and
    /// fixes the beacon slot sequence.
    pub fn on_mcch(&mut self, now_us: u64) -> MrbSchedule {
        let sched = self.mrb.as_mut().expect("mcch without setup_mrb");
        if !sched.active {
            sched.active = true;
            sched.next_beacon_at_us = Some(now_us + sched.beacon_period_us);
        }
        sched.next_mcch_at_us = now_us + sched.mcch_period_us;
        *sched
    }

    /// A beacon slot was consumed; advance to the next.
    pub fn on_beacon_slot(&mut self, now_us: u64) {
        if let Some(sched) = self.mrb.as_mut() {
            sched.next_beacon_at_us = Some(now_us + sched.beacon_period_us);
        }
    }

    /// Broadcast a PDU on the MRB to every UE currently in range. All
    /// recipients see the same delivery time.
    pub fn broadcast_on_mrb(
        &mut self,
        now_us: u64,
        bytes: &[u8],
        in_range: &[NodeId],
    ) -> Result<Vec<RadioEmit>, LteError> {
        if !self.mrb.as_ref().is_some_and(|m| m.active) {
            return Err(LteError::MrbNotReady);
        }
        let key = BearerId::Mrb.queue_key(None);
        let at_us = match self.send(Direction::Downlink, &key, now_us, bytes.len()) {
            Ok(at) => at,
            Err(drop) => return Ok(vec![drop]),
        };
        Ok(in_range
            .iter()
            .map(|ue| RadioEmit::MrbPdu {
                ue: ue.clone(),
                bytes: bytes.to_vec(),
                at_us,
            })
            .collect())
    }
}

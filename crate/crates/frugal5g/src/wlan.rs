//! Native Wi-Fi AP/STA model and the abstract AP interface. The flow
//! controller only ever sees [`AbstractAp`]; a native AP and the macro cell
//! in emulation mode are indistinguishable through it except for their
//! configured capacity and timing.

use std::collections::{BTreeMap, VecDeque};

use thiserror::Error;

use crate::emu::{enb_emu_step, EmuAction, EnbAction, EnbEmuContext, EnbEmuEvent, EnbUePhase};
use crate::frames::{
    build_beacon, build_mgmt, next_seq, FrameType, MacAddress, MacFrame, MgmtBody, Tim,
};
use crate::ids::NodeId;
use crate::lte::{Direction, LinkModel, LteCell, RadioEmit, SendOutcome};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ApError {
    #[error("access point is asleep")]
    ApAsleep,
    #[error("station is out of radio range")]
    Unreachable,
    #[error("all association ids are in use")]
    AssocIdExhausted,
    #[error("station is not associated")]
    NotAssociated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ApKind {
    NativeWifi,
    LteEmulated,
}

impl ApKind {
    pub fn name(&self) -> &'static str {
        match self {
            ApKind::NativeWifi => "native-wifi",
            ApKind::LteEmulated => "lte-emulated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerState {
    Awake,
    Asleep,
}

/// The RAT-abstracted view of one access point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApDescriptor {
    pub ap_id: NodeId,
    pub bssid: MacAddress,
    pub ssid: String,
    pub kind: ApKind,
    pub capacity_bps: u64,
    pub current_load_bps: u64,
    pub station_count: usize,
    pub power_state: PowerState,
}

/// Something an AP wants done; the event engine schedules it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ApEffect {
    /// Frame on its way to one station (or every in-range station when
    /// `ue` is `None`); fully received at `at_us`.
    Air {
        ue: Option<NodeId>,
        frame: MacFrame,
        at_us: u64,
    },
    /// Received uplink SDU handed to the forwarding plane.
    Uplink {
        ue: NodeId,
        sdu: Vec<u8>,
        at_us: u64,
    },
    /// Queue overflow; nothing left the node.
    Dropped { queue: String, len_bytes: usize },
}

/// The behavioural contract every AP kind presents to the controller.
pub trait AbstractAp {
    fn report(&self, now_us: u64) -> ApDescriptor;
    fn stations(&self) -> Vec<NodeId>;
    fn deliver_downlink(
        &mut self,
        now_us: u64,
        ue: &NodeId,
        sdu: Vec<u8>,
    ) -> Result<Vec<ApEffect>, ApError>;
    fn set_power(&mut self, now_us: u64, state: PowerState) -> Vec<ApEffect>;
}

/// Sliding-window account of bits actually delivered over the air.
#[derive(Debug, Clone)]
pub struct LoadWindow {
    window_us: u64,
    samples: VecDeque<(u64, u64)>,
}

impl LoadWindow {
    pub fn new(window_us: u64) -> LoadWindow {
        assert!(window_us > 0);
        LoadWindow {
            window_us,
            samples: VecDeque::new(),
        }
    }

    pub fn record(&mut self, at_us: u64, bits: u64) {
        self.samples.push_back((at_us, bits));
        let horizon = at_us.saturating_sub(self.window_us * 4);
        while self.samples.front().is_some_and(|&(t, _)| t < horizon) {
            self.samples.pop_front();
        }
    }

    pub fn rate_bps(&self, now_us: u64) -> u64 {
        let start = now_us.saturating_sub(self.window_us);
        let bits: u64 = self
            .samples
            .iter()
            .filter(|&&(t, _)| t > start && t <= now_us)
            .map(|&(_, b)| b)
            .sum();
        bits * 1_000_000 / self.window_us
    }
}

#[derive(Debug, Clone)]
struct StaEntry {
    mac: MacAddress,
    assoc_id: u8,
}

/// A village WLAN access point. Probe/associate/data run directly over the
/// air interface; there is no RRC leg.
#[derive(Debug, Clone)]
pub struct NativeAp {
    pub id: NodeId,
    pub bssid: MacAddress,
    pub ssid: String,
    pub beacon_interval_tu: u16,
    uplink: LinkModel,
    downlink: LinkModel,
    power: PowerState,
    stations: BTreeMap<NodeId, StaEntry>,
    load: LoadWindow,
    next_seq: u16,
}

impl NativeAp {
    pub fn new(
        id: NodeId,
        bssid: MacAddress,
        ssid: &str,
        capacity_bps: u64,
        base_latency_us: u64,
        beacon_interval_tu: u16,
        load_window_us: u64,
    ) -> NativeAp {
        NativeAp {
            id,
            bssid,
            ssid: ssid.to_string(),
            beacon_interval_tu,
            uplink: LinkModel::new(capacity_bps, base_latency_us),
            downlink: LinkModel::new(capacity_bps, base_latency_us),
            power: PowerState::Awake,
            stations: BTreeMap::new(),
            load: LoadWindow::new(load_window_us),
            next_seq: 0,
        }
    }

    pub fn is_awake(&self) -> bool {
        self.power == PowerState::Awake
    }

    pub fn is_associated(&self, ue: &NodeId) -> bool {
        self.stations.contains_key(ue)
    }

    pub fn base_latency_us(&self) -> u64 {
        self.downlink.base_latency_us()
    }

    /// Controller-ordered deauthentication of a single station.
    pub fn deauth_station(&mut self, now_us: u64, ue: &NodeId) -> Option<ApEffect> {
        let entry = self.stations.remove(ue)?;
        let deauth = self.mgmt_frame(FrameType::Deauthentication, entry.mac, 0, entry.assoc_id);
        Some(self.transmit_down(now_us, ue, deauth))
    }

    fn take_seq(&mut self) -> u16 {
        let s = self.next_seq;
        self.next_seq = next_seq(s);
        s
    }

    /// Next beacon to put on the air. Asleep APs emit nothing at all.
    pub fn beacon(&mut self, now_us: u64) -> Result<ApEffect, ApError> {
        if self.power == PowerState::Asleep {
            return Err(ApError::ApAsleep);
        }
        let seq = self.take_seq();
        let frame = build_beacon(
            &self.ssid,
            self.beacon_interval_tu,
            &Tim::new(),
            self.bssid,
            seq,
        )
        .expect("beacon is always well-formed");
        let len = frame.encoded_len();
        match self.downlink.enqueue("beacon", now_us, len) {
            SendOutcome::Delivered { at_us } => Ok(ApEffect::Air {
                ue: None,
                frame,
                at_us,
            }),
            SendOutcome::Dropped => Err(ApError::ApAsleep),
        }
    }

    /// Station transmission towards the AP; returns when the frame will
    /// fully arrive (the AP handles it then via [`NativeAp::handle_frame`]).
    pub fn uplink_transmit(
        &mut self,
        now_us: u64,
        ue: &NodeId,
        len_bytes: usize,
    ) -> Result<u64, ApEffect> {
        match self.uplink.enqueue(&format!("{ue}:air"), now_us, len_bytes) {
            SendOutcome::Delivered { at_us } => Ok(at_us),
            SendOutcome::Dropped => Err(ApEffect::Dropped {
                queue: format!("{ue}:air"),
                len_bytes,
            }),
        }
    }

    /// Frame fully received from a station. Drives the probe → associate →
    /// data lifecycle. A sleeping AP stays silent.
    pub fn handle_frame(
        &mut self,
        now_us: u64,
        ue: &NodeId,
        frame: MacFrame,
    ) -> Result<Vec<ApEffect>, ApError> {
        if self.power == PowerState::Asleep {
            return Err(ApError::ApAsleep);
        }
        match frame.frame_type {
            FrameType::ProbeRequest => {
                let response = self.mgmt_frame(FrameType::ProbeResponse, frame.src, 0, 0);
                Ok(vec![self.transmit_down(now_us, ue, response)])
            }
            FrameType::AssociationRequest => {
                let assoc_id = match self.stations.get(ue) {
                    Some(entry) => entry.assoc_id,
                    None => {
                        let used: Vec<u8> = self.stations.values().map(|s| s.assoc_id).collect();
                        let Some(aid) = (1..=255).find(|id| !used.contains(id)) else {
                            return Err(ApError::AssocIdExhausted);
                        };
                        self.stations.insert(
                            ue.clone(),
                            StaEntry {
                                mac: frame.src,
                                assoc_id: aid,
                            },
                        );
                        aid
                    }
                };
                let response =
                    self.mgmt_frame(FrameType::AssociationResponse, frame.src, 0, assoc_id);
                Ok(vec![self.transmit_down(now_us, ue, response)])
            }
            FrameType::Data => {
                if !self.stations.contains_key(ue) {
                    return Err(ApError::NotAssociated);
                }
                self.load.record(now_us, frame.encoded_len() as u64 * 8);
                Ok(vec![ApEffect::Uplink {
                    ue: ue.clone(),
                    sdu: frame.body,
                    at_us: now_us,
                }])
            }
            _ => Ok(vec![]),
        }
    }

    fn mgmt_frame(
        &mut self,
        frame_type: FrameType,
        dst: MacAddress,
        status: u16,
        assoc_id: u8,
    ) -> MacFrame {
        let seq = self.take_seq();
        build_mgmt(
            frame_type,
            &MgmtBody {
                ssid: self.ssid.clone(),
                status,
                assoc_id,
            },
            dst,
            self.bssid,
            self.bssid,
            seq,
        )
        .expect("ap management frames are always well-formed")
    }

    fn transmit_down(&mut self, now_us: u64, ue: &NodeId, frame: MacFrame) -> ApEffect {
        let len = frame.encoded_len();
        match self.downlink.enqueue(&format!("{ue}:air"), now_us, len) {
            SendOutcome::Delivered { at_us } => {
                if frame.frame_type == FrameType::Data {
                    self.load.record(at_us, len as u64 * 8);
                }
                ApEffect::Air {
                    ue: Some(ue.clone()),
                    frame,
                    at_us,
                }
            }
            SendOutcome::Dropped => ApEffect::Dropped {
                queue: format!("{ue}:air"),
                len_bytes: len,
            },
        }
    }
}

impl AbstractAp for NativeAp {
    fn report(&self, now_us: u64) -> ApDescriptor {
        ApDescriptor {
            ap_id: self.id.clone(),
            bssid: self.bssid,
            ssid: self.ssid.clone(),
            kind: ApKind::NativeWifi,
            capacity_bps: self.downlink.capacity_bps(),
            current_load_bps: self.load.rate_bps(now_us),
            station_count: self.stations.len(),
            power_state: self.power,
        }
    }

    fn stations(&self) -> Vec<NodeId> {
        self.stations.keys().cloned().collect()
    }

    fn deliver_downlink(
        &mut self,
        now_us: u64,
        ue: &NodeId,
        sdu: Vec<u8>,
    ) -> Result<Vec<ApEffect>, ApError> {
        if self.power == PowerState::Asleep {
            return Err(ApError::ApAsleep);
        }
        let Some(entry) = self.stations.get(ue) else {
            return Err(ApError::NotAssociated);
        };
        let dst = entry.mac;
        let seq = self.take_seq();
        let frame = crate::emu::encapsulate(&sdu, self.bssid, dst, self.bssid, seq)
            .map_err(|_| ApError::NotAssociated)?;
        Ok(vec![self.transmit_down(now_us, ue, frame)])
    }

    fn set_power(&mut self, now_us: u64, state: PowerState) -> Vec<ApEffect> {
        if state == self.power {
            return vec![];
        }
        if state == PowerState::Awake {
            self.power = PowerState::Awake;
            return vec![];
        }
        // going to sleep: deauthenticate everyone, then stop beaconing
        let stations = std::mem::take(&mut self.stations);
        let mut effects = Vec::new();
        for (ue, entry) in stations {
            let deauth = self.mgmt_frame(FrameType::Deauthentication, entry.mac, 0, entry.assoc_id);
            effects.push(self.transmit_down(now_us, &ue, deauth));
        }
        self.power = PowerState::Asleep;
        effects
    }
}

/// Station-side lifecycle for the native path. Mirrors the emulated attach
/// from the probe onward; there is no RRC preamble.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StaPhase {
    Idle,
    Probing,
    Associating,
    Associated,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StaNotice {
    Associated { assoc_id: u8 },
    Deauthenticated,
    DeliverUp(Vec<u8>),
}

#[derive(Debug, Clone)]
pub struct NativeSta {
    pub phase: StaPhase,
    pub ap: Option<NodeId>,
    pub assoc_id: Option<u8>,
    mac: MacAddress,
    ssid: String,
    bssid: Option<MacAddress>,
    next_seq: u16,
}

impl NativeSta {
    pub fn new(mac: MacAddress, ssid: &str) -> NativeSta {
        NativeSta {
            phase: StaPhase::Idle,
            ap: None,
            assoc_id: None,
            mac,
            ssid: ssid.to_string(),
            bssid: None,
            next_seq: 0,
        }
    }

    fn take_seq(&mut self) -> u16 {
        let s = self.next_seq;
        self.next_seq = next_seq(s);
        s
    }

    /// Kick off association towards a beaconing AP: emits the probe request.
    pub fn start_associate(&mut self, ap: &NodeId, bssid: MacAddress) -> MacFrame {
        self.phase = StaPhase::Probing;
        self.ap = Some(ap.clone());
        self.bssid = Some(bssid);
        let seq = self.take_seq();
        build_mgmt(
            FrameType::ProbeRequest,
            &MgmtBody::request(&self.ssid),
            MacAddress::BROADCAST,
            self.mac,
            bssid,
            seq,
        )
        .expect("probe request is always well-formed")
    }

    /// Frame from the AP; optionally replies with the next frame of the
    /// lifecycle.
    pub fn handle_frame(&mut self, frame: MacFrame) -> (Option<MacFrame>, Vec<StaNotice>) {
        match (&self.phase, frame.frame_type) {
            (StaPhase::Probing, FrameType::ProbeResponse) => {
                self.phase = StaPhase::Associating;
                let bssid = self.bssid.expect("probing implies bssid");
                let seq = self.take_seq();
                let req = build_mgmt(
                    FrameType::AssociationRequest,
                    &MgmtBody::request(&self.ssid),
                    bssid,
                    self.mac,
                    bssid,
                    seq,
                )
                .expect("association request is always well-formed");
                (Some(req), vec![])
            }
            (StaPhase::Associating, FrameType::AssociationResponse) => {
                match MgmtBody::decode(&frame.body) {
                    Ok(body) if body.status == 0 => {
                        self.phase = StaPhase::Associated;
                        self.assoc_id = Some(body.assoc_id);
                        (
                            None,
                            vec![StaNotice::Associated {
                                assoc_id: body.assoc_id,
                            }],
                        )
                    }
                    _ => (None, vec![]),
                }
            }
            (StaPhase::Associated, FrameType::Data) => {
                (None, vec![StaNotice::DeliverUp(frame.body)])
            }
            (_, FrameType::Deauthentication) => {
                self.phase = StaPhase::Idle;
                self.ap = None;
                self.assoc_id = None;
                self.bssid = None;
                (None, vec![StaNotice::Deauthenticated])
            }
            _ => (None, vec![]),
        }
    }

    /// Uplink user data as a Wi-Fi frame.
    pub fn data_frame(&mut self, sdu: &[u8]) -> Result<MacFrame, ApError> {
        if self.phase != StaPhase::Associated {
            return Err(ApError::NotAssociated);
        }
        let bssid = self.bssid.expect("associated implies bssid");
        let seq = self.take_seq();
        crate::emu::encapsulate(sdu, self.mac, bssid, bssid, seq)
            .map_err(|_| ApError::NotAssociated)
    }
}

/// The macro cell presented as an access point: the Wi-Fi emulation context
/// and the LTE radio wrapped behind [`AbstractAp`].
#[derive(Debug, Clone)]
pub struct EmulatedCellAp {
    pub id: NodeId,
    pub cell: LteCell,
    pub ctx: EnbEmuContext,
    pub load: LoadWindow,
    power: PowerState,
}

impl EmulatedCellAp {
    pub fn new(
        id: NodeId,
        cell: LteCell,
        ctx: EnbEmuContext,
        load_window_us: u64,
    ) -> EmulatedCellAp {
        EmulatedCellAp {
            id,
            cell,
            ctx,
            load: LoadWindow::new(load_window_us),
            power: PowerState::Awake,
        }
    }

    pub fn is_awake(&self) -> bool {
        self.power == PowerState::Awake
    }

    /// Run one emulation-layer event and return the raw action list.
    pub fn emu_step(&mut self, event: EnbEmuEvent) -> Vec<EnbAction> {
        let ctx = std::mem::replace(
            &mut self.ctx,
            EnbEmuContext::new(MacAddress::local(0), "-", 1),
        );
        let (ctx, actions) = enb_emu_step(ctx, event);
        self.ctx = ctx;
        actions
    }

    /// Run one emulation-layer event and turn bearer sends into AP effects.
    pub fn step(&mut self, now_us: u64, event: EnbEmuEvent) -> Vec<ApEffect> {
        let actions = self.emu_step(event);
        let mut effects = Vec::new();
        for action in actions {
            let Some(ue) = action.ue else { continue };
            if let EmuAction::SendOnDrb { drb_id, frame } = action.act {
                match self.send_drb_frame(now_us, &ue, drb_id, &frame) {
                    Some(effect) => effects.push(effect),
                    None => continue,
                }
            }
        }
        effects
    }

    /// Put one emulation-layer frame on a data bearer and account its load.
    pub fn send_drb_frame(
        &mut self,
        now_us: u64,
        ue: &NodeId,
        drb_id: u8,
        frame: &MacFrame,
    ) -> Option<ApEffect> {
        let bytes = crate::frames::encode_frame(frame).ok()?;
        match self
            .cell
            .send_drb(now_us, ue, drb_id, Direction::Downlink, bytes)
        {
            Ok(RadioEmit::DrbPdu { at_us, .. }) => {
                if frame.frame_type == FrameType::Data {
                    self.load.record(at_us, frame.encoded_len() as u64 * 8);
                }
                Some(ApEffect::Air {
                    ue: Some(ue.clone()),
                    frame: frame.clone(),
                    at_us,
                })
            }
            Ok(RadioEmit::Dropped { queue, len_bytes }) => {
                Some(ApEffect::Dropped { queue, len_bytes })
            }
            _ => None,
        }
    }
}

impl AbstractAp for EmulatedCellAp {
    fn report(&self, now_us: u64) -> ApDescriptor {
        ApDescriptor {
            ap_id: self.id.clone(),
            bssid: self.ctx.bssid,
            ssid: self.ctx.ssid.clone(),
            kind: ApKind::LteEmulated,
            capacity_bps: self.cell.capacity_bps(),
            current_load_bps: self.load.rate_bps(now_us),
            station_count: self.ctx.associated_count(),
            power_state: self.power,
        }
    }

    fn stations(&self) -> Vec<NodeId> {
        self.ctx.stations()
    }

    fn deliver_downlink(
        &mut self,
        now_us: u64,
        ue: &NodeId,
        sdu: Vec<u8>,
    ) -> Result<Vec<ApEffect>, ApError> {
        if self.power == PowerState::Asleep {
            return Err(ApError::ApAsleep);
        }
        if self.ctx.entry(ue).map(|e| e.phase) != Some(EnbUePhase::Associated) {
            return Err(ApError::NotAssociated);
        }
        Ok(self.step(
            now_us,
            EnbEmuEvent::DownlinkData {
                ue: ue.clone(),
                sdu,
            },
        ))
    }

    fn set_power(&mut self, now_us: u64, state: PowerState) -> Vec<ApEffect> {
        if state == self.power {
            return vec![];
        }
        if state == PowerState::Awake {
            self.power = PowerState::Awake;
            return vec![];
        }
        let stations = self.stations();
        let effects = self.step(now_us, EnbEmuEvent::PowerDown);
        for ue in &stations {
            self.cell.release(ue);
        }
        self.power = PowerState::Asleep;
        effects
    }
}

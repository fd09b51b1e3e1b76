//! UE-side emulation layer. Takes the place of NAS above RRC: scanning for
//! beacons, probing over SRB1, waiting for the DRB, associating over it, and
//! then moving user data as Wi-Fi frames. Falls back to standard NAS when no
//! beacon shows up inside the detection window.
//!
//! The full transition table lives in `docs/transition-tables.md`; the tests
//! here pin the attach flow edge by edge.

use crate::frames::{build_mgmt, next_seq, BeaconBody, FrameType, MacAddress, MacFrame, MgmtBody};

use super::{encapsulate, EmuAction, EmuError, EmuNotice, TimerKind, UeMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UePhase {
    Scanning,
    RrcConnecting,
    Probing,
    AwaitDrb,
    Associating,
    Associated,
    Sleeping,
    NasFallback,
}

impl UePhase {
    pub fn name(&self) -> &'static str {
        match self {
            UePhase::Scanning => "scanning",
            UePhase::RrcConnecting => "rrc-connecting",
            UePhase::Probing => "probing",
            UePhase::AwaitDrb => "await-drb",
            UePhase::Associating => "associating",
            UePhase::Associated => "associated",
            UePhase::Sleeping => "sleeping",
            UePhase::NasFallback => "nas-fallback",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UeEmuEvent {
    BeaconReceived {
        at_us: u64,
        bssid: MacAddress,
        body: BeaconBody,
    },
    BeaconTimeout,
    RrcConnected,
    PduFromSrb(MacFrame),
    DrbActivated {
        drb_id: u8,
        pdu: Option<MacFrame>,
    },
    PduFromDrb(MacFrame),
    AppData(Vec<u8>),
    SleepRequest,
    WakeRequest,
}

impl UeEmuEvent {
    fn name(&self) -> &'static str {
        match self {
            UeEmuEvent::BeaconReceived { .. } => "beacon-received",
            UeEmuEvent::BeaconTimeout => "beacon-timeout",
            UeEmuEvent::RrcConnected => "rrc-connected",
            UeEmuEvent::PduFromSrb(_) => "pdu-from-srb",
            UeEmuEvent::DrbActivated { .. } => "drb-activated",
            UeEmuEvent::PduFromDrb(_) => "pdu-from-drb",
            UeEmuEvent::AppData(_) => "app-data",
            UeEmuEvent::SleepRequest => "sleep-request",
            UeEmuEvent::WakeRequest => "wake-request",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UeEmuState {
    pub phase: UePhase,
    pub assoc_id: Option<u8>,
    pub drb_id: Option<u8>,
    pub last_beacon_at: Option<u64>,
    pub mac: MacAddress,
    pub ssid: String,
    pub bssid: Option<MacAddress>,
    beacon_timeout_us: u64,
    next_seq: u16,
}

impl UeEmuState {
    pub fn new(mac: MacAddress, ssid: &str, beacon_timeout_us: u64) -> UeEmuState {
        UeEmuState {
            phase: UePhase::Scanning,
            assoc_id: None,
            drb_id: None,
            last_beacon_at: None,
            mac,
            ssid: ssid.to_string(),
            bssid: None,
            beacon_timeout_us,
            next_seq: 0,
        }
    }

    /// Actions to run when the UE powers on: arm the beacon-detection timer.
    pub fn boot(&self) -> Vec<EmuAction> {
        vec![EmuAction::StartTimer {
            timer: TimerKind::BeaconTimeout,
            duration_us: self.beacon_timeout_us,
        }]
    }

    fn take_seq(&mut self) -> u16 {
        let s = self.next_seq;
        self.next_seq = next_seq(s);
        s
    }

    fn bssid(&self) -> MacAddress {
        self.bssid.expect("bssid is set before any frame is built")
    }

    fn reset_association(&mut self) {
        self.phase = UePhase::Scanning;
        self.assoc_id = None;
        self.drb_id = None;
        self.bssid = None;
    }
}

fn unexpected(state: &UeEmuState, event: &UeEmuEvent) -> Vec<EmuAction> {
    vec![EmuAction::Notify(EmuNotice::Unexpected {
        phase: state.phase.name(),
        event: event.name(),
    })]
}

/// One deterministic transition. Returns the successor state and the actions
/// the host must execute; every unknown (state, event) pair leaves the state
/// untouched and raises a diagnostic notice.
pub fn ue_emu_step(mut state: UeEmuState, event: UeEmuEvent) -> (UeEmuState, Vec<EmuAction>) {
    // a UE that fell back to NAS does no emulation work for the rest of the
    // attachment episode
    if state.phase == UePhase::NasFallback {
        return (state, vec![]);
    }

    // beacons are ambient broadcast: outside of the phases that act on them
    // they only refresh the observation log
    if let UeEmuEvent::BeaconReceived { at_us, bssid, body } = &event {
        state.last_beacon_at = Some(*at_us);
        match state.phase {
            UePhase::Scanning => {
                state.phase = UePhase::RrcConnecting;
                state.bssid = Some(*bssid);
                return (
                    state,
                    vec![
                        EmuAction::EnterMode(UeMode::Emulation),
                        EmuAction::Notify(EmuNotice::ConnectRrc),
                    ],
                );
            }
            UePhase::Sleeping => {
                let paged = state.assoc_id.is_some_and(|aid| body.tim.contains(aid));
                let actions = if paged {
                    vec![EmuAction::Notify(EmuNotice::WakeNeeded)]
                } else {
                    vec![]
                };
                return (state, actions);
            }
            _ => return (state, vec![]),
        }
    }

    match (state.phase, event) {
        (UePhase::Scanning, UeEmuEvent::BeaconTimeout) => {
            state.phase = UePhase::NasFallback;
            (state, vec![EmuAction::EnterMode(UeMode::StandardNas)])
        }

        (UePhase::RrcConnecting, UeEmuEvent::RrcConnected) => {
            state.phase = UePhase::Probing;
            let seq = state.take_seq();
            let probe = build_mgmt(
                FrameType::ProbeRequest,
                &MgmtBody::request(&state.ssid),
                MacAddress::BROADCAST,
                state.mac,
                state.bssid(),
                seq,
            )
            .expect("probe request is always well-formed");
            (state, vec![EmuAction::SendOnSrb(probe)])
        }

        (
            UePhase::Probing,
            UeEmuEvent::DrbActivated {
                drb_id,
                pdu: Some(pdu),
            },
        ) if pdu.frame_type == FrameType::ProbeResponse => {
            state.phase = UePhase::Associating;
            state.drb_id = Some(drb_id);
            let actions = vec![send_assoc_request(&mut state, drb_id)];
            (state, actions)
        }

        // probe answered over SRB; the DRB is still on its way
        (UePhase::Probing, UeEmuEvent::PduFromSrb(pdu))
            if pdu.frame_type == FrameType::ProbeResponse =>
        {
            state.phase = UePhase::AwaitDrb;
            (state, vec![])
        }

        (UePhase::AwaitDrb, UeEmuEvent::DrbActivated { drb_id, .. }) => {
            state.phase = UePhase::Associating;
            state.drb_id = Some(drb_id);
            let actions = vec![send_assoc_request(&mut state, drb_id)];
            (state, actions)
        }

        (UePhase::Associating, UeEmuEvent::PduFromDrb(frame))
            if frame.frame_type == FrameType::AssociationResponse =>
        {
            match MgmtBody::decode(&frame.body) {
                Ok(body) if body.status == 0 => {
                    state.phase = UePhase::Associated;
                    state.assoc_id = Some(body.assoc_id);
                    (state, vec![])
                }
                Ok(_) => (
                    state,
                    vec![EmuAction::Notify(EmuNotice::Error(EmuError::NotAssociated))],
                ),
                Err(e) => (state, vec![EmuAction::Notify(EmuNotice::Error(e.into()))]),
            }
        }

        (UePhase::Associated, UeEmuEvent::AppData(sdu)) => {
            let drb_id = state.drb_id.expect("associated implies drb");
            let seq = state.take_seq();
            match encapsulate(&sdu, state.mac, state.bssid(), state.bssid(), seq) {
                Ok(frame) => (state, vec![EmuAction::SendOnDrb { drb_id, frame }]),
                Err(e) => (state, vec![EmuAction::Notify(EmuNotice::Error(e))]),
            }
        }

        // uplink traffic wakes a dozing station
        (UePhase::Sleeping, UeEmuEvent::AppData(sdu)) => {
            state.phase = UePhase::Associated;
            let drb_id = state.drb_id.expect("sleeping implies drb");
            let seq = state.take_seq();
            let mut actions = vec![EmuAction::Notify(EmuNotice::Awake)];
            match encapsulate(&sdu, state.mac, state.bssid(), state.bssid(), seq) {
                Ok(frame) => actions.push(EmuAction::SendOnDrb { drb_id, frame }),
                Err(e) => actions.push(EmuAction::Notify(EmuNotice::Error(e))),
            }
            (state, actions)
        }

        (UePhase::Associated | UePhase::Sleeping, UeEmuEvent::PduFromDrb(frame))
            if frame.frame_type == FrameType::Data =>
        {
            (state, vec![EmuAction::DeliverUp(frame.body)])
        }

        (
            UePhase::Associated | UePhase::Associating | UePhase::Sleeping,
            UeEmuEvent::PduFromDrb(frame),
        ) if frame.frame_type == FrameType::Deauthentication => {
            state.reset_association();
            let window = state.beacon_timeout_us;
            (
                state,
                vec![
                    EmuAction::Notify(EmuNotice::Deauthenticated),
                    EmuAction::StartTimer {
                        timer: TimerKind::BeaconTimeout,
                        duration_us: window,
                    },
                ],
            )
        }

        (UePhase::Associated, UeEmuEvent::SleepRequest) => {
            state.phase = UePhase::Sleeping;
            (state, vec![EmuAction::Notify(EmuNotice::EnteredSleep)])
        }

        (UePhase::Sleeping, UeEmuEvent::SleepRequest) => (state, vec![]),

        (UePhase::Sleeping, UeEmuEvent::WakeRequest) => {
            state.phase = UePhase::Associated;
            (state, vec![EmuAction::Notify(EmuNotice::Awake)])
        }

        // stale beacon timer after a beacon was found: nothing to do
        (_, UeEmuEvent::BeaconTimeout) => (state, vec![]),

        (_, ref event) => {
            let actions = unexpected(&state, event);
            (state, actions)
        }
    }
}

fn send_assoc_request(state: &mut UeEmuState, drb_id: u8) -> EmuAction {
    let seq = state.take_seq();
    let frame = build_mgmt(
        FrameType::AssociationRequest,
        &MgmtBody::request(&state.ssid),
        state.bssid(),
        state.mac,
        state.bssid(),
        seq,
    )
    .expect("association request is always well-formed");
    EmuAction::SendOnDrb { drb_id, frame }
}

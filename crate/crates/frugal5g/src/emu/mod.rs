//! Wi-Fi emulation layers: the shims above RRC/PDCP that make the LTE leg
//! look like a Wi-Fi AP/STA. Both state machines are pure; every side effect
//! they want is returned as an [`EmuAction`] for the event engine to execute,
//! which makes any run replayable step by step.

pub mod enb;
pub mod ue;

use thiserror::Error;

pub use enb::{enb_emu_step, page_via_tim, EnbAction, EnbEmuContext, EnbEmuEvent, EnbUePhase};
pub use ue::{ue_emu_step, UeEmuEvent, UeEmuState, UePhase};

use crate::frames::{FrameError, FrameType, MacAddress, MacFrame, MAX_BODY_LEN};
use crate::lte::Qci;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EmuError {
    #[error("sdu of {0} bytes exceeds the {MAX_BODY_LEN}-byte frame body cap")]
    TooLarge(usize),
    #[error("frame is not a data frame")]
    NotData,
    #[error("no emulation context for this ue")]
    UnknownUe,
    #[error("all 255 association ids are in use")]
    AssocIdExhausted,
    #[error("ue is not associated")]
    NotAssociated,
    #[error(transparent)]
    Frame(#[from] FrameError),
}

/// Attachment mode a UE settles on after scanning for beacons.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UeMode {
    Emulation,
    StandardNas,
}

impl UeMode {
    pub fn name(&self) -> &'static str {
        match self {
            UeMode::Emulation => "emulation",
            UeMode::StandardNas => "standard-nas",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimerKind {
    BeaconTimeout,
}

/// Out-of-band notices a machine raises for its host.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EmuNotice {
    /// Ask the RRC layer to establish a connection to the beaconing eNB.
    ConnectRrc,
    EnteredSleep,
    /// The TIM bit for this station is set; the host should raise
    /// `WakeRequest`.
    WakeNeeded,
    Awake,
    Deauthenticated,
    /// Event had no edge from the current phase; state was left unchanged.
    Unexpected {
        phase: &'static str,
        event: &'static str,
    },
    Error(EmuError),
}

/// The only side-effect channel of the emulation state machines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EmuAction {
    SendOnSrb(MacFrame),
    SendOnDrb { drb_id: u8, frame: MacFrame },
    RequestReconfigure { drb_id: u8, qci: Qci, pdu: MacFrame },
    BroadcastOnMrb(MacFrame),
    DeliverUp(Vec<u8>),
    EnterMode(UeMode),
    StartTimer { timer: TimerKind, duration_us: u64 },
    Notify(EmuNotice),
}

/// Wrap an SDU from the higher layers into a Wi-Fi data frame.
pub fn encapsulate(
    sdu: &[u8],
    src: MacAddress,
    dst: MacAddress,
    bssid: MacAddress,
    seq: u16,
) -> Result<MacFrame, EmuError> {
    if sdu.len() > MAX_BODY_LEN {
        return Err(EmuError::TooLarge(sdu.len()));
    }
    Ok(MacFrame {
        frame_type: FrameType::Data,
        dst,
        src,
        bssid,
        seq,
        body: sdu.to_vec(),
    })
}

/// Extract the SDU from a data frame and hand it to the higher layers.
pub fn decapsulate(frame: &MacFrame) -> Result<Vec<u8>, EmuError> {
    if frame.frame_type != FrameType::Data {
        return Err(EmuError::NotData);
    }
    Ok(frame.body.clone())
}

/// Beacon observation decides the mode: at least one beacon inside the
/// closed window `[now - window, now]` means the Frugal network is present
/// and the emulation layer runs; otherwise the UE falls back to its
/// standard NAS behaviour.
pub fn detect_mode(beacon_log: &[u64], now_us: u64, window_us: u64) -> UeMode {
    debug_assert!(window_us > 0, "detection window must be positive");
    let start = now_us.saturating_sub(window_us);
    if beacon_log.iter().any(|&t| t >= start && t <= now_us) {
        UeMode::Emulation
    } else {
        UeMode::StandardNas
    }
}

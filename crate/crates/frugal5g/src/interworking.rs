//! Northbound face of the access network: the three attachment modes, the
//! unified 802.1x-style authentication every UE goes through regardless of
//! its serving RAT, uplink forwarding rules, and the periodic AN–CN state
//! synchronization.
//!
//! The EAP exchange is a deterministic stub: a fixed four-message shape with
//! a challenge derived from credential and nonce. The message flow is the
//! artifact under test, not the cryptography.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::digest::{digest16, fnv1a_str};
use crate::ids::NodeId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InterworkingError {
    #[error("session is not authenticated")]
    NotAuthenticated,
    #[error("standalone mode has no external network")]
    NoExternalNetwork,
    #[error("sync requires the 5G core mode")]
    ModeMismatch,
    #[error("sync epoch must strictly increase")]
    EpochRegression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetworkMode {
    FiveGCore,
    FixedBroadband,
    Standalone,
}

impl NetworkMode {
    pub fn name(&self) -> &'static str {
        match self {
            NetworkMode::FiveGCore => "five-g-core",
            NetworkMode::FixedBroadband => "fixed-broadband",
            NetworkMode::Standalone => "standalone",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuthState {
    Idle,
    Challenged,
    Authenticated,
    Failed,
}

impl AuthState {
    pub fn name(&self) -> &'static str {
        match self {
            AuthState::Idle => "idle",
            AuthState::Challenged => "challenged",
            AuthState::Authenticated => "authenticated",
            AuthState::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuthMethod {
    Dot1x,
    NasStub,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthSession {
    pub ue: NodeId,
    pub state: AuthState,
    pub method: AuthMethod,
    pub key_digest: [u8; 16],
}

/// Credentials the AN may check against. Scenario-provided; in 5G-core mode
/// it mirrors the core's subscriber data.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Registry {
    creds: BTreeMap<NodeId, String>,
}

impl Registry {
    pub fn new() -> Registry {
        Registry::default()
    }

    pub fn register(&mut self, ue: NodeId, credential: &str) {
        self.creds.insert(ue, credential.to_string());
    }

    pub fn credential(&self, ue: &NodeId) -> Option<&str> {
        self.creds.get(ue).map(String::as_str)
    }

    pub fn ues(&self) -> impl Iterator<Item = &NodeId> {
        self.creds.keys()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuthMsg {
    IdentityRequest,
    IdentityResponse,
    Challenge,
    ChallengeResponse,
}

impl AuthMsg {
    pub fn name(&self) -> &'static str {
        match self {
            AuthMsg::IdentityRequest => "identity-request",
            AuthMsg::IdentityResponse => "identity-response",
            AuthMsg::Challenge => "challenge",
            AuthMsg::ChallengeResponse => "challenge-response",
        }
    }

    /// True when the AN sends this message towards the UE.
    pub fn from_network(&self) -> bool {
        matches!(self, AuthMsg::IdentityRequest | AuthMsg::Challenge)
    }

    /// The fixed four-message exchange, in order.
    pub fn exchange() -> [AuthMsg; 4] {
        [
            AuthMsg::IdentityRequest,
            AuthMsg::IdentityResponse,
            AuthMsg::Challenge,
            AuthMsg::ChallengeResponse,
        ]
    }
}

/// Run the unified authentication for one UE. The message sequence is the
/// same four messages whatever the serving RAT; success depends only on the
/// credential matching the registry.
pub fn authenticate(
    ue: &NodeId,
    presented_credential: &str,
    registry: &Registry,
    nonce: u64,
) -> AuthSession {
    let response = digest16(&[presented_credential.as_bytes(), &nonce.to_le_bytes()]);
    let expected = registry
        .credential(ue)
        .map(|cred| digest16(&[cred.as_bytes(), &nonce.to_le_bytes()]));
    let ok = expected == Some(response);
    AuthSession {
        ue: ue.clone(),
        state: if ok {
            AuthState::Authenticated
        } else {
            AuthState::Failed
        },
        method: AuthMethod::Dot1x,
        key_digest: response,
    }
}

/// Where an uplink packet leaves the AN.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UplinkDst {
    External,
    Local(NodeId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ForwardTarget {
    /// Towards the 5G core, tagged as non-3GPP access.
    Core,
    /// Towards the fixed-broadband gateway.
    Gateway,
    /// Controller-provided local path to a peer UE.
    Local(NodeId),
}

/// Forwarding decision for one uplink packet. Nothing leaves the AN for an
/// unauthenticated session, and nothing external exists in standalone mode.
pub fn forward_uplink(
    session: &AuthSession,
    mode: NetworkMode,
    dst: &UplinkDst,
) -> Result<ForwardTarget, InterworkingError> {
    if session.state != AuthState::Authenticated {
        return Err(InterworkingError::NotAuthenticated);
    }
    match (dst, mode) {
        (UplinkDst::Local(peer), _) => Ok(ForwardTarget::Local(peer.clone())),
        (UplinkDst::External, NetworkMode::Standalone) => Err(InterworkingError::NoExternalNetwork),
        (UplinkDst::External, NetworkMode::FiveGCore) => Ok(ForwardTarget::Core),
        (UplinkDst::External, NetworkMode::FixedBroadband) => Ok(ForwardTarget::Gateway),
    }
}

/// Per-UE session summary exchanged during AN–CN sync.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UeSummary {
    pub subscribed: bool,
    pub auth: AuthState,
    pub serving_ap: Option<NodeId>,
    /// Set on CN records in 5G-core mode: the core tracks the session as a
    /// NAS-level stub while the AN authenticates via 802.1x.
    pub nas_marker: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PeerState {
    pub ues: BTreeMap<NodeId, UeSummary>,
}

impl PeerState {
    pub fn digest(&self) -> u64 {
        let mut s = String::new();
        for (ue, u) in &self.ues {
            let _ = write!(
                s,
                "{ue} {} {} {} {};",
                u.subscribed,
                u.auth.name(),
                u.serving_ap.as_ref().map_or("-", |a| a.as_str()),
                u.nas_marker,
            );
        }
        fnv1a_str(&s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyncRecord {
    pub epoch: u64,
    pub an_digest: u64,
    pub cn_digest: u64,
    pub reconciled: BTreeMap<NodeId, UeSummary>,
}

/// Reconcile AN and CN state: the core wins on subscription data, the AN
/// wins on radio and association state. A UE the core revoked ends up
/// `Failed` on the AN side. Both digests are equal afterwards.
pub fn sync_cn(
    an: &PeerState,
    cn: &PeerState,
    epoch: u64,
    last_epoch: Option<u64>,
    mode: NetworkMode,
) -> Result<SyncRecord, InterworkingError> {
    if mode != NetworkMode::FiveGCore {
        return Err(InterworkingError::ModeMismatch);
    }
    if last_epoch.is_some_and(|last| epoch <= last) {
        return Err(InterworkingError::EpochRegression);
    }
    let mut reconciled: BTreeMap<NodeId, UeSummary> = BTreeMap::new();
    let ue_ids: std::collections::BTreeSet<&NodeId> = an.ues.keys().chain(cn.ues.keys()).collect();
    for ue in ue_ids {
        let an_entry = an.ues.get(ue);
        let cn_entry = cn.ues.get(ue);
        let subscribed = cn_entry
            .map(|e| e.subscribed)
            .or(an_entry.map(|e| e.subscribed))
            .unwrap_or(false);
        let mut auth = an_entry
            .map(|e| e.auth)
            .or(cn_entry.map(|e| e.auth))
            .unwrap_or(AuthState::Idle);
        if !subscribed {
            auth = AuthState::Failed;
        }
        let serving_ap = an_entry
            .and_then(|e| e.serving_ap.clone())
            .or_else(|| cn_entry.and_then(|e| e.serving_ap.clone()));
        reconciled.insert(
            ue.clone(),
            UeSummary {
                subscribed,
                auth,
                serving_ap,
                nas_marker: true,
            },
        );
    }
    let digest = PeerState {
        ues: reconciled.clone(),
    }
    .digest();
    Ok(SyncRecord {
        epoch,
        an_digest: digest,
        cn_digest: digest,
        reconciled,
    })
}

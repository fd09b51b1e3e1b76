//! eNB-side emulation layer: answers probe requests by activating a DRB that
//! carries the probe response, grants association ids, moves downlink data,
//! queues for sleeping stations and pages them through the beacon TIM.

use std::collections::{BTreeMap, VecDeque};

use crate::frames::{
    build_beacon, build_mgmt, next_seq, FrameType, MacAddress, MacFrame, MgmtBody, Tim,
};
use crate::ids::NodeId;
use crate::lte::{qci_for, Qci, ServiceClass};

use super::{encapsulate, EmuAction, EmuError, EmuNotice};

/// DRB id used for the single emulation data bearer of each UE.
pub const EMU_DRB_ID: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnbUePhase {
    ProbeSeen,
    DrbOffered,
    Associated,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnbUeEntry {
    pub phase: EnbUePhase,
    pub drb_id: u8,
    pub qci: Qci,
    pub assoc_id: u8,
    pub mac: MacAddress,
    pub sleeping: bool,
    pending_dl: VecDeque<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EnbEmuEvent {
    PduFromSrb {
        ue: NodeId,
        frame: MacFrame,
        service_class: ServiceClass,
    },
    ReconfigComplete {
        ue: NodeId,
        drb_id: u8,
    },
    PduFromDrb {
        ue: NodeId,
        frame: MacFrame,
    },
    DownlinkData {
        ue: NodeId,
        sdu: Vec<u8>,
    },
    BeaconTick,
    SleepStateChanged {
        ue: NodeId,
        sleeping: bool,
    },
    /// Controller-ordered detach: deauthenticate and forget the station.
    DetachUe {
        ue: NodeId,
    },
    /// Cell going to sleep: deauthenticate everyone.
    PowerDown,
}

impl EnbEmuEvent {
    fn name(&self) -> &'static str {
        match self {
            EnbEmuEvent::PduFromSrb { .. } => "pdu-from-srb",
            EnbEmuEvent::ReconfigComplete { .. } => "reconfig-complete",
            EnbEmuEvent::PduFromDrb { .. } => "pdu-from-drb",
            EnbEmuEvent::DownlinkData { .. } => "downlink-data",
            EnbEmuEvent::BeaconTick => "beacon-tick",
            EnbEmuEvent::SleepStateChanged { .. } => "sleep-state-changed",
            EnbEmuEvent::DetachUe { .. } => "detach-ue",
            EnbEmuEvent::PowerDown => "power-down",
        }
    }
}

/// An [`EmuAction`] plus the station it concerns, since the eNB serves many.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnbAction {
    pub ue: Option<NodeId>,
    pub act: EmuAction,
}

impl EnbAction {
    fn on(ue: &NodeId, act: EmuAction) -> EnbAction {
        EnbAction {
            ue: Some(ue.clone()),
            act,
        }
    }

    fn global(act: EmuAction) -> EnbAction {
        EnbAction { ue: None, act }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnbEmuContext {
    pub bssid: MacAddress,
    pub ssid: String,
    pub beacon_interval_tu: u16,
    entries: BTreeMap<NodeId, EnbUeEntry>,
    next_seq: u16,
}

impl EnbEmuContext {
    pub fn new(bssid: MacAddress, ssid: &str, beacon_interval_tu: u16) -> EnbEmuContext {
        EnbEmuContext {
            bssid,
            ssid: ssid.to_string(),
            beacon_interval_tu,
            entries: BTreeMap::new(),
            next_seq: 0,
        }
    }

    pub fn entry(&self, ue: &NodeId) -> Option<&EnbUeEntry> {
        self.entries.get(ue)
    }

    pub fn associated_count(&self) -> usize {
        self.entries
            .values()
            .filter(|e| e.phase == EnbUePhase::Associated)
            .count()
    }

    pub fn stations(&self) -> Vec<NodeId> {
        self.entries
            .iter()
            .filter(|(_, e)| e.phase == EnbUePhase::Associated)
            .map(|(ue, _)| ue.clone())
            .collect()
    }

    fn free_assoc_id(&self) -> Option<u8> {
        let used: Vec<u8> = self.entries.values().map(|e| e.assoc_id).collect();
        (1..=255).find(|id| !used.contains(id))
    }

    fn take_seq(&mut self) -> u16 {
        let s = self.next_seq;
        self.next_seq = next_seq(s);
        s
    }

    fn mgmt_to(
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
        .expect("enb management frames are always well-formed")
    }
}

/// Build the TIM for the next beacon: exactly the association ids of the
/// listed stations, each of which must be associated and sleeping.
pub fn page_via_tim(
    ctx: &EnbEmuContext,
    sleeping_with_pending: &[NodeId],
) -> Result<Tim, EmuError> {
    let mut tim = Tim::new();
    for ue in sleeping_with_pending {
        let entry = ctx.entries.get(ue).ok_or(EmuError::UnknownUe)?;
        if entry.phase != EnbUePhase::Associated || !entry.sleeping {
            return Err(EmuError::NotAssociated);
        }
        tim.insert(entry.assoc_id)?;
    }
    Ok(tim)
}

fn diag(ue: Option<&NodeId>, notice: EmuNotice) -> Vec<EnbAction> {
    vec![EnbAction {
        ue: ue.cloned(),
        act: EmuAction::Notify(notice),
    }]
}

/// One deterministic transition of the eNB-side machine.
pub fn enb_emu_step(mut ctx: EnbEmuContext, event: EnbEmuEvent) -> (EnbEmuContext, Vec<EnbAction>) {
    let ev_name = event.name();
    match event {
        EnbEmuEvent::PduFromSrb {
            ue,
            frame,
            service_class,
        } => {
            if frame.frame_type != FrameType::ProbeRequest {
                return (
                    ctx,
                    diag(
                        Some(&ue),
                        EmuNotice::Unexpected {
                            phase: "srb",
                            event: ev_name,
                        },
                    ),
                );
            }
            if ctx.entries.contains_key(&ue) {
                return (
                    ctx,
                    diag(
                        Some(&ue),
                        EmuNotice::Unexpected {
                            phase: "probe-seen",
                            event: ev_name,
                        },
                    ),
                );
            }
            let Some(assoc_id) = ctx.free_assoc_id() else {
                return (
                    ctx,
                    diag(Some(&ue), EmuNotice::Error(EmuError::AssocIdExhausted)),
                );
            };
            let qci = qci_for(service_class);
            ctx.entries.insert(
                ue.clone(),
                EnbUeEntry {
                    phase: EnbUePhase::ProbeSeen,
                    drb_id: EMU_DRB_ID,
                    qci,
                    assoc_id,
                    mac: frame.src,
                    sleeping: false,
                    pending_dl: VecDeque::new(),
                },
            );
            let response = ctx.mgmt_to(FrameType::ProbeResponse, frame.src, 0, 0);
            let actions = vec![EnbAction::on(
                &ue,
                EmuAction::RequestReconfigure {
                    drb_id: EMU_DRB_ID,
                    qci,
                    pdu: response,
                },
            )];
            (ctx, actions)
        }

        EnbEmuEvent::ReconfigComplete { ue, drb_id } => {
            let Some(entry) = ctx.entries.get_mut(&ue) else {
                return (ctx, diag(Some(&ue), EmuNotice::Error(EmuError::UnknownUe)));
            };
            if entry.phase != EnbUePhase::ProbeSeen || entry.drb_id != drb_id {
                return (
                    ctx,
                    diag(
                        Some(&ue),
                        EmuNotice::Unexpected {
                            phase: "drb-offered",
                            event: ev_name,
                        },
                    ),
                );
            }
            entry.phase = EnbUePhase::DrbOffered;
            (ctx, vec![])
        }

        EnbEmuEvent::PduFromDrb { ue, frame } => {
            let Some((phase, mac, assoc_id)) =
                ctx.entries.get(&ue).map(|e| (e.phase, e.mac, e.assoc_id))
            else {
                return (ctx, diag(Some(&ue), EmuNotice::Error(EmuError::UnknownUe)));
            };
            match (phase, frame.frame_type) {
                (EnbUePhase::DrbOffered, FrameType::AssociationRequest) => {
                    ctx.entries.get_mut(&ue).expect("entry exists").phase = EnbUePhase::Associated;
                    let response = ctx.mgmt_to(FrameType::AssociationResponse, mac, 0, assoc_id);
                    let actions = vec![EnbAction::on(
                        &ue,
                        EmuAction::SendOnDrb {
                            drb_id: EMU_DRB_ID,
                            frame: response,
                        },
                    )];
                    (ctx, actions)
                }
                (EnbUePhase::Associated, FrameType::Data) => {
                    let actions = vec![EnbAction::on(&ue, EmuAction::DeliverUp(frame.body))];
                    (ctx, actions)
                }
                _ => {
                    let actions = diag(
                        Some(&ue),
                        EmuNotice::Unexpected {
                            phase: phase_name(phase),
                            event: ev_name,
                        },
                    );
                    (ctx, actions)
                }
            }
        }

        EnbEmuEvent::DownlinkData { ue, sdu } => {
            let Some(entry) = ctx.entries.get_mut(&ue) else {
                return (ctx, diag(Some(&ue), EmuNotice::Error(EmuError::UnknownUe)));
            };
            if entry.phase != EnbUePhase::Associated {
                return (
                    ctx,
                    diag(Some(&ue), EmuNotice::Error(EmuError::NotAssociated)),
                );
            }
            if entry.sleeping {
                entry.pending_dl.push_back(sdu);
                return (ctx, vec![]);
            }
            let (mac, drb_id) = (entry.mac, entry.drb_id);
            let actions = match data_frame(&mut ctx, mac, &sdu) {
                Ok(frame) => vec![EnbAction::on(&ue, EmuAction::SendOnDrb { drb_id, frame })],
                Err(e) => diag(Some(&ue), EmuNotice::Error(e)),
            };
            (ctx, actions)
        }

        EnbEmuEvent::BeaconTick => {
            let paged: Vec<NodeId> = ctx
                .entries
                .iter()
                .filter(|(_, e)| {
                    e.phase == EnbUePhase::Associated && e.sleeping && !e.pending_dl.is_empty()
                })
                .map(|(ue, _)| ue.clone())
                .collect();
            let tim = page_via_tim(&ctx, &paged).expect("paged set is associated and sleeping");
            let seq = ctx.take_seq();
            let beacon = build_beacon(&ctx.ssid, ctx.beacon_interval_tu, &tim, ctx.bssid, seq)
                .expect("beacon is always well-formed");
            (
                ctx,
                vec![EnbAction::global(EmuAction::BroadcastOnMrb(beacon))],
            )
        }

        EnbEmuEvent::SleepStateChanged { ue, sleeping } => {
            let Some(entry) = ctx.entries.get_mut(&ue) else {
                return (ctx, diag(Some(&ue), EmuNotice::Error(EmuError::UnknownUe)));
            };
            if entry.phase != EnbUePhase::Associated {
                return (
                    ctx,
                    diag(Some(&ue), EmuNotice::Error(EmuError::NotAssociated)),
                );
            }
            entry.sleeping = sleeping;
            if sleeping {
                return (ctx, vec![]);
            }
            // waking: drain the pending queue in arrival order
            let pending: Vec<Vec<u8>> = entry.pending_dl.drain(..).collect();
            let (mac, drb_id) = (entry.mac, entry.drb_id);
            let mut actions = Vec::new();
            for sdu in pending {
                match data_frame(&mut ctx, mac, &sdu) {
                    Ok(frame) => {
                        actions.push(EnbAction::on(&ue, EmuAction::SendOnDrb { drb_id, frame }))
                    }
                    Err(e) => actions.extend(diag(Some(&ue), EmuNotice::Error(e))),
                }
            }
            (ctx, actions)
        }

        EnbEmuEvent::DetachUe { ue } => {
            let Some(entry) = ctx.entries.remove(&ue) else {
                return (ctx, diag(Some(&ue), EmuNotice::Error(EmuError::UnknownUe)));
            };
            let mut actions = Vec::new();
            if entry.phase == EnbUePhase::Associated {
                let deauth = ctx.mgmt_to(FrameType::Deauthentication, entry.mac, 0, entry.assoc_id);
                actions.push(EnbAction::on(
                    &ue,
                    EmuAction::SendOnDrb {
                        drb_id: entry.drb_id,
                        frame: deauth,
                    },
                ));
            }
            (ctx, actions)
        }

        EnbEmuEvent::PowerDown => {
            let entries = std::mem::take(&mut ctx.entries);
            let mut actions = Vec::new();
            for (ue, entry) in entries {
                if entry.phase == EnbUePhase::Associated {
                    let deauth =
                        ctx.mgmt_to(FrameType::Deauthentication, entry.mac, 0, entry.assoc_id);
                    actions.push(EnbAction::on(
                        &ue,
                        EmuAction::SendOnDrb {
                            drb_id: entry.drb_id,
                            frame: deauth,
                        },
                    ));
                }
            }
            (ctx, actions)
        }
    }
}

fn phase_name(phase: EnbUePhase) -> &'static str {
    match phase {
        EnbUePhase::ProbeSeen => "probe-seen",
        EnbUePhase::DrbOffered => "drb-offered",
        EnbUePhase::Associated => "associated",
    }
}

fn data_frame(ctx: &mut EnbEmuContext, dst: MacAddress, sdu: &[u8]) -> Result<MacFrame, EmuError> {
    let seq = ctx.take_seq();
    encapsulate(sdu, ctx.bssid, dst, ctx.bssid, seq)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ue(n: u32) -> NodeId {
        NodeId(format!("ue{n}"))
    }

    fn probe_from(n: u32) -> MacFrame {
        build_mgmt(
            FrameType::ProbeRequest,
            &MgmtBody::request("frugal5g"),
            MacAddress::BROADCAST,
            MacAddress::local(n),
            MacAddress::BROADCAST,
            0,
        )
        .unwrap()
    }

    fn assoc_req_from(n: u32, bssid: MacAddress) -> MacFrame {
        build_mgmt(
            FrameType::AssociationRequest,
            &MgmtBody::request("frugal5g"),
            bssid,
            MacAddress::local(n),
            bssid,
            1,
        )
        .unwrap()
    }

    fn fresh() -> EnbEmuContext {
        EnbEmuContext::new(MacAddress::local(100), "frugal5g", 100)
    }

    fn attach(ctx: EnbEmuContext, n: u32) -> EnbEmuContext {
        let bssid = ctx.bssid;
        let (ctx, _) = enb_emu_step(
            ctx,
            EnbEmuEvent::PduFromSrb {
                ue: ue(n),
                frame: probe_from(n),
                service_class: ServiceClass::Background,
            },
        );
        let (ctx, _) = enb_emu_step(
            ctx,
            EnbEmuEvent::ReconfigComplete {
                ue: ue(n),
                drb_id: EMU_DRB_ID,
            },
        );
        let (ctx, _) = enb_emu_step(
            ctx,
            EnbEmuEvent::PduFromDrb {
                ue: ue(n),
                frame: assoc_req_from(n, bssid),
            },
        );
        ctx
    }

    #[test]
    fn probe_request_yields_one_reconfigure_with_probe_response() {
        let (ctx, actions) = enb_emu_step(
            fresh(),
            EnbEmuEvent::PduFromSrb {
                ue: ue(1),
                frame: probe_from(1),
                service_class: ServiceClass::Voice,
            },
        );
        match &actions[..] {
            [EnbAction {
                ue: Some(u),
                act: EmuAction::RequestReconfigure { drb_id, qci, pdu },
            }] => {
                assert_eq!(u, &ue(1));
                assert_eq!(*drb_id, EMU_DRB_ID);
                assert_eq!(qci.value(), 1); // voice
                assert_eq!(pdu.frame_type, FrameType::ProbeResponse);
            }
            other => panic!("unexpected actions {other:?}"),
        }
        assert_eq!(ctx.entry(&ue(1)).unwrap().phase, EnbUePhase::ProbeSeen);
    }

    #[test]
    fn association_before_reconfig_complete_is_unexpected() {
        let bssid = MacAddress::local(100);
        let (ctx, _) = enb_emu_step(
            fresh(),
            EnbEmuEvent::PduFromSrb {
                ue: ue(1),
                frame: probe_from(1),
                service_class: ServiceClass::Background,
            },
        );
        let (ctx, actions) = enb_emu_step(
            ctx,
            EnbEmuEvent::PduFromDrb {
                ue: ue(1),
                frame: assoc_req_from(1, bssid),
            },
        );
        assert!(matches!(
            actions[0].act,
            EmuAction::Notify(EmuNotice::Unexpected { .. })
        ));
        assert_eq!(ctx.entry(&ue(1)).unwrap().phase, EnbUePhase::ProbeSeen);
    }

    #[test]
    fn full_attach_grants_a_fresh_assoc_id() {
        let ctx = attach(fresh(), 1);
        let entry = ctx.entry(&ue(1)).unwrap();
        assert_eq!(entry.phase, EnbUePhase::Associated);
        assert_eq!(entry.assoc_id, 1);
        let ctx = attach(ctx, 2);
        assert_eq!(ctx.entry(&ue(2)).unwrap().assoc_id, 2);
        assert_eq!(ctx.associated_count(), 2);
    }

    #[test]
    fn assoc_id_space_exhausts_at_255() {
        let mut ctx = fresh();
        for n in 1..=255 {
            ctx = attach(ctx, n);
        }
        assert_eq!(ctx.associated_count(), 255);
        let (_, actions) = enb_emu_step(
            ctx,
            EnbEmuEvent::PduFromSrb {
                ue: ue(256),
                frame: probe_from(256),
                service_class: ServiceClass::Background,
            },
        );
        assert!(matches!(
            actions[0].act,
            EmuAction::Notify(EmuNotice::Error(EmuError::AssocIdExhausted))
        ));
    }

    #[test]
    fn downlink_for_unknown_ue_is_an_error() {
        let (_, actions) = enb_emu_step(
            fresh(),
            EnbEmuEvent::DownlinkData {
                ue: ue(9),
                sdu: vec![1],
            },
        );
        assert!(matches!(
            actions[0].act,
            EmuAction::Notify(EmuNotice::Error(EmuError::UnknownUe))
        ));
    }

    #[test]
    fn sleeping_station_gets_queued_data_and_a_tim_bit() {
        let ctx = attach(fresh(), 1);
        let (ctx, actions) = enb_emu_step(
            ctx,
            EnbEmuEvent::SleepStateChanged {
                ue: ue(1),
                sleeping: true,
            },
        );
        assert!(actions.is_empty());
        let (ctx, actions) = enb_emu_step(
            ctx,
            EnbEmuEvent::DownlinkData {
                ue: ue(1),
                sdu: vec![0xaa],
            },
        );
        assert!(actions.is_empty(), "data for a sleeping ue is queued");

        let (ctx, actions) = enb_emu_step(ctx, EnbEmuEvent::BeaconTick);
        match &actions[..] {
            [EnbAction {
                ue: None,
                act: EmuAction::BroadcastOnMrb(beacon),
            }] => {
                let body = crate::frames::BeaconBody::decode(&beacon.body).unwrap();
                assert_eq!(body.tim.ids().collect::<Vec<_>>(), vec![1]);
            }
            other => panic!("unexpected actions {other:?}"),
        }

        // wake: the pending queue drains in fifo order
        let (ctx, _) = enb_emu_step(
            ctx,
            EnbEmuEvent::DownlinkData {
                ue: ue(1),
                sdu: vec![0xbb],
            },
        );
        let (_, actions) = enb_emu_step(
            ctx,
            EnbEmuEvent::SleepStateChanged {
                ue: ue(1),
                sleeping: false,
            },
        );
        let bodies: Vec<Vec<u8>> = actions
            .iter()
            .map(|a| match &a.act {
                EmuAction::SendOnDrb { frame, .. } => frame.body.clone(),
                other => panic!("unexpected action {other:?}"),
            })
            .collect();
        assert_eq!(bodies, vec![vec![0xaa], vec![0xbb]]);
    }

    #[test]
    fn page_via_tim_rejects_awake_stations() {
        let ctx = attach(fresh(), 1);
        assert_eq!(page_via_tim(&ctx, &[ue(1)]), Err(EmuError::NotAssociated));
        assert_eq!(page_via_tim(&ctx, &[]), Ok(Tim::new()));
    }

    #[test]
    fn empty_tim_when_nothing_pending() {
        let ctx = attach(fresh(), 1);
        let (_, actions) = enb_emu_step(ctx, EnbEmuEvent::BeaconTick);
        match &actions[0].act {
            EmuAction::BroadcastOnMrb(beacon) => {
                let body = crate::frames::BeaconBody::decode(&beacon.body).unwrap();
                assert!(body.tim.is_empty());
            }
            other => panic!("unexpected action {other:?}"),
        }
    }

    #[test]
    fn power_down_deauthenticates_every_station() {
        let ctx = attach(attach(fresh(), 1), 2);
        let (ctx, actions) = enb_emu_step(ctx, EnbEmuEvent::PowerDown);
        assert_eq!(actions.len(), 2);
        for a in &actions {
            match &a.act {
                EmuAction::SendOnDrb { frame, .. } => {
                    assert_eq!(frame.frame_type, FrameType::Deauthentication)
                }
                other => panic!("unexpected action {other:?}"),
            }
        }
        assert_eq!(ctx.associated_count(), 0);
    }

    #[test]
    fn replay_gives_identical_results() {
        let events = || {
            vec![
                EnbEmuEvent::PduFromSrb {
                    ue: ue(1),
                    frame: probe_from(1),
                    service_class: ServiceClass::Interactive,
                },
                EnbEmuEvent::ReconfigComplete {
                    ue: ue(1),
                    drb_id: EMU_DRB_ID,
                },
                EnbEmuEvent::PduFromDrb {
                    ue: ue(1),
                    frame: assoc_req_from(1, MacAddress::local(100)),
                },
                EnbEmuEvent::DownlinkData {
                    ue: ue(1),
                    sdu: vec![1, 2],
                },
                EnbEmuEvent::BeaconTick,
            ]
        };
        let run = |mut ctx: EnbEmuContext| {
            let mut log = Vec::new();
            for ev in events() {
                let (next, actions) = enb_emu_step(ctx, ev);
                log.push((next.clone(), actions));
                ctx = next;
            }
            log
        };
        assert_eq!(run(fresh()), run(fresh()));
    }

    #[test]
    fn detach_frees_the_assoc_id() {
        let ctx = attach(fresh(), 1);
        let (ctx, actions) = enb_emu_step(ctx, EnbEmuEvent::DetachUe { ue: ue(1) });
        assert!(matches!(actions[0].act, EmuAction::SendOnDrb { .. }));
        let ctx = attach(ctx, 2);
        // id 1 is free again
        assert_eq!(ctx.entry(&ue(2)).unwrap().assoc_id, 1);
    }
}

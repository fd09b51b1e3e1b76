//! Simplified 802.11-style MAC frames carried by both radio legs.
//!
//! Wire layout (multi-byte fields little-endian):
//! `byte0 = (subtype << 4) | (type << 2) | version`, version 0,
//! type 0b00 = management / 0b10 = data; `byte1 = 0` (reserved);
//! `addr1 = dst`, `addr2 = src`, `addr3 = bssid` (6 bytes each);
//! `seq_ctrl = seq << 4` (2 bytes); `body_len` (2 bytes); body.
//! Header is 22 bytes, so a frame is always `22 + 2 + body_len` bytes.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// Largest body a frame may carry, mirroring the classic 802.11 MSDU limit.
pub const MAX_BODY_LEN: usize = 2304;

/// Fixed part of the wire form: frame control, addresses and sequence control.
pub const HEADER_LEN: usize = 22;

/// Sequence numbers live in 0..=4095 and wrap.
pub const SEQ_MODULUS: u16 = 4096;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrameError {
    #[error("frame invariant violated: {0}")]
    InvariantViolation(String),
    #[error("truncated buffer: need {needed} bytes, have {have}")]
    Truncated { needed: usize, have: usize },
    #[error("unknown type/subtype bits 0x{0:02x}")]
    UnknownType(u8),
}

/// A 48-bit MAC address. Simulated nodes use locally administered unicast
/// addresses (bit 1 of octet 0 set, bit 0 clear).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MacAddress(pub [u8; 6]);

impl MacAddress {
    pub const BROADCAST: MacAddress = MacAddress([0xff; 6]);

    /// Locally administered unicast address for the n-th simulated node.
    pub fn local(index: u32) -> MacAddress {
        let b = index.to_be_bytes();
        MacAddress([0x02, 0x00, b[0], b[1], b[2], b[3]])
    }

    pub fn is_broadcast(&self) -> bool {
        self.0 == [0xff; 6]
    }

    /// Unicast means the group bit (bit 0 of octet 0) is clear.
    pub fn is_unicast(&self) -> bool {
        self.0[0] & 0x01 == 0
    }
}

impl fmt::Display for MacAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = &self.0;
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            b[0], b[1], b[2], b[3], b[4], b[5]
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FrameType {
    Beacon,
    ProbeRequest,
    ProbeResponse,
    AssociationRequest,
    AssociationResponse,
    Deauthentication,
    Data,
}

impl FrameType {
    pub fn is_management(&self) -> bool {
        !matches!(self, FrameType::Data)
    }

    /// Lower-case name used in trace records.
    pub fn name(&self) -> &'static str {
        match self {
            FrameType::Beacon => "beacon",
            FrameType::ProbeRequest => "probe-request",
            FrameType::ProbeResponse => "probe-response",
            FrameType::AssociationRequest => "association-request",
            FrameType::AssociationResponse => "association-response",
            FrameType::Deauthentication => "deauthentication",
            FrameType::Data => "data",
        }
    }

    fn to_bits(self) -> (u8, u8) {
        // (type, subtype)
        match self {
            FrameType::AssociationRequest => (0b00, 0b0000),
            FrameType::AssociationResponse => (0b00, 0b0001),
            FrameType::ProbeRequest => (0b00, 0b0100),
            FrameType::ProbeResponse => (0b00, 0b0101),
            FrameType::Beacon => (0b00, 0b1000),
            FrameType::Deauthentication => (0b00, 0b1100),
            FrameType::Data => (0b10, 0b0000),
        }
    }

    fn from_bits(ty: u8, subtype: u8) -> Option<FrameType> {
        match (ty, subtype) {
            (0b00, 0b0000) => Some(FrameType::AssociationRequest),
            (0b00, 0b0001) => Some(FrameType::AssociationResponse),
            (0b00, 0b0100) => Some(FrameType::ProbeRequest),
            (0b00, 0b0101) => Some(FrameType::ProbeResponse),
            (0b00, 0b1000) => Some(FrameType::Beacon),
            (0b00, 0b1100) => Some(FrameType::Deauthentication),
            (0b10, 0b0000) => Some(FrameType::Data),
            _ => None,
        }
    }
}

/// One MAC frame, the lingua franca of both RATs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MacFrame {
    pub frame_type: FrameType,
    pub dst: MacAddress,
    pub src: MacAddress,
    pub bssid: MacAddress,
    pub seq: u16,
    pub body: Vec<u8>,
}

impl MacFrame {
    /// Checks the structural rules every frame must satisfy before it may
    /// touch a wire: body cap, sequence range, and the address rules for
    /// broadcast management frames and data frames.
    pub fn validate(&self) -> Result<(), FrameError> {
        if self.body.len() > MAX_BODY_LEN {
            return Err(FrameError::InvariantViolation(format!(
                "body length {} exceeds {}",
                self.body.len(),
                MAX_BODY_LEN
            )));
        }
        if self.seq >= SEQ_MODULUS {
            return Err(FrameError::InvariantViolation(format!(
                "seq {} out of range",
                self.seq
            )));
        }
        match self.frame_type {
            FrameType::Beacon | FrameType::ProbeRequest => {
                if !self.dst.is_broadcast() {
                    return Err(FrameError::InvariantViolation(format!(
                        "{} dst must be broadcast",
                        self.frame_type.name()
                    )));
                }
            }
            FrameType::Data if !self.dst.is_unicast() || !self.src.is_unicast() => {
                return Err(FrameError::InvariantViolation(
                    "data frames require unicast src and dst".into(),
                ));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + 2 + self.body.len()
    }
}

/// Advance a sequence counter, wrapping modulo 4096.
pub fn next_seq(seq: u16) -> u16 {
    (seq + 1) % SEQ_MODULUS
}

/// Encode a frame into its canonical wire form.
pub fn encode_frame(frame: &MacFrame) -> Result<Vec<u8>, FrameError> {
    frame.validate()?;
    let (ty, subtype) = frame.frame_type.to_bits();
    let mut out = Vec::with_capacity(frame.encoded_len());
    out.push((subtype << 4) | (ty << 2));
    out.push(0);
    out.extend_from_slice(&frame.dst.0);
    out.extend_from_slice(&frame.src.0);
    out.extend_from_slice(&frame.bssid.0);
    out.extend_from_slice(&(frame.seq << 4).to_le_bytes());
    out.extend_from_slice(&(frame.body.len() as u16).to_le_bytes());
    out.extend_from_slice(&frame.body);
    Ok(out)
}

/// Decode a wire buffer. Inverse of [`encode_frame`] on its image; anything
/// else is rejected with a defined error, never a panic.
pub fn decode_frame(bytes: &[u8]) -> Result<MacFrame, FrameError> {
    if bytes.len() < HEADER_LEN + 2 {
        return Err(FrameError::Truncated {
            needed: HEADER_LEN + 2,
            have: bytes.len(),
        });
    }
    let b0 = bytes[0];
    if b0 & 0b11 != 0 {
        // only protocol version 0 is assigned
        return Err(FrameError::UnknownType(b0));
    }
    let frame_type =
        FrameType::from_bits((b0 >> 2) & 0b11, b0 >> 4).ok_or(FrameError::UnknownType(b0))?;
    if bytes[1] != 0 {
        return Err(FrameError::InvariantViolation(format!(
            "reserved byte1 is 0x{:02x}",
            bytes[1]
        )));
    }
    let addr = |i: usize| {
        let mut a = [0u8; 6];
        a.copy_from_slice(&bytes[i..i + 6]);
        MacAddress(a)
    };
    let dst = addr(2);
    let src = addr(8);
    let bssid = addr(14);
    let seq_ctrl = u16::from_le_bytes([bytes[20], bytes[21]]);
    if seq_ctrl & 0x000f != 0 {
        return Err(FrameError::InvariantViolation(
            "fragment bits in seq_ctrl must be zero".into(),
        ));
    }
    let body_len = u16::from_le_bytes([bytes[22], bytes[23]]) as usize;
    let total = HEADER_LEN + 2 + body_len;
    if bytes.len() < total {
        return Err(FrameError::Truncated {
            needed: total,
            have: bytes.len(),
        });
    }
    if bytes.len() > total {
        return Err(FrameError::InvariantViolation(format!(
            "{} trailing bytes after declared body",
            bytes.len() - total
        )));
    }
    let frame = MacFrame {
        frame_type,
        dst,
        src,
        bssid,
        seq: seq_ctrl >> 4,
        body: bytes[HEADER_LEN + 2..total].to_vec(),
    };
    frame.validate()?;
    Ok(frame)
}

/// Traffic indication map: which association IDs (1..=255) have pending
/// downlink data. Encoded as the shortest bitmap covering the highest set id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Tim(BTreeSet<u8>);

impl Tim {
    pub fn new() -> Tim {
        Tim::default()
    }

    pub fn insert(&mut self, assoc_id: u8) -> Result<(), FrameError> {
        if assoc_id == 0 {
            return Err(FrameError::InvariantViolation(
                "association id 0 is not assignable".into(),
            ));
        }
        self.0.insert(assoc_id);
        Ok(())
    }

    pub fn contains(&self, assoc_id: u8) -> bool {
        self.0.contains(&assoc_id)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = u8> + '_ {
        self.0.iter().copied()
    }

    fn encode_into(&self, out: &mut Vec<u8>) {
        match self.0.iter().next_back() {
            None => out.push(0),
            Some(&max) => {
                let nbytes = (max as usize) / 8 + 1;
                out.push(nbytes as u8);
                let start = out.len();
                out.resize(start + nbytes, 0);
                for &id in &self.0 {
                    out[start + (id as usize) / 8] |= 1 << (id % 8);
                }
            }
        }
    }

    fn decode(bytes: &[u8]) -> Result<Tim, FrameError> {
        let mut set = BTreeSet::new();
        for (i, byte) in bytes.iter().enumerate() {
            for bit in 0..8 {
                if byte & (1 << bit) != 0 {
                    let id = (i * 8 + bit) as u16;
                    if id == 0 {
                        return Err(FrameError::InvariantViolation(
                            "tim bit set for association id 0".into(),
                        ));
                    }
                    set.insert(id as u8);
                }
            }
        }
        // reject non-minimal encodings so decode(encode(x)) is the identity
        if let Some(last) = bytes.last() {
            if *last == 0 {
                return Err(FrameError::InvariantViolation(
                    "tim bitmap has trailing zero byte".into(),
                ));
            }
        }
        Ok(Tim(set))
    }
}

impl FromIterator<u8> for Tim {
    fn from_iter<I: IntoIterator<Item = u8>>(iter: I) -> Tim {
        let mut tim = Tim::new();
        for id in iter {
            tim.insert(id).expect("association id 0 in Tim literal");
        }
        tim
    }
}

/// Body of a beacon frame. `beacon_interval` counts time units of 1.024 ms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeaconBody {
    pub ssid: String,
    pub beacon_interval: u16,
    pub capabilities: u16,
    pub tim: Tim,
}

impl BeaconBody {
    pub fn validate(&self) -> Result<(), FrameError> {
        validate_ssid(&self.ssid)?;
        if self.beacon_interval == 0 {
            return Err(FrameError::InvariantViolation(
                "beacon interval must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn encode(&self) -> Result<Vec<u8>, FrameError> {
        self.validate()?;
        let mut out = Vec::with_capacity(6 + self.ssid.len() + 32);
        out.push(self.ssid.len() as u8);
        out.extend_from_slice(self.ssid.as_bytes());
        out.extend_from_slice(&self.beacon_interval.to_le_bytes());
        out.extend_from_slice(&self.capabilities.to_le_bytes());
        self.tim.encode_into(&mut out);
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<BeaconBody, FrameError> {
        let (ssid, rest) = split_ssid(bytes)?;
        if rest.len() < 5 {
            return Err(FrameError::Truncated {
                needed: bytes.len() - rest.len() + 5,
                have: bytes.len(),
            });
        }
        let beacon_interval = u16::from_le_bytes([rest[0], rest[1]]);
        let capabilities = u16::from_le_bytes([rest[2], rest[3]]);
        let tim_len = rest[4] as usize;
        let tim_bytes = &rest[5..];
        if tim_bytes.len() != tim_len {
            return Err(FrameError::Truncated {
                needed: bytes.len() - tim_bytes.len() + tim_len,
                have: bytes.len(),
            });
        }
        let body = BeaconBody {
            ssid,
            beacon_interval,
            capabilities,
            tim: Tim::decode(tim_bytes)?,
        };
        body.validate()?;
        Ok(body)
    }
}

/// Body of the non-beacon management frames: the SSID, a 16-bit status code
/// (0 = success) and the association id granted by an association response
/// (0 everywhere else).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MgmtBody {
    pub ssid: String,
    pub status: u16,
    pub assoc_id: u8,
}

impl MgmtBody {
    pub fn request(ssid: &str) -> MgmtBody {
        MgmtBody {
            ssid: ssid.to_string(),
            status: 0,
            assoc_id: 0,
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>, FrameError> {
        validate_ssid(&self.ssid)?;
        let mut out = Vec::with_capacity(4 + self.ssid.len());
        out.push(self.ssid.len() as u8);
        out.extend_from_slice(self.ssid.as_bytes());
        out.extend_from_slice(&self.status.to_le_bytes());
        out.push(self.assoc_id);
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<MgmtBody, FrameError> {
        let (ssid, rest) = split_ssid(bytes)?;
        if rest.len() != 3 {
            return Err(FrameError::Truncated {
                needed: bytes.len() + 3 - rest.len(),
                have: bytes.len(),
            });
        }
        validate_ssid(&ssid)?;
        Ok(MgmtBody {
            ssid,
            status: u16::from_le_bytes([rest[0], rest[1]]),
            assoc_id: rest[2],
        })
    }
}

fn validate_ssid(ssid: &str) -> Result<(), FrameError> {
    if ssid.is_empty() {
        return Err(FrameError::InvariantViolation(
            "ssid must be non-empty".into(),
        ));
    }
    if ssid.len() > 32 {
        return Err(FrameError::InvariantViolation(format!(
            "ssid is {} bytes, max 32",
            ssid.len()
        )));
    }
    Ok(())
}

fn split_ssid(bytes: &[u8]) -> Result<(String, &[u8]), FrameError> {
    if bytes.is_empty() {
        return Err(FrameError::Truncated { needed: 1, have: 0 });
    }
    let len = bytes[0] as usize;
    if bytes.len() < 1 + len {
        return Err(FrameError::Truncated {
            needed: 1 + len,
            have: bytes.len(),
        });
    }
    let ssid = std::str::from_utf8(&bytes[1..1 + len])
        .map_err(|_| FrameError::InvariantViolation("ssid is not valid utf-8".into()))?
        .to_string();
    Ok((ssid, &bytes[1 + len..]))
}

/// Build a beacon frame: broadcast dst, src = bssid, body = encoded
/// [`BeaconBody`].
pub fn build_beacon(
    ssid: &str,
    interval_tu: u16,
    tim: &Tim,
    bssid: MacAddress,
    seq: u16,
) -> Result<MacFrame, FrameError> {
    let body = BeaconBody {
        ssid: ssid.to_string(),
        beacon_interval: interval_tu,
        capabilities: 0,
        tim: tim.clone(),
    };
    Ok(MacFrame {
        frame_type: FrameType::Beacon,
        dst: MacAddress::BROADCAST,
        src: bssid,
        bssid,
        seq,
        body: body.encode()?,
    })
}

/// Build a non-beacon management frame carrying a [`MgmtBody`].
pub fn build_mgmt(
    frame_type: FrameType,
    body: &MgmtBody,
    dst: MacAddress,
    src: MacAddress,
    bssid: MacAddress,
    seq: u16,
) -> Result<MacFrame, FrameError> {
    debug_assert!(frame_type.is_management() && frame_type != FrameType::Beacon);
    let frame = MacFrame {
        frame_type,
        dst,
        src,
        bssid,
        seq,
        body: body.encode()?,
    };
    frame.validate()?;
    Ok(frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn probe_request() -> MacFrame {
        MacFrame {
            frame_type: FrameType::ProbeRequest,
            dst: MacAddress::BROADCAST,
            src: MacAddress::local(1),
            bssid: MacAddress::BROADCAST,
            seq: 0,
            body: vec![],
        }
    }

    #[test]
    fn probe_request_layout() {
        let bytes = encode_frame(&probe_request()).unwrap();
        assert_eq!(bytes[0], 0x40);
        assert_eq!(bytes.len(), 24);
    }

    #[test]
    fn data_frame_length() {
        let frame = MacFrame {
            frame_type: FrameType::Data,
            dst: MacAddress::local(2),
            src: MacAddress::local(1),
            bssid: MacAddress::local(3),
            seq: 7,
            body: vec![0xab; 100],
        };
        assert_eq!(encode_frame(&frame).unwrap().len(), 124);
    }

    #[test]
    fn broadcast_rules_enforced() {
        let mut f = probe_request();
        f.dst = MacAddress::local(9);
        assert!(matches!(
            encode_frame(&f),
            Err(FrameError::InvariantViolation(_))
        ));

        let data = MacFrame {
            frame_type: FrameType::Data,
            dst: MacAddress::BROADCAST,
            src: MacAddress::local(1),
            bssid: MacAddress::local(3),
            seq: 0,
            body: vec![],
        };
        assert!(matches!(
            encode_frame(&data),
            Err(FrameError::InvariantViolation(_))
        ));
    }

    #[test]
    fn oversized_body_rejected() {
        let mut f = probe_request();
        f.body = vec![0; MAX_BODY_LEN + 1];
        assert!(matches!(
            encode_frame(&f),
            Err(FrameError::InvariantViolation(_))
        ));
    }

    #[test]
    fn empty_buffer_is_truncated() {
        assert!(matches!(
            decode_frame(&[]),
            Err(FrameError::Truncated { .. })
        ));
    }

    #[test]
    fn removing_last_byte_is_truncated() {
        let beacon = build_beacon("frugal5g", 100, &Tim::new(), MacAddress::local(1), 3).unwrap();
        let bytes = encode_frame(&beacon).unwrap();
        assert!(matches!(
            decode_frame(&bytes[..bytes.len() - 1]),
            Err(FrameError::Truncated { .. })
        ));
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = encode_frame(&probe_request()).unwrap();
        bytes.push(0);
        assert!(matches!(
            decode_frame(&bytes),
            Err(FrameError::InvariantViolation(_))
        ));
    }

    #[test]
    fn beacon_round_trips_inputs() {
        let tim: Tim = [5].into_iter().collect();
        let beacon = build_beacon("frugal5g", 100, &tim, MacAddress::local(1), 0).unwrap();
        assert_eq!(beacon.frame_type, FrameType::Beacon);
        assert!(beacon.dst.is_broadcast());
        let body = BeaconBody::decode(&beacon.body).unwrap();
        assert_eq!(body.ssid, "frugal5g");
        assert_eq!(body.beacon_interval, 100);
        assert_eq!(body.tim.ids().collect::<Vec<_>>(), vec![5]);
    }

    #[test]
    fn zero_beacon_interval_rejected() {
        let err = build_beacon("frugal5g", 0, &Tim::new(), MacAddress::local(1), 0);
        assert!(matches!(err, Err(FrameError::InvariantViolation(_))));
    }

    #[test]
    fn tim_zero_id_rejected() {
        assert!(Tim::new().insert(0).is_err());
    }

    #[test]
    fn seq_wraps() {
        assert_eq!(next_seq(4095), 0);
        assert_eq!(next_seq(7), 8);
    }

    #[test]
    fn mgmt_body_round_trip() {
        let body = MgmtBody {
            ssid: "net".into(),
            status: 17,
            assoc_id: 9,
        };
        assert_eq!(MgmtBody::decode(&body.encode().unwrap()).unwrap(), body);
    }

    prop_compose! {
        fn arb_mac()(bytes in any::<[u8; 6]>(), local in any::<bool>()) -> MacAddress {
            if local {
                let mut b = bytes;
                b[0] = (b[0] | 0x02) & !0x01;
                MacAddress(b)
            } else {
                MacAddress(bytes)
            }
        }
    }

    prop_compose! {
        fn arb_unicast()(bytes in any::<[u8; 6]>()) -> MacAddress {
            let mut b = bytes;
            b[0] &= !0x01;
            MacAddress(b)
        }
    }

    fn arb_frame() -> impl Strategy<Value = MacFrame> {
        let ty = prop_oneof![
            Just(FrameType::Beacon),
            Just(FrameType::ProbeRequest),
            Just(FrameType::ProbeResponse),
            Just(FrameType::AssociationRequest),
            Just(FrameType::AssociationResponse),
            Just(FrameType::Deauthentication),
            Just(FrameType::Data),
        ];
        (
            ty,
            arb_mac(),
            arb_unicast(),
            arb_mac(),
            0u16..SEQ_MODULUS,
            proptest::collection::vec(any::<u8>(), 0..256),
        )
            .prop_map(|(frame_type, dst, src, bssid, seq, body)| {
                let (dst, src) = match frame_type {
                    FrameType::Beacon | FrameType::ProbeRequest => (MacAddress::BROADCAST, src),
                    FrameType::Data => {
                        let mut d = dst.0;
                        d[0] &= !0x01;
                        (MacAddress(d), src)
                    }
                    _ => (dst, src),
                };
                MacFrame {
                    frame_type,
                    dst,
                    src,
                    bssid,
                    seq,
                    body,
                }
            })
    }

    proptest! {
        #[test]
        fn round_trip(frame in arb_frame()) {
            let bytes = encode_frame(&frame).unwrap();
            prop_assert_eq!(decode_frame(&bytes).unwrap(), frame);
        }

        #[test]
        fn encoding_is_injective(a in arb_frame(), b in arb_frame()) {
            let ea = encode_frame(&a).unwrap();
            let eb = encode_frame(&b).unwrap();
            prop_assert_eq!(a == b, ea == eb);
        }

        #[test]
        fn decoder_total_on_garbage(bytes in proptest::collection::vec(any::<u8>(), 0..512)) {
            // any outcome is fine as long as it is a defined one
            let _ = decode_frame(&bytes);
        }

        #[test]
        fn beacon_body_round_trip(
            ssid in "[a-z0-9]{1,32}",
            interval in 1u16..=u16::MAX,
            caps in any::<u16>(),
            ids in proptest::collection::btree_set(1u8..=255, 0..16),
        ) {
            let body = BeaconBody {
                ssid,
                beacon_interval: interval,
                capabilities: caps,
                tim: ids.iter().copied().collect(),
            };
            prop_assert_eq!(BeaconBody::decode(&body.encode().unwrap()).unwrap(), body);
        }
    }
}

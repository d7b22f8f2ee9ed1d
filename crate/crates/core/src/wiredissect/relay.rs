//! Relay session assembly: ping, then nonce exchange, then public key, then
//! encrypted payload.

use std::collections::BTreeMap;
use std::net::SocketAddrV4;

use chrono::{DateTime, Utc};
use serde::Serialize;
use thiserror::Error;

use super::message::decode_relay;
use super::{DissectorConfig, PacketContext, WireMessage};
use crate::keymat::PeerId;

/// One packet of a relay conversation. `message` is `None` for payloads
/// that decode as no handshake message (encrypted traffic).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelayFrame {
    pub timestamp: DateTime<Utc>,
    pub message: Option<WireMessage>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HandshakeError {
    #[error("relay handshake out of order at position {0}")]
    OutOfOrderHandshake(usize),
    #[error("empty relay session")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RelaySession {
    pub peer: PeerId,
    #[serde(serialize_with = "crate::serde_hex::array")]
    pub share32: [u8; 32],
    pub nonce_present: bool,
    pub public_key_present: bool,
    #[serde(serialize_with = "crate::serde_hex::list")]
    pub nonces: Vec<Vec<u8>>,
    #[serde(serialize_with = "crate::serde_hex::list")]
    pub public_keys: Vec<Vec<u8>>,
    pub first_seen: DateTime<Utc>,
    pub last_seen: DateTime<Utc>,
    pub encrypted_packets: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    Start,
    Pinged,
    Nonced,
    Keyed,
}

/// Validates the handshake order and summarises the session. Repeats within
/// a phase are accepted since both ends send their own ping, nonce and key.
pub fn decode_relay_handshake(frames: &[RelayFrame]) -> Result<RelaySession, HandshakeError> {
    let first = frames.first().ok_or(HandshakeError::Empty)?;
    let mut phase = Phase::Start;
    let mut session = RelaySession {
        peer: PeerId([0; 20]),
        share32: [0; 32],
        nonce_present: false,
        public_key_present: false,
        nonces: Vec::new(),
        public_keys: Vec::new(),
        first_seen: first.timestamp,
        last_seen: first.timestamp,
        encrypted_packets: 0,
    };
    for (i, frame) in frames.iter().enumerate() {
        session.first_seen = session.first_seen.min(frame.timestamp);
        session.last_seen = session.last_seen.max(frame.timestamp);
        phase = match (phase, &frame.message) {
            (Phase::Start, Some(WireMessage::RelayPing { peer, share32, .. })) => {
                session.peer = *peer;
                session.share32 = *share32;
                Phase::Pinged
            }
            (Phase::Pinged, Some(WireMessage::RelayPing { .. })) => Phase::Pinged,
            (Phase::Pinged | Phase::Nonced, Some(WireMessage::RelayNonce { nonce, .. })) => {
                session.nonce_present = true;
                session.nonces.push(nonce.to_vec());
                Phase::Nonced
            }
            (Phase::Nonced | Phase::Keyed, Some(WireMessage::PublicKey { key })) => {
                session.public_key_present = true;
                session.public_keys.push(key.to_vec());
                Phase::Keyed
            }
            (Phase::Keyed, _) => {
                session.encrypted_packets += 1;
                Phase::Keyed
            }
            _ => return Err(HandshakeError::OutOfOrderHandshake(i)),
        };
    }
    Ok(session)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RelayConversation {
    /// The two endpoints, lower address first.
    pub endpoints: (SocketAddrV4, SocketAddrV4),
    pub packet_indices: Vec<usize>,
    pub session: Option<RelaySession>,
    pub error: Option<String>,
}

/// Groups relay-family packets by endpoint pair and validates each
/// conversation.
pub fn relay_conversations(packets: &[PacketContext], config: &DissectorConfig) -> Vec<RelayConversation> {
    let mut order: Vec<&PacketContext> = packets.iter().filter(|p| config.is_relay(p)).collect();
    order.sort_by_key(|p| (p.timestamp, p.index));
    let mut groups: BTreeMap<(SocketAddrV4, SocketAddrV4), (Vec<usize>, Vec<RelayFrame>)> =
        BTreeMap::new();
    for p in order {
        let key = if p.src <= p.dst { (p.src, p.dst) } else { (p.dst, p.src) };
        let g = groups.entry(key).or_default();
        g.0.push(p.index);
        g.1.push(RelayFrame {
            timestamp: p.timestamp,
            message: decode_relay(&p.payload).ok().flatten(),
        });
    }
    groups
        .into_iter()
        .map(|(endpoints, (packet_indices, frames))| {
            let (session, error) = match decode_relay_handshake(&frames) {
                Ok(s) => (Some(s), None),
                Err(e) => (None, Some(e.to_string())),
            };
            RelayConversation { endpoints, packet_indices, session, error }
        })
        .collect()
}

//! Dissection of sync traffic from classic pcap captures.

mod classify;
mod message;
mod observe;
mod pcap;
mod relay;

use serde::Serialize;
use thiserror::Error;

use crate::bencode::MalformedBencode;

pub use classify::{
    classify_packet, dissect, DissectedMessage, DissectorConfig, LanCorrelation, DEFAULT_RELAYS,
    DEFAULT_TRACKERS, LAN_MULTICAST, RELAY_PORT,
};
pub use message::{
    decode_endpoint, decode_lan_ping, decode_relay, decode_tracker_request,
    decode_tracker_response, encode_endpoint, find_block, Extras, PeerEntry, WireMessage,
};
pub use observe::{extract_peer_observations, ObservationSource, PeerObservation};
pub use pcap::{read_pcap, Capture, PacketContext};
pub use relay::{
    decode_relay_handshake, relay_conversations, HandshakeError, RelayConversation, RelayFrame,
    RelaySession,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("not a classic pcap file")]
    NotPcap,
    #[error("unsupported link type {0}")]
    UnsupportedLinkType(u32),
    #[error("packet {0} is truncated")]
    TruncatedPacket(usize),
    #[error("wrong message type {0:?}")]
    WrongMessageType(String),
    #[error("field {field}: expected {expected} bytes, found {found}")]
    FieldLengthError { field: &'static str, expected: usize, found: usize },
    #[error("missing field {0}")]
    MissingField(&'static str),
    #[error("tracker response lists no peers")]
    EmptyResponse,
    #[error("no bencoded block in payload")]
    NoBencodedBlock,
    #[error(transparent)]
    Bencode(#[from] MalformedBencode),
}

/// Everything extracted from one capture.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CaptureAnalysis {
    pub source: String,
    pub messages: Vec<DissectedMessage>,
    pub unclassified: usize,
    /// Records that were not IPv4/UDP.
    pub skipped: usize,
    pub relay: Vec<RelayConversation>,
    pub observations: Vec<PeerObservation>,
}

pub fn analyse_capture(
    source: impl Into<String>,
    input: &[u8],
    config: &DissectorConfig,
) -> Result<CaptureAnalysis, WireError> {
    let capture = read_pcap(input)?;
    let (messages, unclassified) = dissect(&capture.packets, config);
    let relay = relay_conversations(&capture.packets, config);
    let observations = extract_peer_observations(&messages);
    Ok(CaptureAnalysis {
        source: source.into(),
        messages,
        unclassified,
        skipped: capture.skipped,
        relay,
        observations,
    })
}

use std::collections::HashMap;
use std::net::SocketAddrV4;

use chrono::{DateTime, Utc};
use serde::Serialize;

use super::{DissectedMessage, WireMessage};
use crate::keymat::{PeerId, ShareId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ObservationSource {
    Lan,
    Tracker,
    Relay,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PeerObservation {
    pub peer: PeerId,
    pub share: Option<ShareId>,
    #[serde(serialize_with = "crate::serde_hex::opt")]
    pub relay_share: Option<Vec<u8>>,
    pub endpoint: Option<SocketAddrV4>,
    pub timestamp: DateTime<Utc>,
    pub packet_index: usize,
    pub source: ObservationSource,
}

/// One row per message that carries a peer id, ordered by capture time then
/// packet index. LAN pongs inherit the share of the ping whose advertised
/// endpoint they answer.
pub fn extract_peer_observations(messages: &[DissectedMessage]) -> Vec<PeerObservation> {
    let mut order: Vec<&DissectedMessage> = messages.iter().collect();
    order.sort_by_key(|m| (m.timestamp, m.packet_index));
    let mut advertised: HashMap<SocketAddrV4, ShareId> = HashMap::new();
    let mut out = Vec::new();
    for m in order {
        let row = |peer, share, endpoint, source| PeerObservation {
            peer,
            share,
            relay_share: None,
            endpoint,
            timestamp: m.timestamp,
            packet_index: m.packet_index,
            source,
        };
        match &m.message {
            WireMessage::LanPing { src_endpoint, share, .. } => {
                let ep = if src_endpoint.ip().is_unspecified() {
                    SocketAddrV4::new(*m.src.ip(), src_endpoint.port())
                } else {
                    *src_endpoint
                };
                advertised.insert(ep, *share);
            }
            WireMessage::LanPong { peer } => out.push(row(
                *peer,
                advertised.get(&m.dst).copied(),
                Some(m.src),
                ObservationSource::Lan,
            )),
            WireMessage::TrackerGetPeers { la, peer, share, .. } => {
                out.push(row(*peer, Some(*share), Some(*la), ObservationSource::Tracker))
            }
            WireMessage::TrackerPeersResponse { entries } => out.extend(entries.iter().map(|e| {
                row(e.peer, Some(e.share), Some(e.endpoint), ObservationSource::Tracker)
            })),
            WireMessage::RelayPing { peer, share32, .. } => {
                let mut r = row(*peer, None, Some(m.src), ObservationSource::Relay);
                r.relay_share = Some(share32.to_vec());
                out.push(r);
            }
            WireMessage::RelayNonce { .. } | WireMessage::PublicKey { .. } => {}
        }
    }
    out
}

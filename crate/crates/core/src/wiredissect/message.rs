//! Decoders (and matching encoders) for the individual message types.

use std::collections::BTreeMap;
use std::net::{Ipv4Addr, SocketAddrV4};

use serde::Serialize;

use super::WireError;
use crate::bencode::{parse_bare_pairs, parse_bencode, serialise_bencode, BValue};
use crate::keymat::{PeerId, ShareId};

pub type Extras = BTreeMap<Vec<u8>, BValue>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PeerEntry {
    pub endpoint: SocketAddrV4,
    pub peer: PeerId,
    pub share: ShareId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "type")]
pub enum WireMessage {
    LanPing {
        src_endpoint: SocketAddrV4,
        share: ShareId,
        /// False for a ping sent directly to a predefined host.
        multicast: bool,
        #[serde(serialize_with = "crate::serde_hex::extras")]
        extras: Extras,
    },
    LanPong {
        peer: PeerId,
    },
    TrackerGetPeers {
        la: SocketAddrV4,
        peer: PeerId,
        share: ShareId,
        #[serde(serialize_with = "crate::serde_hex::extras")]
        extras: Extras,
    },
    TrackerPeersResponse {
        entries: Vec<PeerEntry>,
    },
    RelayPing {
        peer: PeerId,
        #[serde(serialize_with = "crate::serde_hex::array")]
        share32: [u8; 32],
        #[serde(serialize_with = "crate::serde_hex::extras")]
        extras: Extras,
    },
    RelayNonce {
        #[serde(serialize_with = "crate::serde_hex::array")]
        nonce: [u8; 16],
        #[serde(serialize_with = "crate::serde_hex::bytes")]
        have_map: Vec<u8>,
    },
    PublicKey {
        #[serde(serialize_with = "crate::serde_hex::array")]
        key: [u8; 20],
    },
}

impl WireMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            WireMessage::LanPing { .. } => "LanPing",
            WireMessage::LanPong { .. } => "LanPong",
            WireMessage::TrackerGetPeers { .. } => "TrackerGetPeers",
            WireMessage::TrackerPeersResponse { .. } => "TrackerPeersResponse",
            WireMessage::RelayPing { .. } => "RelayPing",
            WireMessage::RelayNonce { .. } => "RelayNonce",
            WireMessage::PublicKey { .. } => "PublicKey",
        }
    }

    pub fn is_relay(&self) -> bool {
        matches!(
            self,
            WireMessage::RelayPing { .. } | WireMessage::RelayNonce { .. } | WireMessage::PublicKey { .. }
        )
    }

    /// Payload bytes for this message in the framing the decoders accept.
    pub fn encode(&self, marker: &[u8]) -> Vec<u8> {
        fn with_extras(extras: &Extras, pairs: Vec<(&str, BValue)>) -> Vec<u8> {
            let mut map = extras.clone();
            map.extend(pairs.into_iter().map(|(k, v)| (k.as_bytes().to_vec(), v)));
            serialise_bencode(&BValue::Dict(map))
        }
        match self {
            WireMessage::LanPing { src_endpoint, share, extras, .. } => {
                let mut out = marker.to_vec();
                out.push(0);
                out.extend(with_extras(
                    extras,
                    vec![
                        ("la", BValue::bytes(encode_endpoint(*src_endpoint).to_vec())),
                        ("m", BValue::bytes("ping")),
                        ("share", BValue::bytes(share.0.to_vec())),
                    ],
                ));
                out
            }
            WireMessage::LanPong { peer } => peer.0.to_vec(),
            WireMessage::TrackerGetPeers { la, peer, share, extras } => with_extras(
                extras,
                vec![
                    ("la", BValue::bytes(encode_endpoint(*la).to_vec())),
                    ("m", BValue::bytes("get_peers")),
                    ("peer", BValue::bytes(peer.0.to_vec())),
                    ("share", BValue::bytes(share.0.to_vec())),
                ],
            ),
            WireMessage::TrackerPeersResponse { entries } => {
                let list = entries
                    .iter()
                    .map(|e| {
                        BValue::dict([
                            ("la", BValue::bytes(encode_endpoint(e.endpoint).to_vec())),
                            ("peer", BValue::bytes(e.peer.0.to_vec())),
                            ("share", BValue::bytes(e.share.0.to_vec())),
                        ])
                    })
                    .collect();
                serialise_bencode(&BValue::dict([
                    ("m", BValue::bytes("peers")),
                    ("peers", BValue::List(list)),
                ]))
            }
            WireMessage::RelayPing { peer, share32, extras } => with_extras(
                extras,
                vec![
                    ("m", BValue::bytes("ping")),
                    ("peer", BValue::bytes(peer.0.to_vec())),
                    ("share", BValue::bytes(share32.to_vec())),
                ],
            ),
            WireMessage::RelayNonce { nonce, have_map } => {
                let mut pairs = vec![("nonce", BValue::bytes(nonce.to_vec()))];
                if !have_map.is_empty() {
                    pairs.push(("have", BValue::bytes(have_map.clone())));
                }
                serialise_bencode(&BValue::dict(pairs))
            }
            WireMessage::PublicKey { key } => {
                serialise_bencode(&BValue::dict([("key", BValue::bytes(key.to_vec()))]))
            }
        }
    }
}

/// 4-byte address followed by 2-byte port, both big-endian.
pub fn encode_endpoint(ep: SocketAddrV4) -> [u8; 6] {
    let mut out = [0u8; 6];
    out[..4].copy_from_slice(&ep.ip().octets());
    out[4..].copy_from_slice(&ep.port().to_be_bytes());
    out
}

pub fn decode_endpoint(field: &'static str, b: &[u8]) -> Result<SocketAddrV4, WireError> {
    if b.len() != 6 {
        return Err(WireError::FieldLengthError { field, expected: 6, found: b.len() });
    }
    Ok(SocketAddrV4::new(
        Ipv4Addr::new(b[0], b[1], b[2], b[3]),
        u16::from_be_bytes([b[4], b[5]]),
    ))
}

/// First bencoded dictionary in `payload` at or after `from`. Falls back to
/// an unwrapped `key value` run when no dictionary parses.
pub fn find_block(payload: &[u8], from: usize) -> Option<(BTreeMap<Vec<u8>, BValue>, usize)> {
    let tail = payload.get(from..)?;
    for (i, _) in tail.iter().enumerate().filter(|(_, &b)| b == b'd') {
        if let Ok((BValue::Dict(d), _)) = parse_bencode(&tail[i..]) {
            return Some((d, from + i));
        }
    }
    let i = tail.iter().position(u8::is_ascii_digit)?;
    parse_bare_pairs(&tail[i..]).ok().map(|(d, _)| (d, from + i))
}

/// The first bencoded list in the payload, used for tracker responses that
/// are a bare list of peers.
fn find_list(payload: &[u8]) -> Option<Vec<BValue>> {
    payload.iter().enumerate().filter(|(_, &b)| b == b'l').find_map(|(i, _)| {
        match parse_bencode(&payload[i..]) {
            Ok((BValue::List(l), _)) => Some(l),
            _ => None,
        }
    })
}

struct Fields(BTreeMap<Vec<u8>, BValue>);

impl Fields {
    fn bytes(&mut self, field: &'static str) -> Result<Vec<u8>, WireError> {
        match self.0.remove(field.as_bytes()) {
            Some(BValue::Bytes(b)) => Ok(b),
            Some(_) | None => Err(WireError::MissingField(field)),
        }
    }

    fn fixed<const N: usize>(&mut self, field: &'static str) -> Result<[u8; N], WireError> {
        let b = self.bytes(field)?;
        <[u8; N]>::try_from(b.as_slice()).map_err(|_| WireError::FieldLengthError {
            field,
            expected: N,
            found: b.len(),
        })
    }

    fn message_type(&mut self) -> Option<Vec<u8>> {
        match self.0.remove(&b"m"[..]) {
            Some(BValue::Bytes(b)) => Some(b),
            _ => None,
        }
    }
}

fn lossy(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

/// Decodes a BSYNC discovery ping. `body_from` is the offset just past the
/// marker.
pub fn decode_lan_ping(
    payload: &[u8],
    body_from: usize,
    multicast: bool,
) -> Result<WireMessage, WireError> {
    let (block, _) = find_block(payload, body_from).ok_or(WireError::NoBencodedBlock)?;
    let mut f = Fields(block);
    match f.message_type() {
        Some(m) if m == b"ping" => {}
        Some(m) => return Err(WireError::WrongMessageType(lossy(&m))),
        None => return Err(WireError::MissingField("m")),
    }
    let src_endpoint = decode_endpoint("la", &f.bytes("la")?)?;
    let share = ShareId(f.fixed::<20>("share")?);
    Ok(WireMessage::LanPing { src_endpoint, share, multicast, extras: f.0 })
}

pub fn decode_tracker_request(payload: &[u8]) -> Result<WireMessage, WireError> {
    let (block, _) = find_block(payload, 0).ok_or(WireError::NoBencodedBlock)?;
    let mut f = Fields(block);
    match f.message_type() {
        Some(m) if m == b"get_peers" => {}
        Some(m) => return Err(WireError::WrongMessageType(lossy(&m))),
        None => return Err(WireError::MissingField("m")),
    }
    let la = decode_endpoint("la", &f.bytes("la")?)?;
    let peer = PeerId(f.fixed::<20>("peer")?);
    let share = ShareId(f.fixed::<20>("share")?);
    Ok(WireMessage::TrackerGetPeers { la, peer, share, extras: f.0 })
}

fn peer_entry(v: &BValue) -> Result<PeerEntry, WireError> {
    match v {
        // packed ip(4) port(2) peer(20) share(20)
        BValue::Bytes(b) if b.len() == 46 => Ok(PeerEntry {
            endpoint: decode_endpoint("la", &b[..6])?,
            peer: PeerId::from_slice(&b[6..26]).map_err(|_| WireError::MissingField("peer"))?,
            share: ShareId::from_slice(&b[26..]).map_err(|_| WireError::MissingField("share"))?,
        }),
        BValue::Bytes(b) => Err(WireError::FieldLengthError {
            field: "peers",
            expected: 46,
            found: b.len(),
        }),
        BValue::Dict(d) => {
            let mut f = Fields(d.clone());
            let la = match f.bytes("la") {
                Ok(b) => b,
                Err(_) => f.bytes("addr")?,
            };
            Ok(PeerEntry {
                endpoint: decode_endpoint("la", &la)?,
                peer: PeerId(f.fixed::<20>("peer")?),
                share: ShareId(f.fixed::<20>("share")?),
            })
        }
        _ => Err(WireError::MissingField("peers")),
    }
}

pub fn decode_tracker_response(payload: &[u8]) -> Result<WireMessage, WireError> {
    let list = match find_block(payload, 0) {
        Some((block, _)) => match block.get(&b"peers"[..]) {
            Some(BValue::List(l)) => l.clone(),
            _ => return Err(WireError::MissingField("peers")),
        },
        None => find_list(payload).ok_or(WireError::NoBencodedBlock)?,
    };
    if list.is_empty() {
        return Err(WireError::EmptyResponse);
    }
    let entries = list.iter().map(peer_entry).collect::<Result<Vec<_>, _>>()?;
    Ok(WireMessage::TrackerPeersResponse { entries })
}

/// Relay-family payloads: bencoded ping / nonce / key blocks, or bare
/// 16-byte nonces and 20-byte keys. `Ok(None)` means opaque (encrypted)
/// traffic.
pub fn decode_relay(payload: &[u8]) -> Result<Option<WireMessage>, WireError> {
    if let Some((block, _)) = find_block(payload, 0) {
        let mut f = Fields(block);
        if f.0.contains_key(&b"nonce"[..]) {
            let nonce = f.fixed::<16>("nonce")?;
            let have_map = f.bytes("have").unwrap_or_default();
            return Ok(Some(WireMessage::RelayNonce { nonce, have_map }));
        }
        for k in ["key", "pub_key"] {
            if f.0.contains_key(k.as_bytes()) {
                return Ok(Some(WireMessage::PublicKey { key: f.fixed::<20>(k)? }));
            }
        }
        let m = f.message_type();
        if m.as_deref() == Some(b"ping") || (f.0.contains_key(&b"peer"[..]) && f.0.contains_key(&b"share"[..])) {
            let peer = PeerId(f.fixed::<20>("peer")?);
            let share32 = f.fixed::<32>("share")?;
            if let Some(m) = m.filter(|m| m != b"ping") {
                f.0.insert(b"m".to_vec(), BValue::Bytes(m));
            }
            return Ok(Some(WireMessage::RelayPing { peer, share32, extras: f.0 }));
        }
        return Ok(None);
    }
    Ok(match payload.len() {
        16 => Some(WireMessage::RelayNonce {
            nonce: payload.try_into().expect("length checked"),
            have_map: Vec::new(),
        }),
        20 => Some(WireMessage::PublicKey { key: payload.try_into().expect("length checked") }),
        _ => None,
    })
}

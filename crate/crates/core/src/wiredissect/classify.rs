use std::collections::{BTreeSet, HashMap};
use std::net::{Ipv4Addr, SocketAddrV4};

use chrono::{DateTime, Utc};
use serde::Serialize;

use super::message::{decode_lan_ping, decode_relay, decode_tracker_request, decode_tracker_response};
use super::{PacketContext, WireMessage};
use crate::keymat::ShareId;

pub const LAN_MULTICAST: SocketAddrV4 = SocketAddrV4::new(Ipv4Addr::new(239, 192, 0, 0), 3838);
pub const RELAY_PORT: u16 = 3000;

/// Tracker addresses `t.usyncapp.com` resolved to during the original
/// analysis.
pub const DEFAULT_TRACKERS: [Ipv4Addr; 3] = [
    Ipv4Addr::new(54, 225, 100, 8),
    Ipv4Addr::new(54, 225, 92, 50),
    Ipv4Addr::new(54, 225, 196, 38),
];

pub const DEFAULT_RELAYS: [Ipv4Addr; 2] =
    [Ipv4Addr::new(67, 215, 229, 106), Ipv4Addr::new(67, 215, 231, 242)];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DissectorConfig {
    pub marker: Vec<u8>,
    /// The marker must start within this many leading payload bytes.
    pub marker_window: usize,
    pub tracker_hosts: BTreeSet<Ipv4Addr>,
    pub relay_hosts: BTreeSet<Ipv4Addr>,
}

impl Default for DissectorConfig {
    fn default() -> Self {
        DissectorConfig {
            marker: b"BSYNC".to_vec(),
            marker_window: 16,
            tracker_hosts: DEFAULT_TRACKERS.into_iter().collect(),
            relay_hosts: DEFAULT_RELAYS.into_iter().collect(),
        }
    }
}

impl DissectorConfig {
    /// Offset just past the marker, if present in the leading window.
    pub fn marker_end(&self, payload: &[u8]) -> Option<usize> {
        if self.marker.is_empty() {
            return None;
        }
        let window = &payload[..payload.len().min(self.marker_window + self.marker.len())];
        window
            .windows(self.marker.len())
            .take(self.marker_window)
            .position(|w| w == self.marker.as_slice())
            .map(|p| p + self.marker.len())
    }

    /// Relay port or relay host, unless the packet is addressed to a known
    /// tracker or names `get_peers` (the tracker also listens on 3000).
    pub fn is_relay(&self, ctx: &PacketContext) -> bool {
        if self.is_tracker(ctx) {
            return false;
        }
        ctx.dst.port() == RELAY_PORT
            || ctx.src.port() == RELAY_PORT
            || self.relay_hosts.contains(ctx.dst.ip())
            || self.relay_hosts.contains(ctx.src.ip())
    }

    pub fn is_tracker(&self, ctx: &PacketContext) -> bool {
        self.tracker_hosts.contains(ctx.dst.ip())
            || self.tracker_hosts.contains(ctx.src.ip())
            || contains(&ctx.payload, b"9:get_peers")
    }
}

fn contains(hay: &[u8], needle: &[u8]) -> bool {
    hay.windows(needle.len()).any(|w| w == needle)
}

/// Endpoints advertised by earlier LAN pings, used to recognise the
/// header-less 20-byte replies.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LanCorrelation {
    advertised: HashMap<SocketAddrV4, ShareId>,
}

impl LanCorrelation {
    pub fn record_ping(&mut self, ctx: &PacketContext, msg: &WireMessage) {
        if let WireMessage::LanPing { src_endpoint, share, .. } = msg {
            let ep = if src_endpoint.ip().is_unspecified() {
                SocketAddrV4::new(*ctx.src.ip(), src_endpoint.port())
            } else {
                *src_endpoint
            };
            self.advertised.insert(ep, *share);
        }
    }

    pub fn share_for(&self, endpoint: &SocketAddrV4) -> Option<ShareId> {
        self.advertised.get(endpoint).copied()
    }
}

/// Applies the classification rules in order; the first rule whose family
/// matches decides the outcome:
///
/// 1. to 239.192.0.0:3838 with the marker: LAN ping
/// 2. port 3000 or a relay host, tracker traffic excepted: relay ping /
///    nonce / public key
/// 3. a tracker host or a `get_peers` key: tracker request / response
/// 4. marker plus a ping body on unicast: direct ping to a predefined host
/// 5. a bare 20-byte payload sent to an advertised endpoint: LAN pong
pub fn classify_packet(
    ctx: &PacketContext,
    config: &DissectorConfig,
    lan: &LanCorrelation,
) -> Option<WireMessage> {
    let marker_end = config.marker_end(&ctx.payload);
    if ctx.dst == LAN_MULTICAST {
        if let Some(end) = marker_end {
            return decode_lan_ping(&ctx.payload, end, true).ok();
        }
    }
    if config.is_relay(ctx) {
        return decode_relay(&ctx.payload).ok().flatten();
    }
    if config.is_tracker(ctx) {
        return decode_tracker_request(&ctx.payload)
            .or_else(|_| decode_tracker_response(&ctx.payload))
            .ok();
    }
    if let Some(end) = marker_end {
        return decode_lan_ping(&ctx.payload, end, false).ok();
    }
    if ctx.payload.len() == 20 && lan.share_for(&ctx.dst).is_some() {
        return Some(WireMessage::LanPong {
            peer: crate::keymat::PeerId(ctx.payload.as_slice().try_into().ok()?),
        });
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DissectedMessage {
    pub packet_index: usize,
    pub timestamp: DateTime<Utc>,
    pub src: SocketAddrV4,
    pub dst: SocketAddrV4,
    pub message: WireMessage,
}

/// Classifies a whole capture in timestamp order, maintaining LAN ping
/// correlation state. Returns the messages and the count of packets that
/// matched nothing.
pub fn dissect(packets: &[PacketContext], config: &DissectorConfig) -> (Vec<DissectedMessage>, usize) {
    let mut order: Vec<&PacketContext> = packets.iter().collect();
    order.sort_by_key(|p| (p.timestamp, p.index));
    let mut lan = LanCorrelation::default();
    let mut out = Vec::new();
    let mut unclassified = 0;
    for ctx in order {
        match classify_packet(ctx, config, &lan) {
            Some(message) => {
                lan.record_ping(ctx, &message);
                out.push(DissectedMessage {
                    packet_index: ctx.index,
                    timestamp: ctx.timestamp,
                    src: ctx.src,
                    dst: ctx.dst,
                    message,
                });
            }
            None => unclassified += 1,
        }
    }
    (out, unclassified)
}

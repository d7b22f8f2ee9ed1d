use chrono::{DateTime, NaiveDateTime};
use serde::Serialize;

use crate::diskarts::{ArtifactBundle, LogEventKind, SyncLogEvent};
use crate::wiredissect::{CaptureAnalysis, DissectedMessage, WireMessage};

/// Ties at the same instant are broken in this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum EventSource {
    Log,
    Pcap,
    Registry,
    Filesystem,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Event {
    /// Wall-clock time as recorded by the source. Capture and file times are
    /// UTC; log times carry no zone and are ordered as if they were UTC.
    pub timestamp: NaiveDateTime,
    pub timezone_known: bool,
    pub source: EventSource,
    pub description: String,
    pub references: Vec<String>,
}

/// Merges log lines, captured messages and file-record mtimes into one
/// stable ordering. Registry exports carry no timestamps and contribute no
/// events.
pub fn build_timeline(artifacts: &ArtifactBundle, captures: &[CaptureAnalysis]) -> Vec<Event> {
    let mut events = Vec::new();
    for log in &artifacts.sync_logs {
        for ev in &log.events {
            if let Some(ts) = ev.timestamp {
                events.push(Event {
                    timestamp: ts,
                    timezone_known: false,
                    source: EventSource::Log,
                    description: describe_log(ev),
                    references: vec![format!("{}:{}", log.source, ev.line)],
                });
            }
        }
    }
    for cap in captures {
        for m in &cap.messages {
            events.push(Event {
                timestamp: m.timestamp.naive_utc(),
                timezone_known: true,
                source: EventSource::Pcap,
                description: describe_message(m),
                references: vec![packet_ref(&cap.source, m.packet_index)],
            });
        }
    }
    for wal in &artifacts.db_wal {
        for carved in &wal.scan.records {
            let r = &carved.record;
            let Some(ts) = DateTime::from_timestamp(r.mtime, 0) else { continue };
            let verb = if r.invalidated { "invalidated file" } else { "file" };
            events.push(Event {
                timestamp: ts.naive_utc(),
                timezone_known: true,
                source: EventSource::Filesystem,
                description: format!(
                    "{verb} {} last modified ({} bytes)",
                    String::from_utf8_lossy(&r.rel_path),
                    r.size
                ),
                references: vec![format!("{}@{}", wal.source, carved.offset)],
            });
        }
    }
    sort_events(&mut events);
    events
}

/// Stable sort by timestamp then source, keeping insertion order for ties.
pub fn sort_events(events: &mut [Event]) {
    events.sort_by_key(|e| (e.timestamp, e.source));
}

pub(crate) fn packet_ref(source: &str, index: usize) -> String {
    format!("{source}#{index}")
}

fn describe_log(ev: &SyncLogEvent) -> String {
    let share = ev.share.map(|s| s.to_hex()).unwrap_or_default();
    let peer = ev.peer.map(|p| p.to_hex()).unwrap_or_default();
    let ep = ev.endpoint.map(|e| e.to_string()).unwrap_or_default();
    match ev.kind {
        LogEventKind::ConfigLoaded => format!(
            "config loaded (version {})",
            ev.config_version.as_deref().unwrap_or("?")
        ),
        LogEventKind::FolderLoaded => {
            format!("folder loaded: {}", ev.folder_path.as_deref().unwrap_or(""))
        }
        LogEventKind::PingReceived => format!("ping from peer {peer} at {ep} for share {share}"),
        LogEventKind::PeerFound => format!(
            "peer {peer} at {ep} found for folder {}",
            ev.folder_path.as_deref().unwrap_or("")
        ),
        LogEventKind::BroadcastPingSent => format!("broadcast ping sent for share {share}"),
        LogEventKind::TrackerRequested => "peers requested from tracker".to_string(),
        LogEventKind::Unrecognised => format!("unrecognised log line: {}", ev.raw_line),
    }
}

fn describe_message(m: &DissectedMessage) -> String {
    match &m.message {
        WireMessage::LanPing { share, multicast: true, .. } => {
            format!("LAN ping from {} for share {share}", m.src)
        }
        WireMessage::LanPing { share, .. } => {
            format!("direct ping {} -> {} for share {share}", m.src, m.dst)
        }
        WireMessage::LanPong { peer } => format!("LAN pong from peer {peer} at {}", m.src),
        WireMessage::TrackerGetPeers { peer, share, .. } => {
            format!("tracker get_peers by peer {peer} for share {share} to {}", m.dst)
        }
        WireMessage::TrackerPeersResponse { entries } => {
            format!("tracker response from {} listing {} peer(s)", m.src, entries.len())
        }
        WireMessage::RelayPing { peer, .. } => {
            format!("relay ping by peer {peer} {} -> {}", m.src, m.dst)
        }
        WireMessage::RelayNonce { .. } => format!("relay nonce {} -> {}", m.src, m.dst),
        WireMessage::PublicKey { .. } => format!("relay public key {} -> {}", m.src, m.dst),
    }
}

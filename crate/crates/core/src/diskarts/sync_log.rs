//! Line grammar of the client's `sync.log`.

use std::net::SocketAddrV4;
use std::sync::OnceLock;

use chrono::NaiveDateTime;
use regex::Regex;
use serde::Serialize;

use crate::keymat::{PeerId, ShareId};

/// Log timestamp layout. The zone is not recorded in the file.
pub const LOG_TIME_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum LogEventKind {
    ConfigLoaded,
    FolderLoaded,
    PingReceived,
    PeerFound,
    BroadcastPingSent,
    TrackerRequested,
    Unrecognised,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SyncLogEvent {
    /// 1-based line number within the file.
    pub line: usize,
    /// Naive wall-clock time; the zone is unknown.
    pub timestamp: Option<NaiveDateTime>,
    pub kind: LogEventKind,
    pub share: Option<ShareId>,
    pub peer: Option<PeerId>,
    pub endpoint: Option<SocketAddrV4>,
    pub folder_path: Option<String>,
    pub direct: Option<bool>,
    pub broadcast: Option<bool>,
    pub config_version: Option<String>,
    pub raw_line: String,
}

struct Grammar {
    prefix: Regex,
    config: Regex,
    folder: Regex,
    ping: Regex,
    found: Regex,
    broadcast: Regex,
    tracker: Regex,
}

const ID: &str = "([0-9A-Fa-f]{40})";
const ENDPOINT: &str = r"(\d{1,3}(?:\.\d{1,3}){3}:\d{1,5})";

fn grammar() -> &'static Grammar {
    static G: OnceLock<Grammar> = OnceLock::new();
    G.get_or_init(|| Grammar {
        prefix: Regex::new(r"^\[(\d{4}-\d{2}-\d{2} \d{2}:\d{2}:\d{2})\] (.*)$").unwrap(),
        config: Regex::new(r"^Loading config file version (\S+)$").unwrap(),
        folder: Regex::new(r"^Loaded folder (.+)$").unwrap(),
        ping: Regex::new(&format!(
            r"^Got ping \(broadcast: ([01])\) from peer {ENDPOINT} \({ID}\) for share {ID}$"
        ))
        .unwrap(),
        found: Regex::new(&format!(r"^Found peer for folder (.+) {ID} {ENDPOINT} direct:([01])$"))
            .unwrap(),
        broadcast: Regex::new(&format!(r"^Sending broadcast ping for share {ID}$")).unwrap(),
        tracker: Regex::new(r"^Requesting peers from server$").unwrap(),
    })
}

impl SyncLogEvent {
    fn unrecognised(line: usize, raw: &str, timestamp: Option<NaiveDateTime>) -> Self {
        SyncLogEvent {
            line,
            timestamp,
            kind: LogEventKind::Unrecognised,
            share: None,
            peer: None,
            endpoint: None,
            folder_path: None,
            direct: None,
            broadcast: None,
            config_version: None,
            raw_line: raw.to_owned(),
        }
    }
}

/// Parses every line; lines matching none of the grammars come back as
/// `Unrecognised` with the text intact.
pub fn parse_sync_log(input: &str) -> Vec<SyncLogEvent> {
    input
        .lines()
        .enumerate()
        .map(|(i, line)| parse_line(i + 1, line))
        .collect()
}

pub fn parse_line(line_no: usize, raw: &str) -> SyncLogEvent {
    let g = grammar();
    let Some(caps) = g.prefix.captures(raw) else {
        return SyncLogEvent::unrecognised(line_no, raw, None);
    };
    let Ok(ts) = NaiveDateTime::parse_from_str(&caps[1], LOG_TIME_FORMAT) else {
        return SyncLogEvent::unrecognised(line_no, raw, None);
    };
    let body = caps.get(2).map_or("", |m| m.as_str());
    let mut ev = SyncLogEvent::unrecognised(line_no, raw, Some(ts));

    if let Some(c) = g.config.captures(body) {
        ev.kind = LogEventKind::ConfigLoaded;
        ev.config_version = Some(c[1].to_owned());
    } else if let Some(c) = g.ping.captures(body) {
        let (Ok(endpoint), Ok(peer), Ok(share)) =
            (c[2].parse(), PeerId::parse_hex(&c[3]), ShareId::parse_hex(&c[4]))
        else {
            return ev;
        };
        ev.kind = LogEventKind::PingReceived;
        ev.broadcast = Some(&c[1] == "1");
        ev.endpoint = Some(endpoint);
        ev.peer = Some(peer);
        ev.share = Some(share);
    } else if let Some(c) = g.found.captures(body) {
        let (Ok(peer), Ok(endpoint)) = (PeerId::parse_hex(&c[2]), c[3].parse()) else {
            return ev;
        };
        ev.kind = LogEventKind::PeerFound;
        ev.folder_path = Some(c[1].to_owned());
        ev.peer = Some(peer);
        ev.endpoint = Some(endpoint);
        ev.direct = Some(&c[4] == "1");
    } else if let Some(c) = g.broadcast.captures(body) {
        let Ok(share) = ShareId::parse_hex(&c[1]) else {
            return ev;
        };
        ev.kind = LogEventKind::BroadcastPingSent;
        ev.share = Some(share);
    } else if g.tracker.is_match(body) {
        ev.kind = LogEventKind::TrackerRequested;
    } else if let Some(c) = g.folder.captures(body) {
        ev.kind = LogEventKind::FolderLoaded;
        ev.folder_path = Some(c[1].to_owned());
    }
    ev
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ping_line() {
        let ev = parse_line(
            1,
            "[2013-12-01 12:43:44] Got ping (broadcast: 1) from peer 192.168.0.11:27900 \
             (00DC0AC2F0F91921AE29FC5E8F2273828BBAC747) for share \
             35F762999B1275C0F894F3D5FBAC7059F76783ED",
        );
        assert_eq!(ev.kind, LogEventKind::PingReceived);
        assert_eq!(ev.endpoint, Some("192.168.0.11:27900".parse().unwrap()));
        assert_eq!(ev.peer.unwrap().to_hex(), "00DC0AC2F0F91921AE29FC5E8F2273828BBAC747");
        assert_eq!(ev.share.unwrap().to_hex(), "35F762999B1275C0F894F3D5FBAC7059F76783ED");
        assert_eq!(ev.broadcast, Some(true));
        assert_eq!(
            ev.timestamp.unwrap().format(LOG_TIME_FORMAT).to_string(),
            "2013-12-01 12:43:44"
        );
    }

    #[test]
    fn tracker_line() {
        let ev = parse_line(1, "[2013-12-01 12:43:45] Requesting peers from server");
        assert_eq!(ev.kind, LogEventKind::TrackerRequested);
    }

    #[test]
    fn found_peer_with_spaces_in_path() {
        let ev = parse_line(
            3,
            r"[2013-12-01 12:43:44] Found peer for folder C:\My Docs\share 00DC0AC2F0F91921AE29FC5E8F2273828BBAC747 192.168.0.11:27900 direct:0",
        );
        assert_eq!(ev.kind, LogEventKind::PeerFound);
        assert_eq!(ev.folder_path.as_deref(), Some(r"C:\My Docs\share"));
        assert_eq!(ev.direct, Some(false));
        assert_eq!(ev.line, 3);
    }

    #[test]
    fn garbage_is_kept() {
        let ev = parse_line(1, "garbage line");
        assert_eq!(ev.kind, LogEventKind::Unrecognised);
        assert_eq!(ev.raw_line, "garbage line");
        assert!(ev.timestamp.is_none());
    }

    #[test]
    fn unknown_message_keeps_timestamp() {
        let ev = parse_line(1, "[2013-12-01 12:43:45] Something new");
        assert_eq!(ev.kind, LogEventKind::Unrecognised);
        assert!(ev.timestamp.is_some());
    }

    #[test]
    fn bad_dates_are_unrecognised() {
        let ev = parse_line(1, "[2013-13-45 12:43:45] Requesting peers from server");
        assert_eq!(ev.kind, LogEventKind::Unrecognised);
    }

    #[test]
    fn crlf_and_order() {
        let evs = parse_sync_log("a\r\n[2013-12-01 12:43:45] Requesting peers from server\r\nb");
        let raws: Vec<_> = evs.iter().map(|e| e.raw_line.as_str()).collect();
        assert_eq!(raws, ["a", "[2013-12-01 12:43:45] Requesting peers from server", "b"]);
        assert_eq!(evs[1].line, 2);
    }
}

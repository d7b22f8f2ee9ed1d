//! Correlation of disk artifacts, captured traffic and registry findings into
//! one report keyed by ShareId.

mod render;
mod timeline;

use std::collections::{BTreeMap, BTreeSet};
use std::net::SocketAddrV4;

use serde::Serialize;

use crate::diskarts::{
    registry_verdict, ArtifactBundle, FileRecord, InventoryHit, LogEventKind, RegistryFinding,
    RegistryVerdict,
};
use crate::keymat::{derive_share_id, KeyClass, PeerId, ShareId};
use crate::wiredissect::{CaptureAnalysis, ObservationSource, RelaySession, WireMessage};

pub use render::{render_report, ReportFormat};
pub use timeline::{build_timeline, sort_events, Event, EventSource};
use timeline::packet_ref;

/// Version of the JSON layout documented in `docs/report-schema.md`.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum DiscoveryMethod {
    Lan,
    Tracker,
    Relay,
    KnownHosts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum EvidenceKind {
    SyncDat,
    SyncId,
    DbWal,
    Pcap,
    Log,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Provenance {
    pub kind: EvidenceKind,
    pub reference: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileRecordEntry {
    /// `<db-wal path>@<byte offset>`.
    pub reference: String,
    pub record: FileRecord,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Totals {
    pub direct: u64,
    pub relay: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RelaySessionEntry {
    pub source: String,
    pub endpoints: (SocketAddrV4, SocketAddrV4),
    pub packet_indices: Vec<usize>,
    pub session: RelaySession,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ShareDossier {
    pub share_id: ShareId,
    pub secret: Option<String>,
    /// `Unknown` when no secret was recovered.
    pub access_class: KeyClass,
    pub folder_path: Option<String>,
    /// The 32-byte relay identifier stored as `pub_key` in sync.dat.
    #[serde(serialize_with = "crate::serde_hex::opt")]
    pub relay_share: Option<Vec<u8>>,
    pub file_records: Vec<FileRecordEntry>,
    pub invalidated_files: Vec<FileRecordEntry>,
    pub peers_seen: BTreeSet<PeerId>,
    pub discovery_methods_observed: BTreeSet<DiscoveryMethod>,
    /// Methods switched on in sync.dat, whether or not traffic shows them.
    pub discovery_methods_enabled: BTreeSet<DiscoveryMethod>,
    pub totals: Option<Totals>,
    pub relay_sessions: Vec<RelaySessionEntry>,
    pub provenance: Vec<Provenance>,
    pub corroboration: Vec<String>,
}

impl ShareDossier {
    fn new(share_id: ShareId) -> Self {
        ShareDossier {
            share_id,
            secret: None,
            access_class: KeyClass::Unknown,
            folder_path: None,
            relay_share: None,
            file_records: Vec::new(),
            invalidated_files: Vec::new(),
            peers_seen: BTreeSet::new(),
            discovery_methods_observed: BTreeSet::new(),
            discovery_methods_enabled: BTreeSet::new(),
            totals: None,
            relay_sessions: Vec::new(),
            provenance: Vec::new(),
            corroboration: Vec::new(),
        }
    }

    fn cite(&mut self, kind: EvidenceKind, reference: String) {
        self.provenance.push(Provenance { kind, reference });
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PeerDossier {
    pub peer_id: PeerId,
    pub shares: BTreeSet<ShareId>,
    pub endpoints: BTreeSet<SocketAddrV4>,
    pub evidence: BTreeSet<EvidenceKind>,
    /// Never empty: every peer is created from a cited record.
    pub citations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LogOnlyShare {
    pub share_id: ShareId,
    pub references: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UnmatchedRelay {
    pub source: String,
    pub endpoints: (SocketAddrV4, SocketAddrV4),
    pub packet_indices: Vec<usize>,
    pub session: Option<RelaySession>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CaseReport {
    pub schema_version: u32,
    pub shares: Vec<ShareDossier>,
    pub log_only_shares: Vec<LogOnlyShare>,
    pub peers: Vec<PeerDossier>,
    pub unmatched_relay: Vec<UnmatchedRelay>,
    pub timeline: Vec<Event>,
    pub registry_verdict: RegistryVerdict,
    pub registry_findings: Vec<RegistryFinding>,
    pub inventory: Vec<InventoryHit>,
    pub notes: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Default)]
struct Builder {
    shares: BTreeMap<ShareId, ShareDossier>,
    peers: BTreeMap<PeerId, PeerDossier>,
    log_only: BTreeMap<ShareId, Vec<String>>,
    unmatched_relay: Vec<UnmatchedRelay>,
    notes: Vec<String>,
    warnings: Vec<String>,
}

impl Builder {
    fn share(&mut self, id: ShareId) -> &mut ShareDossier {
        self.shares.entry(id).or_insert_with(|| ShareDossier::new(id))
    }

    fn peer(
        &mut self,
        id: PeerId,
        share: Option<ShareId>,
        endpoint: Option<SocketAddrV4>,
        kind: EvidenceKind,
        citation: String,
    ) {
        let p = self.peers.entry(id).or_insert_with(|| PeerDossier {
            peer_id: id,
            shares: BTreeSet::new(),
            endpoints: BTreeSet::new(),
            evidence: BTreeSet::new(),
            citations: Vec::new(),
        });
        p.shares.extend(share);
        p.endpoints.extend(endpoint.filter(|e| !e.ip().is_unspecified()));
        p.evidence.insert(kind);
        if !p.citations.contains(&citation) {
            p.citations.push(citation);
        }
        if let Some(s) = share.and_then(|s| self.shares.get_mut(&s)) {
            s.peers_seen.insert(id);
        }
    }
}

fn normalise_path(p: &str) -> String {
    p.trim_start_matches(r"\\?\").trim_end_matches(['\\', '/']).to_lowercase()
}

/// Builds the case report. Never fails: inconsistencies become warnings that
/// name the file or packet they came from. Parse warnings already collected
/// in the bundle are carried over unchanged.
///
/// Dossiers are anchored by sync.dat entries (ShareId derived from the
/// secret), `.SyncID` files, `<ShareID>.db-wal` names and captured packets.
/// Log lines attach to existing dossiers; a ShareId seen only in the log is
/// listed separately.
pub fn correlate(artifacts: &ArtifactBundle, captures: &[CaptureAnalysis]) -> CaseReport {
    let mut b = Builder { warnings: artifacts.warnings.clone(), ..Builder::default() };

    for sd in &artifacts.sync_dat {
        for (i, cfg) in sd.data.shares.iter().enumerate() {
            let reference = format!("{} share[{i}]", sd.source);
            let Some(secret) = &cfg.secret else {
                b.warnings.push(format!("{reference}: no usable secret, share cannot be keyed"));
                continue;
            };
            let id = derive_share_id(secret);
            let d = b.share(id);
            if let Some(prev) = &d.secret {
                if prev != secret.raw() {
                    let msg = format!("{reference}: second secret for share {id} differs from earlier entry");
                    b.warnings.push(msg);
                    continue;
                }
            }
            let d = b.share(id);
            d.secret = Some(secret.raw().to_string());
            d.access_class = secret.class();
            d.folder_path.get_or_insert_with(|| cfg.path.clone());
            if d.relay_share.is_none() {
                d.relay_share = cfg.pub_key.clone();
            }
            d.totals = Some(Totals { direct: cfg.direct_total, relay: cfg.relay_total });
            let enabled = [
                (cfg.use_lan_broadcast, DiscoveryMethod::Lan),
                (cfg.use_tracker, DiscoveryMethod::Tracker),
                (cfg.use_relay, DiscoveryMethod::Relay),
                (cfg.use_known_hosts, DiscoveryMethod::KnownHosts),
            ];
            d.discovery_methods_enabled
                .extend(enabled.into_iter().filter(|(on, _)| *on).map(|(_, m)| m));
            d.cite(EvidenceKind::SyncDat, reference.clone());
            for peer in &cfg.peers {
                b.peer(*peer, Some(id), None, EvidenceKind::SyncDat, reference.clone());
            }
        }
    }

    for sid in &artifacts.sync_ids {
        b.share(sid.share_id).cite(EvidenceKind::SyncId, sid.source.clone());
    }

    for wal in &artifacts.db_wal {
        let Some(id) = wal.share_id else {
            if !wal.scan.records.is_empty() {
                b.warnings.push(format!(
                    "{}: file name is not a ShareId; {} record(s) not attributed",
                    wal.source,
                    wal.scan.records.len()
                ));
            }
            continue;
        };
        let d = b.share(id);
        d.cite(EvidenceKind::DbWal, wal.source.clone());
        for carved in &wal.scan.records {
            let entry = FileRecordEntry {
                reference: format!("{}@{}", wal.source, carved.offset),
                record: carved.record.clone(),
            };
            if entry.record.invalidated {
                d.invalidated_files.push(entry.clone());
            }
            d.file_records.push(entry);
        }
        for carved in &wal.scan.records {
            let citation = format!("{}@{}", wal.source, carved.offset);
            b.peer(carved.record.owner, Some(id), None, EvidenceKind::DbWal, citation);
        }
    }

    for cap in captures {
        for m in &cap.messages {
            let reference = packet_ref(&cap.source, m.packet_index);
            let mut credit = |id: ShareId, method: DiscoveryMethod| {
                let d = b.share(id);
                d.discovery_methods_observed.insert(method);
                d.cite(EvidenceKind::Pcap, reference.clone());
            };
            match &m.message {
                WireMessage::LanPing { share, multicast, .. } => credit(
                    *share,
                    if *multicast { DiscoveryMethod::Lan } else { DiscoveryMethod::KnownHosts },
                ),
                WireMessage::TrackerGetPeers { share, .. } => {
                    credit(*share, DiscoveryMethod::Tracker)
                }
                WireMessage::TrackerPeersResponse { entries } => {
                    for e in entries {
                        credit(e.share, DiscoveryMethod::Tracker);
                    }
                }
                _ => {}
            }
        }
        for obs in &cap.observations {
            let reference = packet_ref(&cap.source, obs.packet_index);
            let mut share = obs.share;
            if obs.source == ObservationSource::Relay {
                share = obs.relay_share.as_ref().and_then(|r| relay_owner(&b.shares, r));
            }
            if obs.source == ObservationSource::Lan {
                if let Some(d) = share.and_then(|s| b.shares.get_mut(&s)) {
                    d.discovery_methods_observed.insert(DiscoveryMethod::Lan);
                }
            }
            b.peer(obs.peer, share, obs.endpoint, EvidenceKind::Pcap, reference);
        }
        for conv in &cap.relay {
            let owner = conv
                .session
                .as_ref()
                .and_then(|s| relay_owner(&b.shares, &s.share32));
            match (owner, &conv.session) {
                (Some(id), Some(session)) => {
                    let d = b.share(id);
                    d.discovery_methods_observed.insert(DiscoveryMethod::Relay);
                    for idx in &conv.packet_indices {
                        d.cite(EvidenceKind::Pcap, packet_ref(&cap.source, *idx));
                    }
                    d.relay_sessions.push(RelaySessionEntry {
                        source: cap.source.clone(),
                        endpoints: conv.endpoints,
                        packet_indices: conv.packet_indices.clone(),
                        session: session.clone(),
                    });
                }
                _ => {
                    if let Some(err) = &conv.error {
                        b.warnings.push(format!(
                            "{}: relay conversation {} <-> {} (packets {:?}): {err}",
                            cap.source, conv.endpoints.0, conv.endpoints.1, conv.packet_indices
                        ));
                    }
                    b.unmatched_relay.push(UnmatchedRelay {
                        source: cap.source.clone(),
                        endpoints: conv.endpoints,
                        packet_indices: conv.packet_indices.clone(),
                        session: conv.session.clone(),
                        error: conv.error.clone(),
                    });
                }
            }
        }
    }

    for log in &artifacts.sync_logs {
        if log.empty {
            b.notes.push(format!(
                "{}: present but empty; the log is emptied on uninstall, so this may indicate removal",
                log.source
            ));
        }
        for ev in &log.events {
            let reference = format!("{}:{}", log.source, ev.line);
            if ev.kind == LogEventKind::Unrecognised {
                b.warnings.push(format!("{reference}: unrecognised log line"));
                continue;
            }
            let mut share = ev.share;
            if share.is_none() && ev.kind == LogEventKind::PeerFound {
                share = ev.folder_path.as_deref().and_then(|p| {
                    let p = normalise_path(p);
                    b.shares
                        .values()
                        .find(|d| d.folder_path.as_deref().map(normalise_path) == Some(p.clone()))
                        .map(|d| d.share_id)
                });
            }
            let known = share.filter(|s| b.shares.contains_key(s));
            match (share, known) {
                (_, Some(id)) => {
                    let d = b.share(id);
                    d.cite(EvidenceKind::Log, reference.clone());
                    let broadcast = matches!(ev.kind, LogEventKind::BroadcastPingSent)
                        || (ev.kind == LogEventKind::PingReceived && ev.broadcast == Some(true));
                    if broadcast {
                        d.discovery_methods_observed.insert(DiscoveryMethod::Lan);
                    }
                }
                (Some(id), None) => b.log_only.entry(id).or_default().push(reference.clone()),
                (None, None) => {}
            }
            if let Some(peer) = ev.peer {
                b.peer(peer, known, ev.endpoint, EvidenceKind::Log, reference);
            }
        }
    }

    for (id, refs) in &b.log_only {
        b.warnings.push(format!(
            "{}: share {id} appears only in the log; no dossier created",
            refs[0]
        ));
    }

    for d in b.shares.values_mut() {
        if d.secret.is_none() {
            continue;
        }
        let mut seen = BTreeSet::new();
        for p in &d.provenance {
            if p.kind == EvidenceKind::SyncDat {
                continue;
            }
            let file = p.reference.split(['#', '@']).next().unwrap_or(&p.reference);
            let file = if p.kind == EvidenceKind::Log {
                p.reference.rsplit_once(':').map_or(file, |(f, _)| f)
            } else {
                file
            };
            if seen.insert((p.kind, file.to_string())) {
                d.corroboration.push(format!(
                    "SHA-1 of the sync.dat secret equals the ShareId in {}",
                    p.reference
                ));
            }
        }
    }

    let timeline = build_timeline(artifacts, captures);
    let has_log_time = timeline.iter().any(|e| !e.timezone_known);
    let has_utc_time = timeline.iter().any(|e| e.source == EventSource::Pcap);
    if has_log_time && has_utc_time {
        b.notes.push(
            "sync.log times carry no zone and are merged as if UTC; capture times are UTC. \
             No clock-skew correction is applied."
                .to_string(),
        );
    }
    let verdict = registry_verdict(&artifacts.registry);
    if verdict != RegistryVerdict::Installed
        && artifacts.inventory.iter().any(|h| h.purpose == "Main Executable")
    {
        b.notes.push("main executable present on disk although the registry does not show an install".into());
    }

    CaseReport {
        schema_version: SCHEMA_VERSION,
        shares: b.shares.into_values().collect(),
        log_only_shares: b
            .log_only
            .into_iter()
            .map(|(share_id, references)| LogOnlyShare { share_id, references })
            .collect(),
        peers: b.peers.into_values().collect(),
        unmatched_relay: b.unmatched_relay,
        timeline,
        registry_verdict: verdict,
        registry_findings: artifacts.registry.clone(),
        inventory: artifacts.inventory.clone(),
        notes: b.notes,
        warnings: b.warnings,
    }
}

/// The relay identifier can only be tied to a share through sync.dat's
/// `pub_key`; how it is derived is not known.
fn relay_owner(shares: &BTreeMap<ShareId, ShareDossier>, share32: &[u8]) -> Option<ShareId> {
    shares
        .values()
        .find(|d| d.relay_share.as_deref() == Some(share32))
        .map(|d| d.share_id)
}

use std::fmt::Write;

use super::CaseReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Json,
    Text,
}

/// Renders deterministically: the same report always yields the same bytes.
pub fn render_report(report: &CaseReport, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(report).expect("report serialises");
            out.push(b'\n');
            out
        }
        ReportFormat::Text => render_text(report).into_bytes(),
    }
}

fn render_text(r: &CaseReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Case report (schema {})", r.schema_version);
    let _ = writeln!(s, "Registry verdict: {:?}", r.registry_verdict);
    let _ = writeln!(s, "Shares: {}  Peers: {}  Timeline events: {}", r.shares.len(), r.peers.len(), r.timeline.len());
    for d in &r.shares {
        let _ = writeln!(s, "\n== Share {} ==", d.share_id);
        let _ = writeln!(s, "  access class: {}", d.access_class);
        if let Some(p) = &d.folder_path {
            let _ = writeln!(s, "  folder: {p}");
        }
        if let Some(t) = &d.totals {
            let _ = writeln!(s, "  bytes: direct {} relay {}", t.direct, t.relay);
        }
        let methods: Vec<String> =
            d.discovery_methods_observed.iter().map(|m| format!("{m:?}")).collect();
        let _ = writeln!(s, "  discovery observed: {}", join_or_none(&methods));
        let _ = writeln!(
            s,
            "  files: {} ({} invalidated)",
            d.file_records.len(),
            d.invalidated_files.len()
        );
        for f in &d.file_records {
            let _ = writeln!(
                s,
                "    {}{} [{}]",
                String::from_utf8_lossy(&f.record.rel_path),
                if f.record.invalidated { " (invalidated)" } else { "" },
                f.reference
            );
        }
        let _ = writeln!(s, "  peers seen: {}", d.peers_seen.len());
        for p in &d.peers_seen {
            let _ = writeln!(s, "    {p}");
        }
        for c in &d.corroboration {
            let _ = writeln!(s, "  corroborated: {c}");
        }
        let _ = writeln!(s, "  relay sessions: {}", d.relay_sessions.len());
    }
    if !r.log_only_shares.is_empty() {
        let _ = writeln!(s, "\nShares seen only in logs:");
        for l in &r.log_only_shares {
            let _ = writeln!(s, "  {} [{}]", l.share_id, l.references.join(", "));
        }
    }
    if !r.peers.is_empty() {
        let _ = writeln!(s, "\nPeers:");
        for p in &r.peers {
            let eps: Vec<String> = p.endpoints.iter().map(|e| e.to_string()).collect();
            let _ = writeln!(s, "  {}  endpoints: {}  cited: {}", p.peer_id, join_or_none(&eps), p.citations.len());
        }
    }
    if !r.timeline.is_empty() {
        let _ = writeln!(s, "\nTimeline:");
        for e in &r.timeline {
            let zone = if e.timezone_known { "UTC" } else { "zone?" };
            let _ = writeln!(s, "  {} {zone:5} {:?}: {}", e.timestamp, e.source, e.description);
        }
    }
    for (title, items) in [("Notes", &r.notes), ("Warnings", &r.warnings)] {
        if !items.is_empty() {
            let _ = writeln!(s, "\n{title}:");
            for n in items {
                let _ = writeln!(s, "  {n}");
            }
        }
    }
    s
}

fn join_or_none(items: &[String]) -> String {
    if items.is_empty() { "none".to_string() } else { items.join(", ") }
}

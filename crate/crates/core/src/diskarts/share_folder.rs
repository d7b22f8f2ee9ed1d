//! Control files inside a share folder: `.SyncID`, `.SyncIgnore`, the
//! `.SyncArchive` subfolder and in-flight `.!sync` deltas.

use std::sync::OnceLock;

use regex::Regex;
use serde::Serialize;

use super::DiskError;
use crate::keymat::ShareId;

pub const SYNC_ID: &str = ".SyncID";
pub const SYNC_IGNORE: &str = ".SyncIgnore";
pub const SYNC_ARCHIVE: &str = ".SyncArchive";

pub fn parse_sync_id(input: &[u8]) -> Result<ShareId, DiskError> {
    ShareId::from_slice(input).map_err(|_| DiskError::WrongLength(input.len()))
}

/// One pattern per line; blank lines and `#` comments are skipped.
pub fn parse_sync_ignore(input: &[u8]) -> Vec<String> {
    String::from_utf8_lossy(input)
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ListingEntry {
    /// Path relative to the folder root, `/` or `\` separated.
    pub path: String,
    pub size: Option<u64>,
    pub is_dir: bool,
}

impl ListingEntry {
    pub fn file(path: impl Into<String>) -> Self {
        ListingEntry { path: path.into(), size: None, is_dir: false }
    }

    pub fn dir(path: impl Into<String>) -> Self {
        ListingEntry { path: path.into(), size: None, is_dir: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InFlightDelta {
    pub path: String,
    /// Name the delta will be renamed to once merged.
    pub target: String,
    pub size: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ShareFolderSummary {
    pub is_share_root: bool,
    pub has_sync_id: bool,
    pub has_sync_ignore: bool,
    pub has_sync_archive: bool,
    pub in_flight: Vec<InFlightDelta>,
    /// Files held in `.SyncArchive`, i.e. deleted on a remote peer.
    pub archived: Vec<String>,
}

fn delta_suffix() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // `name.!sync`, `name.!sync(2)`, `name.!sync.!sync1`
    RE.get_or_init(|| Regex::new(r"(?:\.!sync(?:\(\d+\)|\d+)?)+$").unwrap())
}

fn split(path: &str) -> Vec<&str> {
    path.split(['/', '\\']).filter(|s| !s.is_empty()).collect()
}

pub fn scan_share_folder(listing: &[ListingEntry]) -> ShareFolderSummary {
    let mut s = ShareFolderSummary::default();
    for entry in listing {
        let parts = split(&entry.path);
        let Some(first) = parts.first() else { continue };
        let top_level = parts.len() == 1;
        if top_level && first.eq_ignore_ascii_case(SYNC_ID) && !entry.is_dir {
            s.has_sync_id = true;
        } else if top_level && first.eq_ignore_ascii_case(SYNC_IGNORE) && !entry.is_dir {
            s.has_sync_ignore = true;
        } else if first.eq_ignore_ascii_case(SYNC_ARCHIVE) {
            s.has_sync_archive = true;
            if !top_level && !entry.is_dir {
                s.archived.push(parts[1..].join("/"));
            }
        } else if !entry.is_dir {
            let name = parts[parts.len() - 1];
            if let Some(m) = delta_suffix().find(name) {
                let mut target: Vec<&str> = parts[..parts.len() - 1].to_vec();
                target.push(&name[..m.start()]);
                s.in_flight.push(InFlightDelta {
                    path: parts.join("/"),
                    target: target.join("/"),
                    size: entry.size,
                });
            }
        }
    }
    let controls = [s.has_sync_id, s.has_sync_ignore, s.has_sync_archive];
    s.is_share_root = s.has_sync_id || controls.iter().filter(|&&c| c).count() >= 2;
    s
}

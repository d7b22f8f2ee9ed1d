//! Walks a mounted image (or any directory) and parses every artifact it
//! recognises by name. Known install paths are matched by suffix so the
//! mount prefix does not matter.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use walkdir::WalkDir;

use super::{
    carve_db_wal, decode_reg_bytes, parse_registry_export, parse_settings_dat, parse_sync_dat,
    parse_sync_id, parse_sync_ignore, parse_sync_log, scan_share_folder, DbWalScan, ListingEntry,
    RegistryFinding, SettingsDat, ShareFolderSummary, SyncDat, SyncLogEvent, SYNC_ARCHIVE,
    SYNC_ID, SYNC_IGNORE,
};
use crate::keymat::ShareId;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sourced<T> {
    pub source: String,
    pub data: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogArtifact {
    pub source: String,
    /// Present but zero-length; observed after uninstallation.
    pub empty: bool,
    pub events: Vec<SyncLogEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DbWalArtifact {
    pub source: String,
    /// Taken from the `<ShareID>.db-wal` file name.
    pub share_id: Option<ShareId>,
    pub scan: DbWalScan,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyncIdArtifact {
    pub source: String,
    pub share_id: ShareId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InventoryHit {
    pub source: String,
    pub purpose: &'static str,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ArtifactBundle {
    pub sync_dat: Vec<Sourced<SyncDat>>,
    pub settings_dat: Vec<Sourced<SettingsDat>>,
    pub sync_logs: Vec<LogArtifact>,
    pub db_wal: Vec<DbWalArtifact>,
    pub sync_ids: Vec<SyncIdArtifact>,
    pub sync_ignores: Vec<Sourced<Vec<String>>>,
    pub share_folders: Vec<Sourced<ShareFolderSummary>>,
    pub inventory: Vec<InventoryHit>,
    pub registry: Vec<RegistryFinding>,
    pub warnings: Vec<String>,
}

// Lower-case path suffixes of the default install footprint.
const INVENTORY: [(&str, &str); 10] = [
    ("program files/bittorrent sync/btsync.exe", "Main Executable"),
    ("application data/bittorrent sync", "Application folder"),
    ("application data/bittorrent sync/settings.dat", "Configuration Settings"),
    ("application data/bittorrent sync/sync.log", "Log of Synchronisation Activity"),
    ("application data/bittorrent sync/sync.lng", "Language File"),
    ("all users/desktop/bittorrent sync.lnk", "Application Shortcut"),
    ("all users/start menu/bittorrent sync.lnk", "Application Shortcut"),
    ("all users/quick start/bittorrent sync.lnk", "Application Shortcut"),
    ("all users/desktop/btsync.lnk", "Application Shortcut"),
    ("appdata/roaming/bittorrent sync", "Application folder"),
];

fn inventory_purpose(rel: &str) -> Option<&'static str> {
    let lower = rel.to_ascii_lowercase();
    if lower.contains("application data/microsoft/crypto/")
        && lower.rsplit('/').next().is_some_and(|l| l.starts_with("s-1-5-21"))
    {
        return Some("Private Key");
    }
    INVENTORY
        .iter()
        .find(|(suffix, _)| lower == *suffix || lower.ends_with(&format!("/{suffix}")))
        .map(|(_, purpose)| *purpose)
}

fn relative(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    let s = rel
        .components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/");
    if s.is_empty() {
        ".".to_owned()
    } else {
        s
    }
}

fn is_share_id_stem(name: &str) -> Option<ShareId> {
    let stem = name.get(..name.len().checked_sub(".db-wal".len())?)?;
    ShareId::parse_hex(stem).ok()
}

fn has_control_entry(dir: &Path) -> io::Result<bool> {
    for entry in fs::read_dir(dir)? {
        let name = entry?.file_name();
        let name = name.to_string_lossy();
        if [SYNC_ID, SYNC_IGNORE, SYNC_ARCHIVE].iter().any(|c| c.eq_ignore_ascii_case(&name)) {
            return Ok(true);
        }
    }
    Ok(false)
}

fn listing(dir: &Path) -> Vec<ListingEntry> {
    WalkDir::new(dir)
        .min_depth(1)
        .sort_by_file_name()
        .into_iter()
        .filter_map(Result::ok)
        .map(|e| ListingEntry {
            path: relative(dir, e.path()),
            size: e.metadata().ok().filter(|m| m.is_file()).map(|m| m.len()),
            is_dir: e.file_type().is_dir(),
        })
        .collect()
}

/// Walks `root` in file-name order and parses every recognised artifact.
/// Parse failures become warnings naming the file.
pub fn collect_artifacts(root: &Path, registry: Option<&Path>) -> io::Result<ArtifactBundle> {
    let mut bundle = ArtifactBundle::default();
    if !root.is_dir() {
        return Err(io::Error::new(
            io::ErrorKind::NotFound,
            format!("{} is not a directory", root.display()),
        ));
    }
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = match entry {
            Ok(e) => e,
            Err(e) => {
                bundle.warnings.push(format!("walk: {e}"));
                continue;
            }
        };
        let rel = relative(root, entry.path());
        if let Some(purpose) = inventory_purpose(&rel) {
            bundle.inventory.push(InventoryHit { source: rel.clone(), purpose });
        }
        if entry.file_type().is_dir() {
            if has_control_entry(entry.path()).unwrap_or(false) {
                let summary = scan_share_folder(&listing(entry.path()));
                bundle.share_folders.push(Sourced { source: rel, data: summary });
            }
            continue;
        }
        if !entry.file_type().is_file() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().to_ascii_lowercase();
        let wanted = matches!(
            name.as_str(),
            "sync.dat" | "sync.dat.old" | "sync.dat.new" | "settings.dat" | "settings.dat.old"
                | "sync.log" | ".syncid" | ".syncignore"
        ) || name.ends_with(".db-wal");
        if !wanted {
            continue;
        }
        let bytes = match fs::read(entry.path()) {
            Ok(b) => b,
            Err(e) => {
                bundle.warnings.push(format!("{rel}: {e}"));
                continue;
            }
        };
        add_file(&mut bundle, &name, rel, &bytes);
    }

    if let Some(reg) = registry {
        let text = decode_reg_bytes(&fs::read(reg)?);
        match parse_registry_export(&text) {
            Ok(f) => bundle.registry = f,
            Err(e) => bundle.warnings.push(format!("{}: {e}", reg.display())),
        }
    }
    Ok(bundle)
}

fn add_file(bundle: &mut ArtifactBundle, name: &str, rel: String, bytes: &[u8]) {
    match name {
        "sync.dat" | "sync.dat.old" | "sync.dat.new" => match parse_sync_dat(bytes) {
            Ok(dat) => {
                for share in &dat.shares {
                    bundle.warnings.extend(share.warnings.iter().map(|w| format!("{rel}: {w}")));
                }
                bundle.sync_dat.push(Sourced { source: rel, data: dat });
            }
            Err(e) => bundle.warnings.push(format!("{rel}: {e}")),
        },
        "settings.dat" | "settings.dat.old" => match parse_settings_dat(bytes) {
            Ok(s) => bundle.settings_dat.push(Sourced { source: rel, data: s }),
            Err(e) => bundle.warnings.push(format!("{rel}: {e}")),
        },
        "sync.log" => {
            let text = String::from_utf8_lossy(bytes);
            bundle.sync_logs.push(LogArtifact {
                source: rel,
                empty: bytes.is_empty(),
                events: parse_sync_log(&text),
            });
        }
        ".syncid" => match parse_sync_id(bytes) {
            Ok(id) => bundle.sync_ids.push(SyncIdArtifact { source: rel, share_id: id }),
            Err(e) => bundle.warnings.push(format!("{rel}: {e}")),
        },
        ".syncignore" => bundle.sync_ignores.push(Sourced { source: rel, data: parse_sync_ignore(bytes) }),
        _ => {
            let scan = carve_db_wal(bytes);
            if scan.truncated > 0 || scan.rejected > 0 {
                bundle.warnings.push(format!(
                    "{rel}: {} truncated and {} rejected record blocks",
                    scan.truncated, scan.rejected
                ));
            }
            bundle.db_wal.push(DbWalArtifact { source: rel, share_id: is_share_id_stem(name), scan });
        }
    }
}

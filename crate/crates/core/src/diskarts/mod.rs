//! Parsers for everything the client leaves on disk.

mod db_wal;
mod inventory;
mod registry;
mod share_folder;
mod state_files;
mod sync_log;

use thiserror::Error;

use crate::bencode::MalformedBencode;

pub use db_wal::{carve_db_wal, parse_db_wal, CarvedRecord, DbWalScan, FileRecord};
pub use inventory::{
    collect_artifacts, ArtifactBundle, DbWalArtifact, InventoryHit, LogArtifact, Sourced,
    SyncIdArtifact,
};
pub use registry::{
    abbreviate_hive, catalogued_patterns, decode_reg_bytes, match_keys, parse_reg_keys,
    parse_registry_export, registry_verdict, rot13, RegKey, RegValue, RegistryFinding,
    RegistryPhase, RegistryVerdict,
};
pub use share_folder::{
    parse_sync_id, parse_sync_ignore, scan_share_folder, InFlightDelta, ListingEntry,
    ShareFolderSummary, SYNC_ARCHIVE, SYNC_ID, SYNC_IGNORE,
};
pub use state_files::{parse_settings_dat, parse_sync_dat, SettingsDat, ShareConfig, SyncDat};
pub use sync_log::{parse_line, parse_sync_log, LogEventKind, SyncLogEvent, LOG_TIME_FORMAT};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiskError {
    #[error(transparent)]
    Bencode(#[from] MalformedBencode),
    #[error("top-level value is not a dictionary")]
    NotADictionary,
    #[error("share {0} is missing field `{1}`")]
    MissingField(usize, &'static str),
    #[error("expected 20 bytes, found {0}")]
    WrongLength(usize),
    #[error("malformed registry export at line {0}")]
    MalformedRegExport(usize),
}

//! Forensic parsing and correlation for BitTorrent Sync.
//!
//! * [`bencode`]: the serialisation shared by the wire protocol and the
//!   on-disk state files.
//! * [`keymat`]: share secrets and the 20-byte share/peer identifiers.
//! * [`diskarts`]: `sync.dat`, `settings.dat`, db-wal records, `sync.log`,
//!   share control files and registry exports.
//! * [`wiredissect`]: pcap reading and classification of discovery, tracker
//!   and relay packets.
//! * [`casereport`]: correlation of all of the above into one report.
#![forbid(unsafe_code)]

pub mod bencode;
pub mod casereport;
pub mod diskarts;
pub mod keymat;
pub mod wiredissect;
mod serde_hex;

pub use bencode::{parse_bencode, serialise_bencode, BValue, MalformedBencode};
pub use keymat::{classify_secret, derive_share_id, KeyClass, PeerId, SecretKey, ShareId};

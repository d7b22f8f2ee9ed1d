//! `sync.dat` and `settings.dat`: bencoded dictionaries guarded by a
//! `fileguard` hash.

use std::collections::BTreeMap;

use serde::Serialize;

use super::DiskError;
use crate::bencode::{parse_bencode_exact, BValue};
use crate::keymat::{classify_secret, PeerId, SecretKey};

/// One share entry from `sync.dat`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShareConfig {
    pub path: String,
    pub secret_raw: String,
    /// `None` when the stored secret fails format validation; a warning is
    /// recorded in that case.
    pub secret: Option<SecretKey>,
    /// 32-byte identifier used in relay messages.
    #[serde(serialize_with = "crate::serde_hex::opt")]
    pub pub_key: Option<Vec<u8>>,
    pub stopped_by_user: bool,
    pub use_dht: bool,
    pub use_lan_broadcast: bool,
    pub use_relay: bool,
    pub use_tracker: bool,
    pub use_known_hosts: bool,
    pub known_hosts: Vec<String>,
    pub peers: Vec<PeerId>,
    pub last_sync_completed: i64,
    #[serde(serialize_with = "crate::serde_hex::list")]
    pub invites: Vec<Vec<u8>>,
    pub folder_type: i64,
    pub delete_to_trash: bool,
    pub mutex_file_initialized: bool,
    pub direct_total: u64,
    pub relay_total: u64,
    /// Keys not modelled above, kept verbatim.
    #[serde(serialize_with = "crate::serde_hex::extras")]
    pub extras: BTreeMap<Vec<u8>, BValue>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyncDat {
    pub shares: Vec<ShareConfig>,
    /// Stored verbatim; the salt is unknown so it is not verified.
    #[serde(serialize_with = "crate::serde_hex::bytes")]
    pub fileguard: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SettingsDat {
    #[serde(serialize_with = "crate::serde_hex::extras")]
    pub settings: BTreeMap<Vec<u8>, BValue>,
    #[serde(serialize_with = "crate::serde_hex::bytes")]
    pub fileguard: Vec<u8>,
}

const SHARE_LISTS: [&str; 2] = ["folders", "shares"];

fn top_level(input: &[u8]) -> Result<BTreeMap<Vec<u8>, BValue>, DiskError> {
    match parse_bencode_exact(input)? {
        BValue::Dict(d) => Ok(d),
        _ => Err(DiskError::NotADictionary),
    }
}

fn take_fileguard(map: &mut BTreeMap<Vec<u8>, BValue>) -> Vec<u8> {
    match map.remove(&b"fileguard"[..]) {
        Some(BValue::Bytes(b)) => b,
        Some(other) => crate::bencode::serialise_bencode(&other),
        None => Vec::new(),
    }
}

pub fn parse_sync_dat(input: &[u8]) -> Result<SyncDat, DiskError> {
    let mut map = top_level(input)?;
    let fileguard = take_fileguard(&mut map);
    let entries = SHARE_LISTS
        .iter()
        .find_map(|k| map.get(k.as_bytes()).and_then(BValue::as_list))
        .unwrap_or(&[]);
    let shares = entries
        .iter()
        .enumerate()
        .map(|(i, e)| share_entry(i, e))
        .collect::<Result<_, _>>()?;
    Ok(SyncDat { shares, fileguard })
}

pub fn parse_settings_dat(input: &[u8]) -> Result<SettingsDat, DiskError> {
    let mut settings = top_level(input)?;
    let fileguard = take_fileguard(&mut settings);
    Ok(SettingsDat { settings, fileguard })
}

struct Fields<'a> {
    index: usize,
    map: BTreeMap<Vec<u8>, BValue>,
    warnings: &'a mut Vec<String>,
}

impl Fields<'_> {
    fn take(&mut self, key: &str) -> Option<BValue> {
        self.map.remove(key.as_bytes())
    }

    fn string(&mut self, key: &str) -> Option<String> {
        match self.take(key)? {
            BValue::Bytes(b) => Some(String::from_utf8_lossy(&b).into_owned()),
            other => {
                self.warn(key, "is not a byte string");
                self.map.insert(key.as_bytes().to_vec(), other);
                None
            }
        }
    }

    fn flag(&mut self, key: &str) -> bool {
        match self.take(key) {
            None => false,
            Some(BValue::Int(0)) => false,
            Some(BValue::Int(1)) => true,
            Some(other) => {
                self.warn(key, "is not 0 or 1");
                self.map.insert(key.as_bytes().to_vec(), other);
                false
            }
        }
    }

    fn int(&mut self, key: &str) -> i64 {
        match self.take(key) {
            None => 0,
            Some(BValue::Int(i)) => i,
            Some(other) => {
                self.warn(key, "is not an integer");
                self.map.insert(key.as_bytes().to_vec(), other);
                0
            }
        }
    }

    fn counter(&mut self, key: &str) -> u64 {
        let v = self.int(key);
        u64::try_from(v).unwrap_or_else(|_| {
            self.warn(key, "is negative");
            0
        })
    }

    fn warn(&mut self, key: &str, what: &str) {
        self.warnings
            .push(format!("sync.dat share[{}]: field {key} {what}", self.index));
    }
}

fn share_entry(index: usize, entry: &BValue) -> Result<ShareConfig, DiskError> {
    let map = entry
        .as_dict()
        .cloned()
        .ok_or(DiskError::MissingField(index, "path"))?;
    let mut warnings = Vec::new();
    let mut f = Fields { index, map, warnings: &mut warnings };

    let path = f.string("path").ok_or(DiskError::MissingField(index, "path"))?;
    let secret_raw = f
        .string("secret")
        .ok_or(DiskError::MissingField(index, "secret"))?;
    let secret = match classify_secret(&secret_raw) {
        Ok(k) => Some(k),
        Err(e) => {
            f.warnings.push(format!("sync.dat share[{index}]: {e}"));
            None
        }
    };
    let pub_key = match f.take("pub_key") {
        None => None,
        Some(BValue::Bytes(b)) => {
            if b.len() != 32 {
                f.warn("pub_key", &format!("has {} bytes, expected 32", b.len()));
            }
            Some(b)
        }
        Some(other) => {
            f.warn("pub_key", "is not a byte string");
            f.map.insert(b"pub_key".to_vec(), other);
            None
        }
    };
    let stopped_by_user = f.flag("stopped_by_user");
    let use_dht = f.flag("use_dht");
    let use_lan_broadcast = f.flag("use_lan_broadcast");
    let use_relay = f.flag("use_relay");
    let use_tracker = f.flag("use_tracker");
    let use_known_hosts = f.flag("use_known_hosts");
    let known_hosts = match f.take("known_hosts") {
        None => Vec::new(),
        Some(BValue::Bytes(b)) => String::from_utf8_lossy(&b)
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(str::to_owned)
            .collect(),
        Some(BValue::List(items)) => items
            .iter()
            .filter_map(BValue::as_bytes)
            .map(|b| String::from_utf8_lossy(b).into_owned())
            .collect(),
        Some(other) => {
            f.warn("known_hosts", "has an unexpected shape");
            f.map.insert(b"known_hosts".to_vec(), other);
            Vec::new()
        }
    };
    let peers = match f.take("peers") {
        None => Vec::new(),
        Some(BValue::List(items)) => {
            let mut out = Vec::new();
            for item in &items {
                match peer_from_entry(item) {
                    Some(p) => out.push(p),
                    None => f.warn("peers", "contains an entry without a 20-byte peer id"),
                }
            }
            out
        }
        Some(other) => {
            f.warn("peers", "is not a list");
            f.map.insert(b"peers".to_vec(), other);
            Vec::new()
        }
    };
    let last_sync_completed = f.int("last_sync_completed");
    let invites = match f.take("invites") {
        None => Vec::new(),
        Some(BValue::List(items)) => items
            .iter()
            .map(|i| match i {
                BValue::Bytes(b) => b.clone(),
                other => crate::bencode::serialise_bencode(other),
            })
            .collect(),
        Some(BValue::Bytes(b)) => vec![b],
        Some(other) => {
            f.warn("invites", "has an unexpected shape");
            f.map.insert(b"invites".to_vec(), other);
            Vec::new()
        }
    };
    let folder_type = f.int("folder_type");
    let delete_to_trash = f.flag("delete_to_trash");
    let mutex_file_initialized = f.flag("mutex_file_initialized");
    let direct_total = f.counter("directTotal");
    let relay_total = f.counter("relayTotal");
    let extras = std::mem::take(&mut f.map);

    Ok(ShareConfig {
        path,
        secret_raw,
        secret,
        pub_key,
        stopped_by_user,
        use_dht,
        use_lan_broadcast,
        use_relay,
        use_tracker,
        use_known_hosts,
        known_hosts,
        peers,
        last_sync_completed,
        invites,
        folder_type,
        delete_to_trash,
        mutex_file_initialized,
        direct_total,
        relay_total,
        extras,
        warnings,
    })
}

/// Peers are stored either as bare ids or as small dictionaries carrying
/// the id under `id` or `peer`.
fn peer_from_entry(item: &BValue) -> Option<PeerId> {
    let bytes = match item {
        BValue::Bytes(b) => b.as_slice(),
        BValue::Dict(_) => item.get("id").or_else(|| item.get("peer"))?.as_bytes()?,
        _ => return None,
    };
    PeerId::from_slice(bytes).ok()
}

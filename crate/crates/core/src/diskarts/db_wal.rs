//! Carving of bencoded per-file records out of `<ShareID>.db-wal`.
//!
//! The surrounding SQLite WAL framing is not interpreted. The carver tries a
//! bencode parse at every `d` byte, keeps dictionaries that look like file
//! records, and otherwise moves on by one byte.

use serde::Serialize;

use crate::bencode::{parse_bencode, BValue};
use crate::keymat::PeerId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileRecord {
    #[serde(serialize_with = "crate::serde_hex::text_or_hex")]
    pub filename: Vec<u8>,
    pub invalidated: bool,
    #[serde(serialize_with = "crate::serde_hex::array")]
    pub main_hash: [u8; 20],
    pub mtime: i64,
    pub npieces: i64,
    pub owner: PeerId,
    #[serde(serialize_with = "crate::serde_hex::text_or_hex")]
    pub rel_path: Vec<u8>,
    pub perm: i64,
    pub size: u64,
    pub state: i64,
    pub timestamp: i64,
    pub record_type: i64,
    pub pvtime: i64,
    #[serde(serialize_with = "crate::serde_hex::array")]
    pub sig: [u8; 32],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CarvedRecord {
    /// Byte offset of the record's `d` within the scanned buffer.
    pub offset: usize,
    pub record: FileRecord,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DbWalScan {
    pub records: Vec<CarvedRecord>,
    /// Record-shaped blocks cut off by the end of input.
    pub truncated: usize,
    /// Record-shaped dictionaries whose fields failed validation.
    pub rejected: usize,
}

const HASH_KEYS: [&str; 3] = ["main_hash", "mainhash", "hash"];

const RECORD_KEYS: [&str; 17] = [
    "filename", "hash", "invalidated", "main_hash", "mainhash", "mtime", "name", "npieces",
    "owner", "path", "perm", "pvtime", "sig", "size", "state", "timestamp", "type",
];

/// Extracted records only; see [`carve_db_wal`] for counters and offsets.
pub fn parse_db_wal(input: &[u8]) -> Vec<FileRecord> {
    carve_db_wal(input).records.into_iter().map(|c| c.record).collect()
}

pub fn carve_db_wal(input: &[u8]) -> DbWalScan {
    let mut scan = DbWalScan::default();
    let mut pos = 0;
    while let Some(rel) = input[pos..].iter().position(|&b| b == b'd') {
        let start = pos + rel;
        let block = &input[start..];
        match parse_bencode(block) {
            Ok((value, used)) if looks_like_record(&value) => match build_record(&value) {
                Some(record) => {
                    scan.records.push(CarvedRecord { offset: start, record });
                    pos = start + used;
                    continue;
                }
                None => scan.rejected += 1,
            },
            Ok(_) => {}
            Err(e) if e.is_truncation() && first_key_is_record_key(block) => scan.truncated += 1,
            Err(_) => {}
        }
        pos = start + 1;
    }
    scan
}

fn looks_like_record(v: &BValue) -> bool {
    v.get("path").and_then(BValue::as_bytes).is_some()
        && (v.get("owner").is_some()
            || v.get("invalidated").is_some()
            || HASH_KEYS.iter().any(|k| v.get(k).is_some()))
}

fn first_key_is_record_key(block: &[u8]) -> bool {
    let rest = &block[1..];
    let Some(colon) = rest.iter().take(4).position(|&b| b == b':') else {
        return false;
    };
    let Ok(len) = std::str::from_utf8(&rest[..colon]).unwrap_or("x").parse::<usize>() else {
        return false;
    };
    rest.get(colon + 1..colon + 1 + len)
        .is_some_and(|key| RECORD_KEYS.iter().any(|k| k.as_bytes() == key))
}

fn int(v: &BValue, key: &str) -> Option<i64> {
    match v.get(key) {
        None => Some(0),
        Some(x) => x.as_int(),
    }
}

fn fixed<const N: usize>(v: Option<&BValue>) -> Option<[u8; N]> {
    v?.as_bytes()?.try_into().ok()
}

fn build_record(v: &BValue) -> Option<FileRecord> {
    let rel_path = v.get("path")?.as_bytes()?.to_vec();
    let filename = match v.get("filename").or_else(|| v.get("name")) {
        Some(n) => n.as_bytes()?.to_vec(),
        None => basename(&rel_path).to_vec(),
    };
    let main_hash = fixed::<20>(HASH_KEYS.iter().find_map(|k| v.get(k)))?;
    let owner = PeerId(fixed::<20>(v.get("owner"))?);
    let sig = fixed::<32>(v.get("sig"))?;
    let invalidated = match int(v, "invalidated")? {
        0 => false,
        1 => true,
        _ => return None,
    };
    Some(FileRecord {
        filename,
        invalidated,
        main_hash,
        mtime: int(v, "mtime")?,
        npieces: int(v, "npieces")?,
        owner,
        rel_path,
        perm: int(v, "perm")?,
        size: u64::try_from(int(v, "size")?).ok()?,
        state: int(v, "state")?,
        timestamp: int(v, "timestamp")?,
        record_type: int(v, "type")?,
        pvtime: int(v, "pvtime")?,
        sig,
    })
}

fn basename(path: &[u8]) -> &[u8] {
    match path.iter().rposition(|&b| b == b'/' || b == b'\\') {
        Some(i) => &path[i + 1..],
        None => path,
    }
}

impl FileRecord {
    /// Bencoded dictionary in the on-disk key spelling.
    pub fn to_bvalue(&self) -> BValue {
        BValue::dict([
            ("invalidated", BValue::Int(i64::from(self.invalidated))),
            ("main_hash", BValue::bytes(self.main_hash.to_vec())),
            ("mtime", BValue::Int(self.mtime)),
            ("name", BValue::bytes(self.filename.clone())),
            ("npieces", BValue::Int(self.npieces)),
            ("owner", BValue::bytes(self.owner.0.to_vec())),
            ("path", BValue::bytes(self.rel_path.clone())),
            ("perm", BValue::Int(self.perm)),
            ("pvtime", BValue::Int(self.pvtime)),
            ("sig", BValue::bytes(self.sig.to_vec())),
            ("size", BValue::Int(self.size as i64)),
            ("state", BValue::Int(self.state)),
            ("timestamp", BValue::Int(self.timestamp)),
            ("type", BValue::Int(self.record_type)),
        ])
    }
}

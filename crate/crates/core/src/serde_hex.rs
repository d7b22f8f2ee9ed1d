//! `serialize_with` helpers: raw bytes are rendered as uppercase hex in JSON.

use std::collections::BTreeMap;

use serde::{Serialize, Serializer};

use crate::bencode::BValue;

pub fn bytes<S: Serializer>(b: &[u8], s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&hex::encode_upper(b))
}

pub fn opt<S: Serializer>(b: &Option<Vec<u8>>, s: S) -> Result<S::Ok, S::Error> {
    match b {
        Some(b) => bytes(b, s),
        None => s.serialize_none(),
    }
}

pub fn list<S: Serializer>(items: &[Vec<u8>], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(items.iter().map(hex::encode_upper))
}

pub fn array<S: Serializer, const N: usize>(b: &[u8; N], s: S) -> Result<S::Ok, S::Error> {
    bytes(b, s)
}

pub fn extras<S: Serializer>(map: &BTreeMap<Vec<u8>, BValue>, s: S) -> Result<S::Ok, S::Error> {
    BValue::Dict(map.clone()).serialize(s)
}

/// Raw bytes that may or may not be text: a string when printable ASCII,
/// otherwise `{"hex": …}`.
pub fn text_or_hex<S: Serializer>(b: &[u8], s: S) -> Result<S::Ok, S::Error> {
    BValue::Bytes(b.to_vec()).serialize(s)
}

//! Bencoding: the length-prefixed serialisation shared by the sync protocol
//! and the client's on-disk state files.
//!
//! Parsing is prefix-oriented: [`parse_bencode`] returns the first complete
//! value together with the number of bytes it occupied, so callers can carve
//! bencoded blocks out of larger binary payloads.

use std::collections::BTreeMap;
use std::fmt;

use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Serialize, Serializer};
use thiserror::Error;

/// Maximum container nesting accepted by the parser.
pub const MAX_DEPTH: usize = 512;

/// A bencoded value.
///
/// Dictionary keys are raw byte strings kept in a `BTreeMap`, which orders
/// them by raw bytes; serialisation is therefore canonical.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BValue {
    Bytes(Vec<u8>),
    Int(i64),
    List(Vec<BValue>),
    Dict(BTreeMap<Vec<u8>, BValue>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MalformedReason {
    ExpectedDigit,
    MissingColon,
    LengthExceedsInput,
    LeadingZero,
    BareMinus,
    EmptyInteger,
    IntegerOverflow,
    Unterminated,
    UnexpectedByte,
    NonStringKey,
    TooDeep,
    EmptyInput,
}

impl MalformedReason {
    pub fn as_str(self) -> &'static str {
        match self {
            MalformedReason::ExpectedDigit => "expected digit",
            MalformedReason::MissingColon => "missing ':' separator",
            MalformedReason::LengthExceedsInput => "length exceeds input",
            MalformedReason::LeadingZero => "leading zero",
            MalformedReason::BareMinus => "bare '-' in integer",
            MalformedReason::EmptyInteger => "empty integer",
            MalformedReason::IntegerOverflow => "integer overflows 64 bits",
            MalformedReason::Unterminated => "unterminated value",
            MalformedReason::UnexpectedByte => "unexpected byte",
            MalformedReason::NonStringKey => "dictionary key is not a byte string",
            MalformedReason::TooDeep => "nesting too deep",
            MalformedReason::EmptyInput => "empty input",
        }
    }
}

impl fmt::Display for MalformedReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("malformed bencode at offset {offset}: {reason}")]
pub struct MalformedBencode {
    pub offset: usize,
    pub reason: MalformedReason,
}

impl MalformedBencode {
    fn at(offset: usize, reason: MalformedReason) -> Self {
        MalformedBencode { offset, reason }
    }

    /// True when the failure is caused by running out of input, i.e. the
    /// bytes seen so far could be the prefix of a valid encoding.
    pub fn is_truncation(&self) -> bool {
        matches!(
            self.reason,
            MalformedReason::LengthExceedsInput | MalformedReason::Unterminated
        )
    }
}

/// Parses the first complete bencoded value in `input`.
///
/// Trailing bytes after the value are left alone; the second tuple element
/// is the number of bytes consumed.
pub fn parse_bencode(input: &[u8]) -> Result<(BValue, usize), MalformedBencode> {
    if input.is_empty() {
        return Err(MalformedBencode::at(0, MalformedReason::EmptyInput));
    }
    let mut parser = Parser { input, pos: 0 };
    let value = parser.value(0)?;
    Ok((value, parser.pos))
}

/// Parses a whole buffer, rejecting trailing bytes.
pub fn parse_bencode_exact(input: &[u8]) -> Result<BValue, MalformedBencode> {
    let (value, used) = parse_bencode(input)?;
    if used != input.len() {
        return Err(MalformedBencode::at(used, MalformedReason::UnexpectedByte));
    }
    Ok(value)
}

/// Parses a run of `key value` pairs that is not wrapped in `d`...`e`,
/// e.g. the fragment `1:m9:get_peers`.
///
/// Stops at the end of input, at an `e`, or at the first position where a
/// further key cannot be read. At least one pair is required.
pub fn parse_bare_pairs(
    input: &[u8],
) -> Result<(BTreeMap<Vec<u8>, BValue>, usize), MalformedBencode> {
    let mut parser = Parser { input, pos: 0 };
    let mut map = BTreeMap::new();
    loop {
        if parser.pos >= input.len() || !input[parser.pos].is_ascii_digit() {
            break;
        }
        let save = parser.pos;
        let key = match parser.byte_string() {
            Ok(k) => k,
            Err(e) if map.is_empty() => return Err(e),
            Err(_) => {
                parser.pos = save;
                break;
            }
        };
        match parser.value(1) {
            Ok(v) => {
                map.insert(key, v);
            }
            Err(e) if map.is_empty() => return Err(e),
            Err(_) => {
                parser.pos = save;
                break;
            }
        }
    }
    if map.is_empty() {
        return Err(MalformedBencode::at(
            parser.pos,
            MalformedReason::ExpectedDigit,
        ));
    }
    Ok((map, parser.pos))
}

/// Canonical encoding of `value`.
pub fn serialise_bencode(value: &BValue) -> Vec<u8> {
    let mut out = Vec::new();
    write_value(value, &mut out);
    out
}

fn write_bytes(bytes: &[u8], out: &mut Vec<u8>) {
    out.extend_from_slice(bytes.len().to_string().as_bytes());
    out.push(b':');
    out.extend_from_slice(bytes);
}

fn write_value(value: &BValue, out: &mut Vec<u8>) {
    match value {
        BValue::Bytes(b) => write_bytes(b, out),
        BValue::Int(i) => {
            out.push(b'i');
            out.extend_from_slice(i.to_string().as_bytes());
            out.push(b'e');
        }
        BValue::List(items) => {
            out.push(b'l');
            for item in items {
                write_value(item, out);
            }
            out.push(b'e');
        }
        BValue::Dict(map) => {
            out.push(b'd');
            for (k, v) in map {
                write_bytes(k, out);
                write_value(v, out);
            }
            out.push(b'e');
        }
    }
}

struct Parser<'a> {
    input: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.input.get(self.pos).copied()
    }

    fn value(&mut self, depth: usize) -> Result<BValue, MalformedBencode> {
        if depth > MAX_DEPTH {
            return Err(MalformedBencode::at(self.pos, MalformedReason::TooDeep));
        }
        match self.peek() {
            None => Err(MalformedBencode::at(self.pos, MalformedReason::Unterminated)),
            Some(b'i') => self.integer().map(BValue::Int),
            Some(b'l') => {
                self.pos += 1;
                let mut items = Vec::new();
                loop {
                    match self.peek() {
                        None => {
                            return Err(MalformedBencode::at(
                                self.pos,
                                MalformedReason::Unterminated,
                            ))
                        }
                        Some(b'e') => {
                            self.pos += 1;
                            return Ok(BValue::List(items));
                        }
                        Some(_) => items.push(self.value(depth + 1)?),
                    }
                }
            }
            Some(b'd') => {
                self.pos += 1;
                let mut map = BTreeMap::new();
                loop {
                    match self.peek() {
                        None => {
                            return Err(MalformedBencode::at(
                                self.pos,
                                MalformedReason::Unterminated,
                            ))
                        }
                        Some(b'e') => {
                            self.pos += 1;
                            return Ok(BValue::Dict(map));
                        }
                        Some(c) if c.is_ascii_digit() => {
                            let key = self.byte_string()?;
                            let value = self.value(depth + 1)?;
                            map.insert(key, value);
                        }
                        Some(_) => {
                            return Err(MalformedBencode::at(
                                self.pos,
                                MalformedReason::NonStringKey,
                            ))
                        }
                    }
                }
            }
            Some(c) if c.is_ascii_digit() => self.byte_string().map(BValue::Bytes),
            Some(_) => Err(MalformedBencode::at(self.pos, MalformedReason::ExpectedDigit)),
        }
    }

    fn byte_string(&mut self) -> Result<Vec<u8>, MalformedBencode> {
        let start = self.pos;
        let mut len: usize = 0;
        let mut digits = 0usize;
        loop {
            match self.peek() {
                None => {
                    return Err(MalformedBencode::at(self.pos, MalformedReason::Unterminated))
                }
                Some(b':') => break,
                Some(c) if c.is_ascii_digit() => {
                    if digits == 1 && self.input[start] == b'0' {
                        return Err(MalformedBencode::at(start, MalformedReason::LeadingZero));
                    }
                    len = len
                        .checked_mul(10)
                        .and_then(|l| l.checked_add(usize::from(c - b'0')))
                        .ok_or(MalformedBencode::at(
                            start,
                            MalformedReason::LengthExceedsInput,
                        ))?;
                    digits += 1;
                    self.pos += 1;
                }
                Some(_) if digits == 0 => {
                    return Err(MalformedBencode::at(self.pos, MalformedReason::ExpectedDigit))
                }
                Some(_) => {
                    return Err(MalformedBencode::at(self.pos, MalformedReason::MissingColon))
                }
            }
        }
        if digits == 0 {
            return Err(MalformedBencode::at(self.pos, MalformedReason::ExpectedDigit));
        }
        self.pos += 1;
        let remaining = self.input.len() - self.pos;
        if len > remaining {
            return Err(MalformedBencode::at(
                self.pos,
                MalformedReason::LengthExceedsInput,
            ));
        }
        let bytes = self.input[self.pos..self.pos + len].to_vec();
        self.pos += len;
        Ok(bytes)
    }

    fn integer(&mut self) -> Result<i64, MalformedBencode> {
        // skip 'i'
        self.pos += 1;
        let start = self.pos;
        let negative = self.peek() == Some(b'-');
        if negative {
            self.pos += 1;
        }
        let digits_start = self.pos;
        let mut value: i64 = 0;
        loop {
            match self.peek() {
                None => {
                    return Err(MalformedBencode::at(self.pos, MalformedReason::Unterminated))
                }
                Some(b'e') => break,
                Some(c) if c.is_ascii_digit() => {
                    let d = i64::from(c - b'0');
                    value = value
                        .checked_mul(10)
                        .and_then(|v| if negative { v.checked_sub(d) } else { v.checked_add(d) })
                        .ok_or(MalformedBencode::at(start, MalformedReason::IntegerOverflow))?;
                    self.pos += 1;
                }
                Some(_) => {
                    return Err(MalformedBencode::at(self.pos, MalformedReason::UnexpectedByte))
                }
            }
        }
        let ndigits = self.pos - digits_start;
        if ndigits == 0 {
            let reason = if negative {
                MalformedReason::BareMinus
            } else {
                MalformedReason::EmptyInteger
            };
            return Err(MalformedBencode::at(start, reason));
        }
        if self.input[digits_start] == b'0' && (ndigits > 1 || negative) {
            return Err(MalformedBencode::at(digits_start, MalformedReason::LeadingZero));
        }
        self.pos += 1;
        Ok(value)
    }
}

impl BValue {
    pub fn bytes(b: impl Into<Vec<u8>>) -> Self {
        BValue::Bytes(b.into())
    }

    /// Builds a dictionary from `(key, value)` pairs.
    pub fn dict<K, I>(pairs: I) -> Self
    where
        K: Into<Vec<u8>>,
        I: IntoIterator<Item = (K, BValue)>,
    {
        BValue::Dict(pairs.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    pub fn as_bytes(&self) -> Option<&[u8]> {
        match self {
            BValue::Bytes(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            BValue::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[BValue]> {
        match self {
            BValue::List(l) => Some(l),
            _ => None,
        }
    }

    pub fn as_dict(&self) -> Option<&BTreeMap<Vec<u8>, BValue>> {
        match self {
            BValue::Dict(d) => Some(d),
            _ => None,
        }
    }

    /// Dictionary lookup by key; `None` for non-dictionaries.
    pub fn get(&self, key: &str) -> Option<&BValue> {
        self.as_dict().and_then(|d| d.get(key.as_bytes()))
    }

    /// Indented tree rendering used by the CLI. Byte strings that are not
    /// printable ASCII are shown as hex.
    pub fn pretty(&self) -> String {
        let mut out = String::new();
        self.pretty_into(&mut out, 0);
        out
    }

    fn pretty_into(&self, out: &mut String, indent: usize) {
        let pad = "  ".repeat(indent);
        match self {
            BValue::Bytes(b) => out.push_str(&render_bytes(b)),
            BValue::Int(i) => out.push_str(&i.to_string()),
            BValue::List(items) if items.is_empty() => out.push_str("[]"),
            BValue::List(items) => {
                out.push_str("[\n");
                for item in items {
                    out.push_str(&pad);
                    out.push_str("  ");
                    item.pretty_into(out, indent + 1);
                    out.push('\n');
                }
                out.push_str(&pad);
                out.push(']');
            }
            BValue::Dict(map) if map.is_empty() => out.push_str("{}"),
            BValue::Dict(map) => {
                out.push_str("{\n");
                for (k, v) in map {
                    out.push_str(&pad);
                    out.push_str("  ");
                    out.push_str(&render_bytes(k));
                    out.push_str(": ");
                    v.pretty_into(out, indent + 1);
                    out.push('\n');
                }
                out.push_str(&pad);
                out.push('}');
            }
        }
    }
}

fn is_printable(b: &[u8]) -> bool {
    b.iter().all(|c| (0x20..0x7f).contains(c))
}

/// `"text"` for printable ASCII, `0x…` hex otherwise.
pub fn render_bytes(b: &[u8]) -> String {
    if is_printable(b) {
        format!("{:?}", String::from_utf8_lossy(b))
    } else {
        format!("0x{}", hex::encode_upper(b))
    }
}

fn json_key(b: &[u8]) -> String {
    match std::str::from_utf8(b) {
        Ok(s) if is_printable(b) => s.to_owned(),
        _ => format!("hex:{}", hex::encode_upper(b)),
    }
}

struct HexBytes<'a>(&'a [u8]);

impl Serialize for HexBytes<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(1))?;
        m.serialize_entry("hex", &hex::encode_upper(self.0))?;
        m.end()
    }
}

/// JSON form: printable byte strings become strings, anything else becomes
/// `{"hex": "…"}`.
impl Serialize for BValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            BValue::Bytes(b) => match std::str::from_utf8(b) {
                Ok(text) if is_printable(b) => s.serialize_str(text),
                _ => HexBytes(b).serialize(s),
            },
            BValue::Int(i) => s.serialize_i64(*i),
            BValue::List(items) => {
                let mut seq = s.serialize_seq(Some(items.len()))?;
                for item in items {
                    seq.serialize_element(item)?;
                }
                seq.end()
            }
            BValue::Dict(map) => {
                let mut m = s.serialize_map(Some(map.len()))?;
                for (k, v) in map {
                    m.serialize_entry(&json_key(k), v)?;
                }
                m.end()
            }
        }
    }
}

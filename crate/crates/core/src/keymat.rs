//! Share secrets and the 20-byte identifiers derived from or stored
//! alongside them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha1::{Digest, Sha1};
use thiserror::Error;

/// Length of every recognised secret.
pub const SECRET_LEN: usize = 33;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KeyClass {
    ReadWrite,
    ReadOnly,
    /// `R` prefix used for read-only keys by alpha-era clients.
    ReadOnlyLegacy,
    TwentyFourHour,
    Encrypted,
    Unknown,
}

impl KeyClass {
    fn from_prefix(c: u8) -> KeyClass {
        match c {
            b'A' => KeyClass::ReadWrite,
            b'B' => KeyClass::ReadOnly,
            b'R' => KeyClass::ReadOnlyLegacy,
            b'C' => KeyClass::TwentyFourHour,
            b'D' => KeyClass::Encrypted,
            _ => KeyClass::Unknown,
        }
    }
}

impl fmt::Display for KeyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KeyError {
    #[error("invalid key format: {0}")]
    InvalidKeyFormat(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct SecretKey {
    raw: String,
    class: KeyClass,
}

impl SecretKey {
    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn class(&self) -> KeyClass {
        self.class
    }

    pub fn share_id(&self) -> ShareId {
        derive_share_id(self)
    }
}

impl fmt::Display for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

fn is_base32(c: u8) -> bool {
    c.is_ascii_uppercase() || (b'2'..=b'7').contains(&c)
}

/// Classifies a secret by its first character after checking length and
/// alphabet. Never inspects cryptographic structure.
pub fn classify_secret(raw: &str) -> Result<SecretKey, KeyError> {
    let bytes = raw.as_bytes();
    let chars = raw.chars().count();
    if chars != SECRET_LEN {
        return Err(KeyError::InvalidKeyFormat(format!(
            "length {chars}, expected {SECRET_LEN}"
        )));
    }
    if let Some(pos) = bytes.iter().position(|&c| !is_base32(c)) {
        return Err(KeyError::InvalidKeyFormat(format!(
            "character {:?} at position {pos} is outside A-Z/2-7",
            raw[pos..].chars().next().unwrap_or('?')
        )));
    }
    Ok(SecretKey {
        raw: raw.to_owned(),
        class: KeyClass::from_prefix(bytes[0]),
    })
}

/// SHA-1 over the secret's characters. This is the identifier a client
/// registers in the DHT.
pub fn derive_share_id(secret: &SecretKey) -> ShareId {
    share_id_from_bytes(secret.raw.as_bytes())
}

/// SHA-1 over arbitrary bytes, without the format check.
pub fn share_id_from_bytes(bytes: &[u8]) -> ShareId {
    let digest = Sha1::digest(bytes);
    ShareId(digest.into())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdError {
    #[error("expected 20 bytes, found {0}")]
    WrongLength(usize),
    #[error("expected 40 hex characters: {0}")]
    BadHex(String),
}

macro_rules! id20 {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub [u8; 20]);

        impl $name {
            pub fn from_slice(bytes: &[u8]) -> Result<Self, IdError> {
                <[u8; 20]>::try_from(bytes)
                    .map($name)
                    .map_err(|_| IdError::WrongLength(bytes.len()))
            }

            pub fn as_bytes(&self) -> &[u8; 20] {
                &self.0
            }

            /// Uppercase 40-character hex.
            pub fn to_hex(&self) -> String {
                hex::encode_upper(self.0)
            }

            /// Accepts either letter case.
            pub fn parse_hex(s: &str) -> Result<Self, IdError> {
                if s.len() != 40 {
                    return Err(IdError::BadHex(s.to_owned()));
                }
                let mut out = [0u8; 20];
                hex::decode_to_slice(s, &mut out).map_err(|_| IdError::BadHex(s.to_owned()))?;
                Ok($name(out))
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.to_hex())
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), self.to_hex())
            }
        }

        impl FromStr for $name {
            type Err = IdError;
            fn from_str(s: &str) -> Result<Self, IdError> {
                Self::parse_hex(s)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                Self::parse_hex(&s).map_err(serde::de::Error::custom)
            }
        }
    };
}

id20!(
    /// 20-byte share identifier, as stored in `.SyncID` and advertised in
    /// discovery messages.
    ShareId
);
id20!(
    /// 20-byte identifier of one client instance.
    PeerId
);

pub fn render_share_id(id: &ShareId) -> String {
    id.to_hex()
}

pub fn parse_share_id(s: &str) -> Result<ShareId, IdError> {
    ShareId::parse_hex(s)
}

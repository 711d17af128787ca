//! Access keys, share identifiers, and peer identifiers.
//!
//! A share's credential is a 33-character display string: one prefix letter
//! naming the permission level and 32 Base32 characters encoding a 20-byte
//! body. The 20-byte share id looked up on tracker, DHT and LAN discovery is
//! a digest of that body, and the 32-byte form additionally binds the
//! advertising peer's local endpoint.
//!
//! The genuine application never published its derivation functions. The
//! constructions here are plain domain-separated digests (SHA-256 truncated
//! to 160 bits) chosen so that every consumer of this crate stays internally
//! consistent; keys and ids produced here are NOT wire-compatible with the
//! historical live network.

use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use rand::RngCore;
use sha2::{Digest, Sha256};
use thiserror::Error;

const BASE32_ALPHABET: &[u8; 32] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ234567";

/// Mask applied to a read-only body to form the one-time body. Reversible,
/// so the one-time key resolves to the same share id as its parent.
const ONE_TIME_MASK: [u8; 20] = [0x5a; 20];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KeyError {
    #[error("wrong key kind: expected {expected}, got {got}")]
    WrongKeyKind {
        expected: &'static str,
        got: &'static str,
    },
    #[error("character {0:?} is outside the Base32 alphabet")]
    BadAlphabet(char),
    #[error("Base32 text of length {0} does not decode to whole bytes")]
    BadLength(usize),
    #[error("non-zero padding bits at the end of Base32 text")]
    BadPadding,
    #[error("not a 33-character access key display string")]
    NotAnAccessKey,
    #[error("share ids are 40 hex characters")]
    BadHexId,
    #[error("system entropy source unavailable")]
    EntropyUnavailable,
}

// --- Key taxonomy ---

/// Permission level encoded in an access key's prefix letter.
///
/// The prefix cannot always be trusted on foreign input: users may supply
/// self-made keys in other alphabets, which classify as [`KeyKind::Custom`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KeyKind {
    ReadWrite,
    ReadOnly,
    OneTime,
    EncryptedReadWrite,
    EncryptedReadDecrypt,
    EncryptedReadOnly,
    LegacyReadOnly,
    Custom,
}

impl KeyKind {
    /// Prefix letter for keys of this kind; `None` for [`KeyKind::Custom`].
    pub fn prefix(self) -> Option<char> {
        match self {
            KeyKind::ReadWrite => Some('A'),
            KeyKind::ReadOnly => Some('B'),
            KeyKind::OneTime => Some('C'),
            KeyKind::EncryptedReadWrite => Some('D'),
            KeyKind::EncryptedReadDecrypt => Some('E'),
            KeyKind::EncryptedReadOnly => Some('F'),
            KeyKind::LegacyReadOnly => Some('R'),
            KeyKind::Custom => None,
        }
    }

    fn from_prefix(c: char) -> Option<KeyKind> {
        match c {
            'A' => Some(KeyKind::ReadWrite),
            'B' => Some(KeyKind::ReadOnly),
            'C' => Some(KeyKind::OneTime),
            'D' => Some(KeyKind::EncryptedReadWrite),
            'E' => Some(KeyKind::EncryptedReadDecrypt),
            'F' => Some(KeyKind::EncryptedReadOnly),
            'R' => Some(KeyKind::LegacyReadOnly),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            KeyKind::ReadWrite => "read-write",
            KeyKind::ReadOnly => "read-only",
            KeyKind::OneTime => "one-time",
            KeyKind::EncryptedReadWrite => "encrypted-read-write",
            KeyKind::EncryptedReadDecrypt => "encrypted-read-decrypt",
            KeyKind::EncryptedReadOnly => "encrypted-read-only",
            KeyKind::LegacyReadOnly => "legacy-read-only",
            KeyKind::Custom => "custom",
        }
    }
}

impl fmt::Display for KeyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// An access key: kind, 20-byte body, and the 33-character display string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessKey {
    kind: KeyKind,
    body: [u8; 20],
    display: String,
}

impl AccessKey {
    fn assemble(kind: KeyKind, body: [u8; 20]) -> AccessKey {
        let prefix = kind.prefix().expect("custom keys have no canonical form");
        let mut display = String::with_capacity(33);
        display.push(prefix);
        display.push_str(&base32_encode(&body));
        AccessKey { kind, body, display }
    }

    /// Parses a display string into a structured key.
    ///
    /// Anything that [`classify_key`] calls custom is rejected here: custom
    /// keys carry no decodable 20-byte body.
    pub fn from_display(display: &str) -> Result<AccessKey, KeyError> {
        let kind = classify_key(display);
        if kind == KeyKind::Custom {
            return Err(KeyError::NotAnAccessKey);
        }
        let decoded = base32_decode(&display[1..])?;
        let mut body = [0u8; 20];
        body.copy_from_slice(&decoded);
        Ok(AccessKey {
            kind,
            body,
            display: display.to_owned(),
        })
    }

    pub fn kind(&self) -> KeyKind {
        self.kind
    }

    pub fn body(&self) -> &[u8; 20] {
        &self.body
    }

    pub fn display(&self) -> &str {
        &self.display
    }
}

impl fmt::Display for AccessKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display)
    }
}

/// Classifies a display string by prefix letter. Total: anything that is not
/// a prefix letter plus 32 Base32 characters is [`KeyKind::Custom`].
pub fn classify_key(display: &str) -> KeyKind {
    let bytes = display.as_bytes();
    if bytes.len() != 33 {
        return KeyKind::Custom;
    }
    let Some(kind) = KeyKind::from_prefix(bytes[0] as char) else {
        return KeyKind::Custom;
    };
    if base32_decode(&display[1..]).is_err() {
        return KeyKind::Custom;
    }
    kind
}

// --- Generation and derivation ---

/// Generates a fresh read-write key from the supplied entropy source.
pub fn generate_rw_key(rng: &mut (impl RngCore + ?Sized)) -> AccessKey {
    let mut body = [0u8; 20];
    rng.fill_bytes(&mut body);
    AccessKey::assemble(KeyKind::ReadWrite, body)
}

/// Generates a fresh read-write key from operating-system entropy.
pub fn generate_rw_key_from_os_entropy() -> Result<AccessKey, KeyError> {
    use rand::TryRngCore;
    let mut body = [0u8; 20];
    rand::rngs::OsRng
        .try_fill_bytes(&mut body)
        .map_err(|_| KeyError::EntropyUnavailable)?;
    Ok(AccessKey::assemble(KeyKind::ReadWrite, body))
}

/// Derives the read-only key that accompanies a read-write key.
pub fn derive_read_only(rw: &AccessKey) -> Result<AccessKey, KeyError> {
    if rw.kind != KeyKind::ReadWrite {
        return Err(KeyError::WrongKeyKind {
            expected: "read-write",
            got: rw.kind.label(),
        });
    }
    let body = digest20(&[b"key:ro", &rw.body]);
    Ok(AccessKey::assemble(KeyKind::ReadOnly, body))
}

/// Derives a one-time distribution key from a read-write or read-only key.
pub fn derive_one_time(key: &AccessKey) -> Result<AccessKey, KeyError> {
    let ro_body = match key.kind {
        KeyKind::ReadWrite => derive_read_only(key)?.body,
        KeyKind::ReadOnly => key.body,
        other => {
            return Err(KeyError::WrongKeyKind {
                expected: "read-write or read-only",
                got: other.label(),
            })
        }
    };
    Ok(AccessKey::assemble(KeyKind::OneTime, xor_mask(ro_body)))
}

// --- Identifiers ---

/// 20-byte share lookup hash. Renders as 40 lowercase hex characters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ShareId(pub [u8; 20]);

/// 32-byte share id form that binds a peer's advertised local endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ShareId32(pub [u8; 32]);

/// 20-byte peer identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PeerId(pub [u8; 20]);

impl ShareId {
    pub fn as_bytes(&self) -> &[u8; 20] {
        &self.0
    }
}

impl ShareId32 {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl PeerId {
    pub fn as_bytes(&self) -> &[u8; 20] {
        &self.0
    }
}

impl fmt::Display for ShareId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl fmt::Display for ShareId32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl fmt::Display for PeerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl FromStr for ShareId {
    type Err = KeyError;

    fn from_str(s: &str) -> Result<Self, KeyError> {
        let raw = hex::decode(s).map_err(|_| KeyError::BadHexId)?;
        let body: [u8; 20] = raw.try_into().map_err(|_| KeyError::BadHexId)?;
        Ok(ShareId(body))
    }
}

impl FromStr for PeerId {
    type Err = KeyError;

    fn from_str(s: &str) -> Result<Self, KeyError> {
        let raw = hex::decode(s).map_err(|_| KeyError::BadHexId)?;
        let body: [u8; 20] = raw.try_into().map_err(|_| KeyError::BadHexId)?;
        Ok(PeerId(body))
    }
}

/// Share id for a key. Constant across the whole derivation family of one
/// read-write root: every permission level must locate the same share.
pub fn share_id_from_key(key: &AccessKey) -> ShareId {
    let ro_view = match key.kind {
        KeyKind::ReadWrite => digest20(&[b"key:ro", &key.body]),
        KeyKind::OneTime => xor_mask(key.body),
        _ => key.body,
    };
    ShareId(digest20(&[b"share:id", &ro_view]))
}

/// 32-byte share id bound to the advertising peer's local IPv4 endpoint.
pub fn share32_from(share: &ShareId, local_ip: Ipv4Addr, local_port: u16) -> ShareId32 {
    let mut hasher = Sha256::new();
    hasher.update(b"share:32");
    hasher.update(share.as_bytes());
    hasher.update(local_ip.octets());
    hasher.update(local_port.to_be_bytes());
    ShareId32(hasher.finalize().into())
}

// --- Base32 ---

/// Unpadded Base32 over the A-Z 2-7 alphabet.
pub fn base32_encode(bytes: &[u8]) -> String {
    let mut out = String::new();
    let mut acc: u32 = 0;
    let mut bits = 0u32;
    for &b in bytes {
        acc = (acc << 8) | u32::from(b);
        bits += 8;
        while bits >= 5 {
            bits -= 5;
            out.push(BASE32_ALPHABET[((acc >> bits) & 0x1f) as usize] as char);
        }
    }
    if bits > 0 {
        out.push(BASE32_ALPHABET[((acc << (5 - bits)) & 0x1f) as usize] as char);
    }
    out
}

/// Inverse of [`base32_encode`]. Rejects characters outside the alphabet,
/// lengths that cannot come from whole bytes, and non-zero padding bits.
pub fn base32_decode(text: &str) -> Result<Vec<u8>, KeyError> {
    let mut out = Vec::with_capacity(text.len() * 5 / 8);
    let mut acc: u32 = 0;
    let mut bits = 0u32;
    for c in text.chars() {
        let v = match c {
            'A'..='Z' => c as u32 - 'A' as u32,
            '2'..='7' => c as u32 - '2' as u32 + 26,
            _ => return Err(KeyError::BadAlphabet(c)),
        };
        acc = (acc << 5) | v;
        bits += 5;
        if bits >= 8 {
            bits -= 8;
            out.push((acc >> bits) as u8);
        }
    }
    if matches!(text.len() % 8, 1 | 3 | 6) {
        return Err(KeyError::BadLength(text.len()));
    }
    if bits > 0 && acc & ((1 << bits) - 1) != 0 {
        return Err(KeyError::BadPadding);
    }
    Ok(out)
}

/// SHA-256 over the concatenated parts, truncated to 20 bytes. All 20-byte
/// identifier derivations in this crate go through here.
pub fn digest20(parts: &[&[u8]]) -> [u8; 20] {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part);
    }
    let full = hasher.finalize();
    let mut out = [0u8; 20];
    out.copy_from_slice(&full[..20]);
    out
}

fn xor_mask(mut body: [u8; 20]) -> [u8; 20] {
    for (b, m) in body.iter_mut().zip(ONE_TIME_MASK) {
        *b ^= m;
    }
    body
}

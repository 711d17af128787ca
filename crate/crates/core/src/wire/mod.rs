//! Byte-exact codecs for the protocol's frames, messages, and share links.
//!
//! Discovery traffic rides a 20-byte transport header ([`utp`]), LAN and
//! relay frames carry a `BSYNC` magic, and every payload body is bencoded.
//! [`classify_frame`] is the total entry point the dissector uses to sort
//! arbitrary captured bytes into message families.

pub mod link;
pub mod message;
pub mod utp;

pub use link::{format_share_link, parse_share_link, ShareLink};
pub use message::{
    decode_get_peers, decode_peers_response, decode_ping, decode_relay_message, encode_get_peers,
    encode_get_peers_framed, encode_peers_response, encode_peers_response_framed, encode_ping,
    encode_relay_message, lint_peers_response, Dialect, GetPeers, PeerEntry, PeersResponse, Ping,
    RelayInit, RelayMessage, RelayNonce, SyncMessage, WireLint, WireShareId, BSYNC_MAGIC,
};
pub use utp::{decode_utp_header, encode_utp_header, UtpHeader, UtpPacketType, UTP_HEADER_LEN};

use thiserror::Error;

/// Codec failure. Decoders return these for any malformed input and never
/// panic; the dissector maps them to soft classifications.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("buffer shorter than the 20-byte transport header")]
    TruncatedHeader,
    #[error("unknown packet type nibble {0}")]
    UnknownPacketType(u8),
    #[error("unsupported header version {0}")]
    UnsupportedVersion(u8),
    #[error("frame does not carry the expected magic")]
    BadMagic,
    #[error("frame is not a DATA packet")]
    NotDataPacket,
    #[error("field {field} has invalid width {got}")]
    WrongWidth { field: &'static str, got: usize },
    #[error("share id width {got} does not match the {dialect} dialect")]
    DialectMismatch { dialect: &'static str, got: usize },
    #[error("message field {0} is missing")]
    MissingField(&'static str),
    #[error("message field {field} is malformed: {reason}")]
    BadField {
        field: &'static str,
        reason: &'static str,
    },
    #[error("peer entry {index} is malformed: {reason}")]
    MalformedPeerEntry {
        index: usize,
        reason: &'static str,
    },
    #[error("expected a {expected} message")]
    WrongMessageKind { expected: &'static str },
    #[error("relay frame length word disagrees with the payload")]
    BadFrameLength,
    #[error("share link is missing mandatory field {0}")]
    MissingMandatoryField(char),
    #[error("share link expiry is not a decimal unix timestamp")]
    BadExpiry,
    #[error(transparent)]
    Bencode(#[from] crate::bencode::Error),
}

/// Transport a frame was observed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Transport {
    Udp,
    Tcp,
}

impl Transport {
    pub fn label(self) -> &'static str {
        match self {
            Transport::Udp => "UDP",
            Transport::Tcp => "TCP",
        }
    }
}

/// Message family of a frame, as determined by magic bytes and the `m` key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Classification {
    UtpControl(UtpPacketType),
    GetPeers,
    PeersResponse,
    Ping,
    Relay,
    UnknownBsync,
    NotBtsync,
}

impl Classification {
    pub fn label(self) -> &'static str {
        match self {
            Classification::UtpControl(UtpPacketType::Data) => "utp-data",
            Classification::UtpControl(UtpPacketType::Fin) => "utp-fin",
            Classification::UtpControl(UtpPacketType::State) => "utp-state",
            Classification::UtpControl(UtpPacketType::Rst) => "utp-rst",
            Classification::UtpControl(UtpPacketType::Syn) => "utp-syn",
            Classification::GetPeers => "get-peers",
            Classification::PeersResponse => "peers-response",
            Classification::Ping => "ping",
            Classification::Relay => "relay",
            Classification::UnknownBsync => "unknown-bsync",
            Classification::NotBtsync => "not-btsync",
        }
    }
}

/// Classifies raw frame bytes. Total: never errors, never panics.
///
/// Magic bytes are tested first (`BSYNC` leading a LAN ping, `BSYNC` at the
/// interior offset of a relay frame), then the transport-header first byte,
/// then the bencoded `m` message key. A DATA frame whose version nibble is
/// not 1 but whose body still carries a message key is reported as
/// [`Classification::UnknownBsync`] rather than rejected, so near-miss
/// evidence stays visible. The transport hint is reserved for
/// transport-specific rules; both transports currently classify identically.
pub fn classify_frame(bytes: &[u8], transport: Transport) -> Classification {
    let _ = transport;
    if bytes.starts_with(BSYNC_MAGIC) {
        return if decode_ping(bytes).is_ok() {
            Classification::Ping
        } else {
            Classification::UnknownBsync
        };
    }
    if bytes.len() > 11 && &bytes[6..11] == b"BSYNC" {
        return if decode_relay_message(bytes).is_ok() {
            Classification::Relay
        } else {
            Classification::UnknownBsync
        };
    }
    let Some(&first) = bytes.first() else {
        return Classification::NotBtsync;
    };
    if first >> 4 > 4 || bytes.len() < UTP_HEADER_LEN {
        return Classification::NotBtsync;
    }
    if first & 0x0f != 1 {
        if first >> 4 == 0 && bytes.len() > UTP_HEADER_LEN {
            if let Ok(body) = crate::bencode::decode(&bytes[UTP_HEADER_LEN..]) {
                if body.dict_get(b"m").is_some() {
                    return Classification::UnknownBsync;
                }
            }
        }
        return Classification::NotBtsync;
    }
    let Ok(header) = decode_utp_header(bytes) else {
        return Classification::NotBtsync;
    };
    if header.packet_type != UtpPacketType::Data {
        return Classification::UtpControl(header.packet_type);
    }
    let payload = &bytes[UTP_HEADER_LEN..];
    if payload.is_empty() {
        return Classification::UtpControl(UtpPacketType::Data);
    }
    let Ok(body) = crate::bencode::decode(payload) else {
        return Classification::UtpControl(UtpPacketType::Data);
    };
    match body.dict_get(b"m").and_then(|m| m.as_bytes()) {
        Some(b"get_peers") => {
            if decode_get_peers(bytes).is_ok() {
                Classification::GetPeers
            } else {
                Classification::UnknownBsync
            }
        }
        Some(b"peers") => {
            if decode_peers_response(bytes).is_ok() {
                Classification::PeersResponse
            } else {
                Classification::UnknownBsync
            }
        }
        _ => Classification::UnknownBsync,
    }
}

//! The typed message set and its byte-exact encodings.
//!
//! Discovery messages (`get_peers`, `peers`) ride a DATA transport header;
//! LAN pings are `BSYNC`-tagged datagrams; relay negotiation frames are
//! length-prefixed stream records with the `BSYNC` tag at an interior
//! offset. Templates are treated as contiguous bencoded bytes: bencoding is
//! self-delimiting, so no separators exist between fields.
//!
//! Only the init and nonce relay steps have a documented byte shape. Their
//! layouts here are reconstructed from an informal hexdump listing and are
//! not authoritative; the remaining negotiation steps are carried by the
//! network simulator as opaque blobs.

use std::net::{Ipv4Addr, SocketAddrV4};

use super::utp::{decode_utp_header, encode_utp_header, UtpHeader, UtpPacketType, UTP_HEADER_LEN};
use super::WireError;
use crate::bencode::{self, BValue};
use crate::keys::{PeerId, ShareId, ShareId32};

/// Magic prefix of LAN discovery datagrams.
pub const BSYNC_MAGIC: &[u8] = b"BSYNC\x00";

/// Protocol dialect, selecting the share-id width of `get_peers` requests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dialect {
    V14,
    V20,
}

impl Dialect {
    fn share_width(self) -> usize {
        match self {
            Dialect::V14 => 20,
            Dialect::V20 => 32,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Dialect::V14 => "v1.4",
            Dialect::V20 => "v2.0",
        }
    }
}

/// A share id as carried on the wire, in either width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WireShareId {
    Id20(ShareId),
    Id32(ShareId32),
}

impl WireShareId {
    pub fn width(&self) -> usize {
        match self {
            WireShareId::Id20(_) => 20,
            WireShareId::Id32(_) => 32,
        }
    }

    pub fn as_bytes(&self) -> &[u8] {
        match self {
            WireShareId::Id20(id) => &id.0,
            WireShareId::Id32(id) => &id.0,
        }
    }

    pub fn id20(&self) -> Option<ShareId> {
        match self {
            WireShareId::Id20(id) => Some(*id),
            WireShareId::Id32(_) => None,
        }
    }
}

impl From<ShareId> for WireShareId {
    fn from(id: ShareId) -> Self {
        WireShareId::Id20(id)
    }
}

impl From<ShareId32> for WireShareId {
    fn from(id: ShareId32) -> Self {
        WireShareId::Id32(id)
    }
}

/// Peer lookup request, registering the requester as a side effect.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GetPeers {
    pub local_addr: SocketAddrV4,
    pub local_port: u16,
    pub peer_id: PeerId,
    pub share_id: WireShareId,
}

/// One peer in a lookup response: routable address, LAN address, id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeerEntry {
    pub addr: SocketAddrV4,
    pub local_addr: SocketAddrV4,
    pub peer_id: PeerId,
}

/// Peer lookup response. `external_addr` echoes the requester's endpoint as
/// observed by the responder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeersResponse {
    pub external_addr: SocketAddrV4,
    pub peers: Vec<PeerEntry>,
    pub share_id: ShareId,
    pub time: i64,
}

/// LAN discovery ping. The multicast form carries the 32-byte share id, the
/// unicast response the 20-byte form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ping {
    pub peer_id: PeerId,
    pub port: u16,
    pub share_id: WireShareId,
}

/// First relay negotiation step: who is calling, who is wanted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RelayInit {
    pub remote_peer_id: PeerId,
    pub local_peer_id: PeerId,
}

/// Third relay negotiation step: session nonce for a share.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RelayNonce {
    pub nonce: [u8; 16],
    pub share_id: ShareId,
}

/// Relay frames with a documented byte shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelayMessage {
    Init(RelayInit),
    Nonce(RelayNonce),
}

/// Union of the decodable protocol messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SyncMessage {
    GetPeers(GetPeers),
    PeersResponse(PeersResponse),
    Ping(Ping),
    RelayInit(RelayInit),
    RelayNonce(RelayNonce),
}

/// Advisory flag for a decoded message that violates a protocol expectation
/// without being undecodable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WireLint {
    /// A lookup response must list at least the requester; an empty list is
    /// decodable but contradicts that rule.
    EmptyPeerList,
}

/// Flags protocol-rule violations in a decoded response.
pub fn lint_peers_response(msg: &PeersResponse) -> Vec<WireLint> {
    if msg.peers.is_empty() {
        vec![WireLint::EmptyPeerList]
    } else {
        Vec::new()
    }
}

// --- Address helpers ---

/// Packs an IPv4 endpoint into the 6-byte wire form, address then port,
/// network byte order.
pub fn pack_addr(addr: &SocketAddrV4) -> [u8; 6] {
    let mut out = [0u8; 6];
    out[..4].copy_from_slice(&addr.ip().octets());
    out[4..].copy_from_slice(&addr.port().to_be_bytes());
    out
}

/// Unpacks a 6-byte wire address.
pub fn unpack_addr(bytes: &[u8], field: &'static str) -> Result<SocketAddrV4, WireError> {
    if bytes.len() != 6 {
        return Err(WireError::WrongWidth {
            field,
            got: bytes.len(),
        });
    }
    let ip = Ipv4Addr::new(bytes[0], bytes[1], bytes[2], bytes[3]);
    let port = u16::from_be_bytes([bytes[4], bytes[5]]);
    Ok(SocketAddrV4::new(ip, port))
}

// --- Field extraction helpers ---

fn bytes_field<'v>(dict: &'v BValue, field: &'static str) -> Result<&'v [u8], WireError> {
    dict.dict_get(field.as_bytes())
        .ok_or(WireError::MissingField(field))?
        .as_bytes()
        .ok_or(WireError::BadField {
            field,
            reason: "not a byte string",
        })
}

fn int_field(dict: &BValue, field: &'static str) -> Result<i64, WireError> {
    dict.dict_get(field.as_bytes())
        .ok_or(WireError::MissingField(field))?
        .as_int()
        .ok_or(WireError::BadField {
            field,
            reason: "not an integer",
        })
}

fn port_field(dict: &BValue, field: &'static str) -> Result<u16, WireError> {
    u16::try_from(int_field(dict, field)?).map_err(|_| WireError::BadField {
        field,
        reason: "port out of range",
    })
}

fn addr_field(dict: &BValue, field: &'static str) -> Result<SocketAddrV4, WireError> {
    unpack_addr(bytes_field(dict, field)?, field)
}

fn id20_field(dict: &BValue, field: &'static str) -> Result<[u8; 20], WireError> {
    let raw = bytes_field(dict, field)?;
    raw.try_into().map_err(|_| WireError::WrongWidth {
        field,
        got: raw.len(),
    })
}

fn share_field(dict: &BValue, field: &'static str) -> Result<WireShareId, WireError> {
    let raw = bytes_field(dict, field)?;
    match raw.len() {
        20 => Ok(WireShareId::Id20(ShareId(raw.try_into().unwrap()))),
        32 => Ok(WireShareId::Id32(ShareId32(raw.try_into().unwrap()))),
        got => Err(WireError::WrongWidth { field, got }),
    }
}

fn expect_kind(dict: &BValue, expected: &'static str) -> Result<(), WireError> {
    if bytes_field(dict, "m")? == expected.as_bytes() {
        Ok(())
    } else {
        Err(WireError::WrongMessageKind { expected })
    }
}

fn data_payload(bytes: &[u8]) -> Result<BValue, WireError> {
    let header = decode_utp_header(bytes)?;
    if header.packet_type != UtpPacketType::Data {
        return Err(WireError::NotDataPacket);
    }
    Ok(bencode::decode(&bytes[UTP_HEADER_LEN..])?)
}

// --- get_peers ---

/// Encodes a lookup request behind a fresh zero-field DATA header.
pub fn encode_get_peers(msg: &GetPeers, dialect: Dialect) -> Result<Vec<u8>, WireError> {
    encode_get_peers_framed(&UtpHeader::new(UtpPacketType::Data), msg, dialect)
}

/// Encodes a lookup request behind a caller-supplied DATA header.
pub fn encode_get_peers_framed(
    header: &UtpHeader,
    msg: &GetPeers,
    dialect: Dialect,
) -> Result<Vec<u8>, WireError> {
    if msg.share_id.width() != dialect.share_width() {
        return Err(WireError::DialectMismatch {
            dialect: dialect.label(),
            got: msg.share_id.width(),
        });
    }
    let payload = BValue::Dictionary(vec![
        (b"la".to_vec(), BValue::bytes(pack_addr(&msg.local_addr))),
        (b"lp".to_vec(), BValue::int(i64::from(msg.local_port))),
        (b"m".to_vec(), BValue::bytes(*b"get_peers")),
        (b"peer".to_vec(), BValue::bytes(msg.peer_id.0)),
        (b"share".to_vec(), BValue::bytes(msg.share_id.as_bytes())),
    ]);
    let mut out = encode_utp_header(header).to_vec();
    bencode::encode_into(&payload, &mut out);
    Ok(out)
}

/// Decodes a framed lookup request.
pub fn decode_get_peers(bytes: &[u8]) -> Result<GetPeers, WireError> {
    let dict = data_payload(bytes)?;
    expect_kind(&dict, "get_peers")?;
    Ok(GetPeers {
        local_addr: addr_field(&dict, "la")?,
        local_port: port_field(&dict, "lp")?,
        peer_id: PeerId(id20_field(&dict, "peer")?),
        share_id: share_field(&dict, "share")?,
    })
}

// --- peers response ---

/// Encodes a lookup response behind a fresh zero-field DATA header.
pub fn encode_peers_response(msg: &PeersResponse) -> Vec<u8> {
    encode_peers_response_framed(&UtpHeader::new(UtpPacketType::Data), msg)
}

/// Encodes a lookup response behind a caller-supplied DATA header.
pub fn encode_peers_response_framed(header: &UtpHeader, msg: &PeersResponse) -> Vec<u8> {
    let entries = msg
        .peers
        .iter()
        .map(|entry| {
            BValue::Dictionary(vec![
                (b"a".to_vec(), BValue::bytes(pack_addr(&entry.addr))),
                (b"la".to_vec(), BValue::bytes(pack_addr(&entry.local_addr))),
                (b"p".to_vec(), BValue::bytes(entry.peer_id.0)),
            ])
        })
        .collect();
    let payload = BValue::Dictionary(vec![
        (b"ea".to_vec(), BValue::bytes(pack_addr(&msg.external_addr))),
        (b"m".to_vec(), BValue::bytes(*b"peers")),
        (b"peers".to_vec(), BValue::List(entries)),
        (b"share".to_vec(), BValue::bytes(msg.share_id.0)),
        (b"time".to_vec(), BValue::int(msg.time)),
    ]);
    let mut out = encode_utp_header(header).to_vec();
    bencode::encode_into(&payload, &mut out);
    out
}

/// Decodes a framed lookup response, preserving peer order.
pub fn decode_peers_response(bytes: &[u8]) -> Result<PeersResponse, WireError> {
    let dict = data_payload(bytes)?;
    expect_kind(&dict, "peers")?;
    let raw_list = dict
        .dict_get(b"peers")
        .ok_or(WireError::MissingField("peers"))?
        .as_list()
        .ok_or(WireError::BadField {
            field: "peers",
            reason: "not a list",
        })?;
    let mut peers = Vec::with_capacity(raw_list.len());
    for (index, item) in raw_list.iter().enumerate() {
        peers.push(decode_peer_entry(item).map_err(|reason| WireError::MalformedPeerEntry {
            index,
            reason,
        })?);
    }
    let share = id20_field(&dict, "share")?;
    Ok(PeersResponse {
        external_addr: addr_field(&dict, "ea")?,
        peers,
        share_id: ShareId(share),
        time: int_field(&dict, "time")?,
    })
}

fn decode_peer_entry(item: &BValue) -> Result<PeerEntry, &'static str> {
    let addr = item
        .dict_get(b"a")
        .and_then(|v| v.as_bytes())
        .ok_or("missing 6-byte a field")?;
    let local = item
        .dict_get(b"la")
        .and_then(|v| v.as_bytes())
        .ok_or("missing 6-byte la field")?;
    let peer = item
        .dict_get(b"p")
        .and_then(|v| v.as_bytes())
        .ok_or("missing 20-byte p field")?;
    let peer_id: [u8; 20] = peer.try_into().map_err(|_| "p field is not 20 bytes")?;
    Ok(PeerEntry {
        addr: unpack_addr(addr, "a").map_err(|_| "a field is not 6 bytes")?,
        local_addr: unpack_addr(local, "la").map_err(|_| "la field is not 6 bytes")?,
        peer_id: PeerId(peer_id),
    })
}

// --- ping ---

/// Encodes a LAN discovery ping. `share_width` selects the multicast form
/// (32) or the unicast response form (20) and must match the message.
pub fn encode_ping(msg: &Ping, share_width: usize) -> Result<Vec<u8>, WireError> {
    if share_width != 20 && share_width != 32 {
        return Err(WireError::WrongWidth {
            field: "share_width",
            got: share_width,
        });
    }
    if msg.share_id.width() != share_width {
        return Err(WireError::WrongWidth {
            field: "share",
            got: msg.share_id.width(),
        });
    }
    let payload = BValue::Dictionary(vec![
        (b"m".to_vec(), BValue::bytes(*b"ping")),
        (b"peer".to_vec(), BValue::bytes(msg.peer_id.0)),
        (b"port".to_vec(), BValue::int(i64::from(msg.port))),
        (b"share".to_vec(), BValue::bytes(msg.share_id.as_bytes())),
    ]);
    let mut out = BSYNC_MAGIC.to_vec();
    bencode::encode_into(&payload, &mut out);
    Ok(out)
}

/// Decodes a `BSYNC`-tagged LAN ping in either share-id width.
pub fn decode_ping(bytes: &[u8]) -> Result<Ping, WireError> {
    let payload = bytes
        .strip_prefix(BSYNC_MAGIC)
        .ok_or(WireError::BadMagic)?;
    let dict = bencode::decode(payload)?;
    expect_kind(&dict, "ping")?;
    Ok(Ping {
        peer_id: PeerId(id20_field(&dict, "peer")?),
        port: port_field(&dict, "port")?,
        share_id: share_field(&dict, "share")?,
    })
}

// --- relay negotiation ---

/// Opaque 4-byte session counter slot. Emitted zeroed; the counters are
/// carried but never interpreted.
const RELAY_COUNTER: [u8; 4] = [0u8; 4];

/// Encodes a relay init or nonce frame: a 16-bit big-endian length word,
/// the counter slot, the `BSYNC` tag, then the step body.
pub fn encode_relay_message(msg: &RelayMessage) -> Vec<u8> {
    let mut inner = Vec::new();
    inner.extend_from_slice(&RELAY_COUNTER);
    inner.extend_from_slice(b"BSYNC");
    match msg {
        RelayMessage::Init(init) => {
            inner.extend_from_slice(&[0, 0, 0]);
            inner.extend_from_slice(&init.remote_peer_id.0);
            let caller = BValue::Dictionary(vec![(
                b"peer".to_vec(),
                BValue::bytes(init.local_peer_id.0),
            )]);
            bencode::encode_into(&caller, &mut inner);
        }
        RelayMessage::Nonce(nonce) => {
            inner.push(0);
            let body = BValue::Dictionary(vec![
                (b"nonce".to_vec(), BValue::bytes(nonce.nonce)),
                (b"share".to_vec(), BValue::bytes(nonce.share_id.0)),
            ]);
            bencode::encode_into(&body, &mut inner);
        }
    }
    let mut out = (inner.len() as u16).to_be_bytes().to_vec();
    out.extend_from_slice(&inner);
    out
}

/// Decodes a relay frame into its init or nonce form.
pub fn decode_relay_message(bytes: &[u8]) -> Result<RelayMessage, WireError> {
    if bytes.len() < 2 {
        return Err(WireError::BadFrameLength);
    }
    let declared = u16::from_be_bytes([bytes[0], bytes[1]]) as usize;
    let inner = &bytes[2..];
    if inner.len() != declared {
        return Err(WireError::BadFrameLength);
    }
    if inner.len() < RELAY_COUNTER.len() + 5 + 1 {
        return Err(WireError::BadMagic);
    }
    let tail = &inner[RELAY_COUNTER.len()..];
    let tail = tail.strip_prefix(b"BSYNC").ok_or(WireError::BadMagic)?;
    if tail[0] != 0 {
        return Err(WireError::BadMagic);
    }
    if tail.len() >= 3 && tail[1] == 0 && tail[2] == 0 {
        let body = &tail[3..];
        if body.len() < 20 {
            return Err(WireError::WrongWidth {
                field: "remote peer id",
                got: body.len(),
            });
        }
        let remote: [u8; 20] = body[..20].try_into().unwrap();
        let dict = bencode::decode(&body[20..])?;
        Ok(RelayMessage::Init(RelayInit {
            remote_peer_id: PeerId(remote),
            local_peer_id: PeerId(id20_field(&dict, "peer")?),
        }))
    } else if tail.len() >= 2 && tail[1] == b'd' {
        let dict = bencode::decode(&tail[1..])?;
        let raw_nonce = bytes_field(&dict, "nonce")?;
        let nonce: [u8; 16] = raw_nonce.try_into().map_err(|_| WireError::WrongWidth {
            field: "nonce",
            got: raw_nonce.len(),
        })?;
        Ok(RelayMessage::Nonce(RelayNonce {
            nonce,
            share_id: ShareId(id20_field(&dict, "share")?),
        }))
    } else {
        Err(WireError::BadMagic)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn addr(a: u8, b: u8, c: u8, d: u8, port: u16) -> SocketAddrV4 {
        SocketAddrV4::new(Ipv4Addr::new(a, b, c, d), port)
    }

    fn sample_get_peers(share_id: WireShareId) -> GetPeers {
        GetPeers {
            local_addr: addr(127, 0, 0, 1, 8080),
            local_port: 8080,
            peer_id: PeerId([0x11; 20]),
            share_id,
        }
    }

    #[test]
    fn get_peers_v14_matches_template_bytes() {
        let msg = sample_get_peers(WireShareId::Id20(ShareId([0x22; 20])));
        let frame = encode_get_peers(&msg, Dialect::V14).unwrap();

        let mut expected = vec![0x01];
        expected.extend_from_slice(&[0u8; 19]);
        expected.extend_from_slice(b"d2:la6:\x7f\x00\x00\x01\x1f\x902:lpi8080e1:m9:get_peers4:peer20:");
        expected.extend_from_slice(&[0x11; 20]);
        expected.extend_from_slice(b"5:share20:");
        expected.extend_from_slice(&[0x22; 20]);
        expected.push(b'e');
        assert_eq!(frame, expected);
        assert_eq!(decode_get_peers(&frame).unwrap(), msg);
    }

    #[test]
    fn get_peers_share_width_follows_dialect() {
        let v14 = sample_get_peers(WireShareId::Id20(ShareId([0x22; 20])));
        let v20 = sample_get_peers(WireShareId::Id32(ShareId32([0x33; 32])));

        let f14 = encode_get_peers(&v14, Dialect::V14).unwrap();
        assert!(contains(&f14, b"9:get_peers"));
        assert!(contains(&f14, b"5:share20:"));

        let f20 = encode_get_peers(&v20, Dialect::V20).unwrap();
        assert!(contains(&f20, b"5:share32:"));

        assert!(matches!(
            encode_get_peers(&v14, Dialect::V20),
            Err(WireError::DialectMismatch { .. })
        ));
        assert!(matches!(
            encode_get_peers(&v20, Dialect::V14),
            Err(WireError::DialectMismatch { .. })
        ));
    }

    #[test]
    fn peers_response_round_trips_entries_in_order() {
        let msg = PeersResponse {
            external_addr: addr(198, 51, 100, 7, 40123),
            peers: vec![
                PeerEntry {
                    addr: addr(198, 51, 100, 7, 40123),
                    local_addr: addr(192, 168, 0, 2, 3839),
                    peer_id: PeerId([0xaa; 20]),
                },
                PeerEntry {
                    addr: addr(203, 0, 113, 9, 40124),
                    local_addr: addr(10, 0, 0, 2, 3839),
                    peer_id: PeerId([0xbb; 20]),
                },
                PeerEntry {
                    addr: addr(203, 0, 113, 10, 40125),
                    local_addr: addr(10, 0, 0, 3, 3839),
                    peer_id: PeerId([0xcc; 20]),
                },
            ],
            share_id: ShareId([0x22; 20]),
            time: 1_400_000_123,
        };
        let frame = encode_peers_response(&msg);
        assert!(contains(&frame, b"5:peers5:peersl"));
        let decoded = decode_peers_response(&frame).unwrap();
        assert_eq!(decoded, msg);
        assert!(lint_peers_response(&decoded).is_empty());
    }

    #[test]
    fn empty_peer_list_decodes_with_lint() {
        let msg = PeersResponse {
            external_addr: addr(198, 51, 100, 7, 40123),
            peers: Vec::new(),
            share_id: ShareId([0x22; 20]),
            time: 0,
        };
        let frame = encode_peers_response(&msg);
        assert!(contains(&frame, b"5:peersle"));
        let decoded = decode_peers_response(&frame).unwrap();
        assert!(decoded.peers.is_empty());
        assert_eq!(lint_peers_response(&decoded), vec![WireLint::EmptyPeerList]);
    }

    #[test]
    fn malformed_peer_entry_is_rejected_with_index() {
        let payload = BValue::Dictionary(vec![
            (b"ea".to_vec(), BValue::bytes([1, 2, 3, 4, 0, 80])),
            (b"m".to_vec(), BValue::bytes(*b"peers")),
            (
                b"peers".to_vec(),
                BValue::List(vec![BValue::Dictionary(vec![
                    (b"a".to_vec(), BValue::bytes([1, 2, 3, 4, 0])),
                    (b"la".to_vec(), BValue::bytes([10, 0, 0, 1, 15, 0])),
                    (b"p".to_vec(), BValue::bytes([0xaa; 20])),
                ])]),
            ),
            (b"share".to_vec(), BValue::bytes([0x22; 20])),
            (b"time".to_vec(), BValue::int(5)),
        ]);
        let mut frame = encode_utp_header(&UtpHeader::new(UtpPacketType::Data)).to_vec();
        bencode::encode_into(&payload, &mut frame);
        assert_eq!(
            decode_peers_response(&frame),
            Err(WireError::MalformedPeerEntry {
                index: 0,
                reason: "a field is not 6 bytes"
            })
        );
    }

    #[test]
    fn ping_forms_carry_their_share_width() {
        let multicast = Ping {
            peer_id: PeerId([0x44; 20]),
            port: 3838,
            share_id: WireShareId::Id32(ShareId32([0x55; 32])),
        };
        let frame = encode_ping(&multicast, 32).unwrap();
        assert!(frame.starts_with(BSYNC_MAGIC));
        assert!(contains(&frame, b"d1:m4:ping4:peer20:"));
        assert!(contains(&frame, b"5:share32:"));
        assert_eq!(decode_ping(&frame).unwrap(), multicast);

        let response = Ping {
            peer_id: PeerId([0x44; 20]),
            port: 3839,
            share_id: WireShareId::Id20(ShareId([0x66; 20])),
        };
        let frame = encode_ping(&response, 20).unwrap();
        assert!(contains(&frame, b"5:share20:"));
        assert_eq!(decode_ping(&frame).unwrap(), response);

        assert!(matches!(
            encode_ping(&response, 32),
            Err(WireError::WrongWidth { field: "share", .. })
        ));
        assert!(matches!(
            encode_ping(&response, 21),
            Err(WireError::WrongWidth { field: "share_width", .. })
        ));
    }

    #[test]
    fn ping_without_magic_is_rejected() {
        assert_eq!(
            decode_ping(b"d1:m4:pinge"),
            Err(WireError::BadMagic)
        );
    }

    #[test]
    fn relay_init_round_trips() {
        let msg = RelayMessage::Init(RelayInit {
            remote_peer_id: PeerId([0x66; 20]),
            local_peer_id: PeerId([0x77; 20]),
        });
        let frame = encode_relay_message(&msg);
        let declared = u16::from_be_bytes([frame[0], frame[1]]) as usize;
        assert_eq!(declared, frame.len() - 2);
        assert_eq!(&frame[6..11], b"BSYNC");
        assert_eq!(decode_relay_message(&frame).unwrap(), msg);
    }

    #[test]
    fn relay_nonce_round_trips_and_names_its_fields() {
        let msg = RelayMessage::Nonce(RelayNonce {
            nonce: [0x88; 16],
            share_id: ShareId([0x99; 20]),
        });
        let frame = encode_relay_message(&msg);
        assert!(contains(&frame, b"5:nonce16:"));
        assert!(contains(&frame, b"5:share20:"));
        assert_eq!(decode_relay_message(&frame).unwrap(), msg);
    }

    #[test]
    fn relay_nonce_with_short_nonce_is_rejected() {
        let mut inner = RELAY_COUNTER.to_vec();
        inner.extend_from_slice(b"BSYNC\x00");
        let body = BValue::Dictionary(vec![
            (b"nonce".to_vec(), BValue::bytes([0x88; 15])),
            (b"share".to_vec(), BValue::bytes([0x99; 20])),
        ]);
        bencode::encode_into(&body, &mut inner);
        let mut frame = (inner.len() as u16).to_be_bytes().to_vec();
        frame.extend_from_slice(&inner);
        assert_eq!(
            decode_relay_message(&frame),
            Err(WireError::WrongWidth {
                field: "nonce",
                got: 15
            })
        );
    }

    #[test]
    fn relay_frame_with_wrong_length_word_is_rejected() {
        let msg = RelayMessage::Init(RelayInit {
            remote_peer_id: PeerId([0x66; 20]),
            local_peer_id: PeerId([0x77; 20]),
        });
        let mut frame = encode_relay_message(&msg);
        frame[1] ^= 1;
        assert_eq!(
            decode_relay_message(&frame),
            Err(WireError::BadFrameLength)
        );
    }

    fn contains(haystack: &[u8], needle: &[u8]) -> bool {
        haystack.windows(needle.len()).any(|w| w == needle)
    }
}

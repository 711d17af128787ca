//! Offline analysis of captured sync traffic.
//!
//! The pipeline is capture file -> [`CaptureRecord`] stream ->
//! [`classify_stream`] -> share-id extraction and flow reconstruction. Every
//! stage is total over hostile input: frames that fail to decode stay in the
//! output with a soft classification instead of aborting the run, because a
//! seized capture is read once and explained, never filtered.

pub mod capture;

pub use capture::{
    parse_hexdump, parse_raw_frames, read_capture, write_capture, write_hexdump, write_raw_frames,
    CaptureError, CaptureFormat, RAW_FRAMES_MAGIC,
};

use std::collections::{BTreeMap, BTreeSet};
use std::net::{Ipv4Addr, SocketAddrV4};

use crate::keys::PeerId;
use crate::wire::{
    classify_frame, decode_get_peers, decode_peers_response, decode_ping, decode_relay_message,
    Classification, RelayMessage, SyncMessage, Transport, WireShareId,
};

// --- Input records ---

/// One captured frame: a UDP datagram or a reassembled TCP segment payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptureRecord {
    /// Capture time in microseconds since the unix epoch.
    pub timestamp_us: u64,
    pub src: SocketAddrV4,
    pub dst: SocketAddrV4,
    pub transport: Transport,
    pub payload: Vec<u8>,
}

/// Endpoints that mark infrastructure traffic in a capture.
///
/// Defaults are the historically published tracker addresses and the well
/// known discovery and relay ports; investigations of later deployments
/// override them from the command line or a config file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DissectorConfig {
    pub tracker_ips: Vec<Ipv4Addr>,
    pub lpd_port: u16,
    pub relay_port: u16,
}

impl Default for DissectorConfig {
    fn default() -> Self {
        DissectorConfig {
            tracker_ips: vec![
                Ipv4Addr::new(54, 225, 100, 8),
                Ipv4Addr::new(54, 225, 92, 50),
                Ipv4Addr::new(54, 225, 196, 38),
            ],
            lpd_port: 3838,
            relay_port: 3000,
        }
    }
}

/// Why a frame is believed to involve infrastructure rather than a peer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RoleHint {
    /// An endpoint matches a configured tracker address.
    TrackerTraffic,
    /// An endpoint uses the LAN discovery port.
    LpdTraffic,
    /// An endpoint uses the relay port.
    RelayTraffic,
}

impl RoleHint {
    pub fn label(self) -> &'static str {
        match self {
            RoleHint::TrackerTraffic => "tracker",
            RoleHint::LpdTraffic => "lan-discovery",
            RoleHint::RelayTraffic => "relay",
        }
    }
}

// --- Classification ---

/// A capture record with everything the dissector could determine about it.
///
/// `decoded` is `Some` exactly when the classification names a decodable
/// message kind; the classifier only reports those kinds after a successful
/// decode.
#[derive(Debug, Clone)]
pub struct ClassifiedPacket {
    pub record: CaptureRecord,
    pub classification: Classification,
    pub decoded: Option<SyncMessage>,
    pub role_hints: BTreeSet<RoleHint>,
}

/// Classifies every record in capture order.
pub fn classify_stream(
    records: Vec<CaptureRecord>,
    config: &DissectorConfig,
) -> Vec<ClassifiedPacket> {
    records
        .into_iter()
        .map(|record| classify_record(record, config))
        .collect()
}

fn classify_record(record: CaptureRecord, config: &DissectorConfig) -> ClassifiedPacket {
    let classification = classify_frame(&record.payload, record.transport);
    let decoded = match classification {
        Classification::GetPeers => decode_get_peers(&record.payload)
            .ok()
            .map(SyncMessage::GetPeers),
        Classification::PeersResponse => decode_peers_response(&record.payload)
            .ok()
            .map(SyncMessage::PeersResponse),
        Classification::Ping => decode_ping(&record.payload).ok().map(SyncMessage::Ping),
        Classification::Relay => decode_relay_message(&record.payload).ok().map(|m| match m {
            RelayMessage::Init(init) => SyncMessage::RelayInit(init),
            RelayMessage::Nonce(nonce) => SyncMessage::RelayNonce(nonce),
        }),
        _ => None,
    };
    let mut role_hints = BTreeSet::new();
    for endpoint in [&record.src, &record.dst] {
        if config.tracker_ips.contains(endpoint.ip()) {
            role_hints.insert(RoleHint::TrackerTraffic);
        }
        if endpoint.port() == config.lpd_port {
            role_hints.insert(RoleHint::LpdTraffic);
        }
        if endpoint.port() == config.relay_port {
            role_hints.insert(RoleHint::RelayTraffic);
        }
    }
    ClassifiedPacket {
        record,
        classification,
        decoded,
        role_hints,
    }
}

// --- Share-id extraction ---

/// One distinct share id seen in a capture, with the packets that carried it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractedShareId {
    pub id: WireShareId,
    /// Timestamp of the earliest packet carrying the id.
    pub first_seen_us: u64,
    /// Indices into the classified packet stream.
    pub packet_refs: Vec<usize>,
}

fn message_share_id(message: &SyncMessage) -> Option<WireShareId> {
    match message {
        SyncMessage::GetPeers(m) => Some(m.share_id),
        SyncMessage::PeersResponse(m) => Some(WireShareId::Id20(m.share_id)),
        SyncMessage::Ping(m) => Some(m.share_id),
        SyncMessage::RelayNonce(m) => Some(WireShareId::Id20(m.share_id)),
        SyncMessage::RelayInit(_) => None,
    }
}

/// Collects the distinct share ids from decoded packets.
///
/// The two wire widths are kept apart even when one is a prefix of the
/// other; output is ordered by first appearance, then id bytes.
pub fn extract_share_ids(packets: &[ClassifiedPacket]) -> Vec<ExtractedShareId> {
    let mut by_id: BTreeMap<(usize, Vec<u8>), ExtractedShareId> = BTreeMap::new();
    for (index, packet) in packets.iter().enumerate() {
        let Some(id) = packet.decoded.as_ref().and_then(message_share_id) else {
            continue;
        };
        let key = (id.width(), id.as_bytes().to_vec());
        by_id
            .entry(key)
            .and_modify(|entry| {
                entry.first_seen_us = entry.first_seen_us.min(packet.record.timestamp_us);
                entry.packet_refs.push(index);
            })
            .or_insert_with(|| ExtractedShareId {
                id,
                first_seen_us: packet.record.timestamp_us,
                packet_refs: vec![index],
            });
    }
    let mut out: Vec<ExtractedShareId> = by_id.into_values().collect();
    out.sort_by(|a, b| {
        (a.first_seen_us, a.id.width(), a.id.as_bytes())
            .cmp(&(b.first_seen_us, b.id.width(), b.id.as_bytes()))
    });
    out
}

// --- Flow reconstruction ---

/// One conversation: all packets between an unordered endpoint pair on one
/// transport.
#[derive(Debug, Clone)]
pub struct FlowSummary {
    /// Lower endpoint of the pair (by address ordering, not by direction).
    pub endpoint_a: SocketAddrV4,
    pub endpoint_b: SocketAddrV4,
    pub transport: Transport,
    pub first_us: u64,
    pub last_us: u64,
    pub total_packets: usize,
    /// Packet counts per classification label.
    pub packet_counts: BTreeMap<&'static str, usize>,
    /// Distinct share ids seen in the flow, in first-seen order.
    pub share_ids: Vec<WireShareId>,
    /// Distinct peer ids seen in the flow, sorted.
    pub peer_ids: Vec<PeerId>,
    pub role_hints: BTreeSet<RoleHint>,
}

fn transport_tag(transport: Transport) -> u8 {
    match transport {
        Transport::Udp => 0,
        Transport::Tcp => 1,
    }
}

fn message_peer_ids(message: &SyncMessage) -> Vec<PeerId> {
    match message {
        SyncMessage::GetPeers(m) => vec![m.peer_id],
        SyncMessage::PeersResponse(m) => m.peers.iter().map(|p| p.peer_id).collect(),
        SyncMessage::Ping(m) => vec![m.peer_id],
        SyncMessage::RelayInit(m) => vec![m.remote_peer_id, m.local_peer_id],
        SyncMessage::RelayNonce(_) => Vec::new(),
    }
}

/// Groups classified packets into conversations.
///
/// Output is ordered by first packet time, then endpoints. Flow identity
/// ignores direction, so a request and its response land in one flow.
pub fn reconstruct_flows(packets: &[ClassifiedPacket]) -> Vec<FlowSummary> {
    let mut flows: BTreeMap<(SocketAddrV4, SocketAddrV4, u8), FlowSummary> = BTreeMap::new();
    for packet in packets {
        let (a, b) = if packet.record.src <= packet.record.dst {
            (packet.record.src, packet.record.dst)
        } else {
            (packet.record.dst, packet.record.src)
        };
        let key = (a, b, transport_tag(packet.record.transport));
        let flow = flows.entry(key).or_insert_with(|| FlowSummary {
            endpoint_a: a,
            endpoint_b: b,
            transport: packet.record.transport,
            first_us: packet.record.timestamp_us,
            last_us: packet.record.timestamp_us,
            total_packets: 0,
            packet_counts: BTreeMap::new(),
            share_ids: Vec::new(),
            peer_ids: Vec::new(),
            role_hints: BTreeSet::new(),
        });
        flow.first_us = flow.first_us.min(packet.record.timestamp_us);
        flow.last_us = flow.last_us.max(packet.record.timestamp_us);
        flow.total_packets += 1;
        *flow
            .packet_counts
            .entry(packet.classification.label())
            .or_insert(0) += 1;
        flow.role_hints.extend(packet.role_hints.iter().copied());
        if let Some(message) = &packet.decoded {
            if let Some(id) = message_share_id(message) {
                if !flow.share_ids.contains(&id) {
                    flow.share_ids.push(id);
                }
            }
            for peer_id in message_peer_ids(message) {
                if !flow.peer_ids.contains(&peer_id) {
                    flow.peer_ids.push(peer_id);
                }
            }
        }
    }
    let mut out: Vec<FlowSummary> = flows.into_values().collect();
    for flow in &mut out {
        flow.peer_ids.sort();
    }
    out.sort_by_key(|f| (f.first_us, f.endpoint_a, f.endpoint_b, transport_tag(f.transport)));
    out
}

//! Frame codec contracts over generated messages: every encoder/decoder
//! pair round-trips, classification agrees with the encoder that produced
//! the frame, and the classifier is total over arbitrary bytes.

use std::net::{Ipv4Addr, SocketAddrV4};

use proptest::prelude::*;
use syncprobe_core::keys::{PeerId, ShareId, ShareId32};
use syncprobe_core::wire::{
    classify_frame, decode_get_peers, decode_peers_response, decode_ping, decode_relay_message,
    decode_utp_header, encode_get_peers, encode_peers_response, encode_ping, encode_relay_message,
    encode_utp_header, lint_peers_response, Classification, Dialect, GetPeers, PeerEntry,
    PeersResponse, Ping, RelayInit, RelayMessage, RelayNonce, Transport, UtpHeader, UtpPacketType,
    WireLint, WireShareId, BSYNC_MAGIC, UTP_HEADER_LEN,
};

const ALL_LABELS: [&str; 11] = [
    "utp-data",
    "utp-fin",
    "utp-state",
    "utp-rst",
    "utp-syn",
    "get-peers",
    "peers-response",
    "ping",
    "relay",
    "unknown-bsync",
    "not-btsync",
];

// --- Strategies ---

fn arb_addr() -> impl Strategy<Value = SocketAddrV4> {
    (any::<[u8; 4]>(), any::<u16>())
        .prop_map(|(ip, port)| SocketAddrV4::new(Ipv4Addr::from(ip), port))
}

fn arb_peer_id() -> impl Strategy<Value = PeerId> {
    any::<[u8; 20]>().prop_map(PeerId)
}

fn arb_share20() -> impl Strategy<Value = ShareId> {
    any::<[u8; 20]>().prop_map(ShareId)
}

fn arb_wire_share() -> impl Strategy<Value = WireShareId> {
    prop_oneof![
        arb_share20().prop_map(WireShareId::Id20),
        any::<[u8; 32]>().prop_map(|b| WireShareId::Id32(ShareId32(b))),
    ]
}

fn arb_packet_type() -> impl Strategy<Value = UtpPacketType> {
    prop_oneof![
        Just(UtpPacketType::Data),
        Just(UtpPacketType::Fin),
        Just(UtpPacketType::State),
        Just(UtpPacketType::Rst),
        Just(UtpPacketType::Syn),
    ]
}

fn arb_transport() -> impl Strategy<Value = Transport> {
    prop_oneof![Just(Transport::Udp), Just(Transport::Tcp)]
}

fn arb_header() -> impl Strategy<Value = UtpHeader> {
    (
        arb_packet_type(),
        any::<u8>(),
        any::<u16>(),
        any::<(u32, u32, u32)>(),
        any::<(u16, u16)>(),
    )
        .prop_map(|(packet_type, extension, connection_id, stamps, nrs)| UtpHeader {
            packet_type,
            version: 1,
            extension,
            connection_id,
            timestamp_us: stamps.0,
            timestamp_diff_us: stamps.1,
            window_size: stamps.2,
            seq_nr: nrs.0,
            ack_nr: nrs.1,
        })
}

fn arb_entry() -> impl Strategy<Value = PeerEntry> {
    (arb_addr(), arb_addr(), arb_peer_id()).prop_map(|(addr, local_addr, peer_id)| PeerEntry {
        addr,
        local_addr,
        peer_id,
    })
}

fn arb_get_peers() -> impl Strategy<Value = GetPeers> {
    (arb_addr(), any::<u16>(), arb_peer_id(), arb_wire_share()).prop_map(
        |(local_addr, local_port, peer_id, share_id)| GetPeers {
            local_addr,
            local_port,
            peer_id,
            share_id,
        },
    )
}

fn arb_peers_response() -> impl Strategy<Value = PeersResponse> {
    (
        arb_addr(),
        proptest::collection::vec(arb_entry(), 0..6),
        arb_share20(),
        any::<i64>(),
    )
        .prop_map(|(external_addr, peers, share_id, time)| PeersResponse {
            external_addr,
            peers,
            share_id,
            time,
        })
}

fn arb_ping() -> impl Strategy<Value = Ping> {
    (arb_peer_id(), any::<u16>(), arb_wire_share()).prop_map(|(peer_id, port, share_id)| Ping {
        peer_id,
        port,
        share_id,
    })
}

fn arb_relay_message() -> impl Strategy<Value = RelayMessage> {
    prop_oneof![
        (arb_peer_id(), arb_peer_id()).prop_map(|(remote_peer_id, local_peer_id)| {
            RelayMessage::Init(RelayInit { remote_peer_id, local_peer_id })
        }),
        (any::<[u8; 16]>(), arb_share20())
            .prop_map(|(nonce, share_id)| RelayMessage::Nonce(RelayNonce { nonce, share_id })),
    ]
}

fn dialect_for(share: &WireShareId) -> Dialect {
    match share.width() {
        20 => Dialect::V14,
        _ => Dialect::V20,
    }
}

proptest! {
    #[test]
    fn utp_header_round_trips(header in arb_header()) {
        let bytes = encode_utp_header(&header);
        prop_assert_eq!(bytes[0], ((header.packet_type as u8) << 4) | 1);
        let decoded = decode_utp_header(&bytes);
        prop_assert_eq!(decoded.as_ref(), Ok(&header));
    }

    #[test]
    fn bare_headers_classify_by_packet_type(header in arb_header(), transport in arb_transport()) {
        let bytes = encode_utp_header(&header);
        prop_assert_eq!(
            classify_frame(&bytes, transport),
            Classification::UtpControl(header.packet_type)
        );
    }

    #[test]
    fn get_peers_round_trips_in_its_dialect(msg in arb_get_peers(), transport in arb_transport()) {
        let bytes = encode_get_peers(&msg, dialect_for(&msg.share_id)).unwrap();
        prop_assert_eq!(bytes[0], 0x01);
        let decoded = decode_get_peers(&bytes);
        prop_assert_eq!(decoded.as_ref(), Ok(&msg));
        prop_assert_eq!(classify_frame(&bytes, transport), Classification::GetPeers);
    }

    #[test]
    fn get_peers_rejects_the_wrong_dialect(msg in arb_get_peers()) {
        let wrong = match dialect_for(&msg.share_id) {
            Dialect::V14 => Dialect::V20,
            Dialect::V20 => Dialect::V14,
        };
        prop_assert!(encode_get_peers(&msg, wrong).is_err());
    }

    #[test]
    fn peers_response_round_trips(msg in arb_peers_response(), transport in arb_transport()) {
        let bytes = encode_peers_response(&msg);
        prop_assert_eq!(bytes[0], 0x01);
        let decoded = decode_peers_response(&bytes);
        prop_assert_eq!(decoded.as_ref(), Ok(&msg));
        prop_assert_eq!(classify_frame(&bytes, transport), Classification::PeersResponse);
        let lints = lint_peers_response(&msg);
        if msg.peers.is_empty() {
            prop_assert_eq!(lints, vec![WireLint::EmptyPeerList]);
        } else {
            prop_assert!(lints.is_empty());
        }
    }

    #[test]
    fn ping_round_trips_in_both_widths(msg in arb_ping(), transport in arb_transport()) {
        let bytes = encode_ping(&msg, msg.share_id.width()).unwrap();
        prop_assert!(bytes.starts_with(BSYNC_MAGIC));
        let decoded = decode_ping(&bytes);
        prop_assert_eq!(decoded.as_ref(), Ok(&msg));
        prop_assert_eq!(classify_frame(&bytes, transport), Classification::Ping);
    }

    #[test]
    fn ping_rejects_a_mismatched_width(msg in arb_ping()) {
        let wrong = if msg.share_id.width() == 20 { 32 } else { 20 };
        prop_assert!(encode_ping(&msg, wrong).is_err());
        prop_assert!(encode_ping(&msg, 21).is_err());
    }

    #[test]
    fn relay_messages_round_trip(msg in arb_relay_message(), transport in arb_transport()) {
        let bytes = encode_relay_message(&msg);
        let declared = u16::from_be_bytes([bytes[0], bytes[1]]) as usize;
        prop_assert_eq!(declared, bytes.len() - 2);
        prop_assert_eq!(&bytes[6..11], b"BSYNC");
        let decoded = decode_relay_message(&bytes);
        prop_assert_eq!(decoded.as_ref(), Ok(&msg));
        prop_assert_eq!(classify_frame(&bytes, transport), Classification::Relay);
    }

    #[test]
    fn classifier_is_total_over_arbitrary_bytes(
        bytes in proptest::collection::vec(any::<u8>(), 0..512),
        transport in arb_transport(),
    ) {
        let label = classify_frame(&bytes, transport).label();
        prop_assert!(ALL_LABELS.contains(&label));
    }

    #[test]
    fn mutated_frames_never_panic(
        msg in arb_get_peers(),
        index in any::<prop::sample::Index>(),
        xor in 1u8..=255,
        transport in arb_transport(),
    ) {
        let mut bytes = encode_get_peers(&msg, dialect_for(&msg.share_id)).unwrap();
        let at = index.index(bytes.len());
        bytes[at] ^= xor;
        let label = classify_frame(&bytes, transport).label();
        prop_assert!(ALL_LABELS.contains(&label));
        if let Err(err) = decode_get_peers(&bytes) {
            prop_assert!(!err.to_string().is_empty());
        }
    }

    #[test]
    fn truncated_frames_fail_with_typed_errors(msg in arb_peers_response(), cut in any::<prop::sample::Index>()) {
        let bytes = encode_peers_response(&msg);
        let cut = cut.index(bytes.len());
        let err = decode_peers_response(&bytes[..cut]).unwrap_err();
        prop_assert!(!err.to_string().is_empty());
        let label = classify_frame(&bytes[..cut], Transport::Udp).label();
        prop_assert!(ALL_LABELS.contains(&label));
    }
}

#[test]
fn payloadless_data_header_is_still_transport_evidence() {
    let bytes = encode_utp_header(&UtpHeader::new(UtpPacketType::Data));
    assert_eq!(bytes.len(), UTP_HEADER_LEN);
    assert_eq!(
        classify_frame(&bytes, Transport::Udp),
        Classification::UtpControl(UtpPacketType::Data)
    );
}

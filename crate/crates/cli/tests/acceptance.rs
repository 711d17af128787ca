//! Acceptance gate: twelve product criteria, one test and one printed
//! PASS/FAIL line each. Criteria with a runtime budget assert it. Run with
//! `cargo test -p syncprobe-cli --test acceptance -- --nocapture` to see the
//! lines.

use std::collections::{BTreeMap, BTreeSet};
use std::net::{Ipv4Addr, SocketAddrV4};
use std::panic::AssertUnwindSafe;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use syncprobe_core::bencode::{self, BValue};
use syncprobe_core::crawler::{
    detect_findings, diff_snapshots, enumerate_peers, retrieve_content, CrawlTransport,
    FindingKind, RecoveryStatus, Source,
};
use syncprobe_core::dissector::{classify_stream, read_capture, CaptureFormat, DissectorConfig};
use syncprobe_core::keys::{
    classify_key, derive_one_time, derive_read_only, generate_rw_key, KeyKind, PeerId, ShareId,
    ShareId32,
};
use syncprobe_core::simnet::dht::{
    dht_lookup, dht_xor_distance, DhtNetwork, StoredPeer, BUCKET_WIDTH,
};
use syncprobe_core::simnet::relay::{RelayEvent, RelaySession, RelaySessionState};
use syncprobe_core::simnet::scenario::{preset, Scenario};
use syncprobe_core::simnet::tracker::TrackerState;
use syncprobe_core::simnet::SimWorld;
use syncprobe_core::wire::{
    classify_frame, decode_get_peers, decode_peers_response, decode_ping, decode_relay_message,
    decode_utp_header, encode_get_peers, encode_peers_response, encode_ping, encode_relay_message,
    encode_utp_header, format_share_link, parse_share_link, Dialect, GetPeers, PeerEntry,
    PeersResponse, Ping, RelayInit, RelayMessage, RelayNonce, ShareLink, Transport, UtpHeader,
    UtpPacketType, WireShareId,
};

// --- Harness ---

/// Runs one criterion and prints exactly one PASS/FAIL line for it.
fn criterion(number: u32, title: &str, run: impl FnOnce()) {
    match std::panic::catch_unwind(AssertUnwindSafe(run)) {
        Ok(()) => println!("criterion {number:>2}: PASS  {title}"),
        Err(payload) => {
            println!("criterion {number:>2}: FAIL  {title}");
            std::panic::resume_unwind(payload);
        }
    }
}

fn run_cli(args: &[&str]) -> (u8, String) {
    let mut out = Vec::new();
    let code = syncprobe_cli::run_for_test(args, &mut out);
    (code, String::from_utf8(out).expect("utf-8 output"))
}

fn contains(haystack: &[u8], needle: &[u8]) -> bool {
    haystack.windows(needle.len()).any(|w| w == needle)
}

fn scenario_for(name: &str) -> Scenario {
    Scenario::build(&preset(name).expect("preset exists")).expect("preset builds")
}

fn world_for(name: &str) -> SimWorld {
    SimWorld::build(scenario_for(name))
}

fn all_sources() -> BTreeSet<Source> {
    Source::ALL.into_iter().collect()
}

fn only(source: Source) -> BTreeSet<Source> {
    BTreeSet::from([source])
}

/// Filename → bytes for every regular file in a directory.
fn dir_contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut map = BTreeMap::new();
    for entry in std::fs::read_dir(dir).expect("readable dir") {
        let entry = entry.expect("dir entry");
        if entry.file_type().expect("file type").is_file() {
            let name = entry.file_name().to_string_lossy().into_owned();
            map.insert(name, std::fs::read(entry.path()).expect("readable file"));
        }
    }
    map
}

// --- Random message corpus ---

fn random_addr(rng: &mut ChaCha8Rng) -> SocketAddrV4 {
    SocketAddrV4::new(Ipv4Addr::from(rng.random::<[u8; 4]>()), rng.random())
}

fn random_wire_share(rng: &mut ChaCha8Rng) -> WireShareId {
    if rng.random::<bool>() {
        WireShareId::Id20(ShareId(rng.random()))
    } else {
        WireShareId::Id32(ShareId32(rng.random()))
    }
}

fn dialect_for(share: &WireShareId) -> Dialect {
    match share.width() {
        20 => Dialect::V14,
        _ => Dialect::V20,
    }
}

fn random_bvalue(rng: &mut ChaCha8Rng, depth: usize) -> BValue {
    let pick = if depth >= 4 {
        rng.random_range(0..2)
    } else {
        rng.random_range(0..4)
    };
    match pick {
        0 => BValue::int(rng.random()),
        1 => {
            let mut bytes = vec![0u8; rng.random_range(0..24)];
            rng.fill_bytes(&mut bytes);
            BValue::bytes(bytes)
        }
        2 => {
            let n = rng.random_range(0..4);
            BValue::List((0..n).map(|_| random_bvalue(rng, depth + 1)).collect())
        }
        _ => {
            let n = rng.random_range(0..4);
            BValue::Dictionary(
                (0..n)
                    .map(|_| {
                        let mut key = vec![0u8; rng.random_range(0..8)];
                        rng.fill_bytes(&mut key);
                        (key, random_bvalue(rng, depth + 1))
                    })
                    .collect(),
            )
        }
    }
}

fn random_get_peers(rng: &mut ChaCha8Rng) -> GetPeers {
    GetPeers {
        local_addr: random_addr(rng),
        local_port: rng.random(),
        peer_id: PeerId(rng.random()),
        share_id: random_wire_share(rng),
    }
}

fn random_peers_response(rng: &mut ChaCha8Rng) -> PeersResponse {
    let entries = rng.random_range(0..5);
    PeersResponse {
        external_addr: random_addr(rng),
        peers: (0..entries)
            .map(|_| PeerEntry {
                addr: random_addr(rng),
                local_addr: random_addr(rng),
                peer_id: PeerId(rng.random()),
            })
            .collect(),
        share_id: ShareId(rng.random()),
        time: rng.random(),
    }
}

fn random_ping(rng: &mut ChaCha8Rng) -> Ping {
    Ping {
        peer_id: PeerId(rng.random()),
        port: rng.random(),
        share_id: random_wire_share(rng),
    }
}

fn random_relay_message(rng: &mut ChaCha8Rng) -> RelayMessage {
    if rng.random::<bool>() {
        RelayMessage::Init(RelayInit {
            remote_peer_id: PeerId(rng.random()),
            local_peer_id: PeerId(rng.random()),
        })
    } else {
        RelayMessage::Nonce(RelayNonce {
            nonce: rng.random(),
            share_id: ShareId(rng.random()),
        })
    }
}

/// Encoded bytes of one random protocol message.
fn random_frame(rng: &mut ChaCha8Rng) -> Vec<u8> {
    match rng.random_range(0..5u8) {
        0 => {
            let msg = random_get_peers(rng);
            encode_get_peers(&msg, dialect_for(&msg.share_id)).expect("matching dialect")
        }
        1 => encode_peers_response(&random_peers_response(rng)),
        2 => {
            let msg = random_ping(rng);
            encode_ping(&msg, msg.share_id.width()).expect("matching width")
        }
        3 => encode_relay_message(&random_relay_message(rng)),
        _ => encode_utp_header(&UtpHeader::new(UtpPacketType::State)).to_vec(),
    }
}

// --- Criteria ---

#[test]
fn criterion_01_codec_round_trips_and_fuzz_totality() {
    criterion(1, "codec round-trips and fuzz totality (< 60 s)", || {
        let started = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(0x0DEC0DE);

        for _ in 0..100_000 {
            let value = random_bvalue(&mut rng, 0);
            let bytes = bencode::encode(&value);
            let decoded = bencode::decode(&bytes).expect("own encoding decodes");
            assert_eq!(decoded, value);
            assert_eq!(bencode::encode(&decoded), bytes, "re-encode is bit-exact");
        }

        for _ in 0..10_000 {
            match rng.random_range(0..5u8) {
                0 => {
                    let msg = random_get_peers(&mut rng);
                    let dialect = dialect_for(&msg.share_id);
                    let bytes = encode_get_peers(&msg, dialect).unwrap();
                    let back = decode_get_peers(&bytes).unwrap();
                    assert_eq!(back, msg);
                    assert_eq!(encode_get_peers(&back, dialect).unwrap(), bytes);
                }
                1 => {
                    let msg = random_peers_response(&mut rng);
                    let bytes = encode_peers_response(&msg);
                    let back = decode_peers_response(&bytes).unwrap();
                    assert_eq!(back, msg);
                    assert_eq!(encode_peers_response(&back), bytes);
                }
                2 => {
                    let msg = random_ping(&mut rng);
                    let width = msg.share_id.width();
                    let bytes = encode_ping(&msg, width).unwrap();
                    let back = decode_ping(&bytes).unwrap();
                    assert_eq!(back, msg);
                    assert_eq!(encode_ping(&back, width).unwrap(), bytes);
                }
                3 => {
                    let msg = random_relay_message(&mut rng);
                    let bytes = encode_relay_message(&msg);
                    let back = decode_relay_message(&bytes).unwrap();
                    assert_eq!(back, msg);
                    assert_eq!(encode_relay_message(&back), bytes);
                }
                _ => {
                    let header = UtpHeader {
                        packet_type: UtpPacketType::Data,
                        version: 1,
                        extension: rng.random(),
                        connection_id: rng.random(),
                        timestamp_us: rng.random(),
                        timestamp_diff_us: rng.random(),
                        window_size: rng.random(),
                        seq_nr: rng.random(),
                        ack_nr: rng.random(),
                    };
                    let bytes = encode_utp_header(&header);
                    let back = decode_utp_header(&bytes).unwrap();
                    assert_eq!(back, header);
                    assert_eq!(encode_utp_header(&back), bytes);
                }
            }
        }

        let mut typed_errors = 0usize;
        for i in 0..100_000usize {
            // Mix raw noise with single-byte corruptions of valid frames so
            // the fuzz corpus reaches past the magic checks.
            let bytes = if i % 4 == 0 {
                let mut frame = random_frame(&mut rng);
                let at = rng.random_range(0..frame.len());
                frame[at] ^= rng.random_range(1..=255u8);
                frame
            } else {
                let mut noise = vec![0u8; rng.random_range(0..64)];
                rng.fill_bytes(&mut noise);
                noise
            };
            let transport = if i % 2 == 0 { Transport::Udp } else { Transport::Tcp };
            if let Err(err) = bencode::decode(&bytes) {
                typed_errors += 1;
                assert!(!err.to_string().is_empty());
            }
            if let Err(err) = decode_utp_header(&bytes) {
                assert!(!err.to_string().is_empty());
            }
            let _ = decode_get_peers(&bytes);
            let _ = decode_peers_response(&bytes);
            let _ = decode_ping(&bytes);
            let _ = decode_relay_message(&bytes);
            let _ = classify_frame(&bytes, transport);
        }
        assert!(typed_errors > 50_000, "noise corpus mostly fails to decode");
        assert!(
            started.elapsed() < Duration::from_secs(60),
            "budget exceeded: {:?}",
            started.elapsed()
        );
    });
}

#[test]
fn criterion_02_golden_wire_bytes() {
    criterion(2, "golden wire bytes, zero tolerance", || {
        for (packet_type, first) in [
            (UtpPacketType::Data, 0x01u8),
            (UtpPacketType::Fin, 0x11),
            (UtpPacketType::State, 0x21),
            (UtpPacketType::Rst, 0x31),
            (UtpPacketType::Syn, 0x41),
        ] {
            assert_eq!(encode_utp_header(&UtpHeader::new(packet_type))[0], first);
        }

        let peer = PeerId(*b"abcdefghijklmnopqrst");
        let narrow = ShareId(*b"ABCDEFGHIJKLMNOPQRST");
        let wide = ShareId32(*b"ABCDEFGHIJKLMNOPQRSTUVWXYZ012345");

        let request = GetPeers {
            local_addr: SocketAddrV4::new(Ipv4Addr::new(192, 168, 1, 2), 3839),
            local_port: 3839,
            peer_id: peer,
            share_id: WireShareId::Id20(narrow),
        };
        let v14 = encode_get_peers(&request, Dialect::V14).unwrap();
        assert_eq!(v14[0], 0x01, "lookup rides a DATA version-1 frame");
        assert!(contains(&v14, b"9:get_peers"));
        assert!(contains(&v14, b"5:share20:"));
        let request32 = GetPeers {
            share_id: WireShareId::Id32(wide),
            ..request
        };
        let v20 = encode_get_peers(&request32, Dialect::V20).unwrap();
        assert_eq!(v20[0], 0x01);
        assert!(contains(&v20, b"9:get_peers"));
        assert!(contains(&v20, b"5:share32:"));

        // Multicast discovery ping, byte for byte.
        let multicast = Ping {
            peer_id: peer,
            port: 3838,
            share_id: WireShareId::Id32(wide),
        };
        let mut expected = b"BSYNC\x00d1:m4:ping4:peer20:".to_vec();
        expected.extend_from_slice(&peer.0);
        expected.extend_from_slice(b"4:porti3838e5:share32:");
        expected.extend_from_slice(&wide.0);
        expected.extend_from_slice(b"e");
        assert_eq!(encode_ping(&multicast, 32).unwrap(), expected);

        // Unicast reply form carries the 20-byte id.
        let reply = Ping {
            peer_id: peer,
            port: 3839,
            share_id: WireShareId::Id20(narrow),
        };
        let mut expected = b"BSYNC\x00d1:m4:ping4:peer20:".to_vec();
        expected.extend_from_slice(&peer.0);
        expected.extend_from_slice(b"4:porti3839e5:share20:");
        expected.extend_from_slice(&narrow.0);
        expected.extend_from_slice(b"e");
        assert_eq!(encode_ping(&reply, 20).unwrap(), expected);
    });
}

#[test]
fn criterion_03_invitation_link_parsing() {
    criterion(3, "invitation link parsing", || {
        let url = "https://link.getsync.com/#f=winhex&sz=35E5&s=XIQSFD2MCDPS2QKITWKJROJ2VUSV2YNA&i=CKKR3V2BBM7MXIOTPU3XWK55JBUFWG3EY&p=CALSNMDGCZZAUQXBXEIR6Q57UMTVOSFI&e=1431277452";
        let link = parse_share_link(url).expect("documented link parses");
        assert_eq!(link.folder_name, "winhex");
        assert_eq!(link.size_hint.as_deref(), Some("35E5"));
        assert_eq!(link.share_id_b32, "XIQSFD2MCDPS2QKITWKJROJ2VUSV2YNA");
        assert_eq!(link.one_time_key, "CKKR3V2BBM7MXIOTPU3XWK55JBUFWG3EY");
        assert_eq!(
            link.server_peer_id.as_deref(),
            Some("CALSNMDGCZZAUQXBXEIR6Q57UMTVOSFI")
        );
        assert_eq!(link.expiry, Some(1431277452));
        assert_eq!(link.version, None);

        let minimal = parse_share_link("https://link.getsync.com/#f=docs&s=AAAA&i=BBBB")
            .expect("mandatory trio suffices");
        assert_eq!(minimal.folder_name, "docs");
        assert_eq!(minimal.share_id_b32, "AAAA");
        assert_eq!(minimal.one_time_key, "BBBB");
        assert_eq!(minimal.size_hint, None);
        assert_eq!(minimal.server_peer_id, None);
        assert_eq!(minimal.expiry, None);
        assert_eq!(minimal.version, None);

        let reparsed = parse_share_link(&format_share_link(&link)).unwrap();
        assert_eq!(reparsed, link, "canonical round-trip");
        let awkward = ShareLink {
            folder_name: "tax records & 2015".to_owned(),
            size_hint: None,
            share_id_b32: "XIQSFD2MCDPS2QKITWKJROJ2VUSV2YNA".to_owned(),
            one_time_key: "CKKR3V2BBM7MXIOTPU3XWK55JBUFWG3EY".to_owned(),
            server_peer_id: None,
            expiry: Some(0),
            version: Some("2.0".to_owned()),
        };
        let reparsed = parse_share_link(&format_share_link(&awkward)).unwrap();
        assert_eq!(reparsed, awkward, "escaping survives the round-trip");
    });
}

#[test]
fn criterion_04_key_classification_and_derivation() {
    criterion(4, "key classification and derivation", || {
        assert_eq!(
            classify_key("BKV273YUFMWILMESLRDVLI5NHMWO3OCS7"),
            KeyKind::ReadOnly
        );

        for seed in 0..50u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rw = generate_rw_key(&mut rng);
            assert_eq!(rw.display().len(), 33);
            assert!(rw.display().starts_with('A'));
            assert_eq!(classify_key(rw.display()), KeyKind::ReadWrite);

            let ro = derive_read_only(&rw).expect("rw derives ro");
            assert_eq!(ro.kind(), KeyKind::ReadOnly);
            assert!(ro.display().starts_with('B'));
            assert_eq!(classify_key(ro.display()), KeyKind::ReadOnly);
            assert_eq!(
                derive_read_only(&rw).unwrap().display(),
                ro.display(),
                "derivation is deterministic"
            );

            let ot = derive_one_time(&rw).expect("rw derives one-time");
            assert_eq!(ot.kind(), KeyKind::OneTime);
            assert!(ot.display().starts_with('C'));
            assert_eq!(
                derive_one_time(&ro).unwrap().display(),
                ot.display(),
                "ro-derived one-time key matches the rw-derived one"
            );
        }
    });
}

#[test]
fn criterion_05_enumeration_completeness() {
    criterion(5, "enumeration completeness across sources (< 5 s)", || {
        let started = Instant::now();
        let scenario = scenario_for("split-visibility");
        let share = scenario.shares[0].share_id;
        // The expected sets come straight from the scenario plan; every
        // source reports a peer's advertised local endpoint verbatim, so
        // locals identify peers across channels.
        let expected_all: BTreeSet<SocketAddrV4> =
            scenario.peers.iter().map(|p| p.local).collect();
        let expected_tracker: BTreeSet<SocketAddrV4> = scenario
            .peers
            .iter()
            .filter(|p| p.tracker)
            .map(|p| p.local)
            .collect();
        assert_eq!(expected_all.len(), 10);
        assert_eq!(expected_tracker.len(), 6);

        let mut world = world_for("split-visibility");
        world.run_until_sim_us(120 * 1_000_000);
        let (full, _) = enumerate_peers(&mut world, &share, &all_sources(), 30).unwrap();
        assert_eq!(full.peer_ids().len(), 10);
        let seen: BTreeSet<SocketAddrV4> = full.records().iter().map(|r| r.local).collect();
        assert_eq!(seen, expected_all);

        let mut world = world_for("split-visibility");
        world.run_until_sim_us(120 * 1_000_000);
        let (tracker_only, _) =
            enumerate_peers(&mut world, &share, &only(Source::Tracker), 30).unwrap();
        assert_eq!(tracker_only.peer_ids().len(), 6);
        let seen: BTreeSet<SocketAddrV4> =
            tracker_only.records().iter().map(|r| r.local).collect();
        assert_eq!(seen, expected_tracker);

        assert!(
            started.elapsed() < Duration::from_secs(5),
            "budget exceeded: {:?}",
            started.elapsed()
        );
    });
}

#[test]
fn criterion_06_tracker_first_answer_and_expiry() {
    criterion(6, "tracker first answer and expiry boundary", || {
        let share = ShareId([7; 20]);
        let request = |tag: u8| GetPeers {
            local_addr: SocketAddrV4::new(Ipv4Addr::new(192, 168, tag, 2), 3839),
            local_port: 3839,
            peer_id: PeerId([tag; 20]),
            share_id: WireShareId::Id20(share),
        };
        let observed = |tag: u8| SocketAddrV4::new(Ipv4Addr::new(198, 51, 100, tag), 40_000);

        let mut tracker = TrackerState::new(600);
        let (response, first) = tracker.handle_get_peers(share, &request(1), observed(1), 0, 0);
        assert!(first);
        assert_eq!(response.peers.len(), 1, "first answer lists the requester");
        assert_eq!(response.peers[0].peer_id, PeerId([1; 20]));
        assert_eq!(response.peers[0].addr, observed(1));

        // 1199 s after the announce the entry is still within the 2x1200 s
        // horizon; at 1201 s it is gone.
        let (response, _) =
            tracker.handle_get_peers(share, &request(2), observed(2), 1_199_000_000, 1199);
        assert_eq!(response.peers.len(), 2, "1199 s old entry is retained");

        let mut tracker = TrackerState::new(600);
        let _ = tracker.handle_get_peers(share, &request(1), observed(1), 0, 0);
        let (response, _) =
            tracker.handle_get_peers(share, &request(2), observed(2), 1_201_000_000, 1201);
        assert_eq!(response.peers.len(), 1, "1201 s old entry is dropped");
        assert_eq!(response.peers[0].peer_id, PeerId([2; 20]));
    });
}

#[test]
fn criterion_07_relay_state_machine() {
    criterion(7, "relay negotiation state machine (< 1 s)", || {
        let started = Instant::now();
        let nonce_for = |event: RelayEvent| match event {
            RelayEvent::PeerNonce => Some([0xaa; 16]),
            RelayEvent::RemoteNonce => Some([0xbb; 16]),
            _ => None,
        };
        let fresh = || RelaySession::new(PeerId([1; 20]), PeerId([2; 20]), ShareId([9; 20]));

        let mut session = fresh();
        for event in RelayEvent::SCRIPT {
            session.advance(event, nonce_for(event));
        }
        assert_eq!(session.state(), RelaySessionState::Bridged);
        assert!(session.nonce_a.is_some());
        assert!(session.nonce_b.is_some());

        for swap_at in 0..RelayEvent::SCRIPT.len() - 1 {
            let mut script = RelayEvent::SCRIPT;
            script.swap(swap_at, swap_at + 1);
            let mut session = fresh();
            for event in script {
                session.advance(event, nonce_for(event));
            }
            assert_eq!(
                session.state(),
                RelaySessionState::Failed,
                "transposition at step {swap_at} must fail"
            );
            assert!(session.violation.is_some());
        }
        assert!(
            started.elapsed() < Duration::from_secs(1),
            "budget exceeded: {:?}",
            started.elapsed()
        );
    });
}

#[test]
fn criterion_08_dht_lookup_matches_brute_force() {
    criterion(8, "dht lookup matches brute force on 50 networks", || {
        let mut rng = ChaCha8Rng::seed_from_u64(0xD47);
        let mut agreements = 0usize;
        for trial in 0..50u32 {
            let mut network = DhtNetwork::default();
            for n in 0..64u16 {
                let endpoint =
                    SocketAddrV4::new(Ipv4Addr::new(10, 2, (n >> 8) as u8, n as u8), 4000 + n);
                network.add_node(rng.random(), endpoint);
            }
            network.link_all();

            let target: [u8; 20] = rng.random();
            let value = StoredPeer {
                peer_id: PeerId(rng.random()),
                external: SocketAddrV4::new(Ipv4Addr::from(rng.random::<[u8; 4]>()), 40_000),
                local: SocketAddrV4::new(Ipv4Addr::new(192, 168, 1, 2), 3839),
            };
            network.publish(target, value.clone()).expect("publish routes");

            // Independent oracle: a full scan for the minimum XOR distance.
            let nearest = network
                .node_ids()
                .into_iter()
                .min_by_key(|id| dht_xor_distance(id, &target).unwrap())
                .unwrap();
            let expected = network.node(&nearest).unwrap().stored.get(&target).cloned();
            assert_eq!(
                expected.as_deref(),
                Some(&[value.clone()][..]),
                "trial {trial}: publish lands on the scan-nearest node"
            );

            let bootstrap = network.node_ids()[0];
            let found = dht_lookup(&network, &[bootstrap], &target, BUCKET_WIDTH)
                .unwrap_or_else(|e| panic!("trial {trial}: lookup failed: {e}"));
            assert_eq!(found, expected.unwrap(), "trial {trial}: value sets differ");
            agreements += 1;
        }
        assert_eq!(agreements, 50, "100% agreement required");
    });
}

#[test]
fn criterion_09_snapshot_monitoring_reconstruction() {
    criterion(9, "snapshot monitoring reconstruction", || {
        // Library-level counts first: two tracker snapshots a day apart.
        let scenario = scenario_for("reallocation");
        let share = scenario.shares[0].share_id;
        let mut world = SimWorld::build(scenario);
        world.run_until_sim_us(300 * 1_000_000);
        let (snap1, _) = enumerate_peers(&mut world, &share, &only(Source::Tracker), 30).unwrap();
        assert_eq!(snap1.peer_ids().len(), 21);
        world.advance_to(snap1.taken_at + 86_400 * 1_000_000);
        let (snap2, _) = enumerate_peers(&mut world, &share, &only(Source::Tracker), 30).unwrap();
        assert_eq!(snap2.peer_ids().len(), 20);

        let churn = diff_snapshots(&snap1, &snap2).unwrap();
        assert_eq!(churn.rendered_rate(), "4.8%", "exactly 4.8%, no tolerance");
        assert_eq!(churn.departed.len(), 1);
        assert_eq!(churn.joined.len(), 0);
        assert_eq!(churn.retained.len(), 20);

        let findings = detect_findings(&snap1, Some(&snap2));
        let nat = findings
            .iter()
            .filter(|f| f.kind == FindingKind::NatShared)
            .count();
        let realloc = findings
            .iter()
            .filter(|f| f.kind == FindingKind::IpReallocation)
            .count();
        assert_eq!(nat, 1, "exactly the planted NAT pair");
        assert_eq!(realloc, 1, "exactly one address reallocation");

        // The investigator-facing surface: same run through the CLI.
        let dir = tempfile::tempdir().expect("tempdir");
        let dir_str = dir.path().to_str().expect("utf-8 tempdir");
        let key = preset("reallocation").unwrap().shares[0]
            .key
            .clone()
            .expect("preset share carries its key");
        let (code, text) = run_cli(&[
            "syncprobe",
            "crawl",
            &key,
            "--scenario",
            "preset:reallocation",
            "--sources",
            "tracker",
            "--warmup-s",
            "300",
            "--interval-s",
            "86400",
            "--out",
            dir_str,
        ]);
        assert_eq!(code, 0, "crawl failed:\n{text}");
        assert!(text.contains("snapshot 1: 21 peers"), "stdout:\n{text}");
        assert!(text.contains("snapshot 2: 20 peers"), "stdout:\n{text}");
        assert!(
            text.contains("churn: 4.8% (departed 1, joined 0, retained 20)"),
            "stdout:\n{text}"
        );

        let files = dir_contents(dir.path());
        let report_json_name = files
            .keys()
            .find(|name| name.contains("-report-") && name.ends_with(".json"))
            .expect("report json written")
            .clone();
        let report: serde_json::Value =
            serde_json::from_slice(&files[&report_json_name]).expect("report parses");
        let findings = report["step5_analysis"]["findings"]
            .as_array()
            .expect("findings array");
        let kind_counts = |label: &str| {
            findings
                .iter()
                .filter(|f| f["kind"].as_str() == Some(label))
                .count()
        };
        assert_eq!(kind_counts("shared-external-ip"), 1);
        assert_eq!(kind_counts("external-ip-reallocation"), 1);
        assert_eq!(findings.len(), 2);
        let table = report["step5_analysis"]["peer_table"]
            .as_array()
            .expect("peer table");
        assert_eq!(table.len(), 20, "final snapshot table lists 20 peers");

        let report_txt_name = report_json_name.replace(".json", ".txt");
        let report_text = String::from_utf8(files[&report_txt_name].clone()).unwrap();
        for column in ["PeerID", "External IP:Port", "Local IP:Port"] {
            assert!(report_text.contains(column), "missing column {column}");
        }
    });
}

#[test]
fn criterion_10_content_recovery_verdicts() {
    criterion(10, "content recovery verdicts", || {
        let scenario = scenario_for("recovery");
        let share = scenario.shares[0].share_id;
        let mut world = SimWorld::build(scenario);
        world.run_until_sim_us(60 * 1_000_000);
        let (snapshot, _) =
            enumerate_peers(&mut world, &share, &only(Source::Tracker), 30).unwrap();
        assert_eq!(snapshot.peer_ids().len(), 4);
        let manifest = world.manifest_for(&share).expect("share has a manifest");
        let recovered = retrieve_content(&mut world, &manifest, &snapshot);
        let by_name: BTreeMap<&str, _> =
            recovered.iter().map(|f| (f.name.as_str(), f)).collect();

        let intact = by_name["intact.bin"];
        assert_eq!(intact.status, RecoveryStatus::CompleteVerified);
        assert!(intact.bytes.is_some());

        let gapped = by_name["gapped.bin"];
        assert_eq!(gapped.status, RecoveryStatus::Incomplete(vec![7]));
        assert!(gapped.bytes.is_none());

        let corrupted = by_name["corrupted.bin"];
        assert_eq!(corrupted.status, RecoveryStatus::DigestMismatch);
        assert!(
            corrupted.bytes.is_some(),
            "mismatching bytes stay inspectable"
        );
    });
}

#[test]
fn criterion_11_capture_to_dissection_adjunction() {
    criterion(11, "simulate-to-dissect share and session recovery", || {
        let scenario = scenario_for("baseline");
        let expected_ids: BTreeSet<String> = scenario
            .shares
            .iter()
            .map(|s| s.share_id.to_string())
            .collect();
        assert!(
            expected_ids.contains("bb63eb5b61969956e71273026f00a1deca464413"),
            "baseline plants the documented leak id"
        );
        // Ground truth for session count: relay-capable pairs with a common
        // share, straight from the plan.
        let mut expected_sessions = 0usize;
        for i in 0..scenario.peers.len() {
            for j in i + 1..scenario.peers.len() {
                let (a, b) = (&scenario.peers[i], &scenario.peers[j]);
                let common = a
                    .shares
                    .iter()
                    .any(|(s, _)| b.shares.iter().any(|(t, _)| t == s));
                if a.relay && b.relay && common {
                    expected_sessions += 1;
                }
            }
        }
        assert_eq!(expected_sessions, 1);

        let dir = tempfile::tempdir().expect("tempdir");
        let dir_str = dir.path().to_str().expect("utf-8 tempdir");
        let (code, text) = run_cli(&[
            "syncprobe",
            "simulate",
            "preset:baseline",
            "--out",
            dir_str,
        ]);
        assert_eq!(code, 0, "simulate failed:\n{text}");
        assert!(text.contains("relay session 0: bridged"), "stdout:\n{text}");

        let capture = dir.path().join("sim-baseline-414213562.capture.spb");
        let (code, text) = run_cli(&[
            "syncprobe",
            "dissect",
            capture.to_str().unwrap(),
            "--out",
            dir_str,
        ]);
        assert_eq!(code, 0, "dissect failed:\n{text}");
        assert!(text.contains("flows: 10, share ids: 2"), "stdout:\n{text}");

        let ids_file = dir
            .path()
            .join("dissect-sim-baseline-414213562.capture.share-ids.txt");
        let listing = std::fs::read_to_string(ids_file).expect("share id listing");
        let found: BTreeSet<String> = listing
            .lines()
            .filter_map(|line| line.split_whitespace().next())
            .map(str::to_owned)
            .collect();
        assert_eq!(found, expected_ids, "share-id sets must match exactly");

        let records = read_capture(&capture, CaptureFormat::RawFrames).expect("capture reads");
        let classified = classify_stream(records, &DissectorConfig::default());
        let init_count = classified
            .iter()
            .filter(|p| {
                matches!(
                    p.decoded,
                    Some(syncprobe_core::wire::SyncMessage::RelayInit(_))
                )
            })
            .count();
        assert_eq!(init_count, expected_sessions, "one init per session");
    });
}

#[test]
fn criterion_12_determinism_of_seeded_runs() {
    criterion(12, "byte-identical reruns under a fixed seed", || {
        let strip_paths = |text: &str| -> String {
            text.lines()
                .filter(|line| !line.starts_with("wrote "))
                .collect::<Vec<_>>()
                .join("\n")
        };

        let simulate = |dir: &Path| -> String {
            let (code, text) = run_cli(&[
                "syncprobe",
                "simulate",
                "preset:baseline",
                "--out",
                dir.to_str().unwrap(),
            ]);
            assert_eq!(code, 0, "simulate failed:\n{text}");
            text
        };
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let out_a = simulate(dir_a.path());
        let out_b = simulate(dir_b.path());
        assert_eq!(strip_paths(&out_a), strip_paths(&out_b));
        assert_eq!(
            dir_contents(dir_a.path()),
            dir_contents(dir_b.path()),
            "simulate artifacts must be byte-identical"
        );

        let key = preset("reallocation").unwrap().shares[0]
            .key
            .clone()
            .expect("preset share carries its key");
        let crawl = |dir: &Path| -> String {
            let (code, text) = run_cli(&[
                "syncprobe",
                "crawl",
                &key,
                "--scenario",
                "preset:reallocation",
                "--sources",
                "tracker",
                "--warmup-s",
                "300",
                "--interval-s",
                "86400",
                "--out",
                dir.to_str().unwrap(),
            ]);
            assert_eq!(code, 0, "crawl failed:\n{text}");
            text
        };
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let out_a = crawl(dir_a.path());
        let out_b = crawl(dir_b.path());
        assert_eq!(strip_paths(&out_a), strip_paths(&out_b));
        assert_eq!(
            dir_contents(dir_a.path()),
            dir_contents(dir_b.path()),
            "crawl artifacts must be byte-identical"
        );
    });
}

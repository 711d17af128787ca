//! Deterministic discrete-event simulation of a small sync swarm.
//!
//! One [`SimWorld`] holds a tracker, a relay, a multicast LAN segment per
//! named segment, the peers of a [`scenario::Scenario`], and optionally an
//! investigator endpoint. Every datagram any actor sends is recorded as a
//! capture record and a trace line at send time, so a finished run can be
//! written out and re-dissected like a real packet capture. All scheduling
//! is integer-microsecond and all randomness comes from one seeded stream:
//! two runs of the same scenario produce byte-identical artifacts.

pub mod dht;
pub mod relay;
pub mod scenario;
pub mod tracker;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::net::SocketAddrV4;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::crawler::{
    ChunkError, CrawlTransport, FileManifest, Manifest, PeerRecord, Source, SourceError,
};
use crate::dissector::CaptureRecord;
use crate::keys::{digest20, share32_from, PeerId, ShareId};
use crate::wire::{
    classify_frame, decode_get_peers, decode_peers_response, decode_ping, encode_get_peers_framed,
    encode_peers_response_framed, encode_ping, encode_relay_message, Classification, Dialect,
    GetPeers, PeerEntry, PeersResponse, Ping, RelayInit, RelayMessage, RelayNonce, Transport,
    UtpHeader, UtpPacketType, WireShareId,
};
use dht::{DhtNetwork, StoredPeer};
use relay::{RelayEvent, RelaySession};
use scenario::{EventKind, Scenario};
use tracker::TrackerState;

/// Unix time of simulated instant zero.
pub const SIM_EPOCH_UNIX_S: u64 = 1_400_000_000;
/// One-way delivery delay for every datagram.
pub const HOP_LATENCY_US: u64 = 1_000;
/// Most records one peer-exchange query returns.
pub const PEX_CAP: usize = 50;

/// Delay between a relay pair's later join and the first negotiation step.
const RELAY_START_DELAY_US: u64 = 5_000_000;
/// Delay between consecutive relay negotiation steps.
const RELAY_STEP_GAP_US: u64 = 1_000_000;
/// How long one discovery query keeps listening for answers.
const QUERY_WINDOW_US: u64 = 2_000_000;

// --- Event queue ---

#[derive(Debug, Clone)]
enum Event {
    /// A datagram arriving at its destination.
    Datagram {
        src: SocketAddrV4,
        dst: SocketAddrV4,
        transport: Transport,
        payload: Vec<u8>,
    },
    /// A peer comes online.
    Join { peer: usize },
    /// A peer's periodic tracker announce and predefined-host poll.
    AnnounceDue { peer: usize },
    /// A peer's periodic LAN discovery ping.
    LpdDue { peer: usize },
    /// One step of a relay negotiation script.
    RelayStep { session: usize, step: usize },
    /// A scripted scenario change (leave, address reassignment).
    Scripted { index: usize },
}

struct QueuedEvent {
    at: u64,
    seq: u64,
    event: Event,
}

impl PartialEq for QueuedEvent {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}

impl Eq for QueuedEvent {}

impl PartialOrd for QueuedEvent {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QueuedEvent {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.at, self.seq).cmp(&(other.at, other.seq))
    }
}

// --- Actors ---

struct SimPeer {
    name: String,
    peer_id: PeerId,
    external: SocketAddrV4,
    local: SocketAddrV4,
    segment: String,
    dialect: Dialect,
    tracker: bool,
    lpd: bool,
    predefined: Vec<SocketAddrV4>,
    access_denied: bool,
    online: bool,
    seq_nr: u16,
    /// Share index -> peers learned for that share, deduplicated by id.
    known: BTreeMap<usize, Vec<PeerEntry>>,
    /// (file digest, chunk index) -> chunk bytes.
    chunk_store: BTreeMap<([u8; 20], u32), Vec<u8>>,
    /// Share indexes this peer is a member of.
    shares: Vec<usize>,
}

impl SimPeer {
    fn learn(&mut self, share: usize, entry: PeerEntry) {
        if entry.peer_id == self.peer_id {
            return;
        }
        let entries = self.known.entry(share).or_default();
        match entries.iter_mut().find(|e| e.peer_id == entry.peer_id) {
            Some(existing) => *existing = entry,
            None => {
                entries.push(entry);
                entries.sort_by_key(|e| e.peer_id);
            }
        }
    }
}

struct Investigator {
    peer_id: PeerId,
    external: SocketAddrV4,
    local: SocketAddrV4,
    segment: String,
    predefined: Vec<SocketAddrV4>,
    seq_nr: u16,
    /// Set while a discovery query is in flight; answers for other shares
    /// or outside any query window are dropped.
    listening: Option<(Source, ShareId)>,
    inbox: Vec<PeerRecord>,
}

struct RelayPlan {
    peer_a: usize,
    peer_b: usize,
    share: ShareId,
    nonce_a: [u8; 16],
    nonce_b: [u8; 16],
}

// --- World ---

/// The running simulation.
pub struct SimWorld {
    scenario: Scenario,
    now_us: u64,
    seq: u64,
    queue: BinaryHeap<Reverse<QueuedEvent>>,
    peers: Vec<SimPeer>,
    investigator: Option<Investigator>,
    tracker_state: TrackerState,
    tracker_seq: u16,
    relay_plans: Vec<RelayPlan>,
    relay_sessions: Vec<RelaySession>,
    dht: DhtNetwork,
    share_ids: Vec<ShareId>,
    manifests: BTreeMap<ShareId, Manifest>,
    capture: Vec<CaptureRecord>,
    trace: Vec<String>,
}

impl SimWorld {
    pub fn build(scenario: Scenario) -> SimWorld {
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        let share_ids: Vec<ShareId> = scenario.shares.iter().map(|s| s.share_id).collect();

        // Deterministic per-file content, manifests, and chunk digests.
        let mut manifests: BTreeMap<ShareId, Manifest> = BTreeMap::new();
        let mut file_data: BTreeMap<(usize, usize), ([u8; 20], Vec<u8>)> = BTreeMap::new();
        for (si, share) in scenario.shares.iter().enumerate() {
            if share.files.is_empty() {
                continue;
            }
            let mut files = Vec::new();
            for (fi, file) in share.files.iter().enumerate() {
                let content =
                    scenario::file_content(scenario.seed, &share.name, &file.name, file.size);
                let digest = digest20(&[&content]);
                files.push(FileManifest {
                    name: file.name.clone(),
                    size: file.size,
                    chunk_size: scenario.network.chunk_size,
                    chunk_count: file.chunk_count,
                    digest,
                });
                file_data.insert((si, fi), (digest, content));
            }
            manifests.insert(share.share_id, Manifest { files });
        }

        let mut peers: Vec<SimPeer> = Vec::new();
        for plan in &scenario.peers {
            let peer_id = PeerId(digest20(&[
                b"peer-id",
                &scenario.seed.to_be_bytes(),
                plan.name.as_bytes(),
            ]));
            let mut chunk_store: BTreeMap<([u8; 20], u32), Vec<u8>> = BTreeMap::new();
            let chunk_size = scenario.network.chunk_size as usize;
            for holding in &plan.chunks {
                let (digest, content) = &file_data[&(holding.share, holding.file)];
                for &index in &holding.indexes {
                    let start = index as usize * chunk_size;
                    let end = (start + chunk_size).min(content.len());
                    chunk_store.insert((*digest, index), content[start..end].to_vec());
                }
            }
            for &(share, file, index) in &plan.corrupt {
                let (digest, _) = &file_data[&(share, file)];
                let chunk = chunk_store
                    .get_mut(&(*digest, index))
                    .expect("corruptions target held chunks");
                chunk[0] ^= 0xff;
            }
            peers.push(SimPeer {
                name: plan.name.clone(),
                peer_id,
                external: plan.external,
                local: plan.local,
                segment: plan.segment.clone(),
                dialect: plan.dialect,
                tracker: plan.tracker,
                lpd: plan.lpd,
                predefined: plan.predefined.clone(),
                access_denied: plan.access_denied,
                online: false,
                seq_nr: 1,
                known: BTreeMap::new(),
                chunk_store,
                shares: plan.shares.iter().map(|(si, _)| *si).collect(),
            });
        }

        let investigator = scenario.investigator.as_ref().map(|plan| Investigator {
            peer_id: PeerId(digest20(&[
                b"peer-id",
                &scenario.seed.to_be_bytes(),
                b"investigator",
            ])),
            external: plan.external,
            local: plan.local,
            segment: plan.segment.clone(),
            predefined: plan.predefined.clone(),
            seq_nr: 1,
            listening: None,
            inbox: Vec::new(),
        });

        // Distributed hash table over the participating peers, fully linked.
        let mut dht = DhtNetwork::default();
        for (i, plan) in scenario.peers.iter().enumerate() {
            if plan.dht {
                dht.add_node(peers[i].peer_id.0, plan.external);
            }
        }
        dht.link_all();
        for (i, plan) in scenario.peers.iter().enumerate() {
            if !plan.dht {
                continue;
            }
            for &(si, _) in &plan.shares {
                dht.publish(
                    share_ids[si].0,
                    StoredPeer {
                        peer_id: peers[i].peer_id,
                        external: plan.external,
                        local: plan.local,
                    },
                )
                .expect("network has nodes when publishing");
            }
        }

        // Relay negotiation between each pair of relay-enabled members of a
        // common share, starting shortly after the later join. Nonces are
        // drawn here so the schedule cannot disturb the random stream.
        let mut relay_plans = Vec::new();
        let mut relay_sessions = Vec::new();
        let mut relay_schedule = Vec::new();
        for i in 0..scenario.peers.len() {
            for j in (i + 1)..scenario.peers.len() {
                let (a, b) = (&scenario.peers[i], &scenario.peers[j]);
                if !a.relay || !b.relay {
                    continue;
                }
                let common = a
                    .shares
                    .iter()
                    .map(|(si, _)| *si)
                    .find(|si| b.shares.iter().any(|(bs, _)| bs == si));
                let Some(share_index) = common else {
                    continue;
                };
                let start_us =
                    a.join_at_s.max(b.join_at_s) * 1_000_000 + RELAY_START_DELAY_US;
                relay_plans.push(RelayPlan {
                    peer_a: i,
                    peer_b: j,
                    share: share_ids[share_index],
                    nonce_a: rng.random(),
                    nonce_b: rng.random(),
                });
                relay_sessions.push(RelaySession::new(
                    peers[i].peer_id,
                    peers[j].peer_id,
                    share_ids[share_index],
                ));
                relay_schedule.push(start_us);
            }
        }

        let mut world = SimWorld {
            tracker_state: TrackerState::new(scenario.network.announce_interval_s),
            scenario,
            now_us: 0,
            seq: 0,
            queue: BinaryHeap::new(),
            peers,
            investigator,
            tracker_seq: 1,
            relay_plans,
            relay_sessions,
            dht,
            share_ids,
            manifests,
            capture: Vec::new(),
            trace: Vec::new(),
        };

        let joins: Vec<(u64, bool, bool)> = world
            .scenario
            .peers
            .iter()
            .map(|p| {
                (
                    p.join_at_s * 1_000_000,
                    p.tracker || !p.predefined.is_empty(),
                    p.lpd,
                )
            })
            .collect();
        for (i, (at, announces, lpd)) in joins.into_iter().enumerate() {
            world.schedule(at, Event::Join { peer: i });
            if announces {
                world.schedule(at, Event::AnnounceDue { peer: i });
            }
            if lpd {
                world.schedule(at, Event::LpdDue { peer: i });
            }
        }
        for (session, start) in relay_schedule.into_iter().enumerate() {
            for step in 0..RelayEvent::SCRIPT.len() {
                world.schedule(
                    start + step as u64 * RELAY_STEP_GAP_US,
                    Event::RelayStep { session, step },
                );
            }
        }
        for index in 0..world.scenario.events.len() {
            let at = world.scenario.events[index].at_s * 1_000_000;
            world.schedule(at, Event::Scripted { index });
        }
        world
    }

    // --- Accessors ---

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn capture(&self) -> &[CaptureRecord] {
        &self.capture
    }

    pub fn trace_lines(&self) -> &[String] {
        &self.trace
    }

    pub fn relay_sessions(&self) -> &[RelaySession] {
        &self.relay_sessions
    }

    pub fn sim_now_us(&self) -> u64 {
        self.now_us
    }

    pub fn investigator_peer_id(&self) -> Option<PeerId> {
        self.investigator.as_ref().map(|inv| inv.peer_id)
    }

    // --- Clock ---

    /// Runs every event due up to and including `t_us` (simulated
    /// microseconds since instant zero), then parks the clock there.
    pub fn run_until_sim_us(&mut self, t_us: u64) {
        while let Some(Reverse(head)) = self.queue.peek() {
            if head.at > t_us {
                break;
            }
            let Reverse(next) = self.queue.pop().expect("peeked");
            self.now_us = next.at;
            self.dispatch(next.event);
        }
        if t_us > self.now_us {
            self.now_us = t_us;
        }
    }

    /// Runs the scenario to its configured end.
    pub fn run_to_end(&mut self) {
        self.run_until_sim_us(self.scenario.duration_s * 1_000_000);
    }

    fn unix_now_us(&self) -> u64 {
        SIM_EPOCH_UNIX_S * 1_000_000 + self.now_us
    }

    fn unix_now_s(&self) -> i64 {
        (SIM_EPOCH_UNIX_S + self.now_us / 1_000_000) as i64
    }

    fn schedule(&mut self, at: u64, event: Event) {
        let seq = self.seq;
        self.seq += 1;
        self.queue.push(Reverse(QueuedEvent { at, seq, event }));
    }

    fn stamp(&self) -> String {
        format!("{}.{:06}", self.now_us / 1_000_000, self.now_us % 1_000_000)
    }

    fn note(&mut self, actor: &str, text: &str) {
        self.trace
            .push(format!("{} | {} | note | - | {}", self.stamp(), actor, text));
    }

    /// Records a datagram in the capture and trace, then schedules its
    /// delivery one hop later.
    fn send(
        &mut self,
        actor: &str,
        src: SocketAddrV4,
        dst: SocketAddrV4,
        transport: Transport,
        payload: Vec<u8>,
    ) {
        let label = classify_frame(&payload, transport).label();
        self.trace.push(format!(
            "{} | {} | send | {} | {} {} -> {}, {} bytes",
            self.stamp(),
            actor,
            label,
            transport.label(),
            src,
            dst,
            payload.len()
        ));
        self.capture.push(CaptureRecord {
            timestamp_us: self.unix_now_us(),
            src,
            dst,
            transport,
            payload: payload.clone(),
        });
        self.schedule(
            self.now_us + HOP_LATENCY_US,
            Event::Datagram {
                src,
                dst,
                transport,
                payload,
            },
        );
    }

    fn data_header(seq_nr: u16, conn_peer: PeerId, now_us: u64) -> UtpHeader {
        let mut header = UtpHeader::new(UtpPacketType::Data);
        header.connection_id = u16::from_be_bytes([conn_peer.0[0], conn_peer.0[1]]);
        header.timestamp_us = now_us as u32;
        header.window_size = 0x0010_0000;
        header.seq_nr = seq_nr;
        header
    }

    fn share_index_of(&self, id: &ShareId) -> Option<usize> {
        self.share_ids.iter().position(|s| s == id)
    }

    // --- Dispatch ---

    fn dispatch(&mut self, event: Event) {
        match event {
            Event::Datagram {
                src,
                dst,
                transport,
                payload,
            } => self.deliver(src, dst, transport, &payload),
            Event::Join { peer } => {
                self.peers[peer].online = true;
                let name = self.peers[peer].name.clone();
                self.note(&name, "joined the network");
            }
            Event::AnnounceDue { peer } => self.on_announce_due(peer),
            Event::LpdDue { peer } => self.on_lpd_due(peer),
            Event::RelayStep { session, step } => self.on_relay_step(session, step),
            Event::Scripted { index } => self.on_scripted(index),
        }
    }

    fn deliver(&mut self, src: SocketAddrV4, dst: SocketAddrV4, transport: Transport, payload: &[u8]) {
        if dst == self.scenario.network.tracker {
            self.handle_tracker(src, payload);
            return;
        }
        if dst == self.scenario.network.relay {
            // Inbound relay frames advance sessions via the scripted steps.
            return;
        }
        if dst == self.scenario.network.lpd_group {
            self.deliver_multicast(src, payload);
            return;
        }
        if let Some(inv) = &self.investigator {
            if dst == inv.external || dst == inv.local {
                self.handle_investigator(src, transport, payload);
                return;
            }
        }
        if let Some(i) = self
            .peers
            .iter()
            .position(|p| dst == p.external || dst == p.local)
        {
            if self.peers[i].online {
                self.handle_peer(i, src, transport, payload);
            }
        }
    }

    // --- Periodic peer behaviour ---

    fn on_announce_due(&mut self, i: usize) {
        if !self.peers[i].online {
            return;
        }
        self.announce(i);
        let interval = self.scenario.network.announce_interval_s * 1_000_000;
        self.schedule(self.now_us + interval, Event::AnnounceDue { peer: i });
    }

    /// One round of tracker announces and predefined-host polls, one
    /// lookup request per held share.
    fn announce(&mut self, i: usize) {
        let (name, external, local, peer_id, dialect, use_tracker, predefined, shares) = {
            let p = &self.peers[i];
            (
                p.name.clone(),
                p.external,
                p.local,
                p.peer_id,
                p.dialect,
                p.tracker,
                p.predefined.clone(),
                p.shares.clone(),
            )
        };
        let tracker_addr = self.scenario.network.tracker;
        for si in shares {
            let share_id = self.share_ids[si];
            let wire_id = match dialect {
                Dialect::V14 => WireShareId::Id20(share_id),
                Dialect::V20 => {
                    WireShareId::Id32(share32_from(&share_id, *local.ip(), local.port()))
                }
            };
            let msg = GetPeers {
                local_addr: local,
                local_port: local.port(),
                peer_id,
                share_id: wire_id,
            };
            let seq = self.peers[i].seq_nr;
            self.peers[i].seq_nr = seq.wrapping_add(1);
            let header = SimWorld::data_header(seq, peer_id, self.now_us);
            let bytes = encode_get_peers_framed(&header, &msg, dialect)
                .expect("share width matches dialect");
            if use_tracker {
                self.send(&name, external, tracker_addr, Transport::Udp, bytes.clone());
            }
            for host in &predefined {
                self.send(&name, external, *host, Transport::Udp, bytes.clone());
            }
        }
    }

    fn on_lpd_due(&mut self, i: usize) {
        if !self.peers[i].online {
            return;
        }
        let (name, local, peer_id, shares) = {
            let p = &self.peers[i];
            (p.name.clone(), p.local, p.peer_id, p.shares.clone())
        };
        let group = self.scenario.network.lpd_group;
        for si in shares {
            let wide = share32_from(&self.share_ids[si], *local.ip(), local.port());
            let msg = Ping {
                peer_id,
                port: local.port(),
                share_id: WireShareId::Id32(wide),
            };
            let bytes = encode_ping(&msg, 32).expect("32-byte ping encodes");
            self.send(&name, local, group, Transport::Udp, bytes);
        }
        let interval = self.scenario.network.lpd_interval_s * 1_000_000;
        self.schedule(self.now_us + interval, Event::LpdDue { peer: i });
    }

    fn on_relay_step(&mut self, session: usize, step: usize) {
        let (a, b) = (
            self.relay_plans[session].peer_a,
            self.relay_plans[session].peer_b,
        );
        if !self.peers[a].online || !self.peers[b].online {
            self.note("relay", &format!("session {session} step {step} skipped, peer offline"));
            return;
        }
        let relay_addr = self.scenario.network.relay;
        let plan = &self.relay_plans[session];
        let event = RelayEvent::SCRIPT[step];
        let payload = match step {
            0 => encode_relay_message(&RelayMessage::Init(RelayInit {
                remote_peer_id: self.peers[b].peer_id,
                local_peer_id: self.peers[a].peer_id,
            })),
            2 => encode_relay_message(&RelayMessage::Nonce(RelayNonce {
                nonce: plan.nonce_a,
                share_id: plan.share,
            })),
            4 => encode_relay_message(&RelayMessage::Nonce(RelayNonce {
                nonce: plan.nonce_b,
                share_id: plan.share,
            })),
            _ => opaque_relay_frame(step as u8),
        };
        let nonce = match step {
            2 => Some(plan.nonce_a),
            4 => Some(plan.nonce_b),
            _ => None,
        };
        // Steps 0, 2, and 7 originate at the caller, step 4 at the callee,
        // and the rest at the relay, fanning back out to both ends.
        let (actor, src, dst) = match step {
            0 | 2 | 7 => (self.peers[a].name.clone(), self.peers[a].external, relay_addr),
            4 => (self.peers[b].name.clone(), self.peers[b].external, relay_addr),
            1 | 5 => ("relay".to_string(), relay_addr, self.peers[a].external),
            _ => ("relay".to_string(), relay_addr, self.peers[b].external),
        };
        let state = self.relay_sessions[session].advance(event, nonce);
        self.send(&actor, src, dst, Transport::Tcp, payload);
        self.note(
            "relay",
            &format!("session {} {} -> state {}", session, event, state.label()),
        );
    }

    fn on_scripted(&mut self, index: usize) {
        let event = self.scenario.events[index].clone();
        let name = self.peers[event.peer].name.clone();
        match event.kind {
            EventKind::Leave => {
                self.peers[event.peer].online = false;
                self.note(&name, "left the network");
            }
            EventKind::ReassignExternalIp(new_external) => {
                let old = self.peers[event.peer].external;
                self.peers[event.peer].external = new_external;
                self.note(
                    &name,
                    &format!("external address reassigned {old} -> {new_external}"),
                );
                if self.peers[event.peer].online {
                    // Re-announce immediately so the tracker sees the move.
                    self.announce(event.peer);
                }
            }
        }
    }

    // --- Infrastructure handlers ---

    fn handle_tracker(&mut self, src: SocketAddrV4, payload: &[u8]) {
        let Ok(msg) = decode_get_peers(payload) else {
            self.note("tracker", &format!("undecodable frame from {src} dropped"));
            return;
        };
        let Some(share) = self.tracker_state.resolve_share(&msg, &self.share_ids) else {
            self.note(
                "tracker",
                &format!("wide share id from {src} matched nothing; no response"),
            );
            return;
        };
        let (response, first) =
            self.tracker_state
                .handle_get_peers(share, &msg, src, self.now_us, self.unix_now_s());
        let seq = self.tracker_seq;
        self.tracker_seq = seq.wrapping_add(1);
        let header = SimWorld::data_header(seq, msg.peer_id, self.now_us);
        let bytes = encode_peers_response_framed(&header, &response);
        let tracker_addr = self.scenario.network.tracker;
        self.send("tracker", tracker_addr, src, Transport::Udp, bytes.clone());
        if first {
            // The first answer to each (peer, share) is replayed over TCP.
            self.send("tracker", tracker_addr, src, Transport::Tcp, bytes);
        }
    }

    fn deliver_multicast(&mut self, src: SocketAddrV4, payload: &[u8]) {
        let Ok(ping) = decode_ping(payload) else {
            return;
        };
        let WireShareId::Id32(wide) = ping.share_id else {
            return;
        };
        let segment = self
            .peers
            .iter()
            .find(|p| p.local == src)
            .map(|p| p.segment.clone())
            .or_else(|| {
                self.investigator
                    .as_ref()
                    .filter(|inv| inv.local == src)
                    .map(|inv| inv.segment.clone())
            });
        let Some(segment) = segment else {
            return;
        };
        // Which listeners hold a share whose announced form matches?
        let mut responders: Vec<(usize, usize)> = Vec::new();
        for (j, p) in self.peers.iter().enumerate() {
            if !p.online || !p.lpd || p.segment != segment || p.local == src {
                continue;
            }
            let matched = p.shares.iter().copied().find(|&si| {
                share32_from(&self.share_ids[si], *src.ip(), ping.port) == wide
            });
            if let Some(si) = matched {
                responders.push((j, si));
            }
        }
        for (j, si) in responders {
            let sender = PeerEntry {
                addr: SocketAddrV4::new(*src.ip(), ping.port),
                local_addr: SocketAddrV4::new(*src.ip(), ping.port),
                peer_id: ping.peer_id,
            };
            self.peers[j].learn(si, sender);
            let (name, local, peer_id) = {
                let p = &self.peers[j];
                (p.name.clone(), p.local, p.peer_id)
            };
            let reply = Ping {
                peer_id,
                port: local.port(),
                share_id: WireShareId::Id20(self.share_ids[si]),
            };
            let bytes = encode_ping(&reply, 20).expect("20-byte ping encodes");
            let dst = SocketAddrV4::new(*src.ip(), ping.port);
            self.send(&name, local, dst, Transport::Tcp, bytes);
        }
        // A listening investigator can observe the multicast itself.
        let unix_now = self.unix_now_us();
        if let Some(inv) = &mut self.investigator {
            if let Some((Source::Lpd, target)) = inv.listening {
                if inv.segment == segment
                    && ping.peer_id != inv.peer_id
                    && share32_from(&target, *src.ip(), ping.port) == wide
                {
                    let addr = SocketAddrV4::new(*src.ip(), ping.port);
                    inv.inbox.push(PeerRecord {
                        peer_id: ping.peer_id,
                        external: addr,
                        local: addr,
                        source: Source::Lpd,
                        observed_at: unix_now,
                    });
                }
            }
        }
    }

    // --- Peer handler ---

    fn handle_peer(&mut self, i: usize, src: SocketAddrV4, transport: Transport, payload: &[u8]) {
        match classify_frame(payload, transport) {
            Classification::GetPeers => {
                let Ok(msg) = decode_get_peers(payload) else {
                    return;
                };
                let WireShareId::Id20(id) = msg.share_id else {
                    return;
                };
                let Some(si) = self.share_index_of(&id) else {
                    return;
                };
                if !self.peers[i].shares.contains(&si) {
                    return;
                }
                self.peers[i].learn(
                    si,
                    PeerEntry {
                        addr: src,
                        local_addr: msg.local_addr,
                        peer_id: msg.peer_id,
                    },
                );
                let (name, external, local, peer_id) = {
                    let p = &self.peers[i];
                    (p.name.clone(), p.external, p.local, p.peer_id)
                };
                let mut entries = vec![PeerEntry {
                    addr: external,
                    local_addr: local,
                    peer_id,
                }];
                entries.extend(self.peers[i].known.get(&si).into_iter().flatten().copied());
                entries.sort_by_key(|e| (e.peer_id, e.addr));
                entries.dedup_by_key(|e| e.peer_id);
                let response = PeersResponse {
                    external_addr: src,
                    peers: entries,
                    share_id: id,
                    time: self.unix_now_s(),
                };
                let seq = self.peers[i].seq_nr;
                self.peers[i].seq_nr = seq.wrapping_add(1);
                let header = SimWorld::data_header(seq, peer_id, self.now_us);
                let bytes = encode_peers_response_framed(&header, &response);
                self.send(&name, external, src, Transport::Udp, bytes);
            }
            Classification::PeersResponse => {
                let Ok(response) = decode_peers_response(payload) else {
                    return;
                };
                let Some(si) = self.share_index_of(&response.share_id) else {
                    return;
                };
                if !self.peers[i].shares.contains(&si) {
                    return;
                }
                for entry in response.peers {
                    self.peers[i].learn(si, entry);
                }
            }
            Classification::Ping => {
                // Unicast reply to an earlier multicast ping.
                let Ok(ping) = decode_ping(payload) else {
                    return;
                };
                let WireShareId::Id20(id) = ping.share_id else {
                    return;
                };
                let Some(si) = self.share_index_of(&id) else {
                    return;
                };
                if !self.peers[i].shares.contains(&si) {
                    return;
                }
                let addr = SocketAddrV4::new(*src.ip(), ping.port);
                self.peers[i].learn(
                    si,
                    PeerEntry {
                        addr,
                        local_addr: addr,
                        peer_id: ping.peer_id,
                    },
                );
            }
            _ => {}
        }
    }

    // --- Investigator handler ---

    fn handle_investigator(&mut self, src: SocketAddrV4, transport: Transport, payload: &[u8]) {
        let unix_now = self.unix_now_us();
        let classification = classify_frame(payload, transport);
        let Some(inv) = &mut self.investigator else {
            return;
        };
        let Some((source, target)) = inv.listening else {
            return;
        };
        match classification {
            Classification::PeersResponse
                if source == Source::Tracker || source == Source::Predefined =>
            {
                let Ok(response) = decode_peers_response(payload) else {
                    return;
                };
                if response.share_id != target {
                    return;
                }
                for entry in response.peers {
                    if entry.peer_id == inv.peer_id {
                        continue;
                    }
                    inv.inbox.push(PeerRecord {
                        peer_id: entry.peer_id,
                        external: entry.addr,
                        local: entry.local_addr,
                        source,
                        observed_at: unix_now,
                    });
                }
            }
            Classification::Ping if source == Source::Lpd => {
                let Ok(ping) = decode_ping(payload) else {
                    return;
                };
                if ping.share_id != WireShareId::Id20(target) || ping.peer_id == inv.peer_id {
                    return;
                }
                let addr = SocketAddrV4::new(*src.ip(), ping.port);
                inv.inbox.push(PeerRecord {
                    peer_id: ping.peer_id,
                    external: addr,
                    local: addr,
                    source: Source::Lpd,
                    observed_at: unix_now,
                });
            }
            _ => {}
        }
    }

    // --- Investigator actions ---

    fn investigator_get_peers(&mut self, share: ShareId, dst: SocketAddrV4) {
        let Some(inv) = &mut self.investigator else {
            return;
        };
        let msg = GetPeers {
            local_addr: inv.local,
            local_port: inv.local.port(),
            peer_id: inv.peer_id,
            share_id: WireShareId::Id20(share),
        };
        let seq = inv.seq_nr;
        inv.seq_nr = seq.wrapping_add(1);
        let external = inv.external;
        let peer_id = inv.peer_id;
        let header = SimWorld::data_header(seq, peer_id, self.now_us);
        let bytes =
            encode_get_peers_framed(&header, &msg, Dialect::V14).expect("20-byte id encodes");
        self.send("investigator", external, dst, Transport::Udp, bytes);
    }

    fn investigator_lpd_ping(&mut self, share: ShareId) {
        let Some(inv) = &mut self.investigator else {
            return;
        };
        let local = inv.local;
        let peer_id = inv.peer_id;
        let wide = share32_from(&share, *local.ip(), local.port());
        let msg = Ping {
            peer_id,
            port: local.port(),
            share_id: WireShareId::Id32(wide),
        };
        let bytes = encode_ping(&msg, 32).expect("32-byte ping encodes");
        let group = self.scenario.network.lpd_group;
        self.send("investigator", local, group, Transport::Udp, bytes);
    }

    /// Waits out a query window, bounded by the caller's deadline.
    fn wait_for_answers(&mut self, deadline_unix_us: u64) {
        let deadline_sim = deadline_unix_us.saturating_sub(SIM_EPOCH_UNIX_S * 1_000_000);
        let window_end = (self.now_us + QUERY_WINDOW_US).min(deadline_sim.max(self.now_us));
        self.run_until_sim_us(window_end);
    }

    fn take_inbox(&mut self) -> Vec<PeerRecord> {
        match &mut self.investigator {
            Some(inv) => {
                inv.listening = None;
                std::mem::take(&mut inv.inbox)
            }
            None => Vec::new(),
        }
    }
}

/// An opaque relay negotiation frame: correct framing and magic, but a
/// payload the dissector has no decoder for.
fn opaque_relay_frame(step: u8) -> Vec<u8> {
    let mut inner = vec![0u8; 4];
    inner.extend_from_slice(b"BSYNC");
    inner.extend_from_slice(&[0x00, 0x02, step]);
    inner.extend_from_slice(&[0u8; 21]);
    let mut out = (inner.len() as u16).to_be_bytes().to_vec();
    out.extend_from_slice(&inner);
    out
}

// --- Crawl transport ---

impl CrawlTransport for SimWorld {
    fn now_unix_micros(&self) -> u64 {
        self.unix_now_us()
    }

    fn advance_to(&mut self, unix_micros: u64) {
        let sim = unix_micros.saturating_sub(SIM_EPOCH_UNIX_S * 1_000_000);
        self.run_until_sim_us(sim);
    }

    fn query_source(
        &mut self,
        source: Source,
        share: &ShareId,
        known: &[PeerRecord],
        deadline_us: u64,
    ) -> Result<Vec<PeerRecord>, SourceError> {
        let fail = |reason: String| SourceError {
            source,
            reason,
        };
        if self.investigator.is_none() {
            return Err(fail("scenario has no investigator endpoint".to_string()));
        }
        match source {
            Source::Tracker => {
                let inv = self.investigator.as_mut().expect("checked above");
                inv.inbox.clear();
                inv.listening = Some((source, *share));
                let tracker_addr = self.scenario.network.tracker;
                self.investigator_get_peers(*share, tracker_addr);
                self.wait_for_answers(deadline_us);
                Ok(self.take_inbox())
            }
            Source::Lpd => {
                let inv = self.investigator.as_mut().expect("checked above");
                inv.inbox.clear();
                inv.listening = Some((source, *share));
                self.investigator_lpd_ping(*share);
                self.wait_for_answers(deadline_us);
                Ok(self.take_inbox())
            }
            Source::Predefined => {
                let inv = self.investigator.as_mut().expect("checked above");
                inv.inbox.clear();
                inv.listening = Some((source, *share));
                let hosts = inv.predefined.clone();
                if hosts.is_empty() {
                    self.take_inbox();
                    return Err(fail("no predefined hosts configured".to_string()));
                }
                for host in hosts {
                    self.investigator_get_peers(*share, host);
                }
                self.wait_for_answers(deadline_us);
                Ok(self.take_inbox())
            }
            Source::Dht => {
                if self.dht.is_empty() {
                    return Err(fail("no reachable nodes".to_string()));
                }
                let bootstrap = [self.dht.node_ids()[0]];
                let own_id = self.investigator.as_ref().expect("checked above").peer_id;
                let stored = dht::dht_lookup(&self.dht, &bootstrap, &share.0, dht::BUCKET_WIDTH)
                    .map_err(|e| fail(e.to_string()))?;
                let now = self.unix_now_us();
                Ok(stored
                    .into_iter()
                    .filter(|p| p.peer_id != own_id)
                    .map(|p| PeerRecord {
                        peer_id: p.peer_id,
                        external: p.external,
                        local: p.local,
                        source,
                        observed_at: now,
                    })
                    .collect())
            }
            Source::Pex => {
                let own_id = self.investigator.as_ref().expect("checked above").peer_id;
                let si = self
                    .share_index_of(share)
                    .ok_or_else(|| fail("share unknown to this network".to_string()))?;
                let now = self.unix_now_us();
                let mut asked: BTreeSet<PeerId> = BTreeSet::new();
                let mut emitted: BTreeSet<(PeerId, SocketAddrV4)> = BTreeSet::new();
                let mut out: Vec<PeerRecord> = Vec::new();
                'peers: for record in known {
                    if !asked.insert(record.peer_id) {
                        continue;
                    }
                    let Some(peer) = self
                        .peers
                        .iter()
                        .find(|p| p.peer_id == record.peer_id && p.online)
                    else {
                        continue;
                    };
                    for entry in peer.known.get(&si).into_iter().flatten() {
                        if entry.peer_id == own_id || !emitted.insert((entry.peer_id, entry.addr))
                        {
                            continue;
                        }
                        out.push(PeerRecord {
                            peer_id: entry.peer_id,
                            external: entry.addr,
                            local: entry.local_addr,
                            source,
                            observed_at: now,
                        });
                        if out.len() >= PEX_CAP {
                            break 'peers;
                        }
                    }
                }
                Ok(out)
            }
        }
    }

    fn fetch_chunk(
        &mut self,
        peer: &PeerRecord,
        file_digest: &[u8; 20],
        index: u32,
    ) -> Result<Vec<u8>, ChunkError> {
        let Some(target) = self.peers.iter().find(|p| p.peer_id == peer.peer_id) else {
            return Err(ChunkError::Unreachable);
        };
        if !target.online {
            return Err(ChunkError::Unreachable);
        }
        if target.access_denied {
            return Err(ChunkError::AccessDenied);
        }
        match target.chunk_store.get(&(*file_digest, index)) {
            Some(bytes) => Ok(bytes.clone()),
            None => Err(ChunkError::Absent),
        }
    }

    fn manifest_for(&self, share: &ShareId) -> Option<Manifest> {
        self.manifests.get(share).cloned()
    }
}

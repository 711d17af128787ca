//! Scenario definitions for the simulated network.
//!
//! A scenario is declared in TOML (or built programmatically by one of the
//! presets) and then validated into a [`Scenario`] plan with parsed
//! endpoints, resolved share references, and expanded chunk ranges.

use std::collections::BTreeSet;
use std::net::SocketAddrV4;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::keys::{generate_rw_key, AccessKey, KeyKind, ShareId};
use crate::wire::Dialect;

// --- Errors ---

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("scenario is not valid TOML: {0}")]
    Toml(String),
    #[error("scenario field `{field}`: {reason}")]
    ConfigInvalid { field: String, reason: String },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::ConfigInvalid {
        field: field.into(),
        reason: reason.into(),
    }
}

// --- Declarative form (TOML schema) ---

/// Top-level scenario document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub duration_s: u64,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub shares: Vec<ShareConfig>,
    #[serde(default)]
    pub peers: Vec<PeerConfig>,
    #[serde(default)]
    pub events: Vec<EventConfig>,
    #[serde(default)]
    pub investigator: Option<InvestigatorConfig>,
}

/// Infrastructure endpoints and timing knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub tracker: String,
    pub relay: String,
    pub lpd_group: String,
    pub announce_interval_s: u64,
    pub lpd_interval_s: u64,
    pub chunk_size: u32,
}

impl Default for NetworkConfig {
    fn default() -> NetworkConfig {
        NetworkConfig {
            tracker: "54.225.100.8:3030".to_string(),
            relay: "67.215.229.106:3000".to_string(),
            lpd_group: "239.192.152.143:3838".to_string(),
            announce_interval_s: 600,
            lpd_interval_s: 60,
            chunk_size: 1024,
        }
    }
}

/// A share, identified either by an access key or by a raw 40-hex share id.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShareConfig {
    pub name: String,
    #[serde(default)]
    pub key: Option<String>,
    #[serde(default)]
    pub share_id: Option<String>,
    #[serde(default)]
    pub files: Vec<FileConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub name: String,
    pub size: u64,
}

/// One simulated peer.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeerConfig {
    pub name: String,
    pub external: String,
    pub local: String,
    #[serde(default = "default_segment")]
    pub segment: String,
    /// Share memberships as `name`, `name:rw`, `name:ro`, or `name:ot`.
    #[serde(default)]
    pub shares: Vec<String>,
    #[serde(default = "default_true")]
    pub tracker: bool,
    #[serde(default)]
    pub lpd: bool,
    #[serde(default)]
    pub dht: bool,
    #[serde(default)]
    pub relay: bool,
    #[serde(default)]
    pub predefined: Vec<String>,
    #[serde(default)]
    pub join_at_s: u64,
    #[serde(default)]
    pub chunks: Vec<ChunkHolding>,
    #[serde(default)]
    pub corrupt: Vec<CorruptionConfig>,
    #[serde(default)]
    pub access_denied: bool,
    #[serde(default = "default_dialect")]
    pub dialect: String,
}

fn default_segment() -> String {
    "wan".to_string()
}

fn default_true() -> bool {
    true
}

fn default_dialect() -> String {
    "v1.4".to_string()
}

/// Which chunks of one file a peer holds: `all` or a list like `0-5,9`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChunkHolding {
    pub share: String,
    pub file: String,
    pub have: String,
}

/// Flip the first byte of one stored chunk.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptionConfig {
    pub share: String,
    pub file: String,
    pub index: u32,
}

/// A timed change to the running network.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventConfig {
    pub at_s: u64,
    /// `leave` or `reassign_external_ip`.
    pub kind: String,
    pub peer: String,
    #[serde(default)]
    pub new_external: Option<String>,
}

/// The observing endpoint crawls run from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvestigatorConfig {
    pub external: String,
    pub local: String,
    #[serde(default = "default_segment")]
    pub segment: String,
    #[serde(default)]
    pub predefined: Vec<String>,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<ScenarioConfig, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Toml(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario configs serialize")
    }
}

// --- Validated form ---

/// A validated scenario ready to drive the simulator.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub duration_s: u64,
    pub network: NetworkPlan,
    pub shares: Vec<SharePlan>,
    pub peers: Vec<PeerPlan>,
    pub events: Vec<EventPlan>,
    pub investigator: Option<InvestigatorPlan>,
}

#[derive(Debug, Clone)]
pub struct NetworkPlan {
    pub tracker: SocketAddrV4,
    pub relay: SocketAddrV4,
    pub lpd_group: SocketAddrV4,
    pub announce_interval_s: u64,
    pub lpd_interval_s: u64,
    pub chunk_size: u32,
}

#[derive(Debug, Clone)]
pub struct SharePlan {
    pub name: String,
    pub key: Option<AccessKey>,
    pub share_id: ShareId,
    pub files: Vec<FilePlan>,
}

#[derive(Debug, Clone)]
pub struct FilePlan {
    pub name: String,
    pub size: u64,
    pub chunk_count: u32,
}

#[derive(Debug, Clone)]
pub struct PeerPlan {
    pub name: String,
    pub external: SocketAddrV4,
    pub local: SocketAddrV4,
    pub segment: String,
    /// Indexes into [`Scenario::shares`] with the access level held.
    pub shares: Vec<(usize, KeyKind)>,
    pub tracker: bool,
    pub lpd: bool,
    pub dht: bool,
    pub relay: bool,
    pub predefined: Vec<SocketAddrV4>,
    pub join_at_s: u64,
    pub chunks: Vec<ChunkPlan>,
    pub corrupt: Vec<(usize, usize, u32)>,
    pub access_denied: bool,
    pub dialect: Dialect,
}

#[derive(Debug, Clone)]
pub struct ChunkPlan {
    pub share: usize,
    pub file: usize,
    pub indexes: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Leave,
    ReassignExternalIp(SocketAddrV4),
}

#[derive(Debug, Clone)]
pub struct EventPlan {
    pub at_s: u64,
    pub peer: usize,
    pub kind: EventKind,
}

#[derive(Debug, Clone)]
pub struct InvestigatorPlan {
    pub external: SocketAddrV4,
    pub local: SocketAddrV4,
    pub segment: String,
    pub predefined: Vec<SocketAddrV4>,
}

fn parse_endpoint(field: &str, value: &str) -> Result<SocketAddrV4, ScenarioError> {
    value
        .parse::<SocketAddrV4>()
        .map_err(|e| invalid(field, format!("`{value}` is not an IPv4 endpoint: {e}")))
}

fn parse_access(field: &str, spec: &str) -> Result<(String, KeyKind), ScenarioError> {
    let (name, level) = match spec.split_once(':') {
        None => (spec, "rw"),
        Some((name, level)) => (name, level),
    };
    let kind = match level {
        "rw" => KeyKind::ReadWrite,
        "ro" => KeyKind::ReadOnly,
        "ot" => KeyKind::OneTime,
        other => {
            return Err(invalid(
                field,
                format!("access level `{other}` (expected rw, ro, or ot)"),
            ))
        }
    };
    if name.is_empty() {
        return Err(invalid(field, "empty share name"));
    }
    Ok((name.to_string(), kind))
}

/// Expands `all`, `3`, or `0-5,9` into sorted chunk indexes below `count`.
fn parse_have_ranges(field: &str, have: &str, count: u32) -> Result<Vec<u32>, ScenarioError> {
    if have.trim() == "all" {
        return Ok((0..count).collect());
    }
    let mut indexes = BTreeSet::new();
    for part in have.split(',') {
        let part = part.trim();
        if part.is_empty() {
            return Err(invalid(field, "empty range element"));
        }
        let (lo, hi) = match part.split_once('-') {
            None => {
                let n: u32 = part
                    .parse()
                    .map_err(|_| invalid(field, format!("`{part}` is not a chunk index")))?;
                (n, n)
            }
            Some((a, b)) => {
                let lo: u32 = a
                    .trim()
                    .parse()
                    .map_err(|_| invalid(field, format!("`{a}` is not a chunk index")))?;
                let hi: u32 = b
                    .trim()
                    .parse()
                    .map_err(|_| invalid(field, format!("`{b}` is not a chunk index")))?;
                (lo, hi)
            }
        };
        if lo > hi {
            return Err(invalid(field, format!("range `{part}` runs backwards")));
        }
        if hi >= count {
            return Err(invalid(
                field,
                format!("chunk {hi} out of bounds (file has {count} chunks)"),
            ));
        }
        indexes.extend(lo..=hi);
    }
    Ok(indexes.into_iter().collect())
}

impl Scenario {
    /// Validates a declarative config into a runnable plan.
    pub fn build(config: &ScenarioConfig) -> Result<Scenario, ScenarioError> {
        if config.name.is_empty() {
            return Err(invalid("name", "must not be empty"));
        }
        let network = NetworkPlan {
            tracker: parse_endpoint("network.tracker", &config.network.tracker)?,
            relay: parse_endpoint("network.relay", &config.network.relay)?,
            lpd_group: parse_endpoint("network.lpd_group", &config.network.lpd_group)?,
            announce_interval_s: config.network.announce_interval_s,
            lpd_interval_s: config.network.lpd_interval_s,
            chunk_size: config.network.chunk_size,
        };
        if network.announce_interval_s == 0 {
            return Err(invalid("network.announce_interval_s", "must be at least 1"));
        }
        if network.lpd_interval_s == 0 {
            return Err(invalid("network.lpd_interval_s", "must be at least 1"));
        }
        if network.chunk_size == 0 {
            return Err(invalid("network.chunk_size", "must be at least 1"));
        }

        let mut shares = Vec::new();
        for (i, share) in config.shares.iter().enumerate() {
            let field = format!("shares[{i}]");
            if share.name.is_empty() {
                return Err(invalid(format!("{field}.name"), "must not be empty"));
            }
            if shares.iter().any(|s: &SharePlan| s.name == share.name) {
                return Err(invalid(
                    format!("{field}.name"),
                    format!("duplicate share name `{}`", share.name),
                ));
            }
            let (key, share_id) = match (&share.key, &share.share_id) {
                (Some(_), Some(_)) | (None, None) => {
                    return Err(invalid(field, "needs exactly one of `key` or `share_id`"))
                }
                (Some(display), None) => {
                    let key = AccessKey::from_display(display)
                        .map_err(|e| invalid(format!("{field}.key"), e.to_string()))?;
                    let id = crate::keys::share_id_from_key(&key);
                    (Some(key), id)
                }
                (None, Some(hex_id)) => {
                    let id: ShareId = hex_id
                        .parse()
                        .map_err(|e: crate::keys::KeyError| {
                            invalid(format!("{field}.share_id"), e.to_string())
                        })?;
                    (None, id)
                }
            };
            let mut files = Vec::new();
            for (j, file) in share.files.iter().enumerate() {
                let ffield = format!("{field}.files[{j}]");
                if file.name.is_empty() {
                    return Err(invalid(format!("{ffield}.name"), "must not be empty"));
                }
                if files.iter().any(|f: &FilePlan| f.name == file.name) {
                    return Err(invalid(
                        format!("{ffield}.name"),
                        format!("duplicate file name `{}`", file.name),
                    ));
                }
                let chunk_count = file.size.div_ceil(network.chunk_size as u64);
                let chunk_count = u32::try_from(chunk_count)
                    .map_err(|_| invalid(format!("{ffield}.size"), "too many chunks"))?;
                files.push(FilePlan {
                    name: file.name.clone(),
                    size: file.size,
                    chunk_count,
                });
            }
            shares.push(SharePlan {
                name: share.name.clone(),
                key,
                share_id,
                files,
            });
        }

        let share_index = |field: &str, name: &str| -> Result<usize, ScenarioError> {
            shares
                .iter()
                .position(|s| s.name == name)
                .ok_or_else(|| invalid(field, format!("unknown share `{name}`")))
        };

        let mut peers: Vec<PeerPlan> = Vec::new();
        for (i, peer) in config.peers.iter().enumerate() {
            let field = format!("peers[{i}]");
            if peer.name.is_empty() {
                return Err(invalid(format!("{field}.name"), "must not be empty"));
            }
            if peer.name == "investigator" {
                return Err(invalid(
                    format!("{field}.name"),
                    "`investigator` is reserved",
                ));
            }
            if peers.iter().any(|p| p.name == peer.name) {
                return Err(invalid(
                    format!("{field}.name"),
                    format!("duplicate peer name `{}`", peer.name),
                ));
            }
            let external = parse_endpoint(&format!("{field}.external"), &peer.external)?;
            let local = parse_endpoint(&format!("{field}.local"), &peer.local)?;
            let dialect = match peer.dialect.as_str() {
                "v1.4" => Dialect::V14,
                "v2.0" => Dialect::V20,
                other => {
                    return Err(invalid(
                        format!("{field}.dialect"),
                        format!("`{other}` (expected v1.4 or v2.0)"),
                    ))
                }
            };
            let mut memberships = Vec::new();
            for (j, spec) in peer.shares.iter().enumerate() {
                let sfield = format!("{field}.shares[{j}]");
                let (name, kind) = parse_access(&sfield, spec)?;
                let index = share_index(&sfield, &name)?;
                if memberships.iter().any(|(existing, _)| *existing == index) {
                    return Err(invalid(sfield, format!("share `{name}` listed twice")));
                }
                memberships.push((index, kind));
            }
            let mut predefined = Vec::new();
            for (j, host) in peer.predefined.iter().enumerate() {
                predefined.push(parse_endpoint(&format!("{field}.predefined[{j}]"), host)?);
            }
            let mut chunk_plans: Vec<ChunkPlan> = Vec::new();
            for (j, holding) in peer.chunks.iter().enumerate() {
                let cfield = format!("{field}.chunks[{j}]");
                let share = share_index(&cfield, &holding.share)?;
                if !memberships.iter().any(|(index, _)| *index == share) {
                    return Err(invalid(
                        cfield,
                        format!("peer is not a member of share `{}`", holding.share),
                    ));
                }
                let file = shares[share]
                    .files
                    .iter()
                    .position(|f| f.name == holding.file)
                    .ok_or_else(|| {
                        invalid(&cfield, format!("unknown file `{}`", holding.file))
                    })?;
                let indexes = parse_have_ranges(
                    &format!("{cfield}.have"),
                    &holding.have,
                    shares[share].files[file].chunk_count,
                )?;
                chunk_plans.push(ChunkPlan {
                    share,
                    file,
                    indexes,
                });
            }
            let mut corrupt = Vec::new();
            for (j, c) in peer.corrupt.iter().enumerate() {
                let cfield = format!("{field}.corrupt[{j}]");
                let share = share_index(&cfield, &c.share)?;
                let file = shares[share]
                    .files
                    .iter()
                    .position(|f| f.name == c.file)
                    .ok_or_else(|| invalid(&cfield, format!("unknown file `{}`", c.file)))?;
                let held = chunk_plans.iter().any(|plan| {
                    plan.share == share && plan.file == file && plan.indexes.contains(&c.index)
                });
                if !held {
                    return Err(invalid(
                        cfield,
                        format!("peer does not hold chunk {} of `{}`", c.index, c.file),
                    ));
                }
                corrupt.push((share, file, c.index));
            }
            peers.push(PeerPlan {
                name: peer.name.clone(),
                external,
                local,
                segment: peer.segment.clone(),
                shares: memberships,
                tracker: peer.tracker,
                lpd: peer.lpd,
                dht: peer.dht,
                relay: peer.relay,
                predefined,
                join_at_s: peer.join_at_s,
                chunks: chunk_plans,
                corrupt,
                access_denied: peer.access_denied,
                dialect,
            });
        }

        let mut events = Vec::new();
        for (i, event) in config.events.iter().enumerate() {
            let field = format!("events[{i}]");
            let peer = peers
                .iter()
                .position(|p| p.name == event.peer)
                .ok_or_else(|| invalid(&field, format!("unknown peer `{}`", event.peer)))?;
            let kind = match event.kind.as_str() {
                "leave" => {
                    if event.new_external.is_some() {
                        return Err(invalid(
                            format!("{field}.new_external"),
                            "not allowed for `leave`",
                        ));
                    }
                    EventKind::Leave
                }
                "reassign_external_ip" => {
                    let value = event.new_external.as_deref().ok_or_else(|| {
                        invalid(format!("{field}.new_external"), "required for reassignment")
                    })?;
                    EventKind::ReassignExternalIp(parse_endpoint(
                        &format!("{field}.new_external"),
                        value,
                    )?)
                }
                other => {
                    return Err(invalid(
                        format!("{field}.kind"),
                        format!("`{other}` (expected leave or reassign_external_ip)"),
                    ))
                }
            };
            events.push(EventPlan {
                at_s: event.at_s,
                peer,
                kind,
            });
        }
        events.sort_by_key(|e| e.at_s);

        let investigator = match &config.investigator {
            None => None,
            Some(inv) => {
                let mut predefined = Vec::new();
                for (j, host) in inv.predefined.iter().enumerate() {
                    predefined.push(parse_endpoint(
                        &format!("investigator.predefined[{j}]"),
                        host,
                    )?);
                }
                Some(InvestigatorPlan {
                    external: parse_endpoint("investigator.external", &inv.external)?,
                    local: parse_endpoint("investigator.local", &inv.local)?,
                    segment: inv.segment.clone(),
                    predefined,
                })
            }
        };

        // Unicast traffic is routed by address, so every endpoint in play
        // must be distinct.
        let mut endpoints: Vec<(String, SocketAddrV4)> = vec![
            ("network.tracker".to_string(), network.tracker),
            ("network.relay".to_string(), network.relay),
            ("network.lpd_group".to_string(), network.lpd_group),
        ];
        for (i, peer) in peers.iter().enumerate() {
            endpoints.push((format!("peers[{i}].external"), peer.external));
            endpoints.push((format!("peers[{i}].local"), peer.local));
        }
        if let Some(inv) = &investigator {
            endpoints.push(("investigator.external".to_string(), inv.external));
            endpoints.push(("investigator.local".to_string(), inv.local));
        }
        let mut seen: BTreeSet<SocketAddrV4> = BTreeSet::new();
        for (field, endpoint) in &endpoints {
            if !seen.insert(*endpoint) {
                return Err(invalid(
                    field.clone(),
                    format!("endpoint {endpoint} is already in use"),
                ));
            }
        }

        Ok(Scenario {
            name: config.name.clone(),
            seed: config.seed,
            duration_s: config.duration_s,
            network,
            shares,
            peers,
            events,
            investigator,
        })
    }

    pub fn share_named(&self, name: &str) -> Option<&SharePlan> {
        self.shares.iter().find(|s| s.name == name)
    }
}

/// Deterministic content of a scenario file, independent of topology.
pub fn file_content(seed: u64, share_name: &str, file_name: &str, size: u64) -> Vec<u8> {
    let mut hasher = Sha256::new();
    hasher.update(b"file-content");
    hasher.update(seed.to_be_bytes());
    hasher.update(share_name.as_bytes());
    hasher.update([0]);
    hasher.update(file_name.as_bytes());
    let mut rng = ChaCha8Rng::from_seed(hasher.finalize().into());
    let mut content = vec![0u8; size as usize];
    rng.fill_bytes(&mut content);
    content
}

// --- Presets ---

pub const PRESET_NAMES: [&str; 4] = [
    "baseline",
    "split-visibility",
    "reallocation",
    "recovery",
];

/// A ready-made scenario by name.
pub fn preset(name: &str) -> Result<ScenarioConfig, ScenarioError> {
    match name {
        "baseline" => Ok(baseline_preset()),
        "split-visibility" => Ok(split_visibility_preset()),
        "reallocation" => Ok(reallocation_preset()),
        "recovery" => Ok(recovery_preset()),
        other => Err(ScenarioError::UnknownPreset(other.to_string())),
    }
}

fn preset_key(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_rw_key(&mut rng).display().to_string()
}

fn simple_peer(name: &str, external: &str, local: &str, shares: &[&str]) -> PeerConfig {
    PeerConfig {
        name: name.to_string(),
        external: external.to_string(),
        local: local.to_string(),
        segment: default_segment(),
        shares: shares.iter().map(|s| s.to_string()).collect(),
        tracker: true,
        lpd: false,
        dht: false,
        relay: false,
        predefined: Vec::new(),
        join_at_s: 0,
        chunks: Vec::new(),
        corrupt: Vec::new(),
        access_denied: false,
        dialect: default_dialect(),
    }
}

/// Two tracker-backed shares, one of them relay-bridged. The second share is
/// pinned to a fixed id so its traffic is recognisable in captures.
fn baseline_preset() -> ScenarioConfig {
    let seed = 414_213_562;
    let mut p1 = simple_peer("p1", "198.51.100.11:40001", "192.168.1.11:3839", &["alpha"]);
    let mut p2 = simple_peer("p2", "198.51.100.12:40002", "192.168.1.12:3839", &["alpha"]);
    let mut p3 = simple_peer("p3", "203.0.113.31:40003", "192.168.2.31:3839", &["leak"]);
    let mut p4 = simple_peer("p4", "203.0.113.32:40004", "192.168.2.32:3839", &["leak"]);
    p1.join_at_s = 0;
    p2.join_at_s = 5;
    p3.join_at_s = 10;
    p3.relay = true;
    p4.join_at_s = 15;
    p4.relay = true;
    ScenarioConfig {
        name: "baseline".to_string(),
        seed,
        duration_s: 1800,
        network: NetworkConfig::default(),
        shares: vec![
            ShareConfig {
                name: "alpha".to_string(),
                key: Some(preset_key(seed)),
                share_id: None,
                files: Vec::new(),
            },
            ShareConfig {
                name: "leak".to_string(),
                key: None,
                share_id: Some("bb63eb5b61969956e71273026f00a1deca464413".to_string()),
                files: Vec::new(),
            },
        ],
        peers: vec![p1, p2, p3, p4],
        events: Vec::new(),
        investigator: None,
    }
}

/// One share visible through three disjoint channels: six peers only on the
/// tracker, three only on local discovery, one only as a predefined host.
fn split_visibility_preset() -> ScenarioConfig {
    let seed = 271_828_182;
    let mut peers = Vec::new();
    for i in 0..6u32 {
        let mut p = simple_peer(
            &format!("t{}", i + 1),
            &format!("198.51.100.{}:4001{}", 21 + i, 1 + i),
            &format!("192.168.20.{}:3839", 21 + i),
            &["target"],
        );
        p.join_at_s = (i as u64) * 7;
        peers.push(p);
    }
    for i in 0..3u32 {
        let mut p = simple_peer(
            &format!("l{}", i + 1),
            &format!("203.0.113.{}:4002{}", 61 + i, 1 + i),
            &format!("192.168.77.{}:3839", 61 + i),
            &["target"],
        );
        p.segment = "lan-a".to_string();
        p.tracker = false;
        p.lpd = true;
        p.join_at_s = 3 + (i as u64) * 5;
        peers.push(p);
    }
    let mut h1 = simple_peer("h1", "192.0.2.80:40080", "192.168.88.80:3839", &["target"]);
    h1.tracker = false;
    h1.join_at_s = 2;
    peers.push(h1);
    ScenarioConfig {
        name: "split-visibility".to_string(),
        seed,
        duration_s: 900,
        network: NetworkConfig::default(),
        shares: vec![ShareConfig {
            name: "target".to_string(),
            key: Some(preset_key(seed)),
            share_id: None,
            files: Vec::new(),
        }],
        peers,
        events: Vec::new(),
        investigator: Some(InvestigatorConfig {
            external: "198.51.100.99:40099".to_string(),
            local: "192.168.77.99:3839".to_string(),
            segment: "lan-a".to_string(),
            predefined: vec!["192.0.2.80:40080".to_string()],
        }),
    }
}

/// Twenty-one members watched across a day: one departs, one returns from a
/// new external IP, and two sit behind the same NAT.
fn reallocation_preset() -> ScenarioConfig {
    let seed = 161_803_398;
    let mut peers = Vec::new();
    let mut nat1 = simple_peer("m01", "203.0.113.50:45001", "192.168.1.2:3839", &["watched"]);
    nat1.join_at_s = 0;
    let mut nat2 = simple_peer("m02", "203.0.113.50:45002", "192.168.1.3:3839", &["watched"]);
    nat2.join_at_s = 3;
    peers.push(nat1);
    peers.push(nat2);
    for i in 0..19u32 {
        let mut p = simple_peer(
            &format!("m{:02}", 3 + i),
            &format!("198.51.100.{}:450{:02}", 101 + i, 3 + i),
            &format!("192.168.{}.10:3839", 30 + i),
            &["watched"],
        );
        p.join_at_s = 6 + (i as u64) * 3;
        peers.push(p);
    }
    ScenarioConfig {
        name: "reallocation".to_string(),
        seed,
        duration_s: 90_000,
        network: NetworkConfig::default(),
        shares: vec![ShareConfig {
            name: "watched".to_string(),
            key: Some(preset_key(seed)),
            share_id: None,
            files: Vec::new(),
        }],
        peers,
        events: vec![
            EventConfig {
                at_s: 1000,
                kind: "leave".to_string(),
                peer: "m05".to_string(),
                new_external: None,
            },
            EventConfig {
                at_s: 43_200,
                kind: "reassign_external_ip".to_string(),
                peer: "m07".to_string(),
                new_external: Some("198.51.23.9:45007".to_string()),
            },
        ],
        investigator: Some(InvestigatorConfig {
            external: "198.51.100.200:45999".to_string(),
            local: "192.168.99.2:3839".to_string(),
            segment: default_segment(),
            predefined: Vec::new(),
        }),
    }
}

/// Three ten-chunk files spread over three holders: full coverage with 60%
/// overlap, a coverage gap at chunk 7, and a corrupted sole copy. A fourth
/// holder denies chunk requests.
fn recovery_preset() -> ScenarioConfig {
    let seed = 577_215_664;
    let chunk = |share: &str, file: &str, have: &str| ChunkHolding {
        share: share.to_string(),
        file: file.to_string(),
        have: have.to_string(),
    };
    let mut p1 = simple_peer("p1", "198.51.100.31:46001", "192.168.31.2:3839", &["payload"]);
    p1.chunks = vec![chunk("payload", "intact.bin", "0-5"), chunk("payload", "gapped.bin", "0-3")];
    let mut p2 = simple_peer("p2", "198.51.100.32:46002", "192.168.32.2:3839", &["payload"]);
    p2.join_at_s = 3;
    p2.chunks = vec![
        chunk("payload", "intact.bin", "2-7"),
        chunk("payload", "gapped.bin", "4-6"),
        chunk("payload", "corrupted.bin", "all"),
    ];
    p2.corrupt = vec![CorruptionConfig {
        share: "payload".to_string(),
        file: "corrupted.bin".to_string(),
        index: 2,
    }];
    let mut p3 = simple_peer("p3", "198.51.100.33:46003", "192.168.33.2:3839", &["payload"]);
    p3.join_at_s = 6;
    p3.chunks = vec![chunk("payload", "intact.bin", "4-9"), chunk("payload", "gapped.bin", "8-9")];
    let mut p4 = simple_peer("p4", "198.51.100.34:46004", "192.168.34.2:3839", &["payload"]);
    p4.join_at_s = 9;
    p4.access_denied = true;
    p4.chunks = vec![chunk("payload", "intact.bin", "all")];
    ScenarioConfig {
        name: "recovery".to_string(),
        seed,
        duration_s: 600,
        network: NetworkConfig::default(),
        shares: vec![ShareConfig {
            name: "payload".to_string(),
            key: Some(preset_key(seed)),
            share_id: None,
            files: vec![
                FileConfig {
                    name: "intact.bin".to_string(),
                    size: 10_240,
                },
                FileConfig {
                    name: "gapped.bin".to_string(),
                    size: 10_240,
                },
                FileConfig {
                    name: "corrupted.bin".to_string(),
                    size: 10_240,
                },
            ],
        }],
        peers: vec![p1, p2, p3, p4],
        events: Vec::new(),
        investigator: Some(InvestigatorConfig {
            external: "198.51.100.40:46999".to_string(),
            local: "192.168.40.2:3839".to_string(),
            segment: default_segment(),
            predefined: Vec::new(),
        }),
    }
}

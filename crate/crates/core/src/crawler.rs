//! Share investigation pipeline over a pluggable transport.
//!
//! The workflow is: derive a lookup hash from whatever identifier is at hand,
//! enumerate peers through every reachable discovery source, snapshot the
//! population repeatedly, diff snapshots for churn and address findings,
//! geolocate, and finally pull content chunk by chunk. Every step is pure
//! over its inputs except where it talks through [`CrawlTransport`], so the
//! whole pipeline runs identically against the simulated network and any
//! future live backend.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{self, BufRead};
use std::net::{Ipv4Addr, SocketAddrV4};

use serde_json::json;
use thiserror::Error;

use crate::keys::{classify_key, digest20, share_id_from_key, AccessKey, KeyKind, PeerId, ShareId};
use crate::keys::base32_decode;
use crate::wire::parse_share_link;

// --- Errors ---

#[derive(Debug, Error)]
pub enum CrawlError {
    #[error("input is not an access key, share id, database filename, or share link")]
    UnrecognisedInput,
    #[error("snapshots cover different shares")]
    ShareMismatch,
    #[error("no discovery sources enabled")]
    NoSources,
    #[error("every discovery source failed: {0}")]
    AllSourcesFailed(String),
}

/// Failure of one discovery source. Partial failure of an enumeration is
/// tolerated; only a clean sweep of these becomes [`CrawlError::AllSourcesFailed`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceError {
    pub source: Source,
    pub reason: String,
}

impl fmt::Display for SourceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} lookup failed: {}", self.source, self.reason)
    }
}

impl std::error::Error for SourceError {}

/// Why a chunk request returned no bytes.
#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum ChunkError {
    #[error("peer does not hold the chunk")]
    Absent,
    #[error("peer refused the request")]
    AccessDenied,
    #[error("peer is unreachable")]
    Unreachable,
}

// --- Discovery records ---

/// Peer discovery method that produced a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Source {
    Tracker,
    Lpd,
    Dht,
    Pex,
    Predefined,
}

impl Source {
    pub const ALL: [Source; 5] = [
        Source::Tracker,
        Source::Lpd,
        Source::Dht,
        Source::Pex,
        Source::Predefined,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Source::Tracker => "tracker",
            Source::Lpd => "lpd",
            Source::Dht => "dht",
            Source::Pex => "pex",
            Source::Predefined => "predefined",
        }
    }

    pub fn from_label(label: &str) -> Option<Source> {
        Source::ALL.into_iter().find(|s| s.label() == label)
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One peer observation: identity, both address views, and provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeerRecord {
    pub peer_id: PeerId,
    pub external: SocketAddrV4,
    pub local: SocketAddrV4,
    pub source: Source,
    /// Unix microseconds at observation.
    pub observed_at: u64,
}

/// The peers seen for one share at one instant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub share: ShareId,
    /// Unix microseconds.
    pub taken_at: u64,
    records: Vec<PeerRecord>,
}

impl Snapshot {
    /// Deduplicates on (peer_id, external, local) keeping the earliest record
    /// per key, then sorts by peer id and external endpoint.
    pub fn assemble(share: ShareId, taken_at: u64, raw: Vec<PeerRecord>) -> Snapshot {
        let mut seen: BTreeSet<(PeerId, SocketAddrV4, SocketAddrV4)> = BTreeSet::new();
        let mut records: Vec<PeerRecord> = Vec::new();
        for record in raw {
            if seen.insert((record.peer_id, record.external, record.local)) {
                records.push(record);
            }
        }
        records.sort_by_key(|r| (r.peer_id, r.external, r.local));
        Snapshot {
            share,
            taken_at,
            records,
        }
    }

    pub fn records(&self) -> &[PeerRecord] {
        &self.records
    }

    pub fn peer_ids(&self) -> BTreeSet<PeerId> {
        self.records.iter().map(|r| r.peer_id).collect()
    }
}

// --- Lookup hash derivation ---

/// Which of the accepted input shapes produced a lookup hash.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LookupInput {
    /// Bare 40-hex share id, as carried in `.SyncID` files.
    RawHex,
    /// Database filename whose stem is the 40-hex share id.
    DbFilename,
    /// 33-character access key; the hash is derived from it.
    Key(KeyKind),
    /// HTTPS share link; the hash is the decoded `s` field.
    Link,
}

impl LookupInput {
    pub fn describe(self) -> String {
        match self {
            LookupInput::RawHex => "raw 40-hex share id".to_owned(),
            LookupInput::DbFilename => "database filename".to_owned(),
            LookupInput::Key(kind) => format!("{} access key", kind.label()),
            LookupInput::Link => "share link".to_owned(),
        }
    }
}

fn parse_hex_share_id(text: &str) -> Option<ShareId> {
    if text.len() != 40 {
        return None;
    }
    text.parse::<ShareId>().ok()
}

/// Turns any accepted identifier into the 20-byte lookup hash.
///
/// Accepted shapes: a bare 40-hex id, a `<40-hex>.db` filename (path prefixes
/// are ignored), a 33-character access key, or a share link whose `s` field
/// decodes to 20 bytes.
pub fn derive_lookup_hash(input: &str) -> Result<(ShareId, LookupInput), CrawlError> {
    let text = input.trim();
    if text.is_empty() {
        return Err(CrawlError::UnrecognisedInput);
    }
    if let Some(id) = parse_hex_share_id(text) {
        return Ok((id, LookupInput::RawHex));
    }
    if let Some(stem) = text
        .rsplit(['/', '\\'])
        .next()
        .and_then(|base| base.strip_suffix(".db"))
    {
        if let Some(id) = parse_hex_share_id(stem) {
            return Ok((id, LookupInput::DbFilename));
        }
    }
    let kind = classify_key(text);
    if kind != KeyKind::Custom {
        let key = AccessKey::from_display(text).map_err(|_| CrawlError::UnrecognisedInput)?;
        return Ok((share_id_from_key(&key), LookupInput::Key(kind)));
    }
    if text.starts_with("http://") || text.starts_with("https://") {
        let link = parse_share_link(text).map_err(|_| CrawlError::UnrecognisedInput)?;
        let raw = base32_decode(&link.share_id_b32).map_err(|_| CrawlError::UnrecognisedInput)?;
        let body: [u8; 20] = raw.try_into().map_err(|_| CrawlError::UnrecognisedInput)?;
        return Ok((ShareId(body), LookupInput::Link));
    }
    Err(CrawlError::UnrecognisedInput)
}

// --- Transport ---

/// Everything the crawler needs from a network: a clock, discovery queries,
/// chunk fetches, and the ability to wait. The simulated network implements
/// this; tests use hand-rolled fakes.
pub trait CrawlTransport {
    fn now_unix_micros(&self) -> u64;

    /// Advances the network to the given unix time, processing whatever
    /// traffic is due in between. Times in the past are a no-op.
    fn advance_to(&mut self, unix_micros: u64);

    /// Queries one discovery source. `known` carries the records already
    /// gathered in this enumeration so exchange-style sources have peers to
    /// ask. `deadline_us` is the absolute unix time by which the query must
    /// give up.
    fn query_source(
        &mut self,
        source: Source,
        share: &ShareId,
        known: &[PeerRecord],
        deadline_us: u64,
    ) -> Result<Vec<PeerRecord>, SourceError>;

    /// Requests one chunk of a file from one peer.
    fn fetch_chunk(
        &mut self,
        peer: &PeerRecord,
        file_digest: &[u8; 20],
        index: u32,
    ) -> Result<Vec<u8>, ChunkError>;

    /// Content manifest for a share, when the transport knows one.
    fn manifest_for(&self, share: &ShareId) -> Option<Manifest>;
}

/// Per-source outcome of one enumeration, for reporting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceOutcome {
    pub source: Source,
    pub records: usize,
    pub error: Option<String>,
}

/// Default per-source query budget in simulated seconds.
pub const SOURCE_DEADLINE_S: u64 = 30;

/// Queries every enabled source and merges the results into one snapshot.
///
/// Sources are queried in a fixed order with peer exchange last, so it can
/// interrogate peers the other sources found. Partial failure is tolerated:
/// the error only surfaces when every source fails.
pub fn enumerate_peers(
    transport: &mut dyn CrawlTransport,
    share: &ShareId,
    sources: &BTreeSet<Source>,
    deadline_s: u64,
) -> Result<(Snapshot, Vec<SourceOutcome>), CrawlError> {
    if sources.is_empty() {
        return Err(CrawlError::NoSources);
    }
    let taken_at = transport.now_unix_micros();
    let query_order = [
        Source::Tracker,
        Source::Lpd,
        Source::Dht,
        Source::Predefined,
        Source::Pex,
    ];
    let mut gathered: Vec<PeerRecord> = Vec::new();
    let mut outcomes: Vec<SourceOutcome> = Vec::new();
    for source in query_order {
        if !sources.contains(&source) {
            continue;
        }
        let deadline_us = transport
            .now_unix_micros()
            .saturating_add(deadline_s.saturating_mul(1_000_000));
        match transport.query_source(source, share, &gathered, deadline_us) {
            Ok(records) => {
                outcomes.push(SourceOutcome {
                    source,
                    records: records.len(),
                    error: None,
                });
                gathered.extend(records);
            }
            Err(err) => outcomes.push(SourceOutcome {
                source,
                records: 0,
                error: Some(err.reason),
            }),
        }
    }
    if outcomes.iter().all(|o| o.error.is_some()) {
        let reasons: Vec<String> = outcomes
            .iter()
            .map(|o| format!("{}: {}", o.source, o.error.as_deref().unwrap_or("?")))
            .collect();
        return Err(CrawlError::AllSourcesFailed(reasons.join("; ")));
    }
    Ok((Snapshot::assemble(*share, taken_at, gathered), outcomes))
}

// --- Churn ---

/// Population change between two snapshots, keyed by peer id.
#[derive(Debug, Clone, PartialEq)]
pub struct ChurnReport {
    pub departed: BTreeSet<PeerId>,
    pub joined: BTreeSet<PeerId>,
    pub retained: BTreeSet<PeerId>,
    /// |departed| / |first snapshot peers|; 0.0 for an empty first snapshot.
    pub churn_rate: f64,
}

impl ChurnReport {
    /// Rate as a percentage with one decimal, e.g. `4.8%`.
    pub fn rendered_rate(&self) -> String {
        format!("{:.1}%", self.churn_rate * 100.0)
    }
}

/// Set algebra over the peer ids of two snapshots of one share.
pub fn diff_snapshots(s1: &Snapshot, s2: &Snapshot) -> Result<ChurnReport, CrawlError> {
    if s1.share != s2.share {
        return Err(CrawlError::ShareMismatch);
    }
    let ids1 = s1.peer_ids();
    let ids2 = s2.peer_ids();
    let departed: BTreeSet<PeerId> = ids1.difference(&ids2).copied().collect();
    let joined: BTreeSet<PeerId> = ids2.difference(&ids1).copied().collect();
    let retained: BTreeSet<PeerId> = ids1.intersection(&ids2).copied().collect();
    let churn_rate = if ids1.is_empty() {
        0.0
    } else {
        departed.len() as f64 / ids1.len() as f64
    };
    Ok(ChurnReport {
        departed,
        joined,
        retained,
        churn_rate,
    })
}

// --- Findings ---

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FindingKind {
    /// Several peers expose one external IP with distinct local endpoints.
    NatShared,
    /// One peer kept its local endpoint while its external IP changed.
    IpReallocation,
}

impl FindingKind {
    pub fn label(self) -> &'static str {
        match self {
            FindingKind::NatShared => "shared-external-ip",
            FindingKind::IpReallocation => "external-ip-reallocation",
        }
    }
}

/// An address-level inference with the records that support it.
#[derive(Debug, Clone, PartialEq)]
pub struct Finding {
    pub kind: FindingKind,
    pub evidence: Vec<PeerRecord>,
    pub rationale: String,
}

/// Checks a finding's evidence against its kind's defining predicate.
pub fn verify_finding(finding: &Finding) -> bool {
    match finding.kind {
        FindingKind::NatShared => {
            let ips: BTreeSet<Ipv4Addr> =
                finding.evidence.iter().map(|r| *r.external.ip()).collect();
            let ids: BTreeSet<PeerId> = finding.evidence.iter().map(|r| r.peer_id).collect();
            let locals: BTreeSet<SocketAddrV4> =
                finding.evidence.iter().map(|r| r.local).collect();
            ips.len() == 1 && ids.len() >= 2 && locals.len() >= 2
        }
        FindingKind::IpReallocation => {
            if finding.evidence.len() != 2 {
                return false;
            }
            let (a, b) = (&finding.evidence[0], &finding.evidence[1]);
            a.peer_id == b.peer_id && a.local == b.local && a.external.ip() != b.external.ip()
        }
    }
}

fn nat_groups(snapshot: &Snapshot) -> Vec<(Ipv4Addr, Vec<PeerRecord>)> {
    let mut by_ip: BTreeMap<Ipv4Addr, Vec<PeerRecord>> = BTreeMap::new();
    for record in snapshot.records() {
        by_ip
            .entry(*record.external.ip())
            .or_default()
            .push(record.clone());
    }
    by_ip
        .into_iter()
        .filter(|(_, records)| {
            let ids: BTreeSet<PeerId> = records.iter().map(|r| r.peer_id).collect();
            let locals: BTreeSet<SocketAddrV4> = records.iter().map(|r| r.local).collect();
            ids.len() >= 2 && locals.len() >= 2
        })
        .collect()
}

/// Derives address findings from one snapshot, or from the pair.
///
/// Shared-IP groups are reported once even when present in both snapshots;
/// reallocations need both snapshots by definition.
pub fn detect_findings(s1: &Snapshot, s2: Option<&Snapshot>) -> Vec<Finding> {
    let mut findings = Vec::new();
    let mut reported: BTreeSet<(Ipv4Addr, Vec<PeerId>)> = BTreeSet::new();
    for snapshot in std::iter::once(s1).chain(s2) {
        for (ip, records) in nat_groups(snapshot) {
            let mut ids: Vec<PeerId> = records.iter().map(|r| r.peer_id).collect();
            ids.sort();
            ids.dedup();
            if !reported.insert((ip, ids.clone())) {
                continue;
            }
            findings.push(Finding {
                kind: FindingKind::NatShared,
                rationale: format!(
                    "{} peers share external IP {ip} with distinct local endpoints",
                    ids.len()
                ),
                evidence: records,
            });
        }
    }
    if let Some(s2) = s2 {
        let mut earlier: BTreeMap<(PeerId, SocketAddrV4), PeerRecord> = BTreeMap::new();
        for record in s1.records() {
            earlier
                .entry((record.peer_id, record.local))
                .or_insert_with(|| record.clone());
        }
        let mut seen_pairs: BTreeSet<(PeerId, SocketAddrV4)> = BTreeSet::new();
        for record in s2.records() {
            let key = (record.peer_id, record.local);
            let Some(before) = earlier.get(&key) else {
                continue;
            };
            if before.external.ip() == record.external.ip() || !seen_pairs.insert(key) {
                continue;
            }
            findings.push(Finding {
                kind: FindingKind::IpReallocation,
                rationale: format!(
                    "peer {} kept local endpoint {} while its external IP moved {} -> {}",
                    record.peer_id,
                    record.local,
                    before.external.ip(),
                    record.external.ip()
                ),
                evidence: vec![before.clone(), record.clone()],
            });
        }
    }
    findings
}

// --- Geolocation ---

/// Country and city attribution for one external IP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeoRecord {
    pub ip: Ipv4Addr,
    pub country: String,
    pub city: String,
    pub provider: String,
}

/// IP attribution backend.
pub trait GeoProvider {
    fn name(&self) -> &str;
    fn lookup(&self, ip: Ipv4Addr) -> Option<(String, String)>;
}

/// CSV-backed provider: lines of `ip_prefix,country,city`, longest matching
/// prefix wins. Blank lines, `#` comments, and a header row are skipped.
#[derive(Debug, Clone, Default)]
pub struct CsvGeoProvider {
    rows: Vec<(String, String, String)>,
}

impl CsvGeoProvider {
    pub fn from_reader(reader: impl BufRead) -> io::Result<CsvGeoProvider> {
        let mut rows = Vec::new();
        for line in reader.lines() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') || trimmed == "ip_prefix,country,city"
            {
                continue;
            }
            let mut fields = trimmed.splitn(3, ',');
            let (Some(prefix), Some(country), Some(city)) =
                (fields.next(), fields.next(), fields.next())
            else {
                continue;
            };
            rows.push((
                prefix.trim().to_owned(),
                country.trim().to_owned(),
                city.trim().to_owned(),
            ));
        }
        Ok(CsvGeoProvider { rows })
    }
}

impl GeoProvider for CsvGeoProvider {
    fn name(&self) -> &str {
        "csv"
    }

    fn lookup(&self, ip: Ipv4Addr) -> Option<(String, String)> {
        let text = ip.to_string();
        self.rows
            .iter()
            .filter(|(prefix, _, _)| text.starts_with(prefix.as_str()))
            .max_by_key(|(prefix, _, _)| prefix.len())
            .map(|(_, country, city)| (country.clone(), city.clone()))
    }
}

/// One GeoRecord per distinct external IP in the snapshot, sorted by IP.
/// Unknown addresses attribute as "unknown" rather than failing.
pub fn geolocate(snapshot: &Snapshot, provider: &dyn GeoProvider) -> Vec<GeoRecord> {
    let ips: BTreeSet<Ipv4Addr> = snapshot.records().iter().map(|r| *r.external.ip()).collect();
    ips.into_iter()
        .map(|ip| {
            let (country, city) = provider
                .lookup(ip)
                .unwrap_or_else(|| ("unknown".to_owned(), "unknown".to_owned()));
            GeoRecord {
                ip,
                country,
                city,
                provider: provider.name().to_owned(),
            }
        })
        .collect()
}

// --- Content retrieval ---

/// Chunking and digest facts for one shared file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileManifest {
    pub name: String,
    pub size: u64,
    pub chunk_size: u32,
    pub chunk_count: u32,
    pub digest: [u8; 20],
}

/// Manifest for a whole share.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub files: Vec<FileManifest>,
}

/// Verdict for one recovered file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RecoveryStatus {
    /// All chunks retrieved and the assembled digest matches the manifest.
    CompleteVerified,
    /// These chunk indices were not obtainable from any peer.
    Incomplete(Vec<u32>),
    /// All chunks retrieved but the assembled digest disagrees.
    DigestMismatch,
}

impl RecoveryStatus {
    pub fn describe(&self) -> String {
        match self {
            RecoveryStatus::CompleteVerified => "complete, digest verified".to_owned(),
            RecoveryStatus::Incomplete(missing) => {
                format!("incomplete, missing chunks {missing:?}")
            }
            RecoveryStatus::DigestMismatch => "complete but digest mismatch".to_owned(),
        }
    }
}

/// Outcome of retrieving one file, with the assembled bytes when available.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecoveredFile {
    pub name: String,
    pub status: RecoveryStatus,
    /// Assembled content; present whenever every chunk was obtained, even on
    /// a digest mismatch, so the bad copy stays inspectable.
    pub bytes: Option<Vec<u8>>,
    /// Peers that refused chunk requests during this file's retrieval.
    pub denied_peers: Vec<PeerId>,
}

/// Pulls every manifest file chunk by chunk, round-robin across the
/// snapshot's peers, and verifies each assembled file's digest.
pub fn retrieve_content(
    transport: &mut dyn CrawlTransport,
    manifest: &Manifest,
    snapshot: &Snapshot,
) -> Vec<RecoveredFile> {
    let mut peers: Vec<PeerRecord> = Vec::new();
    let mut seen: BTreeSet<PeerId> = BTreeSet::new();
    for record in snapshot.records() {
        if seen.insert(record.peer_id) {
            peers.push(record.clone());
        }
    }
    manifest
        .files
        .iter()
        .map(|file| retrieve_file(transport, file, &peers))
        .collect()
}

fn retrieve_file(
    transport: &mut dyn CrawlTransport,
    file: &FileManifest,
    peers: &[PeerRecord],
) -> RecoveredFile {
    let mut chunks: Vec<Option<Vec<u8>>> = vec![None; file.chunk_count as usize];
    let mut denied: BTreeSet<PeerId> = BTreeSet::new();
    for index in 0..file.chunk_count {
        if peers.is_empty() {
            break;
        }
        for attempt in 0..peers.len() {
            let peer = &peers[(index as usize + attempt) % peers.len()];
            match transport.fetch_chunk(peer, &file.digest, index) {
                Ok(bytes) => {
                    chunks[index as usize] = Some(bytes);
                    break;
                }
                Err(ChunkError::AccessDenied) => {
                    denied.insert(peer.peer_id);
                }
                Err(ChunkError::Absent) | Err(ChunkError::Unreachable) => {}
            }
        }
    }
    let missing: Vec<u32> = chunks
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_none())
        .map(|(i, _)| i as u32)
        .collect();
    let denied_peers: Vec<PeerId> = denied.into_iter().collect();
    if !missing.is_empty() {
        return RecoveredFile {
            name: file.name.clone(),
            status: RecoveryStatus::Incomplete(missing),
            bytes: None,
            denied_peers,
        };
    }
    let mut assembled = Vec::with_capacity(file.size as usize);
    for chunk in chunks.into_iter().flatten() {
        assembled.extend_from_slice(&chunk);
    }
    let status = if digest20(&[&assembled]) == file.digest {
        RecoveryStatus::CompleteVerified
    } else {
        RecoveryStatus::DigestMismatch
    };
    RecoveredFile {
        name: file.name.clone(),
        status,
        bytes: Some(assembled),
        denied_peers,
    }
}

// --- Report ---

/// Everything one investigation produced, in pipeline order.
#[derive(Debug, Clone)]
pub struct InvestigationReport {
    pub share: ShareId,
    pub lookup_note: String,
    pub sources: Vec<Source>,
    pub snapshots: Vec<Snapshot>,
    pub source_outcomes: Vec<Vec<SourceOutcome>>,
    pub churn: Option<ChurnReport>,
    pub findings: Vec<Finding>,
    pub geo: Vec<GeoRecord>,
    pub recovery: Vec<RecoveredFile>,
}

/// Renders unix microseconds as an ISO-8601 UTC timestamp.
pub fn iso8601(unix_micros: u64) -> String {
    let secs = (unix_micros / 1_000_000) as i64;
    let micros = (unix_micros % 1_000_000) as u32;
    match chrono::DateTime::from_timestamp(secs, micros * 1_000) {
        Some(dt) => dt.format("%Y-%m-%dT%H:%M:%S%.6fZ").to_string(),
        None => format!("unix:{unix_micros}us"),
    }
}

fn record_json(record: &PeerRecord) -> serde_json::Value {
    json!({
        "peer_id": record.peer_id.to_string(),
        "external": record.external.to_string(),
        "local": record.local.to_string(),
        "source": record.source.label(),
        "observed_at": iso8601(record.observed_at),
    })
}

/// Snapshot file body: share, time, and the deduplicated records.
pub fn snapshot_json(snapshot: &Snapshot) -> serde_json::Value {
    json!({
        "share": snapshot.share.to_string(),
        "taken_at": iso8601(snapshot.taken_at),
        "records": snapshot.records().iter().map(record_json).collect::<Vec<_>>(),
    })
}

fn finding_json(finding: &Finding) -> serde_json::Value {
    json!({
        "kind": finding.kind.label(),
        "rationale": finding.rationale,
        "evidence": finding.evidence.iter().map(record_json).collect::<Vec<_>>(),
    })
}

/// Machine-readable report: one section per methodology step.
pub fn report_json(report: &InvestigationReport) -> serde_json::Value {
    let latest = report.snapshots.last();
    json!({
        "share": report.share.to_string(),
        "step1_identification": {
            "input": report.lookup_note,
            "share_id": report.share.to_string(),
        },
        "step2_enumeration": {
            "sources": report.sources.iter().map(|s| s.label()).collect::<Vec<_>>(),
            "snapshots": report.snapshots.iter().enumerate().map(|(i, s)| json!({
                "index": i + 1,
                "taken_at": iso8601(s.taken_at),
                "peers": s.peer_ids().len(),
                "records": s.records().len(),
                "source_outcomes": report.source_outcomes.get(i).map(|outcomes| {
                    outcomes.iter().map(|o| json!({
                        "source": o.source.label(),
                        "records": o.records,
                        "error": o.error,
                    })).collect::<Vec<_>>()
                }),
            })).collect::<Vec<_>>(),
        },
        "step3_monitoring": report.churn.as_ref().map(|churn| json!({
            "departed": churn.departed.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
            "joined": churn.joined.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
            "retained": churn.retained.len(),
            "churn_rate": churn.rendered_rate(),
        })),
        "step4_geolocation": report.geo.iter().map(|g| json!({
            "ip": g.ip.to_string(),
            "country": g.country,
            "city": g.city,
            "provider": g.provider,
        })).collect::<Vec<_>>(),
        "step5_analysis": {
            "findings": report.findings.iter().map(finding_json).collect::<Vec<_>>(),
            "recovery": report.recovery.iter().map(|r| json!({
                "file": r.name,
                "status": r.status.describe(),
                "denied_peers": r.denied_peers.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
            "peer_table": latest.map(|s| s.records().iter().map(|r| json!({
                "peer_id": r.peer_id.to_string(),
                "external": r.external.to_string(),
                "local": r.local.to_string(),
            })).collect::<Vec<_>>()),
        },
    })
}

/// Human-readable report with the peer summary table.
pub fn report_text(report: &InvestigationReport) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "INVESTIGATION REPORT");
    let _ = writeln!(out, "share id : {}", report.share);
    let _ = writeln!(out);
    let _ = writeln!(out, "[1] content identification");
    let _ = writeln!(out, "  input    : {}", report.lookup_note);
    let _ = writeln!(out, "  share id : {}", report.share);
    let _ = writeln!(out);
    let _ = writeln!(out, "[2] peer enumeration");
    let labels: Vec<&str> = report.sources.iter().map(|s| s.label()).collect();
    let _ = writeln!(out, "  sources  : {}", labels.join(", "));
    for (i, snapshot) in report.snapshots.iter().enumerate() {
        let _ = writeln!(
            out,
            "  snapshot {} : {}  {} peers ({} records)",
            i + 1,
            iso8601(snapshot.taken_at),
            snapshot.peer_ids().len(),
            snapshot.records().len()
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "[3] population change");
    match &report.churn {
        None => {
            let _ = writeln!(out, "  single snapshot; no churn comparison");
        }
        Some(churn) => {
            let _ = writeln!(out, "  departed : {}", render_id_set(&churn.departed));
            let _ = writeln!(out, "  joined   : {}", render_id_set(&churn.joined));
            let _ = writeln!(out, "  retained : {}", churn.retained.len());
            let _ = writeln!(out, "  churn    : {}", churn.rendered_rate());
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "[4] geolocation");
    if report.geo.is_empty() {
        let _ = writeln!(out, "  no provider configured");
    }
    for geo in &report.geo {
        let _ = writeln!(
            out,
            "  {:<15} {:<16} {:<16} ({})",
            geo.ip, geo.country, geo.city, geo.provider
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "[5] analysis");
    if report.findings.is_empty() {
        let _ = writeln!(out, "  no address findings");
    }
    for finding in &report.findings {
        let _ = writeln!(out, "  finding [{}]", finding.kind.label());
        let _ = writeln!(out, "    {}", finding.rationale);
        for record in &finding.evidence {
            let _ = writeln!(
                out,
                "    - {} {} {}",
                record.peer_id, record.external, record.local
            );
        }
    }
    for recovered in &report.recovery {
        let _ = writeln!(
            out,
            "  recovery {:<20} {}",
            recovered.name,
            recovered.status.describe()
        );
        if !recovered.denied_peers.is_empty() {
            let ids: Vec<String> = recovered
                .denied_peers
                .iter()
                .map(|p| p.to_string())
                .collect();
            let _ = writeln!(out, "    access denied by: {}", ids.join(", "));
        }
    }
    if let Some(latest) = report.snapshots.last() {
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "  {:<40} {:<21} {:<21}",
            "PeerID", "External IP:Port", "Local IP:Port"
        );
        for record in latest.records() {
            let _ = writeln!(
                out,
                "  {:<40} {:<21} {:<21}",
                record.peer_id.to_string(),
                record.external.to_string(),
                record.local.to_string()
            );
        }
    }
    out
}

fn render_id_set(ids: &BTreeSet<PeerId>) -> String {
    if ids.is_empty() {
        return "0".to_owned();
    }
    let listed: Vec<String> = ids.iter().map(|p| p.to_string()).collect();
    format!("{} ({})", ids.len(), listed.join(", "))
}

//! Command-line surface of the toolkit.
//!
//! One binary, five command families: `key` and `link` are thin bindings to
//! the credential and invitation-link code, `dissect` runs the capture
//! pipeline, `simulate` runs a scenario and writes its artifacts, and
//! `crawl` runs the full investigation workflow over a simulated network.
//!
//! Exit codes are a stable scripting contract: 0 success, 2 usage error,
//! 3 domain error (bad key, bad capture, bad scenario, failed crawl),
//! 4 I/O error. Defaults come from an optional `key = value` config file;
//! command-line flags always win. Every artifact lands in the output
//! directory under a name carrying the share-id prefix or scenario seed
//! plus a simulated timestamp, so reruns never clobber unrelated evidence.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufReader, Write};
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use syncprobe_core::crawler::{
    derive_lookup_hash, detect_findings, diff_snapshots, enumerate_peers, geolocate, iso8601,
    report_json, report_text, retrieve_content, snapshot_json, CrawlTransport, CsvGeoProvider,
    InvestigationReport, Snapshot, Source, SourceOutcome, SOURCE_DEADLINE_S,
};
use syncprobe_core::dissector::{
    classify_stream, extract_share_ids, read_capture, reconstruct_flows, write_capture,
    CaptureError, CaptureFormat, ClassifiedPacket, DissectorConfig, ExtractedShareId, FlowSummary,
    RAW_FRAMES_MAGIC,
};
use syncprobe_core::keys::{
    classify_key, derive_one_time, derive_read_only, generate_rw_key,
    generate_rw_key_from_os_entropy, share_id_from_key, AccessKey,
};
use syncprobe_core::simnet::scenario::{Scenario, ScenarioConfig, PRESET_NAMES};
use syncprobe_core::simnet::SimWorld;
use syncprobe_core::wire::{format_share_link, parse_share_link, ShareLink, SyncMessage};

// --- Exit codes ---

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DOMAIN: u8 = 3;
pub const EXIT_IO: u8 = 4;

/// A command failure, already sorted into its exit-code class.
#[derive(Debug)]
enum CliError {
    Usage(String),
    Domain(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Domain(_) => EXIT_DOMAIN,
            CliError::Io(_) => EXIT_IO,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Domain(m) | CliError::Io(m) => m,
        }
    }
}

fn usage(message: impl Into<String>) -> CliError {
    CliError::Usage(message.into())
}

fn domain(error: impl std::fmt::Display) -> CliError {
    CliError::Domain(error.to_string())
}

fn io_failure(what: &Path, error: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {}", what.display(), error))
}

// --- Config file ---

/// Defaults shared by all commands, loadable from a `key = value` file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliConfig {
    pub tracker_endpoints: Vec<Ipv4Addr>,
    pub lpd_port: u16,
    pub relay_port: u16,
    pub announce_interval_s: u64,
    pub geo_csv_path: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl Default for CliConfig {
    fn default() -> Self {
        let dissector = DissectorConfig::default();
        CliConfig {
            tracker_endpoints: dissector.tracker_ips,
            lpd_port: dissector.lpd_port,
            relay_port: dissector.relay_port,
            announce_interval_s: 600,
            geo_csv_path: None,
            output_dir: None,
            seed: None,
        }
    }
}

impl CliConfig {
    /// Parses `key = value` lines; `#` comments and blank lines are skipped.
    pub fn parse(text: &str) -> Result<CliConfig, String> {
        let mut config = CliConfig::default();
        for (index, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let number = index + 1;
            let Some((key, value)) = line.split_once('=') else {
                return Err(format!("config line {number}: expected key = value"));
            };
            let (key, value) = (key.trim(), value.trim());
            let bad = |reason: &str| format!("config line {number}: {reason}");
            match key {
                "tracker_endpoints" => {
                    let mut ips = Vec::new();
                    for piece in value.split(',') {
                        let piece = piece.trim();
                        if piece.is_empty() {
                            continue;
                        }
                        let ip_text = piece.split(':').next().unwrap_or(piece);
                        let ip: Ipv4Addr = ip_text
                            .parse()
                            .map_err(|_| bad(&format!("bad tracker endpoint '{piece}'")))?;
                        ips.push(ip);
                    }
                    config.tracker_endpoints = ips;
                }
                "lpd_port" => config.lpd_port = parse_port(value).map_err(|e| bad(&e))?,
                "relay_port" => config.relay_port = parse_port(value).map_err(|e| bad(&e))?,
                "announce_interval_s" => {
                    let interval: u64 = value
                        .parse()
                        .map_err(|_| bad("announce_interval_s must be an integer"))?;
                    if interval == 0 {
                        return Err(bad("announce_interval_s must be at least 1"));
                    }
                    config.announce_interval_s = interval;
                }
                "geo_csv_path" => config.geo_csv_path = Some(PathBuf::from(value)),
                "output_dir" => config.output_dir = Some(PathBuf::from(value)),
                "seed" => {
                    config.seed =
                        Some(value.parse().map_err(|_| bad("seed must be an integer"))?)
                }
                other => return Err(bad(&format!("unknown key '{other}'"))),
            }
        }
        Ok(config)
    }

    fn dissector_config(&self) -> DissectorConfig {
        DissectorConfig {
            tracker_ips: self.tracker_endpoints.clone(),
            lpd_port: self.lpd_port,
            relay_port: self.relay_port,
        }
    }
}

fn parse_port(value: &str) -> Result<u16, String> {
    let port: u16 = value
        .parse()
        .map_err(|_| format!("port '{value}' must be an integer in 1-65535"))?;
    if port == 0 {
        return Err("port must not be 0".to_string());
    }
    Ok(port)
}

fn load_config(path: Option<&Path>) -> Result<CliConfig, CliError> {
    let Some(path) = path else {
        return Ok(CliConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    CliConfig::parse(&text).map_err(CliError::Domain)
}

// --- Command grammar ---

#[derive(Parser)]
#[command(
    name = "syncprobe",
    version,
    about = "Forensic toolkit for BitTorrent Sync discovery traffic"
)]
struct Cli {
    /// Config file with key = value defaults; flags win over it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Directory that receives generated files.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify, generate, and derive access keys.
    #[command(subcommand)]
    Key(KeyCommand),
    /// Parse and format invitation links.
    #[command(subcommand)]
    Link(LinkCommand),
    /// Classify a capture file, extract share ids, reconstruct flows.
    Dissect(DissectArgs),
    /// Run a scenario and write its event trace and capture.
    Simulate(SimulateArgs),
    /// Investigate one share over a simulated network.
    Crawl(CrawlArgs),
}

#[derive(Subcommand)]
enum KeyCommand {
    /// Print the permission class of a display key.
    Classify { key: String },
    /// Generate a read-write key.
    Gen {
        /// Deterministic generation seed; omitted means OS entropy.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Derive the read-only key belonging to a read-write key.
    DeriveRo { key: String },
    /// Derive the one-time key belonging to a read-write or read-only key.
    DeriveOt { key: String },
    /// Print the 20-byte lookup hash of a key as 40 hex characters.
    ShareId { key: String },
}

#[derive(Subcommand)]
enum LinkCommand {
    /// Split an invitation URL into its fields.
    Parse { url: String },
    /// Build a canonical invitation URL from field values.
    Format(LinkFormatArgs),
}

#[derive(Args)]
struct LinkFormatArgs {
    /// Folder name (parameter f).
    #[arg(long)]
    folder: String,
    /// Base32 share id (parameter s).
    #[arg(long)]
    share_b32: String,
    /// One-time key (parameter i).
    #[arg(long)]
    one_time_key: String,
    /// Size hint (parameter sz).
    #[arg(long)]
    size_hint: Option<String>,
    /// Server peer id (parameter p).
    #[arg(long)]
    server_peer_id: Option<String>,
    /// Expiry as unix seconds (parameter e).
    #[arg(long)]
    expiry: Option<i64>,
    /// Protocol version (parameter v).
    #[arg(long)]
    version: Option<String>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    /// Text lines: epoch_us src dst transport hex-payload.
    Hexdump,
    /// Binary SPB1 frame records.
    Raw,
}

#[derive(Args)]
struct DissectArgs {
    /// Capture file to analyse.
    capture: PathBuf,
    /// Input format; sniffed from the file contents when omitted.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Restrict the classified listing to one classification label.
    #[arg(long, value_name = "LABEL")]
    only: Option<String>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario file, or preset:NAME for a shipped scenario.
    scenario: String,
    /// Override the scenario duration in simulated seconds.
    #[arg(long, value_name = "SECONDS")]
    duration_s: Option<u64>,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct CrawlArgs {
    /// Share to investigate: 40-hex id, *.db name, display key, or link.
    input: String,
    /// Scenario file or preset:NAME providing the network under study.
    #[arg(long, value_name = "SCENARIO")]
    scenario: String,
    /// Comma-separated discovery sources (tracker,lpd,dht,predefined,pex).
    #[arg(long, value_name = "LIST")]
    sources: Option<String>,
    /// How many peer-list snapshots to take.
    #[arg(long, default_value_t = 2)]
    snapshots: u32,
    /// Simulated seconds between snapshots; default is the announce interval.
    #[arg(long, value_name = "SECONDS")]
    interval_s: Option<u64>,
    /// Simulated seconds to run before the first snapshot.
    #[arg(long, default_value_t = 120, value_name = "SECONDS")]
    warmup_s: u64,
    /// Per-source query budget in simulated seconds.
    #[arg(long, default_value_t = SOURCE_DEADLINE_S, value_name = "SECONDS")]
    deadline_s: u64,
    /// CSV of ip_prefix,country,city rows for address attribution.
    #[arg(long, value_name = "PATH")]
    geo_csv: Option<PathBuf>,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

// --- Entry point ---

/// Parses and runs a full command line; returns the process exit code.
///
/// All output goes to `out`, so callers can capture it; `args` must include
/// the binary name in position zero.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            let _ = out.write_all(rendered.as_bytes());
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match dispatch(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(out, "error: {}", e.message());
            e.code()
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let config = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Key(cmd) => cmd_key(cmd, &config, out),
        Command::Link(cmd) => cmd_link(cmd, out),
        Command::Dissect(args) => cmd_dissect(args, &config, cli.out.as_deref(), out),
        Command::Simulate(args) => cmd_simulate(args, &config, cli.out.as_deref(), out),
        Command::Crawl(args) => cmd_crawl(args, &config, cli.out.as_deref(), out),
    }
}

fn resolve_out_dir(flag: Option<&Path>, config: &CliConfig) -> Result<PathBuf, CliError> {
    let dir = flag
        .map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| io_failure(&dir, e))?;
    Ok(dir)
}

fn emit(out: &mut dyn Write, line: &str) -> Result<(), CliError> {
    writeln!(out, "{line}").map_err(|e| CliError::Io(format!("stdout: {e}")))
}

fn write_artifact(
    dir: &Path,
    name: &str,
    bytes: &[u8],
    out: &mut dyn Write,
) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| io_failure(&path, e))?;
    emit(out, &format!("wrote {}", path.display()))?;
    Ok(path)
}

// --- key ---

fn cmd_key(cmd: &KeyCommand, config: &CliConfig, out: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        KeyCommand::Classify { key } => {
            if key.is_empty() {
                return Err(usage("key must not be empty"));
            }
            emit(out, classify_key(key).label())
        }
        KeyCommand::Gen { seed } => {
            let key = match seed.or(config.seed) {
                Some(seed) => generate_rw_key(&mut ChaCha8Rng::seed_from_u64(seed)),
                None => generate_rw_key_from_os_entropy().map_err(domain)?,
            };
            emit(out, key.display())
        }
        KeyCommand::DeriveRo { key } => {
            let key = AccessKey::from_display(key).map_err(domain)?;
            emit(out, derive_read_only(&key).map_err(domain)?.display())
        }
        KeyCommand::DeriveOt { key } => {
            let key = AccessKey::from_display(key).map_err(domain)?;
            emit(out, derive_one_time(&key).map_err(domain)?.display())
        }
        KeyCommand::ShareId { key } => {
            let key = AccessKey::from_display(key).map_err(domain)?;
            emit(out, &share_id_from_key(&key).to_string())
        }
    }
}

// --- link ---

fn cmd_link(cmd: &LinkCommand, out: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        LinkCommand::Parse { url } => {
            let link = parse_share_link(url).map_err(domain)?;
            emit(out, &format!("folder: {}", link.folder_name))?;
            if let Some(sz) = &link.size_hint {
                emit(out, &format!("size_hint: {sz}"))?;
            }
            emit(out, &format!("share_id_b32: {}", link.share_id_b32))?;
            emit(out, &format!("one_time_key: {}", link.one_time_key))?;
            if let Some(p) = &link.server_peer_id {
                emit(out, &format!("server_peer_id: {p}"))?;
            }
            if let Some(e) = link.expiry {
                emit(out, &format!("expiry: {e}"))?;
            }
            if let Some(v) = &link.version {
                emit(out, &format!("version: {v}"))?;
            }
            Ok(())
        }
        LinkCommand::Format(args) => {
            let link = ShareLink {
                folder_name: args.folder.clone(),
                size_hint: args.size_hint.clone(),
                share_id_b32: args.share_b32.clone(),
                one_time_key: args.one_time_key.clone(),
                server_peer_id: args.server_peer_id.clone(),
                expiry: args.expiry,
                version: args.version.clone(),
            };
            emit(out, &format_share_link(&link))
        }
    }
}

// --- dissect ---

const CLASSIFICATION_LABELS: [&str; 11] = [
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

fn cmd_dissect(
    args: &DissectArgs,
    config: &CliConfig,
    out_flag: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    if let Some(label) = &args.only {
        if !CLASSIFICATION_LABELS.contains(&label.as_str()) {
            return Err(usage(format!(
                "unknown classification label '{label}' (expected one of {})",
                CLASSIFICATION_LABELS.join(", ")
            )));
        }
    }
    let format = match args.format {
        Some(FormatArg::Hexdump) => CaptureFormat::HexdumpLines,
        Some(FormatArg::Raw) => CaptureFormat::RawFrames,
        None => sniff_format(&args.capture)?,
    };
    let records = read_capture(&args.capture, format).map_err(|e| match e {
        CaptureError::Io(inner) => io_failure(&args.capture, inner),
        other => domain(other),
    })?;
    let out_dir = resolve_out_dir(out_flag, config)?;
    let record_count = records.len();
    let packets = classify_stream(records, &config.dissector_config());
    let share_ids = extract_share_ids(&packets);
    let flows = reconstruct_flows(&packets);

    let format_name = match format {
        CaptureFormat::HexdumpLines => "hexdump",
        CaptureFormat::RawFrames => "raw",
    };
    emit(
        out,
        &format!(
            "{} records from {} ({format_name})",
            record_count,
            args.capture.display()
        ),
    )?;
    let mut counts: Vec<(&str, usize)> = Vec::new();
    for packet in &packets {
        let label = packet.classification.label();
        match counts.iter_mut().find(|(l, _)| *l == label) {
            Some((_, n)) => *n += 1,
            None => counts.push((label, 1)),
        }
    }
    counts.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let rendered: Vec<String> = counts.iter().map(|(l, n)| format!("{l} {n}")).collect();
    emit(out, &format!("classifications: {}", rendered.join(", ")))?;
    emit(
        out,
        &format!("flows: {}, share ids: {}", flows.len(), share_ids.len()),
    )?;

    let stem = args
        .capture
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "capture".to_string());
    write_artifact(
        &out_dir,
        &format!("dissect-{stem}.classified.txt"),
        render_classified(&packets, args.only.as_deref()).as_bytes(),
        out,
    )?;
    write_artifact(
        &out_dir,
        &format!("dissect-{stem}.flows.txt"),
        render_flows_text(&flows).as_bytes(),
        out,
    )?;
    write_artifact(
        &out_dir,
        &format!("dissect-{stem}.flows.json"),
        render_flows_json(&flows).as_bytes(),
        out,
    )?;
    write_artifact(
        &out_dir,
        &format!("dissect-{stem}.share-ids.txt"),
        render_share_ids(&share_ids).as_bytes(),
        out,
    )?;
    Ok(())
}

fn sniff_format(path: &Path) -> Result<CaptureFormat, CliError> {
    use std::io::Read;
    let file = fs::File::open(path).map_err(|e| io_failure(path, e))?;
    let mut magic = Vec::with_capacity(4);
    file.take(4)
        .read_to_end(&mut magic)
        .map_err(|e| io_failure(path, e))?;
    if magic.as_slice() == RAW_FRAMES_MAGIC {
        Ok(CaptureFormat::RawFrames)
    } else {
        Ok(CaptureFormat::HexdumpLines)
    }
}

fn id_prefix(bytes: &[u8]) -> String {
    hex::encode(&bytes[..bytes.len().min(8)])
}

fn describe_decoded(message: &SyncMessage) -> String {
    match message {
        SyncMessage::GetPeers(m) => format!(
            "share={} peer={} local={}",
            hex::encode(m.share_id.as_bytes()),
            id_prefix(&m.peer_id.0),
            m.local_addr
        ),
        SyncMessage::PeersResponse(m) => format!(
            "share={} peers={} external={}",
            m.share_id,
            m.peers.len(),
            m.external_addr
        ),
        SyncMessage::Ping(m) => format!(
            "share={} peer={} port={}",
            hex::encode(m.share_id.as_bytes()),
            id_prefix(&m.peer_id.0),
            m.port
        ),
        SyncMessage::RelayInit(m) => format!(
            "remote={} local={}",
            id_prefix(&m.remote_peer_id.0),
            id_prefix(&m.local_peer_id.0)
        ),
        SyncMessage::RelayNonce(m) => {
            format!("share={} nonce={}", m.share_id, hex::encode(m.nonce))
        }
    }
}

fn render_classified(packets: &[ClassifiedPacket], only: Option<&str>) -> String {
    let mut text = String::new();
    for (index, packet) in packets.iter().enumerate() {
        let label = packet.classification.label();
        if only.is_some_and(|wanted| wanted != label) {
            continue;
        }
        let hints: Vec<&str> = packet.role_hints.iter().map(|h| h.label()).collect();
        let hint_text = if hints.is_empty() {
            String::new()
        } else {
            format!(" [{}]", hints.join(","))
        };
        let detail = packet
            .decoded
            .as_ref()
            .map(|m| format!("  {}", describe_decoded(m)))
            .unwrap_or_default();
        let _ = writeln!(
            text,
            "{index:>6}  {}  {:<21} -> {:<21}  {}  {label:<14} {:>6}B{hint_text}{detail}",
            iso8601(packet.record.timestamp_us),
            packet.record.src.to_string(),
            packet.record.dst.to_string(),
            packet.record.transport.label(),
            packet.record.payload.len(),
        );
    }
    text
}

fn render_flows_text(flows: &[FlowSummary]) -> String {
    let mut text = String::new();
    let _ = writeln!(
        text,
        "{:<21} {:<21} {:<5} {:>7}  {:<27} {:<27} {}",
        "Endpoint A", "Endpoint B", "Proto", "Packets", "First", "Last", "Notes"
    );
    for flow in flows {
        let mut notes: Vec<String> = flow.role_hints.iter().map(|h| h.label().to_string()).collect();
        for id in &flow.share_ids {
            notes.push(format!("share:{}", id_prefix(id.as_bytes())));
        }
        let _ = writeln!(
            text,
            "{:<21} {:<21} {:<5} {:>7}  {:<27} {:<27} {}",
            flow.endpoint_a.to_string(),
            flow.endpoint_b.to_string(),
            flow.transport.label(),
            flow.total_packets,
            iso8601(flow.first_us),
            iso8601(flow.last_us),
            notes.join(",")
        );
    }
    text
}

fn render_flows_json(flows: &[FlowSummary]) -> String {
    let values: Vec<serde_json::Value> = flows
        .iter()
        .map(|flow| {
            serde_json::json!({
                "endpoint_a": flow.endpoint_a.to_string(),
                "endpoint_b": flow.endpoint_b.to_string(),
                "transport": flow.transport.label(),
                "first_us": flow.first_us,
                "last_us": flow.last_us,
                "total_packets": flow.total_packets,
                "packet_counts": flow
                    .packet_counts
                    .iter()
                    .map(|(label, count)| ((*label).to_string(), serde_json::json!(count)))
                    .collect::<serde_json::Map<String, serde_json::Value>>(),
                "share_ids": flow
                    .share_ids
                    .iter()
                    .map(|id| hex::encode(id.as_bytes()))
                    .collect::<Vec<String>>(),
                "peer_ids": flow
                    .peer_ids
                    .iter()
                    .map(|id| id.to_string())
                    .collect::<Vec<String>>(),
                "role_hints": flow
                    .role_hints
                    .iter()
                    .map(|h| h.label())
                    .collect::<Vec<&str>>(),
            })
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&serde_json::Value::Array(values))
        .expect("flow summaries serialize");
    text.push('\n');
    text
}

fn render_share_ids(ids: &[ExtractedShareId]) -> String {
    let mut text = String::new();
    for entry in ids {
        let _ = writeln!(
            text,
            "{} width={} first_seen={} packets={}",
            hex::encode(entry.id.as_bytes()),
            entry.id.width(),
            iso8601(entry.first_seen_us),
            entry.packet_refs.len()
        );
    }
    text
}

// --- simulate ---

fn load_scenario(spec: &str) -> Result<ScenarioConfig, CliError> {
    if let Some(name) = spec.strip_prefix("preset:") {
        return syncprobe_core::simnet::scenario::preset(name).map_err(|_| {
            CliError::Domain(format!(
                "unknown preset '{name}' (shipped presets: {})",
                PRESET_NAMES.join(", ")
            ))
        });
    }
    let path = Path::new(spec);
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    ScenarioConfig::from_toml_str(&text).map_err(domain)
}

fn build_world(
    spec: &str,
    seed_flag: Option<u64>,
    duration_flag: Option<u64>,
    config: &CliConfig,
) -> Result<SimWorld, CliError> {
    let mut scenario_config = load_scenario(spec)?;
    if let Some(seed) = seed_flag.or(config.seed) {
        scenario_config.seed = seed;
    }
    if let Some(duration) = duration_flag {
        scenario_config.duration_s = duration;
    }
    let scenario = Scenario::build(&scenario_config).map_err(domain)?;
    Ok(SimWorld::build(scenario))
}

fn cmd_simulate(
    args: &SimulateArgs,
    config: &CliConfig,
    out_flag: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let out_dir = resolve_out_dir(out_flag, config)?;
    let mut world = build_world(&args.scenario, args.seed, args.duration_s, config)?;
    let (name, seed, duration_s) = {
        let s = world.scenario();
        (s.name.clone(), s.seed, s.duration_s)
    };
    if duration_s > 0 {
        world.run_to_end();
    }

    emit(
        out,
        &format!("scenario {name} (seed {seed}, duration {duration_s}s)"),
    )?;
    emit(
        out,
        &format!(
            "peers {}, shares {}, scripted events {}",
            world.scenario().peers.len(),
            world.scenario().shares.len(),
            world.scenario().events.len()
        ),
    )?;
    emit(
        out,
        &format!(
            "capture records {}, trace lines {}",
            world.capture().len(),
            world.trace_lines().len()
        ),
    )?;
    for (index, session) in world.relay_sessions().iter().enumerate() {
        emit(
            out,
            &format!(
                "relay session {index}: {} (share {})",
                session.state().label(),
                session.share
            ),
        )?;
    }

    let mut trace = format!("# scenario {name} seed {seed} duration_s {duration_s}\n");
    for line in world.trace_lines() {
        trace.push_str(line);
        trace.push('\n');
    }
    write_artifact(
        &out_dir,
        &format!("sim-{name}-{seed}.trace.log"),
        trace.as_bytes(),
        out,
    )?;

    let mut capture_bytes = Vec::new();
    write_capture(world.capture(), CaptureFormat::RawFrames, &mut capture_bytes)
        .map_err(|e| CliError::Io(format!("encoding capture: {e}")))?;
    write_artifact(
        &out_dir,
        &format!("sim-{name}-{seed}.capture.spb"),
        &capture_bytes,
        out,
    )?;
    Ok(())
}

// --- crawl ---

fn parse_sources(flag: Option<&str>) -> Result<BTreeSet<Source>, CliError> {
    let Some(text) = flag else {
        return Ok(Source::ALL.into_iter().collect());
    };
    let mut sources = BTreeSet::new();
    for piece in text.split(',') {
        let piece = piece.trim();
        if piece.is_empty() {
            continue;
        }
        let source = Source::from_label(piece).ok_or_else(|| {
            usage(format!(
                "unknown source '{piece}' (expected tracker, lpd, dht, predefined, pex)"
            ))
        })?;
        sources.insert(source);
    }
    if sources.is_empty() {
        return Err(usage("at least one discovery source must be enabled"));
    }
    Ok(sources)
}

fn outcome_line(outcome: &SourceOutcome) -> String {
    match &outcome.error {
        Some(reason) => format!("  {}: failed: {reason}", outcome.source),
        None => format!("  {}: {} records", outcome.source, outcome.records),
    }
}

fn cmd_crawl(
    args: &CrawlArgs,
    config: &CliConfig,
    out_flag: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    if args.snapshots == 0 {
        return Err(usage("--snapshots must be at least 1"));
    }
    let sources = parse_sources(args.sources.as_deref())?;
    let interval_s = args.interval_s.unwrap_or(config.announce_interval_s);
    let geo_csv = args.geo_csv.clone().or_else(|| config.geo_csv_path.clone());

    let (share, lookup) = derive_lookup_hash(&args.input).map_err(domain)?;
    emit(out, &format!("lookup hash {share} ({})", lookup.describe()))?;
    let share_hex = share.to_string();
    let share8 = &share_hex[..8];
    let out_dir = resolve_out_dir(out_flag, config)?;

    let mut world = build_world(&args.scenario, args.seed, None, config)?;
    let start = world.now_unix_micros();
    world.advance_to(start + args.warmup_s * 1_000_000);

    let mut snapshots: Vec<Snapshot> = Vec::new();
    let mut source_outcomes: Vec<Vec<SourceOutcome>> = Vec::new();
    for index in 0..args.snapshots {
        if let Some(previous) = snapshots.last() {
            world.advance_to(previous.taken_at + interval_s * 1_000_000);
        }
        let (snapshot, outcomes) =
            enumerate_peers(&mut world, &share, &sources, args.deadline_s).map_err(domain)?;
        emit(
            out,
            &format!(
                "snapshot {}: {} peers at {}",
                index + 1,
                snapshot.peer_ids().len(),
                iso8601(snapshot.taken_at)
            ),
        )?;
        for outcome in &outcomes {
            emit(out, &outcome_line(outcome))?;
        }
        let mut json = serde_json::to_string_pretty(&snapshot_json(&snapshot))
            .expect("snapshot serializes");
        json.push('\n');
        write_artifact(
            &out_dir,
            &format!(
                "{share8}-snap{}-{}.json",
                index + 1,
                snapshot.taken_at / 1_000_000
            ),
            json.as_bytes(),
            out,
        )?;
        snapshots.push(snapshot);
        source_outcomes.push(outcomes);
    }

    let churn = if snapshots.len() >= 2 {
        let report = diff_snapshots(&snapshots[0], snapshots.last().expect("non-empty"))
            .map_err(domain)?;
        emit(
            out,
            &format!(
                "churn: {} (departed {}, joined {}, retained {})",
                report.rendered_rate(),
                report.departed.len(),
                report.joined.len(),
                report.retained.len()
            ),
        )?;
        Some(report)
    } else {
        None
    };

    let later = if snapshots.len() >= 2 {
        snapshots.last()
    } else {
        None
    };
    let findings = detect_findings(&snapshots[0], later);
    if findings.is_empty() {
        emit(out, "findings: none")?;
    } else {
        let rendered: Vec<String> = findings
            .iter()
            .map(|f| f.kind.label().to_string())
            .collect();
        emit(out, &format!("findings: {}", rendered.join(", ")))?;
    }

    let last = snapshots.last().expect("at least one snapshot");
    let geo = match &geo_csv {
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| io_failure(path, e))?;
            let provider =
                CsvGeoProvider::from_reader(BufReader::new(file)).map_err(|e| io_failure(path, e))?;
            let records = geolocate(last, &provider);
            emit(out, &format!("geolocation: {} addresses attributed", records.len()))?;
            records
        }
        None => Vec::new(),
    };

    let recovery = match world.manifest_for(&share) {
        Some(manifest) => {
            let recovered = retrieve_content(&mut world, &manifest, last);
            for file in &recovered {
                emit(
                    out,
                    &format!("recovery: {}: {}", file.name, file.status.describe()),
                )?;
            }
            recovered
        }
        None => {
            emit(out, "recovery: no content manifest for this share")?;
            Vec::new()
        }
    };
    let report_stamp = last.taken_at / 1_000_000;
    for file in &recovery {
        if let Some(bytes) = &file.bytes {
            write_artifact(
                &out_dir,
                &format!("{share8}-recovered-{report_stamp}-{}", file.name),
                bytes,
                out,
            )?;
        }
    }

    let report = InvestigationReport {
        share,
        lookup_note: lookup.describe(),
        sources: sources.iter().copied().collect(),
        snapshots,
        source_outcomes,
        churn,
        findings,
        geo,
        recovery,
    };
    let mut json =
        serde_json::to_string_pretty(&report_json(&report)).expect("report serializes");
    json.push('\n');
    write_artifact(
        &out_dir,
        &format!("{share8}-report-{report_stamp}.json"),
        json.as_bytes(),
        out,
    )?;
    write_artifact(
        &out_dir,
        &format!("{share8}-report-{report_stamp}.txt"),
        report_text(&report).as_bytes(),
        out,
    )?;
    Ok(())
}

/// Runs a command line given as string slices, capturing output; test-path
/// twin of [`run`].
pub fn run_for_test(args: &[&str], out: &mut Vec<u8>) -> u8 {
    run(args.iter().map(|s| s.to_string()), out)
}

//! Self-describing capture file formats.
//!
//! Two formats cover the evidence path without a packet-capture library
//! dependency: a line-oriented hexdump for hand-written fixtures and a
//! length-prefixed binary form for simulator output. A converter from pcap
//! is future work. Formats are declared by the caller, never sniffed.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::SocketAddrV4;
use std::path::Path;

use thiserror::Error;

use super::CaptureRecord;
use crate::wire::Transport;

/// Magic leading a binary capture file.
pub const RAW_FRAMES_MAGIC: &[u8; 4] = b"SPB1";

/// On-disk capture formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaptureFormat {
    /// UTF-8 lines `epoch_us SRC_IP:PORT DST_IP:PORT UDP|TCP HEXPAYLOAD`,
    /// with `#` comment lines and blank lines allowed.
    HexdumpLines,
    /// Magic `SPB1`, then repeated records: u64 timestamp, 6-byte source,
    /// 6-byte destination, u8 transport (0 UDP, 1 TCP), u32 payload length,
    /// payload. All integers big-endian.
    RawFrames,
}

#[derive(Debug, Error)]
pub enum CaptureError {
    #[error("bad capture line {line}: {reason}")]
    BadLine { line: usize, reason: String },
    #[error("bad capture data at offset {offset}: {reason}")]
    BadOffset { offset: u64, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Reads a whole capture file in the declared format.
pub fn read_capture(path: &Path, format: CaptureFormat) -> Result<Vec<CaptureRecord>, CaptureError> {
    let file = BufReader::new(File::open(path)?);
    match format {
        CaptureFormat::HexdumpLines => parse_hexdump(file),
        CaptureFormat::RawFrames => parse_raw_frames(file),
    }
}

/// Writes a capture in the given format.
pub fn write_capture(
    records: &[CaptureRecord],
    format: CaptureFormat,
    out: &mut impl Write,
) -> io::Result<()> {
    match format {
        CaptureFormat::HexdumpLines => write_hexdump(records, out),
        CaptureFormat::RawFrames => write_raw_frames(records, out),
    }
}

/// Parses hexdump lines from a reader.
pub fn parse_hexdump(reader: impl BufRead) -> Result<Vec<CaptureRecord>, CaptureError> {
    let mut records = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let number = index + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let bad = |reason: String| CaptureError::BadLine { line: number, reason };
        let mut fields = trimmed.split_whitespace();
        let timestamp_us = fields
            .next()
            .ok_or_else(|| bad("missing timestamp".into()))?
            .parse::<u64>()
            .map_err(|_| bad("timestamp is not a decimal microsecond count".into()))?;
        let src = parse_endpoint(fields.next(), "source").map_err(&bad)?;
        let dst = parse_endpoint(fields.next(), "destination").map_err(&bad)?;
        let transport = match fields.next() {
            Some("UDP") => Transport::Udp,
            Some("TCP") => Transport::Tcp,
            Some(other) => return Err(bad(format!("transport must be UDP or TCP, got {other:?}"))),
            None => return Err(bad("missing transport".into())),
        };
        let payload = match fields.next() {
            None => Vec::new(),
            Some(hex_text) => {
                hex::decode(hex_text).map_err(|_| bad("payload is not hex".into()))?
            }
        };
        if fields.next().is_some() {
            return Err(bad("unexpected trailing fields".into()));
        }
        records.push(CaptureRecord {
            timestamp_us,
            src,
            dst,
            transport,
            payload,
        });
    }
    Ok(records)
}

fn parse_endpoint(token: Option<&str>, role: &str) -> Result<SocketAddrV4, String> {
    token
        .ok_or_else(|| format!("missing {role} endpoint"))?
        .parse::<SocketAddrV4>()
        .map_err(|_| format!("{role} endpoint is not IPv4:PORT"))
}

/// Writes records as hexdump lines.
pub fn write_hexdump(records: &[CaptureRecord], out: &mut impl Write) -> io::Result<()> {
    for r in records {
        if r.payload.is_empty() {
            writeln!(out, "{} {} {} {}", r.timestamp_us, r.src, r.dst, r.transport.label())?;
        } else {
            writeln!(
                out,
                "{} {} {} {} {}",
                r.timestamp_us,
                r.src,
                r.dst,
                r.transport.label(),
                hex::encode(&r.payload)
            )?;
        }
    }
    Ok(())
}

/// Parses the binary frame format from a reader.
pub fn parse_raw_frames(mut reader: impl Read) -> Result<Vec<CaptureRecord>, CaptureError> {
    let mut magic = [0u8; 4];
    read_fully(&mut reader, &mut magic, 0, "file magic")?;
    if &magic != RAW_FRAMES_MAGIC {
        return Err(CaptureError::BadOffset {
            offset: 0,
            reason: "missing SPB1 magic".into(),
        });
    }
    let mut records = Vec::new();
    let mut offset: u64 = 4;
    loop {
        let record_start = offset;
        let mut head = [0u8; 25];
        let got = read_up_to(&mut reader, &mut head)?;
        if got == 0 {
            return Ok(records);
        }
        if got < head.len() {
            return Err(CaptureError::BadOffset {
                offset: record_start,
                reason: "truncated record header".into(),
            });
        }
        offset += head.len() as u64;
        let timestamp_us = u64::from_be_bytes(head[0..8].try_into().unwrap());
        let src = crate::wire::message::unpack_addr(&head[8..14], "src").unwrap();
        let dst = crate::wire::message::unpack_addr(&head[14..20], "dst").unwrap();
        let transport = match head[20] {
            0 => Transport::Udp,
            1 => Transport::Tcp,
            other => {
                return Err(CaptureError::BadOffset {
                    offset: record_start,
                    reason: format!("invalid transport tag {other}"),
                })
            }
        };
        let len = u32::from_be_bytes(head[21..25].try_into().unwrap()) as usize;
        let mut payload = vec![0u8; len];
        read_fully(&mut reader, &mut payload, record_start, "record payload")?;
        offset += len as u64;
        records.push(CaptureRecord {
            timestamp_us,
            src,
            dst,
            transport,
            payload,
        });
    }
}

/// Writes records in the binary frame format.
pub fn write_raw_frames(records: &[CaptureRecord], out: &mut impl Write) -> io::Result<()> {
    out.write_all(RAW_FRAMES_MAGIC)?;
    for r in records {
        out.write_all(&r.timestamp_us.to_be_bytes())?;
        out.write_all(&crate::wire::message::pack_addr(&r.src))?;
        out.write_all(&crate::wire::message::pack_addr(&r.dst))?;
        out.write_all(&[match r.transport {
            Transport::Udp => 0,
            Transport::Tcp => 1,
        }])?;
        out.write_all(&(r.payload.len() as u32).to_be_bytes())?;
        out.write_all(&r.payload)?;
    }
    Ok(())
}

fn read_fully(
    reader: &mut impl Read,
    buf: &mut [u8],
    record_offset: u64,
    what: &str,
) -> Result<(), CaptureError> {
    reader.read_exact(buf).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            CaptureError::BadOffset {
                offset: record_offset,
                reason: format!("truncated {what}"),
            }
        } else {
            CaptureError::Io(e)
        }
    })
}

fn read_up_to(reader: &mut impl Read, buf: &mut [u8]) -> Result<usize, CaptureError> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(CaptureError::Io(e)),
        }
    }
    Ok(filled)
}

//! The 20-byte big-endian transport header framing UDP discovery traffic.

use super::WireError;

/// Encoded header length in bytes.
pub const UTP_HEADER_LEN: usize = 20;

/// Packet type carried in the header's first nibble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UtpPacketType {
    Data = 0,
    Fin = 1,
    State = 2,
    Rst = 3,
    Syn = 4,
}

impl UtpPacketType {
    /// Maps a first-nibble value back to a packet type.
    pub fn from_nibble(nibble: u8) -> Result<UtpPacketType, WireError> {
        match nibble {
            0 => Ok(UtpPacketType::Data),
            1 => Ok(UtpPacketType::Fin),
            2 => Ok(UtpPacketType::State),
            3 => Ok(UtpPacketType::Rst),
            4 => Ok(UtpPacketType::Syn),
            other => Err(WireError::UnknownPacketType(other)),
        }
    }
}

/// Transport header preceding every UDP frame of the protocol.
///
/// Wire layout, all fields big-endian: one byte `(type << 4) | version`, one
/// extension byte, u16 connection id, u32 timestamp, u32 timestamp
/// difference, u32 window size, u16 sequence number, u16 ack number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UtpHeader {
    pub packet_type: UtpPacketType,
    pub version: u8,
    pub extension: u8,
    pub connection_id: u16,
    pub timestamp_us: u32,
    pub timestamp_diff_us: u32,
    pub window_size: u32,
    pub seq_nr: u16,
    pub ack_nr: u16,
}

impl UtpHeader {
    /// Header of the given type with version 1 and zeroed dynamic fields.
    pub fn new(packet_type: UtpPacketType) -> UtpHeader {
        UtpHeader {
            packet_type,
            version: 1,
            extension: 0,
            connection_id: 0,
            timestamp_us: 0,
            timestamp_diff_us: 0,
            window_size: 0,
            seq_nr: 0,
            ack_nr: 0,
        }
    }
}

/// Encodes a header to its 20-byte wire form.
pub fn encode_utp_header(h: &UtpHeader) -> [u8; UTP_HEADER_LEN] {
    let mut out = [0u8; UTP_HEADER_LEN];
    out[0] = ((h.packet_type as u8) << 4) | (h.version & 0x0f);
    out[1] = h.extension;
    out[2..4].copy_from_slice(&h.connection_id.to_be_bytes());
    out[4..8].copy_from_slice(&h.timestamp_us.to_be_bytes());
    out[8..12].copy_from_slice(&h.timestamp_diff_us.to_be_bytes());
    out[12..16].copy_from_slice(&h.window_size.to_be_bytes());
    out[16..18].copy_from_slice(&h.seq_nr.to_be_bytes());
    out[18..20].copy_from_slice(&h.ack_nr.to_be_bytes());
    out
}

/// Decodes the leading 20 bytes of `bytes` as a transport header.
pub fn decode_utp_header(bytes: &[u8]) -> Result<UtpHeader, WireError> {
    if bytes.len() < UTP_HEADER_LEN {
        return Err(WireError::TruncatedHeader);
    }
    let packet_type = UtpPacketType::from_nibble(bytes[0] >> 4)?;
    let version = bytes[0] & 0x0f;
    if version != 1 {
        return Err(WireError::UnsupportedVersion(version));
    }
    let u16_at = |i: usize| u16::from_be_bytes([bytes[i], bytes[i + 1]]);
    let u32_at = |i: usize| u32::from_be_bytes([bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]]);
    Ok(UtpHeader {
        packet_type,
        version,
        extension: bytes[1],
        connection_id: u16_at(2),
        timestamp_us: u32_at(4),
        timestamp_diff_us: u32_at(8),
        window_size: u32_at(12),
        seq_nr: u16_at(16),
        ack_nr: u16_at(18),
    })
}

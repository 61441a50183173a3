//! Framed wire protocol between Hammer and device daemons.
//!
//! ```text
//! magic "HMR1" | msg_type u8 | length u32 le | payload | crc32 u32 le
//! ```
//!
//! The CRC-32 (IEEE) covers the payload. Message type space is banded:
//! `0x0_` control, `0x1_` cast, `0x2_` runtime.

use std::io::{self, Read, Write};

use thiserror::Error;

use rune_core::crc32::crc32;

pub const WIRE_MAGIC: &[u8; 4] = b"HMR1";

/// Upload chunk limit, modeling a constrained link.
pub const MAX_CHUNK: usize = 4096;

/// Frames larger than this are rejected outright.
pub const MAX_FRAME_PAYLOAD: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum MsgType {
    // control
    Ping = 0x00,
    Pong = 0x01,
    Identify = 0x02,
    Identity = 0x03,
    Error = 0x0F,
    // cast
    CastBegin = 0x10,
    CastChunk = 0x11,
    CastFinish = 0x12,
    CastAccepted = 0x13,
    CastRejected = 0x14,
    // runtime
    Invoke = 0x20,
    InvokeResult = 0x21,
    Health = 0x22,
    HealthReport = 0x23,
    NoRune = 0x24,
}

impl MsgType {
    pub fn from_byte(b: u8) -> Option<MsgType> {
        use MsgType::*;
        Some(match b {
            0x00 => Ping,
            0x01 => Pong,
            0x02 => Identify,
            0x03 => Identity,
            0x0F => Error,
            0x10 => CastBegin,
            0x11 => CastChunk,
            0x12 => CastFinish,
            0x13 => CastAccepted,
            0x14 => CastRejected,
            0x20 => Invoke,
            0x21 => InvokeResult,
            0x22 => Health,
            0x23 => HealthReport,
            0x24 => NoRune,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub msg_type: MsgType,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(msg_type: MsgType, payload: Vec<u8>) -> Frame {
        Frame { msg_type, payload }
    }

    pub fn empty(msg_type: MsgType) -> Frame {
        Frame { msg_type, payload: Vec::new() }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(13 + self.payload.len());
        out.extend_from_slice(WIRE_MAGIC);
        out.push(self.msg_type as u8);
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.payload);
        out.extend_from_slice(&crc32(&self.payload).to_le_bytes());
        out
    }
}

#[derive(Debug, Error)]
pub enum WireError {
    #[error("bad frame magic")]
    BadMagic,
    #[error("unknown message type {0:#04x}")]
    UnknownType(u8),
    #[error("frame payload of {0} bytes exceeds limit")]
    Oversized(usize),
    #[error("frame checksum mismatch")]
    CrcMismatch,
    #[error("connection closed")]
    Closed,
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

pub fn write_frame(w: &mut dyn Write, frame: &Frame) -> Result<(), WireError> {
    w.write_all(&frame.to_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn read_frame(r: &mut dyn Read) -> Result<Frame, WireError> {
    let mut header = [0u8; 9];
    let mut filled = 0;
    while filled < header.len() {
        let n = r.read(&mut header[filled..])?;
        if n == 0 {
            return Err(WireError::Closed);
        }
        filled += n;
    }
    if &header[..4] != WIRE_MAGIC {
        return Err(WireError::BadMagic);
    }
    let msg_type = MsgType::from_byte(header[4]).ok_or(WireError::UnknownType(header[4]))?;
    let len = u32::from_le_bytes(header[5..9].try_into().unwrap()) as usize;
    if len > MAX_FRAME_PAYLOAD {
        return Err(WireError::Oversized(len));
    }
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload)?;
    let mut crc_bytes = [0u8; 4];
    r.read_exact(&mut crc_bytes)?;
    if crc32(&payload) != u32::from_le_bytes(crc_bytes) {
        return Err(WireError::CrcMismatch);
    }
    Ok(Frame { msg_type, payload })
}

// --- payload helpers -------------------------------------------------------

pub fn put_string(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u16).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

pub fn get_string(bytes: &[u8], pos: &mut usize) -> Option<String> {
    if *pos + 2 > bytes.len() {
        return None;
    }
    let len = u16::from_le_bytes(bytes[*pos..*pos + 2].try_into().unwrap()) as usize;
    *pos += 2;
    if *pos + len > bytes.len() {
        return None;
    }
    let s = String::from_utf8(bytes[*pos..*pos + len].to_vec()).ok()?;
    *pos += len;
    Some(s)
}

pub fn get_u32(bytes: &[u8], pos: &mut usize) -> Option<u32> {
    if *pos + 4 > bytes.len() {
        return None;
    }
    let v = u32::from_le_bytes(bytes[*pos..*pos + 4].try_into().unwrap());
    *pos += 4;
    Some(v)
}

pub fn get_u64(bytes: &[u8], pos: &mut usize) -> Option<u64> {
    if *pos + 8 > bytes.len() {
        return None;
    }
    let v = u64::from_le_bytes(bytes[*pos..*pos + 8].try_into().unwrap());
    *pos += 8;
    Some(v)
}

/// Reject reasons carried by [`MsgType::CastRejected`].
pub const REJECT_TRANSFER_CORRUPT: u8 = 1;
pub const REJECT_CAPABILITY_DENIED: u8 = 2;
pub const REJECT_BAD_BUNDLE: u8 = 3;
pub const REJECT_INSUFFICIENT_MEMORY: u8 = 4;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_round_trip() {
        let frame = Frame::new(MsgType::CastChunk, vec![1, 2, 3, 4]);
        let bytes = frame.to_bytes();
        assert_eq!(&bytes[..4], b"HMR1");
        let mut cursor = io::Cursor::new(bytes);
        assert_eq!(read_frame(&mut cursor).unwrap(), frame);
    }

    #[test]
    fn corrupt_payload_detected() {
        let frame = Frame::new(MsgType::CastChunk, vec![0u8; 64]);
        let mut bytes = frame.to_bytes();
        bytes[20] ^= 0x08;
        let mut cursor = io::Cursor::new(bytes);
        assert!(matches!(read_frame(&mut cursor), Err(WireError::CrcMismatch)));
    }

    #[test]
    fn bad_magic_detected() {
        let mut bytes = Frame::empty(MsgType::Ping).to_bytes();
        bytes[0] = b'X';
        let mut cursor = io::Cursor::new(bytes);
        assert!(matches!(read_frame(&mut cursor), Err(WireError::BadMagic)));
    }

    #[test]
    fn string_helpers_round_trip() {
        let mut buf = Vec::new();
        put_string(&mut buf, "Portenta H7");
        let mut pos = 0;
        assert_eq!(get_string(&buf, &mut pos).unwrap(), "Portenta H7");
        assert_eq!(pos, buf.len());
    }
}

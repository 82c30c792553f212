//! Length-prefixed, checksummed frames.
//!
//! ```text
//! "SPDL" | version u16 | type u8 | length u32 | payload | crc32 u32
//! ```
//!
//! All integers are big-endian; the CRC covers the type byte and payload.

use std::io::{self, Read, Write};

use thiserror::Error;

pub const FRAME_MAGIC: &[u8; 4] = b"SPDL";
pub const PROTOCOL_VERSION: u16 = 1;
/// Header bytes before the payload.
pub const HEADER_LEN: usize = 11;
/// Refuse frames larger than this before allocating.
pub const MAX_PAYLOAD: u32 = 1 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MessageType {
    Hello = 0x01,
    HelloAck = 0x02,
    KbTransfer = 0x03,
    KbAck = 0x04,
    Probe = 0x05,
    ProbeResult = 0x06,
    ExpandTask = 0x07,
    ExpandResult = 0x08,
    Terminate = 0x09,
    BestHypotheses = 0x0A,
    Error = 0x0F,
}

impl MessageType {
    pub const ALL: [MessageType; 11] = [
        MessageType::Hello,
        MessageType::HelloAck,
        MessageType::KbTransfer,
        MessageType::KbAck,
        MessageType::Probe,
        MessageType::ProbeResult,
        MessageType::ExpandTask,
        MessageType::ExpandResult,
        MessageType::Terminate,
        MessageType::BestHypotheses,
        MessageType::Error,
    ];

    pub fn from_u8(b: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|t| *t as u8 == b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub kind: MessageType,
    pub payload: Vec<u8>,
}

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("bad frame magic")]
    BadMagic,
    #[error("unsupported protocol version {0}")]
    Version(u16),
    #[error("unknown message type 0x{0:02x}")]
    UnknownType(u8),
    #[error("payload of {0} bytes exceeds the frame limit")]
    TooLarge(u32),
    #[error("frame checksum mismatch")]
    Checksum,
    #[error("frame truncated")]
    Truncated,
    #[error("{0} trailing bytes after frame")]
    Trailing(usize),
}

fn checksum(kind: u8, payload: &[u8]) -> u32 {
    let mut h = crc32fast::Hasher::new();
    h.update(&[kind]);
    h.update(payload);
    h.finalize()
}

impl Frame {
    pub fn new(kind: MessageType, payload: Vec<u8>) -> Self {
        Frame { kind, payload }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len() + 4);
        out.extend_from_slice(FRAME_MAGIC);
        out.extend_from_slice(&PROTOCOL_VERSION.to_be_bytes());
        out.push(self.kind as u8);
        out.extend_from_slice(&(self.payload.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.payload);
        out.extend_from_slice(&checksum(self.kind as u8, &self.payload).to_be_bytes());
        out
    }

    /// Decodes exactly one frame occupying all of `bytes`.
    pub fn decode(bytes: &[u8]) -> Result<Self, FrameError> {
        let mut cursor = bytes;
        let frame = read_frame(&mut cursor).map_err(|e| match e {
            FrameError::Io(err) if err.kind() == io::ErrorKind::UnexpectedEof => FrameError::Truncated,
            other => other,
        })?;
        if !cursor.is_empty() {
            return Err(FrameError::Trailing(cursor.len()));
        }
        Ok(frame)
    }
}

pub fn write_frame<W: Write>(w: &mut W, frame: &Frame) -> io::Result<()> {
    w.write_all(&frame.encode())?;
    w.flush()
}

pub fn read_frame<R: Read>(r: &mut R) -> Result<Frame, FrameError> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)?;
    if &header[..4] != FRAME_MAGIC {
        return Err(FrameError::BadMagic);
    }
    let version = u16::from_be_bytes([header[4], header[5]]);
    if version != PROTOCOL_VERSION {
        return Err(FrameError::Version(version));
    }
    let kind_byte = header[6];
    let len = u32::from_be_bytes([header[7], header[8], header[9], header[10]]);
    if len > MAX_PAYLOAD {
        return Err(FrameError::TooLarge(len));
    }
    let mut payload = vec![0u8; len as usize];
    r.read_exact(&mut payload)?;
    let mut crc = [0u8; 4];
    r.read_exact(&mut crc)?;
    if u32::from_be_bytes(crc) != checksum(kind_byte, &payload) {
        return Err(FrameError::Checksum);
    }
    let kind = MessageType::from_u8(kind_byte).ok_or(FrameError::UnknownType(kind_byte))?;
    Ok(Frame { kind, payload })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_frame_layout() {
        let bytes = Frame::new(MessageType::Terminate, Vec::new()).encode();
        assert_eq!(bytes.len(), HEADER_LEN + 4);
        assert_eq!(&bytes[..11], b"SPDL\x00\x01\x09\x00\x00\x00\x00");
        assert_eq!(&bytes[11..], &crc32fast::hash(&[0x09]).to_be_bytes());
    }

    #[test]
    fn header_errors() {
        let good = Frame::new(MessageType::Hello, vec![1, 2, 3]).encode();
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(Frame::decode(&bad), Err(FrameError::BadMagic)));
        let mut bad = good.clone();
        bad[5] = 2;
        assert!(matches!(Frame::decode(&bad), Err(FrameError::Version(2))));
        assert!(matches!(Frame::decode(&good[..good.len() - 1]), Err(FrameError::Truncated)));
        let mut long = good.clone();
        long.push(0);
        assert!(matches!(Frame::decode(&long), Err(FrameError::Trailing(1))));
    }
}

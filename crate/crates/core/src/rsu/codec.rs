//! Length-prefixed frames: `u32` LE payload length, a type byte, then the
//! JSON payload.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PROTOCOL_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 5;
/// Frames larger than this are refused before any allocation.
pub const MAX_PAYLOAD: usize = 1 << 20;

pub const TYPE_REQUEST: u8 = 1;
pub const TYPE_RESPONSE: u8 = 2;
pub const TYPE_ERROR: u8 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapRequest {
    pub protocol_version: u32,
    pub platoon_id: u64,
    pub leader_position: f64,
    pub leader_speed: f64,
    pub size: usize,
    pub current_gaps: Vec<f64>,
    /// Microseconds, sender's clock.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapResponse {
    pub platoon_id: u64,
    pub advised_gaps: Vec<f64>,
    /// Server-side computation time (µs).
    pub compute_delay: f64,
    /// Echo of the request timestamp.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorReply {
    /// Set when the failing request could be attributed to a platoon.
    pub platoon_id: Option<u64>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Request(GapRequest),
    Response(GapResponse),
    Error(ErrorReply),
}

impl Message {
    pub fn type_byte(&self) -> u8 {
        match self {
            Message::Request(_) => TYPE_REQUEST,
            Message::Response(_) => TYPE_RESPONSE,
            Message::Error(_) => TYPE_ERROR,
        }
    }
}

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("incomplete frame: need {needed} bytes, have {available}")]
    IncompleteFrame { needed: usize, available: usize },
    #[error("unsupported message type {0}")]
    UnsupportedType(u8),
    #[error("decode error: {0}")]
    Decode(String),
    #[error("frame of {0} bytes exceeds the limit")]
    TooLarge(usize),
}

fn payload(msg: &Message) -> Vec<u8> {
    let json = match msg {
        Message::Request(m) => serde_json::to_vec(m),
        Message::Response(m) => serde_json::to_vec(m),
        Message::Error(m) => serde_json::to_vec(m),
    };
    // Plain structs of numbers and strings always serialise.
    json.expect("message serialises")
}

pub fn encode_message(msg: &Message) -> Vec<u8> {
    let body = payload(msg);
    let mut out = Vec::with_capacity(HEADER_LEN + body.len());
    out.extend_from_slice(&(body.len() as u32).to_le_bytes());
    out.push(msg.type_byte());
    out.extend_from_slice(&body);
    out
}

fn decode_payload(kind: u8, body: &[u8]) -> Result<Message, CodecError> {
    let err = |e: serde_json::Error| CodecError::Decode(e.to_string());
    match kind {
        TYPE_REQUEST => serde_json::from_slice(body).map(Message::Request).map_err(err),
        TYPE_RESPONSE => serde_json::from_slice(body).map(Message::Response).map_err(err),
        TYPE_ERROR => serde_json::from_slice(body).map(Message::Error).map_err(err),
        other => Err(CodecError::UnsupportedType(other)),
    }
}

/// Decode the frame at the start of `bytes`; returns the message and the
/// number of bytes it occupied.
pub fn decode_message(bytes: &[u8]) -> Result<(Message, usize), CodecError> {
    if bytes.len() < HEADER_LEN {
        return Err(CodecError::IncompleteFrame { needed: HEADER_LEN, available: bytes.len() });
    }
    let len = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
    if len > MAX_PAYLOAD {
        return Err(CodecError::TooLarge(len));
    }
    let total = HEADER_LEN + len;
    if bytes.len() < total {
        return Err(CodecError::IncompleteFrame { needed: total, available: bytes.len() });
    }
    Ok((decode_payload(bytes[4], &bytes[HEADER_LEN..total])?, total))
}

/// A frame read off a stream whose header was intact. `Err` in the inner
/// result means the frame was consumed but its body was unusable, so the
/// stream stays in sync.
pub type ReadFrame = Result<Message, CodecError>;

/// Read one frame. `Ok(None)` on a clean end of stream before any header
/// byte; a stream cut mid-frame is an `UnexpectedEof` error.
pub fn read_frame<R: Read>(reader: &mut R) -> io::Result<Option<ReadFrame>> {
    let mut header = [0u8; HEADER_LEN];
    let mut got = 0;
    while got < HEADER_LEN {
        match reader.read(&mut header[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "connection closed mid-header")),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    let len = u32::from_le_bytes(header[..4].try_into().unwrap()) as usize;
    if len > MAX_PAYLOAD {
        return Err(io::Error::new(io::ErrorKind::InvalidData, CodecError::TooLarge(len)));
    }
    let mut body = vec![0u8; len];
    reader.read_exact(&mut body)?;
    Ok(Some(decode_payload(header[4], &body)))
}

pub fn write_frame<W: Write>(writer: &mut W, msg: &Message) -> io::Result<()> {
    writer.write_all(&encode_message(msg))?;
    writer.flush()
}

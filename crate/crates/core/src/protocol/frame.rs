use std::fmt;
use std::io::{self, Read, Write};

use bytes::BufMut;

use crate::error::{Error, Result};

pub const VERSION: u8 = 1;

/// version u8, command u8, reserved u16, session_id u64, payload_len u32.
pub const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Command {
    Handshake = 1,
    RequestWorkers = 2,
    LoadLibrary = 3,
    CreateMatrix = 4,
    SendBlock = 5,
    FetchBlock = 6,
    RunTask = 7,
    ListWorkers = 8,
    CloseSession = 9,
    Error = 10,
    Ok = 11,
}

impl Command {
    pub const ALL: [Command; 11] = [
        Command::Handshake,
        Command::RequestWorkers,
        Command::LoadLibrary,
        Command::CreateMatrix,
        Command::SendBlock,
        Command::FetchBlock,
        Command::RunTask,
        Command::ListWorkers,
        Command::CloseSession,
        Command::Error,
        Command::Ok,
    ];

    pub fn from_code(code: u8) -> Result<Self> {
        Self::ALL.into_iter().find(|c| *c as u8 == code).ok_or(Error::UnknownCommand(code))
    }

    pub fn name(self) -> &'static str {
        match self {
            Command::Handshake => "HANDSHAKE",
            Command::RequestWorkers => "REQUEST_WORKERS",
            Command::LoadLibrary => "LOAD_LIBRARY",
            Command::CreateMatrix => "CREATE_MATRIX",
            Command::SendBlock => "SEND_BLOCK",
            Command::FetchBlock => "FETCH_BLOCK",
            Command::RunTask => "RUN_TASK",
            Command::ListWorkers => "LIST_WORKERS",
            Command::CloseSession => "CLOSE_SESSION",
            Command::Error => "ERROR",
            Command::Ok => "OK",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub version: u8,
    pub command: Command,
    pub session_id: u64,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(command: Command, session_id: u64, payload: Vec<u8>) -> Self {
        Self { version: VERSION, command, session_id, payload }
    }

    pub fn empty(command: Command, session_id: u64) -> Self {
        Self::new(command, session_id, Vec::new())
    }

    pub fn payload_len(&self) -> usize {
        self.payload.len()
    }

    /// Size of the frame on the wire.
    pub fn wire_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }
}

/// Largest payload allowed under a buffer of `buffer_bytes`.
pub fn max_payload(buffer_bytes: usize) -> usize {
    buffer_bytes.saturating_sub(HEADER_LEN).min(u32::MAX as usize)
}

fn check_len(frame: &Frame, buffer_bytes: usize) -> Result<()> {
    let max = max_payload(buffer_bytes);
    if frame.payload.len() > max {
        return Err(Error::FrameTooLarge { len: frame.payload.len(), max });
    }
    Ok(())
}

fn header_bytes(frame: &Frame) -> [u8; HEADER_LEN] {
    let mut h = [0u8; HEADER_LEN];
    let mut w = &mut h[..];
    w.put_u8(frame.version);
    w.put_u8(frame.command as u8);
    w.put_u16_le(0);
    w.put_u64_le(frame.session_id);
    w.put_u32_le(frame.payload.len() as u32);
    h
}

/// Encodes `frame`, refusing payloads that would not fit in `buffer_bytes`.
pub fn encode_frame(frame: &Frame, buffer_bytes: usize) -> Result<Vec<u8>> {
    check_len(frame, buffer_bytes)?;
    let mut out = Vec::with_capacity(frame.wire_len());
    out.extend_from_slice(&header_bytes(frame));
    out.extend_from_slice(&frame.payload);
    Ok(out)
}

struct Header {
    version: u8,
    command: u8,
    session_id: u64,
    payload_len: usize,
}

fn parse_header(h: &[u8]) -> Result<Header> {
    let header = Header {
        version: h[0],
        command: h[1],
        session_id: u64::from_le_bytes(h[4..12].try_into().expect("8 bytes")),
        payload_len: u32::from_le_bytes(h[12..16].try_into().expect("4 bytes")) as usize,
    };
    if header.version != VERSION {
        return Err(Error::VersionMismatch { expected: VERSION, got: header.version });
    }
    Ok(header)
}

/// Decodes one frame from the front of `bytes`, returning it with the
/// number of bytes consumed.
pub fn decode_frame(bytes: &[u8]) -> Result<(Frame, usize)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::IncompleteFrame { needed: HEADER_LEN, available: bytes.len() });
    }
    let h = parse_header(&bytes[..HEADER_LEN])?;
    let command = Command::from_code(h.command)?;
    let total = HEADER_LEN + h.payload_len;
    if bytes.len() < total {
        return Err(Error::IncompleteFrame { needed: total, available: bytes.len() });
    }
    let payload = bytes[HEADER_LEN..total].to_vec();
    Ok((Frame { version: h.version, command, session_id: h.session_id, payload }, total))
}

/// Reads one frame, rejecting payloads larger than `buffer_bytes` allows
/// before allocating for them.
///
/// A clean end of stream before the first header byte is reported as
/// `Ok(None)`.
pub fn read_frame<R: Read>(r: &mut R, buffer_bytes: usize) -> Result<Option<Frame>> {
    let mut h = [0u8; HEADER_LEN];
    let mut filled = 0;
    while filled < HEADER_LEN {
        match r.read(&mut h[filled..]) {
            Ok(0) if filled == 0 => return Ok(None),
            Ok(0) => return Err(Error::IncompleteFrame { needed: HEADER_LEN, available: filled }),
            Ok(k) => filled += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let header = parse_header(&h)?;
    let command = Command::from_code(header.command)?;
    let max = max_payload(buffer_bytes);
    if header.payload_len > max {
        return Err(Error::FrameTooLarge { len: header.payload_len, max });
    }
    let mut payload = vec![0u8; header.payload_len];
    r.read_exact(&mut payload).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => {
            Error::IncompleteFrame { needed: HEADER_LEN + header.payload_len, available: HEADER_LEN }
        }
        _ => e.into(),
    })?;
    Ok(Some(Frame { version: header.version, command, session_id: header.session_id, payload }))
}

/// Writes `frame`, returning the number of bytes put on the wire.
pub fn write_frame<W: Write>(w: &mut W, frame: &Frame, buffer_bytes: usize) -> Result<usize> {
    check_len(frame, buffer_bytes)?;
    w.write_all(&header_bytes(frame))?;
    w.write_all(&frame.payload)?;
    w.flush()?;
    Ok(frame.wire_len())
}

use std::fmt;
use std::io;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Stable error codes carried in `ERROR` frames.
///
/// Values are part of the wire format and must not be renumbered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u16)]
pub enum ErrorCode {
    InvalidGrid = 1,
    InvalidLayout = 2,
    NotLocal = 3,
    InvalidPartitioning = 4,
    FrameTooLarge = 5,
    IncompleteFrame = 6,
    VersionMismatch = 7,
    UnknownCommand = 8,
    Decode = 9,
    InvalidBuffer = 10,
    OutOfWorkers = 11,
    LibraryNotFound = 12,
    StaleSession = 13,
    StaleHandle = 14,
    OwnershipViolation = 15,
    NotReady = 16,
    UnknownFunction = 17,
    InvalidArgument = 18,
    InvalidAction = 19,
    InvalidSource = 20,
    Bind = 21,
    Io = 22,
    Protocol = 23,
    Internal = 24,
}

impl ErrorCode {
    pub fn from_u16(v: u16) -> Option<Self> {
        use ErrorCode::*;
        Some(match v {
            1 => InvalidGrid,
            2 => InvalidLayout,
            3 => NotLocal,
            4 => InvalidPartitioning,
            5 => FrameTooLarge,
            6 => IncompleteFrame,
            7 => VersionMismatch,
            8 => UnknownCommand,
            9 => Decode,
            10 => InvalidBuffer,
            11 => OutOfWorkers,
            12 => LibraryNotFound,
            13 => StaleSession,
            14 => StaleHandle,
            15 => OwnershipViolation,
            16 => NotReady,
            17 => UnknownFunction,
            18 => InvalidArgument,
            19 => InvalidAction,
            20 => InvalidSource,
            21 => Bind,
            22 => Io,
            23 => Protocol,
            24 => Internal,
            _ => return None,
        })
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid process grid: {0}")]
    InvalidGrid(String),
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("element ({i}, {j}) is not stored on rank {rank}")]
    NotLocal { rank: usize, i: usize, j: usize },
    #[error("invalid partitioning: {0}")]
    InvalidPartitioning(String),
    #[error("frame payload of {len} bytes exceeds the limit of {max} bytes")]
    FrameTooLarge { len: usize, max: usize },
    #[error("incomplete frame: need {needed} bytes, have {available}")]
    IncompleteFrame { needed: usize, available: usize },
    #[error("protocol version mismatch: expected {expected}, got {got}")]
    VersionMismatch { expected: u8, got: u8 },
    #[error("unknown command code {0}")]
    UnknownCommand(u8),
    #[error("decode error: {0}")]
    Decode(String),
    #[error("invalid buffer size: {0}")]
    InvalidBuffer(String),
    #[error("out of workers: requested {requested}, {free} free")]
    OutOfWorkers { requested: usize, free: usize },
    #[error("library not found: {0}")]
    LibraryNotFound(String),
    #[error("stale session {0}")]
    StaleSession(u64),
    #[error("stale handle {0}")]
    StaleHandle(u64),
    #[error("ownership violation: {0}")]
    OwnershipViolation(String),
    #[error("matrix {0} is not ready")]
    NotReady(u64),
    #[error("unknown function {0}")]
    UnknownFunction(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("invalid source: {0}")]
    InvalidSource(String),
    #[error("cannot bind port {port}: {source}")]
    Bind { port: u16, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("internal error: {0}")]
    Internal(String),
    /// An error reported by the remote end of a connection.
    #[error("remote error {code}: {message}")]
    Remote { code: ErrorCode, message: String },
}

impl Error {
    pub fn code(&self) -> ErrorCode {
        match self {
            Error::InvalidGrid(_) => ErrorCode::InvalidGrid,
            Error::InvalidLayout(_) => ErrorCode::InvalidLayout,
            Error::NotLocal { .. } => ErrorCode::NotLocal,
            Error::InvalidPartitioning(_) => ErrorCode::InvalidPartitioning,
            Error::FrameTooLarge { .. } => ErrorCode::FrameTooLarge,
            Error::IncompleteFrame { .. } => ErrorCode::IncompleteFrame,
            Error::VersionMismatch { .. } => ErrorCode::VersionMismatch,
            Error::UnknownCommand(_) => ErrorCode::UnknownCommand,
            Error::Decode(_) => ErrorCode::Decode,
            Error::InvalidBuffer(_) => ErrorCode::InvalidBuffer,
            Error::OutOfWorkers { .. } => ErrorCode::OutOfWorkers,
            Error::LibraryNotFound(_) => ErrorCode::LibraryNotFound,
            Error::StaleSession(_) => ErrorCode::StaleSession,
            Error::StaleHandle(_) => ErrorCode::StaleHandle,
            Error::OwnershipViolation(_) => ErrorCode::OwnershipViolation,
            Error::NotReady(_) => ErrorCode::NotReady,
            Error::UnknownFunction(_) => ErrorCode::UnknownFunction,
            Error::InvalidArgument(_) => ErrorCode::InvalidArgument,
            Error::InvalidAction(_) => ErrorCode::InvalidAction,
            Error::InvalidSource(_) => ErrorCode::InvalidSource,
            Error::Bind { .. } => ErrorCode::Bind,
            Error::Io(_) => ErrorCode::Io,
            Error::Protocol(_) => ErrorCode::Protocol,
            Error::Internal(_) => ErrorCode::Internal,
            Error::Remote { code, .. } => *code,
        }
    }
}

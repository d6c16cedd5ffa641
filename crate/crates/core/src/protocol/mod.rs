//! Binary wire protocol shared by the gateway and its clients.
//!
//! Every message is a [`Frame`]: a fixed 16-byte little-endian header
//! followed by a command-specific payload. No frame may exceed the buffer
//! size negotiated at handshake. Matrix data travels as [`BlockChunk`]s,
//! contiguous runs of a strided selection's elements. The full byte layout
//! is documented in `docs/PROTOCOL.md`.

mod block;
mod codec;
mod frame;
mod messages;
mod task;

pub use block::{
    chunk_block, chunk_capacity, chunk_spans, encode_chunk_with, for_each_segment, reassemble, selection_coord,
    BlockChunk, BlockMessage, ChunkView, ElemType, CHUNK_META_LEN,
};
pub use codec::{Decoder, Wire};
pub use frame::{
    decode_frame, encode_frame, max_payload, read_frame, write_frame, Command, Frame, HEADER_LEN, VERSION,
};
pub use messages::{
    BlockAck, CreateMatrix, ErrorReply, FetchRequest, Handshake, HandshakeReply, LibraryLoaded, LoadLibrary,
    MatrixCreated, MatrixInfo, RequestWorkers, WorkerGroup, WorkerInfo, WorkerTable,
};
pub use task::{decode_task, encode_task, tag, TaskRequest, TaskResult, TaskValue};

/// Default and maximum buffer size: 100 MiB.
pub const DEFAULT_BUFFER_BYTES: usize = 100 << 20;

/// Smallest buffer a session may negotiate.
pub const MIN_BUFFER_BYTES: usize = 4 << 10;

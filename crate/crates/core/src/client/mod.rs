//! Client side of a gateway session.
//!
//! A [`Client`] holds one connection to the driver and, once workers are
//! granted, one connection per worker. Sends are routed with the matrix
//! layout: each worker receives exactly the elements it owns, as strided
//! selections cut into frames that fit the negotiated buffer. Workers are
//! fed concurrently; frames to a single worker go out in order and each is
//! acknowledged before the next.

mod sources;

pub use sources::{BlockedSource, RowPartitionedSource};

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter};
use std::net::TcpStream;
use std::path::Path;
use std::thread;

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::layout::{DistPair, Layout, ProcessGrid, StridedRange};
use crate::protocol::{
    chunk_block, chunk_capacity, chunk_spans, encode_chunk_with, read_frame, write_frame, BlockAck, BlockChunk,
    BlockMessage, Command, CreateMatrix, ElemType, ErrorReply, FetchRequest, Frame, Handshake, HandshakeReply,
    LibraryLoaded, LoadLibrary, MatrixCreated, MatrixInfo, RequestWorkers, TaskResult, TaskValue, Wire,
    WorkerGroup, WorkerInfo, WorkerTable, DEFAULT_BUFFER_BYTES, MIN_BUFFER_BYTES,
};

/// Frame counters for one or more connections. Byte counts include headers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FrameStats {
    pub frames_sent: u64,
    pub bytes_sent: u64,
    pub frames_received: u64,
    pub bytes_received: u64,
    /// Largest frame seen in either direction.
    pub max_frame_bytes: u64,
}

impl FrameStats {
    fn merge(&mut self, o: &FrameStats) {
        self.frames_sent += o.frames_sent;
        self.bytes_sent += o.bytes_sent;
        self.frames_received += o.frames_received;
        self.bytes_received += o.bytes_received;
        self.max_frame_bytes = self.max_frame_bytes.max(o.max_frame_bytes);
    }
}

struct Conn {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
    stats: FrameStats,
}

impl Conn {
    fn open(addr: &str) -> Result<Conn> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let reader = BufReader::new(stream.try_clone()?);
        Ok(Conn { reader, writer: BufWriter::new(stream), stats: FrameStats::default() })
    }

    fn send(&mut self, frame: &Frame, buffer: usize) -> Result<()> {
        let n = write_frame(&mut self.writer, frame, buffer)? as u64;
        self.stats.frames_sent += 1;
        self.stats.bytes_sent += n;
        self.stats.max_frame_bytes = self.stats.max_frame_bytes.max(n);
        Ok(())
    }

    /// Next reply; `ERROR` frames come back as `Err`.
    fn recv(&mut self, buffer: usize) -> Result<Frame> {
        let frame = read_frame(&mut self.reader, buffer)?
            .ok_or_else(|| Error::Protocol("connection closed by the gateway".into()))?;
        let n = frame.wire_len() as u64;
        self.stats.frames_received += 1;
        self.stats.bytes_received += n;
        self.stats.max_frame_bytes = self.stats.max_frame_bytes.max(n);
        match frame.command {
            Command::Ok => Ok(frame),
            Command::Error => Err(ErrorReply::from_payload(&frame.payload)?.into_error()),
            other => Err(Error::Protocol(format!("expected OK or ERROR, got {other}"))),
        }
    }

    fn call(&mut self, frame: &Frame, buffer: usize) -> Result<Frame> {
        self.send(frame, buffer)?;
        self.recv(buffer)
    }

    fn push(&mut self, sid: u64, buffer: usize, handle_id: u64, elem_type: ElemType, piece: &Piece<'_>) -> Result<()> {
        let cap = chunk_capacity(buffer, elem_type)?;
        let (rows, cols) = (piece.rows, piece.cols);
        for (offset, count) in chunk_spans(rows.count * cols.count, cap) {
            let payload = encode_chunk_with(handle_id, &rows, &cols, elem_type, offset, count, piece.values(offset, count));
            let reply = self.call(&Frame::new(Command::SendBlock, sid, payload), buffer)?;
            BlockAck::from_payload(&reply.payload)?;
        }
        Ok(())
    }

    fn fetch(&mut self, sid: u64, buffer: usize, req: &FetchRequest) -> Result<BlockMessage> {
        self.send(&Frame::new(Command::FetchBlock, sid, req.to_payload()), buffer)?;
        let total = req.rows.count * req.cols.count;
        let mut elements = Vec::with_capacity(total);
        let mut elem_type;
        loop {
            let chunk = BlockChunk::from_payload(&self.recv(buffer)?.payload)?;
            if (chunk.handle_id, chunk.rows, chunk.cols) != (req.handle_id, req.rows, req.cols) {
                return Err(Error::Protocol("fetch reply describes a different selection".into()));
            }
            if chunk.offset as usize != elements.len() {
                return Err(Error::Protocol(format!(
                    "fetch reply chunk starts at {}, expected {}",
                    chunk.offset,
                    elements.len()
                )));
            }
            elem_type = chunk.elem_type;
            elements.extend_from_slice(&chunk.elements);
            if elements.len() == total {
                break;
            }
        }
        Ok(BlockMessage { handle_id: req.handle_id, rows: req.rows, cols: req.cols, elem_type, elements })
    }
}

/// A strided selection of a source array, with `origin` the global
/// coordinate of `src[[0, 0]]`.
struct Piece<'a> {
    rows: StridedRange,
    cols: StridedRange,
    src: ArrayView2<'a, f64>,
    origin: (usize, usize),
}

impl<'a> Piece<'a> {
    /// Elements `offset..offset + count` of the selection in row-major order.
    fn values(&self, offset: usize, count: usize) -> impl Iterator<Item = f64> + 'a {
        let (rows, cols, src) = (self.rows, self.cols, self.src);
        let ncols = cols.count.max(1);
        let (r0, c0) = self.origin;
        let first = offset / ncols;
        let last = if count == 0 { first } else { (offset + count - 1) / ncols + 1 };
        (first..last).flat_map(move |ri| {
            let lo = if ri == first { offset % ncols } else { 0 };
            let hi = if ri + 1 == last { (offset + count - 1) % ncols + 1 } else { ncols };
            let row = src.index_axis_move(Axis(0), rows.get(ri) - r0);
            (lo..hi).map(move |ci| row[cols.get(ci) - c0])
        })
    }
}

/// An open session.
pub struct Client {
    driver: Conn,
    session_id: u64,
    buffer_bytes: usize,
    grid: Option<ProcessGrid>,
    workers: Vec<WorkerInfo>,
    worker_conns: Vec<Conn>,
    libraries: BTreeMap<String, u32>,
    closed: bool,
}

impl Client {
    /// Opens a session proposing the default 100 MiB buffer.
    pub fn connect(host: &str, port: u16) -> Result<Client> {
        Self::connect_with_buffer(host, port, DEFAULT_BUFFER_BYTES)
    }

    /// Opens a session proposing `buffer_bytes`; the gateway may lower it.
    pub fn connect_with_buffer(host: &str, port: u16, buffer_bytes: usize) -> Result<Client> {
        let mut driver = Conn::open(&format!("{host}:{port}"))?;
        let limit = buffer_bytes.max(MIN_BUFFER_BYTES);
        let hs = Handshake { buffer_bytes: buffer_bytes as u64 };
        let reply = driver.call(&Frame::new(Command::Handshake, 0, hs.to_payload()), limit)?;
        let reply = HandshakeReply::from_payload(&reply.payload)?;
        log::debug!("session {} opened with a {}-byte buffer", reply.session_id, reply.buffer_bytes);
        Ok(Client {
            driver,
            session_id: reply.session_id,
            buffer_bytes: reply.buffer_bytes as usize,
            grid: None,
            workers: Vec::new(),
            worker_conns: Vec::new(),
            libraries: BTreeMap::new(),
            closed: false,
        })
    }

    /// Connects to the gateway named in an address file (`host:port`).
    pub fn from_address_file(path: impl AsRef<Path>, buffer_bytes: usize) -> Result<Client> {
        let text = fs::read_to_string(path.as_ref())?;
        let (host, port) = parse_address(text.trim())?;
        Self::connect_with_buffer(&host, port, buffer_bytes)
    }

    pub fn session_id(&self) -> u64 {
        self.session_id
    }

    /// Buffer size confirmed by the gateway.
    pub fn buffer_bytes(&self) -> usize {
        self.buffer_bytes
    }

    pub fn grid(&self) -> Option<ProcessGrid> {
        self.grid
    }

    /// Granted workers, indexed by session rank.
    pub fn workers(&self) -> &[WorkerInfo] {
        &self.workers
    }

    pub fn layout(&self, pair: DistPair) -> Result<Layout> {
        let grid = self.grid.ok_or_else(|| Error::InvalidArgument("no workers have been requested".into()))?;
        Ok(Layout::new(grid, pair))
    }

    /// Counters over every connection of this session.
    pub fn stats(&self) -> FrameStats {
        let mut s = self.driver.stats;
        for c in &self.worker_conns {
            s.merge(&c.stats);
        }
        s
    }

    /// Counters over the worker connections only.
    pub fn data_stats(&self) -> FrameStats {
        let mut s = FrameStats::default();
        for c in &self.worker_conns {
            s.merge(&c.stats);
        }
        s
    }

    pub fn reset_stats(&mut self) {
        self.driver.stats = FrameStats::default();
        for c in &mut self.worker_conns {
            c.stats = FrameStats::default();
        }
    }

    fn driver_call(&mut self, command: Command, payload: Vec<u8>) -> Result<Frame> {
        let frame = Frame::new(command, self.session_id, payload);
        self.driver.call(&frame, self.buffer_bytes)
    }

    /// Asks for `count` workers and connects to each of them.
    pub fn request_workers(&mut self, count: usize) -> Result<&[WorkerInfo]> {
        let count = u32::try_from(count).map_err(|_| Error::InvalidArgument(format!("{count} workers")))?;
        let reply = self.driver_call(Command::RequestWorkers, RequestWorkers { count }.to_payload())?;
        let group = WorkerGroup::from_payload(&reply.payload)?;
        let grid = ProcessGrid::new(group.grid_rows as usize, group.grid_cols as usize)?;
        let conns = group.workers.iter().map(|w| Conn::open(&w.address())).collect::<Result<Vec<_>>>()?;
        self.grid = Some(grid);
        self.workers = group.workers;
        self.worker_conns = conns;
        Ok(&self.workers)
    }

    pub fn load_library(&mut self, name: &str) -> Result<u32> {
        let reply = self.driver_call(Command::LoadLibrary, LoadLibrary { name: name.to_owned() }.to_payload())?;
        let lib_id = LibraryLoaded::from_payload(&reply.payload)?.lib_id;
        self.libraries.insert(name.to_owned(), lib_id);
        Ok(lib_id)
    }

    /// Allocates an empty distributed matrix.
    pub fn create_matrix(&mut self, m: usize, n: usize, pair: DistPair, elem_type: ElemType) -> Result<MatrixCreated> {
        let req = CreateMatrix { m: m as u64, n: n as u64, pair, elem_type };
        let reply = self.driver_call(Command::CreateMatrix, req.to_payload())?;
        MatrixCreated::from_payload(&reply.payload)
    }

    /// Creates a matrix and fills it from `a`.
    pub fn send_matrix(&mut self, a: &Array2<f64>, pair: DistPair) -> Result<MatrixInfo> {
        self.send_matrix_as(a, pair, ElemType::F64)
    }

    /// As [`send_matrix`](Self::send_matrix), stored with element type `elem_type`.
    pub fn send_matrix_as(&mut self, a: &Array2<f64>, pair: DistPair, elem_type: ElemType) -> Result<MatrixInfo> {
        let (m, n) = a.dim();
        let layout = self.layout(pair)?;
        let info = self.create_matrix(m, n, pair, elem_type)?.info;
        let pieces = (0..self.worker_conns.len())
            .map(|rank| {
                layout
                    .owned_in(rank, 0..m, 0..n)
                    .map(|(rows, cols)| Piece { rows, cols, src: a.view(), origin: (0, 0) })
                    .into_iter()
                    .collect()
            })
            .collect();
        self.push_pieces(&info, &layout, pieces)?;
        Ok(info)
    }

    /// Creates a matrix and fills it from a grid of dense chunks.
    pub fn send_blocked(&mut self, src: &BlockedSource, pair: DistPair) -> Result<MatrixInfo> {
        src.validate()?;
        let (m, n) = src.shape();
        let layout = self.layout(pair)?;
        let info = self.create_matrix(m, n, pair, ElemType::F64)?.info;
        let mut pieces: Vec<Vec<Piece<'_>>> = (0..self.worker_conns.len()).map(|_| Vec::new()).collect();
        for (&(bi, bj), chunk) in &src.chunks {
            let (rows, cols) = src.extent(bi, bj);
            let origin = (rows.start, cols.start);
            for (rank, list) in pieces.iter_mut().enumerate() {
                if let Some((r, c)) = layout.owned_in(rank, rows.clone(), cols.clone()) {
                    list.push(Piece { rows: r, cols: c, src: chunk.view(), origin });
                }
            }
        }
        self.push_pieces(&info, &layout, pieces)?;
        Ok(info)
    }

    /// Creates a matrix and fills it from contiguous row partitions.
    pub fn send_partitioned(&mut self, src: &RowPartitionedSource, pair: DistPair) -> Result<MatrixInfo> {
        src.validate()?;
        let (m, n) = (src.rows(), src.cols);
        let layout = self.layout(pair)?;
        let info = self.create_matrix(m, n, pair, ElemType::F64)?.info;
        let mut pieces: Vec<Vec<Piece<'_>>> = (0..self.worker_conns.len()).map(|_| Vec::new()).collect();
        for (range, block) in &src.partitions {
            for (rank, list) in pieces.iter_mut().enumerate() {
                if let Some((r, c)) = layout.owned_in(rank, range.clone(), 0..n) {
                    list.push(Piece { rows: r, cols: c, src: block.view(), origin: (range.start, 0) });
                }
            }
        }
        self.push_pieces(&info, &layout, pieces)?;
        Ok(info)
    }

    fn push_pieces(&mut self, info: &MatrixInfo, layout: &Layout, pieces: Vec<Vec<Piece<'_>>>) -> Result<()> {
        for (rank, list) in pieces.iter().enumerate() {
            for p in list {
                assert!(
                    layout.owns_selection(rank, &p.rows, &p.cols),
                    "routing bug: selection {:?} x {:?} is not owned by rank {rank}",
                    p.rows,
                    p.cols
                );
            }
        }
        let (sid, buffer) = (self.session_id, self.buffer_bytes);
        let results: Vec<Result<()>> = thread::scope(|s| {
            let handles: Vec<_> = self
                .worker_conns
                .iter_mut()
                .zip(&pieces)
                .map(|(conn, list)| {
                    s.spawn(move || list.iter().try_for_each(|p| conn.push(sid, buffer, info.id, info.elem_type, p)))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("send thread panicked")).collect()
        });
        results.into_iter().collect()
    }

    /// Sends one block to the worker at session rank `rank`, returning the
    /// element count of the last acknowledgement.
    pub fn send_block(&mut self, rank: usize, block: &BlockMessage) -> Result<u64> {
        let (sid, buffer) = (self.session_id, self.buffer_bytes);
        let conn = self.worker_conn(rank)?;
        let mut received = 0;
        for frame in chunk_block(block, sid, buffer)? {
            received = BlockAck::from_payload(&conn.call(&frame, buffer)?.payload)?.received;
        }
        Ok(received)
    }

    /// Fetches a strided selection from the worker at session rank `rank`.
    pub fn fetch_block(&mut self, rank: usize, handle_id: u64, rows: StridedRange, cols: StridedRange) -> Result<BlockMessage> {
        let (sid, buffer) = (self.session_id, self.buffer_bytes);
        self.worker_conn(rank)?.fetch(sid, buffer, &FetchRequest { handle_id, rows, cols })
    }

    fn worker_conn(&mut self, rank: usize) -> Result<&mut Conn> {
        let n = self.worker_conns.len();
        self.worker_conns
            .get_mut(rank)
            .ok_or_else(|| Error::InvalidArgument(format!("rank {rank} is outside a group of {n} workers")))
    }

    /// Collects a whole distributed matrix into a dense array.
    pub fn fetch_matrix(&mut self, info: &MatrixInfo) -> Result<Array2<f64>> {
        let (m, n) = (info.rows(), info.cols());
        let layout = self.layout(info.pair)?;
        let (sid, buffer) = (self.session_id, self.buffer_bytes);
        let blocks: Vec<Result<Option<BlockMessage>>> = thread::scope(|s| {
            let handles: Vec<_> = self
                .worker_conns
                .iter_mut()
                .enumerate()
                .map(|(rank, conn)| {
                    s.spawn(move || match layout.owned_in(rank, 0..m, 0..n) {
                        Some((rows, cols)) => {
                            conn.fetch(sid, buffer, &FetchRequest { handle_id: info.id, rows, cols }).map(Some)
                        }
                        None => Ok(None),
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("fetch thread panicked")).collect()
        });
        let mut out = Array2::zeros((m, n));
        for block in blocks {
            if let Some(b) = block? {
                for (k, &v) in b.elements.iter().enumerate() {
                    out[b.coord(k)] = v;
                }
            }
        }
        Ok(out)
    }

    /// Runs `function` from a loaded library. Matrix results are new
    /// handles in this session.
    pub fn run(&mut self, library: &str, function: &str, args: &[TaskValue]) -> Result<Vec<TaskValue>> {
        let lib_id = *self
            .libraries
            .get(library)
            .ok_or_else(|| Error::LibraryNotFound(format!("{library} has not been loaded in this session")))?;
        let payload = crate::protocol::encode_task(lib_id, function, args)?;
        let reply = self.driver_call(Command::RunTask, payload)?;
        Ok(TaskResult::from_payload(&reply.payload)?.values)
    }

    /// Every worker of the gateway with the session holding it (0 if free).
    pub fn list_workers(&mut self) -> Result<WorkerTable> {
        let reply = self.driver_call(Command::ListWorkers, Vec::new())?;
        WorkerTable::from_payload(&reply.payload)
    }

    /// Ends the session, releasing its workers and matrices.
    pub fn close(mut self) -> Result<()> {
        self.closed = true;
        self.driver_call(Command::CloseSession, Vec::new()).map(drop)
    }
}

impl Drop for Client {
    fn drop(&mut self) {
        if !self.closed {
            if let Err(e) = self.driver_call(Command::CloseSession, Vec::new()) {
                log::debug!("closing session {} on drop: {e}", self.session_id);
            }
        }
    }
}

/// Splits `host:port`.
pub fn parse_address(s: &str) -> Result<(String, u16)> {
    let (host, port) = s.rsplit_once(':').ok_or_else(|| Error::InvalidArgument(format!("{s:?} is not host:port")))?;
    let port = port.parse().map_err(|_| Error::InvalidArgument(format!("bad port in {s:?}")))?;
    Ok((host.to_owned(), port))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn address_parsing() {
        assert_eq!(parse_address("127.0.0.1:24960").unwrap(), ("127.0.0.1".into(), 24960));
        assert!(parse_address("localhost").is_err());
        assert!(parse_address("h:99999").is_err());
    }

    #[test]
    fn stats_merge_keeps_max() {
        let mut a = FrameStats { frames_sent: 1, max_frame_bytes: 10, ..Default::default() };
        a.merge(&FrameStats { frames_sent: 2, max_frame_bytes: 7, ..Default::default() });
        assert_eq!(a.frames_sent, 3);
        assert_eq!(a.max_frame_bytes, 10);
    }
}

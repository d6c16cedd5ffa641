use std::collections::HashMap;
use std::sync::Mutex;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::layout::{Layout, StridedRange};
use crate::protocol::{for_each_segment, BlockChunk, BlockMessage, ChunkView, ElemType, FetchRequest, MatrixInfo};

/// Elements `offset..offset + count` of a strided selection.
#[derive(Debug, Clone, Copy)]
struct Selection {
    rows: StridedRange,
    cols: StridedRange,
    offset: usize,
    count: usize,
}

/// One worker's share of a distributed matrix.
#[derive(Debug)]
struct StoreEntry {
    session_id: u64,
    info: MatrixInfo,
    layout: Layout,
    /// This worker's rank within the session grid.
    rank: usize,
    block: Array2<f64>,
    written: Vec<bool>,
    filled: usize,
}

impl StoreEntry {
    fn is_complete(&self) -> bool {
        self.filled == self.block.len()
    }

    fn check_selection(&self, rows: &StridedRange, cols: &StridedRange) -> Result<()> {
        for (r, len, what) in [(rows, self.info.rows(), "rows"), (cols, self.info.cols(), "cols")] {
            if r.count > 1 && r.stride == 0 {
                return Err(Error::InvalidArgument(format!("zero stride over {} {what}", r.count)));
            }
            if r.count > 0 && r.end() > len {
                return Err(Error::InvalidArgument(format!("{what} selection ends at {} beyond {len}", r.end())));
            }
        }
        if !self.layout.owns_selection(self.rank, rows, cols) {
            return Err(Error::OwnershipViolation(format!(
                "selection rows {rows:?} cols {cols:?} of {} is not stored on session rank {}",
                self.layout.pair(),
                self.rank
            )));
        }
        Ok(())
    }
}

/// A data-holding endpoint. Its store is private to it; tasks reach the
/// local blocks only through the methods below.
#[derive(Debug)]
pub struct Worker {
    rank: usize,
    host: String,
    port: u16,
    store: Mutex<HashMap<u64, StoreEntry>>,
}

impl Worker {
    pub fn new(rank: usize, host: String, port: u16) -> Self {
        Self { rank, host, port, store: Mutex::new(HashMap::new()) }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn host(&self) -> &str {
        &self.host
    }

    pub fn port(&self) -> u16 {
        self.port
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, HashMap<u64, StoreEntry>> {
        self.store.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn with_entry<R>(&self, session_id: u64, handle_id: u64, f: impl FnOnce(&mut StoreEntry) -> Result<R>) -> Result<R> {
        let mut store = self.lock();
        match store.get_mut(&handle_id) {
            Some(e) if e.session_id == session_id => f(e),
            _ => Err(Error::StaleHandle(handle_id)),
        }
    }

    /// Allocates an empty local block for `info` on session rank `rank`.
    pub fn allocate(&self, session_id: u64, info: MatrixInfo, layout: Layout, rank: usize) {
        let (lr, lc) = layout.local_shape(rank, info.rows(), info.cols());
        let entry = StoreEntry {
            session_id,
            info,
            layout,
            rank,
            block: Array2::zeros((lr, lc)),
            written: vec![false; lr * lc],
            filled: 0,
        };
        self.lock().insert(info.id, entry);
    }

    /// Stores a fully written local block.
    pub fn install(&self, session_id: u64, info: MatrixInfo, layout: Layout, rank: usize, block: Array2<f64>) -> Result<()> {
        let shape = layout.local_shape(rank, info.rows(), info.cols());
        if block.dim() != shape {
            return Err(Error::Internal(format!("local block {:?} does not match shape {shape:?}", block.dim())));
        }
        let n = block.len();
        let entry = StoreEntry { session_id, info, layout, rank, block, written: vec![true; n], filled: n };
        self.lock().insert(info.id, entry);
        Ok(())
    }

    /// Writes a chunk into the local block. The whole chunk is validated
    /// before any element is written.
    pub fn receive(&self, session_id: u64, chunk: &BlockChunk) -> Result<u64> {
        let sel = Selection { rows: chunk.rows, cols: chunk.cols, offset: chunk.offset as usize, count: chunk.elements.len() };
        self.write(session_id, chunk.handle_id, chunk.elem_type, sel, |k| chunk.elements[k])
    }

    /// As [`receive`](Self::receive), reading elements straight from the payload.
    pub fn receive_view(&self, session_id: u64, chunk: &ChunkView<'_>) -> Result<u64> {
        let sel = Selection { rows: chunk.rows, cols: chunk.cols, offset: chunk.offset as usize, count: chunk.count };
        self.write(session_id, chunk.handle_id, chunk.elem_type, sel, |k| chunk.get(k))
    }

    fn write(&self, session_id: u64, handle_id: u64, elem_type: ElemType, sel: Selection, get: impl Fn(usize) -> f64) -> Result<u64> {
        self.with_entry(session_id, handle_id, |e| {
            if elem_type != e.info.elem_type {
                return Err(Error::InvalidArgument(format!(
                    "chunk element type {elem_type:?} for a {:?} matrix",
                    e.info.elem_type
                )));
            }
            e.check_selection(&sel.rows, &sel.cols)?;
            let (Some(rs), Some(cs)) = (e.layout.row_share(e.rank), e.layout.col_share(e.rank)) else {
                return Ok(0);
            };
            let ncols = e.block.ncols();
            // owned columns are spaced by a multiple of the rank's column stride
            let step = sel.cols.stride / cs.stride;
            let data = e.block.as_slice_mut().expect("standard layout");
            let mut filled = 0;
            for_each_segment(sel.cols.count, sel.offset, sel.count, |k, row, col, len| {
                let base = rs.to_local(sel.rows.get(row)) * ncols + cs.to_local(sel.cols.get(col));
                for t in 0..len {
                    let idx = base + t * step;
                    data[idx] = get(k + t);
                    if !e.written[idx] {
                        e.written[idx] = true;
                        filled += 1;
                    }
                }
            });
            e.filled += filled;
            Ok(sel.count as u64)
        })
    }

    pub fn fetch(&self, session_id: u64, req: &FetchRequest) -> Result<BlockMessage> {
        self.with_entry(session_id, req.handle_id, |e| {
            if !e.is_complete() {
                return Err(Error::NotReady(req.handle_id));
            }
            e.check_selection(&req.rows, &req.cols)?;
            let mut elements = Vec::with_capacity(req.rows.count * req.cols.count);
            if let (Some(rs), Some(cs)) = (e.layout.row_share(e.rank), e.layout.col_share(e.rank)) {
                if !req.cols.is_empty() {
                    let step = req.cols.stride / cs.stride;
                    let lj0 = cs.to_local(req.cols.start);
                    for i in req.rows.iter() {
                        let row = e.block.row(rs.to_local(i));
                        elements.extend((0..req.cols.count).map(|t| row[lj0 + t * step]));
                    }
                }
            }
            Ok(BlockMessage {
                handle_id: req.handle_id,
                rows: req.rows,
                cols: req.cols,
                elem_type: e.info.elem_type,
                elements,
            })
        })
    }

    pub fn is_complete(&self, session_id: u64, handle_id: u64) -> Result<bool> {
        self.with_entry(session_id, handle_id, |e| Ok(e.is_complete()))
    }

    /// Number of locally stored elements of `handle_id`.
    pub fn local_len(&self, session_id: u64, handle_id: u64) -> Result<usize> {
        self.with_entry(session_id, handle_id, |e| Ok(e.block.len()))
    }

    /// Runs `f` on the local block of a complete matrix.
    pub fn with_block<R>(&self, session_id: u64, handle_id: u64, f: impl FnOnce(ArrayView2<'_, f64>) -> R) -> Result<R> {
        self.with_entry(session_id, handle_id, |e| {
            if !e.is_complete() {
                return Err(Error::NotReady(handle_id));
            }
            Ok(f(e.block.view()))
        })
    }

    pub fn release(&self, session_id: u64, handle_id: u64) {
        let mut store = self.lock();
        if store.get(&handle_id).is_some_and(|e| e.session_id == session_id) {
            store.remove(&handle_id);
        }
    }

    /// Drops every entry belonging to `session_id`.
    pub fn drop_session(&self, session_id: u64) -> usize {
        let mut store = self.lock();
        let before = store.len();
        store.retain(|_, e| e.session_id != session_id);
        before - store.len()
    }

    /// Number of matrices held, across all sessions.
    pub fn entry_count(&self) -> usize {
        self.lock().len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{DistPair, ProcessGrid};
    use crate::protocol::ElemType;

    fn setup(pair: DistPair, p: usize, m: u64, n: u64) -> (Vec<Worker>, MatrixInfo, Layout) {
        let layout = Layout::new(ProcessGrid::make(p, None).unwrap(), pair);
        let info = MatrixInfo { id: 1, m, n, pair, elem_type: ElemType::F64 };
        let workers: Vec<_> = (0..p).map(|r| Worker::new(r, "127.0.0.1".into(), 0)).collect();
        for (r, w) in workers.iter().enumerate() {
            w.allocate(7, info, layout, r);
        }
        (workers, info, layout)
    }

    fn chunk_for(layout: &Layout, rank: usize, m: usize, n: usize) -> BlockChunk {
        let (rows, cols) = layout.owned_in(rank, 0..m, 0..n).unwrap();
        let elements = rows.iter().flat_map(|i| cols.iter().map(move |j| (i * 100 + j) as f64)).collect();
        BlockChunk { handle_id: 1, rows, cols, elem_type: ElemType::F64, offset: 0, elements }
    }

    #[test]
    fn row_block_accepted_by_owner_only() {
        let (workers, _, layout) = setup(DistPair::VC_STAR, 3, 10, 4);
        let c = chunk_for(&layout, 1, 10, 4);
        assert!(matches!(workers[2].receive(7, &c), Err(Error::OwnershipViolation(_))));
        assert!(!workers[1].is_complete(7, 1).unwrap());
        assert_eq!(workers[1].receive(7, &c).unwrap(), 12);
        assert!(workers[1].is_complete(7, 1).unwrap());
    }

    #[test]
    fn empty_block_acks_zero() {
        let (workers, _, _) = setup(DistPair::VC_STAR, 2, 4, 4);
        let c = BlockChunk {
            handle_id: 1,
            rows: StridedRange::new(0, 2, 0),
            cols: StridedRange::contiguous(0, 4),
            elem_type: ElemType::F64,
            offset: 0,
            elements: vec![],
        };
        assert_eq!(workers[0].receive(7, &c).unwrap(), 0);
    }

    #[test]
    fn fetch_requires_completion_and_round_trips() {
        let (workers, _, layout) = setup(DistPair::MC_MR, 4, 5, 7);
        let c = chunk_for(&layout, 3, 5, 7);
        let req = FetchRequest { handle_id: 1, rows: c.rows, cols: c.cols };
        assert!(matches!(workers[3].fetch(7, &req), Err(Error::NotReady(1))));
        workers[3].receive(7, &c).unwrap();
        let back = workers[3].fetch(7, &req).unwrap();
        assert_eq!(back.elements, c.elements);
    }

    #[test]
    fn other_session_sees_stale_handle() {
        let (workers, _, layout) = setup(DistPair::VC_STAR, 1, 2, 2);
        let c = chunk_for(&layout, 0, 2, 2);
        assert!(matches!(workers[0].receive(8, &c), Err(Error::StaleHandle(1))));
        assert_eq!(workers[0].drop_session(7), 1);
        assert!(matches!(workers[0].receive(7, &c), Err(Error::StaleHandle(1))));
    }

    #[test]
    fn out_of_bounds_selection_rejected() {
        let (workers, _, _) = setup(DistPair::VC_STAR, 1, 2, 2);
        let c = BlockChunk {
            handle_id: 1,
            rows: StridedRange::contiguous(0, 3),
            cols: StridedRange::contiguous(0, 2),
            elem_type: ElemType::F64,
            offset: 0,
            elements: vec![0.0; 6],
        };
        assert!(matches!(workers[0].receive(7, &c), Err(Error::InvalidArgument(_))));
        assert!(!workers[0].is_complete(7, 1).unwrap());
    }
}

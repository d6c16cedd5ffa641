use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::layout::{DistPair, Layout, ProcessGrid};
use crate::protocol::{ElemType, MatrixInfo, TaskValue};
use crate::testlib::SimState;

use super::worker::Worker;

/// A library callable by name from `RUN_TASK`.
pub trait Library: Send + Sync {
    fn name(&self) -> &'static str;

    fn call(&self, ctx: &mut TaskContext<'_>, function: &str, args: &[TaskValue]) -> Result<Vec<TaskValue>>;
}

/// What a library function sees of the session it runs in.
///
/// Per-worker stages run on every session worker in parallel and only see
/// that worker's local block; anything crossing workers goes through the
/// driver-side reductions here.
pub struct TaskContext<'a> {
    session_id: u64,
    grid: ProcessGrid,
    workers: Vec<Arc<Worker>>,
    handles: BTreeMap<u64, MatrixInfo>,
    next_handle: &'a AtomicU64,
    pub sim: SimState,
    created: Vec<MatrixInfo>,
    temporaries: Vec<u64>,
}

impl<'a> TaskContext<'a> {
    pub(crate) fn new(
        session_id: u64,
        grid: ProcessGrid,
        workers: Vec<Arc<Worker>>,
        handles: BTreeMap<u64, MatrixInfo>,
        next_handle: &'a AtomicU64,
        sim: SimState,
    ) -> Self {
        debug_assert_eq!(grid.size(), workers.len());
        Self { session_id, grid, workers, handles, next_handle, sim, created: Vec::new(), temporaries: Vec::new() }
    }

    pub fn grid(&self) -> ProcessGrid {
        self.grid
    }

    pub fn layout(&self, pair: DistPair) -> Layout {
        Layout::new(self.grid, pair)
    }

    pub fn matrix(&self, id: u64) -> Result<MatrixInfo> {
        self.handles.get(&id).copied().ok_or(Error::StaleHandle(id))
    }

    /// Looks up a handle argument and checks it is complete on every worker.
    pub fn complete_matrix(&self, value: &TaskValue) -> Result<MatrixInfo> {
        let id = value.as_handle().ok_or_else(|| Error::InvalidArgument(format!("expected a matrix handle, got {value:?}")))?;
        let info = self.matrix(id)?;
        for w in &self.workers {
            if !w.is_complete(self.session_id, id)? {
                return Err(Error::NotReady(id));
            }
        }
        Ok(info)
    }

    /// Runs `f` on every worker's local block of `id`, in parallel. Results
    /// are in session rank order.
    pub fn map_local<R, F>(&self, id: u64, f: F) -> Result<Vec<R>>
    where
        R: Send,
        F: Fn(usize, ArrayView2<'_, f64>) -> R + Sync,
    {
        let sid = self.session_id;
        std::thread::scope(|s| {
            let handles: Vec<_> = self
                .workers
                .iter()
                .enumerate()
                .map(|(rank, w)| {
                    let f = &f;
                    s.spawn(move || w.with_block(sid, id, |blk| f(rank, blk)))
                })
                .collect();
            handles.into_iter().map(|h| h.join().map_err(|_| Error::Internal("worker stage panicked".into()))?).collect()
        })
    }

    fn new_info(&self, m: usize, n: usize, pair: DistPair) -> MatrixInfo {
        let id = self.next_handle.fetch_add(1, Ordering::Relaxed);
        MatrixInfo { id, m: m as u64, n: n as u64, pair, elem_type: ElemType::F64 }
    }

    fn register(&mut self, info: MatrixInfo, temporary: bool) {
        self.handles.insert(info.id, info);
        if temporary {
            self.temporaries.push(info.id);
        } else {
            self.created.push(info);
        }
    }

    /// Creates a `[VC,STAR]` matrix with the same rows as `src` (also
    /// `[VC,STAR]`); each worker computes its output rows from its own rows
    /// of `src`.
    pub fn derive_rows<F>(&mut self, src: &MatrixInfo, n: usize, f: F) -> Result<MatrixInfo>
    where
        F: Fn(usize, ArrayView2<'_, f64>) -> Array2<f64> + Sync,
    {
        if src.pair != DistPair::VC_STAR {
            return Err(Error::Internal(format!("derive_rows needs a [VC,STAR] source, got {}", src.pair)));
        }
        let info = self.new_info(src.rows(), n, DistPair::VC_STAR);
        let layout = self.layout(DistPair::VC_STAR);
        let sid = self.session_id;
        let blocks = self.map_local(src.id, &f)?;
        for (rank, (w, block)) in self.workers.iter().zip(blocks).enumerate() {
            w.install(sid, info, layout, rank, block)?;
        }
        self.register(info, false);
        Ok(info)
    }

    fn scatter_inner(&mut self, dense: &Array2<f64>, pair: DistPair, temporary: bool) -> Result<MatrixInfo> {
        let (m, n) = dense.dim();
        let info = self.new_info(m, n, pair);
        let layout = self.layout(pair);
        for (rank, w) in self.workers.iter().enumerate() {
            let (lr, lc) = layout.local_shape(rank, m, n);
            let block = match (layout.row_share(rank), layout.col_share(rank)) {
                (Some(rs), Some(cs)) => Array2::from_shape_fn((lr, lc), |(li, lj)| dense[[rs.to_global(li), cs.to_global(lj)]]),
                _ => Array2::zeros((0, 0)),
            };
            w.install(self.session_id, info, layout, rank, block)?;
        }
        self.register(info, temporary);
        Ok(info)
    }

    /// Distributes a driver-side dense matrix as a new output matrix.
    pub fn scatter(&mut self, dense: &Array2<f64>, pair: DistPair) -> Result<MatrixInfo> {
        self.scatter_inner(dense, pair, false)
    }

    /// Collects a distributed matrix on the driver.
    pub fn gather(&self, id: u64) -> Result<Array2<f64>> {
        let info = self.matrix(id)?;
        let layout = self.layout(info.pair);
        let mut dense = Array2::zeros((info.rows(), info.cols()));
        for (rank, w) in self.workers.iter().enumerate() {
            let (Some(rs), Some(cs)) = (layout.row_share(rank), layout.col_share(rank)) else {
                continue;
            };
            w.with_block(self.session_id, id, |blk| {
                for ((li, lj), v) in blk.indexed_iter() {
                    dense[[rs.to_global(li), cs.to_global(lj)]] = *v;
                }
            })?;
        }
        Ok(dense)
    }

    /// Returns `src` laid out as `pair`, copying through the driver when the
    /// layout differs. Copies are dropped when the task ends.
    pub fn redistribute(&mut self, src: &MatrixInfo, pair: DistPair) -> Result<MatrixInfo> {
        if src.pair == pair {
            return Ok(*src);
        }
        let dense = self.gather(src.id)?;
        self.scatter_inner(&dense, pair, true)
    }

    /// Ends the task: drops temporaries and returns the matrices to register
    /// with the session along with the simulator state.
    pub(crate) fn finish(self) -> (Vec<MatrixInfo>, SimState) {
        for id in &self.temporaries {
            for w in &self.workers {
                w.release(self.session_id, *id);
            }
        }
        (self.created, self.sim)
    }

    /// Drops matrices created so far; used when a task fails midway.
    pub(crate) fn abort(self) {
        for id in self.temporaries.iter().chain(self.created.iter().map(|m| &m.id)) {
            for w in &self.workers {
                w.release(self.session_id, *id);
            }
        }
    }
}

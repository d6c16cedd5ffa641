use std::io::Write;

use crate::error::{Error, Result};
use crate::layout::Layout;
use crate::protocol::{
    chunk_capacity, chunk_spans, encode_chunk_with, write_frame, BlockAck, ChunkView, Command, CreateMatrix,
    FetchRequest, Frame, Handshake, HandshakeReply, LibraryLoaded, LoadLibrary, MatrixCreated, MatrixInfo,
    RequestWorkers, TaskRequest, TaskResult, Wire, WorkerGroup, WorkerTable, MIN_BUFFER_BYTES,
};
use crate::testlib;

use super::task::TaskContext;
use super::Shared;

fn reply<W: Write>(w: &mut W, session_id: u64, payload: Vec<u8>, buffer: usize) -> Result<()> {
    write_frame(w, &Frame::new(Command::Ok, session_id, payload), buffer)?;
    Ok(())
}

pub(crate) fn handle_driver<W: Write>(shared: &Shared, frame: Frame, w: &mut W) -> Result<()> {
    let sid = frame.session_id;
    match frame.command {
        Command::Handshake => {
            let hs = Handshake::from_payload(&frame.payload)?;
            let proposed = usize::try_from(hs.buffer_bytes).unwrap_or(usize::MAX);
            if proposed < MIN_BUFFER_BYTES {
                return Err(Error::InvalidBuffer(format!(
                    "proposed buffer of {proposed} bytes is below the minimum of {MIN_BUFFER_BYTES}"
                )));
            }
            let buffer = proposed.min(shared.config.max_buffer_bytes);
            let id = shared.state().open_session(buffer);
            log::info!("session {id} opened with a {buffer}-byte buffer");
            let payload = HandshakeReply { session_id: id, buffer_bytes: buffer as u64 }.to_payload();
            reply(w, id, payload, buffer)
        }
        Command::RequestWorkers => {
            let req = RequestWorkers::from_payload(&frame.payload)?;
            let (ranks, grid, buffer) = {
                let mut st = shared.state();
                let (ranks, grid) = st.request_workers(sid, req.count as usize)?;
                (ranks, grid, st.session(sid)?.buffer_bytes)
            };
            log::info!("session {sid} allocated workers {ranks:?} on a {grid} grid");
            let group = WorkerGroup {
                grid_rows: grid.rows() as u32,
                grid_cols: grid.cols() as u32,
                workers: ranks.iter().map(|&r| shared.worker_info(r)).collect(),
            };
            reply(w, sid, group.to_payload(), buffer)
        }
        Command::LoadLibrary => {
            let req = LoadLibrary::from_payload(&frame.payload)?;
            let lib_id = testlib::library_id(&req.name).ok_or(Error::LibraryNotFound(req.name))?;
            let buffer = {
                let mut st = shared.state();
                let s = st.session_mut(sid)?;
                s.libs.insert(lib_id);
                s.buffer_bytes
            };
            reply(w, sid, LibraryLoaded { lib_id }.to_payload(), buffer)
        }
        Command::CreateMatrix => {
            let req = CreateMatrix::from_payload(&frame.payload)?;
            let (created, buffer) = {
                let mut st = shared.state();
                let s = st.session_mut(sid)?;
                let grid = s.grid()?;
                let layout = Layout::new(grid, req.pair);
                let id = shared.next_handle.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                let info = MatrixInfo { id, m: req.m, n: req.n, pair: req.pair, elem_type: req.elem_type };
                let mut local_shapes = Vec::with_capacity(s.ranks.len());
                for (r, &rank) in s.ranks.iter().enumerate() {
                    shared.workers[rank].allocate(sid, info, layout, r);
                    let (lr, lc) = layout.local_shape(r, info.rows(), info.cols());
                    local_shapes.push((lr as u64, lc as u64));
                }
                s.handles.insert(id, info);
                (MatrixCreated { info, local_shapes }, s.buffer_bytes)
            };
            reply(w, sid, created.to_payload(), buffer)
        }
        Command::RunTask => {
            let req = TaskRequest::from_payload(&frame.payload)?;
            let result = run_task(shared, sid, &req)?;
            let buffer = shared.state().session(sid)?.buffer_bytes;
            reply(w, sid, result.to_payload(), buffer)
        }
        Command::ListWorkers => {
            let (table, buffer) = {
                let st = shared.state();
                let buffer = st.session(sid).map(|s| s.buffer_bytes).unwrap_or(shared.config.max_buffer_bytes);
                let workers = (0..shared.workers.len())
                    .map(|r| (shared.worker_info(r), st.holder_of(r).unwrap_or(0)))
                    .collect();
                (WorkerTable { workers }, buffer)
            };
            reply(w, sid, table.to_payload(), buffer)
        }
        Command::CloseSession => {
            let session = shared.state().close_session(sid)?;
            let mut dropped = 0;
            for &rank in &session.ranks {
                dropped += shared.workers[rank].drop_session(sid);
            }
            log::info!("session {sid} closed, released {} workers and {dropped} local blocks", session.ranks.len());
            reply(w, sid, Vec::new(), session.buffer_bytes)
        }
        other => Err(Error::Protocol(format!("{other} is not accepted by the driver"))),
    }
}

fn run_task(shared: &Shared, sid: u64, req: &TaskRequest) -> Result<TaskResult> {
    let lib = testlib::library(req.lib_id).ok_or_else(|| Error::LibraryNotFound(format!("library id {}", req.lib_id)))?;
    let (grid, workers, handles, sim) = {
        let st = shared.state();
        let s = st.session(sid)?;
        if !s.libs.contains(&req.lib_id) {
            return Err(Error::LibraryNotFound(format!("{} is not loaded in session {sid}", lib.name())));
        }
        let workers = s.ranks.iter().map(|&r| shared.workers[r].clone()).collect();
        (s.grid()?, workers, s.handles.clone(), s.sim.clone())
    };
    let mut ctx = TaskContext::new(sid, grid, workers, handles, &shared.next_handle, sim);
    match lib.call(&mut ctx, &req.function, &req.args) {
        Ok(values) => {
            let (created, sim) = ctx.finish();
            let mut st = shared.state();
            match st.session_mut(sid) {
                Ok(s) => {
                    s.handles.extend(created.iter().map(|m| (m.id, *m)));
                    s.sim = sim;
                }
                Err(e) => {
                    for m in &created {
                        for wk in &shared.workers {
                            wk.release(sid, m.id);
                        }
                    }
                    return Err(e);
                }
            }
            Ok(TaskResult { values })
        }
        Err(e) => {
            ctx.abort();
            Err(e)
        }
    }
}

pub(crate) fn handle_worker<W: Write>(shared: &Shared, rank: usize, frame: Frame, w: &mut W) -> Result<()> {
    let sid = frame.session_id;
    let buffer = {
        let st = shared.state();
        let s = st.session(sid)?;
        if s.session_rank(rank).is_none() {
            return Err(Error::StaleSession(sid));
        }
        s.buffer_bytes
    };
    if frame.wire_len() > buffer {
        return Err(Error::FrameTooLarge { len: frame.payload_len(), max: crate::protocol::max_payload(buffer) });
    }
    let worker = &shared.workers[rank];
    match frame.command {
        Command::SendBlock => {
            let chunk = ChunkView::parse(&frame.payload)?;
            let received = worker.receive_view(sid, &chunk)?;
            reply(w, sid, BlockAck { received }.to_payload(), buffer)
        }
        Command::FetchBlock => {
            let req = FetchRequest::from_payload(&frame.payload)?;
            let block = worker.fetch(sid, &req)?;
            let cap = chunk_capacity(buffer, block.elem_type)?;
            for (offset, count) in chunk_spans(block.len(), cap) {
                let payload = encode_chunk_with(
                    block.handle_id,
                    &block.rows,
                    &block.cols,
                    block.elem_type,
                    offset,
                    count,
                    block.elements[offset..offset + count].iter().copied(),
                );
                write_frame(w, &Frame::new(Command::Ok, sid, payload), buffer)?;
            }
            Ok(())
        }
        other => Err(Error::Protocol(format!("{other} is not accepted by worker endpoints"))),
    }
}

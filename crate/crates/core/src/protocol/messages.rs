//! Payloads of the control commands.

use bytes::BufMut;

use crate::error::{Error, ErrorCode, Result};
use crate::layout::{DistPair, DistScheme, StridedRange};

use super::block::ElemType;
use super::codec::{put_range, put_string, Decoder, Wire};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Handshake {
    pub buffer_bytes: u64,
}

impl Wire for Handshake {
    fn encode(&self, out: &mut Vec<u8>) {
        out.put_u64_le(self.buffer_bytes);
    }

    fn decode(d: &mut Decoder<'_>) -> Result<Self> {
        Ok(Handshake { buffer_bytes: d.u64()? })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HandshakeReply {
    pub session_id: u64,
    pub buffer_bytes: u64,
}

impl Wire for HandshakeReply {
    fn encode(&self, out: &mut Vec<u8>) {
        out.put_u64_le(self.session_id);
        out.put_u64_le(self.buffer_bytes);
    }

    fn decode(d: &mut Decoder<'_>) -> Result<Self> {
        Ok(HandshakeReply { session_id: d.u64()?, buffer_bytes: d.u64()? })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RequestWorkers {
    pub count: u32,
}

impl Wire for RequestWorkers {
    fn encode(&self, out: &mut Vec<u8>) {
        out.put_u32_le(self.count);
    }

    fn decode(d: &mut Decoder<'_>) -> Result<Self> {
        Ok(RequestWorkers { count: d.u32()? })
    }
}

/// A worker endpoint. Driver listens on the start port, worker `rank` on
/// `start_port + 1 + rank`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WorkerInfo {
    pub rank: u32,
    pub host: String,
    pub port: u16,
}

impl WorkerInfo {
    pub fn address(&self) -> String {
        format!("{}:{}", self.host, self.port)
    }
}

impl Wire for WorkerInfo {
    fn encode(&self, out: &mut Vec<u8>) {
        out.put_u32_le(self.rank);
        put_string(out, &self.host);
        out.put_u16_le(self.port);
    }

    fn decode(d: &mut Decoder<'_>) -> Result<Self> {
        Ok(WorkerInfo { rank: d.u32()?, host: d.string()?, port: d.u16()? })
    }
}

/// Reply to `REQUEST_WORKERS`: the allocated workers in session rank order
/// and the grid laid over them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkerGroup {
    pub grid_rows: u32,
    pub grid_cols: u32,
    pub workers: Vec<WorkerInfo>,
}

impl Wire for WorkerGroup {
    fn encode(&self, out: &mut Vec<u8>) {
        out.put_u32_le(self.grid_rows);
        out.put_u32_le(self.grid_cols);
        out.put_u32_le(self.workers.len() as u32);
        for w in &self.workers {
            w.encode(out);
        }
    }

    fn decode(d: &mut Decoder<'_>) -> Result<Self> {
        let grid_rows = d.u32()?;
        let grid_cols = d.u32()?;
        let n = d.u32()? as usize;
        let workers = (0..n).map(|_| WorkerInfo::decode(d)).collect::<Result<_>>()?;
        Ok(WorkerGroup { grid_rows, grid_cols, workers })
    }
}

/// Reply to `LIST_WORKERS`: every worker and the session holding it
/// (0 when free).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkerTable {
    pub workers: Vec<(WorkerInfo, u64)>,
}

impl Wire for WorkerTable {
    fn encode(&self, out: &mut Vec<u8>) {
        out.put_u32_le(self.workers.len() as u32);
        for (w, s) in &self.workers {
            w.encode(out);
            out.put_u64_le(*s);
        }
    }

    fn decode(d: &mut Decoder<'_>) -> Result<Self> {
        let n = d.u32()? as usize;
        let workers = (0..n).map(|_| Ok((WorkerInfo::decode(d)?, d.u64()?))).collect::<Result<_>>()?;
        Ok(WorkerTable { workers })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadLibrary {
    pub name: String,
}

impl Wire for LoadLibrary {
    fn encode(&self, out: &mut Vec<u8>) {
        put_string(out, &self.name);
    }

    fn decode(d: &mut Decoder<'_>) -> Result<Self> {
        Ok(LoadLibrary { name: d.string()? })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LibraryLoaded {
    pub lib_id: u32,
}

impl Wire for LibraryLoaded {
    fn encode(&self, out: &mut Vec<u8>) {
        out.put_u32_le(self.lib_id);
    }

    fn decode(d: &mut Decoder<'_>) -> Result<Self> {
        Ok(LibraryLoaded { lib_id: d.u32()? })
    }
}

fn put_pair(out: &mut Vec<u8>, pair: DistPair) {
    out.put_u8(pair.col_scheme().code());
    out.put_u8(pair.row_scheme().code());
}

fn get_pair(d: &mut Decoder<'_>) -> Result<DistPair> {
    let col = DistScheme::from_code(d.u8()?)?;
    let row = DistScheme::from_code(d.u8()?)?;
    DistPair::new(col, row)
}

/// Descriptor of a distributed matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MatrixInfo {
    pub id: u64,
    pub m: u64,
    pub n: u64,
    pub pair: DistPair,
    pub elem_type: ElemType,
}

impl MatrixInfo {
    pub fn rows(&self) -> usize {
        self.m as usize
    }

    pub fn cols(&self) -> usize {
        self.n as usize
    }
}

impl Wire for MatrixInfo {
    fn encode(&self, out: &mut Vec<u8>) {
        out.put_u64_le(self.id);
        out.put_u64_le(self.m);
        out.put_u64_le(self.n);
        put_pair(out, self.pair);
        out.put_u8(self.elem_type.code());
    }

    fn decode(d: &mut Decoder<'_>) -> Result<Self> {
        Ok(MatrixInfo {
            id: d.u64()?,
            m: d.u64()?,
            n: d.u64()?,
            pair: get_pair(d)?,
            elem_type: ElemType::from_code(d.u8()?)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CreateMatrix {
    pub m: u64,
    pub n: u64,
    pub pair: DistPair,
    pub elem_type: ElemType,
}

impl Wire for CreateMatrix {
    fn encode(&self, out: &mut Vec<u8>) {
        out.put_u64_le(self.m);
        out.put_u64_le(self.n);
        put_pair(out, self.pair);
        out.put_u8(self.elem_type.code());
    }

    fn decode(d: &mut Decoder<'_>) -> Result<Self> {
        Ok(CreateMatrix { m: d.u64()?, n: d.u64()?, pair: get_pair(d)?, elem_type: ElemType::from_code(d.u8()?)? })
    }
}

/// Reply to `CREATE_MATRIX`: the handle and each session rank's local shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatrixCreated {
    pub info: MatrixInfo,
    pub local_shapes: Vec<(u64, u64)>,
}

impl Wire for MatrixCreated {
    fn encode(&self, out: &mut Vec<u8>) {
        self.info.encode(out);
        out.put_u32_le(self.local_shapes.len() as u32);
        for (r, c) in &self.local_shapes {
            out.put_u64_le(*r);
            out.put_u64_le(*c);
        }
    }

    fn decode(d: &mut Decoder<'_>) -> Result<Self> {
        let info = MatrixInfo::decode(d)?;
        let n = d.u32()? as usize;
        let local_shapes = (0..n).map(|_| Ok((d.u64()?, d.u64()?))).collect::<Result<_>>()?;
        Ok(MatrixCreated { info, local_shapes })
    }
}

/// `FETCH_BLOCK` request: a strided selection in global coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FetchRequest {
    pub handle_id: u64,
    pub rows: StridedRange,
    pub cols: StridedRange,
}

impl Wire for FetchRequest {
    fn encode(&self, out: &mut Vec<u8>) {
        out.put_u64_le(self.handle_id);
        put_range(out, &self.rows);
        put_range(out, &self.cols);
    }

    fn decode(d: &mut Decoder<'_>) -> Result<Self> {
        Ok(FetchRequest { handle_id: d.u64()?, rows: d.range()?, cols: d.range()? })
    }
}

/// Reply to `SEND_BLOCK`: number of elements written.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockAck {
    pub received: u64,
}

impl Wire for BlockAck {
    fn encode(&self, out: &mut Vec<u8>) {
        out.put_u64_le(self.received);
    }

    fn decode(d: &mut Decoder<'_>) -> Result<Self> {
        Ok(BlockAck { received: d.u64()? })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorReply {
    pub code: u16,
    pub message: String,
}

impl ErrorReply {
    pub fn from_error(e: &Error) -> Self {
        ErrorReply { code: e.code() as u16, message: e.to_string() }
    }

    pub fn into_error(self) -> Error {
        match ErrorCode::from_u16(self.code) {
            Some(code) => Error::Remote { code, message: self.message },
            None => Error::Protocol(format!("unknown error code {}: {}", self.code, self.message)),
        }
    }
}

impl Wire for ErrorReply {
    fn encode(&self, out: &mut Vec<u8>) {
        out.put_u16_le(self.code);
        put_string(out, &self.message);
    }

    fn decode(d: &mut Decoder<'_>) -> Result<Self> {
        Ok(ErrorReply { code: d.u16()?, message: d.string()? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn control_payloads_round_trip() {
        let group = WorkerGroup {
            grid_rows: 2,
            grid_cols: 2,
            workers: (0..4).map(|r| WorkerInfo { rank: r, host: "nid00657".into(), port: 24961 + r as u16 }).collect(),
        };
        assert_eq!(WorkerGroup::from_payload(&group.to_payload()).unwrap(), group);

        let created = MatrixCreated {
            info: MatrixInfo { id: 9, m: 1000, n: 1000, pair: DistPair::VC_STAR, elem_type: ElemType::F64 },
            local_shapes: vec![(334, 1000), (333, 1000), (333, 1000)],
        };
        assert_eq!(MatrixCreated::from_payload(&created.to_payload()).unwrap(), created);

        let err = ErrorReply::from_error(&Error::OutOfWorkers { requested: 4, free: 2 });
        let back = ErrorReply::from_payload(&err.to_payload()).unwrap().into_error();
        assert_eq!(back.code(), ErrorCode::OutOfWorkers);
    }

    #[test]
    fn illegal_pair_rejected_on_decode() {
        let mut bytes = CreateMatrix { m: 1, n: 1, pair: DistPair::VC_STAR, elem_type: ElemType::F64 }.to_payload();
        // [STAR,STAR]
        bytes[16] = DistScheme::Star.code();
        assert!(matches!(CreateMatrix::from_payload(&bytes), Err(Error::InvalidLayout(_))));
    }
}

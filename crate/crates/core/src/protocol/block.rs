use bytes::BufMut;

use crate::error::{Error, Result};
use crate::layout::StridedRange;

use super::codec::{put_range, Decoder, Wire};
use super::frame::{Command, Frame, HEADER_LEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ElemType {
    #[default]
    F64,
    F32,
}

impl ElemType {
    pub fn code(self) -> u8 {
        match self {
            ElemType::F64 => 0,
            ElemType::F32 => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(ElemType::F64),
            1 => Ok(ElemType::F32),
            other => Err(Error::Decode(format!("unknown element type {other}"))),
        }
    }

    pub fn size(self) -> usize {
        match self {
            ElemType::F64 => 8,
            ElemType::F32 => 4,
        }
    }

    pub fn put(self, out: &mut Vec<u8>, v: f64) {
        match self {
            ElemType::F64 => out.put_u64_le(v.to_bits()),
            ElemType::F32 => out.put_u32_le((v as f32).to_bits()),
        }
    }

    pub fn get(self, d: &mut Decoder<'_>) -> Result<f64> {
        Ok(match self {
            ElemType::F64 => f64::from_bits(d.u64()?),
            ElemType::F32 => f32::from_bits(d.u32()?) as f64,
        })
    }
}

/// A strided selection of a distributed matrix together with its values in
/// row-major traversal order of the selection.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMessage {
    pub handle_id: u64,
    pub rows: StridedRange,
    pub cols: StridedRange,
    pub elem_type: ElemType,
    pub elements: Vec<f64>,
}

impl BlockMessage {
    pub fn len(&self) -> usize {
        self.rows.count * self.cols.count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Global coordinate of the `k`-th element in traversal order.
    pub fn coord(&self, k: usize) -> (usize, usize) {
        selection_coord(&self.rows, &self.cols, k)
    }
}

pub fn selection_coord(rows: &StridedRange, cols: &StridedRange, k: usize) -> (usize, usize) {
    (rows.get(k / cols.count), cols.get(k % cols.count))
}

/// A contiguous run (in traversal order) of a block's elements; the unit
/// carried by one `SEND_BLOCK` frame or one fetch reply frame.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockChunk {
    pub handle_id: u64,
    pub rows: StridedRange,
    pub cols: StridedRange,
    pub elem_type: ElemType,
    /// Index of the first carried element within the block's traversal.
    pub offset: u64,
    pub elements: Vec<f64>,
}

/// handle u64, two strided ranges (6 x u64), elem_type u8, offset u64, count u32.
pub const CHUNK_META_LEN: usize = 8 + 6 * 8 + 1 + 8 + 4;

/// Elements that fit in one chunk frame under `buffer_bytes`.
pub fn chunk_capacity(buffer_bytes: usize, elem_type: ElemType) -> Result<usize> {
    let room = buffer_bytes.saturating_sub(HEADER_LEN + CHUNK_META_LEN);
    let cap = (room / elem_type.size()).min(u32::MAX as usize);
    if cap == 0 {
        return Err(Error::InvalidBuffer(format!(
            "{buffer_bytes} bytes cannot hold a block chunk (header {HEADER_LEN} + metadata {CHUNK_META_LEN} + one element)"
        )));
    }
    Ok(cap)
}

/// `(offset, count)` of each chunk needed for `total` elements. An empty
/// block still produces one empty chunk.
pub fn chunk_spans(total: usize, capacity: usize) -> impl Iterator<Item = (usize, usize)> {
    let n = total.div_ceil(capacity).max(1);
    (0..n).map(move |k| {
        let start = k * capacity;
        (start, capacity.min(total - start))
    })
}

/// Encodes a chunk payload, pulling element values from `elements`.
pub fn encode_chunk_with(
    handle_id: u64,
    rows: &StridedRange,
    cols: &StridedRange,
    elem_type: ElemType,
    offset: usize,
    count: usize,
    elements: impl Iterator<Item = f64>,
) -> Vec<u8> {
    let mut out = Vec::with_capacity(CHUNK_META_LEN + count * elem_type.size());
    out.put_u64_le(handle_id);
    put_range(&mut out, rows);
    put_range(&mut out, cols);
    out.put_u8(elem_type.code());
    out.put_u64_le(offset as u64);
    out.put_u32_le(count as u32);
    let mut written = 0;
    for v in elements.take(count) {
        elem_type.put(&mut out, v);
        written += 1;
    }
    debug_assert_eq!(written, count);
    out
}

impl Wire for BlockChunk {
    fn encode(&self, out: &mut Vec<u8>) {
        let payload = encode_chunk_with(
            self.handle_id,
            &self.rows,
            &self.cols,
            self.elem_type,
            self.offset as usize,
            self.elements.len(),
            self.elements.iter().copied(),
        );
        out.extend_from_slice(&payload);
    }

    fn decode(d: &mut Decoder<'_>) -> Result<Self> {
        Ok(ChunkView::read(d)?.to_chunk())
    }
}

/// A parsed chunk whose element bytes stay in the payload.
#[derive(Debug, Clone, Copy)]
pub struct ChunkView<'a> {
    pub handle_id: u64,
    pub rows: StridedRange,
    pub cols: StridedRange,
    pub elem_type: ElemType,
    pub offset: u64,
    pub count: usize,
    data: &'a [u8],
}

impl<'a> ChunkView<'a> {
    /// Parses a whole chunk payload.
    pub fn parse(payload: &'a [u8]) -> Result<Self> {
        Self::read(&mut Decoder::new(payload))
    }

    /// Reads a chunk that takes up the rest of `d`.
    pub fn read(d: &mut Decoder<'a>) -> Result<Self> {
        let handle_id = d.u64()?;
        let rows = d.range()?;
        let cols = d.range()?;
        let elem_type = ElemType::from_code(d.u8()?)?;
        let offset = d.u64()?;
        let count = d.u32()? as usize;
        let total = rows.count.checked_mul(cols.count).ok_or_else(|| Error::Decode("selection overflows".into()))?;
        if offset as usize > total || count > total - offset as usize {
            return Err(Error::Decode(format!("chunk {offset}+{count} exceeds selection of {total} elements")));
        }
        if d.remaining() != count * elem_type.size() {
            return Err(Error::Decode(format!("chunk declares {count} elements but carries {} bytes", d.remaining())));
        }
        let data = d.take(d.remaining())?;
        Ok(ChunkView { handle_id, rows, cols, elem_type, offset, count, data })
    }

    /// Element `k` of this chunk, `k < count`.
    pub fn get(&self, k: usize) -> f64 {
        match self.elem_type {
            ElemType::F64 => {
                let b = &self.data[k * 8..k * 8 + 8];
                f64::from_le_bytes(b.try_into().expect("8 bytes"))
            }
            ElemType::F32 => {
                let b = &self.data[k * 4..k * 4 + 4];
                f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64
            }
        }
    }

    pub fn to_chunk(&self) -> BlockChunk {
        BlockChunk {
            handle_id: self.handle_id,
            rows: self.rows,
            cols: self.cols,
            elem_type: self.elem_type,
            offset: self.offset,
            elements: (0..self.count).map(|k| self.get(k)).collect(),
        }
    }
}

/// Visits elements `offset..offset + count` of a selection's row-major
/// traversal one row segment at a time, as `(k, row, first_col, len)` where
/// `k` counts from `offset` and the segment covers columns
/// `first_col..first_col + len` of the selection.
pub fn for_each_segment(cols_in_selection: usize, offset: usize, count: usize, mut f: impl FnMut(usize, usize, usize, usize)) {
    if cols_in_selection == 0 {
        return;
    }
    let mut k = 0;
    while k < count {
        let g = offset + k;
        let (row, col) = (g / cols_in_selection, g % cols_in_selection);
        let len = (cols_in_selection - col).min(count - k);
        f(k, row, col, len);
        k += len;
    }
}

/// Splits `block` into `SEND_BLOCK` frames that each fit in `buffer_bytes`.
pub fn chunk_block(block: &BlockMessage, session_id: u64, buffer_bytes: usize) -> Result<Vec<Frame>> {
    if block.elements.len() != block.len() {
        return Err(Error::InvalidArgument(format!(
            "block carries {} elements for a {}x{} selection",
            block.elements.len(),
            block.rows.count,
            block.cols.count
        )));
    }
    let cap = chunk_capacity(buffer_bytes, block.elem_type)?;
    Ok(chunk_spans(block.len(), cap)
        .map(|(offset, count)| {
            let payload = encode_chunk_with(
                block.handle_id,
                &block.rows,
                &block.cols,
                block.elem_type,
                offset,
                count,
                block.elements[offset..offset + count].iter().copied(),
            );
            Frame::new(Command::SendBlock, session_id, payload)
        })
        .collect())
}

/// Reassembles chunks, given in order, into the block they came from.
pub fn reassemble(chunks: &[BlockChunk]) -> Result<BlockMessage> {
    let first = chunks.first().ok_or_else(|| Error::Decode("no chunks".into()))?;
    let mut elements = Vec::with_capacity(first.rows.count * first.cols.count);
    for c in chunks {
        if (c.handle_id, c.rows, c.cols, c.elem_type) != (first.handle_id, first.rows, first.cols, first.elem_type) {
            return Err(Error::Decode("chunks belong to different blocks".into()));
        }
        if c.offset as usize != elements.len() {
            return Err(Error::Decode(format!("chunk at {} follows {} elements", c.offset, elements.len())));
        }
        elements.extend_from_slice(&c.elements);
    }
    let block = BlockMessage {
        handle_id: first.handle_id,
        rows: first.rows,
        cols: first.cols,
        elem_type: first.elem_type,
        elements,
    };
    if block.elements.len() != block.len() {
        return Err(Error::Decode(format!("reassembled {} of {} elements", block.elements.len(), block.len())));
    }
    Ok(block)
}

use bytes::BufMut;

use crate::error::{Error, Result};
use crate::layout::StridedRange;

/// Types with a fixed little-endian payload encoding.
pub trait Wire: Sized {
    fn encode(&self, out: &mut Vec<u8>);
    fn decode(d: &mut Decoder<'_>) -> Result<Self>;

    fn to_payload(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode(&mut out);
        out
    }

    /// Decodes a whole payload; trailing bytes are an error.
    fn from_payload(payload: &[u8]) -> Result<Self> {
        let mut d = Decoder::new(payload);
        let v = Self::decode(&mut d)?;
        d.finish()?;
        Ok(v)
    }
}

/// Bounds-checked little-endian reader over a payload.
pub struct Decoder<'a> {
    buf: &'a [u8],
}

macro_rules! get_le {
    ($name:ident, $t:ty) => {
        pub fn $name(&mut self) -> Result<$t> {
            let bytes = self.take(std::mem::size_of::<$t>())?;
            Ok(<$t>::from_le_bytes(bytes.try_into().expect("sized slice")))
        }
    };
}

impl<'a> Decoder<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len()
    }

    pub fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.buf.len() < len {
            return Err(Error::Decode(format!("need {len} bytes, {} left", self.buf.len())));
        }
        let (head, tail) = self.buf.split_at(len);
        self.buf = tail;
        Ok(head)
    }

    get_le!(u8, u8);
    get_le!(u16, u16);
    get_le!(u32, u32);
    get_le!(u64, u64);
    get_le!(i64, i64);
    get_le!(f64, f64);

    pub fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| Error::Decode(format!("{v} does not fit in usize")))
    }

    pub fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|e| Error::Decode(format!("invalid utf-8: {e}")))
    }

    pub fn range(&mut self) -> Result<StridedRange> {
        Ok(StridedRange { start: self.usize()?, stride: self.usize()?, count: self.usize()? })
    }

    pub fn finish(self) -> Result<()> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(Error::Decode(format!("{} trailing bytes", self.buf.len())))
        }
    }
}

pub fn put_string(out: &mut Vec<u8>, s: &str) {
    out.put_u32_le(s.len() as u32);
    out.put_slice(s.as_bytes());
}

pub fn put_range(out: &mut Vec<u8>, r: &StridedRange) {
    out.put_u64_le(r.start as u64);
    out.put_u64_le(r.stride as u64);
    out.put_u64_le(r.count as u64);
}

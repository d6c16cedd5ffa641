use crate::error::{Error, Result};

use super::dist::{DistPair, DistScheme};
use super::grid::ProcessGrid;

/// Arithmetic progression of indices `start, start + stride, ...` with
/// `count` terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct StridedRange {
    pub start: usize,
    pub stride: usize,
    pub count: usize,
}

impl StridedRange {
    pub fn new(start: usize, stride: usize, count: usize) -> Self {
        Self { start, stride, count }
    }

    pub fn contiguous(start: usize, count: usize) -> Self {
        Self { start, stride: 1, count }
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn get(&self, k: usize) -> usize {
        debug_assert!(k < self.count);
        self.start + k * self.stride
    }

    /// One past the last index, or `start` when empty.
    pub fn end(&self) -> usize {
        if self.count == 0 {
            self.start
        } else {
            self.get(self.count - 1) + 1
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.count).map(move |k| self.get(k))
    }
}

/// The share of one matrix dimension held by a rank: every index congruent
/// to `offset` modulo `stride`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AxisShare {
    pub offset: usize,
    pub stride: usize,
}

impl AxisShare {
    pub fn owns(&self, global: usize) -> bool {
        global % self.stride == self.offset
    }

    /// Number of owned indices in `0..len`.
    pub fn count(&self, len: usize) -> usize {
        if len > self.offset {
            (len - self.offset - 1) / self.stride + 1
        } else {
            0
        }
    }

    /// Number of owned indices in `lo..hi`.
    pub fn count_in(&self, lo: usize, hi: usize) -> usize {
        self.count(hi) - self.count(lo)
    }

    pub fn to_local(&self, global: usize) -> usize {
        global / self.stride
    }

    pub fn to_global(&self, local: usize) -> usize {
        local * self.stride + self.offset
    }

    /// Owned indices in `lo..hi` as a strided range.
    pub fn range_in(&self, lo: usize, hi: usize) -> StridedRange {
        let count = self.count_in(lo, hi);
        StridedRange::new(self.to_global(self.count(lo)), self.stride, count)
    }
}

/// Position of an element inside its owner's local block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalCoord {
    pub rank: usize,
    pub li: usize,
    pub lj: usize,
}

/// A distribution pair bound to a process grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    grid: ProcessGrid,
    pair: DistPair,
}

impl Layout {
    pub fn new(grid: ProcessGrid, pair: DistPair) -> Self {
        Self { grid, pair }
    }

    pub fn grid(&self) -> ProcessGrid {
        self.grid
    }

    pub fn pair(&self) -> DistPair {
        self.pair
    }

    fn share(&self, scheme: DistScheme, rank: usize) -> Option<AxisShare> {
        let g = &self.grid;
        let (a, b) = g.position(rank);
        let p = g.size();
        let (offset, stride) = match scheme {
            DistScheme::Star => (0, 1),
            DistScheme::Circ if rank == 0 => (0, 1),
            DistScheme::Circ => return None,
            DistScheme::Mc => (a, g.rows()),
            DistScheme::Mr => (b, g.cols()),
            DistScheme::Vc => (rank, p),
            DistScheme::Vr => (g.row_major_index(rank), p),
        };
        Some(AxisShare { offset, stride })
    }

    /// Row indices held by `rank`, or `None` if it holds nothing.
    pub fn row_share(&self, rank: usize) -> Option<AxisShare> {
        self.share(self.pair.col_scheme(), rank)
    }

    /// Column indices held by `rank`, or `None` if it holds nothing.
    pub fn col_share(&self, rank: usize) -> Option<AxisShare> {
        self.share(self.pair.row_scheme(), rank)
    }

    pub fn owner(&self, i: usize, j: usize) -> usize {
        let g = &self.grid;
        let p = g.size();
        match (self.pair.col_scheme(), self.pair.row_scheme()) {
            (DistScheme::Mc, DistScheme::Mr) => g.rank_at(i % g.rows(), j % g.cols()),
            (DistScheme::Mr, DistScheme::Mc) => g.rank_at(j % g.rows(), i % g.cols()),
            (DistScheme::Vc, DistScheme::Star) => i % p,
            (DistScheme::Vr, DistScheme::Star) => g.rank_row_major(i % p),
            (DistScheme::Star, DistScheme::Vc) => j % p,
            (DistScheme::Star, DistScheme::Vr) => g.rank_row_major(j % p),
            (DistScheme::Circ, DistScheme::Circ) => 0,
            _ => unreachable!("DistPair only holds legal pairs"),
        }
    }

    pub fn local_of(&self, i: usize, j: usize) -> LocalCoord {
        let rank = self.owner(i, j);
        let rs = self.row_share(rank).expect("owner holds the row");
        let cs = self.col_share(rank).expect("owner holds the column");
        LocalCoord { rank, li: rs.to_local(i), lj: cs.to_local(j) }
    }

    /// Local index of `(i, j)` on `rank`, failing if `rank` is not its owner.
    pub fn local_on(&self, rank: usize, i: usize, j: usize) -> Result<(usize, usize)> {
        match (self.row_share(rank), self.col_share(rank)) {
            (Some(rs), Some(cs)) if rs.owns(i) && cs.owns(j) => Ok((rs.to_local(i), cs.to_local(j))),
            _ => Err(Error::NotLocal { rank, i, j }),
        }
    }

    pub fn global_of(&self, rank: usize, li: usize, lj: usize) -> Result<(usize, usize)> {
        if rank >= self.grid.size() {
            return Err(Error::NotLocal { rank, i: li, j: lj });
        }
        match (self.row_share(rank), self.col_share(rank)) {
            (Some(rs), Some(cs)) => Ok((rs.to_global(li), cs.to_global(lj))),
            _ => Err(Error::NotLocal { rank, i: li, j: lj }),
        }
    }

    pub fn local_shape(&self, rank: usize, m: usize, n: usize) -> (usize, usize) {
        match (self.row_share(rank), self.col_share(rank)) {
            (Some(rs), Some(cs)) => (rs.count(m), cs.count(n)),
            _ => (0, 0),
        }
    }

    /// The global indices `rank` holds of an `m x n` matrix, restricted to
    /// rows `row_lo..row_hi` and columns `col_lo..col_hi`.
    pub fn owned_in(
        &self,
        rank: usize,
        rows: std::ops::Range<usize>,
        cols: std::ops::Range<usize>,
    ) -> Option<(StridedRange, StridedRange)> {
        let rs = self.row_share(rank)?;
        let cs = self.col_share(rank)?;
        let r = rs.range_in(rows.start, rows.end);
        let c = cs.range_in(cols.start, cols.end);
        (!r.is_empty() && !c.is_empty()).then_some((r, c))
    }

    /// Whether every element of the strided selection is stored on `rank`.
    pub fn owns_selection(&self, rank: usize, rows: &StridedRange, cols: &StridedRange) -> bool {
        if rows.is_empty() || cols.is_empty() {
            return true;
        }
        let (Some(rs), Some(cs)) = (self.row_share(rank), self.col_share(rank)) else {
            return false;
        };
        rows.iter().all(|i| rs.owns(i)) && cols.iter().all(|j| cs.owns(j))
    }
}

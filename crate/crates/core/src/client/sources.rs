use std::collections::BTreeMap;
use std::ops::Range;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::layout::validate_partitioning;

/// A matrix held as a grid of dense chunks, addressed as `(name, i, j)`.
#[derive(Debug, Clone)]
pub struct BlockedSource {
    pub name: String,
    /// Row offsets of the chunk rows; the last entry is the row count.
    pub row_offsets: Vec<usize>,
    /// Column offsets of the chunk columns; the last entry is the column count.
    pub col_offsets: Vec<usize>,
    pub chunks: BTreeMap<(usize, usize), Array2<f64>>,
}

impl BlockedSource {
    /// Cuts `dense` into chunks of at most `chunk_rows x chunk_cols`.
    pub fn from_dense(name: &str, dense: &Array2<f64>, chunk_rows: usize, chunk_cols: usize) -> Self {
        let (m, n) = dense.dim();
        let offsets = |len: usize, step: usize| -> Vec<usize> {
            let step = step.max(1);
            let mut v: Vec<usize> = (0..len).step_by(step).collect();
            v.push(len);
            v
        };
        let row_offsets = offsets(m, chunk_rows);
        let col_offsets = offsets(n, chunk_cols);
        let mut chunks = BTreeMap::new();
        for bi in 0..row_offsets.len() - 1 {
            for bj in 0..col_offsets.len() - 1 {
                let view = dense.slice(ndarray::s![
                    row_offsets[bi]..row_offsets[bi + 1],
                    col_offsets[bj]..col_offsets[bj + 1]
                ]);
                chunks.insert((bi, bj), view.to_owned());
            }
        }
        Self { name: name.to_owned(), row_offsets, col_offsets, chunks }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.row_offsets.last().copied().unwrap_or(0), self.col_offsets.last().copied().unwrap_or(0))
    }

    pub fn chunk_grid(&self) -> (usize, usize) {
        (self.row_offsets.len().saturating_sub(1), self.col_offsets.len().saturating_sub(1))
    }

    /// Global row and column ranges covered by chunk `(bi, bj)`.
    pub fn extent(&self, bi: usize, bj: usize) -> (Range<usize>, Range<usize>) {
        (self.row_offsets[bi]..self.row_offsets[bi + 1], self.col_offsets[bj]..self.col_offsets[bj + 1])
    }

    /// Checks that the chunks tile the matrix exactly.
    pub fn validate(&self) -> Result<()> {
        for (what, offs) in [("row", &self.row_offsets), ("column", &self.col_offsets)] {
            if offs.first() != Some(&0) {
                return Err(Error::InvalidSource(format!("{what} offsets must start at 0")));
            }
            if offs.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::InvalidSource(format!("{what} offsets must be non-decreasing")));
            }
        }
        let (gr, gc) = self.chunk_grid();
        for bi in 0..gr {
            for bj in 0..gc {
                let (rows, cols) = self.extent(bi, bj);
                match self.chunks.get(&(bi, bj)) {
                    None => return Err(Error::InvalidSource(format!("{}: chunk ({bi}, {bj}) is missing", self.name))),
                    Some(c) if c.dim() != (rows.len(), cols.len()) => {
                        return Err(Error::InvalidSource(format!(
                            "{}: chunk ({bi}, {bj}) is {:?}, expected {:?}",
                            self.name,
                            c.dim(),
                            (rows.len(), cols.len())
                        )))
                    }
                    _ => {}
                }
            }
        }
        if let Some(&(bi, bj)) = self.chunks.keys().find(|&&(bi, bj)| bi >= gr || bj >= gc) {
            return Err(Error::InvalidSource(format!("{}: chunk ({bi}, {bj}) lies outside the chunk grid", self.name)));
        }
        Ok(())
    }
}

/// A matrix held as contiguous row ranges, one dense block per range.
#[derive(Debug, Clone)]
pub struct RowPartitionedSource {
    pub cols: usize,
    pub partitions: Vec<(Range<usize>, Array2<f64>)>,
}

impl RowPartitionedSource {
    /// Splits `dense` into `parts` near-equal row ranges.
    pub fn from_dense(dense: &Array2<f64>, parts: usize) -> Self {
        let ranges = crate::layout::even_partitioning(dense.nrows(), parts);
        let partitions = ranges
            .into_iter()
            .map(|r| {
                let block = dense.slice(ndarray::s![r.clone(), ..]).to_owned();
                (r, block)
            })
            .collect();
        Self { cols: dense.ncols(), partitions }
    }

    pub fn rows(&self) -> usize {
        self.partitions.iter().map(|(r, _)| r.end).max().unwrap_or(0)
    }

    pub fn ranges(&self) -> Vec<Range<usize>> {
        self.partitions.iter().map(|(r, _)| r.clone()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        validate_partitioning(&self.ranges(), self.rows()).map_err(|e| Error::InvalidSource(e.to_string()))?;
        for (r, block) in &self.partitions {
            if block.dim() != (r.len(), self.cols) {
                return Err(Error::InvalidSource(format!(
                    "partition {r:?} holds a {:?} block, expected {:?}",
                    block.dim(),
                    (r.len(), self.cols)
                )));
            }
        }
        Ok(())
    }
}

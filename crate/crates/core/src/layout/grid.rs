use std::fmt;

use crate::error::{Error, Result};

/// Two-dimensional arrangement of `rows * cols` worker ranks.
///
/// Ranks are placed column-major: grid position `(a, b)` holds rank
/// `b * rows + a`. With six workers on a 2x3 grid this gives
///
/// ```text
/// 0 2 4
/// 1 3 5
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ProcessGrid {
    rows: usize,
    cols: usize,
}

impl ProcessGrid {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidGrid(format!("{rows}x{cols} grid has no ranks")));
        }
        Ok(Self { rows, cols })
    }

    /// Builds a grid for `p` workers.
    ///
    /// Without `force_rows` the row count is the largest divisor of `p` not
    /// exceeding `sqrt(p)`, so the grid is as square as possible with
    /// `rows <= cols`.
    pub fn make(p: usize, force_rows: Option<usize>) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidGrid("worker count must be at least 1".into()));
        }
        let rows = match force_rows {
            Some(r) => {
                if r == 0 || p % r != 0 {
                    return Err(Error::InvalidGrid(format!("{r} rows do not divide {p} workers")));
                }
                r
            }
            None => (1..=p).take_while(|r| r * r <= p).filter(|r| p % r == 0).last().unwrap_or(1),
        };
        Self::new(rows, p / rows)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn size(&self) -> usize {
        self.rows * self.cols
    }

    /// Rank at grid position `(a, b)`.
    pub fn rank_at(&self, a: usize, b: usize) -> usize {
        debug_assert!(a < self.rows && b < self.cols);
        b * self.rows + a
    }

    /// Grid position `(a, b)` of `rank`.
    pub fn position(&self, rank: usize) -> (usize, usize) {
        debug_assert!(rank < self.size());
        (rank % self.rows, rank / self.rows)
    }

    /// Rank at index `k` of the row-major ordering of the grid.
    pub fn rank_row_major(&self, k: usize) -> usize {
        let k = k % self.size();
        self.rank_at(k / self.cols, k % self.cols)
    }

    /// Index of `rank` in the row-major ordering of the grid.
    pub fn row_major_index(&self, rank: usize) -> usize {
        let (a, b) = self.position(rank);
        a * self.cols + b
    }
}

impl fmt::Display for ProcessGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_workers_square() {
        let g = ProcessGrid::make(4, None).unwrap();
        assert_eq!((g.rows(), g.cols()), (2, 2));
    }

    #[test]
    fn single_worker() {
        let g = ProcessGrid::make(1, None).unwrap();
        assert_eq!((g.rows(), g.cols()), (1, 1));
        assert_eq!(g.rank_at(0, 0), 0);
    }

    #[test]
    fn forced_rows_six() {
        let g = ProcessGrid::make(6, Some(2)).unwrap();
        assert_eq!((g.rows(), g.cols()), (2, 3));
        // worker IDs 1 3 5 / 2 4 6
        assert_eq!(g.rank_at(1, 1), 3);
        assert_eq!(g.rank_at(0, 2), 4);
        assert_eq!(g.position(5), (1, 2));
    }

    #[test]
    fn default_is_most_square() {
        for (p, r, c) in [(6, 2, 3), (9, 3, 3), (10, 2, 5), (7, 1, 7), (12, 3, 4), (16, 4, 4)] {
            let g = ProcessGrid::make(p, None).unwrap();
            assert_eq!((g.rows(), g.cols()), (r, c), "p={p}");
        }
    }

    #[test]
    fn rejects_non_divisor() {
        assert!(matches!(ProcessGrid::make(6, Some(4)), Err(Error::InvalidGrid(_))));
        assert!(matches!(ProcessGrid::make(6, Some(0)), Err(Error::InvalidGrid(_))));
        assert!(matches!(ProcessGrid::make(0, None), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn row_major_round_trip() {
        let g = ProcessGrid::make(6, Some(2)).unwrap();
        for k in 0..6 {
            assert_eq!(g.row_major_index(g.rank_row_major(k)), k);
        }
        // row-major order of the 2x3 grid visits ranks 0 2 4 1 3 5
        let order: Vec<_> = (0..6).map(|k| g.rank_row_major(k)).collect();
        assert_eq!(order, vec![0, 2, 4, 1, 3, 5]);
    }
}

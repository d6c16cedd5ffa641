//! Layout mathematics for distributed dense matrices.
//!
//! A [`ProcessGrid`] arranges worker ranks in two dimensions and a
//! [`DistPair`] says how matrix rows and columns are dealt out over that
//! grid. Together they form a [`Layout`], which answers who owns an
//! element, where it sits in the owner's local block, and how much traffic
//! a send will generate. Everything here is pure.

mod dist;
mod grid;
mod map;
mod plan;

pub use dist::{DistPair, DistScheme};
pub use grid::ProcessGrid;
pub use map::{AxisShare, Layout, LocalCoord, StridedRange};
pub use plan::{even_partitioning, plan_transfer, validate_partitioning, PlanEntry, TransferPlan};

use crate::error::Result;

pub fn make_grid(p: usize, force_rows: Option<usize>) -> Result<ProcessGrid> {
    ProcessGrid::make(p, force_rows)
}

pub fn owner(grid: ProcessGrid, pair: DistPair, i: usize, j: usize) -> usize {
    Layout::new(grid, pair).owner(i, j)
}

pub fn local_of(grid: ProcessGrid, pair: DistPair, i: usize, j: usize) -> LocalCoord {
    Layout::new(grid, pair).local_of(i, j)
}

pub fn global_of(grid: ProcessGrid, pair: DistPair, rank: usize, li: usize, lj: usize) -> Result<(usize, usize)> {
    Layout::new(grid, pair).global_of(rank, li, lj)
}

pub fn local_shape(grid: ProcessGrid, pair: DistPair, rank: usize, m: usize, n: usize) -> (usize, usize) {
    Layout::new(grid, pair).local_shape(rank, m, n)
}

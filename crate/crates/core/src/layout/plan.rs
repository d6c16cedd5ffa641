use std::ops::Range;

use crate::error::{Error, Result};
use crate::protocol::HEADER_LEN;

use super::map::Layout;

/// Traffic from one source partition to one rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanEntry {
    pub partition: usize,
    pub rank: usize,
    pub bytes: u64,
    /// Maximal runs of consecutive same-owner elements within a source row.
    pub fragments: u64,
    pub messages: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransferPlan {
    pub entries: Vec<PlanEntry>,
    pub total_bytes: u64,
    pub total_fragments: u64,
    pub total_messages: u64,
}

/// Checks that `partitions` are disjoint and cover `0..m` exactly.
pub fn validate_partitioning(partitions: &[Range<usize>], m: usize) -> Result<()> {
    let mut sorted: Vec<&Range<usize>> = partitions.iter().collect();
    sorted.sort_by_key(|r| (r.start, r.end));
    let mut cursor = 0;
    for r in sorted {
        if r.start > r.end {
            return Err(Error::InvalidPartitioning(format!("reversed range {r:?}")));
        }
        if r.start < cursor {
            return Err(Error::InvalidPartitioning(format!("range {r:?} overlaps rows before {cursor}")));
        }
        if r.start > cursor {
            return Err(Error::InvalidPartitioning(format!("rows {cursor}..{} are not covered", r.start)));
        }
        cursor = r.end;
    }
    if cursor != m {
        return Err(Error::InvalidPartitioning(format!("partitions cover {cursor} of {m} rows")));
    }
    Ok(())
}

/// Plans the traffic of sending an `m x n` matrix, split into contiguous
/// row partitions, to the ranks of `layout`.
///
/// Message counts assume each frame carries `buffer_bytes - HEADER_LEN`
/// payload bytes.
pub fn plan_transfer(
    partitions: &[Range<usize>],
    layout: &Layout,
    m: usize,
    n: usize,
    elem_bytes: usize,
    buffer_bytes: usize,
) -> Result<TransferPlan> {
    if buffer_bytes <= HEADER_LEN {
        return Err(Error::InvalidBuffer(format!("{buffer_bytes} bytes leaves no room after the frame header")));
    }
    validate_partitioning(partitions, m)?;
    let usable = (buffer_bytes - HEADER_LEN) as u64;
    let mut plan = TransferPlan::default();
    for (partition, rows) in partitions.iter().enumerate() {
        for rank in 0..layout.grid().size() {
            let (Some(rs), Some(cs)) = (layout.row_share(rank), layout.col_share(rank)) else {
                continue;
            };
            let row_count = rs.count_in(rows.start, rows.end) as u64;
            let per_row = cs.count(n) as u64;
            let bytes = row_count * per_row * elem_bytes as u64;
            if bytes == 0 {
                continue;
            }
            // Columns interleave with other ranks unless the rank holds the whole row.
            let runs_per_row = if cs.stride == 1 { 1 } else { per_row };
            let entry = PlanEntry {
                partition,
                rank,
                bytes,
                fragments: row_count * runs_per_row,
                messages: bytes.div_ceil(usable),
            };
            plan.total_bytes += entry.bytes;
            plan.total_fragments += entry.fragments;
            plan.total_messages += entry.messages;
            plan.entries.push(entry);
        }
    }
    Ok(plan)
}

/// Splits `0..m` into `parts` contiguous ranges of near-equal size.
pub fn even_partitioning(m: usize, parts: usize) -> Vec<Range<usize>> {
    let parts = parts.max(1);
    (0..parts).map(|k| (k * m / parts)..((k + 1) * m / parts)).collect()
}

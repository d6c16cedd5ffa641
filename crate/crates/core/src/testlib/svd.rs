use ndarray::{Array2, Axis};

use crate::error::{Error, Result};
use crate::layout::DistPair;
use crate::protocol::{MatrixInfo, TaskValue};
use crate::server::TaskContext;

use super::linalg::{block_power, canonicalize_signs};

/// Handles of a truncated SVD `A ~ U diag(S) V^T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SvdResult {
    pub u: MatrixInfo,
    pub s: MatrixInfo,
    pub v: MatrixInfo,
}

/// Rank-`k` truncated SVD of a distributed matrix.
///
/// Every worker forms the Gram matrix of its own rows, the driver sums
/// them in session rank order and extracts the top `k` eigenpairs with
/// block power iteration, and each worker then computes its rows of `U`
/// from its rows of `A`. Singular values come back as a `k x 1` matrix,
/// `U` and `V` as `[VC,STAR]` matrices. Columns of `V` are signed so their
/// largest-magnitude entry is non-negative. Columns of `U` belonging to
/// zero singular values are left zero.
pub fn truncated_svd(ctx: &mut TaskContext<'_>, a: &TaskValue, k: &TaskValue) -> Result<SvdResult> {
    let a = ctx.complete_matrix(a)?;
    let k = k.as_int().ok_or_else(|| Error::InvalidArgument(format!("rank must be an integer, got {k:?}")))?;
    let (m, n) = (a.rows(), a.cols());
    if k < 1 || k as usize > m.min(n) {
        return Err(Error::InvalidArgument(format!("rank {k} outside 1..={} for a {m}x{n} matrix", m.min(n))));
    }
    let k = k as usize;
    let rows = ctx.redistribute(&a, DistPair::VC_STAR)?;

    let partials = ctx.map_local(rows.id, |_, blk| blk.t().dot(&blk))?;
    let mut gram = Array2::<f64>::zeros((n, n));
    for p in &partials {
        gram += p;
    }

    let eig = block_power(gram.view(), k);
    log::debug!("block power: {} iterations, residual {:.3e}", eig.iterations, eig.residual);
    let mut v = eig.vectors;
    canonicalize_signs(&mut v);
    let sigma: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let cutoff = sigma[0] * f64::EPSILON * (m.max(n) as f64);
    let inv: Vec<f64> = sigma.iter().map(|&s| if s > cutoff && s > 0.0 { 1.0 / s } else { 0.0 }).collect();

    let mut v_scaled = v.clone();
    for (mut col, w) in v_scaled.axis_iter_mut(Axis(1)).zip(&inv) {
        col.mapv_inplace(|x| x * w);
    }
    let u = ctx.derive_rows(&rows, k, |_, blk| blk.dot(&v_scaled))?;
    let s = ctx.scatter(&Array2::from_shape_vec((k, 1), sigma).expect("k x 1"), DistPair::VC_STAR)?;
    let v = ctx.scatter(&v, DistPair::VC_STAR)?;
    Ok(SvdResult { u, s, v })
}

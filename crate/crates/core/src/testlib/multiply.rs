use crate::error::{Error, Result};
use crate::layout::DistPair;
use crate::protocol::{MatrixInfo, TaskValue};
use crate::server::TaskContext;

/// `C = A B`. `B` is collected on the driver and handed to every worker,
/// which multiplies its own rows of `A`; `C` comes back as `[VC,STAR]`.
pub fn multiply(ctx: &mut TaskContext<'_>, a: &TaskValue, b: &TaskValue) -> Result<MatrixInfo> {
    let a = ctx.complete_matrix(a)?;
    let b = ctx.complete_matrix(b)?;
    if a.cols() != b.rows() {
        return Err(Error::InvalidArgument(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let rows = ctx.redistribute(&a, DistPair::VC_STAR)?;
    let dense_b = ctx.gather(b.id)?;
    ctx.derive_rows(&rows, b.cols(), |_, blk| blk.dot(&dense_b))
}

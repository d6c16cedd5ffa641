//! Small dense kernels used on the driver side of the SVD.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Iteration cap for the block power method.
pub const MAX_POWER_ITERS: usize = 300;
/// Stop once every wanted Ritz pair has relative residual below this.
pub const POWER_TOLERANCE: f64 = 1e-12;

const START_SEED: u64 = 0x5eed_a1c4;

/// Orthonormalizes the columns of `q` in place with two passes of modified
/// Gram-Schmidt. Columns that collapse are replaced by fresh random
/// directions so the result always has orthonormal columns.
pub fn orthonormalize(q: &mut Array2<f64>, rng: &mut ChaCha8Rng) {
    let (n, b) = q.dim();
    assert!(b <= n, "cannot fit {b} orthonormal columns in dimension {n}");
    for j in 0..b {
        let scale = q.column(j).dot(&q.column(j)).sqrt();
        let mut attempts = 0;
        loop {
            for _ in 0..2 {
                for i in 0..j {
                    let (done, mut rest) = q.view_mut().split_at(Axis(1), j);
                    let qi = done.column(i);
                    let mut col = rest.column_mut(0);
                    let proj = qi.dot(&col);
                    col.scaled_add(-proj, &qi);
                }
            }
            let norm = q.column(j).dot(&q.column(j)).sqrt();
            if norm > 1e-10 * scale.max(f64::MIN_POSITIVE) && norm > 0.0 {
                q.column_mut(j).mapv_inplace(|v| v / norm);
                break;
            }
            attempts += 1;
            assert!(attempts < 32, "failed to extend orthonormal basis");
            for v in q.column_mut(j).iter_mut() {
                *v = rng.random::<f64>() - 0.5;
            }
        }
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order and the matching eigenvectors
/// as columns.
pub fn symmetric_eigen(a: ArrayView2<'_, f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut m = a.to_owned();
    let mut v = Array2::<f64>::eye(n);
    let norm = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[[i, j]] * m[[i, j]]).sum();
        if off.sqrt() <= 1e-15 * norm || norm == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[j, j]].total_cmp(&m[[i, i]]));
    let values = Array1::from_iter(order.iter().map(|&i| m[[i, i]]));
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        vectors.column_mut(dst).assign(&v.column(src));
    }
    (values, vectors)
}

#[derive(Debug, Clone)]
pub struct PowerResult {
    /// Leading eigenvalues, descending.
    pub values: Array1<f64>,
    /// Matching eigenvectors as columns.
    pub vectors: Array2<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Leading `k` eigenpairs of a symmetric positive semi-definite matrix by
/// block power iteration with Rayleigh-Ritz extraction.
///
/// The block carries `min(n, 2k + 10)` columns. Iteration stops when the
/// largest relative residual `|G x - theta x| / theta_1` over the wanted
/// pairs drops below [`POWER_TOLERANCE`], or after [`MAX_POWER_ITERS`].
pub fn block_power(g: ArrayView2<'_, f64>, k: usize) -> PowerResult {
    let n = g.nrows();
    assert!(k >= 1 && k <= n);
    let b = n.min(2 * k + 10);
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut q = Array2::from_shape_fn((n, b), |_| rng.random::<f64>() - 0.5);
    orthonormalize(&mut q, &mut rng);

    let mut iterations = 0;
    loop {
        iterations += 1;
        let gq = g.dot(&q);
        let mut h = q.t().dot(&gq);
        // symmetrize against rounding
        let ht = h.t().to_owned();
        h = (&h + &ht) * 0.5;
        let (theta, w) = symmetric_eigen(h.view());
        let x = q.dot(&w);
        let gx = gq.dot(&w);

        let scale = theta[0].abs().max(f64::MIN_POSITIVE);
        let residual = (0..k)
            .map(|i| {
                let r = &gx.column(i) - &(&x.column(i) * theta[i]);
                r.dot(&r).sqrt() / scale
            })
            .fold(0.0, f64::max);

        if residual < POWER_TOLERANCE || iterations >= MAX_POWER_ITERS || b == n {
            // a full block spans the whole space: Rayleigh-Ritz is exact
            return PowerResult {
                values: theta.slice(s![..k]).to_owned(),
                vectors: x.slice(s![.., ..k]).to_owned(),
                iterations,
                residual,
            };
        }
        q = gx;
        orthonormalize(&mut q, &mut rng);
    }
}

/// Flips each column so that its entry of largest magnitude (the first one
/// on ties) is non-negative. Returns the applied signs.
pub fn canonicalize_signs(v: &mut Array2<f64>) -> Vec<f64> {
    let mut signs = Vec::with_capacity(v.ncols());
    for mut col in v.columns_mut() {
        let mut best = 0;
        for (i, x) in col.iter().enumerate() {
            if x.abs() > col[best].abs() {
                best = i;
            }
        }
        let sign = if col.len() > 0 && col[best] < 0.0 { -1.0 } else { 1.0 };
        if sign < 0.0 {
            col.mapv_inplace(|x| -x);
        }
        signs.push(sign);
    }
    signs
}

//! Dense and sparse storage, the linear-operator abstraction and the small dense
//! factorizations (thin QR, symmetric EVD, SVD) used on reduced Krylov matrices.

mod evd;
pub mod mtx;
mod operator;
mod qr;
mod sparse;
mod svd;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub use evd::{sym_evd_small, sym_tridiagonal_evd, SymEigen};
pub use operator::{augment, ApplyCounter, AugmentedOperator, DenseOperator, LinearOperator};
pub use qr::{thin_qr, ThinQr};
pub use sparse::{SparseMatrix, SparseOperator};
pub use svd::{full_svd_small, Svd};

/// Dense matrices are plain `ndarray` arrays; finiteness is checked where they
/// enter an operator or a factorization.
pub type DenseMatrix = Array2<f64>;

/// Largest dimension accepted by the small dense EVD/SVD routines.
pub const SMALL_DENSE_LIMIT: usize = 4096;

/// Dot product with independent partial sums so the loop vectorizes.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn frobenius_norm(a: &ArrayView2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn vector_norm(x: &ArrayView1<f64>) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn check_finite(a: &ArrayView2<f64>, what: &'static str) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// ‖QᵀQ − I‖_F for a matrix with (supposedly) orthonormal columns.
pub fn orthonormality_error(q: &ArrayView2<f64>) -> f64 {
    let g = q.t().dot(q);
    let mut err = 0.0;
    for ((i, j), v) in g.indexed_iter() {
        let d = if i == j { v - 1.0 } else { *v };
        err += d * d;
    }
    err.sqrt()
}

/// Sines of the principal angles between the column spans of two matrices with
/// orthonormal columns, largest first. Zero means the spans coincide.
pub fn principal_angle_sines(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> Result<Vec<f64>> {
    if a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "principal angles between {} and {} rows",
            a.nrows(),
            b.nrows()
        )));
    }
    let (big, small) = if a.ncols() >= b.ncols() { (a, b) } else { (b, a) };
    let residual = small.to_owned() - big.dot(&big.t().dot(small));
    let svd = full_svd_small(&residual.view())?;
    let mut sines: Vec<f64> = svd.s.iter().map(|s| s.min(1.0)).collect();
    sines.sort_by(|x, y| y.total_cmp(x));
    Ok(sines)
}

/// Gaussian matrix with i.i.d. standard normal entries.
pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

/// Random matrix with orthonormal columns (orthonormalized Gaussian).
pub fn random_orthonormal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Result<Array2<f64>> {
    let g = gaussian_matrix(rows, cols, rng);
    Ok(thin_qr(&g.view())?.q)
}

/// Symmetrized copy `(T + Tᵀ)/2`.
pub(crate) fn symmetrize(t: &ArrayView2<f64>) -> Array2<f64> {
    let mut s = t.to_owned();
    s += &t.t();
    s.mapv_inplace(|x| 0.5 * x);
    s
}

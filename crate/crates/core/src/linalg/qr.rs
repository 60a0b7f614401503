use ndarray::{Array2, ArrayView2};

use super::{axpy, check_finite, dot, frobenius_norm};
use crate::error::{Error, Result};

/// Relative threshold on `diag(R)` below which a column counts as dependent.
pub const QR_RANK_TOL: f64 = 1e-12;

/// Thin Householder QR factorization `M = Q R`.
#[derive(Debug, Clone)]
pub struct ThinQr {
    /// `m × b`, orthonormal columns.
    pub q: Array2<f64>,
    /// `b × b` upper triangular with a nonnegative diagonal.
    pub r: Array2<f64>,
    /// Number of diagonal entries of `R` above `QR_RANK_TOL · ‖M‖_F`.
    pub rank: usize,
}

/// Householder thin QR of an `m × b` matrix with `m ≥ b ≥ 1`.
///
/// `Q` is orthonormal even when `M` is rank deficient: a vanishing column
/// simply gets no reflector.
pub fn thin_qr(m: &ArrayView2<f64>) -> Result<ThinQr> {
    let (rows, b) = m.dim();
    if rows == 0 || b == 0 {
        return Err(Error::Empty("thin_qr"));
    }
    if rows < b {
        return Err(Error::Dimension(format!("thin_qr needs rows >= cols, got {rows}x{b}")));
    }
    check_finite(m, "thin_qr")?;
    let norm = frobenius_norm(m);

    // Work on contiguous columns.
    let mut cols: Vec<Vec<f64>> = m.columns().into_iter().map(|c| c.to_vec()).collect();
    let mut r = Array2::<f64>::zeros((b, b));
    let mut reflectors: Vec<Option<(Vec<f64>, f64)>> = Vec::with_capacity(b);

    for j in 0..b {
        let x = &cols[j][j..];
        let alpha = dot(x, x).sqrt();
        if alpha == 0.0 {
            reflectors.push(None);
        } else {
            let beta = if x[0] >= 0.0 { -alpha } else { alpha };
            let mut v = x.to_vec();
            v[0] -= beta;
            let tau = 2.0 / dot(&v, &v);
            cols[j][j] = beta;
            for c in cols[j][j + 1..].iter_mut() {
                *c = 0.0;
            }
            for col in cols.iter_mut().skip(j + 1) {
                let tail = &mut col[j..];
                let s = tau * dot(&v, tail);
                axpy(-s, &v, tail);
            }
            reflectors.push(Some((v, tau)));
        }
        for c in j..b {
            r[[j, c]] = cols[c][j];
        }
    }

    // Q = H_0 ⋯ H_{b-1} applied to the leading b columns of the identity.
    // Reflector j only touches rows ≥ j, so column c is unaffected by j > c.
    let mut qcols: Vec<Vec<f64>> = (0..b)
        .map(|c| {
            let mut e = vec![0.0; rows];
            e[c] = 1.0;
            e
        })
        .collect();
    for j in (0..b).rev() {
        if let Some((v, tau)) = &reflectors[j] {
            for q in qcols.iter_mut().skip(j) {
                let tail = &mut q[j..];
                let s = tau * dot(v, tail);
                axpy(-s, v, tail);
            }
        }
    }

    for j in 0..b {
        if r[[j, j]] < 0.0 {
            for c in j..b {
                r[[j, c]] = -r[[j, c]];
            }
            for v in qcols[j].iter_mut() {
                *v = -*v;
            }
        }
    }

    let mut q = Array2::<f64>::zeros((rows, b));
    for (j, col) in qcols.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            q[[i, j]] = *v;
        }
    }
    let tol = QR_RANK_TOL * norm;
    let rank = (0..b).filter(|&j| r[[j, j]] > tol).count();
    Ok(ThinQr { q, r, rank })
}

//! One-sided (Hestenes) Jacobi SVD.

use ndarray::{Array1, Array2, ArrayView2};

use super::{axpy, check_finite, dot, SMALL_DENSE_LIMIT};
use crate::error::{Error, Result};

/// Thin SVD `M = U · diag(S) · Vᵀ` with `S` descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Array2<f64>,
    pub s: Array1<f64>,
    pub v: Array2<f64>,
}

impl Svd {
    /// `U · diag(S) · Vᵀ`
    pub fn recompose(&self) -> Array2<f64> {
        let us = &self.u * &self.s.view().insert_axis(ndarray::Axis(0));
        us.dot(&self.v.t())
    }
}

const MAX_SWEEPS: usize = 80;

/// Full (thin) SVD of a dense matrix with `min(m, n) ≤ SMALL_DENSE_LIMIT`.
///
/// Returns `p = min(m, n)` triplets. Columns of `U` belonging to zero
/// singular values are completed to an orthonormal set.
pub fn full_svd_small(m: &ArrayView2<f64>) -> Result<Svd> {
    let (rows, cols) = m.dim();
    if rows == 0 || cols == 0 {
        return Err(Error::Empty("full_svd_small"));
    }
    if rows.min(cols) > SMALL_DENSE_LIMIT {
        return Err(Error::Dimension(format!(
            "full_svd_small limited to min dimension {SMALL_DENSE_LIMIT}, got {rows}x{cols}"
        )));
    }
    check_finite(m, "full_svd_small")?;
    if rows < cols {
        let t = jacobi_tall(&m.t())?;
        return Ok(Svd { u: t.v, s: t.s, v: t.u });
    }
    jacobi_tall(m)
}

fn jacobi_tall(m: &ArrayView2<f64>) -> Result<Svd> {
    let (rows, n) = m.dim();
    let mut a: Vec<Vec<f64>> = m.columns().into_iter().map(|c| c.to_vec()).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    let tol = f64::EPSILON * (rows as f64).sqrt();
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (lo, hi) = a.split_at_mut(q);
                let (ap, aq) = (&mut lo[p], &mut hi[0]);
                let alpha = dot(ap, ap);
                let beta = dot(aq, aq);
                let gamma = dot(ap, aq);
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(ap, aq, c, s);
                let (lo, hi) = v.split_at_mut(q);
                rotate(&mut lo[p], &mut hi[0], c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { what: "one-sided Jacobi SVD", iterations: MAX_SWEEPS });
    }

    let norms: Vec<f64> = a.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let smax = norms[order[0]];
    let null_tol = smax * f64::EPSILON * (rows.max(n) as f64);

    let mut u = Array2::<f64>::zeros((rows, n));
    let mut s = Array1::<f64>::zeros(n);
    let mut vout = Array2::<f64>::zeros((n, n));
    let mut ucols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        let sigma = norms[src];
        s[dst] = sigma;
        for i in 0..n {
            vout[[i, dst]] = v[src][i];
        }
        if sigma > null_tol && sigma > 0.0 {
            ucols.push(a[src].iter().map(|x| x / sigma).collect());
        } else {
            ucols.push(vec![0.0; rows]);
            missing.push(dst);
        }
    }
    complete_orthonormal(&mut ucols, &missing);
    for (j, col) in ucols.iter().enumerate() {
        for (i, x) in col.iter().enumerate() {
            u[[i, j]] = *x;
        }
    }
    Ok(Svd { u, s, v: vout })
}

#[inline]
fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
        let (a, b) = (*xi, *yi);
        *xi = c * a - s * b;
        *yi = s * a + c * b;
    }
}

/// Fills the listed columns with unit vectors orthogonal to all other columns,
/// drawn from the standard basis by twice-repeated Gram–Schmidt.
fn complete_orthonormal(cols: &mut [Vec<f64>], missing: &[usize]) {
    if missing.is_empty() {
        return;
    }
    let rows = cols[0].len();
    let mut candidate = 0;
    for &slot in missing {
        while candidate < rows {
            let mut e = vec![0.0; rows];
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for (j, c) in cols.iter().enumerate() {
                    if j == slot || c.iter().all(|x| *x == 0.0) {
                        continue;
                    }
                    let proj = dot(c, &e);
                    axpy(-proj, c, &mut e);
                }
            }
            let norm = dot(&e, &e).sqrt();
            if norm > 1e-8 {
                e.iter_mut().for_each(|x| *x /= norm);
                cols[slot] = e;
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius_norm, gaussian_matrix, orthonormality_error, sym_evd_small};
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn assert_valid(m: &Array2<f64>, svd: &Svd) {
        let scale = frobenius_norm(&m.view());
        let err = frobenius_norm(&(&svd.recompose() - m).view());
        assert!(err <= 1e-10 * scale.max(1e-300), "recomposition {err}");
        assert!(orthonormality_error(&svd.u.view()) <= 1e-10);
        assert!(orthonormality_error(&svd.v.view()) <= 1e-10);
        for w in svd.s.as_slice().unwrap().windows(2) {
            assert!(w[0] >= w[1] && w[1] >= 0.0);
        }
    }

    #[test]
    fn diagonal_input() {
        let m = array![[2.0, 0.0], [0.0, 5.0]];
        let svd = full_svd_small(&m.view()).unwrap();
        assert_eq!(svd.s.to_vec(), vec![5.0, 2.0]);
        assert_valid(&m, &svd);
    }

    #[test]
    fn zero_matrix() {
        let m = Array2::<f64>::zeros((4, 3));
        let svd = full_svd_small(&m.view()).unwrap();
        assert!(svd.s.iter().all(|s| *s == 0.0));
        assert_valid(&m, &svd);
    }

    #[test]
    fn singular_values_match_gram_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = gaussian_matrix(10, 7, &mut rng);
        let svd = full_svd_small(&m.view()).unwrap();
        let gram = m.t().dot(&m);
        let eig = sym_evd_small(&gram.view()).unwrap();
        for (s, l) in svd.s.iter().zip(eig.values.iter()) {
            assert!((s - l.max(0.0).sqrt()).abs() < 1e-8, "{s} vs {}", l.sqrt());
        }
        assert_valid(&m, &svd);
    }

    #[test]
    fn wide_rank_deficient_and_tiny_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let wide = gaussian_matrix(5, 13, &mut rng);
        assert_valid(&wide, &full_svd_small(&wide.view()).unwrap());

        let l = gaussian_matrix(20, 3, &mut rng);
        let r = gaussian_matrix(3, 15, &mut rng);
        let low = l.dot(&r);
        let svd = full_svd_small(&low.view()).unwrap();
        assert!(svd.s[3] < 1e-12 * svd.s[0]);
        assert_valid(&low, &svd);

        let one = array![[-3.0]];
        let svd = full_svd_small(&one.view()).unwrap();
        assert_eq!(svd.s[0], 3.0);
        assert_valid(&one, &svd);
    }
}

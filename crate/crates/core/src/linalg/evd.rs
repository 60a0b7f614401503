//! Symmetric eigendecomposition: Householder tridiagonalization followed by
//! the implicit QL iteration with Wilkinson-type shifts (EISPACK tred2/tql2).

use ndarray::{Array1, Array2, ArrayView2};

use super::{check_finite, frobenius_norm, symmetrize, SMALL_DENSE_LIMIT};
use crate::error::{Error, Result};

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Array1<f64>,
    /// Column `j` is the unit eigenvector for `values[j]`.
    pub vectors: Array2<f64>,
}

/// Column-major square scratch matrix.
struct ColMajor {
    n: usize,
    data: Vec<f64>,
}

impl ColMajor {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i + j * self.n]
    }
    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i + j * self.n] = v;
    }
}

/// Full EVD of a small dense symmetric matrix.
///
/// The input is symmetrized before factorization; asymmetry beyond
/// `1e-10 · ‖T‖_F` is rejected.
pub fn sym_evd_small(t: &ArrayView2<f64>) -> Result<SymEigen> {
    let (n, c) = t.dim();
    if n != c {
        return Err(Error::Dimension(format!("sym_evd_small needs a square matrix, got {n}x{c}")));
    }
    if n == 0 {
        return Err(Error::Empty("sym_evd_small"));
    }
    if n > SMALL_DENSE_LIMIT {
        return Err(Error::Dimension(format!("sym_evd_small limited to {SMALL_DENSE_LIMIT}, got {n}")));
    }
    check_finite(t, "sym_evd_small")?;
    let norm = frobenius_norm(t);
    let asym = frobenius_norm(&(t - &t.t()).view());
    if asym > 1e-10 * norm {
        return Err(Error::NotSymmetric(asym / norm));
    }
    let sym = symmetrize(t);

    let mut v = ColMajor { n, data: vec![0.0; n * n] };
    for j in 0..n {
        for i in 0..n {
            v.set(i, j, sym[[i, j]]);
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut v, &mut d, &mut e);
    tql2(&mut v, &mut d, &mut e)?;
    Ok(sorted_descending(v, d))
}

/// EVD of the symmetric tridiagonal matrix with diagonal `diag` and
/// off-diagonal `off` (`off.len() == diag.len() - 1`).
pub fn sym_tridiagonal_evd(diag: &[f64], off: &[f64]) -> Result<SymEigen> {
    let n = diag.len();
    if n == 0 {
        return Err(Error::Empty("sym_tridiagonal_evd"));
    }
    if off.len() + 1 != n {
        return Err(Error::Dimension(format!(
            "tridiagonal with {n} diagonal entries needs {} off-diagonal entries, got {}",
            n - 1,
            off.len()
        )));
    }
    if !diag.iter().chain(off).all(|x| x.is_finite()) {
        return Err(Error::NonFinite("sym_tridiagonal_evd"));
    }
    let mut v = ColMajor { n, data: vec![0.0; n * n] };
    for i in 0..n {
        v.set(i, i, 1.0);
    }
    let mut d = diag.to_vec();
    // tql2 expects the sub-diagonal in e[1..n].
    let mut e = vec![0.0; n];
    e[1..].copy_from_slice(off);
    tql2(&mut v, &mut d, &mut e)?;
    Ok(sorted_descending(v, d))
}

fn sorted_descending(v: ColMajor, d: Vec<f64>) -> SymEigen {
    let n = d.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[b].total_cmp(&d[a]));
    let values = Array1::from_iter(order.iter().map(|&j| d[j]));
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            vectors[[i, dst]] = v.at(i, src);
        }
    }
    SymEigen { values, vectors }
}

/// Householder reduction to tridiagonal form, accumulating the transform in `v`.
/// On exit `d` holds the diagonal and `e[1..]` the sub-diagonal.
fn tred2(v: &mut ColMajor, d: &mut [f64], e: &mut [f64]) {
    let n = v.n;
    for j in 0..n {
        d[j] = v.at(n - 1, j);
    }

    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v.at(i - 1, j);
                v.set(i, j, 0.0);
                v.set(j, i, 0.0);
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }

            for j in 0..i {
                f = d[j];
                v.set(j, i, f);
                g = e[j] + v.at(j, j) * f;
                for k in (j + 1)..i {
                    g += v.at(k, j) * d[k];
                    e[k] += v.at(k, j) * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    let val = v.at(k, j) - (f * e[k] + g * d[k]);
                    v.set(k, j, val);
                }
                d[j] = v.at(i - 1, j);
                v.set(i, j, 0.0);
            }
        }
        d[i] = h;
    }

    for i in 0..n.saturating_sub(1) {
        let vii = v.at(i, i);
        v.set(n - 1, i, vii);
        v.set(i, i, 1.0);
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v.at(k, i + 1) / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v.at(k, i + 1) * v.at(k, j);
                }
                for k in 0..=i {
                    let val = v.at(k, j) - g * d[k];
                    v.set(k, j, val);
                }
            }
        }
        for k in 0..=i {
            v.set(k, i + 1, 0.0);
        }
    }
    for j in 0..n {
        d[j] = v.at(n - 1, j);
        v.set(n - 1, j, 0.0);
    }
    v.set(n - 1, n - 1, 1.0);
    e[0] = 0.0;
}

/// Implicit QL on the tridiagonal `(d, e[1..])`, rotating the columns of `v`.
fn tql2(v: &mut ColMajor, d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = v.n;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    let max_sweeps = 60 * n.max(1);
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        let m = m.min(n - 1);

        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > max_sweeps {
                    return Err(Error::NoConvergence { what: "tridiagonal QL", iterations: sweeps });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    let (left, right) = v.data.split_at_mut((i + 1) * n);
                    let col_i = &mut left[i * n..];
                    let col_i1 = &mut right[..n];
                    for (a, b) in col_i.iter_mut().zip(col_i1.iter_mut()) {
                        let hk = *b;
                        *b = s * *a + c * hk;
                        *a = c * *a - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_matrix, orthonormality_error};
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Cyclic two-sided Jacobi eigenvalues, used as an independent oracle.
    fn jacobi_eigenvalues(a: &Array2<f64>) -> Vec<f64> {
        let n = a.nrows();
        let mut a = a.clone();
        for _ in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[[i, j]].powi(2))
                .sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[[p, q]].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[[k, p]], a[[k, q]]);
                        a[[k, p]] = c * akp - s * akq;
                        a[[k, q]] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[[p, k]], a[[q, k]]);
                        a[[p, k]] = c * apk - s * aqk;
                        a[[q, k]] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[[i, i]]).collect();
        ev.sort_by(|x, y| y.total_cmp(x));
        ev
    }

    fn random_symmetric(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = gaussian_matrix(n, n, &mut rng);
        symmetrize(&g.view())
    }

    fn assert_decomposition(t: &Array2<f64>, eig: &SymEigen) {
        let tv = t.dot(&eig.vectors);
        let vl = &eig.vectors * &eig.values.view().insert_axis(ndarray::Axis(0));
        let scale = frobenius_norm(&t.view()).max(1e-300);
        assert!(frobenius_norm(&(&tv - &vl).view()) <= 1e-10 * scale);
        assert!(orthonormality_error(&eig.vectors.view()) <= 1e-10);
        for w in eig.values.as_slice().unwrap().windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn diagonal_input() {
        let t = array![[3.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]];
        let eig = sym_evd_small(&t.view()).unwrap();
        assert_eq!(eig.values.to_vec(), vec![3.0, 2.0, 1.0]);
        // Columns are signed unit vectors e0, e2, e1.
        for (col, row) in [(0, 0), (1, 2), (2, 1)] {
            assert!((eig.vectors[[row, col]].abs() - 1.0).abs() < 1e-15);
        }
        assert_decomposition(&t, &eig);
    }

    #[test]
    fn exchange_matrix() {
        let t = array![[0.0, 1.0], [1.0, 0.0]];
        let eig = sym_evd_small(&t.view()).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-15);
        assert!((eig.values[1] + 1.0).abs() < 1e-15);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v0 = eig.vectors.column(0);
        let v1 = eig.vectors.column(1);
        assert!((v0[0] * v0[1] - 0.5).abs() < 1e-15 && (v0[0].abs() - h).abs() < 1e-15);
        assert!((v1[0] * v1[1] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn matches_jacobi_oracle_on_random_symmetric() {
        let t = random_symmetric(12, 21);
        let eig = sym_evd_small(&t.view()).unwrap();
        let oracle = jacobi_eigenvalues(&t);
        for (a, b) in eig.values.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        assert_decomposition(&t, &eig);
    }

    #[test]
    fn larger_and_degenerate_inputs() {
        for n in [1, 2, 5, 40, 150] {
            let t = random_symmetric(n, n as u64);
            assert_decomposition(&t, &sym_evd_small(&t.view()).unwrap());
        }
        let eye = Array2::<f64>::eye(7);
        assert_decomposition(&eye, &sym_evd_small(&eye.view()).unwrap());
        let zero = Array2::<f64>::zeros((4, 4));
        assert_decomposition(&zero, &sym_evd_small(&zero.view()).unwrap());
    }

    #[test]
    fn tridiagonal_matches_dense() {
        let diag = [2.0, -1.0, 0.5, 3.0, 0.0];
        let off = [1.0, 0.25, 0.0, 2.0];
        let mut dense = Array2::zeros((5, 5));
        for i in 0..5 {
            dense[[i, i]] = diag[i];
        }
        for i in 0..4 {
            dense[[i, i + 1]] = off[i];
            dense[[i + 1, i]] = off[i];
        }
        let tri = sym_tridiagonal_evd(&diag, &off).unwrap();
        let full = sym_evd_small(&dense.view()).unwrap();
        for (a, b) in tri.values.iter().zip(full.values.iter()) {
            assert!((a - b).abs() < 1e-13);
        }
        assert_decomposition(&dense, &tri);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            sym_evd_small(&array![[1.0, 2.0], [0.0, 1.0]].view()),
            Err(Error::NotSymmetric(_))
        ));
        assert!(matches!(sym_evd_small(&array![[f64::NAN]].view()), Err(Error::NonFinite(_))));
        assert!(sym_tridiagonal_evd(&[1.0, 2.0], &[]).is_err());
    }
}

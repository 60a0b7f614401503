//! Randomized checks of the augmented-operator identity and of the
//! thresholding backends against a dense SVD.

use blws::block_lanczos::WarmStart;
use blws::linalg::{augment, full_svd_small, gaussian_matrix, random_orthonormal, sym_evd_small, DenseOperator, LinearOperator};
use blws::prox::{svt, SvdBackend, Thresholded};
use ndarray::{s, Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    pub trials: usize,
    /// Largest observed deviation.
    pub worst: f64,
    pub tol: f64,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.worst <= self.tol
    }
}

impl std::fmt::Display for CheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {} trials, worst {:.3e} (tol {:.0e})", self.name, self.trials, self.worst, self.tol)
    }
}

fn orthonormality(q: &Array2<f64>) -> f64 {
    let g = q.t().dot(q) - Array2::<f64>::eye(q.ncols());
    g.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Spectrum of the augmented matrix against `{±σ_i} ∪ {0}` from a dense
/// SVD, and orthonormality of the halves of its positive eigenvectors
/// scaled by `√2`. Returns the spectrum and the orthonormality reports.
pub fn augmented_identity(trials: usize, seed: u64) -> Result<(CheckReport, CheckReport)> {
    let mut g = ChaCha8Rng::seed_from_u64(seed);
    let (mut spectrum, mut ortho) = (0.0f64, 0.0f64);
    for _ in 0..trials {
        let m = g.random_range(1..=40);
        let n = g.random_range(1..=40);
        let w = gaussian_matrix(m, n, &mut g);
        let svd = full_svd_small(&w.view())?;
        let p = m.min(n);
        let mut expected: Vec<f64> = svd.s.iter().flat_map(|&x| [x, -x]).collect();
        expected.resize(m + n, 0.0);
        expected.sort_by(|a, b| b.total_cmp(a));

        let dense = augment(&DenseOperator::new(w)?).to_dense();
        let eig = sym_evd_small(&dense.view())?;
        let scale = svd.s[0].max(f64::MIN_POSITIVE);
        let dev = eig.values.iter().zip(&expected).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        spectrum = spectrum.max(dev / scale);

        let top = eig.vectors.slice(s![.., ..p]);
        let u = top.slice(s![..m, ..]).mapv(|x| x * std::f64::consts::SQRT_2);
        let v = top.slice(s![m.., ..]).mapv(|x| x * std::f64::consts::SQRT_2);
        ortho = ortho.max(orthonormality(&u)).max(orthonormality(&v));
    }
    Ok((
        CheckReport { name: "augmented spectrum", trials, worst: spectrum, tol: 1e-10 },
        CheckReport { name: "unpacked singular vectors", trials, worst: ortho, tol: 1e-8 },
    ))
}

/// Relative Frobenius distance between two thresholded results.
fn distance(a: &Thresholded, b: &Thresholded) -> f64 {
    let (da, db) = (a.to_dense(), b.to_dense());
    let diff = (&da - &db).mapv(|x| x * x).sum().sqrt();
    diff / db.mapv(|x| x * x).sum().sqrt().max(f64::MIN_POSITIVE)
}

/// Thresholding of the last matrix of a stabilizing `n × n` sequence
/// `W_i = W_0 + 0.01 (1 − 2^{−i}) Δ` by the Lanczos and the warm block Lanczos
/// backends, each compared with the dense backend. `W_0` is a rank-10 signal
/// with singular values in `[20, 100]` plus Gaussian noise, and `ε` lies
/// between the signal and the noise.
pub fn prox_agreement(trials: usize, n: usize, warm_steps: usize, seed: u64) -> Result<(CheckReport, CheckReport)> {
    let mut g = ChaCha8Rng::seed_from_u64(seed);
    let r = 10;
    let (mut lanczos, mut blws) = (0.0f64, 0.0f64);
    for _ in 0..trials {
        let u = random_orthonormal(n, r, &mut g)?;
        let v = random_orthonormal(n, r, &mut g)?;
        let spike = Array1::from_iter((0..r).map(|_| g.random_range(20.0..100.0)));
        let w0 = (&u * &spike.insert_axis(Axis(0))).dot(&v.t()) + gaussian_matrix(n, n, &mut g) * 0.1;
        let delta = gaussian_matrix(n, n, &mut g) * (1.0 / (n as f64).sqrt());
        let at = |i: usize| &w0 + &(&delta * (0.01 * (1.0 - 0.5f64.powi(i as i32))));

        let last = at(warm_steps);
        let s = full_svd_small(&last.view())?.s;
        let eps = 0.5 * (s[r - 1] + s[r]);
        let mut backend = SvdBackend::blws();
        for i in 0..warm_steps {
            svt(&DenseOperator::new(at(i))?, eps, r + 1, 5, &mut backend, &mut g)?;
        }
        let last = DenseOperator::new(last)?;
        let exact = svt(&last, eps, r + 1, 5, &mut SvdBackend::ExactFull, &mut g)?;
        let warm = svt(&last, eps, r + 1, 5, &mut backend, &mut g)?;
        let cold = svt(&last, eps, r + 1, 5, &mut SvdBackend::lanczos(), &mut g)?;
        blws = blws.max(distance(&warm, &exact));
        lanczos = lanczos.max(distance(&cold, &exact));
    }
    Ok((
        CheckReport { name: "lanczos thresholding", trials, worst: lanczos, tol: 1e-5 },
        CheckReport { name: "blws thresholding", trials, worst: blws, tol: 1e-5 },
    ))
}

/// Largest deviation of `blws_svd` from its input when started at exact
/// singular subspaces.
pub fn fixed_point(trials: usize, seed: u64) -> Result<CheckReport> {
    let mut g = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let (m, n) = (g.random_range(10..=40), g.random_range(10..=40));
        let r = g.random_range(1..=4);
        let w = gaussian_matrix(m, n, &mut g);
        let svd = full_svd_small(&w.view())?;
        let warm = WarmStart::new(
            svd.u.slice(s![.., ..r]).to_owned(),
            svd.v.slice(s![.., ..r]).to_owned(),
            svd.s.slice(s![..r]).to_owned(),
        )?;
        let out = blws::block_lanczos::blws_svd(&DenseOperator::new(w)?, &warm, 2, r, &mut g)?;
        let dev = out.warm.sigma().iter().zip(warm.sigma()).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        worst = worst.max(dev / svd.s[0]);
    }
    Ok(CheckReport { name: "blws fixed point", trials, worst, tol: 1e-9 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass() {
        let (a, b) = augmented_identity(10, 1).unwrap();
        assert!(a.passed() && b.passed(), "{a} {b}");
        let (c, d) = prox_agreement(2, 60, 3, 2).unwrap();
        assert!(c.passed() && d.passed(), "{c} {d}");
        assert!(fixed_point(5, 3).unwrap().passed());
    }

    #[test]
    fn report_line() {
        let r = CheckReport { name: "x", trials: 3, worst: 2e-3, tol: 1e-3 };
        assert!(!r.passed());
        assert_eq!(r.to_string(), "FAIL x: 3 trials, worst 2.000e-3 (tol 1e-3)");
    }
}

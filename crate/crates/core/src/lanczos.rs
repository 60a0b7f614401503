//! Single-vector Lanczos: the tridiagonalization procedure, a restart-free
//! partial EVD driver and the partial SVD through the augmented operator.
//! This is the baseline the block method is measured against.

use std::f64::consts::SQRT_2;

use log::debug;
use ndarray::{s, Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{augment, axpy, dot, sym_tridiagonal_evd, LinearOperator, SymEigen};

/// Relative breakdown threshold on `β_l`.
pub const BREAKDOWN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reorthogonalization {
    /// Plain three-term recurrence.
    None,
    /// Classical Gram–Schmidt against every previous vector, applied twice.
    #[default]
    Full,
}

/// Symmetric tridiagonal `T_k`: diagonal `alpha`, off-diagonal `beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl Tridiagonal {
    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let k = self.dim();
        let mut t = Array2::zeros((k, k));
        for (i, a) in self.alpha.iter().enumerate() {
            t[[i, i]] = *a;
        }
        for (i, b) in self.beta.iter().enumerate() {
            t[[i, i + 1]] = *b;
            t[[i + 1, i]] = *b;
        }
        t
    }

    pub fn eigen(&self) -> Result<SymEigen> {
        sym_tridiagonal_evd(&self.alpha, &self.beta)
    }
}

/// Output of [`lanczos_procedure`]: `W Q_k = Q_k T_k + r_k e_kᵀ`.
#[derive(Debug, Clone)]
pub struct LanczosFactorization {
    /// `m × k` Krylov basis.
    pub basis: Array2<f64>,
    pub tridiagonal: Tridiagonal,
    /// Last residual vector `r_k`.
    pub residual: Array1<f64>,
    /// `β_k = ‖r_k‖`.
    pub residual_norm: f64,
    /// An invariant subspace was found before `k` steps.
    pub terminated_early: bool,
}

/// Incremental Lanczos state, extendable one step at a time.
struct LanczosRun<'a, W> {
    op: &'a W,
    reorth: Reorthogonalization,
    basis: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    residual: Vec<f64>,
    residual_norm: f64,
    scale: f64,
    broken: bool,
    restarts: usize,
}

impl<'a, W: LinearOperator> LanczosRun<'a, W> {
    fn start(op: &'a W, q1: Vec<f64>, reorth: Reorthogonalization) -> Self {
        let mut run = Self {
            op,
            reorth,
            basis: vec![q1],
            alpha: Vec::new(),
            beta: Vec::new(),
            residual: Vec::new(),
            residual_norm: 0.0,
            scale: 0.0,
            broken: false,
            restarts: 0,
        };
        run.advance();
        run
    }

    fn steps(&self) -> usize {
        self.alpha.len()
    }

    fn orthogonalize(&self, v: &mut [f64]) {
        for _ in 0..2 {
            let coeffs: Vec<f64> = self.basis.iter().map(|q| dot(q, v)).collect();
            for (q, c) in self.basis.iter().zip(coeffs) {
                axpy(-c, q, v);
            }
        }
    }

    /// Completes the step for the newest basis vector: `α_j`, `r_j`, `β_j`.
    fn advance(&mut self) {
        let j = self.basis.len() - 1;
        let q = &self.basis[j];
        let mut w = self.op.apply(ArrayView1::from(q.as_slice())).to_vec();
        let a = dot(q, &w);
        axpy(-a, q, &mut w);
        if j > 0 {
            let b = *self.beta.last().unwrap();
            if b != 0.0 {
                axpy(-b, &self.basis[j - 1], &mut w);
            }
        }
        if self.reorth == Reorthogonalization::Full {
            self.orthogonalize(&mut w);
        }
        let norm = dot(&w, &w).sqrt();
        let prev_beta = self.beta.last().copied().unwrap_or(0.0);
        self.scale = self.scale.max(a.abs() + prev_beta);
        self.alpha.push(a);
        self.residual = w;
        self.residual_norm = norm;
        self.broken = norm <= BREAKDOWN_TOL * self.scale;
    }

    /// `q_{j+1} = r_j / β_j` followed by the next step. Requires no breakdown.
    fn extend(&mut self) {
        debug_assert!(!self.broken);
        let b = self.residual_norm;
        let next: Vec<f64> = self.residual.iter().map(|x| x / b).collect();
        self.beta.push(b);
        self.basis.push(next);
        self.advance();
    }

    /// After a breakdown, continues from a random vector orthogonal to the
    /// current basis; `T` gets a zero coupling. Returns false once the whole
    /// space is spanned.
    fn restart<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let dim = self.op.nrows();
        if self.basis.len() >= dim {
            return false;
        }
        for _ in 0..3 {
            let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let before = dot(&v, &v).sqrt();
            self.orthogonalize(&mut v);
            let norm = dot(&v, &v).sqrt();
            if norm > 1e-8 * before {
                v.iter_mut().for_each(|x| *x /= norm);
                self.beta.push(0.0);
                self.basis.push(v);
                self.restarts += 1;
                self.advance();
                return true;
            }
        }
        false
    }

    fn tridiagonal(&self) -> Tridiagonal {
        Tridiagonal { alpha: self.alpha.clone(), beta: self.beta.clone() }
    }

    fn basis_matrix(&self) -> Array2<f64> {
        let m = self.op.nrows();
        let mut q = Array2::zeros((m, self.basis.len()));
        for (j, col) in self.basis.iter().enumerate() {
            q.column_mut(j).assign(&ArrayView1::from(col.as_slice()));
        }
        q
    }

    /// Leading `r` Ritz pairs and their residual norms `β_k |s_{k,j}|`.
    fn ritz(&self, r: usize) -> Result<(Array1<f64>, Array2<f64>, Vec<f64>)> {
        let eig = self.tridiagonal().eigen()?;
        let k = self.steps();
        let r = r.min(k);
        let last = if self.broken { 0.0 } else { self.residual_norm };
        let residuals = (0..r).map(|j| last * eig.vectors[[k - 1, j]].abs()).collect();
        let coeffs = eig.vectors.slice(s![.., ..r]);
        let mut vectors = Array2::zeros((self.op.nrows(), r));
        for (i, q) in self.basis.iter().enumerate() {
            let q = ArrayView1::from(q.as_slice());
            for j in 0..r {
                let c = coeffs[[i, j]];
                if c != 0.0 {
                    vectors.column_mut(j).scaled_add(c, &q);
                }
            }
        }
        Ok((eig.values.slice(s![..r]).to_owned(), vectors, residuals))
    }
}

fn check_square<W: LinearOperator>(op: &W) -> Result<()> {
    if op.nrows() != op.ncols() {
        return Err(Error::Dimension(format!(
            "symmetric operator must be square, got {}x{}",
            op.nrows(),
            op.ncols()
        )));
    }
    Ok(())
}

fn check_unit(q1: &ArrayView1<f64>, dim: usize) -> Result<()> {
    if q1.len() != dim {
        return Err(Error::Dimension(format!("start vector has {} entries, operator {dim}", q1.len())));
    }
    let norm = q1.dot(q1).sqrt();
    if !norm.is_finite() || (norm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("start vector must be unit, has norm {norm}")));
    }
    Ok(())
}

/// Runs at most `k` Lanczos steps on the symmetric operator `op` from the unit
/// vector `q1`. Stops early when `β_l ≤ 1e-12 · max_j(|α_j| + β_{j-1})`, i.e.
/// when the Krylov space has become invariant.
pub fn lanczos_procedure<W: LinearOperator>(
    op: &W,
    q1: ArrayView1<f64>,
    k: usize,
    reorth: Reorthogonalization,
) -> Result<LanczosFactorization> {
    check_square(op)?;
    if k < 1 {
        return Err(Error::InvalidArgument("lanczos needs k >= 1".into()));
    }
    check_unit(&q1, op.nrows())?;
    let mut run = LanczosRun::start(op, q1.to_vec(), reorth);
    while run.steps() < k && !run.broken {
        run.extend();
    }
    Ok(LanczosFactorization {
        basis: run.basis_matrix(),
        tridiagonal: run.tridiagonal(),
        residual: Array1::from(run.residual.clone()),
        residual_norm: run.residual_norm,
        terminated_early: run.broken && run.steps() < k,
    })
}

/// Knobs of the Lanczos partial EVD/SVD drivers.
#[derive(Debug, Clone, PartialEq)]
pub struct LanczosOptions {
    /// Ritz pairs are accepted when `‖W u − λ u‖ ≤ tol · |λ|_max`.
    pub tol: f64,
    /// Cap on the Krylov dimension; defaults to `min(dim, 10 r + 20)`.
    pub max_k: Option<usize>,
    /// First Krylov dimension tried; defaults to `max(2 r, 10)`.
    pub initial_k: Option<usize>,
    pub reorth: Reorthogonalization,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_k: None, initial_k: None, reorth: Reorthogonalization::Full }
    }
}

/// Leading eigenpairs found by a Lanczos run.
#[derive(Debug, Clone)]
pub struct PartialEvd {
    /// `m × r`, Ritz vectors.
    pub vectors: Array2<f64>,
    /// Ritz values, descending.
    pub values: Array1<f64>,
    pub residuals: Vec<f64>,
    pub converged: bool,
    /// Final Krylov dimension.
    pub steps: usize,
    pub restarts: usize,
}

fn random_unit<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Array1<f64> {
    let v: Array1<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let n = v.dot(&v).sqrt();
    v / n
}

/// Leading `r` eigenpairs of a symmetric operator by Lanczos with a growing
/// Krylov dimension. The run is never restarted: when the tolerance is not met
/// the same factorization is extended to twice the dimension, up to `max_k`.
/// An invariant subspace smaller than needed is deflated by continuing from a
/// random vector orthogonal to everything found so far.
pub fn lanczos_partial_evd<W: LinearOperator, R: Rng + ?Sized>(
    op: &W,
    r: usize,
    opts: &LanczosOptions,
    q1: Option<ArrayView1<f64>>,
    rng: &mut R,
) -> Result<PartialEvd> {
    check_square(op)?;
    let dim = op.nrows();
    if r < 1 || r > dim {
        return Err(Error::InvalidArgument(format!("wanted {r} eigenpairs of a {dim}-dimensional operator")));
    }
    let max_k = opts.max_k.unwrap_or_else(|| dim.min(10 * r + 20)).min(dim);
    if max_k < r {
        return Err(Error::InvalidArgument(format!("max_k = {max_k} below wanted count {r}")));
    }
    let start = match q1 {
        Some(q) => {
            check_unit(&q, dim)?;
            q.to_owned()
        }
        None => random_unit(dim, rng),
    };
    let mut target = opts.initial_k.unwrap_or((2 * r).max(10)).clamp(r, max_k);
    let mut run = LanczosRun::start(op, start.to_vec(), opts.reorth);

    loop {
        let mut exhausted = false;
        while run.steps() < target {
            if run.broken {
                if run.steps() >= r {
                    break;
                }
                if !run.restart(rng) {
                    exhausted = true;
                    break;
                }
            } else {
                run.extend();
            }
        }
        let (values, vectors, residuals) = run.ritz(r)?;
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let converged =
            values.len() == r && residuals.iter().all(|res| *res <= opts.tol * scale);
        let finished = converged || exhausted || run.steps() >= max_k;
        if finished {
            if !converged {
                debug!("lanczos: {} steps, not converged (max_k = {max_k})", run.steps());
            }
            return Ok(PartialEvd {
                vectors,
                values,
                residuals,
                converged,
                steps: run.steps(),
                restarts: run.restarts,
            });
        }
        if run.broken && run.steps() < target {
            // Stopped short of the target only to test convergence; a failed
            // restart is caught as exhaustion on the next pass.
            run.restart(rng);
        } else {
            target = (2 * target).min(max_k);
        }
    }
}

/// Leading singular triplets found by a Lanczos run on the augmented operator.
#[derive(Debug, Clone)]
pub struct PartialSvd {
    pub u: Array2<f64>,
    pub s: Array1<f64>,
    pub v: Array2<f64>,
    pub converged: bool,
    pub steps: usize,
}

/// Leading `r` singular triplets of `W` (m × n).
///
/// Lanczos runs on `[[0, W], [Wᵀ, 0]]` from `(u1; 0)`, so every Krylov
/// vector has one zero half and each step costs a single product with `W`
/// or `Wᵀ`. The eigenvectors for positive eigenvalues are `(u; v)/√2`, so the
/// halves are rescaled by `√2`. Fewer than `r` triplets come back when `W` has
/// fewer than `r` positive singular values.
pub fn lanczos_partial_svd<W: LinearOperator, R: Rng + ?Sized>(
    w: &W,
    r: usize,
    opts: &LanczosOptions,
    u1: Option<ArrayView1<f64>>,
    rng: &mut R,
) -> Result<PartialSvd> {
    let (m, n) = (w.nrows(), w.ncols());
    if r < 1 || r > m.min(n) {
        return Err(Error::InvalidArgument(format!("wanted {r} singular triplets of a {m}x{n} operator")));
    }
    let u1 = match u1 {
        Some(u) => {
            check_unit(&u, m)?;
            u.to_owned()
        }
        None => random_unit(m, rng),
    };
    let mut q1 = Array1::zeros(m + n);
    q1.slice_mut(s![..m]).assign(&u1);
    let aug = augment(w);
    let opts = LanczosOptions {
        max_k: Some(opts.max_k.unwrap_or_else(|| (m + n).min(10 * r + 20))),
        ..opts.clone()
    };
    let evd = lanczos_partial_evd(&aug, r, &opts, Some(q1.view()), rng)?;

    let top = evd.values.first().copied().unwrap_or(0.0).max(0.0);
    let keep = evd.values.iter().take_while(|&&x| x > 1e-12 * top && x > 0.0).count();
    let u = evd.vectors.slice(s![..m, ..keep]).mapv(|x| x * SQRT_2);
    let v = evd.vectors.slice(s![m.., ..keep]).mapv(|x| x * SQRT_2);
    Ok(PartialSvd {
        u,
        s: evd.values.slice(s![..keep]).to_owned(),
        v,
        converged: evd.converged,
        steps: evd.steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{
        frobenius_norm, full_svd_small, gaussian_matrix, orthonormality_error, principal_angle_sines,
        sym_evd_small, DenseOperator,
    };
    use ndarray::{array, Axis};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn sym_op(n: usize, seed: u64) -> DenseOperator {
        let g = gaussian_matrix(n, n, &mut rng(seed));
        DenseOperator::new(crate::linalg::symmetrize(&g.view())).unwrap()
    }

    #[test]
    fn identity_terminates_at_first_step() {
        let op = DenseOperator::new(Array2::eye(5)).unwrap();
        let q1 = random_unit(5, &mut rng(1));
        let f = lanczos_procedure(&op, q1.view(), 3, Reorthogonalization::Full).unwrap();
        assert!(f.terminated_early);
        assert_eq!(f.tridiagonal.dim(), 1);
        assert!((f.tridiagonal.alpha[0] - 1.0).abs() < 1e-14);
        assert!(f.residual_norm < 1e-14);
    }

    #[test]
    fn eigenvector_start_terminates() {
        let op = DenseOperator::new(array![[2.0, 0.0], [0.0, 1.0]]).unwrap();
        let f = lanczos_procedure(&op, array![1.0, 0.0].view(), 2, Reorthogonalization::None).unwrap();
        assert!(f.terminated_early);
        assert_eq!(f.tridiagonal.alpha, vec![2.0]);
        assert_eq!(f.residual_norm, 0.0);
    }

    #[test]
    fn recurrence_and_orthogonality_with_full_reorth() {
        let op = sym_op(30, 2);
        let q1 = random_unit(30, &mut rng(3));
        let f = lanczos_procedure(&op, q1.view(), 10, Reorthogonalization::Full).unwrap();
        assert!(!f.terminated_early);
        assert!(orthonormality_error(&f.basis.view()) <= 1e-10);
        let t = f.tridiagonal.to_dense();
        let mut lhs = op.matrix().dot(&f.basis) - f.basis.dot(&t);
        lhs.column_mut(9).scaled_add(-1.0, &f.residual);
        assert!(frobenius_norm(&lhs.view()) <= 1e-10 * frobenius_norm(&t.view()));
        assert!(f.tridiagonal.beta.iter().all(|b| *b >= 0.0));
    }

    #[test]
    fn rejects_bad_arguments() {
        let op = sym_op(4, 1);
        let q = array![1.0, 1.0, 0.0, 0.0];
        assert!(lanczos_procedure(&op, q.view(), 2, Reorthogonalization::Full).is_err());
        let e1 = array![1.0, 0.0, 0.0, 0.0];
        assert!(lanczos_procedure(&op, e1.view(), 0, Reorthogonalization::Full).is_err());
        let opts = LanczosOptions::default();
        assert!(lanczos_partial_evd(&op, 5, &opts, None, &mut rng(0)).is_err());
        let rect = DenseOperator::new(Array2::zeros((3, 2))).unwrap();
        assert!(lanczos_partial_svd(&rect, 3, &opts, None, &mut rng(0)).is_err());
    }

    #[test]
    fn diagonal_partial_evd() {
        let op = DenseOperator::new(Array2::from_diag(&array![5.0, 4.0, 3.0, 2.0, 1.0])).unwrap();
        let evd = lanczos_partial_evd(&op, 2, &LanczosOptions::default(), None, &mut rng(4)).unwrap();
        assert!(evd.converged);
        assert!((evd.values[0] - 5.0).abs() < 1e-10 && (evd.values[1] - 4.0).abs() < 1e-10);
        assert!((evd.vectors[[0, 0]].abs() - 1.0).abs() < 1e-8);
        assert!((evd.vectors[[1, 1]].abs() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn identity_partial_evd_deflates() {
        let op = DenseOperator::new(Array2::eye(10)).unwrap();
        let evd = lanczos_partial_evd(&op, 3, &LanczosOptions::default(), None, &mut rng(5)).unwrap();
        assert!(evd.converged);
        assert!(evd.restarts >= 2);
        for v in evd.values.iter() {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert!(orthonormality_error(&evd.vectors.view()) < 1e-10);
    }

    #[test]
    fn partial_evd_matches_dense_oracle() {
        let op = sym_op(100, 6);
        let opts = LanczosOptions { tol: 1e-8, ..Default::default() };
        let evd = lanczos_partial_evd(&op, 5, &opts, None, &mut rng(7)).unwrap();
        let oracle = sym_evd_small(&op.matrix().view()).unwrap();
        for j in 0..5 {
            let rel = (evd.values[j] - oracle.values[j]).abs() / oracle.values[j].abs();
            assert!(rel <= 1e-7, "eigenvalue {j}: {} vs {}", evd.values[j], oracle.values[j]);
        }
    }

    #[test]
    fn full_dimension_gives_exact_spectrum() {
        let op = sym_op(40, 8);
        let q1 = random_unit(40, &mut rng(9));
        let f = lanczos_procedure(&op, q1.view(), 40, Reorthogonalization::Full).unwrap();
        let ritz = f.tridiagonal.eigen().unwrap();
        let exact = sym_evd_small(&op.matrix().view()).unwrap();
        let scale = exact.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in ritz.values.iter().zip(exact.values.iter()) {
            assert!((a - b).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn largest_ritz_value_is_monotone_in_k() {
        let op = sym_op(60, 10);
        let q1 = random_unit(60, &mut rng(11));
        let f = lanczos_procedure(&op, q1.view(), 25, Reorthogonalization::Full).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for k in 1..=25 {
            let t = Tridiagonal { alpha: f.tridiagonal.alpha[..k].to_vec(), beta: f.tridiagonal.beta[..k - 1].to_vec() };
            let top = t.eigen().unwrap().values[0];
            assert!(top >= prev - 1e-12);
            prev = top;
        }
    }

    #[test]
    fn svd_of_diagonal_and_rank_one() {
        let w = DenseOperator::new(array![[3.0, 0.0], [0.0, 1.0]]).unwrap();
        let svd = lanczos_partial_svd(&w, 1, &LanczosOptions::default(), None, &mut rng(12)).unwrap();
        assert!((svd.s[0] - 3.0).abs() < 1e-10);
        assert!((svd.u[[0, 0]].abs() - 1.0).abs() < 1e-8 && (svd.v[[0, 0]].abs() - 1.0).abs() < 1e-8);

        let mut g = rng(13);
        let a = random_unit(9, &mut g);
        let b = random_unit(6, &mut g);
        let outer = a.view().insert_axis(Axis(1)).dot(&b.view().insert_axis(Axis(0))) * 7.0;
        let w = DenseOperator::new(outer).unwrap();
        let svd = lanczos_partial_svd(&w, 1, &LanczosOptions::default(), None, &mut g).unwrap();
        assert!((svd.s[0] - 7.0).abs() < 1e-10);
        assert!((svd.u.column(0).dot(&a).abs() - 1.0).abs() < 1e-10);
        assert!((svd.v.column(0).dot(&b).abs() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn svd_matches_dense_oracle() {
        let mut g = rng(14);
        let wm = gaussian_matrix(80, 60, &mut g);
        let w = DenseOperator::new(wm.clone()).unwrap();
        let opts = LanczosOptions { tol: 1e-10, ..Default::default() };
        let svd = lanczos_partial_svd(&w, 8, &opts, None, &mut g).unwrap();
        assert!(svd.converged);
        let oracle = full_svd_small(&wm.view()).unwrap();
        for j in 0..8 {
            assert!((svd.s[j] - oracle.s[j]).abs() <= 1e-7 * oracle.s[j]);
        }
        let su = principal_angle_sines(&svd.u.view(), &oracle.u.slice(s![.., ..8])).unwrap();
        let sv = principal_angle_sines(&svd.v.view(), &oracle.v.slice(s![.., ..8])).unwrap();
        assert!(su[0] <= 1e-6 && sv[0] <= 1e-6, "{} {}", su[0], sv[0]);
        assert!(orthonormality_error(&svd.u.view()) <= 1e-8);
        assert!(orthonormality_error(&svd.v.view()) <= 1e-8);
        for j in 0..8 {
            let res = wm.dot(&svd.v.column(j)) - &svd.u.column(j) * svd.s[j];
            assert!(res.dot(&res).sqrt() <= 1e-8 * svd.s[0]);
        }
    }
}

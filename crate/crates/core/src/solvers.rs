//! Nuclear norm minimization solvers with a pluggable partial SVD.
//!
//! * [`rpca_adm`]: robust PCA `min ‖A‖_* + λ‖E‖_1  s.t.  A + E = D` by the
//!   inexact augmented Lagrangian (alternating direction) method.
//! * [`mc_svt`]: matrix completion by the singular value thresholding
//!   iteration on the sparse dual variable.
//!
//! Both report [`SolverStats`]; running the same problem with
//! [`SvdBackend::lanczos`] and [`SvdBackend::blws`] differs only in how each
//! thresholding step computes its singular triplets.

use std::time::Instant;

use log::{debug, warn};
use ndarray::{s, Array2, ArrayView2, Axis, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lanczos::{lanczos_partial_svd, LanczosOptions};
use crate::linalg::{
    check_finite, frobenius_norm, ApplyCounter, DenseOperator, LinearOperator, SparseMatrix, SparseOperator,
};
use crate::prox::{shrink, svt_with, Growth, RankPredictor, SvdBackend, Thresholded, DEFAULT_INCREMENT, INITIAL_RANK};

/// Reference solution used to report the relative error.
#[derive(Debug, Clone, Copy)]
pub enum GroundTruth<'a> {
    Dense(ArrayView2<'a, f64>),
    /// `L · Rᵀ`
    Factors(ArrayView2<'a, f64>, ArrayView2<'a, f64>),
}

impl GroundTruth<'_> {
    fn shape(&self) -> (usize, usize) {
        match self {
            Self::Dense(a) => a.dim(),
            Self::Factors(l, r) => (l.nrows(), r.nrows()),
        }
    }

    /// `‖U diag(s) Vᵀ − A‖_F / ‖A‖_F`, evaluated in row blocks.
    pub fn relative_error(&self, est: &Thresholded) -> f64 {
        const BLOCK: usize = 256;
        let us = &est.u * &est.s.view().insert_axis(Axis(0));
        let rows = self.shape().0;
        let (mut num, mut den) = (0.0, 0.0);
        for start in (0..rows).step_by(BLOCK) {
            let end = (start + BLOCK).min(rows);
            let truth = match self {
                Self::Dense(a) => a.slice(s![start..end, ..]).to_owned(),
                Self::Factors(l, r) => l.slice(s![start..end, ..]).dot(&r.t()),
            };
            let approx = us.slice(s![start..end, ..]).dot(&est.v.t());
            num += (&approx - &truth).iter().map(|x| x * x).sum::<f64>();
            den += truth.iter().map(|x| x * x).sum::<f64>();
        }
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }
}

/// Statistics of one solve, in the layout of the benchmark tables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverStats {
    pub iterations: usize,
    pub wall_time: f64,
    /// Operator applications (columns multiplied by `W` or `Wᵀ`).
    pub matvecs: u64,
    pub rel_err: Option<f64>,
    pub rank_hat: usize,
    /// Support size of the recovered sparse component (robust PCA only).
    pub e_l0: Option<usize>,
    pub converged: bool,
    /// Rank requested for the next thresholding, after each iteration.
    pub rank_history: Vec<usize>,
    /// Stopping quantity after each iteration.
    pub residuals: Vec<f64>,
    /// Rank requested from the thresholding step of each iteration.
    pub requested_ranks: Vec<usize>,
    /// Operator applications spent in each iteration.
    pub iteration_matvecs: Vec<u64>,
    /// Block Lanczos calls recomputed by Lanczos (see [`SvdBackend::Blws`]).
    pub restarts: usize,
}

fn spectral_norm<W: LinearOperator>(op: &W, rng: &mut ChaCha8Rng) -> Result<f64> {
    let top = lanczos_partial_svd(op, 1, &LanczosOptions::default(), None, rng)?;
    top.s.first().copied().filter(|s| *s > 0.0).ok_or(Error::InvalidArgument("data matrix is zero".into()))
}

#[derive(Debug, Clone)]
pub struct RpcaProblem {
    d: Array2<f64>,
    lambda: f64,
}

impl RpcaProblem {
    /// `λ` defaults to `1/√m` for an `m × n` data matrix.
    pub fn new(d: Array2<f64>, lambda: Option<f64>) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::Empty("rpca data"));
        }
        check_finite(&d.view(), "rpca data")?;
        let lambda = lambda.unwrap_or(1.0 / (d.nrows() as f64).sqrt());
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self { d, lambda })
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.d
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

#[derive(Debug, Clone)]
pub struct AdmOptions {
    pub mu0_factor: f64,
    pub rho: f64,
    pub mu_max_factor: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub initial_rank: usize,
    pub increment: usize,
    pub growth: Growth,
    pub seed: u64,
}

impl Default for AdmOptions {
    fn default() -> Self {
        Self {
            mu0_factor: 1.25,
            rho: 1.6,
            mu_max_factor: 1e7,
            tol: 1e-7,
            max_iter: 1000,
            initial_rank: INITIAL_RANK,
            increment: DEFAULT_INCREMENT,
            growth: Growth::Recompute,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RpcaSolution {
    pub a: Array2<f64>,
    pub e: SparseMatrix,
    pub stats: SolverStats,
}

/// Robust PCA by the inexact augmented Lagrangian method.
///
/// With `μ_0 = 1.25/‖D‖_2`, `Y_0 = D / max(‖D‖_2, ‖D‖_∞/λ)` and `E_0 = 0`,
/// each iteration performs
///
/// ```text
/// A ← T_{1/μ}(D − E + Y/μ)
/// E ← shrink(D − A + Y/μ, λ/μ)
/// Y ← Y + μ(D − A − E)
/// μ ← min(ρμ, μ_max)
/// ```
///
/// and stops once `‖D − A − E‖_F / ‖D‖_F ≤ tol`. Hitting `max_iter` returns
/// the last iterate with `stats.converged = false`.
pub fn rpca_adm(
    problem: &RpcaProblem,
    mut backend: SvdBackend,
    opts: &AdmOptions,
    truth: Option<GroundTruth<'_>>,
) -> Result<RpcaSolution> {
    let start = Instant::now();
    let d = &problem.d;
    let (m, n) = d.dim();
    if let Some(t) = &truth {
        if t.shape() != (m, n) {
            return Err(Error::Dimension(format!("ground truth is {:?}, data is {m}x{n}", t.shape())));
        }
    }
    let lambda = problem.lambda;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let counter = ApplyCounter::new();

    let d_op = DenseOperator::with_counter(d.clone(), counter.clone())?;
    let norm2 = spectral_norm(&d_op, &mut rng)?;
    let d_inf = d.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let d_fro = frobenius_norm(&d.view());

    let mut y = d / norm2.max(d_inf / lambda);
    let mut e = Array2::<f64>::zeros((m, n));
    let mut mu = opts.mu0_factor / norm2;
    let mu_max = mu * opts.mu_max_factor;
    let mut predictor = RankPredictor::new(opts.initial_rank, opts.increment);
    let mut stats = SolverStats::default();
    let mut last: Option<Thresholded> = None;

    for iter in 1..=opts.max_iter {
        let mut w = d - &e;
        w.scaled_add(1.0 / mu, &y);
        let op = DenseOperator::with_counter(w, counter.clone())?;
        let before = counter.get();
        stats.requested_ranks.push(predictor.current());
        let t = svt_with(&op, 1.0 / mu, predictor.current(), opts.increment, opts.growth, &mut backend, &mut rng)?;
        stats.iteration_matvecs.push(counter.get() - before);
        predictor.update(&t, m, n);
        let a = t.to_dense();

        let eps = lambda / mu;
        Zip::from(&mut e).and(d).and(&a).and(&y).for_each(|e, &d, &a, &y| *e = shrink(d - a + y / mu, eps));
        let mut z = d - &a;
        z -= &e;
        y.scaled_add(mu, &z);
        mu = (opts.rho * mu).min(mu_max);

        let residual = frobenius_norm(&z.view()) / d_fro;
        stats.residuals.push(residual);
        stats.iterations = iter;
        debug!("adm[{}] iter {iter}: rank {} residual {residual:.3e}", backend.name(), t.rank());
        last = Some(t);
        if residual <= opts.tol {
            stats.converged = true;
            break;
        }
    }
    if !stats.converged {
        warn!("adm[{}] stopped after {} iterations without convergence", backend.name(), stats.iterations);
    }

    let t = last.ok_or(Error::InvalidArgument("max_iter must be positive".into()))?;
    let threshold = 1e-8 * d_inf;
    stats.e_l0 = Some(e.iter().filter(|x| x.abs() > threshold).count());
    stats.rank_hat = t.rank();
    stats.rel_err = truth.map(|g| g.relative_error(&t));
    stats.rank_history = predictor.history().to_vec();
    stats.matvecs = counter.get();
    stats.restarts = backend.restarts();
    stats.wall_time = start.elapsed().as_secs_f64();
    Ok(RpcaSolution { a: t.to_dense(), e: SparseMatrix::from_dense(&e.view(), 0.0)?, stats })
}

/// Observed entries of an `m × n` matrix with the SVT step parameters.
#[derive(Debug, Clone)]
pub struct McProblem {
    observed: SparseMatrix,
    tau: f64,
    delta: f64,
}

impl McProblem {
    /// `τ` defaults to `5·√(mn)` and `δ` to `1.2·mn/s`, i.e. `5m` and
    /// `1.2m²/s` for square matrices.
    pub fn new(
        m: usize,
        n: usize,
        omega: &[(usize, usize)],
        values: &[f64],
        tau: Option<f64>,
        delta: Option<f64>,
    ) -> Result<Self> {
        if omega.is_empty() {
            return Err(Error::Empty("sample set"));
        }
        if omega.len() != values.len() {
            return Err(Error::Dimension(format!("{} samples but {} values", omega.len(), values.len())));
        }
        let triplets: Vec<_> = omega.iter().zip(values).map(|(&(i, j), &v)| (i, j, v)).collect();
        let observed = SparseMatrix::from_triplets(m, n, &triplets)?;
        let size = (m * n) as f64;
        let tau = tau.unwrap_or(5.0 * size.sqrt());
        let delta = delta.unwrap_or(1.2 * size / omega.len() as f64);
        if !(tau > 0.0 && delta > 0.0) || !tau.is_finite() || !delta.is_finite() {
            return Err(Error::InvalidArgument(format!("tau = {tau} and delta = {delta} must be positive")));
        }
        Ok(Self { observed, tau, delta })
    }

    pub fn observed(&self) -> &SparseMatrix {
        &self.observed
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

#[derive(Debug, Clone)]
pub struct SvtOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub initial_rank: usize,
    pub increment: usize,
    pub growth: Growth,
    pub seed: u64,
}

impl Default for SvtOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_iter: 500,
            initial_rank: INITIAL_RANK,
            increment: DEFAULT_INCREMENT,
            growth: Growth::Recompute,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct McSolution {
    /// Recovered matrix `U diag(s) Vᵀ` in factored form.
    pub estimate: Thresholded,
    pub stats: SolverStats,
    /// Final dual iterate, supported on the sample set.
    pub y: SparseMatrix,
}

/// Matrix completion by singular value thresholding.
///
/// Starts from `Y_0 = k_0 δ P_Ω(D)` with `k_0 = ⌈τ / (δ ‖P_Ω(D)‖_2)⌉` and
/// iterates `A ← T_τ(Y)`, `Y ← Y + δ P_Ω(D − A)` until
/// `‖P_Ω(A − D)‖_F / ‖P_Ω(D)‖_F ≤ tol`. `Y` keeps the sparsity pattern of Ω
/// throughout and is applied as a sparse operator.
pub fn mc_svt(
    problem: &McProblem,
    mut backend: SvdBackend,
    opts: &SvtOptions,
    truth: Option<GroundTruth<'_>>,
) -> Result<McSolution> {
    let start = Instant::now();
    let obs = &problem.observed;
    let (m, n) = (obs.nrows(), obs.ncols());
    if let Some(t) = &truth {
        if t.shape() != (m, n) {
            return Err(Error::Dimension(format!("ground truth is {:?}, data is {m}x{n}", t.shape())));
        }
    }
    let (tau, delta) = (problem.tau, problem.delta);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let counter = ApplyCounter::new();

    let norm2 = spectral_norm(&SparseOperator::with_counter(obs.clone(), counter.clone()), &mut rng)?;
    let obs_fro = obs.frobenius_norm();
    let k0 = (tau / (delta * norm2)).ceil();
    let mut y = obs.clone();
    y.values_mut().iter_mut().for_each(|v| *v *= k0 * delta);
    let positions: Vec<(usize, usize)> = obs.positions().collect();

    let mut predictor = RankPredictor::new(opts.initial_rank, opts.increment);
    let mut stats = SolverStats::default();
    let mut last: Option<Thresholded> = None;
    let mut residual = vec![0.0; positions.len()];

    for iter in 1..=opts.max_iter {
        let op = SparseOperator::with_counter(y, counter.clone());
        let before = counter.get();
        stats.requested_ranks.push(predictor.current());
        let t = svt_with(&op, tau, predictor.current(), opts.increment, opts.growth, &mut backend, &mut rng)?;
        stats.iteration_matvecs.push(counter.get() - before);
        y = op.matrix().clone();
        predictor.update(&t, m, n);

        let us = &t.u * &t.s.view().insert_axis(Axis(0));
        for ((res, &(i, j)), &d) in residual.iter_mut().zip(&positions).zip(obs.values()) {
            *res = d - us.row(i).dot(&t.v.row(j));
        }
        let rel = residual.iter().map(|r| r * r).sum::<f64>().sqrt() / obs_fro;
        stats.residuals.push(rel);
        stats.iterations = iter;
        debug!("svt[{}] iter {iter}: rank {} residual {rel:.3e}", backend.name(), t.rank());
        last = Some(t);
        if rel <= opts.tol {
            stats.converged = true;
            break;
        }
        for (yv, r) in y.values_mut().iter_mut().zip(&residual) {
            *yv += delta * r;
        }
    }
    if !stats.converged {
        warn!("svt[{}] stopped after {} iterations without convergence", backend.name(), stats.iterations);
    }

    let t = last.ok_or(Error::InvalidArgument("max_iter must be positive".into()))?;
    stats.rank_hat = t.rank();
    stats.rel_err = truth.map(|g| g.relative_error(&t));
    stats.rank_history = predictor.history().to_vec();
    stats.matvecs = counter.get();
    stats.restarts = backend.restarts();
    stats.wall_time = start.elapsed().as_secs_f64();
    Ok(McSolution { estimate: t, stats, y })
}

//! Proximal operators of the `l1` and nuclear norms.
//!
//! [`svt`] evaluates `T_ε(W) = U · diag(shrink(σ, ε)) · Vᵀ` from a partial SVD,
//! growing the number of computed triplets until the smallest one falls at or
//! below `ε`. [`RankPredictor`] supplies the number of triplets to ask for on
//! the next call.

use log::trace;
use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::block_lanczos::{adapt_subspace, blws_svd, WarmStart, DEFAULT_STEPS};
use crate::error::{Error, Result};
use crate::lanczos::{lanczos_partial_svd, LanczosOptions};
use crate::linalg::{full_svd_small, thin_qr, LinearOperator};

/// Default growth step for the number of computed singular triplets.
pub const DEFAULT_INCREMENT: usize = 5;

/// Relative Ritz residual above which a block Lanczos call is recomputed.
pub const DEFAULT_RESTART_TOL: f64 = 1e-2;

/// Number of triplets requested on the first call of a solver.
pub const INITIAL_RANK: usize = 10;

/// Scalar soft thresholding `sgn(x) · max(|x| − ε, 0)`.
///
/// `eps` must be nonnegative; see [`shrink_matrix`] for the checked version.
#[inline]
pub fn shrink(x: f64, eps: f64) -> f64 {
    debug_assert!(eps >= 0.0);
    if x > eps {
        x - eps
    } else if x < -eps {
        x + eps
    } else {
        0.0
    }
}

fn check_threshold(eps: f64) -> Result<()> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::InvalidArgument(format!("threshold must be finite and nonnegative, got {eps}")));
    }
    Ok(())
}

/// Entrywise [`shrink`], the proximal operator of `eps · ‖·‖_1`.
pub fn shrink_matrix(a: &ArrayView2<f64>, eps: f64) -> Result<Array2<f64>> {
    check_threshold(eps)?;
    Ok(a.mapv(|x| shrink(x, eps)))
}

pub fn shrink_in_place(values: &mut [f64], eps: f64) -> Result<()> {
    check_threshold(eps)?;
    values.iter_mut().for_each(|x| *x = shrink(*x, eps));
    Ok(())
}

/// How the partial SVD inside [`svt`] is computed.
#[derive(Debug, Clone)]
pub enum SvdBackend {
    /// Full dense SVD; counts no operator applications.
    ExactFull,
    /// Single-vector Lanczos on the augmented operator from a random start.
    Lanczos { options: LanczosOptions },
    /// Block Lanczos warm-started from the subspaces of the previous call.
    ///
    /// With `lanczos_seed`, the first call (no warm start yet) is answered by
    /// the Lanczos backend and its triplets become the first warm start;
    /// otherwise the first call starts from random subspaces.
    ///
    /// A call whose largest Ritz residual exceeds `restart_tol · σ_1` is
    /// recomputed by the Lanczos backend and reseeds the warm start;
    /// `restarts` counts those calls.
    ///
    /// With `refine`, the triplets are taken from the SVD of `Uᵀ W V` over
    /// the subspaces found by [`blws_svd`], at the cost of `r` more
    /// applications of `W`.
    Blws { k: usize, warm: Option<WarmStart>, lanczos_seed: bool, restart_tol: f64, refine: bool, restarts: usize },
}

impl SvdBackend {
    pub fn lanczos() -> Self {
        Self::Lanczos { options: LanczosOptions::default() }
    }

    pub fn blws() -> Self {
        Self::Blws {
            k: DEFAULT_STEPS,
            warm: None,
            lanczos_seed: true,
            restart_tol: DEFAULT_RESTART_TOL,
            refine: true,
            restarts: 0,
        }
    }

    /// Sets the block Lanczos step count; other backends are returned unchanged.
    pub fn with_steps(mut self, steps: usize) -> Self {
        if let Self::Blws { k, .. } = &mut self {
            *k = steps;
        }
        self
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::ExactFull => "exact",
            Self::Lanczos { .. } => "lanczos",
            Self::Blws { .. } => "blws",
        }
    }

    /// Number of block Lanczos calls that were recomputed by Lanczos.
    pub fn restarts(&self) -> usize {
        match self {
            Self::Blws { restarts, .. } => *restarts,
            _ => 0,
        }
    }

    /// Leading `r` singular triplets (possibly fewer for the Lanczos backend).
    fn top<W: LinearOperator, R: Rng + ?Sized>(
        &mut self,
        w: &W,
        r: usize,
        rng: &mut R,
    ) -> Result<(Array2<f64>, Array1<f64>, Array2<f64>)> {
        match self {
            Self::ExactFull => {
                let svd = full_svd_small(&w.to_dense().view())?;
                Ok((
                    svd.u.slice(s![.., ..r]).to_owned(),
                    svd.s.slice(s![..r]).to_owned(),
                    svd.v.slice(s![.., ..r]).to_owned(),
                ))
            }
            Self::Lanczos { options } => {
                let p = lanczos_partial_svd(w, r, options, None, rng)?;
                if !p.converged {
                    trace!("lanczos partial svd stopped unconverged after {} steps", p.steps);
                }
                Ok((p.u, p.s, p.v))
            }
            Self::Blws { k, warm, lanczos_seed, restart_tol, refine, restarts } => {
                if warm.is_none() && *lanczos_seed {
                    return lanczos_seeded(w, r, warm, rng);
                }
                let start = adapt_subspace(warm.as_ref(), r, w.nrows(), w.ncols(), rng)?;
                let out = blws_svd(w, &start, *k, r, rng)?;
                let top = out.warm.sigma().first().copied().unwrap_or(0.0);
                let worst = out.residuals.iter().fold(0.0_f64, |a, &b| a.max(b));
                if worst > *restart_tol * top {
                    trace!("blws residual {worst:.3e} against sigma_1 {top:.3e}, recomputing");
                    *restarts += 1;
                    return lanczos_seeded(w, r, warm, rng);
                }
                let found = if *refine { project(w, out.warm)? } else { out.warm };
                let (u, v, sigma) = found.clone().into_parts();
                *warm = Some(found);
                Ok((u, sigma, v))
            }
        }
    }
}

/// Best triplets of `W` within `span(U) × span(V)`: the SVD of `Uᵀ W V`.
fn project<W: LinearOperator>(w: &W, found: WarmStart) -> Result<WarmStart> {
    let (u, v, _) = found.into_parts();
    let small = u.t().dot(&w.apply_block(v.view()));
    let svd = full_svd_small(&small.view())?;
    WarmStart::new(u.dot(&svd.u), v.dot(&svd.v), svd.s)
}

/// Lanczos triplets, also stored (adapted to `r` columns) as the next warm start.
fn lanczos_seeded<W: LinearOperator, R: Rng + ?Sized>(
    w: &W,
    r: usize,
    warm: &mut Option<WarmStart>,
    rng: &mut R,
) -> Result<(Array2<f64>, Array1<f64>, Array2<f64>)> {
    let p = lanczos_partial_svd(w, r, &LanczosOptions::default(), None, rng)?;
    let (m, n) = (w.nrows(), w.ncols());
    let seeded = match p.s.len() {
        0 => adapt_subspace(None, r, m, n, rng)?,
        _ => {
            let u = thin_qr(&p.u.view())?.q;
            let v = thin_qr(&p.v.view())?.q;
            let first = WarmStart::new(u, v, p.s.clone())?;
            adapt_subspace(Some(&first), r, m, n, rng)?
        }
    };
    *warm = Some(seeded);
    Ok((p.u, p.s, p.v))
}

/// Result of one singular value thresholding.
#[derive(Debug, Clone)]
pub struct Thresholded {
    /// `m × rank` left factor.
    pub u: Array2<f64>,
    /// Shrunk singular values, all positive.
    pub s: Array1<f64>,
    /// `n × rank` right factor.
    pub v: Array2<f64>,
    /// Triplets computed in the final round.
    pub computed: usize,
    /// The requested rank was too small: it was increased during the call
    /// ([`Growth::Recompute`]) or every computed value exceeded `ε`
    /// ([`Growth::Defer`]).
    pub grew: bool,
}

impl Thresholded {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `U · diag(s) · Vᵀ`
    pub fn to_dense(&self) -> Array2<f64> {
        (&self.u * &self.s.view().insert_axis(Axis(0))).dot(&self.v.t())
    }

    /// Entry `(i, j)` of [`Self::to_dense`] without forming the matrix.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let (u, v) = (self.u.row(i), self.v.row(j));
        (0..self.rank()).map(|t| u[t] * self.s[t] * v[t]).sum()
    }
}

/// What [`svt_with`] does when every computed singular value exceeds `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Growth {
    /// Ask for `increment` more triplets and recompute until one falls at or
    /// below `ε`, so the result is exact.
    Recompute,
    /// Return the truncated result and flag it through [`Thresholded::grew`];
    /// the caller requests more triplets on its next call.
    Defer,
}

/// Singular value thresholding `T_ε(W)`.
///
/// Starts from `r` triplets and adds `increment` more until the smallest
/// computed singular value is `≤ ε` (or all `min(m, n)` are computed).
/// Singular values equal to `ε` are dropped.
pub fn svt<W: LinearOperator, R: Rng + ?Sized>(
    w: &W,
    eps: f64,
    r: usize,
    increment: usize,
    backend: &mut SvdBackend,
    rng: &mut R,
) -> Result<Thresholded> {
    svt_with(w, eps, r, increment, Growth::Recompute, backend, rng)
}

/// [`svt`] with a choice of [`Growth`] policy.
pub fn svt_with<W: LinearOperator, R: Rng + ?Sized>(
    w: &W,
    eps: f64,
    r: usize,
    increment: usize,
    growth: Growth,
    backend: &mut SvdBackend,
    rng: &mut R,
) -> Result<Thresholded> {
    check_threshold(eps)?;
    let p = w.nrows().min(w.ncols());
    if p == 0 {
        return Err(Error::Empty("svt operand"));
    }
    if increment == 0 {
        return Err(Error::InvalidArgument("rank increment must be positive".into()));
    }
    let mut want = r.clamp(1, p);
    let mut grew = false;
    let (u, sigma, v) = loop {
        let (u, sigma, v) = backend.top(w, want, rng)?;
        let smallest = sigma.last().copied().unwrap_or(0.0);
        if growth == Growth::Defer || smallest <= eps || sigma.len() < want || want == p {
            break (u, sigma, v);
        }
        want = (want + increment).min(p);
        grew = true;
    };
    let rank = sigma.iter().take_while(|&&x| x > eps).count();
    if growth == Growth::Defer {
        grew = rank == want && want < p;
    }
    Ok(Thresholded {
        u: u.slice(s![.., ..rank]).to_owned(),
        s: sigma.slice(s![..rank]).mapv(|x| x - eps),
        v: v.slice(s![.., ..rank]).to_owned(),
        computed: sigma.len(),
        grew,
    })
}

/// Rank prediction for the next thresholding: `achieved + increment` after a
/// call that had to grow, `achieved + 1` otherwise, clamped to `[1, p]`.
pub fn predict_rank(achieved: usize, grew: bool, increment: usize, m: usize, n: usize) -> usize {
    let next = if grew { achieved + increment } else { achieved + 1 };
    next.clamp(1, m.min(n).max(1))
}

/// Keeps the sequence of predicted ranks of one solver run.
#[derive(Debug, Clone)]
pub struct RankPredictor {
    increment: usize,
    current: usize,
    history: Vec<usize>,
}

impl RankPredictor {
    pub fn new(initial: usize, increment: usize) -> Self {
        Self { increment, current: initial, history: Vec::new() }
    }

    /// Rank to request from the next [`svt`] call.
    pub fn current(&self) -> usize {
        self.current
    }

    pub fn increment(&self) -> usize {
        self.increment
    }

    /// Feeds back the outcome of an [`svt`] call and returns the next request.
    pub fn update(&mut self, out: &Thresholded, m: usize, n: usize) -> usize {
        self.current = predict_rank(out.rank(), out.grew, self.increment, m, n);
        self.history.push(self.current);
        self.current
    }

    pub fn history(&self) -> &[usize] {
        &self.history
    }
}

impl Default for RankPredictor {
    fn default() -> Self {
        Self::new(INITIAL_RANK, DEFAULT_INCREMENT)
    }
}

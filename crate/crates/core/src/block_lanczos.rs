//! Block Lanczos with warm start.
//!
//! [`block_lanczos_procedure`] builds an orthonormal basis `Q_k = (X_1, …, X_k)`
//! of the block Krylov space `span{X_1, W X_1, …, W^{k-1} X_1}` together with
//! the block tridiagonal projection
//!
//! ```text
//!       | M_1  B_1ᵀ            |
//! T_k = | B_1  M_2   ⋱         |      M_l = X_lᵀ W X_l
//!       |      ⋱     ⋱   B_{k-1}ᵀ |
//!       |        B_{k-1}  M_k  |
//! ```
//!
//! where `X_{l+1} B_l` is the thin QR factorization of
//! `R_l = W X_l − X_l M_l − X_{l-1} B_{l-1}ᵀ`. No reorthogonalization between
//! blocks is performed; the method is meant to run for very few steps.
//!
//! [`blws_svd`] applies this to the augmented operator `[[0, W], [Wᵀ, 0]]`
//! starting from `(U; V)/√2`, the singular subspaces of the previous solver
//! iteration, and returns the refreshed subspaces as the next [`WarmStart`].

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use log::{debug, info};
use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    augment, frobenius_norm, gaussian_matrix, orthonormality_error, random_orthonormal,
    sym_evd_small, symmetrize, thin_qr, LinearOperator,
};

/// Relative threshold (against `‖W X_1‖_F`) on the diagonal of `B_l` below
/// which the new block is treated as rank deficient.
pub const BLOCK_BREAKDOWN_TOL: f64 = 1e-12;

/// Tolerance on `‖X_1ᵀ X_1 − I‖_F` for an acceptable start block.
pub const START_ORTHONORMALITY_TOL: f64 = 1e-8;

/// Default number of block steps.
pub const DEFAULT_STEPS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockTridiagonal {
    /// Symmetric diagonal blocks `M_1 … M_k`.
    pub diag: Vec<Array2<f64>>,
    /// Upper triangular sub-diagonal blocks `B_1 … B_{k-1}`.
    pub sub: Vec<Array2<f64>>,
}

impl BlockTridiagonal {
    pub fn block_size(&self) -> usize {
        self.diag.first().map_or(0, |m| m.nrows())
    }

    pub fn num_blocks(&self) -> usize {
        self.diag.len()
    }

    pub fn dim(&self) -> usize {
        self.block_size() * self.num_blocks()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let b = self.block_size();
        let mut t = Array2::zeros((self.dim(), self.dim()));
        for (l, m) in self.diag.iter().enumerate() {
            t.slice_mut(s![l * b..(l + 1) * b, l * b..(l + 1) * b]).assign(m);
        }
        for (l, bl) in self.sub.iter().enumerate() {
            t.slice_mut(s![(l + 1) * b..(l + 2) * b, l * b..(l + 1) * b]).assign(bl);
            t.slice_mut(s![l * b..(l + 1) * b, (l + 1) * b..(l + 2) * b]).assign(&bl.t());
        }
        t
    }
}

#[derive(Debug, Clone)]
pub struct BlockLanczosFactorization {
    /// `N × (l·b)` basis `(X_1, …, X_l)` for the `l` blocks actually built.
    pub basis: Array2<f64>,
    pub tridiagonal: BlockTridiagonal,
    /// `R_l` of the last block, so that `W Q = Q T + R_l E_lᵀ`.
    pub residual: Array2<f64>,
    pub terminated_early: bool,
}

fn check_orthonormal(x: &ArrayView2<f64>) -> Result<()> {
    let dev = orthonormality_error(x);
    if !(dev <= START_ORTHONORMALITY_TOL) {
        return Err(Error::NotOrthonormal(dev));
    }
    Ok(())
}

/// Runs `k` steps of the block Lanczos procedure on the symmetric operator
/// `op` from the orthonormal block `x1` (`N × b`).
///
/// Stops early, returning the blocks built so far, when some `R_l` is
/// numerically rank deficient (the span became an invariant subspace in at
/// least one direction).
pub fn block_lanczos_procedure<W: LinearOperator>(
    op: &W,
    x1: ArrayView2<f64>,
    k: usize,
) -> Result<BlockLanczosFactorization> {
    let dim = op.nrows();
    if op.ncols() != dim {
        return Err(Error::Dimension(format!("symmetric operator must be square, got {}x{}", dim, op.ncols())));
    }
    let b = x1.ncols();
    if b == 0 || x1.nrows() != dim {
        return Err(Error::Dimension(format!("start block is {}x{b} for a {dim}-dimensional operator", x1.nrows())));
    }
    if k < 1 {
        return Err(Error::InvalidArgument("block lanczos needs k >= 1".into()));
    }
    if k * b > dim {
        return Err(Error::InvalidArgument(format!("k·b = {} exceeds the dimension {dim}", k * b)));
    }
    check_orthonormal(&x1)?;

    let mut blocks: Vec<Array2<f64>> = vec![x1.to_owned()];
    let mut wx = op.apply_block(x1);
    let breakdown = BLOCK_BREAKDOWN_TOL * frobenius_norm(&wx.view());
    let mut diag = vec![symmetrize(&x1.t().dot(&wx).view())];
    let mut sub: Vec<Array2<f64>> = Vec::new();
    let mut terminated_early = false;

    let residual = loop {
        let l = blocks.len() - 1;
        let mut r = wx - blocks[l].dot(&diag[l]);
        if l > 0 {
            r -= &blocks[l - 1].dot(&sub[l - 1].t());
        }
        if blocks.len() == k {
            break r;
        }
        let qr = thin_qr(&r.view())?;
        let rank = (0..b).filter(|&j| qr.r[[j, j]] > breakdown).count();
        if rank < b {
            debug!("block lanczos: R_{} has rank {rank} < {b}, stopping", l + 1);
            terminated_early = true;
            break r;
        }
        wx = op.apply_block(qr.q.view());
        diag.push(symmetrize(&qr.q.t().dot(&wx).view()));
        sub.push(qr.r);
        blocks.push(qr.q);
    };

    let views: Vec<_> = blocks.iter().map(|x| x.view()).collect();
    Ok(BlockLanczosFactorization {
        basis: concatenate(Axis(1), &views).expect("blocks share their row count"),
        tridiagonal: BlockTridiagonal { diag, sub },
        residual,
        terminated_early,
    })
}

/// Leading Ritz pairs from a block Lanczos run.
#[derive(Debug, Clone)]
pub struct BlockEvd {
    /// `N × r` Ritz vectors.
    pub vectors: Array2<f64>,
    /// Ritz values, descending.
    pub values: Array1<f64>,
    /// Residual norms `‖W y_j − θ_j y_j‖` of the Ritz pairs.
    pub residuals: Array1<f64>,
    pub terminated_early: bool,
    /// Fewer than the requested pairs were available after early termination.
    pub truncated: bool,
    /// Number of blocks built.
    pub blocks: usize,
}

/// Block Lanczos partial EVD: Rayleigh–Ritz on the block tridiagonal
/// projection. Returns `min(r, available)` pairs.
pub fn bl_evd<W: LinearOperator>(op: &W, x1: ArrayView2<f64>, k: usize, r: usize) -> Result<BlockEvd> {
    if r < 1 || r > k * x1.ncols() {
        return Err(Error::InvalidArgument(format!(
            "wanted {r} Ritz pairs from {k} blocks of width {}",
            x1.ncols()
        )));
    }
    let f = block_lanczos_procedure(op, x1, k)?;
    let eig = sym_evd_small(&f.tridiagonal.to_dense().view())?;
    let avail = f.tridiagonal.dim();
    let keep = r.min(avail);
    let b = x1.ncols();
    let last_rows = eig.vectors.slice(s![avail - b.., ..keep]);
    let residuals = f.residual.dot(&last_rows).columns().into_iter().map(|c| c.dot(&c).sqrt()).collect();
    Ok(BlockEvd {
        vectors: f.basis.dot(&eig.vectors.slice(s![.., ..keep])),
        values: eig.values.slice(s![..keep]).to_owned(),
        residuals,
        terminated_early: f.terminated_early,
        truncated: keep < r,
        blocks: f.tridiagonal.num_blocks(),
    })
}

/// Warm-started partial EVD: the previous principal eigen-subspace (orthonormalized)
/// seeds [`bl_evd`].
pub fn blws_evd<W: LinearOperator>(op: &W, previous: ArrayView2<f64>, k: usize, r: usize) -> Result<BlockEvd> {
    let x1 = thin_qr(&previous)?.q;
    bl_evd(op, x1.view(), k, r)
}

/// Principal singular subspaces carried from one solver iteration to the next.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    u: Array2<f64>,
    v: Array2<f64>,
    sigma: Array1<f64>,
}

impl WarmStart {
    /// Checks orthonormality of `u`, `v` (to `1e-8`) and that `sigma` is
    /// nonnegative and descending.
    pub fn new(u: Array2<f64>, v: Array2<f64>, sigma: Array1<f64>) -> Result<Self> {
        let r = sigma.len();
        if u.ncols() != r || v.ncols() != r {
            return Err(Error::Dimension(format!(
                "warm start with {} left, {} right vectors and {r} values",
                u.ncols(),
                v.ncols()
            )));
        }
        if r == 0 {
            return Err(Error::Empty("warm start"));
        }
        check_orthonormal(&u.view())?;
        check_orthonormal(&v.view())?;
        if sigma.iter().any(|s| !(*s >= 0.0)) || sigma.windows(2).into_iter().any(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument("singular values must be nonnegative and descending".into()));
        }
        Ok(Self { u, v, sigma })
    }

    pub fn u(&self) -> &Array2<f64> {
        &self.u
    }

    pub fn v(&self) -> &Array2<f64> {
        &self.v
    }

    pub fn sigma(&self) -> &Array1<f64> {
        &self.sigma
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn into_parts(self) -> (Array2<f64>, Array2<f64>, Array1<f64>) {
        (self.u, self.v, self.sigma)
    }
}

/// Resizes a warm start to `r_new` columns (or creates a random one).
///
/// Shrinking keeps the leading columns. Growing appends Gaussian columns and
/// re-orthonormalizes by thin QR, which leaves the span of the existing
/// columns unchanged; the new directions get singular value 0.
pub fn adapt_subspace<R: Rng + ?Sized>(
    warm: Option<&WarmStart>,
    r_new: usize,
    m: usize,
    n: usize,
    rng: &mut R,
) -> Result<WarmStart> {
    if r_new < 1 || r_new > m.min(n) {
        return Err(Error::InvalidArgument(format!("subspace dimension {r_new} outside [1, {}]", m.min(n))));
    }
    let Some(warm) = warm else {
        let u = random_orthonormal(m, r_new, rng)?;
        let v = random_orthonormal(n, r_new, rng)?;
        return WarmStart::new(u, v, Array1::zeros(r_new));
    };
    if warm.u.nrows() != m || warm.v.nrows() != n {
        return Err(Error::Dimension(format!(
            "warm start is {}/{} rows, problem is {m}x{n}",
            warm.u.nrows(),
            warm.v.nrows()
        )));
    }
    let r = warm.rank();
    if r_new == r {
        return Ok(warm.clone());
    }
    if r_new < r {
        return Ok(WarmStart {
            u: warm.u.slice(s![.., ..r_new]).to_owned(),
            v: warm.v.slice(s![.., ..r_new]).to_owned(),
            sigma: warm.sigma.slice(s![..r_new]).to_owned(),
        });
    }
    let extra = r_new - r;
    let grow = |basis: &Array2<f64>, rng: &mut R| -> Result<Array2<f64>> {
        let g = gaussian_matrix(basis.nrows(), extra, rng);
        let stacked = concatenate(Axis(1), &[basis.view(), g.view()]).expect("same row count");
        Ok(thin_qr(&stacked.view())?.q)
    };
    let u = grow(&warm.u, rng)?;
    let v = grow(&warm.v, rng)?;
    let mut sigma = Array1::zeros(r_new);
    sigma.slice_mut(s![..r]).assign(&warm.sigma);
    WarmStart::new(u, v, sigma)
}

/// Result of one warm-started partial SVD.
#[derive(Debug, Clone)]
pub struct BlwsOutput {
    pub warm: WarmStart,
    /// Block steps actually requested (after raising `k` if needed).
    pub steps: usize,
    pub terminated_early: bool,
    /// Columns filled with random directions because fewer than `r` positive
    /// Ritz values were available.
    pub padded: usize,
    /// Residual norms of the augmented Ritz pairs behind the returned
    /// triplets; zero for padded columns.
    pub residuals: Array1<f64>,
}

/// Ritz values at or below this fraction of the largest are not positive.
pub const POSITIVE_RITZ_TOL: f64 = 1e-12;

/// Warm-started partial SVD of `W` (m × n).
///
/// Runs `k` block Lanczos steps on the augmented operator from the
/// orthonormalized `(U; V)/√2` of `warm`, keeps the `r` largest positive Ritz
/// values and unpacks each Ritz vector into a left (top `m` entries) and right
/// (bottom `n` entries) singular vector, both scaled by `√2` and then
/// re-orthonormalized. `k` is raised when `k · b < r`.
pub fn blws_svd<W: LinearOperator, R: Rng + ?Sized>(
    w: &W,
    warm: &WarmStart,
    k: usize,
    r: usize,
    rng: &mut R,
) -> Result<BlwsOutput> {
    let (m, n) = (w.nrows(), w.ncols());
    let b = warm.rank();
    if warm.u.nrows() != m || warm.v.nrows() != n {
        return Err(Error::Dimension(format!(
            "warm start is {}/{} rows, operator is {m}x{n}",
            warm.u.nrows(),
            warm.v.nrows()
        )));
    }
    if r < 1 || r > m.min(n) {
        return Err(Error::InvalidArgument(format!("wanted {r} singular triplets of a {m}x{n} operator")));
    }

    let mut steps = k.max(1);
    if r > steps * b {
        steps = r.div_ceil(b);
        info!("blws: raising k from {k} to {steps} to serve r = {r} with block width {b}");
    }
    steps = steps.min((m + n) / b).max(1);

    let stacked = concatenate(Axis(0), &[warm.u.view(), warm.v.view()]).expect("same column count")
        * FRAC_1_SQRT_2;
    let x1 = thin_qr(&stacked.view())?.q;
    let aug = augment(w);
    let evd = bl_evd(&aug, x1.view(), steps, r.min(steps * b))?;

    let top = evd.values.first().copied().unwrap_or(0.0);
    let keep = evd
        .values
        .iter()
        .take_while(|&&x| x > 0.0 && x > POSITIVE_RITZ_TOL * top)
        .count()
        .min(r);

    let out = if keep == 0 {
        adapt_subspace(None, r, m, n, rng)?
    } else {
        let u = evd.vectors.slice(s![..m, ..keep]).mapv(|x| x * SQRT_2);
        let v = evd.vectors.slice(s![m.., ..keep]).mapv(|x| x * SQRT_2);
        let u = thin_qr(&u.view())?.q;
        let v = thin_qr(&v.view())?.q;
        let found = WarmStart::new(u, v, evd.values.slice(s![..keep]).to_owned())?;
        if keep < r {
            adapt_subspace(Some(&found), r, m, n, rng)?
        } else {
            found
        }
    };
    if keep < r {
        debug!("blws: only {keep} positive Ritz values for r = {r}; padded with random directions");
    }
    let mut residuals = Array1::zeros(r);
    residuals.slice_mut(s![..keep]).assign(&evd.residuals.slice(s![..keep]));
    Ok(BlwsOutput { warm: out, steps, terminated_early: evd.terminated_early, padded: r - keep, residuals })
}

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::check_finite;
use crate::error::Result;

/// Cumulative count of single-vector operator applications.
///
/// Clones share the same count, so a solver can hand one counter to every
/// operator it builds and read the total at the end.
#[derive(Debug, Clone, Default)]
pub struct ApplyCounter(Arc<AtomicU64>);

impl ApplyCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&self, n: usize) {
        self.0.fetch_add(n as u64, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

/// A real `nrows × ncols` linear map `W` known only through its action.
///
/// Implementors provide the uncounted kernels; the provided `apply*` methods
/// are the counted entry points used by every solver. A block of width `b`
/// counts as `b` applications.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn counter(&self) -> &ApplyCounter;

    /// `W · X`, not counted.
    fn kernel(&self, x: ArrayView2<f64>) -> Array2<f64>;

    /// `Wᵀ · Y`, not counted.
    fn kernel_adjoint(&self, y: ArrayView2<f64>) -> Array2<f64>;

    fn apply_block(&self, x: ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(x.nrows(), self.ncols(), "apply_block: operand rows");
        self.counter().add(x.ncols());
        self.kernel(x)
    }

    fn apply_adjoint_block(&self, y: ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(y.nrows(), self.nrows(), "apply_adjoint_block: operand rows");
        self.counter().add(y.ncols());
        self.kernel_adjoint(y)
    }

    fn apply(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.apply_block(x.insert_axis(Axis(1))).remove_axis(Axis(1))
    }

    fn apply_adjoint(&self, y: ArrayView1<f64>) -> Array1<f64> {
        self.apply_adjoint_block(y.insert_axis(Axis(1))).remove_axis(Axis(1))
    }

    fn applications(&self) -> u64 {
        self.counter().get()
    }

    /// Explicit dense form (uncounted; meant for oracles and the exact backend).
    fn to_dense(&self) -> Array2<f64> {
        self.kernel(Array2::eye(self.ncols()).view())
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn nrows(&self) -> usize {
        (**self).nrows()
    }
    fn ncols(&self) -> usize {
        (**self).ncols()
    }
    fn counter(&self) -> &ApplyCounter {
        (**self).counter()
    }
    fn kernel(&self, x: ArrayView2<f64>) -> Array2<f64> {
        (**self).kernel(x)
    }
    fn kernel_adjoint(&self, y: ArrayView2<f64>) -> Array2<f64> {
        (**self).kernel_adjoint(y)
    }
    fn to_dense(&self) -> Array2<f64> {
        (**self).to_dense()
    }
}

/// Dense matrix behind the operator interface.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    matrix: Array2<f64>,
    counter: ApplyCounter,
}

impl DenseOperator {
    pub fn new(matrix: Array2<f64>) -> Result<Self> {
        Self::with_counter(matrix, ApplyCounter::new())
    }

    pub fn with_counter(matrix: Array2<f64>, counter: ApplyCounter) -> Result<Self> {
        check_finite(&matrix.view(), "dense operator")?;
        Ok(Self { matrix, counter })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Array2<f64> {
        self.matrix
    }
}

impl LinearOperator for DenseOperator {
    fn nrows(&self) -> usize {
        self.matrix.nrows()
    }
    fn ncols(&self) -> usize {
        self.matrix.ncols()
    }
    fn counter(&self) -> &ApplyCounter {
        &self.counter
    }
    fn kernel(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.matrix.dot(&x)
    }
    fn kernel_adjoint(&self, y: ArrayView2<f64>) -> Array2<f64> {
        self.matrix.t().dot(&y)
    }
    fn to_dense(&self) -> Array2<f64> {
        self.matrix.clone()
    }
}

/// The symmetric `(m+n) × (m+n)` operator `[[0, W], [Wᵀ, 0]]`.
///
/// Acting on `(x; y)` it returns `(W y; Wᵀ x)`. The zero blocks are never
/// formed, and a half of the operand that is exactly zero is skipped, so a
/// vector of the form `(x; 0)` costs one product with `Wᵀ` only.
///
/// Applications are counted on the counter of `W`: one per column multiplied
/// by `W` and one per column multiplied by `Wᵀ`. A general block of width `b`
/// therefore counts `2b`, a block with one zero half counts `b`.
#[derive(Debug, Clone, Copy)]
pub struct AugmentedOperator<W> {
    inner: W,
}

pub fn augment<W: LinearOperator>(w: W) -> AugmentedOperator<W> {
    AugmentedOperator { inner: w }
}

impl<W: LinearOperator> AugmentedOperator<W> {
    pub fn inner(&self) -> &W {
        &self.inner
    }

    /// Rows belonging to the `W` (left) half.
    pub fn split(&self) -> usize {
        self.inner.nrows()
    }
}

fn all_zero(x: &ArrayView2<f64>) -> bool {
    x.iter().all(|v| *v == 0.0)
}

impl<W: LinearOperator> LinearOperator for AugmentedOperator<W> {
    fn nrows(&self) -> usize {
        self.inner.nrows() + self.inner.ncols()
    }
    fn ncols(&self) -> usize {
        self.nrows()
    }
    fn counter(&self) -> &ApplyCounter {
        self.inner.counter()
    }

    fn apply_block(&self, z: ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(z.nrows(), self.ncols(), "apply_block: operand rows");
        self.halves(z, |w, y| w.apply_block(y), |w, x| w.apply_adjoint_block(x))
    }

    fn apply_adjoint_block(&self, z: ArrayView2<f64>) -> Array2<f64> {
        self.apply_block(z)
    }

    fn kernel(&self, z: ArrayView2<f64>) -> Array2<f64> {
        self.halves(z, |w, y| w.kernel(y), |w, x| w.kernel_adjoint(x))
    }

    fn kernel_adjoint(&self, z: ArrayView2<f64>) -> Array2<f64> {
        self.kernel(z)
    }
}

impl<W: LinearOperator> AugmentedOperator<W> {
    fn halves(
        &self,
        z: ArrayView2<f64>,
        forward: impl Fn(&W, ArrayView2<f64>) -> Array2<f64>,
        adjoint: impl Fn(&W, ArrayView2<f64>) -> Array2<f64>,
    ) -> Array2<f64> {
        let m = self.inner.nrows();
        let n = self.inner.ncols();
        let b = z.ncols();
        let top = z.slice(s![..m, ..]);
        let bottom = z.slice(s![m.., ..]);
        let mut out = Array2::zeros((m + n, b));
        if !all_zero(&bottom) {
            out.slice_mut(s![..m, ..]).assign(&forward(&self.inner, bottom));
        }
        if !all_zero(&top) {
            out.slice_mut(s![m.., ..]).assign(&adjoint(&self.inner, top));
        }
        out
    }
}

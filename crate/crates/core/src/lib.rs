//! Block Lanczos with warm start (BLWS) for the partial SVDs inside nuclear
//! norm minimization solvers.
//!
//! The crate is layered bottom-up:
//!
//! * [`linalg`]: dense/sparse storage, the [`linalg::LinearOperator`]
//!   abstraction with application counting, the augmented operator
//!   `[[0, W], [Wᵀ, 0]]`, thin QR and small dense EVD/SVD.
//! * [`lanczos`]: single-vector Lanczos partial EVD/SVD (the baseline).
//! * [`block_lanczos`]: block Lanczos, Rayleigh–Ritz on the block tridiagonal
//!   projection and the warm-started partial SVD.
//! * [`prox`]: singular value thresholding with pluggable SVD backends and
//!   rank prediction.
//! * [`solvers`]: robust PCA by the alternating direction method and matrix
//!   completion by the SVT iteration.
//! * [`synth`]: seeded synthetic problem generators.

pub mod block_lanczos;
pub mod error;
pub mod lanczos;
pub mod linalg;
pub mod prox;
pub mod solvers;
pub mod synth;

pub use error::{Error, Result};

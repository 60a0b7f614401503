//! Seeded synthetic instances for robust PCA and matrix completion.
//!
//! Every instance is a pure function of its parameters and a `u64` seed. The
//! seed keys a ChaCha8 generator and each independent ingredient draws from
//! its own stream of that key:
//!
//! | stream | RPCA                     | MC              |
//! |--------|--------------------------|-----------------|
//! | 0      | left factor              | left factor     |
//! | 1      | right factor             | right factor    |
//! | 2      | singular values          | sample set Ω    |
//! | 3      | corrupted positions      |                 |
//! | 4      | corruption values        |                 |
//!
//! so changing, say, the corruption fraction leaves the low-rank part intact.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, Axis};
use rand::distr::{Distribution, Uniform};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{gaussian_matrix, mtx, random_orthonormal, SparseMatrix};

/// Magnitude bound of the gross corruptions.
pub const CORRUPTION_BOUND: f64 = 500.0;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// `D = A_true + E_true` with `A_true` low rank and `E_true` sparse.
#[derive(Debug, Clone)]
pub struct RpcaInstance {
    pub d: Array2<f64>,
    pub a_true: Array2<f64>,
    pub e_true: SparseMatrix,
    pub seed: u64,
    pub m: usize,
    pub rank: usize,
}

impl RpcaInstance {
    pub fn corruptions(&self) -> usize {
        self.e_true.nnz()
    }

    /// Writes `D`, `A_true` and `E_true` as Matrix Market files named
    /// `<stem>_D.mtx`, `<stem>_A.mtx`, `<stem>_E.mtx`.
    pub fn export(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        let paths: Vec<PathBuf> = ["D", "A", "E"].iter().map(|t| dir.join(format!("{stem}_{t}.mtx"))).collect();
        mtx::write_dense(&mut BufWriter::new(File::create(&paths[0])?), &self.d.view())?;
        mtx::write_dense(&mut BufWriter::new(File::create(&paths[1])?), &self.a_true.view())?;
        mtx::write_sparse(&mut BufWriter::new(File::create(&paths[2])?), &self.e_true)?;
        Ok(paths)
    }
}

/// Round half away from zero, as a count.
fn round_count(x: f64) -> usize {
    x.round().max(0.0) as usize
}

/// Low-rank plus sparse instance of size `m × m`.
///
/// `A_true = U Σ Vᵀ` with orthonormalized Gaussian `U`, `V` of width
/// `r = round(rank_frac · m)` and `Σ = diag(|g_i|) · m²/√r`, `g_i` standard
/// normal, so the entries of `A_true` have root mean square `m`. `E_true` has `round(corrupt_frac · m²)` nonzeros at distinct
/// uniformly chosen positions with values uniform on `[−500, 500]`.
pub fn gen_rpca(m: usize, rank_frac: f64, corrupt_frac: f64, seed: u64) -> Result<RpcaInstance> {
    if m == 0 {
        return Err(Error::Empty("rpca instance"));
    }
    if !(rank_frac > 0.0 && rank_frac < 1.0) {
        return Err(Error::InvalidArgument(format!("rank fraction {rank_frac} outside (0, 1)")));
    }
    if !(0.0..1.0).contains(&corrupt_frac) {
        return Err(Error::InvalidArgument(format!("corruption fraction {corrupt_frac} outside [0, 1)")));
    }
    let r = round_count(rank_frac * m as f64).max(1);
    if r >= m {
        return Err(Error::InvalidArgument(format!("rank {r} must be below m = {m}")));
    }

    let u = random_orthonormal(m, r, &mut stream(seed, 0))?;
    let v = random_orthonormal(m, r, &mut stream(seed, 1))?;
    let scale = (m * m) as f64 / (r as f64).sqrt();
    let mut g = stream(seed, 2);
    let sigma: Array1<f64> = (0..r).map(|_| StandardNormal.sample(&mut g)).map(|x: f64| x.abs() * scale).collect();
    let a_true = (&u * &sigma.insert_axis(Axis(0))).dot(&v.t());

    let count = round_count(corrupt_frac * (m * m) as f64);
    let mut positions = index::sample(&mut stream(seed, 3), m * m, count).into_vec();
    positions.sort_unstable();
    let dist = Uniform::new_inclusive(-CORRUPTION_BOUND, CORRUPTION_BOUND).expect("valid bounds");
    let mut g = stream(seed, 4);
    let triplets: Vec<_> = positions.iter().map(|&p| (p / m, p % m, dist.sample(&mut g))).collect();
    let e_true = SparseMatrix::from_triplets(m, m, &triplets)?;

    let mut d = a_true.clone();
    for &(i, j, e) in &triplets {
        d[[i, j]] += e;
    }
    Ok(RpcaInstance { d, a_true, e_true, seed, m, rank: r })
}

/// `s = round(ratio · r(2m − r))`, the number of samples for a given
/// oversampling ratio over the `r(2m − r)` degrees of freedom.
pub fn mc_sample_count(m: usize, r: usize, ratio: f64) -> usize {
    round_count(ratio * (r * (2 * m - r.min(2 * m))) as f64)
}

/// Rank-`r` matrix `M_L M_Rᵀ` observed on a uniformly random index set.
#[derive(Debug, Clone)]
pub struct McInstance {
    /// `m × r` left factor.
    pub left: Array2<f64>,
    /// `m × r` right factor.
    pub right: Array2<f64>,
    /// Sampled `(row, col)` pairs in row-major order, all distinct.
    pub omega: Vec<(usize, usize)>,
    pub seed: u64,
}

impl McInstance {
    pub fn m(&self) -> usize {
        self.left.nrows()
    }

    pub fn rank(&self) -> usize {
        self.left.ncols()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.left.row(i).dot(&self.right.row(j))
    }

    /// Values of `A_true` on Ω, in the order of [`Self::omega`].
    pub fn observed(&self) -> Vec<f64> {
        self.omega.iter().map(|&(i, j)| self.entry(i, j)).collect()
    }

    /// `π_Ω(A_true)` as a sparse matrix.
    pub fn observed_matrix(&self) -> Result<SparseMatrix> {
        let t: Vec<_> = self.omega.iter().map(|&(i, j)| (i, j, self.entry(i, j))).collect();
        SparseMatrix::from_triplets(self.m(), self.m(), &t)
    }

    pub fn a_true(&self) -> Array2<f64> {
        self.left.dot(&self.right.t())
    }

    /// Writes the observations (coordinate format) and both factors as
    /// `<stem>_obs.mtx`, `<stem>_L.mtx`, `<stem>_R.mtx`.
    pub fn export(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        let paths: Vec<PathBuf> = ["obs", "L", "R"].iter().map(|t| dir.join(format!("{stem}_{t}.mtx"))).collect();
        mtx::write_sparse(&mut BufWriter::new(File::create(&paths[0])?), &self.observed_matrix()?)?;
        mtx::write_dense(&mut BufWriter::new(File::create(&paths[1])?), &self.left.view())?;
        mtx::write_dense(&mut BufWriter::new(File::create(&paths[2])?), &self.right.view())?;
        Ok(paths)
    }
}

/// Matrix completion instance: Gaussian factors `M_L`, `M_R` (`m × r`) and
/// `s = round(ratio · r(2m − r))` distinct samples drawn uniformly.
pub fn gen_mc(m: usize, r: usize, ratio: f64, seed: u64) -> Result<McInstance> {
    if m == 0 || r == 0 {
        return Err(Error::Empty("mc instance"));
    }
    if r > m {
        return Err(Error::InvalidArgument(format!("rank {r} exceeds m = {m}")));
    }
    if !(ratio > 0.0) {
        return Err(Error::InvalidArgument(format!("sampling ratio must be positive, got {ratio}")));
    }
    let s = mc_sample_count(m, r, ratio);
    if s > m * m {
        return Err(Error::InvalidArgument(format!("{s} samples exceed the {} entries", m * m)));
    }
    if s == 0 {
        return Err(Error::Empty("sample set"));
    }
    let left = gaussian_matrix(m, r, &mut stream(seed, 0));
    let right = gaussian_matrix(m, r, &mut stream(seed, 1));
    let mut flat = index::sample(&mut stream(seed, 2), m * m, s).into_vec();
    flat.sort_unstable();
    let omega = flat.iter().map(|&p| (p / m, p % m)).collect();
    Ok(McInstance { left, right, omega, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::full_svd_small;

    fn numerical_rank(a: &Array2<f64>) -> usize {
        let s = full_svd_small(&a.view()).unwrap().s;
        s.iter().filter(|x| **x > 1e-9 * s[0]).count()
    }

    #[test]
    fn rpca_shapes_and_counts() {
        let inst = gen_rpca(60, 0.1, 0.1, 3).unwrap();
        assert_eq!(inst.rank, 6);
        assert_eq!(inst.corruptions(), 360);
        assert_eq!(numerical_rank(&inst.a_true), 6);
        let rebuilt = &inst.a_true + &inst.e_true.to_dense();
        assert_eq!(rebuilt, inst.d);
        assert!(inst.e_true.values().iter().all(|v| v.abs() <= CORRUPTION_BOUND));
    }

    #[test]
    fn rpca_is_deterministic_and_streams_are_independent() {
        let a = gen_rpca(40, 0.1, 0.1, 9).unwrap();
        let b = gen_rpca(40, 0.1, 0.1, 9).unwrap();
        assert_eq!(a.d, b.d);
        assert_eq!(a.e_true, b.e_true);
        let clean = gen_rpca(40, 0.1, 0.0, 9).unwrap();
        assert_eq!(clean.a_true, a.a_true);
        assert_eq!(clean.d, clean.a_true);
        assert_ne!(gen_rpca(40, 0.1, 0.1, 10).unwrap().d, a.d);
    }

    #[test]
    fn rpca_corruption_values_are_centered() {
        let inst = gen_rpca(500, 0.1, 0.1, 1).unwrap();
        assert_eq!(inst.rank, 50);
        assert_eq!(inst.corruptions(), 25_000);
        let mean = inst.e_true.values().iter().sum::<f64>() / 25_000.0;
        assert!(mean.abs() <= 15.0, "{mean}");
    }

    #[test]
    fn rpca_rejects_bad_parameters() {
        assert!(gen_rpca(10, 0.0, 0.1, 0).is_err());
        assert!(gen_rpca(10, 0.1, 1.0, 0).is_err());
        assert!(gen_rpca(1, 0.5, 0.1, 0).is_err());
    }

    #[test]
    fn sample_counts() {
        assert_eq!(mc_sample_count(5000, 10, 6.0), 599_400);
        assert_eq!(mc_sample_count(1000, 10, 6.0), 119_400);
        let density = mc_sample_count(5000, 10, 6.0) as f64 / 25e6;
        assert_eq!((density * 1000.0).round() / 1000.0, 0.024);
    }

    #[test]
    fn mc_instance_properties() {
        let inst = gen_mc(50, 3, 2.0, 4).unwrap();
        assert_eq!(inst.omega.len(), mc_sample_count(50, 3, 2.0));
        assert!(inst.omega.windows(2).all(|w| w[0] < w[1]));
        assert!(inst.omega.iter().all(|&(i, j)| i < 50 && j < 50));
        assert_eq!(numerical_rank(&inst.a_true()), 3);
        let a = inst.a_true();
        for (&(i, j), v) in inst.omega.iter().zip(inst.observed()) {
            assert!((a[[i, j]] - v).abs() <= 1e-12 * a[[i, j]].abs().max(1.0));
        }
        let again = gen_mc(50, 3, 2.0, 4).unwrap();
        assert_eq!(again.omega, inst.omega);
        assert_eq!(again.left, inst.left);
        assert!(gen_mc(10, 5, 10.0, 0).is_err());
    }

    #[test]
    fn export_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let inst = gen_rpca(12, 0.2, 0.1, 5).unwrap();
        let paths = inst.export(dir.path(), "rpca").unwrap();
        let read = |p: &PathBuf| mtx::read(std::io::BufReader::new(File::open(p).unwrap())).unwrap();
        assert_eq!(read(&paths[0]), mtx::MarketMatrix::Dense(inst.d.clone()));
        assert_eq!(read(&paths[2]), mtx::MarketMatrix::Sparse(inst.e_true.clone()));

        let mc = gen_mc(10, 2, 2.0, 6).unwrap();
        let paths = mc.export(dir.path(), "mc").unwrap();
        assert_eq!(read(&paths[0]), mtx::MarketMatrix::Sparse(mc.observed_matrix().unwrap()));
        assert_eq!(read(&paths[1]), mtx::MarketMatrix::Dense(mc.left.clone()));
    }
}

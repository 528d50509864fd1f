//! Dense matrix storage, LU factorization with a condition estimate, and
//! finite-difference derivatives.
//!
//! Matrices are stored densely. Factorization is delegated to faer: small or
//! dense matrices use partial-pivoting dense LU, large sparse ones (the AC grid
//! Jacobians) go through faer's sparse LU, which is much faster at n ~ 3000.

use std::fmt;
use std::ops::{Index, IndexMut};

use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::Lu as SparseLu;
use faer::sparse::{SparseColMat, Triplet};
use faer::Conj;
use thiserror::Error;

/// Below this size, or above this density, the dense kernel is used.
const SPARSE_MIN_DIM: usize = 64;
const SPARSE_MAX_DENSITY: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinopsError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is singular (pivot {pivot})")]
    SingularMatrix { pivot: usize },
}

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from a row-major slice.
    ///
    /// # Panics
    /// If `data.len() != rows * cols`.
    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data has the wrong length");
        Self { rows, cols, data: data.to_vec() }
    }

    /// Builds a matrix from a list of equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self { rows: rows.len(), cols, data: rows.concat() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "dimension mismatch in mul_vec");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// Matrix-matrix product.
    pub fn mul_mat(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "dimension mismatch in mul_mat");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                for (o, &b) in out.row_mut(i).iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows).map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        let mut sums = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (s, v) in sums.iter_mut().zip(self.row(i)) {
                *s += v.abs();
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn count_nonzeros(&self) -> usize {
        self.data.iter().filter(|v| **v != 0.0).count()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn norm_one(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

enum Backend {
    Dense(faer::linalg::solvers::PartialPivLu<f64>),
    Sparse(SparseLu<usize, f64>),
}

/// LU factors of a square matrix together with an estimate of its
/// reciprocal 1-norm condition number.
pub struct LuFactors {
    n: usize,
    backend: Backend,
    rcond: f64,
}

impl fmt::Debug for LuFactors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.backend {
            Backend::Dense(_) => "dense",
            Backend::Sparse(_) => "sparse",
        };
        f.debug_struct("LuFactors").field("n", &self.n).field("backend", &kind).field("rcond", &self.rcond).finish()
    }
}

/// Factors `a` with partial pivoting and attaches a 1-norm rcond estimate.
pub fn lu_factor(a: &Mat) -> Result<LuFactors, LinopsError> {
    if !a.is_square() {
        return Err(LinopsError::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    let n = a.rows();
    if n == 0 {
        return Ok(LuFactors {
            n,
            backend: Backend::Dense(faer::Mat::<f64>::zeros(0, 0).partial_piv_lu()),
            rcond: 1.0,
        });
    }
    let scale = a.max_abs();
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(LinopsError::SingularMatrix { pivot: 0 });
    }

    let nnz = a.count_nonzeros();
    let sparse = n >= SPARSE_MIN_DIM && (nnz as f64) <= SPARSE_MAX_DENSITY * (n * n) as f64;
    let backend = if sparse { factor_sparse(a, nnz)? } else { factor_dense(a)? };

    let mut lu = LuFactors { n, backend, rcond: 0.0 };
    let inv_norm = lu.estimate_inverse_norm_one();
    let rcond = 1.0 / (a.norm_one() * inv_norm);
    lu.rcond = if rcond.is_finite() { rcond } else { 0.0 };
    if lu.rcond == 0.0 {
        return Err(LinopsError::SingularMatrix { pivot: 0 });
    }
    Ok(lu)
}

/// Only exactly zero pivots are rejected here; near-singularity is judged by
/// the caller from the rcond estimate.
fn factor_dense(a: &Mat) -> Result<Backend, LinopsError> {
    let fa = faer::Mat::<f64>::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)]);
    let lu = fa.partial_piv_lu();
    let u = lu.U();
    for k in 0..a.rows() {
        let pivot = u[(k, k)];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(LinopsError::SingularMatrix { pivot: k });
        }
    }
    Ok(Backend::Dense(lu))
}

fn factor_sparse(a: &Mat, nnz: usize) -> Result<Backend, LinopsError> {
    let n = a.rows();
    let mut triplets = Vec::with_capacity(nnz);
    for i in 0..n {
        for (j, &v) in a.row(i).iter().enumerate() {
            if v != 0.0 {
                triplets.push(Triplet::new(i, j, v));
            }
        }
    }
    let csc =
        SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets).expect("triplets are in range and unique");
    match csc.sp_lu() {
        Ok(lu) => Ok(Backend::Sparse(lu)),
        Err(faer::sparse::linalg::LuError::SymbolicSingular { index }) => {
            Err(LinopsError::SingularMatrix { pivot: index })
        }
        Err(_) => Err(LinopsError::SingularMatrix { pivot: 0 }),
    }
}

impl LuFactors {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Reciprocal 1-norm condition estimate, in (0, 1].
    pub fn rcond(&self) -> f64 {
        self.rcond
    }

    /// Solves `A y = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n, "dimension mismatch in solve");
        let mut rhs = faer::Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        self.solve_core(&mut rhs, false);
        (0..self.n).map(|i| rhs[(i, 0)]).collect()
    }

    /// Solves `Aᵀ y = b`.
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n, "dimension mismatch in solve_transpose");
        let mut rhs = faer::Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        self.solve_core(&mut rhs, true);
        (0..self.n).map(|i| rhs[(i, 0)]).collect()
    }

    /// Solves `A Y = B` for every column of `B` at once.
    pub fn solve_mat(&self, b: &Mat) -> Mat {
        assert_eq!(b.rows(), self.n, "dimension mismatch in solve_mat");
        let mut rhs = faer::Mat::<f64>::from_fn(b.rows(), b.cols(), |i, j| b[(i, j)]);
        self.solve_core(&mut rhs, false);
        Mat::from_fn(b.rows(), b.cols(), |i, j| rhs[(i, j)])
    }

    fn solve_core(&self, rhs: &mut faer::Mat<f64>, transpose: bool) {
        match (&self.backend, transpose) {
            (Backend::Dense(lu), false) => lu.solve_in_place_with_conj(Conj::No, rhs.as_mut()),
            (Backend::Dense(lu), true) => lu.solve_transpose_in_place_with_conj(Conj::No, rhs.as_mut()),
            (Backend::Sparse(lu), false) => lu.solve_in_place_with_conj(Conj::No, rhs.as_mut()),
            (Backend::Sparse(lu), true) => lu.solve_transpose_in_place_with_conj(Conj::No, rhs.as_mut()),
        }
    }

    /// Hager's estimator of ‖A⁻¹‖₁ with Higham's alternating-sign safeguard.
    fn estimate_inverse_norm_one(&self) -> f64 {
        let n = self.n;
        let mut x = vec![1.0 / n as f64; n];
        let mut estimate = 0.0_f64;
        let mut last_j = usize::MAX;
        for iter in 0..5 {
            let y = self.solve(&x);
            if !y.iter().all(|v| v.is_finite()) {
                return f64::INFINITY;
            }
            estimate = estimate.max(norm_one(&y));
            let signs: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
            let z = self.solve_transpose(&signs);
            let (j, zmax) =
                z.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v.abs() > best.1 { (i, v.abs()) } else { best });
            if iter > 0 && (zmax <= dot(&z, &x) || j == last_j) {
                break;
            }
            last_j = j;
            x.iter_mut().for_each(|v| *v = 0.0);
            x[j] = 1.0;
        }
        let alt: Vec<f64> = (0..n)
            .map(|i| {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                sign * (1.0 + i as f64 / (n.max(2) - 1) as f64)
            })
            .collect();
        let y = self.solve(&alt);
        let alt_estimate = 2.0 * norm_one(&y) / (3.0 * n as f64);
        if alt_estimate.is_finite() {
            estimate.max(alt_estimate)
        } else {
            f64::INFINITY
        }
    }
}

/// Solves `A y = b` with previously computed factors.
pub fn lu_solve(factors: &LuFactors, b: &[f64]) -> Vec<f64> {
    factors.solve(b)
}

/// Central-difference Jacobian of a vector residual.
///
/// Column `j` uses `h_j = cbrt(eps) * max(|x_j|, 1)`.
pub fn fd_jacobian<E>(f: impl Fn(&[f64]) -> Result<Vec<f64>, E>, x: &[f64]) -> Result<Mat, E> {
    fd_jacobian_step(f, x, f64::EPSILON.cbrt())
}

/// [`fd_jacobian`] with step `base * max(|x_j|, 1)`.
pub fn fd_jacobian_step<E>(f: impl Fn(&[f64]) -> Result<Vec<f64>, E>, x: &[f64], base: f64) -> Result<Mat, E> {
    let n = x.len();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let h = base * x[j].abs().max(1.0);
        xp[j] = x[j] + h;
        let fp = f(&xp)?;
        xp[j] = x[j] - h;
        let fm = f(&xp)?;
        xp[j] = x[j];
        cols.push(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect());
    }
    let m = cols.first().map_or(0, Vec::len);
    Ok(Mat::from_fn(m, n, |i, j| cols[j][i]))
}

/// Central-difference Hessian of a scalar residual, symmetrized.
pub fn fd_hessian<E>(f: impl Fn(&[f64]) -> Result<f64, E>, x: &[f64]) -> Result<Mat, E> {
    let mut hs = fd_hessians(|v| f(v).map(|s| vec![s]), x)?;
    Ok(hs.pop().expect("one component"))
}

/// Central-difference Hessians of every component of a vector residual.
///
/// Shares one stencil across components, so the cost is O(n²) residual
/// evaluations regardless of the number of equations. Step
/// `h_j = eps^(1/4) * max(|x_j|, 1)`.
pub fn fd_hessians<E>(f: impl Fn(&[f64]) -> Result<Vec<f64>, E>, x: &[f64]) -> Result<Vec<Mat>, E> {
    fd_hessians_step(f, x, f64::EPSILON.powf(0.25))
}

/// [`fd_hessians`] with step `base * max(|x_j|, 1)`.
pub fn fd_hessians_step<E>(f: impl Fn(&[f64]) -> Result<Vec<f64>, E>, x: &[f64], base: f64) -> Result<Vec<Mat>, E> {
    let n = x.len();
    let h: Vec<f64> = x.iter().map(|v| base * v.abs().max(1.0)).collect();
    let f0 = f(x)?;
    let m = f0.len();
    let mut out = vec![Mat::zeros(n, n); m];
    let mut xp = x.to_vec();
    for j in 0..n {
        xp[j] = x[j] + h[j];
        let fp = f(&xp)?;
        xp[j] = x[j] - h[j];
        let fm = f(&xp)?;
        xp[j] = x[j];
        for (i, hess) in out.iter_mut().enumerate() {
            hess[(j, j)] = (fp[i] - 2.0 * f0[i] + fm[i]) / (h[j] * h[j]);
        }
        for k in (j + 1)..n {
            let mut corner = |sj: f64, sk: f64| {
                xp[j] = x[j] + sj * h[j];
                xp[k] = x[k] + sk * h[k];
                let v = f(&xp);
                xp[j] = x[j];
                xp[k] = x[k];
                v
            };
            let fpp = corner(1.0, 1.0)?;
            let fpm = corner(1.0, -1.0)?;
            let fmp = corner(-1.0, 1.0)?;
            let fmm = corner(-1.0, -1.0)?;
            let denom = 4.0 * h[j] * h[k];
            for (i, hess) in out.iter_mut().enumerate() {
                let v = (fpp[i] - fpm[i] - fmp[i] + fmm[i]) / denom;
                hess[(j, k)] = v;
                hess[(k, j)] = v;
            }
        }
    }
    Ok(out)
}

//! Dense complex linear algebra used by every diagnostic in the crate.
//!
//! Matrices are stored row-major as complex scalars; real matrices are the
//! zero-imaginary special case. Heavy kernels (nonsymmetric eigensolver,
//! SVD, LU) are delegated to `faer`, with real inputs routed through the
//! real-arithmetic paths.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, Side};
use num_complex::Complex64;
use thiserror::Error;

pub mod two_by_two;

pub type C64 = Complex64;

/// Largest dimension accepted by [`eig`].
pub const MAX_EIG_DIM: usize = 2048;
/// Relative eigenpair residual tolerance: `‖Jv − λv‖ ≤ TOL_EIG·‖J‖₂`.
pub const TOL_EIG: f64 = 1e-8;
/// `σ_min(V)/σ_max(V)` below this marks the decomposition non-diagonalizable.
pub const TOL_RANK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix must have at least one row and one column (got {rows}x{cols})")]
    Empty { rows: usize, cols: usize },
    #[error("entry count {len} does not match shape {rows}x{cols}")]
    ShapeMismatch { rows: usize, cols: usize, len: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension {n} exceeds the dense limit of {max}")]
    TooLarge { n: usize, max: usize },
    #[error("eigensolver did not converge for a {n}x{n} matrix")]
    NoConvergence { n: usize },
    #[error("eigenpair {index} (λ = {eigenvalue}) has residual {residual:e} above tolerance {tolerance:e}")]
    Residual {
        index: usize,
        eigenvalue: C64,
        residual: f64,
        tolerance: f64,
    },
    #[error("singular value decomposition did not converge")]
    SvdNoConvergence,
    #[error("matrix is singular")]
    Singular,
}

/// Dense row-major complex matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self.get(i, j);
                if z.im == 0.0 {
                    write!(f, "{:>12.6} ", z.re)?;
                } else {
                    write!(f, "{:>12.6}{:+.6}i ", z.re, z.im)?;
                }
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self, LinalgError> {
        if rows == 0 || cols == 0 {
            return Err(LinalgError::Empty { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(LinalgError::ShapeMismatch {
                rows,
                cols,
                len: data.len(),
            });
        }
        if let Some(k) = data.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(LinalgError::NonFinite {
                row: k / cols,
                col: k % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self, LinalgError> {
        Self::new(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// Builds a real matrix from nested rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(LinalgError::ShapeMismatch {
                rows: r,
                cols: c,
                len: rows.iter().map(Vec::len).sum(),
            });
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_real(r, c, &flat)
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> C64,
    ) -> Result<Self, LinalgError> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn from_real_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, LinalgError> {
        Self::from_fn(rows, cols, |i, j| C64::new(f(i, j), 0.0))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "empty matrix");
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![1.0; n])
    }

    /// Real diagonal matrix. Panics on an empty or non-finite diagonal.
    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            assert!(d.is_finite(), "non-finite diagonal entry");
            m.data[i * n + i] = C64::new(d, 0.0);
        }
        m
    }

    /// Skips the finiteness check; callers guarantee the invariant.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
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

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.cols + j]
    }

    /// Real part of entry `(i, j)`.
    pub fn re(&self, i: usize, j: usize) -> f64 {
        self.get(i, j).re
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im == 0.0)
    }

    /// Exact (bitwise) Hermitian test.
    pub fn is_hermitian(&self) -> bool {
        self.is_square()
            && (0..self.rows)
                .all(|i| (i..self.cols).all(|j| self.get(i, j) == self.get(j, i).conj()))
    }

    pub fn adjoint(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j).conj());
            }
        }
        Self::from_raw(self.cols, self.rows, data)
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j));
            }
        }
        Self::from_raw(self.cols, self.rows, data)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_raw(self.rows, self.cols, self.data.iter().map(|z| z * s).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `zI − self`, used for resolvent evaluations.
    pub fn shifted_negation(&self, z: C64) -> Self {
        assert!(self.is_square());
        let n = self.rows;
        let mut data: Vec<C64> = self.data.iter().map(|a| -a).collect();
        for i in 0..n {
            data[i * n + i] += z;
        }
        Self::from_raw(n, n, data)
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let (n, k, m) = (self.rows, self.cols, other.cols);
        if n * k * m > 64 * 64 * 64 {
            return Self::from_faer(&(self.to_faer() * other.to_faer()));
        }
        let mut data = vec![C64::new(0.0, 0.0); n * m];
        for i in 0..n {
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let row = &other.data[p * m..(p + 1) * m];
                for (out, b) in data[i * m..(i + 1) * m].iter_mut().zip(row) {
                    *out += a * b;
                }
            }
        }
        Self::from_raw(n, m, data)
    }

    pub(crate) fn to_faer(&self) -> Mat<C64> {
        Mat::from_fn(self.rows, self.cols, |i, j| self.get(i, j))
    }

    pub(crate) fn to_faer_real(&self) -> Mat<f64> {
        Mat::from_fn(self.rows, self.cols, |i, j| self.get(i, j).re)
    }

    pub(crate) fn from_faer(m: &Mat<C64>) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        Self::from_raw(m.nrows(), m.ncols(), data)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Self {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "shape mismatch"
        );
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_raw(self.rows, self.cols, data)
    }
}

impl Add for &DenseMatrix {
    type Output = DenseMatrix;
    fn add(self, rhs: &DenseMatrix) -> DenseMatrix {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &DenseMatrix {
    type Output = DenseMatrix;
    fn sub(self, rhs: &DenseMatrix) -> DenseMatrix {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul for &DenseMatrix {
    type Output = DenseMatrix;
    fn mul(self, rhs: &DenseMatrix) -> DenseMatrix {
        self.matmul(rhs)
    }
}

/// Eigenvalues, unit-column right eigenvectors and the derived diagnostics.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<C64>,
    /// Right eigenvectors as columns, each scaled to unit 2-norm.
    pub vectors: DenseMatrix,
    /// `‖V‖₂·‖V⁻¹‖₂`; infinite when `V` is numerically singular.
    pub kappa_v: f64,
    pub spectral_radius: f64,
    pub diagonalizable: bool,
}

fn check_square(a: &DenseMatrix) -> Result<usize, LinalgError> {
    if a.is_square() {
        Ok(a.rows)
    } else {
        Err(LinalgError::NotSquare {
            rows: a.rows,
            cols: a.cols,
        })
    }
}

/// Eigendecomposition of a square matrix.
///
/// Hermitian inputs use the self-adjoint solver so that repeated
/// eigenvalues still get an orthonormal basis; everything else goes through
/// the Hessenberg/Schur path. Every eigenpair is checked against
/// [`TOL_EIG`] before returning.
pub fn eig(j: &DenseMatrix) -> Result<EigenDecomposition, LinalgError> {
    let n = check_square(j)?;
    if n > MAX_EIG_DIM {
        return Err(LinalgError::TooLarge {
            n,
            max: MAX_EIG_DIM,
        });
    }

    let (eigenvalues, mut vectors): (Vec<C64>, Mat<C64>) = if j.is_hermitian() {
        if j.is_real() {
            let e = j
                .to_faer_real()
                .self_adjoint_eigen(Side::Lower)
                .map_err(|_| LinalgError::NoConvergence { n })?;
            let vals = (0..n).map(|i| C64::new(e.S()[i], 0.0)).collect();
            let u = e.U();
            (vals, Mat::from_fn(n, n, |r, c| C64::new(u[(r, c)], 0.0)))
        } else {
            let e = j
                .to_faer()
                .self_adjoint_eigen(Side::Lower)
                .map_err(|_| LinalgError::NoConvergence { n })?;
            let vals = (0..n).map(|i| C64::new(e.S()[i].re, 0.0)).collect();
            (vals, e.U().to_owned())
        }
    } else {
        let e = if j.is_real() {
            j.to_faer_real().eigen()
        } else {
            j.to_faer().eigen()
        }
        .map_err(|_| LinalgError::NoConvergence { n })?;
        let vals = (0..n).map(|i| e.S()[i]).collect();
        (vals, e.U().to_owned())
    };

    repair_eigenvectors(j, &eigenvalues, &mut vectors)?;

    for c in 0..n {
        let norm = (0..n).map(|r| vectors[(r, c)].norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            for r in 0..n {
                vectors[(r, c)] /= norm;
            }
        }
    }

    let j_norm = operator_norm_2(j);
    let tolerance = TOL_EIG * j_norm.max(f64::MIN_POSITIVE);
    let jv = j.to_faer() * &vectors;
    for (c, &lambda) in eigenvalues.iter().enumerate() {
        let residual = (0..n)
            .map(|r| (jv[(r, c)] - lambda * vectors[(r, c)]).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if !(residual <= tolerance) {
            return Err(LinalgError::Residual {
                index: c,
                eigenvalue: lambda,
                residual,
                tolerance,
            });
        }
    }

    let sv = vectors
        .singular_values()
        .map_err(|_| LinalgError::SvdNoConvergence)?;
    let (s_max, s_min) = (sv[0], sv[n - 1]);
    let kappa_v = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };
    let diagonalizable = s_min / s_max >= TOL_RANK;
    let spectral_radius = eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);

    Ok(EigenDecomposition {
        eigenvalues,
        vectors: DenseMatrix::from_faer(&vectors),
        kappa_v,
        spectral_radius,
        diagonalizable,
    })
}

/// The Schur back-substitution yields non-finite or zero columns when an
/// eigenvalue is repeated exactly. Each such cluster is replaced by the
/// right singular vectors of `J − λI` belonging to its smallest singular
/// values; a defective cluster then fails the residual check downstream.
fn repair_eigenvectors(
    j: &DenseMatrix,
    eigenvalues: &[C64],
    vectors: &mut Mat<C64>,
) -> Result<(), LinalgError> {
    let n = eigenvalues.len();
    let broken = |v: &Mat<C64>, c: usize| {
        let col = (0..n).map(|r| v[(r, c)]);
        col.clone().any(|x| !(x.re.is_finite() && x.im.is_finite()))
            || col.map(|x| x.norm_sqr()).sum::<f64>() == 0.0
    };
    let scale = j.max_abs().max(1.0);
    let mut done = vec![false; n];
    for c in 0..n {
        if done[c] || !broken(vectors, c) {
            continue;
        }
        let lambda = eigenvalues[c];
        let cluster: Vec<usize> = (0..n)
            .filter(|&i| (eigenvalues[i] - lambda).norm() <= 1e-10 * scale)
            .collect();
        let shifted = Mat::from_fn(n, n, |r, k| {
            let delta = if r == k { lambda } else { C64::new(0.0, 0.0) };
            j.get(r, k) - delta
        });
        let svd = shifted.svd().map_err(|_| LinalgError::SvdNoConvergence)?;
        let v = svd.V();
        for (slot, &col) in cluster.iter().enumerate() {
            let src = n - cluster.len() + slot;
            for r in 0..n {
                vectors[(r, col)] = v[(r, src)];
            }
            done[col] = true;
        }
    }
    Ok(())
}

/// Singular values in non-increasing order.
pub fn singular_values(a: &DenseMatrix) -> Vec<f64> {
    let sv = if a.is_real() {
        a.to_faer_real().singular_values()
    } else {
        a.to_faer().singular_values()
    };
    // faer's SVD only reports non-convergence for non-finite input, which
    // the DenseMatrix invariant rules out.
    sv.expect("SVD of a finite matrix")
}

/// Largest singular value.
pub fn operator_norm_2(a: &DenseMatrix) -> f64 {
    singular_values(a)[0]
}

/// Smallest singular value; `1/σ_min(A) = ‖A⁻¹‖₂` for square `A`.
pub fn sigma_min(a: &DenseMatrix) -> f64 {
    *singular_values(a).last().expect("non-empty matrix")
}

/// `σ_min(zI − J)`, the reciprocal resolvent norm at `z`.
pub fn resolvent_sigma_min(j: &DenseMatrix, z: C64) -> f64 {
    let n = j.rows;
    if n == 1 {
        return (z - j.data[0]).norm();
    }
    if n == 2 {
        return two_by_two::singular_values(&j.shifted_negation(z)).1;
    }
    sigma_min(&j.shifted_negation(z))
}

/// `‖J^t‖₂` for `t = 0..=t_max` by repeated multiplication.
///
/// Round-off accumulates as `O(t·ε·‖J‖^t)`. Once a power overflows, that
/// entry and every later one is `f64::INFINITY`.
pub fn matrix_power_norms(j: &DenseMatrix, t_max: usize) -> Result<Vec<f64>, LinalgError> {
    let n = check_square(j)?;
    let mut norms = Vec::with_capacity(t_max + 1);
    norms.push(1.0);
    let real = j.is_real();
    let mut overflowed = false;
    if real {
        let base = j.to_faer_real();
        let mut power = base.clone();
        for t in 1..=t_max {
            if t > 1 {
                power = &power * &base;
            }
            overflowed |= (0..n).any(|r| (0..n).any(|c| !power[(r, c)].is_finite()));
            norms.push(if overflowed {
                f64::INFINITY
            } else {
                power.singular_values().map_err(|_| LinalgError::SvdNoConvergence)?[0]
            });
        }
    } else {
        let base = j.to_faer();
        let mut power = base.clone();
        for t in 1..=t_max {
            if t > 1 {
                power = &power * &base;
            }
            overflowed |= (0..n)
                .any(|r| (0..n).any(|c| !(power[(r, c)].re.is_finite() && power[(r, c)].im.is_finite())));
            norms.push(if overflowed {
                f64::INFINITY
            } else {
                power.singular_values().map_err(|_| LinalgError::SvdNoConvergence)?[0]
            });
        }
    }
    Ok(norms)
}

/// Eigenvalues of a real symmetric matrix in non-decreasing order. Only the
/// lower triangle is read.
pub fn symmetric_eigenvalues(h: &DenseMatrix) -> Result<Vec<f64>, LinalgError> {
    let n = check_square(h)?;
    h.to_faer_real()
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| LinalgError::NoConvergence { n })
}

pub fn inverse(a: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    check_square(a)?;
    if sigma_min(a) == 0.0 {
        return Err(LinalgError::Singular);
    }
    let inv = DenseMatrix::from_faer(&a.to_faer().partial_piv_lu().inverse());
    if inv.data.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(LinalgError::Singular);
    }
    Ok(inv)
}

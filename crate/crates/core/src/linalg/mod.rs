//! Dense complex linear algebra for small operators (n up to ~16).
//!
//! [`ComplexMatrix`] is a thin square-matrix newtype over `nalgebra`'s dynamic
//! matrices; [`DensityMatrix`] adds the state invariants (hermitian, unit
//! trace, positive semidefinite).

mod basis;
pub mod random;

use std::ops::{Add, Index, Mul, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub use basis::{
    adjoint_matrix, algebra_coords, from_bloch, hermitian_coords, to_bloch, BlochVector,
    GeneratorBasis,
};

pub type C64 = Complex64;
pub type RealMatrix = DMatrix<f64>;

/// Default tolerances.
pub mod tol {
    pub const HERM: f64 = 1e-10;
    pub const TRACE: f64 = 1e-10;
    pub const PSD: f64 = 1e-9;
    pub const BASIS: f64 = 1e-10;
    pub const UNITARY: f64 = 1e-10;
    /// Singular values below `RANK_REL * sigma_max` count as zero.
    pub const RANK_REL: f64 = 1e-8;
}

/// Square complex matrix of dimension at least 2 with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.nrows() < 2 {
            return Err(Error::DimensionTooSmall(m.nrows()));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self(m))
    }

    /// Builds an `n x n` matrix from row-major entries.
    pub fn from_row_slice(n: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: entries.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(n, n, entries))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: r.len(),
                });
            }
            entries.extend(r.iter().map(|&x| C64::new(x, 0.0)));
        }
        Self::from_row_slice(n, &entries)
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(d[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    pub(crate) fn from_inner(m: DMatrix<C64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn inner(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// Hilbert-Schmidt (Frobenius) norm.
    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self(&self.0 * s)
    }

    /// Largest entry of `|m - m^dagger|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol
    }

    fn anti_hermitian_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.0[(i, j)] + self.0[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `(m + m^dagger) / 2`.
    pub fn hermitian_part(&self) -> Self {
        Self((&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim()).map(|i| self.0[(i, i)]).collect()
    }

    /// Largest modulus among the off-diagonal entries.
    pub fn max_offdiag(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    worst = worst.max(self.0[(i, j)].norm());
                }
            }
        }
        worst
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, idx: (usize, usize)) -> &C64 {
        &self.0[idx]
    }
}

impl<'a> Add<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl<'a> Sub<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

impl<'a> Mul<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

/// `ab - ba`.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.check_same_dim(b)?;
    Ok(ComplexMatrix(&a.0 * &b.0 - &b.0 * &a.0))
}

/// Hilbert-Schmidt inner product `Tr(a^dagger b)`.
pub fn hs_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<C64> {
    a.check_same_dim(b)?;
    Ok(a.0.iter().zip(b.0.iter()).map(|(x, y)| x.conj() * y).sum())
}

/// Eigen-decomposition of a hermitian matrix: eigenvalues in non-increasing
/// order and the matching orthonormal eigenvectors as columns.
pub(crate) fn hermitian_eigh(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    // nalgebra's hermitian solver loses off-diagonal entries below ~1e-8 and
    // can mis-pair eigenvectors of nearly diagonal input; faer is used
    // instead.
    let n = m.nrows();
    let a = faer::Mat::<C64>::from_fn(n, n, |i, j| m[(i, j)]);
    match a.self_adjoint_eigen(faer::Side::Lower) {
        Ok(eig) => {
            let (u, s) = (eig.U(), eig.S());
            // faer sorts ascending
            let values = (0..n).rev().map(|i| s[i].re).collect();
            let vectors = DMatrix::from_fn(n, n, |r, c| u[(r, n - 1 - c)]);
            (values, vectors)
        }
        Err(_) => {
            let eig = SymmetricEigen::new(m.clone());
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
            let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
            let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
            (values, vectors)
        }
    }
}

/// `V diag(phases) V^dagger`.
fn reassemble(vectors: &DMatrix<C64>, phases: &[C64]) -> DMatrix<C64> {
    let n = vectors.nrows();
    let mut scaled = vectors.clone();
    for (c, p) in phases.iter().enumerate() {
        for r in 0..n {
            scaled[(r, c)] *= p;
        }
    }
    scaled * vectors.adjoint()
}

/// `exp(-i h t)` for hermitian `h`, via its eigen-decomposition.
pub(crate) fn hermitian_propagator(h: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    let n = h.nrows();
    if (0..n).all(|i| (0..n).all(|j| i == j || h[(i, j)] == C64::new(0.0, 0.0))) {
        return DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::from_polar(1.0, -h[(i, i)].re * t)
            } else {
                C64::new(0.0, 0.0)
            }
        });
    }
    let (values, vectors) = hermitian_eigh(h);
    let phases: Vec<C64> = values
        .iter()
        .map(|&l| C64::from_polar(1.0, -l * t))
        .collect();
    reassemble(&vectors, &phases)
}

/// Matrix exponential.
///
/// Hermitian and anti-hermitian inputs go through an eigen-decomposition, so
/// the exponential of an anti-hermitian matrix is unitary to roundoff. Other
/// inputs fall back to scaling-and-squaring with a Padé approximant.
pub fn matrix_exponential(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.0.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    let scale = 1e-13 * a.norm().max(1.0);
    if a.hermitian_defect() <= scale {
        let (values, vectors) = hermitian_eigh(&a.hermitian_part().0);
        let factors: Vec<C64> = values.iter().map(|&l| C64::new(l.exp(), 0.0)).collect();
        return Ok(ComplexMatrix(reassemble(&vectors, &factors)));
    }
    if a.anti_hermitian_defect() <= scale {
        // a = i k with k hermitian
        let k = (&a.0 * C64::new(0.0, -1.0) + (&a.0 * C64::new(0.0, -1.0)).adjoint())
            * C64::new(0.5, 0.0);
        return Ok(ComplexMatrix(hermitian_propagator(&k, -1.0)));
    }
    Ok(ComplexMatrix(a.0.clone().exp()))
}

/// Density operator: hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates with the default tolerances.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        validate_with(m, tol::HERM, tol::TRACE, tol::PSD)
    }

    /// Completely mixed state `I / n`.
    pub fn maximally_mixed(n: usize) -> Self {
        Self {
            mat: ComplexMatrix::identity(n).scale(C64::new(1.0 / n as f64, 0.0)),
        }
    }

    /// Diagonal state; the entries must be non-negative and sum to one.
    pub fn diagonal(weights: &[f64]) -> Result<Self> {
        Self::new(ComplexMatrix::from_diagonal(weights))
    }

    /// Wraps a matrix known to be a state (e.g. the unitary image of one).
    pub(crate) fn from_trusted(mat: ComplexMatrix) -> Self {
        Self { mat }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    /// `U rho U^dagger`.
    pub fn conjugate_by(&self, u: &ComplexMatrix) -> Result<Self> {
        self.mat.check_same_dim(u)?;
        let m = &u.0 * &self.mat.0 * u.0.adjoint();
        Ok(Self {
            mat: ComplexMatrix(m).hermitian_part(),
        })
    }

    /// `Tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        self.mat.0.iter().map(|z| z.norm_sqr()).sum()
    }
}

fn validate_with(m: ComplexMatrix, herm: f64, trace: f64, psd: f64) -> Result<DensityMatrix> {
    let defect = m.hermitian_defect();
    if defect > herm {
        return Err(Error::NotHermitian { defect });
    }
    let tr = m.trace().re;
    if (tr - 1.0).abs() > trace {
        return Err(Error::TraceNotOne {
            trace: tr,
            defect: (tr - 1.0).abs(),
        });
    }
    let mat = m.hermitian_part();
    let (values, _) = hermitian_eigh(&mat.0);
    let min = values.last().copied().unwrap_or(0.0);
    if min < -psd {
        return Err(Error::NotPositive {
            min_eigenvalue: min,
        });
    }
    Ok(DensityMatrix { mat })
}

/// Validates `m` as a density operator using `tol` for the hermiticity and
/// trace checks and for the smallest admissible eigenvalue (`-tol`).
pub fn validate_density(m: ComplexMatrix, tol: f64) -> Result<DensityMatrix> {
    validate_with(m, tol, tol, tol)
}

/// Eigenvalues of a state in non-increasing order.
pub fn spectrum(rho: &DensityMatrix) -> Vec<f64> {
    hermitian_eigh(&rho.mat.0).0
}

/// Eigenvalues and eigenvectors (columns) of a state, eigenvalues in
/// non-increasing order.
pub fn eigen_decomposition(rho: &DensityMatrix) -> (Vec<f64>, ComplexMatrix) {
    let (v, u) = hermitian_eigh(&rho.mat.0);
    (v, ComplexMatrix(u))
}

/// Largest absolute difference between two sorted spectra.
pub fn spectrum_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Singular values of a real matrix in non-increasing order.
pub fn singular_values(m: &RealMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values above `rel_tol * sigma_max`.
pub fn numerical_rank(m: &RealMatrix, rel_tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&top) if top > 0.0 => s.iter().filter(|&&x| x > rel_tol * top).count(),
        _ => 0,
    }
}

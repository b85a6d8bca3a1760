//! Orthonormal su(n) generator basis and the real (Bloch) coordinates of
//! operators in it.
//!
//! Generators are ordered off-diagonal first: for every level pair
//! `(k, l)`, `k < l`, in lexicographic order, the real antisymmetric
//! generator `(e_kl - e_lk)/sqrt(2)` followed by the imaginary symmetric one
//! `i (e_kl + e_lk)/sqrt(2)`. The `n - 1` diagonal (Cartan) generators come
//! last. All generators are anti-hermitian with `Tr(a^dagger b) = delta_ab`.
//!
//! A hermitian operator `X` has coordinates `s_k = Tr(X xi_k)` with the
//! hermitian partners `xi_k = -i sigma_k`; a density operator is recovered
//! as `I/n + sum_k s_k xi_k`.

use std::f64::consts::SQRT_2;

use nalgebra::DMatrix;

use super::{tol, ComplexMatrix, DensityMatrix, RealMatrix, C64};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct GeneratorBasis {
    dim: usize,
    offdiag: Vec<ComplexMatrix>,
    diag: Vec<ComplexMatrix>,
    pairs: Vec<(usize, usize)>,
}

impl GeneratorBasis {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::DimensionTooSmall(n));
        }
        let zero = C64::new(0.0, 0.0);
        let mut offdiag = Vec::with_capacity(n * (n - 1));
        let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
        let h = 1.0 / SQRT_2;
        for k in 0..n {
            for l in (k + 1)..n {
                let mut real = DMatrix::from_element(n, n, zero);
                real[(k, l)] = C64::new(h, 0.0);
                real[(l, k)] = C64::new(-h, 0.0);
                let mut imag = DMatrix::from_element(n, n, zero);
                imag[(k, l)] = C64::new(0.0, h);
                imag[(l, k)] = C64::new(0.0, h);
                offdiag.push(ComplexMatrix::from_inner(real));
                offdiag.push(ComplexMatrix::from_inner(imag));
                pairs.push((k, l));
            }
        }
        let diag = (1..n)
            .map(|r| {
                let norm = 1.0 / ((r * (r + 1)) as f64).sqrt();
                let mut m = DMatrix::from_element(n, n, zero);
                for s in 0..r {
                    m[(s, s)] = C64::new(0.0, norm);
                }
                m[(r, r)] = C64::new(0.0, -(r as f64) * norm);
                ComplexMatrix::from_inner(m)
            })
            .collect();
        Ok(Self {
            dim: n,
            offdiag,
            diag,
            pairs,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `n^2 - 1`.
    pub fn len(&self) -> usize {
        self.dim * self.dim - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `n^2 - n`, the size of the off-diagonal block.
    pub fn n_offdiag(&self) -> usize {
        self.offdiag.len()
    }

    pub fn offdiag(&self) -> &[ComplexMatrix] {
        &self.offdiag
    }

    pub fn diag(&self) -> &[ComplexMatrix] {
        &self.diag
    }

    /// Level pairs `(k, l)`, `k < l`, in generator order.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Positions of the two generators spanning the root space of `(k, l)`.
    pub fn pair_positions(&self, k: usize, l: usize) -> Option<(usize, usize)> {
        let (k, l) = if k < l { (k, l) } else { (l, k) };
        self.pairs
            .iter()
            .position(|&p| p == (k, l))
            .map(|i| (2 * i, 2 * i + 1))
    }

    /// Generator `sigma_i` in the global ordering.
    pub fn generator(&self, i: usize) -> &ComplexMatrix {
        if i < self.offdiag.len() {
            &self.offdiag[i]
        } else {
            &self.diag[i - self.offdiag.len()]
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &ComplexMatrix> {
        self.offdiag.iter().chain(self.diag.iter())
    }

    /// Gram matrix `Tr(sigma_a^dagger sigma_b)`.
    pub fn gram(&self) -> DMatrix<C64> {
        let gens: Vec<&ComplexMatrix> = self.iter().collect();
        let m = gens.len();
        DMatrix::from_fn(m, m, |a, b| {
            super::hs_inner(gens[a], gens[b]).expect("same dimension")
        })
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: n,
            });
        }
        Ok(())
    }
}

/// Real coordinates of a state in a [`GeneratorBasis`].
#[derive(Clone, Debug, PartialEq)]
pub struct BlochVector {
    dim_state: usize,
    coords: Vec<f64>,
}

impl BlochVector {
    pub fn new(dim_state: usize, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != dim_state * dim_state - 1 {
            return Err(Error::DimensionMismatch {
                expected: dim_state * dim_state - 1,
                found: coords.len(),
            });
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { dim_state, coords })
    }

    pub fn dim_state(&self) -> usize {
        self.dim_state
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn as_vector(&self) -> nalgebra::DVector<f64> {
        nalgebra::DVector::from_column_slice(&self.coords)
    }

    /// Off-diagonal (root space) block.
    pub fn offdiag_part(&self) -> &[f64] {
        &self.coords[..self.dim_state * (self.dim_state - 1)]
    }

    /// Cartan block.
    pub fn cartan_part(&self) -> &[f64] {
        &self.coords[self.dim_state * (self.dim_state - 1)..]
    }

    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Coordinates `Tr(X xi_k)` of a hermitian operator (its identity component
/// is dropped). Only the hermitian part of `x` contributes.
pub fn hermitian_coords(x: &DMatrix<C64>) -> Vec<f64> {
    let n = x.nrows();
    let mut out = Vec::with_capacity(n * n - 1);
    for k in 0..n {
        for l in (k + 1)..n {
            // xi = -i (e_kl - e_lk)/sqrt2  and  xi = (e_kl + e_lk)/sqrt2
            let a = x[(l, k)];
            let b = x[(k, l)];
            out.push(((a - b) * C64::new(0.0, -1.0)).re / SQRT_2);
            out.push((a + b).re / SQRT_2);
        }
    }
    let mut partial = 0.0;
    for r in 1..n {
        partial += x[(r - 1, r - 1)].re;
        let rf = r as f64;
        out.push((partial - rf * x[(r, r)].re) / (rf * (rf + 1.0)).sqrt());
    }
    out
}

/// Coordinates `Tr(sigma_k^dagger Y)` of an anti-hermitian operator.
pub fn algebra_coords(y: &DMatrix<C64>) -> Vec<f64> {
    hermitian_coords(&(y * C64::new(0.0, -1.0)))
}

/// Bloch vector `s_k = Tr(rho xi_k)`, `xi_k = -i sigma_k`.
pub fn to_bloch(rho: &DensityMatrix, basis: &GeneratorBasis) -> Result<BlochVector> {
    basis.check_dim(rho.dim())?;
    Ok(BlochVector {
        dim_state: rho.dim(),
        coords: hermitian_coords(rho.matrix().inner()),
    })
}

/// `I/n + sum_k s_k xi_k`. The result is hermitian with unit trace but need
/// not be positive.
pub fn from_bloch(s: &BlochVector, basis: &GeneratorBasis) -> Result<ComplexMatrix> {
    basis.check_dim(s.dim_state)?;
    let n = basis.dim();
    let mut m = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            C64::new(1.0 / n as f64, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let minus_i = C64::new(0.0, -1.0);
    for (c, g) in s.coords.iter().zip(basis.iter()) {
        if *c != 0.0 {
            m += g.inner() * (minus_i * *c);
        }
    }
    Ok(ComplexMatrix::from_inner(m))
}

/// Real matrix `A` of the map `rho -> [-i h, rho]` in Bloch coordinates, so
/// that `to_bloch([-i h, rho]) = A to_bloch(rho)`. `A` is antisymmetric.
pub fn adjoint_matrix(h: &ComplexMatrix, basis: &GeneratorBasis) -> Result<RealMatrix> {
    basis.check_dim(h.dim())?;
    let defect = h.hermitian_defect();
    if defect > tol::HERM * h.norm().max(1.0) {
        return Err(Error::NotHermitian { defect });
    }
    let m = basis.len();
    let hm = h.inner();
    let minus_i = C64::new(0.0, -1.0);
    let mut a = RealMatrix::zeros(m, m);
    for (col, g) in basis.iter().enumerate() {
        let xi = g.inner() * minus_i;
        let image = (hm * &xi - &xi * hm) * minus_i;
        for (row, v) in hermitian_coords(&image).into_iter().enumerate() {
            a[(row, col)] = v;
        }
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random::{haar_unitary, random_isospectral};
    use crate::linalg::{commutator, hs_inner};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// `Tr(X xi_k)` straight from the generator matrices.
    fn coords_by_trace(x: &ComplexMatrix, basis: &GeneratorBasis) -> Vec<f64> {
        basis
            .iter()
            .map(|g| {
                let xi = g.scale(C64::new(0.0, -1.0));
                hs_inner(&xi, x).unwrap().re
            })
            .collect()
    }

    fn random_state(n: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
        let w: Vec<f64> = (0..n).map(|k| (k + 1) as f64).collect();
        let total: f64 = w.iter().sum();
        let w: Vec<f64> = w.iter().map(|x| x / total).collect();
        random_isospectral(&DensityMatrix::diagonal(&w).unwrap(), rng)
    }

    #[test]
    fn generator_counts() {
        for (n, off, diag) in [(2, 2, 1), (3, 6, 2), (4, 12, 3)] {
            let b = GeneratorBasis::new(n).unwrap();
            assert_eq!(b.offdiag().len(), off);
            assert_eq!(b.diag().len(), diag);
            assert_eq!(b.len(), n * n - 1);
        }
    }

    #[test]
    fn qubit_cartan_generator() {
        let b = GeneratorBasis::new(2).unwrap();
        let h = 1.0 / SQRT_2;
        let expected = ComplexMatrix::from_row_slice(
            2,
            &[
                C64::new(0.0, h),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, -h),
            ],
        )
        .unwrap();
        assert!(b.diag()[0].max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn gram_is_identity() {
        for n in 2..=5 {
            let b = GeneratorBasis::new(n).unwrap();
            let g = b.gram();
            let m = b.len();
            for i in 0..m {
                for j in 0..m {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((g[(i, j)] - C64::new(want, 0.0)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn generator_shapes() {
        let b = GeneratorBasis::new(4).unwrap();
        for g in b.offdiag() {
            assert!(g.diagonal().iter().all(|z| z.norm() == 0.0));
            assert!(g.scale(C64::new(0.0, 1.0)).is_hermitian(1e-15));
        }
        for g in b.diag() {
            assert_eq!(g.max_offdiag(), 0.0);
            assert!(g.trace().norm() < 1e-15);
        }
        assert_eq!(b.pair_positions(1, 2), Some((6, 7)));
        assert_eq!(b.pair_positions(3, 2), Some((10, 11)));
    }

    #[test]
    fn explicit_coords_match_trace_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 2..=4 {
            let b = GeneratorBasis::new(n).unwrap();
            let rho = random_state(n, &mut rng);
            let fast = to_bloch(&rho, &b).unwrap();
            let slow = coords_by_trace(rho.matrix(), &b);
            for (x, y) in fast.coords().iter().zip(&slow) {
                assert!((x - y).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn mixed_state_maps_to_origin() {
        let b = GeneratorBasis::new(3).unwrap();
        let s = to_bloch(&DensityMatrix::maximally_mixed(3), &b).unwrap();
        assert!(s.norm() < 1e-15);
        let back = from_bloch(&s, &b).unwrap();
        assert!(back.max_abs_diff(DensityMatrix::maximally_mixed(3).matrix()) < 1e-15);
    }

    #[test]
    fn diagonal_states_live_in_cartan_block() {
        let b = GeneratorBasis::new(3).unwrap();
        let rho = DensityMatrix::diagonal(&[0.25, 0.25, 0.5]).unwrap();
        let s = to_bloch(&rho, &b).unwrap();
        assert!(s.offdiag_part().iter().all(|&x| x == 0.0));
        let back = from_bloch(&s, &b).unwrap();
        assert!(back.max_abs_diff(rho.matrix()) < 1e-15);
    }

    #[test]
    fn round_trip_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 2..=4 {
            let b = GeneratorBasis::new(n).unwrap();
            for _ in 0..10 {
                let rho = random_state(n, &mut rng);
                let back = from_bloch(&to_bloch(&rho, &b).unwrap(), &b).unwrap();
                assert!(back.max_abs_diff(rho.matrix()) < tol::BASIS);
            }
        }
    }

    #[test]
    fn large_bloch_vector_is_not_a_state() {
        let b = GeneratorBasis::new(3).unwrap();
        let s = BlochVector::new(3, vec![0.0, 3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let m = from_bloch(&s, &b).unwrap();
        assert!(m.is_hermitian(1e-15));
        assert!((m.trace().re - 1.0).abs() < 1e-15);
        assert!(matches!(
            crate::linalg::validate_density(m, 1e-10),
            Err(Error::NotPositive { .. })
        ));
    }

    #[test]
    fn from_bloch_rejects_wrong_length() {
        assert!(BlochVector::new(3, vec![0.0; 3]).is_err());
        let b = GeneratorBasis::new(2).unwrap();
        let s = BlochVector::new(3, vec![0.0; 8]).unwrap();
        assert!(from_bloch(&s, &b).is_err());
    }

    #[test]
    fn adjoint_of_zero_is_zero() {
        let b = GeneratorBasis::new(3).unwrap();
        let a = adjoint_matrix(&ComplexMatrix::zeros(3), &b).unwrap();
        assert_eq!(a.norm(), 0.0);
    }

    #[test]
    fn adjoint_of_diagonal_drift_is_block_rotation() {
        // omega_kl = a_l - a_k
        let levels = [0.4, 1.3, 3.1];
        let b = GeneratorBasis::new(3).unwrap();
        let a0 = adjoint_matrix(&ComplexMatrix::from_diagonal(&levels), &b).unwrap();
        for (p, &(k, l)) in b.pairs().iter().enumerate() {
            let w = levels[l] - levels[k];
            let (i, j) = (2 * p, 2 * p + 1);
            assert!(a0[(i, i)].abs() < 1e-14 && a0[(j, j)].abs() < 1e-14);
            assert!((a0[(i, j)] + w).abs() < 1e-14);
            assert!((a0[(j, i)] - w).abs() < 1e-14);
        }
        // nothing outside the 2x2 blocks
        let mut off_block = 0.0f64;
        for r in 0..8 {
            for c in 0..8 {
                if r / 2 != c / 2 || r >= 6 || c >= 6 {
                    off_block = off_block.max(a0[(r, c)].abs());
                }
            }
        }
        assert!(off_block < 1e-14);
    }

    #[test]
    fn adjoint_rejects_non_hermitian() {
        let b = GeneratorBasis::new(2).unwrap();
        let m = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        assert!(matches!(
            adjoint_matrix(&m, &b),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn adjoint_matches_commutator_and_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in 2..=4 {
            let b = GeneratorBasis::new(n).unwrap();
            let u = haar_unitary(n, &mut rng);
            let d: Vec<f64> = (0..n).map(|k| (k as f64 * 0.7).sin() + k as f64).collect();
            let h = (&(&u * &ComplexMatrix::from_diagonal(&d)) * &u.adjoint()).hermitian_part();
            let a = adjoint_matrix(&h, &b).unwrap();
            assert!((&a + a.transpose()).amax() < tol::BASIS);

            let rho = random_state(n, &mut rng);
            let s = to_bloch(&rho, &b).unwrap().as_vector();
            let exact = commutator(&h.scale(C64::new(0.0, -1.0)), rho.matrix()).unwrap();
            // oracle: derivative of exp(-i h t) rho exp(i h t) at t = 0
            let eps = 1e-6;
            let up = crate::linalg::hermitian_propagator(h.inner(), eps);
            let dn = crate::linalg::hermitian_propagator(h.inner(), -eps);
            let fwd = &up * rho.matrix().inner() * up.adjoint();
            let bwd = &dn * rho.matrix().inner() * dn.adjoint();
            let fd = (fwd - bwd) / C64::new(2.0 * eps, 0.0);
            let via_a = &a * &s;
            let exact_c = hermitian_coords(exact.inner());
            let fd_c = hermitian_coords(&fd);
            for i in 0..b.len() {
                assert!((via_a[i] - exact_c[i]).abs() < 1e-12);
                assert!((via_a[i] - fd_c[i]).abs() < 1e-7);
            }
        }
    }
}

//! Structure of the drift/control pair: strong regularity of `H0`,
//! connectivity of `H1`, the Ad-bracket sequence `B_m = [-i H0, B_{m-1}]`
//! and the algebraic tests for membership in the LaSalle invariant set.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{
    algebra_coords, commutator, eigen_decomposition, hermitian_coords, numerical_rank,
    singular_values, spectrum, spectrum_distance, tol, ComplexMatrix, DensityMatrix,
    GeneratorBasis, RealMatrix, C64,
};

/// Relative tolerance under which two transition frequencies collide.
pub const COLLISION_REL: f64 = 1e-9;
/// Relative gap below which distinct frequencies are reported as near
/// collisions (warning channel only).
pub const NEAR_COLLISION_REL: f64 = 1e-6;
/// Spectra further apart than this are not treated as isospectral.
pub const ISOSPECTRAL_TOL: f64 = 1e-8;

/// `H0 = diag(a_1..a_n)` in its eigenbasis together with a zero-diagonal
/// hermitian control `H1 = (b_kl)`.
#[derive(Clone, Debug)]
pub struct ControlSystem {
    h0: ComplexMatrix,
    h1: ComplexMatrix,
    levels: Vec<f64>,
    pairs: Vec<(usize, usize)>,
    omegas: Vec<f64>,
}

impl ControlSystem {
    /// `h0` must be real diagonal. Level ordering is not imposed.
    pub fn new(h0: ComplexMatrix, h1: ComplexMatrix) -> Result<Self> {
        let n = h0.dim();
        if h1.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: h1.dim(),
            });
        }
        let scale0 = h0.norm().max(1.0);
        if h0.max_offdiag() > tol::HERM * scale0 {
            return Err(Error::InvalidSystem(
                "drift Hamiltonian must be diagonal in its eigenbasis".into(),
            ));
        }
        let levels: Vec<f64> = h0.diagonal().iter().map(|z| z.re).collect();
        if h0
            .diagonal()
            .iter()
            .any(|z| z.im.abs() > tol::HERM * scale0)
        {
            return Err(Error::NotHermitian {
                defect: h0.hermitian_defect(),
            });
        }
        let scale1 = h1.norm().max(1.0);
        let defect = h1.hermitian_defect();
        if defect > tol::HERM * scale1 {
            return Err(Error::NotHermitian { defect });
        }
        if h1.diagonal().iter().any(|z| z.norm() > tol::HERM * scale1) {
            return Err(Error::InvalidSystem(
                "control Hamiltonian must have a zero diagonal".into(),
            ));
        }
        let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
        let mut omegas = Vec::with_capacity(n * (n - 1) / 2);
        for k in 0..n {
            for l in (k + 1)..n {
                pairs.push((k, l));
                omegas.push(levels[l] - levels[k]);
            }
        }
        Ok(Self {
            h0: ComplexMatrix::from_diagonal(&levels),
            h1: h1.hermitian_part(),
            levels,
            pairs,
            omegas,
        })
    }

    pub fn from_levels(levels: &[f64], h1: ComplexMatrix) -> Result<Self> {
        if levels.len() < 2 {
            return Err(Error::DimensionTooSmall(levels.len()));
        }
        if levels.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Self::new(ComplexMatrix::from_diagonal(levels), h1)
    }

    /// Builds `H1` from its upper-triangle couplings `b_kl`, `k < l`, given in
    /// lexicographic pair order.
    pub fn from_couplings(levels: &[f64], couplings: &[C64]) -> Result<Self> {
        let n = levels.len();
        if n < 2 {
            return Err(Error::DimensionTooSmall(n));
        }
        if couplings.len() != n * (n - 1) / 2 {
            return Err(Error::DimensionMismatch {
                expected: n * (n - 1) / 2,
                found: couplings.len(),
            });
        }
        let mut m = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
        let mut it = couplings.iter();
        for k in 0..n {
            for l in (k + 1)..n {
                let b = *it.next().expect("length checked");
                m[(k, l)] = b;
                m[(l, k)] = b.conj();
            }
        }
        Self::from_levels(levels, ComplexMatrix::new(m)?)
    }

    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn h0(&self) -> &ComplexMatrix {
        &self.h0
    }

    pub fn h1(&self) -> &ComplexMatrix {
        &self.h1
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Level pairs `(k, l)`, `k < l`, lexicographic.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// `omega_kl = a_l - a_k`, aligned with [`pairs`](Self::pairs).
    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn omega(&self, k: usize, l: usize) -> f64 {
        self.levels[l] - self.levels[k]
    }

    pub fn coupling(&self, k: usize, l: usize) -> C64 {
        self.h1[(k, l)]
    }

    pub fn max_frequency(&self) -> f64 {
        self.omegas.iter().fold(0.0, |m, w| m.max(w.abs()))
    }

    /// `H0 + f H1`.
    pub fn hamiltonian(&self, f: f64) -> ComplexMatrix {
        &self.h0 + &self.h1.scale(C64::new(f, 0.0))
    }

    /// `max |[H0, rho]|`; zero iff `rho` is a stationary target.
    pub fn stationarity_defect(&self, rho: &DensityMatrix) -> Result<f64> {
        let c = commutator(&self.h0, rho.matrix())?;
        Ok(c.inner().iter().fold(0.0, |m, z| m.max(z.norm())))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StructureReport {
    pub strongly_regular: bool,
    /// Pairs with `|omega_kl| = |omega_pq|`. A vanishing frequency is
    /// recorded as a pair colliding with itself.
    pub colliding_pairs: Vec<((usize, usize), (usize, usize))>,
    pub near_collisions: Vec<((usize, usize), (usize, usize))>,
    pub fully_connected: bool,
    pub missing_edges: Vec<(usize, usize)>,
}

impl StructureReport {
    pub fn is_ideal(&self) -> bool {
        self.strongly_regular && self.fully_connected
    }
}

/// Checks strong regularity (up to [`COLLISION_REL`]) and full
/// connectivity (`|b_kl| > tol`).
pub fn analyze_structure(sys: &ControlSystem, tol: f64) -> StructureReport {
    let pairs = sys.pairs();
    let w = sys.omegas();
    let wmax = sys.max_frequency();
    let hard = COLLISION_REL * wmax;
    let soft = NEAR_COLLISION_REL * wmax;
    let mut colliding = Vec::new();
    let mut near = Vec::new();
    for i in 0..pairs.len() {
        if w[i].abs() <= hard {
            colliding.push((pairs[i], pairs[i]));
        }
        for j in (i + 1)..pairs.len() {
            let gap = (w[i].abs() - w[j].abs()).abs();
            if gap <= hard {
                colliding.push((pairs[i], pairs[j]));
            } else if gap <= soft {
                near.push((pairs[i], pairs[j]));
            }
        }
    }
    for &(a, b) in &near {
        log::warn!("near frequency collision between {a:?} and {b:?}");
    }
    let missing: Vec<(usize, usize)> = pairs
        .iter()
        .copied()
        .filter(|&(k, l)| sys.coupling(k, l).norm() <= tol)
        .collect();
    StructureReport {
        strongly_regular: colliding.is_empty(),
        colliding_pairs: colliding,
        near_collisions: near,
        fully_connected: missing.is_empty(),
        missing_edges: missing,
    }
}

/// `B_0 = -i H1`, `B_m = [-i H0, B_{m-1}]` for `m = 1..=m_max`.
pub fn ad_bracket_sequence(sys: &ControlSystem, m_max: usize) -> Vec<ComplexMatrix> {
    let minus_i = C64::new(0.0, -1.0);
    let a = sys.h0.scale(minus_i);
    let mut out = Vec::with_capacity(m_max + 1);
    out.push(sys.h1.scale(minus_i));
    for _ in 0..m_max {
        let prev = out.last().expect("non-empty");
        out.push(commutator(&a, prev).expect("same dimension"));
    }
    out
}

/// Default bracket depth `n^2 - n`.
pub fn default_bracket_depth(n: usize) -> usize {
    n * n - n
}

#[derive(Clone, Debug)]
pub struct SpanReport {
    /// Root spaces lying entirely inside the span.
    pub spanned_pairs: Vec<(usize, usize)>,
    pub rank: usize,
    /// Rank of the even-order brackets, equal to the rank of the Vandermonde
    /// matrix in the squared frequencies of the coupled pairs.
    pub vandermonde_rank: usize,
    pub full: bool,
    pub singular_values: Vec<f64>,
    dim: usize,
    /// Orthonormal rows spanning the brackets in off-diagonal coordinates.
    span_basis: Vec<DVector<f64>>,
}

impl SpanReport {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn span_basis(&self) -> &[DVector<f64>] {
        &self.span_basis
    }

    /// Norm of the orthogonal projection of `v` onto the span.
    pub fn projection_norm(&self, v: &DVector<f64>) -> f64 {
        self.span_basis
            .iter()
            .map(|b| b.dot(v).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn contains_pair(&self, k: usize, l: usize) -> bool {
        let key = if k < l { (k, l) } else { (l, k) };
        self.spanned_pairs.contains(&key)
    }
}

/// Row-normalized coordinate matrix of `rows` restricted to the first `m`
/// (off-diagonal) algebra coordinates. Zero rows are dropped.
fn offdiag_rows(brackets: &[&ComplexMatrix], m: usize) -> RealMatrix {
    let rows: Vec<Vec<f64>> = brackets
        .iter()
        .map(|b| {
            let c = algebra_coords(b.inner());
            c[..m].to_vec()
        })
        .filter_map(|r| {
            let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            (norm > 0.0).then(|| r.iter().map(|x| x / norm).collect())
        })
        .collect();
    RealMatrix::from_fn(rows.len(), m, |i, j| rows[i][j])
}

/// Numerical span of the brackets in the off-diagonal block. Rows are
/// normalized before the SVD so that the `omega^m` growth does not swamp
/// the rank decision; `tol` is relative to the largest singular value.
pub fn bracket_span(brackets: &[ComplexMatrix], basis: &GeneratorBasis, tol: f64) -> SpanReport {
    let n = basis.dim();
    let m = basis.n_offdiag();
    let all: Vec<&ComplexMatrix> = brackets.iter().collect();
    let rows = offdiag_rows(&all, m);
    let even: Vec<&ComplexMatrix> = brackets.iter().step_by(2).collect();
    let vandermonde_rank = numerical_rank(&offdiag_rows(&even, m), tol);

    let (rank, span_basis, sv) = if rows.nrows() == 0 {
        (0, Vec::new(), Vec::new())
    } else {
        let svd = rows.clone().svd(false, true);
        let v_t = svd.v_t.expect("requested");
        let top = svd.singular_values.max();
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] > tol * top)
            .collect();
        let basis_rows = keep
            .iter()
            .map(|&i| v_t.row(i).transpose().into_owned())
            .collect();
        (keep.len(), basis_rows, singular_values(&rows))
    };

    let mut report = SpanReport {
        spanned_pairs: Vec::new(),
        rank,
        vandermonde_rank,
        full: rank == m,
        singular_values: sv,
        dim: n,
        span_basis,
    };
    // a root space is inside the span when both of its unit directions are
    let containment = tol.sqrt();
    for (p, &pair) in basis.pairs().iter().enumerate() {
        let inside = (0..2).all(|j| {
            let mut e = DVector::zeros(m);
            e[2 * p + j] = 1.0;
            let proj = report.projection_norm(&e);
            (1.0 - proj * proj).max(0.0).sqrt() <= containment
        });
        if inside {
            report.spanned_pairs.push(pair);
        }
    }
    report
}

/// Algebraic LaSalle test for the pair `(rho1, rho2)`: the commutator must
/// be orthogonal to every bracket `B_m`. Because the span is invariant under
/// the free evolution, orthogonality at time zero suffices.
pub fn invariant_set_member(
    rho1: &DensityMatrix,
    rho2: &DensityMatrix,
    span: &SpanReport,
    basis: &GeneratorBasis,
    tol: f64,
) -> Result<bool> {
    if rho1.dim() != basis.dim() || rho2.dim() != basis.dim() || span.dim() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            found: if rho1.dim() != basis.dim() {
                rho1.dim()
            } else {
                rho2.dim()
            },
        });
    }
    let gap = spectrum_distance(&spectrum(rho1), &spectrum(rho2));
    if gap > ISOSPECTRAL_TOL {
        log::warn!("invariant-set test on non-isospectral pair (spectral gap {gap:e})");
    }
    let c = commutator(rho1.matrix(), rho2.matrix())?;
    let coords = algebra_coords(c.inner());
    let offdiag = DVector::from_column_slice(&coords[..basis.n_offdiag()]);
    Ok(span.projection_norm(&offdiag) <= tol)
}

/// Rank of the off-diagonal rows of the matrix of `Ad_{rho_d0}` in Bloch
/// coordinates. Below `n^2 - n` exactly when the target admits non-trivial
/// invariant-set partners.
pub fn a_tilde_rank(rho_d0: &DensityMatrix, basis: &GeneratorBasis, tol: f64) -> Result<usize> {
    if rho_d0.dim() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            found: rho_d0.dim(),
        });
    }
    let m = basis.n_offdiag();
    let rho = rho_d0.matrix().inner();
    let minus_i = C64::new(0.0, -1.0);
    let mut a = RealMatrix::zeros(m, basis.len());
    for (col, g) in basis.iter().enumerate() {
        let xi = g.inner() * minus_i;
        let image = (rho * &xi - &xi * rho) * minus_i;
        for (row, v) in hermitian_coords(&image).into_iter().take(m).enumerate() {
            a[(row, col)] = v;
        }
    }
    if a.amax() <= tol {
        return Ok(0);
    }
    Ok(numerical_rank(&a, tol::RANK_REL))
}

/// Outcome of the pseudo-pure exceptional-family test.
#[derive(Clone, Debug)]
pub struct PseudoPureReport {
    pub exceptional: bool,
    /// Non-degenerate eigenvalue.
    pub w: f64,
    /// Eigenvalue of multiplicity `n - 1`.
    pub u: f64,
    /// Eigenvector of `w` in the drift eigenbasis, first nonzero entry real
    /// and positive.
    pub psi0: Vec<C64>,
    /// Indices of the nonzero amplitudes of `psi0`.
    pub support: Vec<usize>,
}

fn fix_phase(mut v: Vec<C64>, tol: f64) -> Vec<C64> {
    if let Some(z) = v.iter().find(|z| z.norm() > tol).copied() {
        let phase = z.conj() / z.norm();
        for x in &mut v {
            *x *= phase;
        }
    }
    v
}

/// Splits a pseudo-pure state as `w Pi_0 + u (I - Pi_0)`.
fn pseudo_pure_split(rho: &DensityMatrix, tol: f64) -> Result<(f64, f64, Vec<C64>)> {
    let (vals, vecs) = eigen_decomposition(rho);
    let n = vals.len();
    let not_pp = || Error::NotPseudoPure {
        spectrum: vals.clone(),
    };
    // the isolated eigenvalue sits at one end of the sorted spectrum
    let top_isolated = vals[1..].iter().all(|x| (x - vals[1]).abs() <= tol);
    let bottom_isolated = vals[..n - 1].iter().all(|x| (x - vals[0]).abs() <= tol);
    let idx = if top_isolated {
        0
    } else if bottom_isolated {
        n - 1
    } else {
        return Err(not_pp());
    };
    let w = vals[idx];
    let u = if idx == 0 { vals[1] } else { vals[0] };
    if (w - u).abs() <= tol {
        return Err(not_pp());
    }
    let psi: Vec<C64> = vecs.inner().column(idx).iter().copied().collect();
    Ok((w, u, fix_phase(psi, tol.sqrt())))
}

/// True when the projector component of a pseudo-pure target has exactly
/// two nonzero amplitudes of equal modulus.
pub fn pseudo_pure_invariant_check(rho_d0: &DensityMatrix, tol: f64) -> Result<PseudoPureReport> {
    let (w, u, psi0) = pseudo_pure_split(rho_d0, tol)?;
    let support: Vec<usize> = (0..psi0.len())
        .filter(|&k| psi0[k].norm_sqr() > tol)
        .collect();
    let exceptional = support.len() == 2
        && (psi0[support[0]].norm_sqr() - psi0[support[1]].norm_sqr()).abs() <= tol;
    Ok(PseudoPureReport {
        exceptional,
        w,
        u,
        psi0,
        support,
    })
}

/// `<Psi_1|Psi_2> = r e^{i theta}` for the projector components of two
/// isospectral pseudo-pure states, each vector phase-fixed as in
/// [`PseudoPureReport::psi0`]. Returns `(r, theta)`.
pub fn pseudo_pure_overlap(
    rho1: &DensityMatrix,
    rho2: &DensityMatrix,
    tol: f64,
) -> Result<(f64, f64)> {
    let (_, _, a) = pseudo_pure_split(rho1, tol)?;
    let (_, _, b) = pseudo_pure_split(rho2, tol)?;
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let z: C64 = a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum();
    Ok((z.norm(), z.arg()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random::{haar_unitary, random_isospectral};
    use crate::linalg::{hermitian_propagator, hs_inner};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn ideal_qutrit() -> ControlSystem {
        ControlSystem::from_couplings(&[0.0, 1.0, 2.7], &[c(1.0, 0.0), c(0.8, 0.0), c(1.0, 0.0)])
            .unwrap()
    }

    fn random_system(n: usize, rng: &mut ChaCha8Rng) -> ControlSystem {
        let levels: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let b: Vec<C64> = (0..n * (n - 1) / 2)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        ControlSystem::from_couplings(&levels, &b).unwrap()
    }

    /// Unnormalized generators `lambda_kl = i(e_kl + e_lk)` and
    /// `lambda-bar_kl = e_kl - e_lk`.
    fn lam(n: usize, k: usize, l: usize) -> DMatrix<C64> {
        let mut m = DMatrix::from_element(n, n, c(0.0, 0.0));
        m[(k, l)] = c(0.0, 1.0);
        m[(l, k)] = c(0.0, 1.0);
        m
    }

    fn lam_bar(n: usize, k: usize, l: usize) -> DMatrix<C64> {
        let mut m = DMatrix::from_element(n, n, c(0.0, 0.0));
        m[(k, l)] = c(1.0, 0.0);
        m[(l, k)] = c(-1.0, 0.0);
        m
    }

    /// Closed form of the m-th bracket, term by term over the level pairs.
    /// The recursion with `B_0 = -i H1` produces the negative of the
    /// textbook sum, hence the overall sign.
    fn closed_form(sys: &ControlSystem, m: usize) -> DMatrix<C64> {
        let n = sys.dim();
        let mut s = DMatrix::from_element(n, n, c(0.0, 0.0));
        for &(k, l) in sys.pairs() {
            let w = sys.omega(k, l);
            let b = sys.coupling(k, l);
            let (sign, term) = if m % 2 == 1 {
                let mm = m.div_ceil(2);
                (
                    if mm.is_multiple_of(2) { 1.0 } else { -1.0 },
                    lam_bar(n, k, l) * c(b.re, 0.0) + lam(n, k, l) * c(b.im, 0.0),
                )
            } else {
                let mm = m / 2;
                (
                    if mm.is_multiple_of(2) { 1.0 } else { -1.0 },
                    lam(n, k, l) * c(b.re, 0.0) - lam_bar(n, k, l) * c(b.im, 0.0),
                )
            };
            s += term * c(sign * w.powi(m as i32), 0.0);
        }
        -s
    }

    fn qutrit_pair() -> (DensityMatrix, DensityMatrix) {
        let r1 = ComplexMatrix::from_real_rows(&[
            &[1.0 / 12.0, -1.0 / 12.0, -1.0 / 12.0],
            &[-1.0 / 12.0, 11.0 / 24.0, 1.0 / 8.0],
            &[-1.0 / 12.0, 1.0 / 8.0, 11.0 / 24.0],
        ])
        .unwrap();
        let r2 = ComplexMatrix::from_row_slice(
            3,
            &[
                c(1.0 / 3.0, 0.0),
                c(0.0, -1.0 / 12.0),
                c(0.0, 1.0 / 12.0),
                c(0.0, 1.0 / 12.0),
                c(1.0 / 3.0, 0.0),
                c(0.0, -0.25),
                c(0.0, -1.0 / 12.0),
                c(0.0, 0.25),
                c(1.0 / 3.0, 0.0),
            ],
        )
        .unwrap();
        (
            DensityMatrix::new(r1).unwrap(),
            DensityMatrix::new(r2).unwrap(),
        )
    }

    fn generic_target() -> DensityMatrix {
        DensityMatrix::diagonal(&[0.5, 1.0 / 3.0, 1.0 / 6.0]).unwrap()
    }

    #[test]
    fn rejects_invalid_systems() {
        let h0 = ComplexMatrix::from_real_rows(&[&[0.0, 0.1], &[0.1, 1.0]]).unwrap();
        let h1 = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        assert!(matches!(
            ControlSystem::new(h0, h1.clone()),
            Err(Error::InvalidSystem(_))
        ));
        let h1_diag = ComplexMatrix::from_real_rows(&[&[0.5, 1.0], &[1.0, 0.0]]).unwrap();
        assert!(ControlSystem::from_levels(&[0.0, 1.0], h1_diag).is_err());
        let h1_nonherm = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        assert!(matches!(
            ControlSystem::from_levels(&[0.0, 1.0], h1_nonherm),
            Err(Error::NotHermitian { .. })
        ));
        assert!(ControlSystem::from_levels(&[0.0, 1.0, 2.0], h1).is_err());
    }

    #[test]
    fn omegas_follow_levels() {
        let sys = ideal_qutrit();
        assert_eq!(sys.pairs(), &[(0, 1), (0, 2), (1, 2)]);
        for (w, want) in sys.omegas().iter().zip([1.0, 2.7, 1.7]) {
            assert!((w - want).abs() < 1e-15);
        }
    }

    #[test]
    fn equally_spaced_levels_collide() {
        let w = 1.3;
        let sys = ControlSystem::from_couplings(&[0.0, w, 2.0 * w], &[c(1.0, 0.0); 3]).unwrap();
        let r = analyze_structure(&sys, 1e-12);
        assert!(!r.strongly_regular);
        assert_eq!(r.colliding_pairs, vec![((0, 1), (1, 2))]);
        assert!(r.fully_connected);
    }

    #[test]
    fn nearest_neighbour_coupling_is_not_connected() {
        let sys = ControlSystem::from_couplings(
            &[0.0, 1.0, 2.7],
            &[c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        )
        .unwrap();
        let r = analyze_structure(&sys, 1e-12);
        assert!(r.strongly_regular);
        assert!(!r.fully_connected);
        assert_eq!(r.missing_edges, vec![(0, 2)]);
    }

    #[test]
    fn degenerate_levels_record_self_collision() {
        let sys = ControlSystem::from_couplings(&[0.0, 0.0, 1.0], &[c(1.0, 0.0); 3]).unwrap();
        let r = analyze_structure(&sys, 1e-12);
        assert!(r.colliding_pairs.contains(&((0, 1), (0, 1))));
        assert!(r.colliding_pairs.contains(&((0, 2), (1, 2))));
    }

    #[test]
    fn generic_system_is_ideal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sys = random_system(4, &mut rng);
        assert!(analyze_structure(&sys, 1e-12).is_ideal());
    }

    #[test]
    fn near_collision_is_only_a_warning() {
        let sys =
            ControlSystem::from_couplings(&[0.0, 1.0, 2.0 + 1e-7], &[c(1.0, 0.0); 3]).unwrap();
        let r = analyze_structure(&sys, 1e-12);
        assert!(r.strongly_regular);
        assert_eq!(r.near_collisions.len(), 1);
    }

    #[test]
    fn qubit_first_bracket() {
        let sys = ControlSystem::from_couplings(&[0.0, 1.5], &[c(0.7, 0.0)]).unwrap();
        let b = ad_bracket_sequence(&sys, 1);
        let want = closed_form(&sys, 1);
        assert!((b[1].inner() - &want).camax() < 1e-14);
        // only the real antisymmetric direction is present
        let coords = algebra_coords(b[1].inner());
        assert!(coords[1].abs() < 1e-15 && coords[2].abs() < 1e-15);
        assert!((coords[0].abs() - 1.5 * 0.7 * std::f64::consts::SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn brackets_match_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in 2..=4 {
            for _ in 0..5 {
                let sys = random_system(n, &mut rng);
                let seq = ad_bracket_sequence(&sys, 10);
                for (m, b) in seq.iter().enumerate() {
                    let want = closed_form(&sys, m);
                    let scale = want.camax().max(1.0);
                    assert!((b.inner() - &want).camax() <= 1e-9 * scale, "m = {m}");
                    assert!(b.diagonal().iter().all(|z| z.norm() < 1e-9 * scale));
                }
            }
        }
    }

    #[test]
    fn odd_and_even_brackets_are_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sys = random_system(3, &mut rng);
        let seq = ad_bracket_sequence(&sys, 8);
        for i in (1..seq.len()).step_by(2) {
            for j in (0..seq.len()).step_by(2) {
                let ip = hs_inner(&seq[i], &seq[j]).unwrap();
                let scale = seq[i].norm() * seq[j].norm();
                assert!(ip.norm() <= 1e-10 * scale.max(1.0));
            }
        }
    }

    #[test]
    fn ideal_qutrit_spans_everything() {
        let sys = ideal_qutrit();
        let basis = GeneratorBasis::new(3).unwrap();
        let span = bracket_span(&ad_bracket_sequence(&sys, 6), &basis, tol::RANK_REL);
        assert_eq!(span.rank, 6);
        assert!(span.full);
        assert_eq!(span.vandermonde_rank, 3);
        assert_eq!(span.spanned_pairs, vec![(0, 1), (0, 2), (1, 2)]);
    }

    /// Rank of the Vandermonde matrix in the normalized squared frequencies
    /// of the coupled pairs.
    fn explicit_vandermonde_rank(sys: &ControlSystem, rows: usize) -> usize {
        let nodes: Vec<f64> = sys
            .pairs()
            .iter()
            .zip(sys.omegas())
            .filter(|(&(k, l), _)| sys.coupling(k, l).norm() > 0.0)
            .map(|(_, w)| w * w)
            .collect();
        let top = nodes.iter().cloned().fold(0.0, f64::max);
        let v = RealMatrix::from_fn(rows, nodes.len(), |i, j| (nodes[j] / top).powi(i as i32));
        numerical_rank(&v, tol::RANK_REL)
    }

    #[test]
    fn commensurate_drift_drops_rank() {
        let w = 1.0;
        let sys = ControlSystem::from_couplings(&[0.0, w, 2.0 * w], &[c(1.0, 0.0); 3]).unwrap();
        let basis = GeneratorBasis::new(3).unwrap();
        let span = bracket_span(&ad_bracket_sequence(&sys, 6), &basis, tol::RANK_REL);
        assert_eq!(span.vandermonde_rank, 2);
        assert_eq!(explicit_vandermonde_rank(&sys, 4), 2);
        assert_eq!(span.rank, 4);
        assert!(!span.full);
        assert_eq!(span.spanned_pairs, vec![(0, 2)]);
        // lambda_12 - lambda_23 is orthogonal to every bracket
        let mut v = DVector::zeros(6);
        v[1] = 1.0;
        v[5] = -1.0;
        assert!(span.projection_norm(&v) < 1e-10);
    }

    #[test]
    fn missing_edge_excluded_from_span() {
        let sys = ControlSystem::from_couplings(
            &[0.0, 1.0, 2.7],
            &[c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        )
        .unwrap();
        let basis = GeneratorBasis::new(3).unwrap();
        let span = bracket_span(&ad_bracket_sequence(&sys, 6), &basis, tol::RANK_REL);
        assert_eq!(span.rank, 4);
        assert_eq!(span.spanned_pairs, vec![(0, 1), (1, 2)]);
        assert!(!span.contains_pair(0, 2));
        assert_eq!(span.vandermonde_rank, explicit_vandermonde_rank(&sys, 4));
    }

    #[test]
    fn span_rank_agrees_with_vandermonde_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in 2..=4 {
            let sys = random_system(n, &mut rng);
            let basis = GeneratorBasis::new(n).unwrap();
            let depth = default_bracket_depth(n);
            let span = bracket_span(&ad_bracket_sequence(&sys, depth), &basis, tol::RANK_REL);
            assert_eq!(span.rank, n * n - n);
            assert_eq!(
                span.vandermonde_rank,
                explicit_vandermonde_rank(&sys, depth / 2 + 1)
            );
        }
    }

    #[test]
    fn diagonal_commutator_pair_is_in_invariant_set() {
        let (r1, r2) = qutrit_pair();
        let basis = GeneratorBasis::new(3).unwrap();
        let span = bracket_span(
            &ad_bracket_sequence(&ideal_qutrit(), 6),
            &basis,
            tol::RANK_REL,
        );
        assert!(invariant_set_member(&r1, &r2, &span, &basis, 1e-10).unwrap());
        assert!(invariant_set_member(&r1, &r1, &span, &basis, 1e-10).unwrap());
    }

    #[test]
    fn random_pairs_leave_invariant_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let basis = GeneratorBasis::new(3).unwrap();
        let span = bracket_span(
            &ad_bracket_sequence(&ideal_qutrit(), 6),
            &basis,
            tol::RANK_REL,
        );
        for _ in 0..20 {
            let a = random_isospectral(&generic_target(), &mut rng);
            let b = random_isospectral(&generic_target(), &mut rng);
            let member = invariant_set_member(&a, &b, &span, &basis, 1e-10).unwrap();
            // oracle: full span means membership iff the commutator is diagonal
            let comm = commutator(a.matrix(), b.matrix()).unwrap();
            assert_eq!(member, comm.max_offdiag() <= 1e-10);
            assert!(!member);
        }
    }

    #[test]
    fn membership_under_reduced_span() {
        // commutator supported on the (1,3) root space only
        let sys = ControlSystem::from_couplings(
            &[0.0, 1.0, 2.7],
            &[c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        )
        .unwrap();
        let basis = GeneratorBasis::new(3).unwrap();
        let span = bracket_span(&ad_bracket_sequence(&sys, 6), &basis, tol::RANK_REL);
        let rho1 = generic_target();
        let u = hermitian_propagator(
            ComplexMatrix::from_real_rows(&[&[0.0, 0.0, 1.0], &[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0]])
                .unwrap()
                .inner(),
            0.3,
        );
        let rho2 = rho1.conjugate_by(&ComplexMatrix::new(u).unwrap()).unwrap();
        assert!(
            commutator(rho1.matrix(), rho2.matrix())
                .unwrap()
                .max_offdiag()
                > 1e-3
        );
        assert!(invariant_set_member(&rho1, &rho2, &span, &basis, 1e-10).unwrap());
    }

    #[test]
    fn a_tilde_rank_values() {
        let basis = GeneratorBasis::new(3).unwrap();
        assert_eq!(
            a_tilde_rank(&DensityMatrix::maximally_mixed(3), &basis, 1e-12).unwrap(),
            0
        );
        assert_eq!(a_tilde_rank(&generic_target(), &basis, 1e-12).unwrap(), 6);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let dense = random_isospectral(&generic_target(), &mut rng);
        assert_eq!(a_tilde_rank(&dense, &basis, 1e-12).unwrap(), 6);
    }

    #[test]
    fn a_tilde_kernel_of_diagonal_target_is_cartan() {
        // SVD oracle on the full adjoint matrix of a diagonal state
        let basis = GeneratorBasis::new(3).unwrap();
        let a = crate::linalg::adjoint_matrix(generic_target().matrix(), &basis).unwrap();
        let s = singular_values(&a);
        let zero = s.iter().filter(|&&x| x < 1e-12).count();
        assert_eq!(zero, 2);
        for j in 6..8 {
            assert!(a.column(j).amax() < 1e-15);
        }
    }

    #[test]
    fn pseudo_pure_family() {
        let (w, u) = (0.9, 0.05);
        let make = |psi: &[C64]| {
            let n = psi.len();
            let m = DMatrix::from_fn(n, n, |i, j| {
                psi[i] * psi[j].conj() * c(w - u, 0.0)
                    + if i == j { c(u, 0.0) } else { c(0.0, 0.0) }
            });
            DensityMatrix::new(ComplexMatrix::new(m).unwrap()).unwrap()
        };
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let exceptional = make(&[c(s, 0.0), C64::from_polar(s, 0.7), c(0.0, 0.0)]);
        let r = pseudo_pure_invariant_check(&exceptional, 1e-9).unwrap();
        assert!(r.exceptional);
        assert_eq!(r.support, vec![0, 1]);
        assert!((r.w - w).abs() < 1e-12 && (r.u - u).abs() < 1e-12);

        let single = make(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(
            !pseudo_pure_invariant_check(&single, 1e-9)
                .unwrap()
                .exceptional
        );
        let three = make(&[c(2.0 / 3.0, 0.0), c(1.0 / 3.0, 0.0), c(2.0 / 3.0, 0.0)]);
        assert!(
            !pseudo_pure_invariant_check(&three, 1e-9)
                .unwrap()
                .exceptional
        );
        let unequal = make(&[c(0.8, 0.0), c(0.6, 0.0), c(0.0, 0.0)]);
        assert!(
            !pseudo_pure_invariant_check(&unequal, 1e-9)
                .unwrap()
                .exceptional
        );

        assert!(matches!(
            pseudo_pure_invariant_check(&generic_target(), 1e-9),
            Err(Error::NotPseudoPure { .. })
        ));

        // (1, e^{i a})/sqrt2 against (1, e^{i b})/sqrt2: theta = (b - a)/2
        let other = make(&[c(s, 0.0), C64::from_polar(s, 1.5), c(0.0, 0.0)]);
        let (r, theta) = pseudo_pure_overlap(&exceptional, &other, 1e-9).unwrap();
        assert!((theta - 0.4).abs() < 1e-9);
        assert!((r - 0.4f64.cos()).abs() < 1e-9);
    }

    #[test]
    fn minority_eigenvalue_may_be_smallest() {
        let rho = DensityMatrix::diagonal(&[0.45, 0.1, 0.45]).unwrap();
        let r = pseudo_pure_invariant_check(&rho, 1e-9).unwrap();
        assert!((r.w - 0.1).abs() < 1e-12);
        assert_eq!(r.support, vec![1]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn membership_survives_free_evolution(seed in any::<u64>(), t in 0.0f64..20.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sys = ideal_qutrit();
            let basis = GeneratorBasis::new(3).unwrap();
            let span = bracket_span(&ad_bracket_sequence(&sys, 6), &basis, tol::RANK_REL);
            let (r1, r2) = qutrit_pair();
            let u = ComplexMatrix::new(hermitian_propagator(sys.h0().inner(), t)).unwrap();
            let a = r1.conjugate_by(&u).unwrap();
            let b = r2.conjugate_by(&u).unwrap();
            prop_assert!(invariant_set_member(&a, &b, &span, &basis, 1e-10).unwrap());
            let x = random_isospectral(&generic_target(), &mut rng);
            let before = invariant_set_member(&x, &r2, &span, &basis, 1e-10).unwrap();
            let after = invariant_set_member(&x.conjugate_by(&u).unwrap(), &b, &span, &basis, 1e-10).unwrap();
            prop_assert_eq!(before, after);
        }

        #[test]
        fn a_tilde_rank_invariant_under_diagonal_unitaries(
            seed in any::<u64>(),
            phases in proptest::collection::vec(0.0f64..6.3, 3),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let basis = GeneratorBasis::new(3).unwrap();
            let rho = if seed % 2 == 0 {
                random_isospectral(&generic_target(), &mut rng)
            } else {
                let u = haar_unitary(3, &mut rng);
                let pp = DensityMatrix::diagonal(&[0.8, 0.1, 0.1]).unwrap();
                pp.conjugate_by(&u).unwrap()
            };
            let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                3,
                phases.iter().map(|&p| C64::from_polar(1.0, p)),
            ));
            let moved = rho.conjugate_by(&ComplexMatrix::new(d).unwrap()).unwrap();
            prop_assert_eq!(
                a_tilde_rank(&rho, &basis, 1e-12).unwrap(),
                a_tilde_rank(&moved, &basis, 1e-12).unwrap()
            );
        }
    }
}

//! Haar-random unitaries and isospectral states.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{ComplexMatrix, DensityMatrix, C64};

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases
/// of `R`'s diagonal absorbed into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let z = DMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    });
    let qr = z.qr();
    let (mut q, r) = qr.unpack();
    for c in 0..n {
        let d = r[(c, c)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        for row in 0..n {
            q[(row, c)] *= phase;
        }
    }
    ComplexMatrix::from_inner(q)
}

/// `U rho U^dagger` with `U` Haar-distributed.
pub fn random_isospectral<R: Rng + ?Sized>(rho: &DensityMatrix, rng: &mut R) -> DensityMatrix {
    let u = haar_unitary(rho.dim(), rng);
    rho.conjugate_by(&u)
        .expect("dimensions agree by construction")
}

/// Haar-random pure-state vector in `C^n`.
pub fn random_pure_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<C64> {
    let u = haar_unitary(n, rng);
    (0..n).map(|r| u[(r, 0)]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{spectrum, spectrum_distance};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn haar_unitaries_are_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 2..=5 {
            let u = haar_unitary(n, &mut rng);
            let prod = &u.adjoint() * &u;
            assert!(prod.max_abs_diff(&ComplexMatrix::identity(n)) < 1e-12);
        }
    }

    #[test]
    fn conjugation_preserves_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rho = DensityMatrix::diagonal(&[0.5, 0.3, 0.15, 0.05]).unwrap();
        for _ in 0..20 {
            let r = random_isospectral(&rho, &mut rng);
            assert!(spectrum_distance(&spectrum(&r), &spectrum(&rho)) < 1e-12);
        }
    }
}

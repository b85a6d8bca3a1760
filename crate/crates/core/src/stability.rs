//! Critical points of `V` and their local character.
//!
//! For a stationary diagonal target every critical point is a diagonal
//! rearrangement of the target spectrum. Around such a point the closed
//! loop in Bloch coordinates linearizes to `D = A0 + kappa A1 s0 sd^T A1`,
//! which vanishes on the Cartan block, so the dynamics live on the
//! off-diagonal block `B = B0 - u v^T`.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::feedback_control;
use crate::error::{Error, Result};
use crate::linalg::{
    adjoint_matrix, to_bloch, BlochVector, DensityMatrix, GeneratorBasis, RealMatrix, C64,
};
use crate::structure::ControlSystem;

pub const DEFAULT_MAX_N: usize = 6;
/// `|f(s0)|` above this is not a fixed point.
pub const FIXED_POINT_TOL: f64 = 1e-10;
/// Allowed coupling between the off-diagonal and Cartan blocks.
pub const LEAKAGE_TOL: f64 = 1e-10;
/// Real parts within `TOL_RE_REL * spectral radius` count as zero.
pub const TOL_RE_REL: f64 = 1e-7;
const STATIONARY_TOL: f64 = 1e-10;
/// Diagonal entries closer than this are treated as equal.
const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct CriticalPoint {
    /// `rho0 = diag(w[permutation[0]], ..., w[permutation[n-1]])`.
    pub permutation: Vec<usize>,
    pub rho0: DensityMatrix,
    pub critical_value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Classification {
    Sink,
    Source,
    Saddle,
    CentreBearing,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::Sink => "sink",
            Classification::Source => "source",
            Classification::Saddle => "saddle",
            Classification::CentreBearing => "centre_bearing",
        }
    }
}

/// Eigenvalue census of a linearization.
#[derive(Clone, Debug)]
pub struct EigenCensus {
    /// Sorted by real part, then imaginary part.
    pub eigenvalues: Vec<C64>,
    pub n_negative: usize,
    pub n_positive: usize,
    pub n_imaginary: usize,
    pub tol_re: f64,
}

impl EigenCensus {
    /// Classification after discounting `isotropy` eigenvalues that are
    /// known to sit on the imaginary axis for structural reasons.
    pub fn classify(&self, isotropy: usize) -> Classification {
        let tangent = self.eigenvalues.len() - isotropy;
        if self.n_imaginary > isotropy {
            Classification::CentreBearing
        } else if self.n_negative == tangent {
            Classification::Sink
        } else if self.n_positive == tangent {
            Classification::Source
        } else {
            Classification::Saddle
        }
    }
}

#[derive(Clone, Debug)]
pub struct FixedPointReport {
    pub point: CriticalPoint,
    pub eigenvalues: Vec<C64>,
    pub n_negative: usize,
    pub n_positive: usize,
    pub n_imaginary: usize,
    /// Imaginary-axis eigenvalues from root spaces in which `rho0` itself is
    /// degenerate. They are not directions on the state manifold.
    pub isotropy_imaginary: usize,
    /// Centre directions expected from target degeneracy:
    /// `2 sum_l C(n_l, 2)` away from the target, zero at it.
    pub expected_centre: usize,
    pub classification: Classification,
    pub stable_manifold_dim: usize,
    pub det_b: f64,
    pub det_b0: f64,
    pub tol_re: f64,
}

/// One critical point per distinct rearrangement of `spectrum_d`, from the
/// identity (`V = 0`) to the order-reversing arrangement (largest `V`).
pub fn enumerate_critical_points(spectrum_d: &[f64], max_n: usize) -> Result<Vec<CriticalPoint>> {
    let n = spectrum_d.len();
    if n < 2 {
        return Err(Error::DimensionTooSmall(n));
    }
    if n > max_n {
        return Err(Error::DimensionTooLarge { dim: n, max: max_n });
    }
    if spectrum_d.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let trace: f64 = spectrum_d.iter().sum();
    if (trace - 1.0).abs() > crate::linalg::tol::TRACE {
        return Err(Error::TraceNotOne {
            trace,
            defect: (trace - 1.0).abs(),
        });
    }
    // positions in descending order of value; equal values share a class
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| spectrum_d[j].total_cmp(&spectrum_d[i]));
    let mut class = vec![0usize; n];
    for j in 1..n {
        let same = (spectrum_d[order[j]] - spectrum_d[order[j - 1]]).abs() <= DEGENERACY_TOL;
        class[j] = class[j - 1] + usize::from(!same);
    }
    // members of each class, in original index order
    let n_classes = class[n - 1] + 1;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for j in 0..n {
        members[class[j]].push(order[j]);
    }
    for m in &mut members {
        m.sort_unstable();
    }

    let mut labels = class.clone();
    let mut out = Vec::new();
    loop {
        let mut next_member = vec![0usize; n_classes];
        let mut perm = vec![0usize; n];
        for j in 0..n {
            let c = labels[j];
            perm[order[j]] = members[c][next_member[c]];
            next_member[c] += 1;
        }
        let diag: Vec<f64> = perm.iter().map(|&p| spectrum_d[p]).collect();
        let critical_value = spectrum_d.iter().zip(&diag).map(|(w, p)| w * (w - p)).sum();
        out.push(CriticalPoint {
            permutation: perm,
            rho0: DensityMatrix::diagonal(&diag)?,
            critical_value,
        });
        if !next_permutation(&mut labels) {
            break;
        }
    }
    Ok(out)
}

/// Lexicographic successor; false once the sequence is non-increasing.
fn next_permutation(a: &mut [usize]) -> bool {
    let n = a.len();
    let Some(i) = (1..n).rev().find(|&i| a[i - 1] < a[i]) else {
        return false;
    };
    let j = (i..n)
        .rev()
        .find(|&j| a[j] > a[i - 1])
        .expect("pivot exists");
    a.swap(i - 1, j);
    a[i..].reverse();
    true
}

fn column(s: &BlochVector) -> DVector<f64> {
    s.as_vector()
}

/// `D_f(s0) = A0 + A1 s0 sd^T A1` at unit gain.
pub fn linearization(
    sys: &ControlSystem,
    s0: &BlochVector,
    sd: &BlochVector,
    basis: &GeneratorBasis,
) -> Result<RealMatrix> {
    linearization_with_gain(sys, s0, sd, basis, 1.0)
}

/// `D_f(s0) = A0 + kappa A1 s0 sd^T A1`.
pub fn linearization_with_gain(
    sys: &ControlSystem,
    s0: &BlochVector,
    sd: &BlochVector,
    basis: &GeneratorBasis,
    kappa: f64,
) -> Result<RealMatrix> {
    let a0 = adjoint_matrix(sys.h0(), basis)?;
    let a1 = adjoint_matrix(sys.h1(), basis)?;
    let s0v = column(s0);
    let sdv = column(sd);
    if s0v.len() != a0.ncols() || sdv.len() != a0.ncols() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            found: if s0v.len() != a0.ncols() {
                s0.dim_state()
            } else {
                sd.dim_state()
            },
        });
    }
    let left = &a1 * &s0v;
    let right = a1.transpose() * &sdv;
    // f(s) = kappa sd^T A1 s
    let residual = kappa * right.dot(&s0v);
    if residual.abs() > FIXED_POINT_TOL {
        return Err(Error::NotFixedPoint { residual });
    }
    Ok(a0 + left * right.transpose() * kappa)
}

/// Leading off-diagonal block of a full linearization.
pub fn restrict_to_tangent(dfull: &RealMatrix, basis: &GeneratorBasis) -> Result<RealMatrix> {
    let m = basis.n_offdiag();
    let total = basis.len();
    if dfull.nrows() != total || dfull.ncols() != total {
        return Err(Error::DimensionMismatch {
            expected: total,
            found: dfull.nrows(),
        });
    }
    let mut leak = 0.0f64;
    for i in 0..total {
        for j in 0..total {
            if i >= m || j >= m {
                leak = leak.max(dfull[(i, j)].abs());
            }
        }
    }
    if leak > LEAKAGE_TOL * dfull.amax().max(1.0) {
        return Err(Error::LeakageIntoCartan { leak });
    }
    Ok(dfull.view((0, 0), (m, m)).into_owned())
}

/// `TOL_RE_REL` times the spectral radius of `b`.
pub fn default_tol_re(b: &RealMatrix) -> f64 {
    let radius = b
        .complex_eigenvalues()
        .iter()
        .fold(0.0f64, |m, z| m.max(z.norm()));
    TOL_RE_REL * radius
}

/// Eigenvalues of `b` split by the sign of their real part.
pub fn classify_fixed_point(b: &RealMatrix, tol_re: f64) -> EigenCensus {
    let mut eigenvalues: Vec<C64> = b.complex_eigenvalues().iter().copied().collect();
    eigenvalues.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    let n_negative = eigenvalues.iter().filter(|z| z.re < -tol_re).count();
    let n_positive = eigenvalues.iter().filter(|z| z.re > tol_re).count();
    EigenCensus {
        n_imaginary: eigenvalues.len() - n_negative - n_positive,
        n_negative,
        n_positive,
        eigenvalues,
        tol_re,
    }
}

/// Unit eigenvector of the real matrix `b` for the (complex) eigenvalue
/// `lambda`, from the smallest singular vector of `b - lambda I`. Returns
/// the vector and the residual `|(b - lambda) v|`.
pub fn eigenvector(b: &RealMatrix, lambda: C64) -> (DVector<C64>, f64) {
    let m = b.nrows();
    let shifted = DMatrix::from_fn(m, m, |i, j| {
        C64::new(b[(i, j)], 0.0) - if i == j { lambda } else { C64::new(0.0, 0.0) }
    });
    let svd = shifted.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let v: DVector<C64> = v_t.row(k).adjoint();
    let residual = (&shifted * &v).norm();
    (v, residual)
}

/// Number of level pairs on which the diagonal of `rho` is degenerate.
fn degenerate_pairs(diag: &[f64]) -> usize {
    let n = diag.len();
    (0..n)
        .flat_map(|k| ((k + 1)..n).map(move |l| (k, l)))
        .filter(|&(k, l)| (diag[k] - diag[l]).abs() <= DEGENERACY_TOL)
        .count()
}

/// Linearization census at every critical point of a stationary diagonal
/// target.
pub fn stability_survey(
    sys: &ControlSystem,
    rho_d: &DensityMatrix,
    basis: &GeneratorBasis,
) -> Result<Vec<FixedPointReport>> {
    stability_survey_with_gain(sys, rho_d, basis, 1.0)
}

pub fn stability_survey_with_gain(
    sys: &ControlSystem,
    rho_d: &DensityMatrix,
    basis: &GeneratorBasis,
    kappa: f64,
) -> Result<Vec<FixedPointReport>> {
    let defect = sys.stationarity_defect(rho_d)?;
    if defect > STATIONARY_TOL {
        return Err(Error::NotStationary { defect });
    }
    if rho_d.matrix().max_offdiag() > STATIONARY_TOL {
        return Err(Error::InvalidSystem(
            "stationary target must be diagonal in the drift eigenbasis".into(),
        ));
    }
    let w: Vec<f64> = rho_d.matrix().diagonal().iter().map(|z| z.re).collect();
    let points = enumerate_critical_points(&w, DEFAULT_MAX_N)?;
    let sd = to_bloch(rho_d, basis)?;
    let a0 = adjoint_matrix(sys.h0(), basis)?;
    let b0 = restrict_to_tangent(&a0, basis)?;
    let det_b0 = b0.determinant();
    let target_degenerate = degenerate_pairs(&w);

    let reports = crate::exec::map(&points, |point| -> Result<FixedPointReport> {
        debug_assert!(feedback_control(&point.rho0, rho_d, sys, kappa)?.abs() <= FIXED_POINT_TOL);
        let s0 = to_bloch(&point.rho0, basis)?;
        let d = linearization_with_gain(sys, &s0, &sd, basis, kappa)?;
        let b = restrict_to_tangent(&d, basis)?;
        let tol_re = default_tol_re(&b);
        let census = classify_fixed_point(&b, tol_re);
        let p: Vec<f64> = point
            .rho0
            .matrix()
            .diagonal()
            .iter()
            .map(|z| z.re)
            .collect();
        let isotropy = 2 * degenerate_pairs(&p);
        let at_target = point.critical_value.abs() <= DEGENERACY_TOL;
        let classification = census.classify(isotropy);
        Ok(FixedPointReport {
            point: point.clone(),
            n_negative: census.n_negative,
            n_positive: census.n_positive,
            n_imaginary: census.n_imaginary,
            isotropy_imaginary: isotropy,
            expected_centre: if at_target { 0 } else { 2 * target_degenerate },
            classification,
            stable_manifold_dim: census.n_negative,
            det_b: b.determinant(),
            det_b0,
            tol_re,
            eigenvalues: census.eigenvalues,
        })
    });
    reports.into_iter().collect()
}

/// Dimension of the state manifold at a diagonal point: `n^2 - n` minus the
/// directions of the root spaces on which the point is degenerate.
pub fn tangent_dimension(rho0: &DensityMatrix) -> usize {
    let p: Vec<f64> = rho0.matrix().diagonal().iter().map(|z| z.re).collect();
    let n = p.len();
    n * n - n - 2 * degenerate_pairs(&p)
}

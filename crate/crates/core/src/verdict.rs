//! Machine verdicts for finished runs.
//!
//! Thresholds: a run tracks its target (or the target's orbit) when the mean
//! distance over the final tenth of the samples is at most
//! `1e-3 * sqrt(2 V_max)`. The interaction-picture endpoint is matched
//! against the permutation states of the initial target within `1e-3`.

use nalgebra::DMatrix;

use crate::dynamics::{
    distance_to_orbit, distance_to_target, interaction_picture, lyapunov_max, tail_mean,
    tail_window, OrbitDistance, Trajectory,
};
use crate::error::{Error, Result};
use crate::linalg::{eigen_decomposition, hermitian_eigh, DensityMatrix, C64};
use crate::stability::{enumerate_critical_points, DEFAULT_MAX_N};
use crate::structure::ControlSystem;

pub const THRESHOLD_REL: f64 = 1e-3;
pub const TAIL_FRACTION: f64 = 0.1;
pub const ENDPOINT_TOL: f64 = 1e-3;
/// Eigenvalues of the target closer than this share an eigenspace.
const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Verdict {
    TrajectoryConverged,
    OrbitConvergedOnly,
    ConvergedToSaddle,
    NonConverged,
}

impl Verdict {
    pub const ALL: [Verdict; 4] = [
        Verdict::TrajectoryConverged,
        Verdict::OrbitConvergedOnly,
        Verdict::ConvergedToSaddle,
        Verdict::NonConverged,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::TrajectoryConverged => "trajectory_converged",
            Verdict::OrbitConvergedOnly => "orbit_converged_only",
            Verdict::ConvergedToSaddle => "converged_to_saddle",
            Verdict::NonConverged => "non_converged",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Permutation state of the initial target closest to a given state.
#[derive(Clone, Debug)]
pub struct EndpointMatch {
    /// Index into `enumerate_critical_points` of the target spectrum
    /// (non-increasing); 0 is the target itself.
    pub index: usize,
    pub permutation: Vec<usize>,
    pub distance: f64,
}

#[derive(Clone, Debug)]
pub struct Assessment {
    pub verdict: Verdict,
    pub threshold: f64,
    pub final_v: f64,
    pub final_distance: f64,
    pub final_orbit_distance: f64,
    pub tail_distance: f64,
    pub tail_orbit_distance: f64,
    /// Set when the interaction-picture endpoint is within `ENDPOINT_TOL`
    /// of a permutation state.
    pub limiting_permutation: Option<usize>,
    pub endpoint: EndpointMatch,
    pub distances: Vec<f64>,
    pub orbit: OrbitDistance,
}

/// `THRESHOLD_REL * sqrt(2 V_max)` for a target spectrum.
pub fn convergence_threshold(spectrum: &[f64]) -> f64 {
    THRESHOLD_REL * (2.0 * lyapunov_max(spectrum)).sqrt()
}

/// Precomputed permutation states `U' diag(w_tau) U'^dagger` of a target,
/// where `U'` diagonalizes the probe inside each degenerate eigenspace of
/// the target, so the match does not depend on the eigenbasis chosen there.
pub struct PermutationMatcher {
    spectrum: Vec<f64>,
    u: DMatrix<C64>,
    blocks: Vec<std::ops::Range<usize>>,
    permutations: Vec<Vec<usize>>,
}

impl PermutationMatcher {
    pub fn new(target: &DensityMatrix) -> Result<Self> {
        let (spectrum, u) = eigen_decomposition(target);
        let points = enumerate_critical_points(&spectrum, DEFAULT_MAX_N.max(spectrum.len()))?;
        let mut blocks = Vec::new();
        let mut start = 0;
        for k in 1..=spectrum.len() {
            if k == spectrum.len() || (spectrum[k - 1] - spectrum[k]).abs() > DEGENERACY_TOL {
                blocks.push(start..k);
                start = k;
            }
        }
        Ok(Self {
            spectrum,
            u: u.into_inner(),
            blocks,
            permutations: points.into_iter().map(|p| p.permutation).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.permutations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutations.is_empty()
    }

    pub fn nearest(&self, rho: &DensityMatrix) -> Result<EndpointMatch> {
        let n = self.spectrum.len();
        if rho.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: rho.dim(),
            });
        }
        let m = self.u.adjoint() * rho.matrix().inner() * &self.u;
        // rotate each degenerate block to the probe's own eigenbasis there
        let mut rot = DMatrix::<C64>::zeros(n, n);
        for b in &self.blocks {
            let sub = m.view((b.start, b.start), (b.len(), b.len())).into_owned();
            let (_, v) = hermitian_eigh(&sub);
            rot.view_mut((b.start, b.start), (b.len(), b.len()))
                .copy_from(&v);
        }
        let local = rot.adjoint() * m * &rot;
        let mut best: Option<EndpointMatch> = None;
        for (index, perm) in self.permutations.iter().enumerate() {
            let mut values: Vec<f64> = perm.iter().map(|&p| self.spectrum[p]).collect();
            for b in &self.blocks {
                values[b.clone()].sort_by(|x, y| y.total_cmp(x));
            }
            let mut d2 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let diag = if i == j { values[i] } else { 0.0 };
                    d2 += (local[(i, j)] - C64::new(diag, 0.0)).norm_sqr();
                }
            }
            let distance = d2.sqrt();
            if best.as_ref().is_none_or(|b| distance < b.distance) {
                best = Some(EndpointMatch {
                    index,
                    permutation: perm.clone(),
                    distance,
                });
            }
        }
        Ok(best.expect("at least the identity permutation"))
    }
}

/// Verdict precedence: trajectory tracking, then orbit tracking, then a
/// settled endpoint at a permutation state other than the target.
pub fn assess(traj: &Trajectory, sys: &ControlSystem, orbit_samples: usize) -> Result<Assessment> {
    if traj.is_empty() {
        return Err(Error::ConfigInvalid("empty trajectory".into()));
    }
    let target0 = &traj.rho_d()[0];
    let threshold = convergence_threshold(&crate::linalg::spectrum(target0));
    let distances = distance_to_target(traj);
    let orbit = distance_to_orbit(traj, sys, orbit_samples)?;
    let tail_distance = tail_mean(&distances, TAIL_FRACTION);
    let tail_orbit_distance = tail_mean(&orbit.distances, TAIL_FRACTION);

    let matcher = PermutationMatcher::new(target0)?;
    let frame = interaction_picture(traj, sys);
    let endpoint = matcher.nearest(frame.final_rho())?;
    let limiting_permutation = (endpoint.distance <= ENDPOINT_TOL).then_some(endpoint.index);
    // settled: the whole tail window sits at the same permutation state
    let settled = limiting_permutation.is_some()
        && tail_window(frame.len(), TAIL_FRACTION).all(|i| {
            matcher
                .nearest(&frame.rho()[i])
                .map(|m| m.index == endpoint.index && m.distance <= ENDPOINT_TOL)
                .unwrap_or(false)
        });

    let verdict = if tail_distance <= threshold {
        Verdict::TrajectoryConverged
    } else if tail_orbit_distance <= threshold {
        Verdict::OrbitConvergedOnly
    } else if settled && endpoint.index != 0 {
        Verdict::ConvergedToSaddle
    } else {
        Verdict::NonConverged
    };
    let last = distances.len() - 1;
    Ok(Assessment {
        verdict,
        threshold,
        final_v: traj.lyapunov()[last],
        final_distance: distances[last],
        final_orbit_distance: orbit.distances[last],
        tail_distance,
        tail_orbit_distance,
        limiting_permutation,
        endpoint,
        distances,
        orbit,
    })
}

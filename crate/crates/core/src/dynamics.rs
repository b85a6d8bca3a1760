//! Closed-loop evolution of the plant/target pair under the feedback
//! `f = kappa Tr(rho_d [-i H1, rho])`.
//!
//! Each step freezes `f` at the current state and conjugates the plant by
//! the exact propagator `exp(-i (H0 + f H1) dt)`; the target follows its
//! free evolution in closed form. Both spectra are therefore conserved to
//! roundoff, and `V` can only rise through the piecewise-constant control,
//! which the step-refinement loop removes.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{
    commutator, hermitian_propagator, spectrum, spectrum_distance, ComplexMatrix, DensityMatrix,
    C64,
};
use crate::structure::ControlSystem;

/// Maximum number of step halvings before a step is rejected.
pub const MAX_HALVINGS: u32 = 20;
/// Resolution guard: `dt * max|omega|` above this triggers a warning.
pub const RESOLUTION_GUARD: f64 = 0.1;
/// Allowed `V` increase per step, in units of the base step.
pub const MONOTONE_REL: f64 = 1e-9;
/// Largest denominator tried when searching a common period.
const MAX_PERIOD_DENOMINATOR: u64 = 1000;
const COMMENSURATE_TOL: f64 = 1e-9;
/// Off-diagonal target entries below this do not contribute a frequency.
const ACTIVE_COHERENCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationConfig {
    pub dt: f64,
    pub t_final: f64,
    pub kappa: f64,
    pub record_stride: usize,
    pub orbit_samples: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_final: 100.0,
            kappa: 1.0,
            record_stride: 10,
            orbit_samples: 256,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::ConfigInvalid(m.to_string()));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if !(self.t_final.is_finite() && self.t_final >= self.dt) {
            return bad("t_final must be at least dt");
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return bad("kappa must be positive");
        }
        if self.record_stride == 0 {
            return bad("record_stride must be at least 1");
        }
        if self.orbit_samples < 16 {
            return bad("orbit_samples must be at least 16");
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        ((self.t_final / self.dt).round() as usize).max(1)
    }

    /// `MONOTONE_REL * dt`.
    pub fn tol_mono(&self) -> f64 {
        MONOTONE_REL * self.dt
    }
}

/// Recorded samples of a closed-loop run. All vectors have equal length.
#[derive(Clone, Debug)]
pub struct Trajectory {
    times: Vec<f64>,
    rho: Vec<DensityMatrix>,
    rho_d: Vec<DensityMatrix>,
    control: Vec<f64>,
    lyapunov: Vec<f64>,
    refined_steps: usize,
    max_step_increase: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn rho(&self) -> &[DensityMatrix] {
        &self.rho
    }

    pub fn rho_d(&self) -> &[DensityMatrix] {
        &self.rho_d
    }

    /// Control value applied on the step starting at each sample. The last
    /// entry is the feedback at the final state.
    pub fn control(&self) -> &[f64] {
        &self.control
    }

    pub fn lyapunov(&self) -> &[f64] {
        &self.lyapunov
    }

    /// Steps that needed sub-stepping to keep `V` monotone.
    pub fn refined_steps(&self) -> usize {
        self.refined_steps
    }

    /// Largest `V(t + dt) - V(t)` over every integration step, recorded or
    /// not.
    pub fn max_step_increase(&self) -> f64 {
        self.max_step_increase
    }

    pub fn final_rho(&self) -> &DensityMatrix {
        self.rho.last().expect("trajectory is never empty")
    }

    pub fn final_rho_d(&self) -> &DensityMatrix {
        self.rho_d.last().expect("trajectory is never empty")
    }

    /// Largest spectral drift of either component from its initial value.
    pub fn max_spectrum_drift(&self) -> f64 {
        let s0 = spectrum(&self.rho[0]);
        let d0 = spectrum(&self.rho_d[0]);
        let a = self
            .rho
            .iter()
            .map(|r| spectrum_distance(&spectrum(r), &s0))
            .fold(0.0, f64::max);
        let b = self
            .rho_d
            .iter()
            .map(|r| spectrum_distance(&spectrum(r), &d0))
            .fold(0.0, f64::max);
        a.max(b)
    }
}

fn check_dims(sys: &ControlSystem, a: &DensityMatrix, b: &DensityMatrix) -> Result<()> {
    for d in [a.dim(), b.dim()] {
        if d != sys.dim() {
            return Err(Error::DimensionMismatch {
                expected: sys.dim(),
                found: d,
            });
        }
    }
    Ok(())
}

/// `kappa Tr(rho_d [-i H1, rho])`.
pub fn feedback_control(
    rho: &DensityMatrix,
    rho_d: &DensityMatrix,
    sys: &ControlSystem,
    kappa: f64,
) -> Result<f64> {
    check_dims(sys, rho, rho_d)?;
    let b0 = sys.h1().scale(C64::new(0.0, -1.0));
    let c = commutator(&b0, rho.matrix())?;
    let v = (rho_d.matrix() * &c).trace() * kappa;
    let scale = kappa * sys.h1().norm().max(1.0);
    debug_assert!(
        v.im.abs() <= 1e-12 * scale,
        "feedback has imaginary part {}",
        v.im
    );
    Ok(v.re)
}

/// `2 kappa Im Tr(rho_d H1 rho)`, the same quantity without the commutator.
fn feedback_fast(rho: &DMatrix<C64>, rho_d: &DMatrix<C64>, h1: &DMatrix<C64>, kappa: f64) -> f64 {
    let x = rho_d * h1;
    let n = rho.nrows();
    let mut tr = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            tr += x[(i, j)] * rho[(j, i)];
        }
    }
    2.0 * kappa * tr.im
}

/// `0.5 |rho - rho_d|^2` in the Hilbert-Schmidt norm.
pub fn lyapunov_value(rho: &DensityMatrix, rho_d: &DensityMatrix) -> Result<f64> {
    if rho.dim() != rho_d.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho_d.dim(),
            found: rho.dim(),
        });
    }
    Ok(half_sq_dist(rho.matrix().inner(), rho_d.matrix().inner()))
}

fn half_sq_dist(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    0.5 * a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
}

/// Largest critical value of `V` for a target spectrum: pair the largest
/// eigenvalue with the smallest and so on.
pub fn lyapunov_max(spectrum: &[f64]) -> f64 {
    let mut w = spectrum.to_vec();
    w.sort_by(|a, b| b.total_cmp(a));
    let n = w.len();
    (0..n).map(|k| w[k] * (w[k] - w[n - 1 - k])).sum()
}

/// `e^{-i H0 t} m e^{i H0 t}` for the diagonal drift, entrywise.
fn free_evolve(m: &DMatrix<C64>, levels: &[f64], t: f64) -> DMatrix<C64> {
    let n = m.nrows();
    DMatrix::from_fn(n, n, |k, l| {
        if k == l {
            m[(k, l)]
        } else {
            m[(k, l)] * C64::from_polar(1.0, -(levels[k] - levels[l]) * t)
        }
    })
}

fn conjugate(u: &DMatrix<C64>, m: &DMatrix<C64>) -> DMatrix<C64> {
    let x = u * m * u.adjoint();
    (&x + x.adjoint()) * C64::new(0.5, 0.0)
}

struct Stepper<'a> {
    sys: &'a ControlSystem,
    h0: &'a DMatrix<C64>,
    h1: &'a DMatrix<C64>,
    rho_d0: &'a DMatrix<C64>,
    kappa: f64,
}

impl Stepper<'_> {
    fn target(&self, t: f64) -> DMatrix<C64> {
        free_evolve(self.rho_d0, self.sys.levels(), t)
    }

    /// One frozen-control step of length `h` starting at time `t`.
    fn step(&self, rho: &DMatrix<C64>, t: f64, h: f64) -> (DMatrix<C64>, f64) {
        let f = feedback_fast(rho, &self.target(t), self.h1, self.kappa);
        if f == 0.0 {
            return (free_evolve(rho, self.sys.levels(), h), f);
        }
        let ham = self.h0 + self.h1 * C64::new(f, 0.0);
        let u = hermitian_propagator(&ham, h);
        (conjugate(&u, rho), f)
    }

    /// `2^k` equal sub-steps covering `[t, t + dt]`.
    fn substeps(&self, rho: &DMatrix<C64>, t: f64, dt: f64, k: u32) -> DMatrix<C64> {
        let parts = 1u64 << k;
        let h = dt / parts as f64;
        let mut r = rho.clone();
        for j in 0..parts {
            r = self.step(&r, t + j as f64 * h, h).0;
        }
        r
    }
}

/// Integrates the closed loop from `(rho0, rho_d0)` up to `cfg.t_final`.
pub fn simulate(
    sys: &ControlSystem,
    rho0: &DensityMatrix,
    rho_d0: &DensityMatrix,
    cfg: &SimulationConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    check_dims(sys, rho0, rho_d0)?;
    let resolution = cfg.dt * sys.max_frequency();
    if resolution > RESOLUTION_GUARD {
        log::warn!("dt * max|omega| = {resolution:.3} exceeds {RESOLUTION_GUARD}");
    }
    let gap = spectrum_distance(&spectrum(rho0), &spectrum(rho_d0));
    if gap > crate::structure::ISOSPECTRAL_TOL {
        log::warn!("initial state and target are not isospectral (gap {gap:e})");
    }

    let stepper = Stepper {
        sys,
        h0: sys.h0().inner(),
        h1: sys.h1().inner(),
        rho_d0: rho_d0.matrix().inner(),
        kappa: cfg.kappa,
    };
    let n_steps = cfg.n_steps();
    let tol_mono = cfg.tol_mono();
    let capacity = n_steps / cfg.record_stride + 2;
    let mut traj = Trajectory {
        times: Vec::with_capacity(capacity),
        rho: Vec::with_capacity(capacity),
        rho_d: Vec::with_capacity(capacity),
        control: Vec::with_capacity(capacity),
        lyapunov: Vec::with_capacity(capacity),
        refined_steps: 0,
        max_step_increase: f64::NEG_INFINITY,
    };

    let mut rho = rho0.matrix().inner().clone();
    let mut rho_d = stepper.target(0.0);
    let mut v = half_sq_dist(&rho, &rho_d);
    let record =
        |traj: &mut Trajectory, t: f64, r: &DMatrix<C64>, d: &DMatrix<C64>, f: f64, v: f64| {
            traj.times.push(t);
            traj.rho
                .push(DensityMatrix::from_trusted(ComplexMatrix::from_inner(
                    r.clone(),
                )));
            traj.rho_d
                .push(DensityMatrix::from_trusted(ComplexMatrix::from_inner(
                    d.clone(),
                )));
            traj.control.push(f);
            traj.lyapunov.push(v);
        };

    for i in 0..n_steps {
        let t = i as f64 * cfg.dt;
        let t_next = (i + 1) as f64 * cfg.dt;
        let (mut next, f) = stepper.step(&rho, t, cfg.dt);
        if i % cfg.record_stride == 0 {
            record(&mut traj, t, &rho, &rho_d, f, v);
        }
        let next_d = stepper.target(t_next);
        let mut v_next = half_sq_dist(&next, &next_d);
        if v_next > v + tol_mono {
            let mut accepted = false;
            for k in 1..=MAX_HALVINGS {
                next = stepper.substeps(&rho, t, cfg.dt, k);
                v_next = half_sq_dist(&next, &next_d);
                if v_next <= v + tol_mono {
                    log::debug!("step at t = {t} refined with {k} halvings");
                    accepted = true;
                    break;
                }
            }
            if !accepted {
                return Err(Error::StepRejected {
                    time: t,
                    halvings: MAX_HALVINGS,
                    increase: v_next - v,
                });
            }
            traj.refined_steps += 1;
        }
        traj.max_step_increase = traj.max_step_increase.max(v_next - v);
        rho = next;
        rho_d = next_d;
        v = v_next;
    }
    let t_end = n_steps as f64 * cfg.dt;
    if traj.times.last() != Some(&t_end) {
        let f = feedback_fast(&rho, &rho_d, stepper.h1, cfg.kappa);
        record(&mut traj, t_end, &rho, &rho_d, f, v);
    }
    Ok(traj)
}

/// `|rho(t_i) - rho_d(t_i)|` per sample.
pub fn distance_to_target(traj: &Trajectory) -> Vec<f64> {
    traj.rho
        .iter()
        .zip(&traj.rho_d)
        .map(|(a, b)| (2.0 * half_sq_dist(a.matrix().inner(), b.matrix().inner())).sqrt())
        .collect()
}

const NODES_PER_CYCLE: usize = 32;
const MAX_ORBIT_NODES: usize = 1 << 16;
const REFINED_NODES: usize = 4;

/// Distance of each sample to the free orbit of the initial target.
#[derive(Clone, Debug)]
pub struct OrbitDistance {
    pub distances: Vec<f64>,
    /// Length of the parameter window sampled; zero for a point orbit.
    pub period: f64,
    /// Whether `period` is an exact common period of the orbit.
    pub periodic: bool,
    /// Upper bound on the error of the grid minimum before refinement.
    pub grid_bound: f64,
}

/// Common period of the frequencies, if they are commensurate with small
/// denominators.
fn common_period(freqs: &[f64]) -> Option<f64> {
    let base = freqs.iter().cloned().fold(f64::INFINITY, f64::min);
    'denominators: for q in 1..=MAX_PERIOD_DENOMINATOR {
        let mut g = q;
        for &w in freqs {
            let x = w / base * q as f64;
            let p = x.round();
            if p < 1.0 || (x - p).abs() > COMMENSURATE_TOL * x.max(1.0) {
                continue 'denominators;
            }
            g = gcd(g, p as u64);
        }
        return Some(2.0 * PI * q as f64 / (base * g as f64));
    }
    None
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Golden-section minimization of `f` on `[a, b]`.
fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    fc.min(fd)
}

/// Minimum over the free orbit `e^{-i H0 tau} rho_d(0) e^{i H0 tau}` of the
/// distance to each sample. The uniform grid has at least `samples` nodes and
/// enough to resolve the fastest frequency; the best few nodes are refined.
/// Without a common period the window is the run's time span.
pub fn distance_to_orbit(
    traj: &Trajectory,
    sys: &ControlSystem,
    samples: usize,
) -> Result<OrbitDistance> {
    if samples < 16 {
        return Err(Error::ConfigInvalid(
            "orbit_samples must be at least 16".into(),
        ));
    }
    let d0 = traj.rho_d[0].matrix().inner();
    let n = d0.nrows();
    let levels = sys.levels();
    let mut freqs = Vec::new();
    for k in 0..n {
        for l in (k + 1)..n {
            let w = (levels[l] - levels[k]).abs();
            if d0[(k, l)].norm() > ACTIVE_COHERENCE && w > 0.0 {
                freqs.push(w);
            }
        }
    }
    if freqs.is_empty() {
        return Ok(OrbitDistance {
            distances: traj
                .rho
                .iter()
                .map(|r| (2.0 * half_sq_dist(r.matrix().inner(), d0)).sqrt())
                .collect(),
            period: 0.0,
            periodic: true,
            grid_bound: 0.0,
        });
    }
    let wmax = freqs.iter().cloned().fold(0.0, f64::max);
    let wmin = freqs.iter().cloned().fold(f64::INFINITY, f64::min);
    let span = traj.times.last().copied().unwrap_or(0.0);
    let (period, periodic) = match common_period(&freqs) {
        Some(t) => (t, true),
        None => (span.max(2.0 * PI / wmin), false),
    };
    // Node spacing resolves the fastest frequency; refinement then stays in
    // the right basin.
    let needed = (period * wmax / (2.0 * PI) * NODES_PER_CYCLE as f64).ceil() as usize;
    let nodes = samples.max(needed).min(MAX_ORBIT_NODES);
    let speed = commutator(sys.h0(), traj.rho_d[0].matrix())?.norm();
    let step = period / nodes as f64;
    let grid: Vec<DMatrix<C64>> = (0..nodes)
        .map(|j| free_evolve(d0, levels, j as f64 * step))
        .collect();
    let distances = traj
        .rho
        .iter()
        .zip(&traj.rho_d)
        .map(|(r, own)| {
            let r = r.matrix().inner();
            let mut scored: Vec<(usize, f64)> = grid
                .iter()
                .enumerate()
                .map(|(j, g)| (j, half_sq_dist(r, g)))
                .collect();
            let keep = REFINED_NODES.min(scored.len());
            scored.select_nth_unstable_by(keep - 1, |a, b| a.1.total_cmp(&b.1));
            // The run's own target is an orbit point.
            let mut best = half_sq_dist(r, own.matrix().inner());
            for &(j, d2) in &scored[..keep] {
                let tau = j as f64 * step;
                let refined = golden_min(
                    |s| half_sq_dist(r, &free_evolve(d0, levels, s)),
                    tau - step,
                    tau + step,
                    40,
                );
                best = best.min(d2).min(refined);
            }
            (2.0 * best).sqrt()
        })
        .collect();
    Ok(OrbitDistance {
        distances,
        period,
        periodic,
        grid_bound: speed * step / 2.0,
    })
}

/// The run seen in the frame rotating with the drift:
/// `rho -> e^{i H0 t} rho e^{-i H0 t}`, same for the target. `V` is
/// recomputed from the transformed states.
pub fn interaction_picture(traj: &Trajectory, sys: &ControlSystem) -> Trajectory {
    let levels = sys.levels();
    let back = |m: &DensityMatrix, t: f64| {
        DensityMatrix::from_trusted(ComplexMatrix::from_inner(free_evolve(
            m.matrix().inner(),
            levels,
            -t,
        )))
    };
    let rho: Vec<DensityMatrix> = traj
        .rho
        .iter()
        .zip(&traj.times)
        .map(|(m, &t)| back(m, t))
        .collect();
    let rho_d: Vec<DensityMatrix> = traj
        .rho_d
        .iter()
        .zip(&traj.times)
        .map(|(m, &t)| back(m, t))
        .collect();
    let lyapunov = rho
        .iter()
        .zip(&rho_d)
        .map(|(a, b)| half_sq_dist(a.matrix().inner(), b.matrix().inner()))
        .collect();
    Trajectory {
        times: traj.times.clone(),
        rho,
        rho_d,
        control: traj.control.clone(),
        lyapunov,
        refined_steps: traj.refined_steps,
        max_step_increase: traj.max_step_increase,
    }
}

/// Indices of the trailing `fraction` of samples (at least one).
pub fn tail_window(len: usize, fraction: f64) -> std::ops::Range<usize> {
    let w = ((len as f64 * fraction).ceil() as usize).clamp(1, len.max(1));
    len.saturating_sub(w)..len
}

/// Mean of the trailing `fraction` of `values`.
pub fn tail_mean(values: &[f64], fraction: f64) -> f64 {
    let r = tail_window(values.len(), fraction);
    let n = r.len() as f64;
    values[r].iter().sum::<f64>() / n
}

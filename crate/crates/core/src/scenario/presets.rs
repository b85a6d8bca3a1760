//! The fixed preset library: one scenario per worked case.

use std::f64::consts::FRAC_1_SQRT_2;

use super::config::{
    complex, InitialSpec, MatrixSpec, Real, ScenarioConfig, SimSpec, SystemSpec, TargetSpec,
};
use crate::error::{Error, Result};
use crate::linalg::C64;

pub struct PresetInfo {
    pub name: &'static str,
    pub summary: &'static str,
}

pub const PRESETS: [PresetInfo; 10] = [
    PresetInfo {
        name: "two_level_generic",
        summary: "qubit, mixed target off the equatorial plane; every start except the antipode tracks the target trajectory",
    },
    PresetInfo {
        name: "two_level_equatorial",
        summary: "qubit, pure target on the equatorial plane; starts reach the target's orbit but settle at a phase offset",
    },
    PresetInfo {
        name: "pseudo_pure_generic",
        summary: "qutrit, pseudo-pure target with all three amplitudes nonzero; trajectory tracking",
    },
    PresetInfo {
        name: "pseudo_pure_exceptional",
        summary: "qutrit, pseudo-pure target with a vanishing amplitude; runs lock onto phase-shifted copies of the target, tracking the orbit only",
    },
    PresetInfo {
        name: "qutrit_generic_stationary",
        summary: "ideal qutrit, stationary target diag(1/2, 1/3, 1/6); one sink, one source, four saddles",
    },
    PresetInfo {
        name: "qutrit_generic_nonstationary",
        summary: "ideal qutrit, generic target rotated by a fixed Haar unitary; interaction-picture endpoint at the identity permutation",
    },
    PresetInfo {
        name: "qutrit_nonstationary_exception",
        summary: "ideal qutrit, non-commuting start/target pair whose commutator is diagonal; V stays constant",
    },
    PresetInfo {
        name: "qutrit_degenerate_target",
        summary: "ideal qutrit, target diag(1/4, 1/4, 1/2) with a repeated eigenvalue; the other critical points carry centre directions",
    },
    PresetInfo {
        name: "qutrit_nonideal_h1",
        summary: "qutrit with nearest-neighbour coupling only (b13 = 0); the (1,3) root space is missing from the bracket span",
    },
    PresetInfo {
        name: "qutrit_nonideal_h0",
        summary: "qutrit with equally spaced levels (0, 1, 2); two transitions share a frequency",
    },
];

pub const QUTRIT_LEVELS: [f64; 3] = [0.0, 1.0, 2.7];
/// Couplings `(b12, b13, b23)` of the ideal qutrit presets.
pub const QUTRIT_COUPLINGS: [f64; 3] = [3.0, 2.4, 3.0];
const PSEUDO_PURE_COUPLINGS: [f64; 3] = [2.0, 1.6, 2.0];
const EQUATORIAL_COUPLING: f64 = 3.0;
/// Haar seed fixing the eigenbasis of the non-stationary generic target.
const NONSTATIONARY_BASIS_SEED: u64 = 7;

fn reals(xs: &[f64]) -> Vec<Real> {
    xs.iter().copied().map(Real).collect()
}

fn system(levels: &[f64], couplings: &[C64]) -> SystemSpec {
    SystemSpec {
        levels: reals(levels),
        couplings: couplings.iter().copied().map(complex).collect(),
    }
}

fn real_couplings(b: &[f64]) -> Vec<C64> {
    b.iter().map(|&x| C64::new(x, 0.0)).collect()
}

fn sim(t_final: f64, record_stride: usize) -> SimSpec {
    SimSpec {
        dt: Some(Real(1e-3)),
        t_final: Some(Real(t_final)),
        kappa: Some(Real(1.0)),
        record_stride: Some(record_stride),
        orbit_samples: Some(256),
    }
}

fn matrix(rows: &[[C64; 3]]) -> MatrixSpec {
    rows.iter()
        .map(|r| r.iter().copied().map(complex).collect())
        .collect()
}

/// Start/target pair with `[rho1, rho2] = (11i/144) diag(0, 1, -1)`.
pub fn exception_pair() -> (MatrixSpec, MatrixSpec) {
    let r = |x: f64| C64::new(x, 0.0);
    let i = |x: f64| C64::new(0.0, x);
    let a = 1.0 / 12.0;
    let rho1 = matrix(&[
        [r(a), r(-a), r(-a)],
        [r(-a), r(11.0 / 24.0), r(1.0 / 8.0)],
        [r(-a), r(1.0 / 8.0), r(11.0 / 24.0)],
    ]);
    let t = r(1.0 / 3.0);
    let rho2 = matrix(&[[t, i(-a), i(a)], [i(a), t, i(-0.25)], [i(-a), i(0.25), t]]);
    (rho1, rho2)
}

fn pseudo_pure(w: f64, u: f64, vector: &[C64]) -> TargetSpec {
    TargetSpec::PseudoPure {
        w: Real(w),
        u: Real(u),
        vector: vector.iter().copied().map(complex).collect(),
    }
}

/// The configuration behind a preset name.
pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let qutrit = || system(&QUTRIT_LEVELS, &real_couplings(&QUTRIT_COUPLINGS));
    let generic = || TargetSpec::Diagonal {
        spectrum: reals(&[0.5, 1.0 / 3.0, 1.0 / 6.0]),
    };
    let qubit = |b: f64| system(&[0.0, 1.0], &[C64::new(b, 0.0)]);
    let (system, target, initial, sim) = match name {
        "two_level_generic" => (
            qubit(1.0),
            pseudo_pure(
                0.9,
                0.1,
                &[
                    C64::new(0.5f64.cos(), 0.0),
                    C64::from_polar(0.5f64.sin(), 0.3),
                ],
            ),
            None,
            sim(60.0, 100),
        ),
        "two_level_equatorial" => (
            qubit(EQUATORIAL_COUPLING),
            pseudo_pure(
                1.0,
                0.0,
                &[
                    C64::new(FRAC_1_SQRT_2, 0.0),
                    C64::from_polar(FRAC_1_SQRT_2, 0.3),
                ],
            ),
            None,
            sim(60.0, 100),
        ),
        "pseudo_pure_generic" => (
            system(&QUTRIT_LEVELS, &real_couplings(&PSEUDO_PURE_COUPLINGS)),
            pseudo_pure(
                0.9,
                0.05,
                &[
                    C64::new(2.0 / 3.0, 0.0),
                    C64::from_polar(1.0 / 3.0, 0.6),
                    C64::from_polar(2.0 / 3.0, -1.1),
                ],
            ),
            None,
            sim(150.0, 100),
        ),
        "pseudo_pure_exceptional" => (
            system(&QUTRIT_LEVELS, &real_couplings(&PSEUDO_PURE_COUPLINGS)),
            pseudo_pure(
                0.9,
                0.05,
                &[
                    C64::new(FRAC_1_SQRT_2, 0.0),
                    C64::from_polar(FRAC_1_SQRT_2, 0.6),
                    C64::new(0.0, 0.0),
                ],
            ),
            None,
            sim(250.0, 100),
        ),
        "qutrit_generic_stationary" => (qutrit(), generic(), None, sim(60.0, 100)),
        "qutrit_generic_nonstationary" => (
            qutrit(),
            TargetSpec::Haar {
                spectrum: reals(&[0.5, 1.0 / 3.0, 1.0 / 6.0]),
                seed: NONSTATIONARY_BASIS_SEED,
            },
            None,
            sim(100.0, 100),
        ),
        "qutrit_nonstationary_exception" => {
            let (rho1, rho2) = exception_pair();
            (
                qutrit(),
                TargetSpec::State { matrix: rho2 },
                Some(InitialSpec::State { matrix: rho1 }),
                sim(20.0, 100),
            )
        }
        "qutrit_degenerate_target" => (
            qutrit(),
            TargetSpec::Diagonal {
                spectrum: reals(&[0.25, 0.25, 0.5]),
            },
            None,
            sim(60.0, 100),
        ),
        "qutrit_nonideal_h1" => (
            system(
                &QUTRIT_LEVELS,
                &real_couplings(&[QUTRIT_COUPLINGS[0], 0.0, QUTRIT_COUPLINGS[2]]),
            ),
            generic(),
            None,
            sim(60.0, 100),
        ),
        "qutrit_nonideal_h0" => (
            system(&[0.0, 1.0, 2.0], &real_couplings(&[3.0, 3.0, 3.0])),
            generic(),
            None,
            sim(60.0, 100),
        ),
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(ScenarioConfig {
        preset: None,
        system: Some(system),
        target: Some(target),
        initial: Some(initial.unwrap_or(InitialSpec::RandomIsospectral)),
        sim,
        outputs: None,
        seed: None,
    })
}

//! Artifact writers. Every artifact is a pure function of config and seed.

use std::path::Path;

use serde::Serialize;

use super::config::ResolvedConfig;
use super::runner::{Run, RunSummary, Scenario};
use crate::error::{Error, Result};
use crate::linalg::DensityMatrix;

pub const TRAJECTORY_HEADER: [&str; 5] = ["t", "f", "V", "dist_target", "dist_orbit"];

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_trajectory_csv(path: &Path, run: &Run) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(TRAJECTORY_HEADER).map_err(csv_error)?;
    let traj = &run.trajectory;
    let a = &run.assessment;
    for i in 0..traj.len() {
        w.write_record([
            num(traj.times()[i]),
            num(traj.control()[i]),
            num(traj.lyapunov()[i]),
            num(a.distances[i]),
            num(a.orbit.distances[i]),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub const BATCH_HEADER: [&str; 9] = [
    "run",
    "seed",
    "verdict",
    "final_V",
    "final_distance",
    "final_orbit_distance",
    "tail_distance",
    "tail_orbit_distance",
    "limiting_permutation",
];

pub fn write_batch_csv(path: &Path, runs: &[RunSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(BATCH_HEADER).map_err(csv_error)?;
    for (i, r) in runs.iter().enumerate() {
        w.write_record([
            i.to_string(),
            r.seed.to_string(),
            r.verdict.as_str().to_string(),
            num(r.final_v),
            num(r.final_distance),
            num(r.final_orbit_distance),
            num(r.tail_distance),
            num(r.tail_orbit_distance),
            r.limiting_permutation
                .map_or(String::new(), |p| p.to_string()),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Row-major `[re, im]` pairs.
pub fn matrix_json(rho: &DensityMatrix) -> Vec<Vec<[f64; 2]>> {
    let m = rho.matrix().inner();
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| [m[(i, j)].re, m[(i, j)].im])
                .collect()
        })
        .collect()
}

#[derive(Serialize)]
struct OrbitInfo {
    period: f64,
    periodic: bool,
    grid_bound: f64,
}

#[derive(Serialize)]
struct Endpoint<'a> {
    index: usize,
    permutation: &'a [usize],
    distance: f64,
}

#[derive(Serialize)]
struct RunReport<'a> {
    config: &'a ResolvedConfig,
    summary: &'a RunSummary,
    orbit: OrbitInfo,
    interaction_picture_endpoint: Endpoint<'a>,
    target_initial: Vec<Vec<[f64; 2]>>,
    state_initial: Vec<Vec<[f64; 2]>>,
    state_final: Vec<Vec<[f64; 2]>>,
    target_final: Vec<Vec<[f64; 2]>>,
}

pub fn write_run_report(path: &Path, scenario: &Scenario, run: &Run) -> Result<()> {
    let a = &run.assessment;
    let report = RunReport {
        config: &scenario.config,
        summary: &run.summary,
        orbit: OrbitInfo {
            period: a.orbit.period,
            periodic: a.orbit.periodic,
            grid_bound: a.orbit.grid_bound,
        },
        interaction_picture_endpoint: Endpoint {
            index: a.endpoint.index,
            permutation: &a.endpoint.permutation,
            distance: a.endpoint.distance,
        },
        target_initial: matrix_json(&scenario.target),
        state_initial: matrix_json(&run.initial),
        state_final: matrix_json(run.trajectory.final_rho()),
        target_final: matrix_json(run.trajectory.final_rho_d()),
    };
    write_json(path, &report)
}

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::artifacts;
use super::config::{to_c64, InitialSpec, MatrixSpec, Output, ResolvedConfig, TargetSpec};
use crate::dynamics::{simulate, Trajectory};
use crate::error::{Error, Result};
use crate::linalg::random::{haar_unitary, random_isospectral};
use crate::linalg::{ComplexMatrix, DensityMatrix, GeneratorBasis, C64};
use crate::stability::{enumerate_critical_points, stability_survey_with_gain, DEFAULT_MAX_N};
use crate::structure::{
    ad_bracket_sequence, analyze_structure, bracket_span, default_bracket_depth, ControlSystem,
    COLLISION_REL,
};
use crate::verdict::{assess, Assessment, Verdict};

/// A resolved config with its system and initial target built.
pub struct Scenario {
    pub config: ResolvedConfig,
    pub system: ControlSystem,
    pub target: DensityMatrix,
}

fn build_matrix(m: &MatrixSpec) -> Result<ComplexMatrix> {
    let n = m.len();
    if m.iter().any(|row| row.len() != n) {
        return Err(Error::ConfigInvalid("matrix must be square".into()));
    }
    let flat: Vec<C64> = m.iter().flatten().map(to_c64).collect();
    ComplexMatrix::from_row_slice(n, &flat)
}

fn build_target(spec: &TargetSpec) -> Result<DensityMatrix> {
    match spec {
        TargetSpec::Diagonal { spectrum } => {
            DensityMatrix::diagonal(&spectrum.iter().map(|x| x.0).collect::<Vec<_>>())
        }
        TargetSpec::Haar { spectrum, seed } => {
            let d = DensityMatrix::diagonal(&spectrum.iter().map(|x| x.0).collect::<Vec<_>>())?;
            let u = haar_unitary(d.dim(), &mut ChaCha8Rng::seed_from_u64(*seed));
            d.conjugate_by(&u)
        }
        TargetSpec::PseudoPure { w, u, vector } => {
            let psi: Vec<C64> = vector.iter().map(to_c64).collect();
            let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm.is_nan() || norm <= 0.0 {
                return Err(Error::ConfigInvalid("pseudo-pure vector is zero".into()));
            }
            let n = psi.len();
            let mut flat = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    let proj = psi[i] * psi[j].conj() / (norm * norm);
                    let id = if i == j { u.0 } else { 0.0 };
                    flat.push(proj * (w.0 - u.0) + C64::new(id, 0.0));
                }
            }
            DensityMatrix::new(ComplexMatrix::from_row_slice(n, &flat)?)
        }
        TargetSpec::State { matrix } => DensityMatrix::new(build_matrix(matrix)?),
    }
}

impl Scenario {
    pub fn build(config: &ResolvedConfig) -> Result<Self> {
        let levels: Vec<f64> = config.system.levels.iter().map(|x| x.0).collect();
        let couplings: Vec<C64> = config.system.couplings.iter().map(to_c64).collect();
        let system = ControlSystem::from_couplings(&levels, &couplings)?;
        let target = build_target(&config.target)?;
        if target.dim() != system.dim() {
            return Err(Error::DimensionMismatch {
                expected: system.dim(),
                found: target.dim(),
            });
        }
        Ok(Self {
            config: config.clone(),
            system,
            target,
        })
    }

    pub fn initial_state(&self, seed: u64) -> Result<DensityMatrix> {
        match &self.config.initial {
            InitialSpec::RandomIsospectral => Ok(random_isospectral(
                &self.target,
                &mut ChaCha8Rng::seed_from_u64(seed),
            )),
            InitialSpec::Permutation { index } => {
                let (w, u) = crate::linalg::eigen_decomposition(&self.target);
                let points = enumerate_critical_points(&w, DEFAULT_MAX_N.max(w.len()))?;
                let p = points.get(*index).ok_or_else(|| {
                    Error::ConfigInvalid(format!(
                        "permutation index {index} out of range ({} points)",
                        points.len()
                    ))
                })?;
                p.rho0.conjugate_by(&u)
            }
            InitialSpec::State { matrix } => DensityMatrix::new(build_matrix(matrix)?),
        }
    }

    pub fn run(&self, seed: u64) -> Result<Run> {
        let started = Instant::now();
        let cfg = self.config.simulation();
        let initial = self.initial_state(seed)?;
        let trajectory = simulate(&self.system, &initial, &self.target, &cfg)?;
        let assessment = assess(&trajectory, &self.system, cfg.orbit_samples)?;
        let summary = RunSummary::new(
            seed,
            &trajectory,
            &assessment,
            started.elapsed().as_secs_f64(),
        );
        Ok(Run {
            initial,
            trajectory,
            assessment,
            summary,
        })
    }
}

pub struct Run {
    pub initial: DensityMatrix,
    pub trajectory: Trajectory,
    pub assessment: Assessment,
    pub summary: RunSummary,
}

/// Per-run outcome. `wall_time` is reported on the console only, so the
/// written artifacts stay byte-identical across repeated runs.
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub verdict: Verdict,
    pub final_v: f64,
    pub final_distance: f64,
    pub final_orbit_distance: f64,
    pub tail_distance: f64,
    pub tail_orbit_distance: f64,
    pub threshold: f64,
    pub limiting_permutation: Option<usize>,
    pub endpoint_distance: f64,
    pub refined_steps: usize,
    pub max_step_increase: f64,
    pub max_spectrum_drift: f64,
    #[serde(skip)]
    pub wall_time: f64,
}

impl Serialize for Verdict {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl RunSummary {
    fn new(seed: u64, traj: &Trajectory, a: &Assessment, wall_time: f64) -> Self {
        Self {
            seed,
            verdict: a.verdict,
            final_v: a.final_v,
            final_distance: a.final_distance,
            final_orbit_distance: a.final_orbit_distance,
            tail_distance: a.tail_distance,
            tail_orbit_distance: a.tail_orbit_distance,
            threshold: a.threshold,
            limiting_permutation: a.limiting_permutation,
            endpoint_distance: a.endpoint.distance,
            refined_steps: traj.refined_steps(),
            max_step_increase: traj.max_step_increase(),
            max_spectrum_drift: traj.max_spectrum_drift(),
            wall_time,
        }
    }
}

/// Runs one scenario with the config's seed; writes the requested
/// artifacts when `out` is given.
pub fn run_scenario(config: &ResolvedConfig, out: Option<&Path>) -> Result<Run> {
    let scenario = Scenario::build(config)?;
    let run = scenario.run(config.seed)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        for o in &config.outputs {
            match o {
                Output::TrajectoryCsv => {
                    artifacts::write_trajectory_csv(&dir.join("trajectory.csv"), &run)?
                }
                Output::ReportJson => {
                    artifacts::write_run_report(&dir.join("report.json"), &scenario, &run)?
                }
                Output::Summary => artifacts::write_json(&dir.join("summary.json"), &run.summary)?,
            }
        }
    }
    Ok(run)
}

/// Child seeds drawn from a ChaCha stream keyed by the master seed.
pub fn child_seeds(master: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    (0..n).map(|_| rng.next_u64()).collect()
}

pub const V_HISTOGRAM_DECADES: std::ops::RangeInclusive<i32> = -16..=0;

#[derive(Clone, Debug, Serialize)]
pub struct BatchSummary {
    pub preset: Option<String>,
    pub master_seed: u64,
    pub n_runs: usize,
    pub threshold: f64,
    pub counts: BTreeMap<String, usize>,
    /// Final `V` binned by decade: key `k` counts `10^(k-1) < V <= 10^k`;
    /// `"below"` collects everything at or under the lowest edge.
    pub final_v_histogram: BTreeMap<String, usize>,
    /// Limiting permutation index, or `"none"`.
    pub limiting_permutations: BTreeMap<String, usize>,
    pub note: &'static str,
}

pub struct Batch {
    pub summary: BatchSummary,
    pub runs: Vec<RunSummary>,
}

impl Batch {
    pub fn count(&self, v: Verdict) -> usize {
        self.runs.iter().filter(|r| r.verdict == v).count()
    }
}

/// Independent runs with child seeds of `config.seed`. Runs execute through
/// `exec::map`; aggregation is by run index, so the result does not depend
/// on scheduling.
pub fn run_batch(config: &ResolvedConfig, n_runs: usize, out: Option<&Path>) -> Result<Batch> {
    if n_runs == 0 {
        return Err(Error::ConfigInvalid("batch needs at least one run".into()));
    }
    let scenario = Scenario::build(config)?;
    let seeds = child_seeds(config.seed, n_runs);
    let results = crate::exec::map(&seeds, |&s| scenario.run(s).map(|r| r.summary));
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;
    let batch = Batch {
        summary: summarize(config, &runs),
        runs,
    };
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        artifacts::write_json(&dir.join("batch_summary.json"), &batch.summary)?;
        artifacts::write_batch_csv(&dir.join("batch_runs.csv"), &batch.runs)?;
    }
    Ok(batch)
}

fn summarize(config: &ResolvedConfig, runs: &[RunSummary]) -> BatchSummary {
    let mut counts: BTreeMap<String, usize> = Verdict::ALL
        .iter()
        .map(|v| (v.as_str().to_string(), 0))
        .collect();
    let mut hist = BTreeMap::new();
    let mut perms = BTreeMap::new();
    for r in runs {
        *counts
            .get_mut(r.verdict.as_str())
            .expect("all verdicts present") += 1;
        let lo = *V_HISTOGRAM_DECADES.start();
        let key = if r.final_v <= 10f64.powi(lo) {
            "below".to_string()
        } else {
            let k = r.final_v.log10().ceil() as i32;
            format!("{:+03}", k.clamp(lo + 1, *V_HISTOGRAM_DECADES.end()))
        };
        *hist.entry(key).or_insert(0) += 1;
        let p = r
            .limiting_permutation
            .map_or("none".to_string(), |i| i.to_string());
        *perms.entry(p).or_insert(0) += 1;
    }
    BatchSummary {
        preset: config.preset.clone(),
        master_seed: config.seed,
        n_runs: runs.len(),
        threshold: runs.first().map_or(f64::NAN, |r| r.threshold),
        counts,
        final_v_histogram: hist,
        limiting_permutations: perms,
        note: "verdict fractions are conventions of this tool (tail-mean distance at most 1e-3 sqrt(2 V_max)), not measured rates",
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriticalPointRow {
    pub permutation: Vec<usize>,
    pub critical_value: f64,
    pub classification: &'static str,
    pub n_negative: usize,
    pub n_positive: usize,
    pub n_imaginary: usize,
    pub expected_centre: usize,
    pub stable_manifold_dim: usize,
    pub det_b: f64,
    pub det_b0: f64,
    /// `[re, im]` pairs.
    pub eigenvalues: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Analysis {
    pub preset: Option<String>,
    pub dim: usize,
    pub strongly_regular: bool,
    pub fully_connected: bool,
    pub colliding_pairs: Vec<((usize, usize), (usize, usize))>,
    pub missing_edges: Vec<(usize, usize)>,
    pub span_rank: usize,
    pub vandermonde_rank: usize,
    pub span_full: bool,
    pub spanned_pairs: Vec<(usize, usize)>,
    /// Present when the target is stationary and diagonal.
    pub critical_points: Option<Vec<CriticalPointRow>>,
    pub stability_error: Option<String>,
}

/// Structure, bracket span and stability census without simulating.
pub fn analyze(config: &ResolvedConfig, out: Option<&Path>) -> Result<Analysis> {
    let scenario = Scenario::build(config)?;
    let sys = &scenario.system;
    let n = sys.dim();
    let basis = GeneratorBasis::new(n)?;
    let structure = analyze_structure(sys, COLLISION_REL);
    let span = bracket_span(
        &ad_bracket_sequence(sys, default_bracket_depth(n)),
        &basis,
        crate::linalg::tol::RANK_REL,
    );
    let kappa = config.simulation().kappa;
    let (critical_points, stability_error) =
        match stability_survey_with_gain(sys, &scenario.target, &basis, kappa) {
            Ok(reports) => (
                Some(
                    reports
                        .into_iter()
                        .map(|r| CriticalPointRow {
                            permutation: r.point.permutation,
                            critical_value: r.point.critical_value,
                            classification: r.classification.as_str(),
                            n_negative: r.n_negative,
                            n_positive: r.n_positive,
                            n_imaginary: r.n_imaginary,
                            expected_centre: r.expected_centre,
                            stable_manifold_dim: r.stable_manifold_dim,
                            det_b: r.det_b,
                            det_b0: r.det_b0,
                            eigenvalues: r.eigenvalues.iter().map(|z| [z.re, z.im]).collect(),
                        })
                        .collect(),
                ),
                None,
            ),
            Err(e @ (Error::NotStationary { .. } | Error::InvalidSystem(_))) => {
                (None, Some(e.to_string()))
            }
            Err(e) => return Err(e),
        };
    let analysis = Analysis {
        preset: config.preset.clone(),
        dim: n,
        strongly_regular: structure.strongly_regular,
        fully_connected: structure.fully_connected,
        colliding_pairs: structure.colliding_pairs,
        missing_edges: structure.missing_edges,
        span_rank: span.rank,
        vandermonde_rank: span.vandermonde_rank,
        span_full: span.full,
        spanned_pairs: span.spanned_pairs,
        critical_points,
        stability_error,
    };
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        artifacts::write_json(&dir.join("analysis.json"), &analysis)?;
    }
    Ok(analysis)
}

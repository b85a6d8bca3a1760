//! Scenario configs, the preset library, single and batch runs, and
//! artifact output.

pub mod artifacts;
pub mod config;
pub mod presets;
pub mod runner;

pub use config::{Output, ResolvedConfig, ScenarioConfig, DEFAULT_SEED};
pub use presets::{preset, PRESETS};
pub use runner::{
    analyze, child_seeds, run_batch, run_scenario, Analysis, Batch, Run, RunSummary, Scenario,
};

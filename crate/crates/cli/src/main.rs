use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qlyap::scenario::config::Real;
use qlyap::scenario::{self, ResolvedConfig, ScenarioConfig, PRESETS};
use qlyap::Error;

#[derive(Parser)]
#[command(
    name = "qlyap",
    version,
    about = "Lyapunov feedback control scenarios for finite quantum systems"
)]
struct Cli {
    /// Suppress console summaries.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one run and write its artifacts.
    Simulate(RunArgs),
    /// Run a batch with child seeds of the master seed.
    Batch {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 100)]
        runs: usize,
    },
    /// Structure, bracket span and critical-point census, without simulating.
    Analyze(RunArgs),
    /// List the preset library.
    Presets,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file, or a preset name.
    config: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "qlyap-out")]
    out: PathBuf,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "t-final")]
    t_final: Option<f64>,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        e if e.is_numerical() => EXIT_NUMERICAL,
        Error::Io(_) => 1,
        // parse errors and anything rejected while building system, target or start
        _ => EXIT_CONFIG,
    }
}

fn load(args: &RunArgs) -> Result<ResolvedConfig, Error> {
    let path = Path::new(&args.config);
    let mut cfg = if path.is_file() {
        ScenarioConfig::from_json(&std::fs::read_to_string(path)?)?
    } else if PRESETS.iter().any(|p| p.name == args.config) {
        ScenarioConfig {
            preset: Some(args.config.clone()),
            ..Default::default()
        }
    } else {
        return Err(Error::UnknownPreset(args.config.clone()));
    };
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    if let Some(dt) = args.dt {
        cfg.sim.dt = Some(Real(dt));
    }
    if let Some(t) = args.t_final {
        cfg.sim.t_final = Some(Real(t));
    }
    cfg.resolve()
}

fn execute(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Presets => {
            for p in &PRESETS {
                println!("{:32} {}", p.name, p.summary);
            }
        }
        Command::Simulate(args) => {
            let cfg = load(args)?;
            let run = scenario::run_scenario(&cfg, Some(&args.out))?;
            if !cli.quiet {
                let s = &run.summary;
                println!(
                    "verdict {}  V {:.3e}  distance {:.3e}  orbit distance {:.3e}  permutation {}  ({:.2}s)",
                    s.verdict,
                    s.final_v,
                    s.final_distance,
                    s.final_orbit_distance,
                    s.limiting_permutation.map_or("-".into(), |p| p.to_string()),
                    s.wall_time
                );
            }
        }
        Command::Batch { run, runs } => {
            let cfg = load(run)?;
            let started = std::time::Instant::now();
            let batch = scenario::run_batch(&cfg, *runs, Some(&run.out))?;
            if !cli.quiet {
                for (verdict, count) in &batch.summary.counts {
                    println!("{verdict:22} {count}");
                }
                println!("{} runs in {:.2}s", runs, started.elapsed().as_secs_f64());
            }
        }
        Command::Analyze(args) => {
            let cfg = load(args)?;
            let a = scenario::analyze(&cfg, Some(&args.out))?;
            if !cli.quiet {
                println!(
                    "strongly regular {}  fully connected {}  span rank {}  vandermonde rank {}",
                    a.strongly_regular, a.fully_connected, a.span_rank, a.vandermonde_rank
                );
                match (&a.critical_points, &a.stability_error) {
                    (Some(points), _) => {
                        for p in points {
                            println!("{:?} {}", p.permutation, p.classification);
                        }
                    }
                    (None, Some(e)) => println!("stability: {e}"),
                    (None, None) => {}
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

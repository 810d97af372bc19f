use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nonplanar_cli::commands::{comparison_table, SimulateSettings};
use nonplanar_cli::config::load_schedule;
use nonplanar_cli::{cmd_compare, cmd_raceline, cmd_simulate, load_configs, CliError, RunPaths};

/// Minimum-lap-time racelines on nonplanar roads.
#[derive(Parser)]
#[command(name = "nonplanar", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Track JSON file.
    #[arg(long)]
    track: PathBuf,
    /// Vehicle JSON file.
    #[arg(long)]
    vehicle: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct Collocation {
    /// Number of collocation intervals along the track.
    #[arg(long)]
    intervals: Option<usize>,
    /// Collocation points per interval.
    #[arg(long)]
    degree: Option<usize>,
    /// JSON file of collocation options; flags override its values.
    #[arg(long)]
    options: Option<PathBuf>,
    /// Cruise-speed multipliers of the centerline starting guesses; the best
    /// converged solve is kept.
    #[arg(long, value_delimiter = ',')]
    guess_factors: Option<Vec<f64>>,
    /// Also start two-track and dynamic-bicycle solves from a kinematic
    /// raceline.
    #[arg(long)]
    warm_start: bool,
    /// Iteration limit of each solve.
    #[arg(long)]
    max_iterations: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute one model's raceline and write CSV, SVG and summary JSON.
    Raceline {
        #[command(flatten)]
        common: Common,
        /// two_track, kinematic, kinematic_planar or dynamic_bicycle.
        #[arg(long)]
        model: String,
        #[command(flatten)]
        collocation: Collocation,
    },
    /// Compute racelines for several models and tabulate their lap times.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated models; all four by default.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "kinematic,kinematic_planar,dynamic_bicycle,two_track"
        )]
        models: Vec<String>,
        #[command(flatten)]
        collocation: Collocation,
    },
    /// Roll out an input schedule from the track origin.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// two_track, kinematic, kinematic_planar or dynamic_bicycle.
        #[arg(long)]
        model: String,
        /// JSON input schedule; zero inputs when omitted.
        #[arg(long)]
        inputs: Option<PathBuf>,
        /// Initial speed (m/s).
        #[arg(long, default_value_t = 10.0)]
        speed: f64,
        /// Simulated time (s).
        #[arg(long, default_value_t = 10.0)]
        duration: f64,
        /// Integration step (s).
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
    },
}

fn paths(common: Common, models: Vec<String>, collocation: Option<Collocation>) -> RunPaths {
    let mut p = RunPaths {
        track: common.track,
        vehicle: common.vehicle,
        models,
        out_dir: common.out,
        ..RunPaths::default()
    };
    if let Some(c) = collocation {
        p.options = c.options;
        p.intervals = c.intervals;
        p.degree = c.degree;
        p.guess_factors = c.guess_factors;
        p.warm_start = c.warm_start;
        p.max_iterations = c.max_iterations;
    }
    p
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Raceline {
            common,
            model,
            collocation,
        } => {
            let cfg = load_configs(&paths(common, vec![model], Some(collocation)))?;
            let artifacts = cmd_raceline(&cfg)?;
            println!(
                "{}: lap time {:.4} s ({} iterations)",
                artifacts.summary.model, artifacts.summary.lap_time, artifacts.summary.iterations
            );
            for f in &artifacts.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Compare {
            common,
            models,
            collocation,
        } => {
            let cfg = load_configs(&paths(common, models, Some(collocation)))?;
            let rows = cmd_compare(&cfg)?;
            print!("{}", comparison_table(&rows));
        }
        Command::Simulate {
            common,
            model,
            inputs,
            speed,
            duration,
            dt,
        } => {
            let cfg = load_configs(&paths(common, vec![model], None))?;
            let schedule = inputs.as_deref().map(load_schedule).transpose()?;
            let settings = SimulateSettings {
                schedule,
                speed,
                duration,
                dt,
            };
            let (trajectory, path) = cmd_simulate(&cfg, &settings)?;
            match trajectory.finish_time {
                Some(t) => println!("reached the end of the track at t = {t:.4} s"),
                None => println!("simulated {} samples", trajectory.samples.len()),
            }
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RACELINE_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

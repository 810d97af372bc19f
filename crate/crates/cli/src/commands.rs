//! The `raceline`, `compare` and `simulate` commands.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nonplanar_core::models::{Model, ModelKind};
use nonplanar_core::simulation::{InputSchedule, RolloutOptions, SimError, Simulator, Trajectory};
use nonplanar_core::surface::Surface;
use nonplanar_nlp::{check_kkt, NlpProblem};
use nonplanar_raceline::{
    compute_raceline, compute_raceline_multistart, extract_raceline, solve_problem, transcribe, RacelineRun,
    TranscribeError,
};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::output::{render_svg, trajectory_csv, Summary};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("simulation failed: {0}")]
    Simulation(#[from] SimError),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) | CliError::Simulation(_) => 3,
            CliError::Write { .. } => 1,
        }
    }
}

impl From<TranscribeError> for CliError {
    fn from(e: TranscribeError) -> Self {
        CliError::Config(ConfigError::Option(e.to_string()))
    }
}

fn write_file(path: &Path, contents: &str) -> Result<PathBuf, CliError> {
    fs::write(path, contents).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(path.to_path_buf())
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Write {
        path: dir.to_path_buf(),
        source,
    })
}

fn build_surface(cfg: &RunConfig) -> Result<Surface, CliError> {
    Surface::build(cfg.track.clone()).map_err(|e| CliError::Config(ConfigError::Option(e.to_string())))
}

fn iteration_log(stderr: &mut std::io::Stderr) -> Option<&mut dyn std::io::Write> {
    if log::log_enabled!(log::Level::Debug) {
        Some(stderr)
    } else {
        None
    }
}

/// Solves one model from the configured centerline guesses and, when asked,
/// from a kinematic raceline too, keeping the best converged run. Solver
/// iteration logs go to stderr at debug level.
pub fn solve_model(kind: ModelKind, surface: &Surface, cfg: &RunConfig) -> Result<RacelineRun, CliError> {
    let solver = &cfg.solver;
    let mut stderr = std::io::stderr();
    let mut run = compute_raceline_multistart(
        kind,
        surface,
        &cfg.vehicle,
        &cfg.options,
        solver,
        &cfg.guess_factors,
        iteration_log(&mut stderr),
    )?;
    if cfg.warm_start && !matches!(kind, ModelKind::Kinematic | ModelKind::KinematicPlanar) {
        let base = compute_raceline(ModelKind::Kinematic, surface, &cfg.vehicle, &cfg.options, solver, None)?;
        match &base.raceline {
            Ok(r) if base.solved() => {
                let mut problem = transcribe(kind, surface, &cfg.vehicle, &cfg.options)?;
                problem.warm_start(r);
                let warm = solve_problem(problem, solver, iteration_log(&mut stderr));
                if warm.solved() && (!run.solved() || warm.objective() < run.objective()) {
                    run = warm;
                }
            }
            _ => log::warn!("kinematic warm start unavailable"),
        }
    }
    log::info!(
        "{}: {} after {} iterations",
        kind.name(),
        run.solution.status.name(),
        run.solution.iterations
    );
    Ok(run)
}

/// Result of writing one model's artifacts.
#[derive(Clone, Debug)]
pub struct ModelArtifacts {
    pub summary: Summary,
    pub files: Vec<PathBuf>,
}

/// Writes the CSV, SVG and summary of a run. Unconverged or infeasible runs
/// are written under a `.partial` stem and flagged in the summary.
pub fn write_artifacts(dir: &Path, run: &RacelineRun, track: &str) -> Result<ModelArtifacts, CliError> {
    let problem = &run.problem;
    let x = &run.solution.x;
    let kind = problem.kind;
    let partial = !run.solved();
    let stem = if partial {
        format!("{}_raceline.partial", kind.name())
    } else {
        format!("{}_raceline", kind.name())
    };
    let regularization = problem.regularization(x);
    let lap_time = problem.lap_time(x);
    let summary = Summary {
        model: kind.name().to_string(),
        track: track.to_string(),
        status: run.solution.status.name().to_string(),
        partial,
        lap_time,
        objective: lap_time + regularization,
        regularization,
        max_violation: problem.max_violation(x),
        iterations: run.solution.iterations,
        residuals: check_kkt(problem, &run.solution),
        intervals: problem.layout.intervals,
        degree: problem.layout.degree,
        variables: problem.num_variables(),
        constraints: problem.num_constraints(),
    };

    let mut files = Vec::new();
    let trajectory = match &run.raceline {
        Ok(r) => Some(r.trajectory.clone()),
        Err(_) => extract_raceline(problem, x, f64::INFINITY).ok().map(|r| r.trajectory),
    };
    if let Some(trajectory) = trajectory {
        let model = problem.model();
        files.push(write_file(
            &dir.join(format!("{stem}.csv")),
            &trajectory_csv(&trajectory, &model),
        )?);
        let title = if partial {
            format!("{} ({}, partial)", kind.name(), summary.status)
        } else {
            kind.name().to_string()
        };
        let svg = render_svg(problem.surface(), &trajectory, &model, &title, Some(lap_time));
        files.push(write_file(&dir.join(format!("{stem}.svg")), &svg)?);
    }
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    files.push(write_file(
        &dir.join(format!("{}_summary.json", kind.name())),
        &(json + "\n"),
    )?);
    Ok(ModelArtifacts { summary, files })
}

/// Computes the raceline of the first configured model and writes its
/// artifacts. A failed solve still writes labeled partial artifacts.
pub fn cmd_raceline(cfg: &RunConfig) -> Result<ModelArtifacts, CliError> {
    let surface = build_surface(cfg)?;
    prepare_dir(&cfg.out_dir)?;
    let run = solve_model(cfg.models[0], &surface, cfg)?;
    let artifacts = write_artifacts(&cfg.out_dir, &run, &cfg.track.name)?;
    if artifacts.summary.partial {
        return Err(CliError::Solver(format!(
            "{} ended with status {} (max violation {:.3e}); partial artifacts written",
            artifacts.summary.model, artifacts.summary.status, artifacts.summary.max_violation
        )));
    }
    Ok(artifacts)
}

/// Plain-text lap-time table.
pub fn comparison_table(rows: &[Summary]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<18} {:<20} {:>12} {:>14} {:>10}",
        "model", "status", "lap_time_s", "regularization", "iterations"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<18} {:<20} {:>12.4} {:>14.6} {:>10}",
            r.model, r.status, r.lap_time, r.regularization, r.iterations
        );
    }
    out
}

/// Comparison rows as CSV.
pub fn comparison_csv(rows: &[Summary]) -> String {
    let mut out = String::from("model,status,partial,lap_time,regularization,iterations,max_violation\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.model,
            r.status,
            r.partial,
            crate::output::format_sig(r.lap_time),
            crate::output::format_sig(r.regularization),
            r.iterations,
            crate::output::format_sig(r.max_violation)
        );
    }
    out
}

/// Runs every configured model on one track and writes the per-model
/// artifacts plus `comparison.csv`.
pub fn cmd_compare(cfg: &RunConfig) -> Result<Vec<Summary>, CliError> {
    let surface = build_surface(cfg)?;
    prepare_dir(&cfg.out_dir)?;
    let mut rows = Vec::new();
    for &kind in &cfg.models {
        let run = solve_model(kind, &surface, cfg)?;
        rows.push(write_artifacts(&cfg.out_dir, &run, &cfg.track.name)?.summary);
    }
    write_file(&cfg.out_dir.join("comparison.csv"), &comparison_csv(&rows))?;
    let failed: Vec<&str> = rows.iter().filter(|r| r.partial).map(|r| r.model.as_str()).collect();
    if !failed.is_empty() {
        return Err(CliError::Solver(format!(
            "no converged raceline for {}; partial artifacts written",
            failed.join(", ")
        )));
    }
    Ok(rows)
}

/// Rollout settings of the `simulate` command.
#[derive(Clone, Debug)]
pub struct SimulateSettings {
    pub schedule: Option<InputSchedule>,
    pub speed: f64,
    pub duration: f64,
    pub dt: f64,
}

/// Starting state at the track origin, aligned with the centerline.
pub fn start_state(kind: ModelKind, speed: f64) -> Vec<f64> {
    let mut z = vec![0.0, 0.0, 0.0, speed];
    if kind.state_dim() == 6 {
        z.extend([0.0, 0.0]);
    }
    z
}

/// Rolls out an input schedule (zero inputs when none is given) and writes
/// `<model>_simulation.csv`.
pub fn cmd_simulate(cfg: &RunConfig, settings: &SimulateSettings) -> Result<(Trajectory, PathBuf), CliError> {
    let kind = cfg.models[0];
    let mut surface = build_surface(cfg)?;
    if kind.uses_flattened_track() {
        surface = surface
            .flattened()
            .map_err(|e| CliError::Config(ConfigError::Option(e.to_string())))?;
    }
    let model = Model::new(kind, &surface, &cfg.vehicle);
    let schedule = settings
        .schedule
        .clone()
        .unwrap_or_else(|| InputSchedule::constant(vec![0.0; kind.input_dim()]));
    let opts = RolloutOptions {
        dt: settings.dt,
        duration: settings.duration,
        stop_at_s: (!surface.is_closed()).then_some(surface.length()),
        record_every: 1,
    };
    let trajectory = Simulator::new(model).rollout(&start_state(kind, settings.speed), &schedule, &opts)?;
    prepare_dir(&cfg.out_dir)?;
    let path = write_file(
        &cfg.out_dir.join(format!("{}_simulation.csv", kind.name())),
        &trajectory_csv(&trajectory, &model),
    )?;
    if trajectory.contact_lost {
        log::warn!(
            "contact lost at t = {:.3} s; trajectory ends there",
            trajectory.samples.last().map_or(0.0, |s| s.t)
        );
    }
    Ok((trajectory, path))
}

//! Minimum-lap-time racelines by direct collocation.
//!
//! [`transcribe`] builds a sparse [`NlpProblem`](nonplanar_nlp::NlpProblem)
//! for one vehicle model on one track, [`extract_raceline`] turns a solution
//! back into a trajectory, and [`compute_raceline`] does both around a solve.

mod extract;
pub mod scheme;
mod transcription;

use std::io::Write;

use nonplanar_core::models::ModelKind;
use nonplanar_core::params::VehicleParams;
use nonplanar_core::surface::Surface;
use nonplanar_nlp::{NlpSolution, SolverOptions, SolverStatus};

pub use extract::{extract_raceline, ExtractError, Raceline, DEFAULT_EXTRACT_TOLERANCE};
pub use transcription::{transcribe, CollocationOptions, CollocationProblem, Layout, RowKind, TranscribeError};

/// A solve and, when the solution is feasible, its raceline.
pub struct RacelineRun {
    pub problem: CollocationProblem,
    pub solution: NlpSolution,
    pub raceline: Result<Raceline, ExtractError>,
}

impl RacelineRun {
    pub fn solved(&self) -> bool {
        self.solution.status == SolverStatus::Solved && self.raceline.is_ok()
    }

    /// Lap time plus regularization at the returned point.
    pub fn objective(&self) -> f64 {
        let x = &self.solution.x;
        self.problem.lap_time(x) + self.problem.regularization(x)
    }
}

/// Transcribes, solves and extracts.
pub fn compute_raceline(
    kind: ModelKind,
    surface: &Surface,
    params: &VehicleParams,
    options: &CollocationOptions,
    solver: &SolverOptions,
    log: Option<&mut dyn Write>,
) -> Result<RacelineRun, TranscribeError> {
    Ok(solve_problem(transcribe(kind, surface, params, options)?, solver, log))
}

/// Guess speeds, relative to `cruise_speed`, tried by
/// [`compute_raceline_multistart`] by default.
pub const DEFAULT_GUESS_FACTORS: [f64; 3] = [1.0, 0.8, 1.5];

/// Solves from constant-speed centerline guesses at `cruise_speed` scaled by
/// each of `guess_factors`, keeping the starting speed of the vehicle fixed,
/// and returns the converged run with the lowest objective. When no start
/// converges the first run is returned.
pub fn compute_raceline_multistart(
    kind: ModelKind,
    surface: &Surface,
    params: &VehicleParams,
    options: &CollocationOptions,
    solver: &SolverOptions,
    guess_factors: &[f64],
    mut log: Option<&mut dyn Write>,
) -> Result<RacelineRun, TranscribeError> {
    options.validate()?;
    let v0 = options.initial_speed.unwrap_or(options.cruise_speed);
    let mut best: Option<RacelineRun> = None;
    for &factor in guess_factors {
        let opts = CollocationOptions {
            cruise_speed: (options.cruise_speed * factor).max(options.s_rate_floor),
            initial_speed: Some(v0),
            ..options.clone()
        };
        let sink: Option<&mut dyn Write> = match log {
            Some(ref mut w) => Some(&mut **w),
            None => None,
        };
        let run = compute_raceline(kind, surface, params, &opts, solver, sink)?;
        let better = match &best {
            None => true,
            Some(b) => run.solved() && (!b.solved() || run.objective() < b.objective()),
        };
        if better {
            best = Some(run);
        }
    }
    best.ok_or(TranscribeError::InvalidOption {
        field: "guess_factors",
        reason: "at least one guess is required".into(),
    })
}

/// Solves an already transcribed (and possibly warm-started) problem and
/// extracts its raceline.
pub fn solve_problem(problem: CollocationProblem, solver: &SolverOptions, log: Option<&mut dyn Write>) -> RacelineRun {
    let solution = nonplanar_nlp::solve(&problem, solver, log);
    let raceline = extract_raceline(&problem, &solution.x, DEFAULT_EXTRACT_TOLERANCE);
    RacelineRun {
        problem,
        solution,
        raceline,
    }
}

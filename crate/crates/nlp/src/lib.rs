//! Sparse primal-dual interior-point solver for smooth nonlinear programs.
//!
//! Problems implement [`NlpProblem`]; [`InteriorPoint`] solves them through
//! the [`SolverBackend`] interface. Reported optimality residuals are always
//! recomputed from the problem callbacks by [`check_kkt`].

mod canonical;
mod ipm;
pub mod kkt;
pub mod problem;
pub mod sparse;

use std::io::Write;

use serde::{Deserialize, Serialize};

use canonical::Scaled;
pub use kkt::{check_kkt, kkt_residuals, KktReport, Scaling};
pub use problem::NlpProblem;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    /// KKT residuals recomputed from the callbacks are below tolerance.
    Solved,
    MaxIterations,
    /// The feasibility-restoration phase could not reduce infeasibility.
    RestorationFailed,
    /// The Newton system could not be regularized to the right inertia.
    NumericalBreakdown,
    /// A callback produced a non-finite value at an accepted point.
    EvaluationError,
}

impl SolverStatus {
    pub fn name(self) -> &'static str {
        match self {
            SolverStatus::Solved => "solved",
            SolverStatus::MaxIterations => "max_iterations",
            SolverStatus::RestorationFailed => "restoration_failed",
            SolverStatus::NumericalBreakdown => "numerical_breakdown",
            SolverStatus::EvaluationError => "evaluation_error",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Tolerance on the scaled KKT residuals.
    pub tol: f64,
    pub max_iterations: usize,
    pub mu_init: f64,
    /// Scale objective and constraint rows so no gradient entry exceeds 100.
    pub gradient_scaling: bool,
    /// Include restoration-phase iterations in the log and history.
    pub log_restoration: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iterations: 3000,
            mu_init: 0.1,
            gradient_scaling: true,
            log_restoration: true,
        }
    }
}

/// One line of the iteration log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub mu: f64,
    pub alpha_primal: f64,
    pub alpha_dual: f64,
    pub regularization: f64,
    pub restoration: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NlpSolution {
    pub status: SolverStatus,
    pub x: Vec<f64>,
    /// Constraint multipliers; positive means the upper bound is active.
    pub lambda: Vec<f64>,
    pub z_lower: Vec<f64>,
    pub z_upper: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub kkt: KktReport,
    pub scaling: Scaling,
    pub history: Vec<IterationRecord>,
}

/// A nonlinear programming solver.
pub trait SolverBackend {
    fn name(&self) -> &str;
    fn solve(&self, problem: &dyn NlpProblem, options: &SolverOptions) -> NlpSolution;
}

/// The built-in interior-point method.
#[derive(Clone, Copy, Debug, Default)]
pub struct InteriorPoint;

impl SolverBackend for InteriorPoint {
    fn name(&self) -> &str {
        "interior-point"
    }

    fn solve(&self, problem: &dyn NlpProblem, options: &SolverOptions) -> NlpSolution {
        solve(problem, options, None)
    }
}

/// Solves `problem`, optionally writing one line per iteration to `log`.
pub fn solve(problem: &dyn NlpProblem, options: &SolverOptions, log: Option<&mut dyn Write>) -> NlpSolution {
    let n = problem.num_variables();
    let m = problem.num_constraints();
    let (xl, xu) = problem.variable_bounds();
    let mut x0 = problem.initial_point();
    for j in 0..n {
        x0[j] = x0[j].max(xl[j]).min(xu[j]);
    }
    let scaled = Scaled::new(problem, &x0, options.gradient_scaling);
    let w0 = scaled.canonical_point(&x0);

    let to_solution = |w: &[f64], y: &[f64], zl: &[f64], zu: &[f64]| {
        let x = scaled.full_x(w);
        let sf = scaled.scaling.objective;
        let lambda: Vec<f64> = (0..m).map(|i| y[i] * scaled.scaling.constraints[i] / sf).collect();
        let mut z_lower = vec![0.0; n];
        let mut z_upper = vec![0.0; n];
        let mut free = vec![false; n];
        for (k, &j) in scaled.free_indices().iter().enumerate() {
            z_lower[j] = zl[k] / sf;
            z_upper[j] = zu[k] / sf;
            free[j] = true;
        }
        if scaled.n_free() < n {
            // Fixed variables take whatever bound multiplier balances them.
            let mut g = vec![0.0; n];
            problem.objective_gradient(&x, &mut g);
            let structure = problem.jacobian_structure();
            let mut jv = vec![0.0; structure.len()];
            problem.jacobian_values(&x, &mut jv);
            for (k, &(r, c)) in structure.iter().enumerate() {
                g[c] += jv[k] * lambda[r];
            }
            for j in (0..n).filter(|&j| !free[j]) {
                z_lower[j] = g[j].max(0.0);
                z_upper[j] = (-g[j]).max(0.0);
            }
        }
        (x, lambda, z_lower, z_upper)
    };
    let final_check = |w: &[f64], y: &[f64], zl: &[f64], zu: &[f64]| {
        let (x, lambda, z_lower, z_upper) = to_solution(w, y, zl, zu);
        kkt_residuals(problem, &x, &lambda, &z_lower, &z_upper, &scaled.scaling).max() <= options.tol
    };
    let sf = scaled.scaling.objective;
    let report = move |f: f64| f / sf;

    let mut driver = ipm::Driver {
        options,
        log,
        history: Vec::new(),
        iterations: 0,
        report_objective: &report,
    };
    let out = ipm::run(
        &scaled,
        ipm::Start {
            w: w0,
            y: None,
            zl: None,
            zu: None,
            mu: options.mu_init,
            push: true,
        },
        &mut driver,
        &final_check,
        false,
        None,
    );
    let (x, lambda, z_lower, z_upper) = to_solution(&out.w, &out.y, &out.zl, &out.zu);
    let kkt = kkt_residuals(problem, &x, &lambda, &z_lower, &z_upper, &scaled.scaling);
    let status = if out.status == SolverStatus::Solved && kkt.max() > options.tol {
        SolverStatus::MaxIterations
    } else {
        out.status
    };
    NlpSolution {
        status,
        objective: problem.objective(&x),
        x,
        lambda,
        z_lower,
        z_upper,
        iterations: driver.iterations,
        kkt,
        scaling: scaled.scaling.clone(),
        history: driver.history,
    }
}

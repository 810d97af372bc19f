//! First-order optimality residuals recomputed from the problem callbacks.

use serde::{Deserialize, Serialize};

use crate::problem::NlpProblem;
use crate::NlpSolution;

/// Gradient-based scale factors applied to the objective and constraints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub objective: f64,
    pub constraints: Vec<f64>,
}

impl Scaling {
    pub fn identity(num_constraints: usize) -> Self {
        Self {
            objective: 1.0,
            constraints: vec![1.0; num_constraints],
        }
    }
}

/// Infinity-norm KKT residuals, measured in scaled units.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// `‖∇f + Jᵀλ − z_l + z_u‖∞`.
    pub stationarity: f64,
    /// Largest violation of a constraint or variable bound.
    pub primal_infeasibility: f64,
    /// Largest multiplier-times-slack product, including multipliers with
    /// the wrong sign for their bound.
    pub complementarity: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal_infeasibility)
            .max(self.complementarity)
    }
}

/// Residuals of a returned solution, evaluated with the problem callbacks.
pub fn check_kkt(problem: &dyn NlpProblem, solution: &NlpSolution) -> KktReport {
    kkt_residuals(
        problem,
        &solution.x,
        &solution.lambda,
        &solution.z_lower,
        &solution.z_upper,
        &solution.scaling,
    )
}

/// Residuals at an arbitrary primal-dual point. Multipliers are in the
/// problem's own units; positive `lambda` means the upper constraint bound
/// is active, negative the lower.
pub fn kkt_residuals(
    problem: &dyn NlpProblem,
    x: &[f64],
    lambda: &[f64],
    z_lower: &[f64],
    z_upper: &[f64],
    scaling: &Scaling,
) -> KktReport {
    let n = problem.num_variables();
    let m = problem.num_constraints();
    let (xl, xu) = problem.variable_bounds();
    let (cl, cu) = problem.constraint_bounds();
    let sf = scaling.objective;

    let mut grad = vec![0.0; n];
    problem.objective_gradient(x, &mut grad);
    let mut c = vec![0.0; m];
    problem.constraints(x, &mut c);
    let structure = problem.jacobian_structure();
    let mut jac = vec![0.0; structure.len()];
    problem.jacobian_values(x, &mut jac);
    for (k, &(row, col)) in structure.iter().enumerate() {
        grad[col] += jac[k] * lambda[row];
    }
    let stationarity = (0..n)
        .map(|j| (grad[j] - z_lower[j] + z_upper[j]).abs())
        .fold(0.0, f64::max)
        * sf;

    let mut primal: f64 = 0.0;
    for i in 0..m {
        let v = (cl[i] - c[i]).max(c[i] - cu[i]).max(0.0);
        primal = primal.max(scaling.constraints[i] * v);
    }
    for j in 0..n {
        primal = primal.max((xl[j] - x[j]).max(x[j] - xu[j]).max(0.0));
    }

    let bound_term = |z: f64, gap: f64, finite: bool| {
        if z < 0.0 {
            -z
        } else if finite {
            (z * gap).abs()
        } else {
            z
        }
    };
    let mut compl: f64 = 0.0;
    for j in 0..n {
        compl = compl.max(bound_term(z_lower[j], x[j] - xl[j], xl[j].is_finite()));
        compl = compl.max(bound_term(z_upper[j], xu[j] - x[j], xu[j].is_finite()));
    }
    compl *= sf;
    for i in 0..m {
        if cl[i] == cu[i] {
            continue;
        }
        let si = scaling.constraints[i];
        let up = lambda[i].max(0.0);
        let lo = (-lambda[i]).max(0.0);
        let t_up = if cu[i].is_finite() {
            sf * up * (cu[i] - c[i]).abs()
        } else {
            sf * up / si
        };
        let t_lo = if cl[i].is_finite() {
            sf * lo * (c[i] - cl[i]).abs()
        } else {
            sf * lo / si
        };
        compl = compl.max(t_up).max(t_lo);
    }

    KktReport {
        stationarity,
        primal_infeasibility: primal,
        complementarity: compl,
    }
}

//! Turning an NLP solution back into a trajectory.

use nonplanar_core::models::ModelKind;
use nonplanar_core::simulation::{InputSchedule, Sample, ScheduleAxis, SimError, Simulator, Trajectory};
use thiserror::Error;

use crate::transcription::{CollocationOptions, CollocationProblem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtractError {
    #[error("solution violates the constraints by {max_violation:.3e} (tolerance {tolerance:.1e})")]
    Infeasible { max_violation: f64, tolerance: f64 },
    #[error("solution vector has {found} entries, expected {expected}")]
    Length { found: usize, expected: usize },
    #[error("could not sample the solution: {0}")]
    Sample(#[from] SimError),
}

/// Violation above which a solution is not turned into a raceline.
pub const DEFAULT_EXTRACT_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct Raceline {
    pub model: ModelKind,
    pub options: CollocationOptions,
    /// Sum of the time increments (s).
    pub lap_time: f64,
    pub objective: f64,
    /// Quadrature of the input and input-rate penalties.
    pub regularization: f64,
    pub max_violation: f64,
    /// Dense samples from the collocation polynomials.
    pub trajectory: Trajectory,
    /// Samples at the collocation points themselves.
    pub collocation: Vec<Sample>,
}

impl Raceline {
    /// Inputs along the dense trajectory as a piecewise-linear schedule.
    pub fn input_schedule(&self, axis: ScheduleAxis) -> InputSchedule {
        let key = |s: &Sample| match axis {
            ScheduleAxis::Time => s.t,
            ScheduleAxis::PathLength => s.z[0],
        };
        let mut knots: Vec<f64> = Vec::new();
        let mut inputs = Vec::new();
        for s in &self.trajectory.samples {
            let k = key(s);
            if knots.last().is_some_and(|&last| k <= last) {
                continue;
            }
            knots.push(k);
            inputs.push(s.u.clone());
        }
        InputSchedule { axis, knots, inputs }
    }

    pub fn initial_state(&self) -> &[f64] {
        &self.trajectory.samples[0].z
    }
}

fn dot(w: &[f64], v: impl Iterator<Item = f64>) -> f64 {
    w.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Builds the raceline from a primal solution `x`, refusing solutions whose
/// constraint violation exceeds `tolerance`.
pub fn extract_raceline(problem: &CollocationProblem, x: &[f64], tolerance: f64) -> Result<Raceline, ExtractError> {
    let l = problem.layout;
    if x.len() != l.num_variables() {
        return Err(ExtractError::Length {
            found: x.len(),
            expected: l.num_variables(),
        });
    }
    let max_violation = problem.max_violation(x);
    if !(max_violation <= tolerance) {
        return Err(ExtractError::Infeasible {
            max_violation,
            tolerance,
        });
    }
    let sc = &problem.scheme;
    let h = problem.step;
    let mg = problem.params().weight();
    let sim = Simulator::new(problem.model());
    let values = problem.point_values(x);
    let inv_out = values[0].len() - 2;
    let d = l.degree;

    let point = |k: usize, j: usize, off: usize, i: usize| x[l.point(k, j) + off + i];
    let algebraic = |g: Vec<f64>| -> [f64; 3] {
        let mut a = [0.0; 3];
        for (ai, gi) in a.iter_mut().zip(g) {
            *ai = gi * mg;
        }
        a
    };

    let mut samples = Vec::new();
    let mut collocation = Vec::new();
    let mut t0 = 0.0;
    for k in 0..l.intervals {
        let state_col = |r: usize| if r == 0 { l.state(k) } else { l.point(k, r - 1) };
        let inv: Vec<f64> = (0..d).map(|j| values[k * d + j][inv_out]).collect();
        let ns = problem.options.samples_per_interval;
        let last = k + 1 == l.intervals;
        let taus = (0..ns).map(|i| i as f64 / ns as f64).chain(last.then_some(1.0));
        for tau in taus {
            let sw = sc.state_weights(tau);
            let pw = sc.point_weights(tau);
            let z: Vec<f64> = (0..l.nz)
                .map(|i| dot(&sw, (0..=d).map(|r| x[state_col(r) + i])))
                .collect();
            let u: Vec<f64> = (0..l.nu)
                .map(|i| dot(&pw, (0..d).map(|j| point(k, j, l.input_offset(), i))))
                .collect();
            let g: Vec<f64> = (0..l.ng)
                .map(|i| dot(&pw, (0..d).map(|j| point(k, j, l.algebraic_offset(), i))))
                .collect();
            let t = t0 + h * dot(&sc.integral_weights(tau), inv.iter().copied());
            samples.push(sim.sample(t, &z, &u, algebraic(g))?);
        }
        for j in 0..d {
            let c = l.point(k, j);
            let t = t0 + h * dot(&sc.integral_weights(sc.tau[j]), inv.iter().copied());
            let g = x[c + l.algebraic_offset()..c + l.rate_offset()].to_vec();
            collocation.push(sim.sample(
                t,
                &x[c..c + l.nz],
                &x[c + l.input_offset()..c + l.algebraic_offset()],
                algebraic(g),
            )?);
        }
        t0 += x[l.time_step(k)];
    }

    let lap_time = problem.lap_time(x);
    let regularization = problem.regularization(x);
    Ok(Raceline {
        model: problem.kind,
        options: problem.options.clone(),
        lap_time,
        objective: lap_time + regularization,
        regularization,
        max_violation,
        trajectory: Trajectory {
            model: problem.kind,
            normal_offset: problem.params().h,
            samples,
            contact_lost: false,
            finish_time: Some(lap_time),
        },
        collocation,
    })
}

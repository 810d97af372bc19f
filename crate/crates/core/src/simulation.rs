//! Fixed-step simulation of the vehicle models. For the two-track model the
//! algebraic weight distribution is re-solved by Newton's method at every
//! integrator stage.

use crate::autodiff::Dual;
use crate::kinematics::{surface_angular_acceleration, surface_angular_velocity};
use crate::models::{static_algebraic, Model, ModelError, ModelKind};
use crate::surface::orientation_from_theta_s;
use crate::tire::MIN_ROLLING_SPEED;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_DT: f64 = 1e-3;
pub const MAX_DT: f64 = 0.02;
/// Convergence threshold on the algebraic residual (N).
pub const ALGEBRAIC_TOL: f64 = 1e-8;
pub const MAX_NEWTON_ITERATIONS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("algebraic solve did not converge: residual {residual:.3e} N after {iterations} iterations")]
    Algebraic { residual: f64, iterations: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("step size {0} outside (0, {MAX_DT}]")]
    InvalidStep(f64),
    #[error("longitudinal speed {0:.3} m/s below the {MIN_ROLLING_SPEED} m/s rolling guard")]
    LowSpeed(f64),
    #[error("input schedule is invalid: {0}")]
    Schedule(String),
    #[error("state became non-finite")]
    Diverged,
}

/// Result of solving `g_c(Z, U, G) = 0` for `G`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlgebraicSolution {
    pub g: [f64; 3],
    pub iterations: usize,
    pub residual: f64,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Newton iteration on the weight-distribution residual.
pub fn solve_algebraic(model: &Model, z: &[f64], u: &[f64], guess: [f64; 3]) -> Result<AlgebraicSolution, SimError> {
    let mut g = guess;
    let zd: Vec<Dual<3>> = z.iter().map(|&v| Dual::constant(v)).collect();
    let ud: Vec<Dual<3>> = u.iter().map(|&v| Dual::constant(v)).collect();
    for it in 0..=MAX_NEWTON_ITERATIONS {
        let gd = Dual::seed(&g);
        let e = model.evaluate(&zd, &ud, &gd)?;
        let r: [f64; 3] = e.algebraic.map(|x| x.v);
        let res = max_abs(&r);
        if res < ALGEBRAIC_TOL {
            return Ok(AlgebraicSolution {
                g,
                iterations: it,
                residual: res,
            });
        }
        if it == MAX_NEWTON_ITERATIONS || !res.is_finite() {
            return Err(SimError::Algebraic {
                residual: res,
                iterations: it,
            });
        }
        let jac: [[f64; 3]; 3] = e.algebraic.map(|x| x.d);
        let step = solve3(jac, r).ok_or(SimError::Algebraic {
            residual: res,
            iterations: it,
        })?;
        for k in 0..3 {
            g[k] -= step[k];
        }
    }
    unreachable!()
}

/// Gaussian elimination with partial pivoting for a 3x3 system.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for c in 0..3 {
        let p = (c..3).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..3 {
            let f = a[r][c] / a[c][c];
            for k in c..3 {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Which quantity an [`InputSchedule`] is indexed by.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleAxis {
    #[default]
    Time,
    PathLength,
}

/// Piecewise-linear input signal, held constant beyond its end points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSchedule {
    #[serde(default)]
    pub axis: ScheduleAxis,
    pub knots: Vec<f64>,
    pub inputs: Vec<Vec<f64>>,
}

impl InputSchedule {
    pub fn constant(u: Vec<f64>) -> Self {
        Self {
            axis: ScheduleAxis::Time,
            knots: vec![0.0],
            inputs: vec![u],
        }
    }

    pub fn validate(&self, dim: usize) -> Result<(), SimError> {
        if self.knots.is_empty() || self.knots.len() != self.inputs.len() {
            return Err(SimError::Schedule(
                "knots and inputs must be non-empty and of equal length".into(),
            ));
        }
        if self.knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SimError::Schedule("knots must be strictly increasing".into()));
        }
        if let Some(bad) = self.inputs.iter().find(|u| u.len() != dim) {
            return Err(SimError::Schedule(format!(
                "expected {dim} inputs per knot, found {}",
                bad.len()
            )));
        }
        Ok(())
    }

    pub fn at(&self, x: f64) -> Vec<f64> {
        let k = &self.knots;
        if x <= k[0] {
            return self.inputs[0].clone();
        }
        if x >= k[k.len() - 1] {
            return self.inputs[k.len() - 1].clone();
        }
        let i = k.partition_point(|&v| v <= x) - 1;
        let w = (x - k[i]) / (k[i + 1] - k[i]);
        self.inputs[i]
            .iter()
            .zip(&self.inputs[i + 1])
            .map(|(a, b)| a + w * (b - a))
            .collect()
    }
}

/// One recorded instant of a simulation.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub z: Vec<f64>,
    pub u: Vec<f64>,
    /// Algebraic state `[N_f, N_r, Δ]` (two-track only).
    pub g: Option<[f64; 3]>,
    /// Per-tire normal forces (two-track) or `[N, 0, 0, 0]` (bicycle models).
    pub normals: [f64; 4],
    /// Global position of the reference point `x(s, y) + h e_n`.
    pub position: [f64; 3],
    /// Body axes as columns.
    pub orientation: [[f64; 3]; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub model: ModelKind,
    pub normal_offset: f64,
    pub samples: Vec<Sample>,
    /// Set when a tire (or the vehicle) lost contact and the run stopped.
    pub contact_lost: bool,
    /// Interpolated time at which `s` first reached the requested end.
    pub finish_time: Option<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct RolloutOptions {
    pub dt: f64,
    pub duration: f64,
    /// Stop once `s` reaches this value.
    pub stop_at_s: Option<f64>,
    /// Record every n-th step.
    pub record_every: usize,
}

impl Default for RolloutOptions {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            duration: 10.0,
            stop_at_s: None,
            record_every: 1,
        }
    }
}

pub struct Simulator<'a> {
    pub model: Model<'a>,
}

impl<'a> Simulator<'a> {
    pub fn new(model: Model<'a>) -> Self {
        Self { model }
    }

    fn has_algebraic(&self) -> bool {
        self.model.kind.algebraic_dim() > 0
    }

    /// State derivative, re-solving the algebraic state from `guess`.
    pub fn rates(&self, z: &[f64], u: &[f64], guess: [f64; 3]) -> Result<(Vec<f64>, [f64; 3]), SimError> {
        let g = if self.has_algebraic() {
            solve_algebraic(&self.model, z, u, guess)?.g
        } else {
            guess
        };
        let e = self.model.evaluate(z, u, &g)?;
        Ok((e.rates[..self.model.kind.state_dim()].to_vec(), g))
    }

    /// One classical Runge-Kutta step with inputs supplied per stage.
    pub fn step_with(
        &self,
        z: &[f64],
        inputs: [&[f64]; 3],
        dt: f64,
        guess: [f64; 3],
    ) -> Result<(Vec<f64>, [f64; 3]), SimError> {
        if !(dt > 0.0 && dt <= MAX_DT) {
            return Err(SimError::InvalidStep(dt));
        }
        let axpy = |a: f64, k: &[f64]| -> Vec<f64> { z.iter().zip(k).map(|(x, d)| x + a * d).collect() };
        let (k1, g1) = self.rates(z, inputs[0], guess)?;
        let (k2, g2) = self.rates(&axpy(0.5 * dt, &k1), inputs[1], g1)?;
        let (k3, g3) = self.rates(&axpy(0.5 * dt, &k2), inputs[1], g2)?;
        let (k4, _) = self.rates(&axpy(dt, &k3), inputs[2], g3)?;
        let next: Vec<f64> = (0..z.len())
            .map(|i| z[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        if next.iter().any(|x| !x.is_finite()) {
            return Err(SimError::Diverged);
        }
        let g = self.consistent_algebraic(&next, inputs[2], g3)?;
        Ok((next, g))
    }

    /// Step with inputs held constant.
    pub fn step(&self, z: &[f64], u: &[f64], dt: f64, guess: [f64; 3]) -> Result<(Vec<f64>, [f64; 3]), SimError> {
        self.step_with(z, [u, u, u], dt, guess)
    }

    pub fn consistent_algebraic(&self, z: &[f64], u: &[f64], guess: [f64; 3]) -> Result<[f64; 3], SimError> {
        if self.has_algebraic() {
            Ok(solve_algebraic(&self.model, z, u, guess)?.g)
        } else {
            Ok(guess)
        }
    }

    /// Sample at state `z` with inputs `u` and algebraic state `g`.
    pub fn sample(&self, t: f64, z: &[f64], u: &[f64], g: [f64; 3]) -> Result<Sample, SimError> {
        let e = self.model.evaluate(z, u, &g)?;
        let h = self.model.params.h;
        let jet = self.model.surface.jet_direct(z[0], z[1]);
        let position = (jet.x_p + jet.e_n.scale_f(h)).values();
        let orientation = orientation_from_theta_s(&jet, z[2]).0.values();
        Ok(Sample {
            t,
            z: z.to_vec(),
            u: u.to_vec(),
            g: self.has_algebraic().then_some(g),
            normals: e.normals,
            position,
            orientation,
        })
    }

    fn input_at(&self, schedule: &InputSchedule, t: f64, z: &[f64]) -> Vec<f64> {
        match schedule.axis {
            ScheduleAxis::Time => schedule.at(t),
            ScheduleAxis::PathLength => schedule.at(z[0]),
        }
    }

    /// Integrates from `z0` under `schedule`, recording samples.
    pub fn rollout(&self, z0: &[f64], schedule: &InputSchedule, opts: &RolloutOptions) -> Result<Trajectory, SimError> {
        schedule.validate(self.model.kind.input_dim())?;
        if !(opts.dt > 0.0 && opts.dt <= MAX_DT) {
            return Err(SimError::InvalidStep(opts.dt));
        }
        let mut z = z0.to_vec();
        let mut t = 0.0;
        let mut u = self.input_at(schedule, t, &z);
        let mut g = self.consistent_algebraic(&z, &u, static_algebraic(self.model.params))?;
        let mut traj = Trajectory {
            model: self.model.kind,
            normal_offset: self.model.params.h,
            samples: vec![self.sample(t, &z, &u, g)?],
            contact_lost: false,
            finish_time: None,
        };
        let steps = (opts.duration / opts.dt).ceil() as usize;
        let every = opts.record_every.max(1);
        for k in 1..=steps {
            let v1 = self.model.body_velocity(&z, &u)[0];
            if v1 <= MIN_ROLLING_SPEED {
                return Err(SimError::LowSpeed(v1));
            }
            let dt = opts.dt.min(opts.duration - t).max(1e-12);
            let (u_mid, u_end) = match schedule.axis {
                ScheduleAxis::Time => (schedule.at(t + 0.5 * dt), schedule.at(t + dt)),
                // Path-indexed inputs are frozen over the step at the current s.
                ScheduleAxis::PathLength => (u.clone(), u.clone()),
            };
            let (zn, gn) = self.step_with(&z, [&u, &u_mid, &u_end], dt, g)?;
            let s_prev = z[0];
            t += dt;
            z = zn;
            g = gn;
            u = self.input_at(schedule, t, &z);
            let sample = self.sample(t, &z, &u, g)?;
            let lost = sample.normals.iter().take(self.contact_count()).any(|&n| n < 0.0);
            let finished = opts.stop_at_s.filter(|&end| z[0] >= end);
            if let Some(end) = finished {
                let w = (end - s_prev) / (z[0] - s_prev);
                traj.finish_time = Some(t - dt + w * dt);
            }
            if k % every == 0 || lost || finished.is_some() || k == steps {
                traj.samples.push(sample);
            }
            if lost {
                traj.contact_lost = true;
                break;
            }
            if finished.is_some() {
                break;
            }
        }
        Ok(traj)
    }

    fn contact_count(&self) -> usize {
        match self.model.kind {
            ModelKind::TwoTrack => 4,
            _ => 1,
        }
    }
}

/// Tilt-rate acceleration at one trajectory sample, computed two ways.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TiltAccelerationGap {
    pub t: f64,
    /// `surface_angular_acceleration` applied to the body acceleration: the
    /// approximation that holds the surface terms fixed.
    pub approximate: [f64; 2],
    /// Central time difference of `surface_angular_velocity`.
    pub differenced: [f64; 2],
}

impl TiltAccelerationGap {
    pub fn error(&self) -> f64 {
        (self.approximate[0] - self.differenced[0]).hypot(self.approximate[1] - self.differenced[1])
    }
}

/// Compares the tilt-rate acceleration used by the models with a numerical
/// derivative of the exact tilt rates along a recorded trajectory. Body
/// accelerations are central differences of the body velocity, so the gap
/// isolates the terms the approximation drops (motion through changing
/// surface curvature). No bound is implied; this is a diagnostic.
pub fn tilt_acceleration_gaps(model: &Model, trajectory: &Trajectory) -> Result<Vec<TiltAccelerationGap>, SimError> {
    let n = trajectory.normal_offset;
    let samples = &trajectory.samples;
    let velocity = |q: &Sample| model.body_velocity(&q.z, &q.u);
    let tilt = |q: &Sample| -> Result<[f64; 2], SimError> {
        let jet = model.surface.jet_direct(q.z[0], q.z[1]);
        let [v1, v2, _] = velocity(q);
        Ok(surface_angular_velocity(&jet, q.z[2], n, v1, v2).map_err(ModelError::from)?)
    };
    let mut out = Vec::new();
    for w in samples.windows(3) {
        let (a, b, c) = (&w[0], &w[1], &w[2]);
        let span = c.t - a.t;
        if span <= 0.0 {
            continue;
        }
        let (va, vc) = (velocity(a), velocity(c));
        let accel = [(vc[0] - va[0]) / span, (vc[1] - va[1]) / span];
        let jet = model.surface.jet_direct(b.z[0], b.z[1]);
        let approximate =
            surface_angular_acceleration(&jet, b.z[2], n, accel[0], accel[1]).map_err(ModelError::from)?;
        let (wa, wc) = (tilt(a)?, tilt(c)?);
        out.push(TiltAccelerationGap {
            t: b.t,
            approximate,
            differenced: [(wc[0] - wa[0]) / span, (wc[1] - wa[1]) / span],
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::VehicleParams;
    use crate::surface::{Surface, SurfaceConfig};

    #[test]
    fn solve3_matches_known_solution() {
        let a = [[4.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 2.0]];
        let x = [1.0, -2.0, 3.0];
        let b = std::array::from_fn(|i| (0..3).map(|j| a[i][j] * x[j]).sum());
        let s = solve3(a, b).unwrap();
        for k in 0..3 {
            assert!((s[k] - x[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn schedule_interpolates_and_clamps() {
        let s = InputSchedule {
            axis: ScheduleAxis::Time,
            knots: vec![0.0, 1.0, 3.0],
            inputs: vec![vec![0.0, 1.0], vec![2.0, 1.0], vec![2.0, -1.0]],
        };
        assert_eq!(s.at(-1.0), vec![0.0, 1.0]);
        assert_eq!(s.at(0.5), vec![1.0, 1.0]);
        assert_eq!(s.at(2.0), vec![2.0, 0.0]);
        assert_eq!(s.at(9.0), vec![2.0, -1.0]);
        assert!(s.validate(2).is_ok() && s.validate(3).is_err());
    }

    #[test]
    fn static_solve_from_zero_guess() {
        let p = VehicleParams::default();
        let sf = Surface::build(SurfaceConfig::flat_straight(50.0, 4.0)).unwrap();
        let m = Model::new(ModelKind::TwoTrack, &sf, &p);
        let z = [5.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let sol = solve_algebraic(&m, &z, &[0.0; 5], [0.0; 3]).unwrap();
        assert!((sol.g[0] - 11221.4).abs() < 0.1 && (sol.g[1] - 11371.0).abs() < 0.1);
        assert!(sol.g[2].abs() < 1e-9 && sol.iterations == 1, "{sol:?}");
        let again = solve_algebraic(&m, &z, &[0.0; 5], sol.g).unwrap();
        assert_eq!(again.iterations, 0);
    }

    #[test]
    fn rejects_bad_step() {
        let p = VehicleParams::default();
        let sf = Surface::build(SurfaceConfig::flat_straight(50.0, 4.0)).unwrap();
        let sim = Simulator::new(Model::new(ModelKind::Kinematic, &sf, &p));
        let e = sim.step(&[0.0, 0.0, 0.0, 10.0], &[0.0, 0.0], 0.05, [0.0; 3]);
        assert_eq!(e.unwrap_err(), SimError::InvalidStep(0.05));
    }

    #[test]
    fn tilt_acceleration_gap_vanishes_on_a_uniform_cylinder() {
        // On a straight cylinder the surface terms are constant along the
        // generators, so driving straight along them leaves nothing to drop.
        let p = VehicleParams::default();
        let mut cfg = SurfaceConfig::flat_straight(200.0, 4.0);
        cfg.cross_curvature = 0.1;
        let sf = Surface::build(cfg).unwrap();
        let model = Model::new(ModelKind::Kinematic, &sf, &p);
        let opts = RolloutOptions {
            dt: 1e-3,
            duration: 2.0,
            stop_at_s: None,
            record_every: 10,
        };
        let accelerating = InputSchedule::constant(vec![2.0, 0.0]);
        let tr = Simulator::new(model)
            .rollout(&[0.0, 1.0, 0.0, 10.0], &accelerating, &opts)
            .unwrap();
        let gaps = tilt_acceleration_gaps(&model, &tr).unwrap();
        assert_eq!(gaps.len(), tr.samples.len() - 2);
        assert!(gaps.iter().all(|g| g.error() < 1e-9), "{:?}", gaps[0]);

        // Steering across the curvature makes the heading, and with it the
        // tilt-rate map, change in time: the dropped terms become visible.
        let turning = InputSchedule::constant(vec![0.0, 0.05]);
        let tr = Simulator::new(model)
            .rollout(&[0.0, -2.0, 0.0, 10.0], &turning, &opts)
            .unwrap();
        let worst = tilt_acceleration_gaps(&model, &tr)
            .unwrap()
            .iter()
            .fold(0.0, |m: f64, g| m.max(g.error()));
        assert!(worst > 1e-3, "{worst}");
    }
}

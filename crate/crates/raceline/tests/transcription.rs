use nonplanar_core::models::{Model, ModelKind};
use nonplanar_core::params::VehicleParams;
use nonplanar_core::simulation::{solve_algebraic, InputSchedule, RolloutOptions, Simulator};
use nonplanar_core::surface::{AngleProfile, Surface, SurfaceConfig};
use nonplanar_nlp::{NlpProblem, SolverOptions, SolverStatus};
use nonplanar_raceline::{
    compute_raceline, compute_raceline_multistart, extract_raceline, solve_problem, transcribe, CollocationOptions,
    CollocationProblem, ExtractError, Layout, RowKind,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn vehicle() -> VehicleParams {
    serde_json::from_str(include_str!("../../../vehicles/default.json")).unwrap()
}

fn track(name: &str) -> Surface {
    let path = format!("{}/../../tracks/{name}.json", env!("CARGO_MANIFEST_DIR"));
    Surface::build(serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()).unwrap()
}

/// Road over a crest with growing camber and constant curvature. Angle
/// profiles are linear so the dynamics are smooth in `s`; spline knots would
/// put kinks into the surface curvature and cap the convergence order.
fn hill() -> Surface {
    let mut cfg = SurfaceConfig::flat_straight(60.0, 6.0);
    cfg.pitch = AngleProfile {
        knots: vec![[0.0, 0.06], [60.0, -0.06]],
    };
    cfg.roll = AngleProfile {
        knots: vec![[0.0, 0.0], [60.0, 0.05]],
    };
    cfg.yaw = AngleProfile {
        knots: vec![[0.0, 0.0], [60.0, 0.2]],
    };
    Surface::build(cfg).unwrap()
}

fn options(intervals: usize) -> CollocationOptions {
    CollocationOptions {
        intervals,
        ..Default::default()
    }
}

#[test]
fn two_track_variable_count_matches_layout_formula() {
    let p = vehicle();
    let prob = transcribe(ModelKind::TwoTrack, &track("l_track"), &p, &options(25)).unwrap();
    // 25 intervals of 3 points with 6 + 5 + 3 + 5 variables, 26 interval
    // boundary states and 25 time increments.
    assert_eq!(prob.num_variables(), 25 * 3 * 19 + 26 * 6 + 25);
    assert_eq!(prob.num_variables(), 1606);
    let (lo, up) = prob.variable_bounds();
    assert_eq!(lo.len(), 1606);
    assert_eq!(up.len(), 1606);
    let (cl, cu) = prob.constraint_bounds();
    assert_eq!(cl.len(), prob.num_constraints());
    assert_eq!(cu.len(), prob.num_constraints());
    assert_eq!(prob.row_kinds().len(), prob.num_constraints());
}

#[test]
fn unregularized_objective_is_the_lap_time() {
    let p = vehicle();
    let opts = CollocationOptions {
        input_weight: 0.0,
        rate_weight: 0.0,
        ..options(6)
    };
    let prob = transcribe(ModelKind::Kinematic, &track("l_track"), &p, &opts).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut x = prob.initial_point();
    for v in x.iter_mut() {
        *v += rng.gen_range(-0.01..0.01);
    }
    assert_eq!(prob.regularization(&x), 0.0);
    assert_eq!(prob.objective(&x), prob.lap_time(&x));
}

/// Cubic Hermite interpolation of a dense simulation, looked up by path length.
struct DenseOracle {
    t: Vec<f64>,
    z: Vec<Vec<f64>>,
    f: Vec<Vec<f64>>,
}

impl DenseOracle {
    fn at_s(&self, s: f64) -> (f64, Vec<f64>) {
        let i = self.z.partition_point(|z| z[0] <= s).clamp(1, self.z.len() - 1) - 1;
        let dt = self.t[i + 1] - self.t[i];
        let herm = |th: f64, c: usize| {
            let (t2, t3) = (th * th, th * th * th);
            (2.0 * t3 - 3.0 * t2 + 1.0) * self.z[i][c]
                + (t3 - 2.0 * t2 + th) * dt * self.f[i][c]
                + (-2.0 * t3 + 3.0 * t2) * self.z[i + 1][c]
                + (t3 - t2) * dt * self.f[i + 1][c]
        };
        let (mut a, mut b) = (0.0, 1.0);
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            if herm(m, 0) < s {
                a = m;
            } else {
                b = m;
            }
        }
        let th = 0.5 * (a + b);
        (self.t[i] + th * dt, (0..self.z[i].len()).map(|c| herm(th, c)).collect())
    }
}

fn simulate(model: Model, z0: &[f64], u: &[f64], length: f64) -> DenseOracle {
    let sim = Simulator::new(model);
    let traj = sim
        .rollout(
            z0,
            &InputSchedule::constant(u.to_vec()),
            &RolloutOptions {
                dt: 2e-3,
                duration: 30.0,
                stop_at_s: Some(length + 1.0),
                record_every: 1,
            },
        )
        .unwrap();
    assert!(!traj.contact_lost);
    let mut oracle = DenseOracle {
        t: vec![],
        z: vec![],
        f: vec![],
    };
    for s in &traj.samples {
        let (f, _) = sim.rates(&s.z, &s.u, s.g.unwrap_or([0.0; 3])).unwrap();
        oracle.t.push(s.t);
        oracle.z.push(s.z.clone());
        oracle.f.push(f);
    }
    oracle
}

/// Decision vector sampled from the oracle at the collocation nodes.
fn sampled_solution(prob: &CollocationProblem, oracle: &DenseOracle, u: &[f64]) -> Vec<f64> {
    let l = prob.layout;
    let h = prob.step;
    let mg = prob.params().weight();
    let mut x = vec![0.0; l.num_variables()];
    for k in 0..=l.intervals {
        let (_, z) = oracle.at_s(k as f64 * h);
        x[l.state(k)..l.state(k) + l.nz].copy_from_slice(&z);
    }
    for k in 0..l.intervals {
        x[l.time_step(k)] = oracle.at_s((k + 1) as f64 * h).0 - oracle.at_s(k as f64 * h).0;
        for j in 0..l.degree {
            let c = l.point(k, j);
            let (_, z) = oracle.at_s((k as f64 + prob.scheme.tau[j]) * h);
            x[c..c + l.nz].copy_from_slice(&z);
            x[c + l.input_offset()..c + l.algebraic_offset()].copy_from_slice(u);
            if l.ng > 0 {
                let g = solve_algebraic(&prob.model(), &z, u, [11000.0, 11000.0, 0.0])
                    .unwrap()
                    .g;
                for i in 0..3 {
                    x[c + l.algebraic_offset() + i] = g[i] / mg;
                }
            }
        }
    }
    x
}

#[test]
fn defects_of_simulated_trajectories_decay_with_refinement() {
    let p = vehicle();
    let surface = hill();
    // The oracle's initial lateral state excites a fast yaw mode that
    // decays within the first metres; defects are measured past it.
    let settle = 15.0;
    for (kind, z0, u) in [
        (
            ModelKind::TwoTrack,
            vec![0.0, 0.0, 0.0, 12.0, 0.0, 0.04],
            vec![0.0, 0.0, 0.02, 0.02, 0.01],
        ),
        (ModelKind::Kinematic, vec![0.0, 0.0, 0.0, 12.0], vec![0.8, 0.01]),
    ] {
        let oracle = simulate(Model::new(kind, &surface, &p), &z0, &u, surface.length());
        let mut residuals = Vec::new();
        for intervals in [4, 8, 16] {
            let prob = transcribe(kind, &surface, &p, &options(intervals)).unwrap();
            let x = sampled_solution(&prob, &oracle, &u);
            let mut c = vec![0.0; prob.num_constraints()];
            prob.constraints(&x, &mut c);
            let rows_per_interval = prob.num_constraints() / intervals;
            let mut defect: f64 = 0.0;
            for (r, kind) in prob.row_kinds().iter().enumerate() {
                let start = (r / rows_per_interval) as f64 * prob.step;
                if *kind == RowKind::Defect && start >= settle {
                    defect = defect.max(c[r].abs());
                }
            }
            assert!(prob.max_violation_of(&x, RowKind::Algebraic) < 1e-8);
            assert!(prob.max_violation_of(&x, RowKind::Time) < 1e-3 / intervals as f64);
            residuals.push(defect);
        }
        let orders: Vec<f64> = residuals.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
        eprintln!("{kind:?} residuals {residuals:?} orders {orders:?}");
        assert!(residuals[2] < 1e-5, "{kind:?} {residuals:?}");
        assert!(
            orders.iter().all(|&o| o > 2.5),
            "{kind:?} residuals {residuals:?} orders {orders:?}"
        );
    }
}

/// A point strictly inside the bounds with states near a plausible regime.
fn random_point(prob: &CollocationProblem, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let l = prob.layout;
    let (lo, up) = prob.variable_bounds();
    let mut x = prob.initial_point();
    let hw = prob.surface().half_width();
    let state = |x: &mut [f64], c: usize, rng: &mut ChaCha8Rng| {
        x[c + 1] = rng.gen_range(-0.6..0.6) * hw;
        x[c + 2] = rng.gen_range(-0.3..0.3);
        x[c + 3] = rng.gen_range(5.0..25.0);
        if l.nz == 6 {
            x[c + 4] = rng.gen_range(-1.0..1.0);
            x[c + 5] = rng.gen_range(-0.5..0.5);
        }
    };
    for k in 1..=l.intervals {
        state(&mut x, l.state(k), rng);
    }
    for k in 0..l.intervals {
        for j in 0..l.degree {
            let c = l.point(k, j);
            state(&mut x, c, rng);
            for i in 0..l.nu {
                let col = c + l.input_offset() + i;
                let (a, b) = (lo[col].max(-3.0), up[col].min(3.0));
                x[col] = a + (b - a) * rng.gen_range(0.1..0.9);
                x[c + l.rate_offset() + i] = rng.gen_range(-1.0..1.0);
            }
            for i in 0..l.ng {
                x[c + l.algebraic_offset() + i] *= rng.gen_range(0.9..1.1);
            }
        }
        x[l.time_step(k)] = rng.gen_range(0.1..1.0);
    }
    x
}

fn dense_jacobian(prob: &CollocationProblem, x: &[f64]) -> Vec<Vec<f64>> {
    let mut d = vec![vec![0.0; prob.num_variables()]; prob.num_constraints()];
    let s = prob.jacobian_structure();
    let mut v = vec![0.0; s.len()];
    prob.jacobian_values(x, &mut v);
    for (&(r, c), val) in s.iter().zip(v) {
        d[r][c] += val;
    }
    d
}

fn fd_column(prob: &CollocationProblem, x: &[f64], col: usize, step: f64) -> Vec<f64> {
    let m = prob.num_constraints();
    let (mut cp, mut cm) = (vec![0.0; m], vec![0.0; m]);
    let mut xp = x.to_vec();
    xp[col] += step;
    prob.constraints(&xp, &mut cp);
    xp[col] -= 2.0 * step;
    prob.constraints(&xp, &mut cm);
    (0..m).map(|r| (cp[r] - cm[r]) / (2.0 * step)).collect()
}

#[test]
fn jacobian_pattern_covers_every_probed_nonzero() {
    let p = vehicle();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for kind in [ModelKind::TwoTrack, ModelKind::DynamicBicycle, ModelKind::Kinematic] {
        let prob = transcribe(kind, &track("tube_turn"), &p, &options(3)).unwrap();
        let mut pattern = vec![std::collections::HashSet::new(); prob.num_constraints()];
        for (r, c) in prob.jacobian_structure() {
            pattern[r].insert(c);
        }
        for _ in 0..3 {
            let x = random_point(&prob, &mut rng);
            for col in 0..prob.num_variables() {
                for (r, d) in fd_column(&prob, &x, col, 1e-6).iter().enumerate() {
                    if d.abs() > 1e-9 {
                        assert!(pattern[r].contains(&col), "{kind:?}: row {r} col {col} = {d}");
                    }
                }
            }
        }
    }
}

/// Largest relative difference between AD and central differences. Each
/// entry is compared against `max(|fd|, 1e-3 · largest entry in its row)`
/// after discounting the rounding noise of the difference quotient.
fn jacobian_fd_error(prob: &CollocationProblem, x: &[f64]) -> f64 {
    let ad = dense_jacobian(prob, x);
    let mut c = vec![0.0; prob.num_constraints()];
    prob.constraints(x, &mut c);
    let mut fd = vec![vec![0.0; prob.num_variables()]; prob.num_constraints()];
    let mut noise = vec![vec![0.0; prob.num_variables()]; prob.num_constraints()];
    for col in 0..prob.num_variables() {
        let step = 1e-6 * x[col].abs().max(1.0);
        for (r, d) in fd_column(prob, x, col, step).into_iter().enumerate() {
            fd[r][col] = d;
            noise[r][col] = 8.0 * f64::EPSILON * c[r].abs().max(1.0) / step;
        }
    }
    let mut worst: f64 = 0.0;
    for r in 0..ad.len() {
        let row_scale = fd[r].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for col in 0..ad[r].len() {
            let (a, f) = (ad[r][col], fd[r][col]);
            let den = f.abs().max(1e-3 * row_scale);
            let diff = ((a - f).abs() - noise[r][col]).max(0.0);
            if diff > 0.0 {
                worst = worst.max(diff / den);
            }
        }
    }
    worst
}

#[test]
fn jacobian_matches_central_differences() {
    let p = vehicle();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for kind in ModelKind::ALL {
        let prob = transcribe(kind, &track("tube_turn"), &p, &options(3)).unwrap();
        for _ in 0..4 {
            let x = random_point(&prob, &mut rng);
            let err = jacobian_fd_error(&prob, &x);
            assert!(err < 1e-5, "{kind:?}: {err:e}");
        }
    }
}

#[test]
fn gradient_and_hessian_match_differences() {
    let p = vehicle();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for kind in [ModelKind::TwoTrack, ModelKind::Kinematic] {
        let prob = transcribe(kind, &track("tube_turn"), &p, &options(2)).unwrap();
        let (n, m) = (prob.num_variables(), prob.num_constraints());
        let x = random_point(&prob, &mut rng);
        let lambda: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let obj_factor = 0.7;
        // Gradient of the Lagrangian from the first-derivative callbacks.
        let lag_grad = |x: &[f64]| {
            let mut g = vec![0.0; n];
            prob.objective_gradient(x, &mut g);
            g.iter_mut().for_each(|v| *v *= obj_factor);
            let s = prob.jacobian_structure();
            let mut jv = vec![0.0; s.len()];
            prob.jacobian_values(x, &mut jv);
            for (&(r, c), v) in s.iter().zip(jv) {
                g[c] += lambda[r] * v;
            }
            g
        };
        let mut g = vec![0.0; n];
        prob.objective_gradient(&x, &mut g);
        for col in (0..n).step_by(3) {
            let mut xp = x.clone();
            xp[col] += 1e-6;
            let fp = prob.objective(&xp);
            xp[col] -= 2e-6;
            let fd = (fp - prob.objective(&xp)) / 2e-6;
            assert!(
                (fd - g[col]).abs() < 1e-6 * fd.abs().max(1.0),
                "{kind:?} grad col {col}"
            );
        }
        let hs = prob.hessian_structure();
        let mut hv = vec![0.0; hs.len()];
        prob.hessian_values(&x, obj_factor, &lambda, &mut hv);
        let mut dense = vec![vec![0.0; n]; n];
        for (&(r, c), v) in hs.iter().zip(&hv) {
            assert!(r >= c);
            dense[r][c] += v;
            if r != c {
                dense[c][r] += v;
            }
        }
        for col in 0..n {
            let mut xp = x.clone();
            xp[col] += 1e-5;
            let gp = lag_grad(&xp);
            xp[col] -= 2e-5;
            let gm = lag_grad(&xp);
            let scale = gp
                .iter()
                .zip(&gm)
                .fold(1.0f64, |a, (p, q)| a.max(((p - q) / 2e-5).abs()));
            for r in 0..n {
                let fd = (gp[r] - gm[r]) / 2e-5;
                assert!(
                    (fd - dense[r][col]).abs() < 1e-5 * scale,
                    "{kind:?} hessian ({r}, {col}): fd {fd} vs {}",
                    dense[r][col]
                );
            }
        }
    }
}

#[test]
fn kinematic_flat_track_solves_to_feasibility() {
    let p = vehicle();
    let run = compute_raceline(
        ModelKind::Kinematic,
        &track("l_track"),
        &p,
        &options(25),
        &SolverOptions::default(),
        None,
    )
    .unwrap();
    assert_eq!(run.solution.status, SolverStatus::Solved);
    assert!(run.solution.kkt.primal_infeasibility < 1e-6);
    let r = run.raceline.unwrap();
    assert!(r.max_violation < 1e-6);
    assert!(r.lap_time > 0.0);
    assert!((r.lap_time - (run.solution.objective - r.regularization)).abs() < 1e-9);
    let hw = track("l_track").half_width();
    assert!(r.trajectory.samples.iter().all(|s| s.z[1].abs() <= hw + 1e-6));
    let last = r.trajectory.samples.last().unwrap();
    assert!((last.t - r.lap_time).abs() < 1e-9);
    assert!((last.z[0] - track("l_track").length()).abs() < 1e-6);
}

#[test]
fn loop_closed_raceline_meets_itself() {
    let p = vehicle();
    let radius = 30.0;
    let len = 2.0 * std::f64::consts::PI * radius;
    let mut cfg = SurfaceConfig::flat_straight(len, 4.0);
    cfg.closed = true;
    cfg.yaw = AngleProfile {
        knots: vec![[0.0, 0.0], [len, 2.0 * std::f64::consts::PI]],
    };
    let surface = Surface::build(cfg).unwrap();
    let run = compute_raceline(
        ModelKind::Kinematic,
        &surface,
        &p,
        &options(12),
        &SolverOptions::default(),
        None,
    )
    .unwrap();
    assert!(run.problem.closed);
    assert_eq!(run.solution.status, SolverStatus::Solved);
    let r = run.raceline.unwrap();
    let (first, last) = (&r.trajectory.samples[0], r.trajectory.samples.last().unwrap());
    assert!((last.z[0] - first.z[0] - len).abs() < 1e-6);
    for i in 1..first.z.len() {
        assert!((first.z[i] - last.z[i]).abs() < 1e-6, "state {i}");
    }
    // Steady cornering on a circle: speed bounded by the friction limit on
    // the widest radius.
    let v_max = (p.tire.mu * p.g * (radius + 4.0)).sqrt();
    assert!(r.trajectory.samples.iter().all(|s| s.z[3] < v_max * 1.01));
    assert!(len / r.lap_time > 0.8 * (p.tire.mu * p.g * (radius - 4.0)).sqrt());
}

#[test]
fn infeasible_points_are_not_extracted() {
    let p = vehicle();
    let prob = transcribe(ModelKind::Kinematic, &track("l_track"), &p, &options(5)).unwrap();
    let x = prob.initial_point();
    match extract_raceline(&prob, &x, 1e-6) {
        Err(ExtractError::Infeasible { max_violation, .. }) => {
            assert!(max_violation > 1e-6);
            assert_eq!(max_violation, prob.max_violation(&x));
        }
        other => panic!("expected refusal, got {:?}", other.map(|r| r.lap_time)),
    }
    assert!(matches!(
        extract_raceline(&prob, &x[1..], 1.0),
        Err(ExtractError::Length { .. })
    ));
}

proptest! {
    #[test]
    fn layout_positions_tile_the_variable_vector(kind_index in 0..4usize, intervals in 1..30usize, degree in 1..7usize) {
        let kind = ModelKind::ALL[kind_index];
        let l = Layout::new(kind, intervals, degree);
        let width = kind.state_dim() + 2 * kind.input_dim() + kind.algebraic_dim();
        prop_assert_eq!(
            l.num_variables(),
            intervals * degree * width + (intervals + 1) * kind.state_dim() + intervals
        );
        let mut seen = vec![false; l.num_variables()];
        let mut mark = |a: usize, len: usize| -> bool {
            seen[a..a + len].iter_mut().all(|s| !std::mem::replace(s, true))
        };
        for k in 0..=intervals {
            prop_assert!(mark(l.state(k), l.nz));
        }
        for k in 0..intervals {
            for j in 0..degree {
                prop_assert!(mark(l.point(k, j), l.point_width()));
            }
            prop_assert!(mark(l.time_step(k), 1));
        }
        prop_assert!(seen.iter().all(|&s| s));
    }
}

#[test]
fn multistart_keeps_the_best_converged_start() {
    let p = vehicle();
    let sf = track("l_track");
    let opts = options(10);
    let solver = SolverOptions::default();
    let factors = [1.0, 0.8, 1.5];
    let best = compute_raceline_multistart(ModelKind::DynamicBicycle, &sf, &p, &opts, &solver, &factors, None).unwrap();
    assert!(best.solved());
    for f in factors {
        let single = CollocationOptions {
            cruise_speed: opts.cruise_speed * f,
            initial_speed: Some(opts.cruise_speed),
            ..opts.clone()
        };
        let run = compute_raceline(ModelKind::DynamicBicycle, &sf, &p, &single, &solver, None).unwrap();
        // Every start fixes the same initial speed, so all solve the same problem.
        assert_eq!(run.problem.initial_state(), best.problem.initial_state());
        if run.solved() {
            assert!(best.objective() <= run.objective(), "factor {f}");
        }
    }
    assert!(compute_raceline_multistart(ModelKind::Kinematic, &sf, &p, &opts, &solver, &[], None).is_err());
}

#[test]
fn warm_start_from_a_solution_recovers_it() {
    let p = vehicle();
    let sf = track("tube_turn");
    let opts = options(10);
    let solver = SolverOptions::default();
    let cold = compute_raceline(ModelKind::Kinematic, &sf, &p, &opts, &solver, None).unwrap();
    assert!(cold.solved());
    let reference = cold.raceline.as_ref().unwrap();

    let mut prob = transcribe(ModelKind::Kinematic, &sf, &p, &opts).unwrap();
    prob.warm_start(reference);
    let x0 = prob.initial_point();
    // Before any iteration the warm start is close to the reference lap time;
    // not exact, since states are interpolated linearly between dense samples.
    assert!((prob.lap_time(&x0) - reference.lap_time).abs() < 1e-3 * reference.lap_time);
    let warm = solve_problem(prob, &solver, None);
    assert!(warm.solved());
    assert!((warm.raceline.unwrap().lap_time - reference.lap_time).abs() < 1e-4 * reference.lap_time);

    // A two-track problem started from the kinematic raceline is feasible enough to solve.
    let mut prob = transcribe(ModelKind::TwoTrack, &sf, &p, &opts).unwrap();
    prob.warm_start(reference);
    let (lo, up) = prob.variable_bounds();
    assert!(prob
        .initial_point()
        .iter()
        .zip(lo.iter().zip(&up))
        .all(|(x, (l, u))| l <= x && x <= u));
    assert!(solve_problem(prob, &solver, None).solved());
}

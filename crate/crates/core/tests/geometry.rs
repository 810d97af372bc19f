use nonplanar_core::kinematics::surface_angular_velocity;
use nonplanar_core::linalg::V3;
use nonplanar_core::models::{Model, ModelKind};
use nonplanar_core::params::VehicleParams;
use nonplanar_core::simulation::{InputSchedule, RolloutOptions, Simulator};
use nonplanar_core::surface::{orientation_from_theta_s, AngleProfile, Surface, SurfaceConfig};
use proptest::prelude::*;

fn twisted_tube() -> Surface {
    let mut cfg = SurfaceConfig::flat_straight(150.0, 4.5);
    cfg.cross_curvature = 0.2;
    cfg.yaw = AngleProfile {
        knots: vec![[0.0, 0.0], [40.0, 0.1], [80.0, 1.7], [120.0, 3.1], [150.0, 3.2]],
    };
    cfg.pitch = AngleProfile {
        knots: vec![[0.0, 0.0], [60.0, 0.12], [150.0, -0.05]],
    };
    cfg.roll = AngleProfile {
        knots: vec![[0.0, 0.0], [80.0, -0.35], [150.0, 0.1]],
    };
    Surface::build(cfg).unwrap()
}

fn rel_vec_err(ad: V3<f64>, fd: [f64; 3]) -> f64 {
    let diff = (0..3).map(|k| (ad.0[k] - fd[k]).powi(2)).sum::<f64>().sqrt();
    let scale = ad.norm().max(fd.iter().map(|v| v * v).sum::<f64>().sqrt());
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn central(f: impl Fn(f64) -> V3<f64>, x: f64, h: f64) -> [f64; 3] {
    let (p, m) = (f(x + h), f(x - h));
    std::array::from_fn(|k| (p.0[k] - m.0[k]) / (2.0 * h))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn partials_match_finite_differences(s in 1.0..149.0f64, y in -4.4..4.4f64) {
        let sf = twisted_tube();
        let j = sf.evaluate_jet(s, y).unwrap();
        let hs = 1e-5 * s.abs().max(1.0);
        let hy = 1e-5 * y.abs().max(1.0);
        let checks = [
            (j.x_s, central(|t| sf.jet_direct(t, y).x_p, s, hs)),
            (j.x_y, central(|t| sf.jet_direct(s, t).x_p, y, hy)),
            (j.x_ss, central(|t| sf.jet_direct(t, y).x_s, s, hs)),
            (j.x_sy, central(|t| sf.jet_direct(s, t).x_s, y, hy)),
            (j.x_yy, central(|t| sf.jet_direct(s, t).x_y, y, hy)),
        ];
        for (k, (ad, fd)) in checks.into_iter().enumerate() {
            let e = rel_vec_err(ad, fd);
            prop_assert!(e < 1e-5, "partial {} rel err {:.3e}", k, e);
        }
    }

    #[test]
    fn orientation_is_orthonormal(s in 0.0..150.0f64, y in -4.5..4.5f64, th in -3.1..3.1f64) {
        let sf = twisted_tube();
        let j = sf.evaluate_jet(s, y).unwrap();
        let r = orientation_from_theta_s(&j, th).0.values();
        for a in 0..3 {
            for b in 0..3 {
                let dot: f64 = (0..3).map(|k| r[k][a] * r[k][b]).sum();
                let expect = if a == b { 1.0 } else { 0.0 };
                prop_assert!((dot - expect).abs() < 1e-9);
            }
        }
        // Right-handed, with the third axis along the surface normal.
        let e1 = V3([r[0][0], r[1][0], r[2][0]]);
        let e2 = V3([r[0][1], r[1][1], r[2][1]]);
        let e3 = e1.cross(&e2);
        for k in 0..3 {
            prop_assert!((e3.0[k] - j.e_n.0[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn cylinder_rolling_rate(kappa in 0.02..0.2f64, y in -2.0..2.0f64, v in 1.0..30.0f64) {
        let mut cfg = SurfaceConfig::flat_straight(50.0, 4.0);
        cfg.cross_curvature = kappa;
        let sf = Surface::build(cfg).unwrap();
        let j = sf.evaluate_jet(20.0, y).unwrap();
        // Heading across the straight generators, i.e. along the curved direction.
        let th = std::f64::consts::FRAC_PI_2;
        let w = surface_angular_velocity(&j, th, 0.0, v, 0.0).unwrap();
        prop_assert!((w[0].hypot(w[1]) - kappa * v).abs() < 1e-9);
    }
}

#[test]
fn planar_and_nonplanar_kinematic_agree_on_flat_ground() {
    let p = VehicleParams::default();
    let mut cfg = SurfaceConfig::flat_straight(400.0, 8.0);
    cfg.yaw = AngleProfile {
        knots: vec![[0.0, 0.0], [100.0, 0.5], [200.0, -0.2], [400.0, 0.3]],
    };
    let sf = Surface::build(cfg).unwrap();
    let fl = sf.flattened().unwrap();
    let sched = InputSchedule {
        axis: Default::default(),
        knots: vec![0.0, 4.0, 10.0],
        inputs: vec![vec![0.5, 0.02], vec![-0.3, -0.03], vec![0.2, 0.01]],
    };
    let opts = RolloutOptions {
        dt: 0.005,
        duration: 10.0,
        ..Default::default()
    };
    let z0 = [0.0, 0.5, 0.0, 15.0];
    let a = Simulator::new(Model::new(ModelKind::Kinematic, &sf, &p))
        .rollout(&z0, &sched, &opts)
        .unwrap();
    let b = Simulator::new(Model::new(ModelKind::KinematicPlanar, &fl, &p))
        .rollout(&z0, &sched, &opts)
        .unwrap();
    assert_eq!(a.samples.len(), b.samples.len());
    let worst = a
        .samples
        .iter()
        .zip(&b.samples)
        .flat_map(|(x, y)| x.z.iter().zip(&y.z).map(|(u, v)| (u - v).abs()))
        .fold(0.0, f64::max);
    assert!(worst < 1e-9, "max divergence {worst:.3e}");
}

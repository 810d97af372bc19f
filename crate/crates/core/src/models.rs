//! Vehicle models on a parametric surface: the two-track DAE model with
//! algebraic weight distribution, the kinematic bicycle with a friction cone
//! (also used on a flattened track), and the dynamic bicycle with quasi-static
//! axle loads.
//!
//! Every model keeps its centre of mass at a fixed normal offset `h` above the
//! road, so all contact patches lie on the surface.

use crate::autodiff::Scalar;
use crate::kinematics::{KinematicOperators, KinematicsError};
use crate::linalg::V3;
use crate::params::VehicleParams;
use crate::surface::{orientation_from_theta_s, OrientationMatrix, Surface};
use crate::tire::{ackermann_angles, contact_velocity, friction_coefficients_lifted, slip_angle};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    TwoTrack,
    Kinematic,
    KinematicPlanar,
    DynamicBicycle,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Kinematic,
        ModelKind::KinematicPlanar,
        ModelKind::DynamicBicycle,
        ModelKind::TwoTrack,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::TwoTrack => "two_track",
            ModelKind::Kinematic => "kinematic",
            ModelKind::KinematicPlanar => "kinematic_planar",
            ModelKind::DynamicBicycle => "dynamic_bicycle",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn state_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::Kinematic | ModelKind::KinematicPlanar => &["s", "y", "theta_s", "v"],
            _ => &["s", "y", "theta_s", "v1", "v2", "omega3"],
        }
    }

    pub fn input_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::TwoTrack => &["sigma_fr", "sigma_fl", "sigma_rr", "sigma_rl", "gamma"],
            _ => &["a", "gamma"],
        }
    }

    pub fn state_dim(self) -> usize {
        self.state_names().len()
    }

    pub fn input_dim(self) -> usize {
        self.input_names().len()
    }

    pub fn algebraic_dim(self) -> usize {
        match self {
            ModelKind::TwoTrack => 3,
            _ => 0,
        }
    }

    /// Number of path constraints reported in [`ModelEval::path`].
    pub fn path_dim(self) -> usize {
        match self {
            ModelKind::TwoTrack => 4,
            ModelKind::Kinematic | ModelKind::KinematicPlanar => 2,
            ModelKind::DynamicBicycle => 3,
        }
    }

    /// Bounds of the path constraints, in the dimensionless form documented
    /// on [`ModelEval::path`].
    pub fn path_bounds(self, p: &VehicleParams) -> Vec<(f64, f64)> {
        let w = p.weight();
        match self {
            ModelKind::TwoTrack => vec![(0.0, p.n_max / (2.0 * w)); 4],
            ModelKind::Kinematic | ModelKind::KinematicPlanar => {
                vec![(0.0, p.n_max / w), (f64::NEG_INFINITY, 0.0)]
            }
            ModelKind::DynamicBicycle => vec![(0.0, p.n_max / w), (f64::NEG_INFINITY, 0.0), (f64::NEG_INFINITY, 0.0)],
        }
    }

    pub fn input_bounds(self, p: &VehicleParams) -> Vec<(f64, f64)> {
        let steer = (-p.gamma_max, p.gamma_max);
        match self {
            ModelKind::TwoTrack => {
                let sl = (-p.sigma_max, p.sigma_max);
                vec![sl, sl, sl, sl, steer]
            }
            _ => vec![(f64::NEG_INFINITY, f64::INFINITY), steer],
        }
    }

    /// True when the model runs on the track with pitch, roll and
    /// cross-section curvature removed.
    pub fn uses_flattened_track(self) -> bool {
        self == ModelKind::KinematicPlanar
    }
}

/// Everything a model evaluation produces. Arrays are sized for the largest
/// model; only the leading `state_dim`, `algebraic_dim`, `path_dim` entries
/// are meaningful.
#[derive(Clone, Copy, Debug)]
pub struct ModelEval<S> {
    pub rates: [S; 6],
    /// `Ĝ(Z, U, G) − G` in newtons (N/m for the third entry).
    pub algebraic: [S; 3],
    /// Two-track: per-tire normal forces over `m g`. Kinematic: net normal
    /// force over `m g`, then `(a² + a_lat² − (μN/m)²) / g²`. Dynamic bicycle:
    /// net normal force over `m g`, then `(m a ∓ μN) / (m g)`.
    pub path: [S; 4],
    /// Two-track: per-tire normal forces `[fr, fl, rr, rl]`. Bicycle models:
    /// the net normal force in the first entry.
    pub normals: [S; 4],
    /// Roll and pitch rates imposed by the surface.
    pub omega12: [S; 2],
}

impl<S: Scalar> ModelEval<S> {
    fn empty() -> Self {
        let z = S::zero();
        Self {
            rates: [z; 6],
            algebraic: [z; 3],
            path: [z; 4],
            normals: [z; 4],
            omega12: [z; 2],
        }
    }
}

/// Gravity in body axes: `F_i = −m g (e_i · ẑ)`.
pub fn gravity_body<S: Scalar>(r: &OrientationMatrix<S>, p: &VehicleParams) -> V3<S> {
    let w = -p.weight();
    V3([r.e1().0[2] * w, r.e2().0[2] * w, r.e3().0[2] * w])
}

/// Per-tire normal forces `[fr, fl, rr, rl]` from `G = [N_f, N_r, Δ]`.
pub fn per_tire_normals<S: Scalar>(g: [S; 3], p: &VehicleParams) -> [S; 4] {
    let [nf, nr, d] = g;
    [
        nf * 0.5 - d * p.t_f,
        nf * 0.5 + d * p.t_f,
        nr * 0.5 - d * p.t_r,
        nr * 0.5 + d * p.t_r,
    ]
}

/// Axle loads and left-right transfer of a vehicle at rest on level ground.
pub fn static_algebraic(p: &VehicleParams) -> [f64; 3] {
    let w = p.weight();
    let wb = p.wheelbase();
    [w * p.l_r / wb, w * p.l_f / wb, 0.0]
}

/// Drag force along `e1` and yaw moment.
fn drag<S: Scalar>(v1: S, omega3: S, p: &VehicleParams) -> (S, S) {
    let d = &p.drag;
    let f1 = -(v1 * d.linear) - v1 * v1.abs() * d.quadratic;
    let k3 = -(omega3 * d.yaw);
    (f1, k3)
}

/// Surface terms shared by all models at one pose and body velocity.
struct PoseTerms<S> {
    ops: KinematicOperators<S>,
    /// `e_i · ẑ` for the body axes.
    up: [S; 3],
    omega12: [S; 2],
}

fn pose_terms<S: Scalar>(
    surface: &Surface,
    p: &VehicleParams,
    s: S,
    y: S,
    theta_s: S,
    v1: S,
    v2: S,
) -> Result<PoseTerms<S>, ModelError> {
    let jet = surface.jet(s, y);
    let ops = KinematicOperators::new(&jet, theta_s, p.h)?;
    let r = orientation_from_theta_s(&jet, theta_s);
    let up = [r.e1().0[2], r.e2().0[2], r.e3().0[2]];
    let omega12 = ops.tilt_rates(v1, v2);
    Ok(PoseTerms { ops, up, omega12 })
}

/// Normal force needed to hold the body in tangent contact:
/// `m (v2 ω1 − v1 ω2) − F^g_3 − F^d_3` with no normal drag.
fn contact_normal<S: Scalar>(p: &VehicleParams, pt: &PoseTerms<S>, v1: S, v2: S) -> S {
    let [w1, w2] = pt.omega12;
    (v2 * w1 - v1 * w2) * p.m + pt.up[2] * p.weight()
}

/// Two-track model `Ż = f(Z, U, G)` together with the weight-distribution
/// residual `g_c(Z, U, G)`.
///
/// `Z = [s, y, θ_s, v1, v2, ω3]`, `U = [σ_fr, σ_fl, σ_rr, σ_rl, γ]`,
/// `G = [N_f, N_r, Δ]`.
pub fn two_track<S: Scalar>(
    z: [S; 6],
    u: [S; 5],
    g: [S; 3],
    surface: &Surface,
    p: &VehicleParams,
) -> Result<ModelEval<S>, ModelError> {
    let [s, y, theta_s, v1, v2, w3] = z;
    let pt = pose_terms(surface, p, s, y, theta_s, v1, v2)?;
    let [w1, w2] = pt.omega12;
    let normals = per_tire_normals(g, p);
    let [g_fr, g_fl] = ackermann_angles(u[4], p.l_f, p.l_r, p.t_f);
    let steer = [g_fr, g_fl, S::zero(), S::zero()];

    let v = V3([v1, v2, S::zero()]);
    let omega = V3([w1, w2, w3]);
    let (mut ft1, mut ft2, mut kt3) = (S::zero(), S::zero(), S::zero());
    for (i, wheel) in p.wheels().iter().enumerate() {
        let vc = contact_velocity(v, omega, wheel, steer[i]);
        let alpha = slip_angle(vc);
        let [mx, my] = friction_coefficients_lifted(u[i], alpha, &p.tire);
        let (fx, fy) = (normals[i] * mx, normals[i] * my);
        let (sn, cs) = (steer[i].sin(), steer[i].cos());
        let f1 = cs * fx - sn * fy;
        let f2 = sn * fx + cs * fy;
        ft1 += f1;
        ft2 += f2;
        kt3 += f2 * wheel.offset[0] - f1 * wheel.offset[1];
    }

    let w = p.weight();
    let fg = [pt.up[0] * -w, pt.up[1] * -w, pt.up[2] * -w];
    let (fd1, kd3) = drag(v1, w3, p);
    let f1 = fd1 + fg[0] + ft1;
    let f2 = fg[1] + ft2;
    let k3 = kd3 + kt3;

    let v1_dot = f1 / p.m + v2 * w3;
    let v2_dot = f2 / p.m - v1 * w3;
    let w3_dot = (k3 - w1 * w2 * (p.i2 - p.i1)) / p.i3;
    let rates = pt.ops.rates(v1, v2, w3);
    let [w1_dot, w2_dot] = pt.ops.tilt_rates(v1_dot, v2_dot);

    // Force and moments the constraint must supply to keep tangent contact.
    let f3_req = (v2 * w1 - v1 * w2) * p.m;
    let k1_req = w1_dot * p.i1 + w2 * w3 * (p.i3 - p.i2);
    let k2_req = w2_dot * p.i2 + w3 * w1 * (p.i1 - p.i3);
    // Strip everything except the normal-force contributions.
    let f3_n = f3_req - fg[2];
    let k1_n = k1_req - ft2 * p.h;
    let k2_n = k2_req + ft1 * p.h;
    let wb = p.wheelbase();
    let nf_req = f3_n * (p.l_r / wb) - k2_n / wb;
    let nr_req = f3_n * (p.l_f / wb) + k2_n / wb;
    let d_req = k1_n / (2.0 * p.t_f * p.t_f + 2.0 * p.t_r * p.t_r);

    let mut out = ModelEval::empty();
    out.rates = [rates.s_dot, rates.y_dot, rates.theta_s_dot, v1_dot, v2_dot, w3_dot];
    out.algebraic = [nf_req - g[0], nr_req - g[1], d_req - g[2]];
    out.normals = normals;
    for i in 0..4 {
        out.path[i] = normals[i] / w;
    }
    out.omega12 = pt.omega12;
    Ok(out)
}

/// Sideslip of the kinematic bicycle referenced to the centre of mass.
pub fn kinematic_sideslip<S: Scalar>(gamma: S, p: &VehicleParams) -> S {
    (gamma.tan() * (p.l_r / p.wheelbase())).atan()
}

/// Kinematic bicycle on the surface. `Z = [s, y, θ_s, v]`, `U = [a, γ]`.
pub fn kinematic_bicycle<S: Scalar>(
    z: [S; 4],
    u: [S; 2],
    surface: &Surface,
    p: &VehicleParams,
) -> Result<ModelEval<S>, ModelError> {
    let [s, y, theta_s, v] = z;
    let [a, gamma] = u;
    let beta = kinematic_sideslip(gamma, p);
    let (sb, cb) = (beta.sin(), beta.cos());
    let (v1, v2) = (v * cb, v * sb);
    let w3 = v * sb / p.l_r;
    let pt = pose_terms(surface, p, s, y, theta_s, v1, v2)?;
    let rates = pt.ops.rates(v1, v2, w3);
    let (fd1, _) = drag(v, w3, p);
    let v_dot = a + fd1 / p.m - (pt.up[0] * cb + pt.up[1] * sb) * p.g;
    let normal = contact_normal(p, &pt, v1, v2);

    // Lateral acceleration the tires must supply: cornering plus the
    // gravity component across the direction of travel.
    let lat_gravity = -((pt.up[0] * sb - pt.up[1] * cb) * p.g);
    let lat = lat_gravity + v * v * gamma / p.wheelbase();
    let grip = normal * (p.tire.mu / p.m);

    let mut out = ModelEval::empty();
    out.rates[..4].copy_from_slice(&[rates.s_dot, rates.y_dot, rates.theta_s_dot, v_dot]);
    out.normals[0] = normal;
    out.path[0] = normal / p.weight();
    out.path[1] = (a * a + lat * lat - grip * grip) / (p.g * p.g);
    out.omega12 = pt.omega12;
    Ok(out)
}

/// `(m / (μN))² (a² + a_lat²)` for a kinematic-bicycle evaluation: the
/// friction cone written as a ratio that must stay at most 1.
pub fn friction_cone_ratio(eval: &ModelEval<f64>, p: &VehicleParams) -> f64 {
    let grip = eval.normals[0] * p.tire.mu / p.m;
    let demand = eval.path[1] * p.g * p.g + grip * grip;
    demand / (grip * grip)
}

/// Dynamic bicycle with quasi-static axle loads and lateral-only tire forces.
/// `Z = [s, y, θ_s, v1, v2, ω3]`, `U = [a, γ]`.
pub fn dynamic_bicycle<S: Scalar>(
    z: [S; 6],
    u: [S; 2],
    surface: &Surface,
    p: &VehicleParams,
) -> Result<ModelEval<S>, ModelError> {
    let [s, y, theta_s, v1, v2, w3] = z;
    let [a, gamma] = u;
    let pt = pose_terms(surface, p, s, y, theta_s, v1, v2)?;
    let [w1, w2] = pt.omega12;
    let normal = contact_normal(p, &pt, v1, v2);
    let wb = p.wheelbase();
    let (n_front, n_rear) = (normal * (p.l_r / wb), normal * (p.l_f / wb));

    let v = V3([v1, v2, S::zero()]);
    let omega = V3([w1, w2, w3]);
    let front = crate::tire::WheelGeometry {
        id: crate::tire::WheelId::Fl,
        offset: [p.l_f, 0.0, -p.h],
        steered: true,
    };
    let rear = crate::tire::WheelGeometry {
        id: crate::tire::WheelId::Rl,
        offset: [-p.l_r, 0.0, -p.h],
        steered: false,
    };
    let alpha_f = slip_angle(contact_velocity(v, omega, &front, gamma));
    let alpha_r = slip_angle(contact_velocity(v, omega, &rear, S::zero()));
    let fy_f = n_front * friction_coefficients_lifted(S::zero(), alpha_f, &p.tire)[1];
    let fy_r = n_rear * friction_coefficients_lifted(S::zero(), alpha_r, &p.tire)[1];

    let w = p.weight();
    let (fd1, kd3) = drag(v1, w3, p);
    let (sg, cg) = (gamma.sin(), gamma.cos());
    let f1 = a * p.m - sg * fy_f - pt.up[0] * w + fd1;
    let f2 = fy_r + cg * fy_f - pt.up[1] * w;
    let k3 = cg * fy_f * p.l_f - fy_r * p.l_r + kd3;

    let rates = pt.ops.rates(v1, v2, w3);
    let mut out = ModelEval::empty();
    out.rates = [
        rates.s_dot,
        rates.y_dot,
        rates.theta_s_dot,
        f1 / p.m + v2 * w3,
        f2 / p.m - v1 * w3,
        (k3 - w1 * w2 * (p.i2 - p.i1)) / p.i3,
    ];
    out.normals[0] = normal;
    let grip = normal * p.tire.mu;
    out.path[0] = normal / w;
    out.path[1] = (a * p.m - grip) / w;
    out.path[2] = (-(a * p.m) - grip) / w;
    out.omega12 = pt.omega12;
    Ok(out)
}

/// Net normal force for a body at pose `(s, y, θ_s)` moving with `(v1, v2)`.
pub fn net_normal_force(
    surface: &Surface,
    p: &VehicleParams,
    pose: [f64; 3],
    v1: f64,
    v2: f64,
) -> Result<f64, ModelError> {
    let pt = pose_terms(surface, p, pose[0], pose[1], pose[2], v1, v2)?;
    Ok(contact_normal(p, &pt, v1, v2))
}

/// A model bound to a surface and a parameter set, evaluated on slices laid
/// out as `[Z | U | G]` with the model's dimensions.
#[derive(Clone, Copy)]
pub struct Model<'a> {
    pub kind: ModelKind,
    pub surface: &'a Surface,
    pub params: &'a VehicleParams,
}

impl<'a> Model<'a> {
    pub fn new(kind: ModelKind, surface: &'a Surface, params: &'a VehicleParams) -> Self {
        Self { kind, surface, params }
    }

    pub fn evaluate<S: Scalar>(&self, z: &[S], u: &[S], g: &[S]) -> Result<ModelEval<S>, ModelError> {
        match self.kind {
            ModelKind::TwoTrack => two_track(
                std::array::from_fn(|i| z[i]),
                std::array::from_fn(|i| u[i]),
                std::array::from_fn(|i| g[i]),
                self.surface,
                self.params,
            ),
            ModelKind::Kinematic | ModelKind::KinematicPlanar => kinematic_bicycle(
                std::array::from_fn(|i| z[i]),
                std::array::from_fn(|i| u[i]),
                self.surface,
                self.params,
            ),
            ModelKind::DynamicBicycle => dynamic_bicycle(
                std::array::from_fn(|i| z[i]),
                std::array::from_fn(|i| u[i]),
                self.surface,
                self.params,
            ),
        }
    }

    /// Body-frame velocity `(v1, v2, ω3)` of a state of this model under
    /// input `u`.
    pub fn body_velocity(&self, z: &[f64], u: &[f64]) -> [f64; 3] {
        match self.kind {
            ModelKind::Kinematic | ModelKind::KinematicPlanar => {
                let beta = kinematic_sideslip(u[1], self.params);
                [
                    z[3] * beta.cos(),
                    z[3] * beta.sin(),
                    z[3] * beta.sin() / self.params.l_r,
                ]
            }
            _ => [z[3], z[4], z[5]],
        }
    }
}

//! Combined-slip Magic Formula tire forces, slip kinematics at the contact
//! patch, and Ackermann steering geometry.

use crate::autodiff::{Dual2, Scalar};
use crate::linalg::V3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Longitudinal contact speed below which slip angles are not defined.
pub const MIN_ROLLING_SPEED: f64 = 0.1;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TireParams {
    pub b_x: f64,
    pub c_x: f64,
    pub e_x: f64,
    pub b_y: f64,
    pub c_y: f64,
    pub e_y: f64,
    pub e_xa: f64,
    pub c_xa: f64,
    pub r_bx1: f64,
    pub r_bx2: f64,
    pub e_ys: f64,
    pub c_ys: f64,
    pub r_by1: f64,
    pub r_by2: f64,
    pub mu: f64,
    /// Rolling radius (m).
    pub r: f64,
    /// Effective radius (m).
    pub r_e: f64,
}

impl Default for TireParams {
    fn default() -> Self {
        Self {
            b_x: 16.0,
            c_x: 1.58,
            e_x: 0.1,
            b_y: 13.0,
            c_y: 1.45,
            e_y: -0.8,
            e_xa: -0.5,
            c_xa: 1.0,
            r_bx1: 13.0,
            r_bx2: 9.7,
            e_ys: 0.3,
            c_ys: 1.0,
            r_by1: 10.62,
            r_by2: 7.82,
            mu: 0.75,
            r: 0.3,
            r_e: 0.3,
        }
    }
}

impl TireParams {
    pub fn validate(&self) -> Result<(), String> {
        let all = [
            self.b_x, self.c_x, self.e_x, self.b_y, self.c_y, self.e_y, self.e_xa, self.c_xa, self.r_bx1, self.r_bx2,
            self.e_ys, self.c_ys, self.r_by1, self.r_by2, self.mu, self.r, self.r_e,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err("tire parameters must be finite".into());
        }
        for (name, v) in [
            ("mu", self.mu),
            ("c_x", self.c_x),
            ("c_y", self.c_y),
            ("r", self.r),
            ("r_e", self.r_e),
        ] {
            if v <= 0.0 {
                return Err(format!("tire.{name} must be > 0 (got {v})"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TireError {
    #[error("longitudinal contact speed {0:.3} m/s is below the {MIN_ROLLING_SPEED} m/s rolling guard")]
    LowSpeed(f64),
}

/// `sin(C atan(Bx - E(Bx - atan(Bx))))` and its cosine counterpart share this
/// inner shape function.
fn shape<S: Scalar>(b: S, x: S, c: f64, e: f64) -> S {
    let bx = b * x;
    (bx - (bx - bx.atan()) * e).atan() * c
}

fn shape_f(b: f64, x: f64, c: f64, e: f64) -> f64 {
    let bx = b * x;
    c * (bx - e * (bx - bx.atan())).atan()
}

/// Friction coefficients `(Fx/N, Fy/N)` for slip ratio `sigma` and slip angle
/// `alpha`.
pub fn friction_coefficients<S: Scalar>(sigma: S, alpha: S, p: &TireParams) -> [S; 2] {
    let b_xa = (sigma * p.r_bx2).atan().cos() * p.r_bx1;
    let g_xa = shape(b_xa, alpha, p.c_xa, p.e_xa).cos();
    let fx0 = shape(S::cst(p.b_x), sigma, p.c_x, p.e_x).sin() * p.mu;
    let b_ys = (alpha * p.r_by2).atan().cos() * p.r_by1;
    let g_ys = shape(b_ys, sigma, p.c_ys, p.e_ys).cos();
    let fy0 = shape(S::cst(p.b_y), alpha, p.c_y, p.e_y).sin() * p.mu;
    [fx0 * g_xa, fy0 * g_ys]
}

/// Same as [`friction_coefficients`] but evaluated once in second-order duals
/// over `(sigma, alpha)` and lifted into `S` by the chain rule.
pub fn friction_coefficients_lifted<S: Scalar>(sigma: S, alpha: S, p: &TireParams) -> [S; 2] {
    let [ds, da] = Dual2::<2>::seed(&[sigma.value(), alpha.value()]);
    let out = friction_coefficients(ds, da, p);
    out.map(|c| S::chain2(sigma, alpha, crate::autodiff::taylor2(&c)))
}

/// Tire forces `(Fx, Fy)` in the tire frame for normal load `normal` (N).
pub fn magic_formula(sigma: f64, alpha: f64, normal: f64, p: &TireParams) -> [f64; 2] {
    let [mx, my] = friction_coefficients(sigma, alpha, p);
    [normal * mx, normal * my]
}

/// Weighting functions `(G_xa, G_ys)` of the combined-slip model.
pub fn combined_slip_weights(sigma: f64, alpha: f64, p: &TireParams) -> [f64; 2] {
    let b_xa = p.r_bx1 * (p.r_bx2 * sigma).atan().cos();
    let b_ys = p.r_by1 * (p.r_by2 * alpha).atan().cos();
    [
        shape_f(b_xa, alpha, p.c_xa, p.e_xa).cos(),
        shape_f(b_ys, sigma, p.c_ys, p.e_ys).cos(),
    ]
}

/// Steering angles `(γ_fr, γ_fl)` sharing a turn centre on the rear axle line.
pub fn ackermann_angles<S: Scalar>(gamma: S, l_f: f64, l_r: f64, t_f: f64) -> [S; 2] {
    let wb = l_f + l_r;
    let tg = gamma.tan();
    let right = (tg * wb / (tg * t_f + wb)).atan();
    let left = (tg * wb / (-(tg * t_f) + wb)).atan();
    [right, left]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WheelId {
    Fr,
    Fl,
    Rr,
    Rl,
}

impl WheelId {
    pub const ALL: [WheelId; 4] = [WheelId::Fr, WheelId::Fl, WheelId::Rr, WheelId::Rl];

    pub fn name(self) -> &'static str {
        match self {
            WheelId::Fr => "fr",
            WheelId::Fl => "fl",
            WheelId::Rr => "rr",
            WheelId::Rl => "rl",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WheelGeometry {
    pub id: WheelId,
    /// Contact-patch offset from the centre of mass in the body frame (m).
    pub offset: [f64; 3],
    pub steered: bool,
}

impl WheelGeometry {
    pub fn new(id: WheelId, l_f: f64, l_r: f64, t_f: f64, t_r: f64, h: f64) -> Self {
        let (x, y, steered) = match id {
            WheelId::Fr => (l_f, -t_f, true),
            WheelId::Fl => (l_f, t_f, true),
            WheelId::Rr => (-l_r, -t_r, false),
            WheelId::Rl => (-l_r, t_r, false),
        };
        Self {
            id,
            offset: [x, y, -h],
            steered,
        }
    }
}

/// Contact-patch velocity `v + ω × p` rotated into the tire frame of a wheel
/// steered by `gamma_wheel`: returns `(V_cx, V_cy)`.
pub fn contact_velocity<S: Scalar>(v: V3<S>, omega: V3<S>, wheel: &WheelGeometry, gamma_wheel: S) -> [S; 2] {
    let vc = v + omega.cross(&V3::from_f64(wheel.offset));
    let (sn, cs) = (gamma_wheel.sin(), gamma_wheel.cos());
    [cs * vc.0[0] + sn * vc.0[1], -(sn * vc.0[0]) + cs * vc.0[1]]
}

/// Slip angle `atan(-V_cy / V_cx)` from tire-frame contact velocities. The
/// four-quadrant form keeps the expression finite at rest; callers that need
/// the published domain use [`contact_slip_angle`].
pub fn slip_angle<S: Scalar>(vc: [S; 2]) -> S {
    (-vc[1]).atan2(vc[0])
}

pub fn contact_slip_angle(
    v: [f64; 3],
    omega: [f64; 3],
    wheel: &WheelGeometry,
    gamma_wheel: f64,
) -> Result<f64, TireError> {
    let vc = contact_velocity(V3(v), V3(omega), wheel, gamma_wheel);
    if vc[0] <= MIN_ROLLING_SPEED {
        return Err(TireError::LowSpeed(vc[0]));
    }
    Ok(slip_angle(vc))
}

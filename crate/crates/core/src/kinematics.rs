//! Body velocities expressed in surface coordinates for a body held in
//! tangent contact at constant normal offset `n`.

use crate::autodiff::Scalar;
use crate::linalg::M2;
use crate::surface::{fundamental_forms, parameterization_jacobian, SurfaceJet};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("kinematic singularity: det(I - n II) = {det:.3e} (body at a focal distance of the surface)")]
    FocalSingularity { det: f64 },
    #[error("orientation degeneracy: det(J) = {det:.3e}")]
    OrientationDegenerate { det: f64 },
}

/// Pose of the body in surface coordinates. `n` is held fixed.
#[derive(Clone, Copy, Debug)]
pub struct SurfacePose<S> {
    pub s: S,
    pub y: S,
    pub n: f64,
    pub theta_s: S,
}

/// Rates of the surface coordinates.
#[derive(Clone, Copy, Debug)]
pub struct ParametricRates<S> {
    pub s_dot: S,
    pub y_dot: S,
    pub theta_s_dot: S,
}

/// Matrices shared by the rate and angular-velocity maps at one pose.
#[derive(Clone, Copy, Debug)]
pub struct KinematicOperators<S> {
    /// `(I - n II)^-1 J`: body velocity to parameter rates.
    pub rate_map: M2<S>,
    /// `J^-1 II (I - n II)^-1 J`: body velocity to `[-ω2, ω1]`.
    pub curvature_map: M2<S>,
    /// Coefficients multiplying `ṡ` and `ẏ` in `θ̇_s - ω3`.
    pub heading_coupling: [S; 2],
}

impl<S: Scalar> KinematicOperators<S> {
    pub fn new(jet: &SurfaceJet<S>, theta_s: S, n: f64) -> Result<Self, KinematicsError> {
        let forms = fundamental_forms(jet);
        let shifted = forms.first.sub(&forms.second.scale(S::cst(n)));
        let shifted_inv = shifted.inverse().ok_or(KinematicsError::FocalSingularity {
            det: shifted.det().value(),
        })?;
        let (j, _) = parameterization_jacobian(jet, theta_s);
        let j_inv = j
            .inverse()
            .ok_or(KinematicsError::OrientationDegenerate { det: j.det().value() })?;
        let rate_map = shifted_inv.mul(&j);
        let curvature_map = j_inv.mul(&forms.second).mul(&rate_map);
        let xs2 = jet.x_s.dot(&jet.x_s);
        let heading_coupling = [
            jet.x_ss.cross(&jet.x_s).dot(&jet.e_n) / xs2,
            jet.x_sy.cross(&jet.x_s).dot(&jet.e_n) / xs2,
        ];
        Ok(Self {
            rate_map,
            curvature_map,
            heading_coupling,
        })
    }

    pub fn rates(&self, v1: S, v2: S, omega3: S) -> ParametricRates<S> {
        let [s_dot, y_dot] = self.rate_map.mul_vec([v1, v2]);
        let theta_s_dot = omega3 + self.heading_coupling[0] * s_dot + self.heading_coupling[1] * y_dot;
        ParametricRates {
            s_dot,
            y_dot,
            theta_s_dot,
        }
    }

    /// `(ω1, ω2)` imposed by the surface for body velocity `(v1, v2)`. Applied
    /// to `(v̇1, v̇2)` it gives the angular-acceleration approximation that
    /// neglects the rate of change of the surface curvature.
    pub fn tilt_rates(&self, v1: S, v2: S) -> [S; 2] {
        let [minus_w2, w1] = self.curvature_map.mul_vec([v1, v2]);
        [w1, -minus_w2]
    }
}

pub fn parametric_rates<S: Scalar>(
    jet: &SurfaceJet<S>,
    theta_s: S,
    n: f64,
    v1: S,
    v2: S,
    omega3: S,
) -> Result<ParametricRates<S>, KinematicsError> {
    Ok(KinematicOperators::new(jet, theta_s, n)?.rates(v1, v2, omega3))
}

pub fn surface_angular_velocity<S: Scalar>(
    jet: &SurfaceJet<S>,
    theta_s: S,
    n: f64,
    v1: S,
    v2: S,
) -> Result<[S; 2], KinematicsError> {
    Ok(KinematicOperators::new(jet, theta_s, n)?.tilt_rates(v1, v2))
}

pub fn surface_angular_acceleration<S: Scalar>(
    jet: &SurfaceJet<S>,
    theta_s: S,
    n: f64,
    v1_dot: S,
    v2_dot: S,
) -> Result<[S; 2], KinematicsError> {
    Ok(KinematicOperators::new(jet, theta_s, n)?.tilt_rates(v1_dot, v2_dot))
}

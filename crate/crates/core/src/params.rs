//! Vehicle parameters.

use crate::tire::{TireParams, WheelGeometry, WheelId};
use serde::{Deserialize, Serialize};

/// Linear and quadratic aerodynamic/rolling drag. All coefficients default
/// to zero.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DragParams {
    /// Longitudinal force per unit speed (N·s/m).
    pub linear: f64,
    /// Longitudinal force per unit speed squared (N·s²/m²).
    pub quadratic: f64,
    /// Yaw moment per unit yaw rate (N·m·s).
    pub yaw: f64,
}

fn default_sigma_max() -> f64 {
    0.15
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct VehicleParams {
    pub m: f64,
    pub g: f64,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub l_f: f64,
    pub l_r: f64,
    pub t_f: f64,
    pub t_r: f64,
    pub h: f64,
    pub n_max: f64,
    /// Symmetric steering bound (rad).
    pub gamma_max: f64,
    /// Symmetric slip-ratio bound.
    #[serde(default = "default_sigma_max")]
    pub sigma_max: f64,
    pub tire: TireParams,
    #[serde(default)]
    pub drag: DragParams,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            m: 2303.0,
            g: 9.81,
            i1: 956.0,
            i2: 5000.0,
            i3: 5520.0,
            l_f: 1.52,
            l_r: 1.50,
            t_f: 0.625,
            t_r: 0.625,
            h: 0.592,
            n_max: 40_000.0,
            gamma_max: 0.5,
            sigma_max: default_sigma_max(),
            tire: TireParams::default(),
            drag: DragParams::default(),
        }
    }
}

impl VehicleParams {
    pub fn wheelbase(&self) -> f64 {
        self.l_f + self.l_r
    }

    pub fn weight(&self) -> f64 {
        self.m * self.g
    }

    pub fn wheel(&self, id: WheelId) -> WheelGeometry {
        WheelGeometry::new(id, self.l_f, self.l_r, self.t_f, self.t_r, self.h)
    }

    pub fn wheels(&self) -> [WheelGeometry; 4] {
        WheelId::ALL.map(|id| self.wheel(id))
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("m", self.m),
            ("g", self.g),
            ("i1", self.i1),
            ("i2", self.i2),
            ("i3", self.i3),
            ("l_f", self.l_f),
            ("l_r", self.l_r),
            ("t_f", self.t_f),
            ("t_r", self.t_r),
            ("h", self.h),
            ("n_max", self.n_max),
            ("gamma_max", self.gamma_max),
            ("sigma_max", self.sigma_max),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be a finite value > 0 (got {v})"));
            }
        }
        if self.gamma_max >= std::f64::consts::FRAC_PI_2 {
            return Err(format!("gamma_max must be < pi/2 (got {})", self.gamma_max));
        }
        for (name, v) in [
            ("drag.linear", self.drag.linear),
            ("drag.quadratic", self.drag.quadratic),
            ("drag.yaw", self.drag.yaw),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("{name} must be a finite value >= 0 (got {v})"));
            }
        }
        self.tire.validate()
    }
}

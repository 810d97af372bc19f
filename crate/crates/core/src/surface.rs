//! Parametric road surfaces built from Tait-Bryan angle profiles with an
//! optional circular-arc cross-section.
//!
//! The centerline frame is `R(s) = Rz(yaw) · Ry(-pitch) · Rx(roll)` with
//! columns `e_s`, `e_y`, `e_n`: positive pitch climbs and positive roll raises
//! the left (`+y`) edge. The surface is
//!
//! ```text
//! x(s, y) = c(s) + y e_y(s) + e_n(s) (1 - sqrt(1 - y² κ²)) / κ
//! ```
//!
//! where the centerline `c(s)` integrates `e_s`.

use crate::autodiff::{taylor2, Dual2, Scalar};
use crate::linalg::{M2, M3, V3};
use crate::spline::{CubicSpline, HermiteCurve};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Below this cross curvature the arc offset uses its small-κ series.
const FLAT_KAPPA: f64 = 1e-8;
const CLOSURE_TOL: f64 = 1e-6;
/// Slack allowed on the parameter domain when validating coordinates.
const DOMAIN_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurfaceError {
    #[error("invalid surface config: {0}")]
    Config(String),
    #[error("closed track does not close: {what} mismatch {mismatch:.3e} exceeds {CLOSURE_TOL:e}")]
    NotClosed { what: &'static str, mismatch: f64 },
    #[error("s = {0} outside the surface domain")]
    SOutOfDomain(f64),
    #[error("y = {0} outside the surface domain")]
    YOutOfDomain(f64),
}

/// Knots of a natural cubic spline; a single knot is a constant.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AngleProfile {
    pub knots: Vec<[f64; 2]>,
}

impl AngleProfile {
    pub fn constant(v: f64) -> Self {
        Self { knots: vec![[0.0, v]] }
    }
}

impl Default for AngleProfile {
    fn default() -> Self {
        Self::constant(0.0)
    }
}

fn default_grid() -> f64 {
    0.25
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    #[serde(default)]
    pub name: String,
    /// Centerline length in metres.
    pub length: f64,
    pub half_width: f64,
    /// Curvature of the arc cross-section (1/m); 0 is a flat cross-section.
    #[serde(default)]
    pub cross_curvature: f64,
    #[serde(default)]
    pub closed: bool,
    /// Step of the centerline integration grid in metres.
    #[serde(default = "default_grid")]
    pub arclength_grid: f64,
    #[serde(default)]
    pub yaw: AngleProfile,
    #[serde(default)]
    pub pitch: AngleProfile,
    #[serde(default)]
    pub roll: AngleProfile,
}

impl SurfaceConfig {
    /// Straight flat road along the global x axis.
    pub fn flat_straight(length: f64, half_width: f64) -> Self {
        Self {
            name: "flat_straight".into(),
            length,
            half_width,
            cross_curvature: 0.0,
            closed: false,
            arclength_grid: default_grid(),
            yaw: AngleProfile::default(),
            pitch: AngleProfile::default(),
            roll: AngleProfile::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SurfaceError> {
        let err = |m: String| Err(SurfaceError::Config(m));
        if !(self.length > 0.0 && self.length.is_finite()) {
            return err(format!("length must be > 0 (got {})", self.length));
        }
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return err(format!("half_width must be > 0 (got {})", self.half_width));
        }
        if !self.cross_curvature.is_finite() {
            return err("cross_curvature must be finite".into());
        }
        if self.cross_curvature.abs() * self.half_width >= 1.0 {
            return err(format!(
                "arc cross-section domain violated: |cross_curvature| * half_width = {} must be < 1",
                self.cross_curvature.abs() * self.half_width
            ));
        }
        if !(self.arclength_grid > 0.0 && self.arclength_grid <= self.length) {
            return err(format!(
                "arclength_grid must be in (0, length] (got {})",
                self.arclength_grid
            ));
        }
        Ok(())
    }
}

/// Position, first and second partials, and unit normal of the surface.
#[derive(Clone, Copy, Debug)]
pub struct SurfaceJet<S> {
    pub x_p: V3<S>,
    pub x_s: V3<S>,
    pub x_y: V3<S>,
    pub x_ss: V3<S>,
    pub x_sy: V3<S>,
    pub x_yy: V3<S>,
    pub e_n: V3<S>,
}

impl<S: Scalar> SurfaceJet<S> {
    fn map<T>(&self, f: impl Fn(&V3<S>) -> V3<T>) -> SurfaceJet<T> {
        SurfaceJet {
            x_p: f(&self.x_p),
            x_s: f(&self.x_s),
            x_y: f(&self.x_y),
            x_ss: f(&self.x_ss),
            x_sy: f(&self.x_sy),
            x_yy: f(&self.x_yy),
            e_n: f(&self.e_n),
        }
    }

    pub fn values(&self) -> SurfaceJet<f64> {
        self.map(|v| V3(v.values()))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FundamentalForms<S> {
    pub first: M2<S>,
    pub second: M2<S>,
}

/// Body axes `e1, e2, e3` in the global frame, stored as columns.
#[derive(Clone, Copy, Debug)]
pub struct OrientationMatrix<S>(pub M3<S>);

impl<S: Scalar> OrientationMatrix<S> {
    pub fn e1(&self) -> V3<S> {
        self.0.cols[0]
    }
    pub fn e2(&self) -> V3<S> {
        self.0.cols[1]
    }
    pub fn e3(&self) -> V3<S> {
        self.0.cols[2]
    }
}

#[derive(Clone, Debug)]
pub struct Surface {
    config: SurfaceConfig,
    yaw: CubicSpline,
    pitch: CubicSpline,
    roll: CubicSpline,
    centerline: HermiteCurve,
}

/// Rotation about a coordinate axis and its first two angle derivatives.
fn axis_rotation<S: Scalar>(axis: usize, a: S, sign: f64) -> [M3<S>; 3] {
    let (sn, cs) = ((a * sign).sin(), (a * sign).cos());
    let z = S::zero();
    let one = S::cst(1.0);
    // Entries for rotation by angle t in the plane (i, j): [[c, -s], [s, c]].
    let build = |c: S, s: S, diag: S| -> M3<S> {
        let mut m = [[z; 3]; 3];
        let (i, j) = match axis {
            0 => (1, 2),
            1 => (2, 0),
            _ => (0, 1),
        };
        m[axis][axis] = diag;
        m[i][i] = c;
        m[j][j] = c;
        m[i][j] = -s;
        m[j][i] = s;
        M3::from_cols(
            V3([m[0][0], m[1][0], m[2][0]]),
            V3([m[0][1], m[1][1], m[2][1]]),
            V3([m[0][2], m[1][2], m[2][2]]),
        )
    };
    let r = build(cs, sn, one);
    // d/da of R(sign·a) = sign · R'(t); second derivative picks up sign² = 1.
    let d1 = build(-sn * sign, cs * sign, z);
    let d2 = build(-cs, -sn, z);
    [r, d1, d2]
}

/// Frame and its first two s-derivatives from angle values and derivatives.
fn frame_derivatives<S: Scalar>(yaw: [S; 3], pitch: [S; 3], roll: [S; 3]) -> [M3<S>; 3] {
    let rot = |axis: usize, ang: [S; 3], sign: f64| {
        let [r, da, dda] = axis_rotation(axis, ang[0], sign);
        let d1 = da.scale(ang[1]);
        let d2 = da.scale(ang[2]).add(&dda.scale(ang[1] * ang[1]));
        [r, d1, d2]
    };
    let a = rot(2, yaw, 1.0);
    let b = rot(1, pitch, -1.0);
    let c = rot(0, roll, 1.0);
    let r = a[0].mul(&b[0]).mul(&c[0]);
    let d1 = a[1]
        .mul(&b[0])
        .mul(&c[0])
        .add(&a[0].mul(&b[1]).mul(&c[0]))
        .add(&a[0].mul(&b[0]).mul(&c[1]));
    let two = S::cst(2.0);
    let d2 = a[2]
        .mul(&b[0])
        .mul(&c[0])
        .add(&a[0].mul(&b[2]).mul(&c[0]))
        .add(&a[0].mul(&b[0]).mul(&c[2]))
        .add(
            &a[1]
                .mul(&b[1])
                .mul(&c[0])
                .add(&a[1].mul(&b[0]).mul(&c[1]))
                .add(&a[0].mul(&b[1]).mul(&c[1]))
                .scale(two),
        );
    [r, d1, d2]
}

/// Arc offset `(1 - sqrt(1 - y²κ²))/κ` and its first two y-derivatives.
pub fn arc_offset<S: Scalar>(y: S, kappa: f64) -> [S; 3] {
    if kappa.abs() < FLAT_KAPPA {
        return [y * y * (kappa / 2.0), y * kappa, S::cst(kappa)];
    }
    let w = (y * y * (-kappa * kappa)) + 1.0;
    let root = w.sqrt();
    let off = (-root + 1.0) / kappa;
    let d1 = y * kappa / root;
    let d2 = (root * w).recip() * kappa;
    [off, d1, d2]
}

impl Surface {
    pub fn build(config: SurfaceConfig) -> Result<Self, SurfaceError> {
        config.validate()?;
        let spline = |p: &AngleProfile, what: &str| {
            CubicSpline::natural(&p.knots).map_err(|e| SurfaceError::Config(format!("{what}: {e}")))
        };
        let yaw = spline(&config.yaw, "yaw")?;
        let pitch = spline(&config.pitch, "pitch")?;
        let roll = spline(&config.roll, "roll")?;

        let n = (config.length / config.arclength_grid).ceil().max(1.0) as usize;
        let step = config.length / n as f64;
        let tangent = |s: f64| -> [f64; 3] {
            let f = frame_derivatives(yaw.eval(s), pitch.eval(s), roll.eval(s));
            f[0].cols[0].values()
        };
        let mut points = Vec::with_capacity(n + 1);
        let mut tangents = Vec::with_capacity(n + 1);
        let mut x = [0.0; 3];
        // Classical RK4 on dc/ds = e_s(s); the right-hand side does not depend on c.
        for i in 0..=n {
            let s = i as f64 * step;
            let k1 = tangent(s);
            points.push(x);
            tangents.push(k1);
            if i == n {
                break;
            }
            let k2 = tangent(s + 0.5 * step);
            let k3 = k2;
            let k4 = tangent(s + step);
            for d in 0..3 {
                x[d] += step / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
            }
        }
        let surface = Self {
            yaw,
            pitch,
            roll,
            centerline: HermiteCurve::new(step, points, tangents),
            config,
        };
        if surface.config.closed {
            surface.check_closure()?;
        }
        Ok(surface)
    }

    fn check_closure(&self) -> Result<(), SurfaceError> {
        let start = self.centerline.knot(0);
        let end = self.centerline.last_knot();
        let gap = (0..3).map(|d| (end[d] - start[d]).abs()).fold(0.0, f64::max);
        if gap > CLOSURE_TOL {
            return Err(SurfaceError::NotClosed {
                what: "centerline position",
                mismatch: gap,
            });
        }
        let f0 = self.frame(0.0);
        let f1 = self.frame(self.config.length);
        let mut worst: f64 = 0.0;
        for r in 0..3 {
            for c in 0..3 {
                worst = worst.max((f0[r][c] - f1[r][c]).abs());
            }
        }
        if worst > CLOSURE_TOL {
            return Err(SurfaceError::NotClosed {
                what: "centerline frame",
                mismatch: worst,
            });
        }
        Ok(())
    }

    pub fn config(&self) -> &SurfaceConfig {
        &self.config
    }

    pub fn length(&self) -> f64 {
        self.config.length
    }

    pub fn half_width(&self) -> f64 {
        self.config.half_width
    }

    pub fn cross_curvature(&self) -> f64 {
        self.config.cross_curvature
    }

    pub fn is_closed(&self) -> bool {
        self.config.closed
    }

    /// Centerline frame `[e_s e_y e_n]` at `s` (rows of the returned array are
    /// global components).
    pub fn frame(&self, s: f64) -> [[f64; 3]; 3] {
        let f = frame_derivatives(self.yaw.eval(s), self.pitch.eval(s), self.roll.eval(s));
        f[0].values()
    }

    pub fn yaw(&self) -> &CubicSpline {
        &self.yaw
    }

    /// Same centerline yaw on a flat plane: pitch, roll and cross-section
    /// curvature removed.
    pub fn flattened(&self) -> Result<Self, SurfaceError> {
        let mut cfg = self.config.clone();
        cfg.name = format!("{}_flattened", cfg.name);
        cfg.pitch = AngleProfile::default();
        cfg.roll = AngleProfile::default();
        cfg.cross_curvature = 0.0;
        Self::build(cfg)
    }

    fn wrap<S: Scalar>(&self, s: S) -> S {
        if self.config.closed {
            let l = self.config.length;
            let k = (s.value() / l).floor();
            if k != 0.0 {
                return s - k * l;
            }
        }
        s
    }

    /// Jet evaluated directly in the scalar `S`.
    pub fn jet_direct<S: Scalar>(&self, s: S, y: S) -> SurfaceJet<S> {
        let s = self.wrap(s);
        let [r, r1, r2] = frame_derivatives(self.yaw.eval(s), self.pitch.eval(s), self.roll.eval(s));
        let [off, off_y, off_yy] = arc_offset(y, self.config.cross_curvature);
        let c = V3(self.centerline.eval(s));
        let [e_s, e_y, e_n] = r.cols;
        let [ds, dy, dn] = r1.cols;
        let [_, ddy, ddn] = r2.cols;

        let x_p = c + e_y * y + e_n * off;
        let x_s = e_s + dy * y + dn * off;
        let x_y = e_y + e_n * off_y;
        let x_ss = ds + ddy * y + ddn * off;
        let x_sy = dy + dn * off_y;
        let x_yy = e_n * off_yy;
        let cr = x_s.cross(&x_y);
        let nrm = cr * cr.norm().recip();
        SurfaceJet {
            x_p,
            x_s,
            x_y,
            x_ss,
            x_sy,
            x_yy,
            e_n: nrm,
        }
    }

    /// Jet lifted into `S` through the bivariate chain rule; the surface itself
    /// is evaluated once in second-order duals over `(s, y)`.
    pub fn jet<S: Scalar>(&self, s: S, y: S) -> SurfaceJet<S> {
        let [ds, dy] = Dual2::<2>::seed(&[s.value(), y.value()]);
        let j = self.jet_direct(ds, dy);
        j.map(|v| V3(v.0.map(|c| S::chain2(s, y, taylor2(&c)))))
    }

    /// Checked jet evaluation at a point of the parameter domain.
    pub fn evaluate_jet(&self, s: f64, y: f64) -> Result<SurfaceJet<f64>, SurfaceError> {
        self.check_domain(s, y)?;
        Ok(self.jet_direct(s, y))
    }

    pub fn check_domain(&self, s: f64, y: f64) -> Result<(), SurfaceError> {
        if !s.is_finite() || s < -DOMAIN_SLACK || s > self.config.length + DOMAIN_SLACK {
            return Err(SurfaceError::SOutOfDomain(s));
        }
        let arc_ok = y.abs() * self.config.cross_curvature.abs() < 1.0;
        if !y.is_finite() || y.abs() > self.config.half_width + DOMAIN_SLACK || !arc_ok {
            return Err(SurfaceError::YOutOfDomain(y));
        }
        Ok(())
    }
}

pub fn fundamental_forms<S: Scalar>(jet: &SurfaceJet<S>) -> FundamentalForms<S> {
    let ss = jet.x_s.dot(&jet.x_s);
    let sy = jet.x_s.dot(&jet.x_y);
    let yy = jet.x_y.dot(&jet.x_y);
    let n = &jet.e_n;
    let iss = jet.x_ss.dot(n);
    let isy = jet.x_sy.dot(n);
    let iyy = jet.x_yy.dot(n);
    FundamentalForms {
        first: M2::new(ss, sy, sy, yy),
        second: M2::new(iss, isy, isy, iyy),
    }
}

/// Returns `(J, θ_p)` where `θ_p` measures how far the parameterization is
/// from orthogonal.
pub fn parameterization_jacobian<S: Scalar>(jet: &SurfaceJet<S>, theta_s: S) -> (M2<S>, S) {
    let ns = jet.x_s.norm();
    let ny = jet.x_y.norm();
    let theta_p = -(jet.x_s.dot(&jet.x_y) / (ns * ny)).asin();
    let (ct, st) = (theta_s.cos(), theta_s.sin());
    let d = theta_s - theta_p;
    let j = M2::new(ct * ns, -st * ns, d.sin() * ny, d.cos() * ny);
    (j, theta_p)
}

pub fn orientation_from_theta_s<S: Scalar>(jet: &SurfaceJet<S>, theta_s: S) -> OrientationMatrix<S> {
    let forms = fundamental_forms(jet);
    let (j, _) = parameterization_jacobian(jet, theta_s);
    let [[a, b], [c, d]] = forms.first.0;
    let inv_det = (a * d - b * c).recip();
    let first_inv = M2::new(d * inv_det, -b * inv_det, -c * inv_det, a * inv_det);
    let coef = first_inv.mul(&j);
    let e1 = jet.x_s * coef.0[0][0] + jet.x_y * coef.0[1][0];
    let e2 = jet.x_s * coef.0[0][1] + jet.x_y * coef.0[1][1];
    OrientationMatrix(M3::from_cols(e1, e2, jet.e_n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn flat() -> Surface {
        Surface::build(SurfaceConfig::flat_straight(50.0, 5.0)).unwrap()
    }

    fn arc(kappa: f64) -> Surface {
        let mut cfg = SurfaceConfig::flat_straight(50.0, 4.0);
        cfg.cross_curvature = kappa;
        Surface::build(cfg).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn flat_straight_is_the_plane() {
        let sf = flat();
        for (s, y) in [(0.0, 0.0), (12.3, -2.0), (50.0, 5.0)] {
            let j = sf.evaluate_jet(s, y).unwrap();
            assert!(close(j.x_p.0[0], s, 1e-12) && close(j.x_p.0[1], y, 1e-12));
            assert!(close(j.x_p.0[2], 0.0, 1e-12));
            assert_eq!(j.e_n.values(), [0.0, 0.0, 1.0]);
            for v in [j.x_ss, j.x_sy, j.x_yy] {
                assert!(v.values().iter().all(|c| c.abs() < 1e-14));
            }
        }
    }

    #[test]
    fn arc_offset_values() {
        let [o0, ..] = arc_offset(0.0, 0.2);
        assert_eq!(o0, 0.0);
        let [o1, ..] = arc_offset(1.0, 0.2);
        // (1 - sqrt(0.96)) / 0.2
        assert!(close(o1, 0.101_020_514_433_643_9, 1e-12));
        // Series branch agrees with closed form where both are accurate.
        let series = arc_offset(0.5, 5e-9);
        assert!(close(series[0], 0.25 * 5e-9 / 2.0, 1e-20));
    }

    #[test]
    fn arc_cross_section_second_form() {
        let sf = arc(0.2);
        let j = sf.evaluate_jet(10.0, 0.0).unwrap();
        assert!(close(j.x_yy.dot(&j.e_n), 0.2, 1e-12));
        let f = fundamental_forms(&j);
        let ii = f.second.values();
        assert!(close(ii[0][0], 0.0, 1e-12) && close(ii[0][1], 0.0, 1e-12));
        assert!(close(ii[1][1], 0.2, 1e-12));
        let i = f.first.values();
        assert!(close(i[0][0], 1.0, 1e-12) && close(i[1][1], 1.0, 1e-12));
    }

    #[test]
    fn domain_errors_name_the_coordinate() {
        let sf = arc(0.2);
        assert_eq!(
            sf.evaluate_jet(-1.0, 0.0).unwrap_err(),
            SurfaceError::SOutOfDomain(-1.0)
        );
        assert_eq!(sf.evaluate_jet(1.0, 4.5).unwrap_err(), SurfaceError::YOutOfDomain(4.5));
    }

    #[test]
    fn config_validation() {
        let mut cfg = SurfaceConfig::flat_straight(10.0, 5.0);
        cfg.cross_curvature = 0.2;
        let e = Surface::build(cfg).unwrap_err();
        assert!(e.to_string().contains("arc cross-section domain"));
        let mut cfg = SurfaceConfig::flat_straight(10.0, 5.0);
        cfg.length = -1.0;
        assert!(Surface::build(cfg).is_err());
    }

    #[test]
    fn jacobian_examples() {
        let sf = flat();
        let j = sf.evaluate_jet(3.0, 1.0).unwrap();
        let (jm, tp) = parameterization_jacobian(&j, 0.0);
        assert_eq!(tp, 0.0);
        assert_eq!(jm.values(), [[1.0, 0.0], [0.0, 1.0]]);
        let (jm, _) = parameterization_jacobian(&j, FRAC_PI_2);
        let v = jm.values();
        assert!(close(v[0][0], 0.0, 1e-15) && close(v[0][1], -1.0, 1e-15));
        assert!(close(v[1][0], 1.0, 1e-15) && close(v[1][1], 0.0, 1e-15));
    }

    #[test]
    fn orientation_on_plane_is_yaw_rotation() {
        let sf = flat();
        let j = sf.evaluate_jet(3.0, 1.0).unwrap();
        for th in [0.0, 0.3, -1.2, 2.5] {
            let r = orientation_from_theta_s(&j, th).0.values();
            let (s, c) = f64::sin_cos(th);
            let expect = [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]];
            for a in 0..3 {
                for b in 0..3 {
                    assert!(close(r[a][b], expect[a][b], 1e-14));
                }
            }
        }
    }

    #[test]
    fn banked_straight_orientation() {
        let mut cfg = SurfaceConfig::flat_straight(20.0, 3.0);
        cfg.roll = AngleProfile::constant(std::f64::consts::FRAC_PI_4);
        let sf = Surface::build(cfg).unwrap();
        let j = sf.evaluate_jet(5.0, 0.5).unwrap();
        let r = orientation_from_theta_s(&j, 0.0);
        assert!(close(r.e2().0[2], std::f64::consts::FRAC_1_SQRT_2, 1e-12));
    }

    #[test]
    fn closed_circle_builds_and_open_mismatch_fails() {
        let r = 20.0;
        let len = 2.0 * std::f64::consts::PI * r;
        let mut cfg = SurfaceConfig::flat_straight(len, 3.0);
        cfg.closed = true;
        cfg.yaw = AngleProfile {
            knots: vec![[0.0, 0.0], [len, 2.0 * std::f64::consts::PI]],
        };
        let sf = Surface::build(cfg.clone()).unwrap();
        let a = sf.evaluate_jet(0.0, 1.0).unwrap();
        let b = sf.evaluate_jet(len, 1.0).unwrap();
        for (u, v) in [(a.x_p, b.x_p), (a.x_s, b.x_s), (a.x_ss, b.x_ss)] {
            for k in 0..3 {
                assert!(close(u.0[k], v.0[k], 1e-6));
            }
        }
        cfg.yaw.knots[1][1] = 1.5 * std::f64::consts::PI;
        assert!(matches!(Surface::build(cfg), Err(SurfaceError::NotClosed { .. })));
    }

    #[test]
    fn lifted_jet_matches_direct_jet() {
        let mut cfg = SurfaceConfig::flat_straight(60.0, 4.0);
        cfg.cross_curvature = 0.15;
        cfg.yaw = AngleProfile {
            knots: vec![[0.0, 0.0], [20.0, 0.2], [40.0, 1.0], [60.0, 1.2]],
        };
        cfg.roll = AngleProfile {
            knots: vec![[0.0, 0.0], [30.0, -0.3], [60.0, 0.0]],
        };
        let sf = Surface::build(cfg).unwrap();
        let a = sf.jet_direct(17.0, 1.3);
        let b = sf.jet::<f64>(17.0, 1.3);
        for (u, v) in [(a.x_p, b.x_p), (a.x_s, b.x_s), (a.x_ss, b.x_ss), (a.e_n, b.e_n)] {
            for k in 0..3 {
                assert!(close(u.0[k], v.0[k], 1e-14));
            }
        }
    }
}

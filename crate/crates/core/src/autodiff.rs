//! Forward-mode automatic differentiation.
//!
//! Model code is written once against the [`Scalar`] trait and evaluated with
//! three number types:
//!
//! - `f64` for plain evaluation,
//! - [`Dual<N>`] carrying a gradient with respect to `N` seed directions,
//! - [`Dual2<N>`] carrying a gradient and a dense Hessian.
//!
//! Every elementary function is expressed through two chain-rule primitives,
//! [`Scalar::chain1`] and [`Scalar::chain2`], which take the value and the
//! first and second partial derivatives of a univariate or bivariate function
//! at the current point. The same primitives let expensive sub-models (surface
//! jets, tire curves) be evaluated in a cheap low-dimensional type and then
//! lifted into the caller's scalar.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Value and partial derivatives of a univariate function: `[f, f', f'']`.
pub type Taylor1 = [f64; 3];

/// Value and partial derivatives of a bivariate function `f(a, b)`:
/// `[f, f_a, f_b, f_aa, f_ab, f_bb]`.
pub type Taylor2 = [f64; 6];

pub trait Scalar:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign<f64>
{
    fn cst(v: f64) -> Self;
    fn value(&self) -> f64;

    /// Applies a univariate function given its Taylor data at `self.value()`.
    fn chain1(self, f: Taylor1) -> Self;

    /// Applies a bivariate function given its Taylor data at `(a, b)`.
    fn chain2(a: Self, b: Self, f: Taylor2) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }

    fn sin(self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.chain1([s, c, -s])
    }

    fn cos(self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.chain1([c, -s, -c])
    }

    fn tan(self) -> Self {
        let t = self.value().tan();
        let d = 1.0 + t * t;
        self.chain1([t, d, 2.0 * t * d])
    }

    fn atan(self) -> Self {
        let v = self.value();
        let d = 1.0 / (1.0 + v * v);
        self.chain1([v.atan(), d, -2.0 * v * d * d])
    }

    fn asin(self) -> Self {
        let v = self.value();
        let r = 1.0 / (1.0 - v * v).sqrt();
        self.chain1([v.asin(), r, v * r * r * r])
    }

    fn sqrt(self) -> Self {
        let r = self.value().sqrt();
        self.chain1([r, 0.5 / r, -0.25 / (r * r * r)])
    }

    fn recip(self) -> Self {
        let v = self.value();
        let r = 1.0 / v;
        self.chain1([r, -r * r, 2.0 * r * r * r])
    }

    fn abs(self) -> Self {
        if self.value() < 0.0 {
            -self
        } else {
            self
        }
    }

    fn powi(self, n: i32) -> Self {
        let v = self.value();
        let nf = f64::from(n);
        self.chain1([v.powi(n), nf * v.powi(n - 1), nf * (nf - 1.0) * v.powi(n - 2)])
    }

    /// Four-quadrant arctangent of `self / x`. At the origin the partials are
    /// taken as zero.
    fn atan2(self, x: Self) -> Self {
        let (yv, xv) = (self.value(), x.value());
        let r2 = xv * xv + yv * yv;
        if r2 == 0.0 {
            return Self::chain2(self, x, [yv.atan2(xv), 0.0, 0.0, 0.0, 0.0, 0.0]);
        }
        let r4 = r2 * r2;
        Self::chain2(
            self,
            x,
            [
                yv.atan2(xv),
                xv / r2,
                -yv / r2,
                -2.0 * xv * yv / r4,
                (yv * yv - xv * xv) / r4,
                2.0 * xv * yv / r4,
            ],
        )
    }
}

impl Scalar for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn chain1(self, f: Taylor1) -> Self {
        f[0]
    }
    #[inline]
    fn chain2(_a: Self, _b: Self, f: Taylor2) -> Self {
        f[0]
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn tan(self) -> Self {
        f64::tan(self)
    }
    #[inline]
    fn atan(self) -> Self {
        f64::atan(self)
    }
    #[inline]
    fn asin(self) -> Self {
        f64::asin(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn recip(self) -> Self {
        1.0 / self
    }
    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    #[inline]
    fn atan2(self, x: Self) -> Self {
        f64::atan2(self, x)
    }
}

/// First-order dual number with `N` derivative directions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<const N: usize> {
    pub v: f64,
    pub d: [f64; N],
}

impl<const N: usize> Dual<N> {
    pub fn constant(v: f64) -> Self {
        Self { v, d: [0.0; N] }
    }

    /// Independent variable seeded in direction `i`.
    pub fn var(v: f64, i: usize) -> Self {
        let mut d = [0.0; N];
        d[i] = 1.0;
        Self { v, d }
    }

    pub fn seed(values: &[f64; N]) -> [Self; N] {
        std::array::from_fn(|i| Self::var(values[i], i))
    }
}

impl<const N: usize> Scalar for Dual<N> {
    fn cst(v: f64) -> Self {
        Self::constant(v)
    }
    fn value(&self) -> f64 {
        self.v
    }
    fn chain1(self, f: Taylor1) -> Self {
        let mut d = self.d;
        for x in &mut d {
            *x *= f[1];
        }
        Self { v: f[0], d }
    }
    fn chain2(a: Self, b: Self, f: Taylor2) -> Self {
        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = f[1] * a.d[i] + f[2] * b.d[i];
        }
        Self { v: f[0], d }
    }
}

impl<const N: usize> Add for Dual<N> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl<const N: usize> AddAssign for Dual<N> {
    fn add_assign(&mut self, rhs: Self) {
        self.v += rhs.v;
        for i in 0..N {
            self.d[i] += rhs.d[i];
        }
    }
}

impl<const N: usize> Sub for Dual<N> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        self -= rhs;
        self
    }
}

impl<const N: usize> SubAssign for Dual<N> {
    fn sub_assign(&mut self, rhs: Self) {
        self.v -= rhs.v;
        for i in 0..N {
            self.d[i] -= rhs.d[i];
        }
    }
}

impl<const N: usize> Mul for Dual<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = self.v * rhs.d[i] + rhs.v * self.d[i];
        }
        Self { v: self.v * rhs.v, d }
    }
}

impl<const N: usize> Div for Dual<N> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let inv = 1.0 / rhs.v;
        let q = self.v * inv;
        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = (self.d[i] - q * rhs.d[i]) * inv;
        }
        Self { v: q, d }
    }
}

impl<const N: usize> Neg for Dual<N> {
    type Output = Self;
    fn neg(mut self) -> Self {
        self.v = -self.v;
        for x in &mut self.d {
            *x = -*x;
        }
        self
    }
}

impl<const N: usize> Add<f64> for Dual<N> {
    type Output = Self;
    fn add(mut self, rhs: f64) -> Self {
        self.v += rhs;
        self
    }
}

impl<const N: usize> Sub<f64> for Dual<N> {
    type Output = Self;
    fn sub(mut self, rhs: f64) -> Self {
        self.v -= rhs;
        self
    }
}

impl<const N: usize> Mul<f64> for Dual<N> {
    type Output = Self;
    fn mul(mut self, rhs: f64) -> Self {
        self *= rhs;
        self
    }
}

impl<const N: usize> MulAssign<f64> for Dual<N> {
    fn mul_assign(&mut self, rhs: f64) {
        self.v *= rhs;
        for x in &mut self.d {
            *x *= rhs;
        }
    }
}

impl<const N: usize> Div<f64> for Dual<N> {
    type Output = Self;
    fn div(self, rhs: f64) -> Self {
        self * (1.0 / rhs)
    }
}

/// Second-order dual number: value, gradient and dense symmetric Hessian
/// with respect to `N` independent variables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual2<const N: usize> {
    pub v: f64,
    pub g: [f64; N],
    pub h: [[f64; N]; N],
}

impl<const N: usize> Dual2<N> {
    pub fn constant(v: f64) -> Self {
        Self {
            v,
            g: [0.0; N],
            h: [[0.0; N]; N],
        }
    }

    pub fn var(v: f64, i: usize) -> Self {
        let mut x = Self::constant(v);
        x.g[i] = 1.0;
        x
    }

    pub fn seed(values: &[f64; N]) -> [Self; N] {
        std::array::from_fn(|i| Self::var(values[i], i))
    }
}

impl<const N: usize> Scalar for Dual2<N> {
    fn cst(v: f64) -> Self {
        Self::constant(v)
    }
    fn value(&self) -> f64 {
        self.v
    }
    fn chain1(self, f: Taylor1) -> Self {
        let mut out = Self::constant(f[0]);
        for i in 0..N {
            out.g[i] = f[1] * self.g[i];
            let gi = f[2] * self.g[i];
            for j in 0..=i {
                let hij = f[1] * self.h[i][j] + gi * self.g[j];
                out.h[i][j] = hij;
                out.h[j][i] = hij;
            }
        }
        out
    }
    fn chain2(a: Self, b: Self, f: Taylor2) -> Self {
        let mut out = Self::constant(f[0]);
        for i in 0..N {
            out.g[i] = f[1] * a.g[i] + f[2] * b.g[i];
            let (ai, bi) = (a.g[i], b.g[i]);
            for j in 0..=i {
                let (aj, bj) = (a.g[j], b.g[j]);
                let hij =
                    f[1] * a.h[i][j] + f[2] * b.h[i][j] + f[3] * ai * aj + f[4] * (ai * bj + bi * aj) + f[5] * bi * bj;
                out.h[i][j] = hij;
                out.h[j][i] = hij;
            }
        }
        out
    }
}

impl<const N: usize> Add for Dual2<N> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl<const N: usize> AddAssign for Dual2<N> {
    fn add_assign(&mut self, rhs: Self) {
        self.v += rhs.v;
        for i in 0..N {
            self.g[i] += rhs.g[i];
            for j in 0..N {
                self.h[i][j] += rhs.h[i][j];
            }
        }
    }
}

impl<const N: usize> Sub for Dual2<N> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        self -= rhs;
        self
    }
}

impl<const N: usize> SubAssign for Dual2<N> {
    fn sub_assign(&mut self, rhs: Self) {
        self.v -= rhs.v;
        for i in 0..N {
            self.g[i] -= rhs.g[i];
            for j in 0..N {
                self.h[i][j] -= rhs.h[i][j];
            }
        }
    }
}

impl<const N: usize> Mul for Dual2<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let (a, b) = (&self, &rhs);
        let mut out = Self::constant(a.v * b.v);
        for i in 0..N {
            out.g[i] = a.v * b.g[i] + b.v * a.g[i];
            for j in 0..=i {
                let hij = a.v * b.h[i][j] + b.v * a.h[i][j] + a.g[i] * b.g[j] + b.g[i] * a.g[j];
                out.h[i][j] = hij;
                out.h[j][i] = hij;
            }
        }
        out
    }
}

impl<const N: usize> Div for Dual2<N> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        self * rhs.recip()
    }
}

impl<const N: usize> Neg for Dual2<N> {
    type Output = Self;
    fn neg(self) -> Self {
        self * -1.0
    }
}

impl<const N: usize> Add<f64> for Dual2<N> {
    type Output = Self;
    fn add(mut self, rhs: f64) -> Self {
        self.v += rhs;
        self
    }
}

impl<const N: usize> Sub<f64> for Dual2<N> {
    type Output = Self;
    fn sub(mut self, rhs: f64) -> Self {
        self.v -= rhs;
        self
    }
}

impl<const N: usize> Mul<f64> for Dual2<N> {
    type Output = Self;
    fn mul(mut self, rhs: f64) -> Self {
        self *= rhs;
        self
    }
}

impl<const N: usize> MulAssign<f64> for Dual2<N> {
    fn mul_assign(&mut self, rhs: f64) {
        self.v *= rhs;
        for i in 0..N {
            self.g[i] *= rhs;
            for j in 0..N {
                self.h[i][j] *= rhs;
            }
        }
    }
}

impl<const N: usize> Div<f64> for Dual2<N> {
    type Output = Self;
    fn div(self, rhs: f64) -> Self {
        self * (1.0 / rhs)
    }
}

/// Taylor data of a bivariate function computed in `Dual2<2>`.
pub fn taylor2(x: &Dual2<2>) -> Taylor2 {
    [x.v, x.g[0], x.g[1], x.h[0][0], x.h[0][1], x.h[1][1]]
}

/// Jacobian of `f: R^N -> R^M` at `x` by one forward pass.
pub fn jacobian<const N: usize, const M: usize>(
    f: impl Fn(&[Dual<N>; N]) -> [Dual<N>; M],
    x: &[f64; N],
) -> ([f64; M], [[f64; N]; M]) {
    let out = f(&Dual::seed(x));
    (std::array::from_fn(|i| out[i].v), std::array::from_fn(|i| out[i].d))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_fn<S: Scalar>(x: S, y: S) -> S {
        (x * y).sin() + x.atan2(y + 2.0) * x.sqrt() - (y / (x + 1.0)).atan() + x.tan().powi(3)
    }

    #[test]
    fn dual_matches_central_differences() {
        let (x0, y0) = (0.7, -0.3);
        let [x, y] = Dual::<2>::seed(&[x0, y0]);
        let f = test_fn(x, y);
        let h = 1e-6;
        let fx = (test_fn(x0 + h, y0) - test_fn(x0 - h, y0)) / (2.0 * h);
        let fy = (test_fn(x0, y0 + h) - test_fn(x0, y0 - h)) / (2.0 * h);
        assert!((f.d[0] - fx).abs() < 1e-8);
        assert!((f.d[1] - fy).abs() < 1e-8);
        assert_eq!(f.v, test_fn(x0, y0));
    }

    #[test]
    fn dual2_hessian_matches_differences_of_gradients() {
        let (x0, y0) = (0.4, 0.9);
        let [x, y] = Dual2::<2>::seed(&[x0, y0]);
        let f = test_fn(x, y);
        let grad = |a: f64, b: f64| {
            let [x, y] = Dual::<2>::seed(&[a, b]);
            test_fn(x, y).d
        };
        let h = 1e-6;
        for k in 0..2 {
            let (mut p, mut m) = ([x0, y0], [x0, y0]);
            p[k] += h;
            m[k] -= h;
            let gp = grad(p[0], p[1]);
            let gm = grad(m[0], m[1]);
            for i in 0..2 {
                let fd = (gp[i] - gm[i]) / (2.0 * h);
                assert!((f.h[i][k] - fd).abs() < 1e-7, "h[{i}][{k}]");
            }
        }
        assert_eq!(f.h[0][1], f.h[1][0]);
    }

    #[test]
    fn chain2_lifts_a_bivariate_function() {
        // g(u, v) = u^2 v evaluated in Dual2<2>, lifted onto u = a + b, v = a b.
        let (a0, b0) = (1.3, -0.4);
        let [a, b] = Dual2::<2>::seed(&[a0, b0]);
        let (u, v) = (a + b, a * b);
        let direct = u * u * v;
        let [uu, vv] = Dual2::<2>::seed(&[u.v, v.v]);
        let lifted = Dual2::chain2(u, v, taylor2(&(uu * uu * vv)));
        assert!((direct.v - lifted.v).abs() < 1e-14);
        for i in 0..2 {
            assert!((direct.g[i] - lifted.g[i]).abs() < 1e-13);
            for j in 0..2 {
                assert!((direct.h[i][j] - lifted.h[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn atan2_agrees_with_atan_in_right_half_plane() {
        let [y, x] = Dual2::<2>::seed(&[0.3, 2.0]);
        let a = y.atan2(x);
        let b = (y / x).atan();
        assert!((a.v - b.v).abs() < 1e-15);
        for i in 0..2 {
            assert!((a.g[i] - b.g[i]).abs() < 1e-14);
            for j in 0..2 {
                assert!((a.h[i][j] - b.h[i][j]).abs() < 1e-13);
            }
        }
    }
}

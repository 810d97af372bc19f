//! Small fixed-size vector and matrix helpers over any [`Scalar`].

use crate::autodiff::Scalar;
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct V3<S>(pub [S; 3]);

impl<S: Scalar> V3<S> {
    pub fn new(x: S, y: S, z: S) -> Self {
        Self([x, y, z])
    }

    pub fn zero() -> Self {
        Self([S::zero(); 3])
    }

    pub fn from_f64(v: [f64; 3]) -> Self {
        Self(v.map(S::cst))
    }

    pub fn dot(&self, o: &Self) -> S {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }

    pub fn cross(&self, o: &Self) -> Self {
        let [a1, a2, a3] = self.0;
        let [b1, b2, b3] = o.0;
        Self([a2 * b3 - a3 * b2, a3 * b1 - a1 * b3, a1 * b2 - a2 * b1])
    }

    pub fn norm(&self) -> S {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, k: S) -> Self {
        Self(self.0.map(|x| x * k))
    }

    pub fn scale_f(&self, k: f64) -> Self {
        Self(self.0.map(|x| x * k))
    }

    pub fn values(&self) -> [f64; 3] {
        self.0.map(|x| x.value())
    }
}

impl<S: Scalar> Add for V3<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl<S: Scalar> Sub for V3<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl<S: Scalar> Neg for V3<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Self(self.0.map(|x| -x))
    }
}

impl<S: Scalar> Mul<S> for V3<S> {
    type Output = Self;
    fn mul(self, k: S) -> Self {
        self.scale(k)
    }
}

/// Row-major 2x2 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct M2<S>(pub [[S; 2]; 2]);

/// Determinant magnitude below which a 2x2 matrix is treated as singular.
pub const DET_GUARD: f64 = 1e-12;

impl<S: Scalar> M2<S> {
    pub fn new(a: S, b: S, c: S, d: S) -> Self {
        Self([[a, b], [c, d]])
    }

    pub fn det(&self) -> S {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    /// Closed-form inverse; `None` when `|det| < DET_GUARD`.
    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det.value().abs() < DET_GUARD {
            return None;
        }
        let inv = det.recip();
        let [[a, b], [c, d]] = self.0;
        Some(Self([[d * inv, -b * inv], [-c * inv, a * inv]]))
    }

    pub fn mul_vec(&self, v: [S; 2]) -> [S; 2] {
        [
            self.0[0][0] * v[0] + self.0[0][1] * v[1],
            self.0[1][0] * v[0] + self.0[1][1] * v[1],
        ]
    }

    pub fn mul(&self, o: &Self) -> Self {
        let a = &self.0;
        let b = &o.0;
        Self([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }

    pub fn sub(&self, o: &Self) -> Self {
        let mut out = *self;
        for i in 0..2 {
            for j in 0..2 {
                out.0[i][j] = self.0[i][j] - o.0[i][j];
            }
        }
        out
    }

    pub fn scale(&self, k: S) -> Self {
        Self(self.0.map(|r| r.map(|x| x * k)))
    }

    pub fn values(&self) -> [[f64; 2]; 2] {
        self.0.map(|r| r.map(|x| x.value()))
    }
}

/// Column-major 3x3 matrix: `cols[i]` is the i-th column.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct M3<S> {
    pub cols: [V3<S>; 3],
}

impl<S: Scalar> M3<S> {
    pub fn from_cols(c0: V3<S>, c1: V3<S>, c2: V3<S>) -> Self {
        Self { cols: [c0, c1, c2] }
    }

    pub fn entry(&self, row: usize, col: usize) -> S {
        self.cols[col].0[row]
    }

    pub fn mul(&self, o: &Self) -> Self {
        Self {
            cols: o.cols.map(|c| self.mul_vec(&c)),
        }
    }

    pub fn mul_vec(&self, v: &V3<S>) -> V3<S> {
        self.cols[0].scale(v.0[0]) + self.cols[1].scale(v.0[1]) + self.cols[2].scale(v.0[2])
    }

    pub fn add(&self, o: &Self) -> Self {
        Self {
            cols: [
                self.cols[0] + o.cols[0],
                self.cols[1] + o.cols[1],
                self.cols[2] + o.cols[2],
            ],
        }
    }

    pub fn scale(&self, k: S) -> Self {
        Self {
            cols: self.cols.map(|c| c.scale(k)),
        }
    }

    pub fn values(&self) -> [[f64; 3]; 3] {
        std::array::from_fn(|r| std::array::from_fn(|c| self.entry(r, c).value()))
    }
}

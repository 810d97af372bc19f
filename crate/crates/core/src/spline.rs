//! Piecewise cubic interpolants evaluated over any [`Scalar`].

use crate::autodiff::Scalar;

/// Natural cubic spline (C² with zero end curvature). Beyond the end knots it
/// continues linearly, which keeps it C² everywhere.
#[derive(Clone, Debug)]
pub struct CubicSpline {
    knots: Vec<f64>,
    // Per segment: value, slope, half curvature, sixth of curvature rate.
    coeffs: Vec<[f64; 4]>,
}

impl CubicSpline {
    /// Builds the spline through `(s_i, v_i)`. Knots must be strictly
    /// increasing; a single knot gives a constant.
    pub fn natural(points: &[[f64; 2]]) -> Result<Self, String> {
        if points.is_empty() {
            return Err("profile needs at least one knot".into());
        }
        for w in points.windows(2) {
            if w[1][0] <= w[0][0] {
                return Err(format!(
                    "profile knots must be strictly increasing (s={} after s={})",
                    w[1][0], w[0][0]
                ));
            }
        }
        if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err("profile knots must be finite".into());
        }
        let n = points.len();
        if n == 1 {
            return Ok(Self {
                knots: vec![points[0][0]],
                coeffs: vec![[points[0][1], 0.0, 0.0, 0.0]],
            });
        }
        let s: Vec<f64> = points.iter().map(|p| p[0]).collect();
        let v: Vec<f64> = points.iter().map(|p| p[1]).collect();
        let h: Vec<f64> = s.windows(2).map(|w| w[1] - w[0]).collect();

        // Second derivatives m_i with m_0 = m_{n-1} = 0 (tridiagonal solve).
        let mut m = vec![0.0; n];
        if n > 2 {
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut upper = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 0..k {
                diag[i] = 2.0 * (h[i] + h[i + 1]);
                upper[i] = h[i + 1];
                rhs[i] = 6.0 * ((v[i + 2] - v[i + 1]) / h[i + 1] - (v[i + 1] - v[i]) / h[i]);
            }
            for i in 1..k {
                let w = h[i] / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        let coeffs = (0..n - 1)
            .map(|i| {
                let slope = (v[i + 1] - v[i]) / h[i] - h[i] * (2.0 * m[i] + m[i + 1]) / 6.0;
                [v[i], slope, m[i] / 2.0, (m[i + 1] - m[i]) / (6.0 * h[i])]
            })
            .collect();
        Ok(Self { knots: s, coeffs })
    }

    pub fn start(&self) -> f64 {
        self.knots[0]
    }

    pub fn end(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    /// Segment start and cubic coefficients governing abscissa `s`.
    fn segment(&self, s: f64) -> (f64, [f64; 4]) {
        let n = self.knots.len();
        if n == 1 {
            return (self.knots[0], self.coeffs[0]);
        }
        if s <= self.knots[0] {
            let c = self.coeffs[0];
            return (self.knots[0], [c[0], c[1], 0.0, 0.0]);
        }
        if s >= self.knots[n - 1] {
            let c = self.coeffs[n - 2];
            let h = self.knots[n - 1] - self.knots[n - 2];
            let val = c[0] + h * (c[1] + h * (c[2] + h * c[3]));
            let slope = c[1] + h * (2.0 * c[2] + 3.0 * h * c[3]);
            return (self.knots[n - 1], [val, slope, 0.0, 0.0]);
        }
        let i = self.knots.partition_point(|&k| k <= s).saturating_sub(1);
        (self.knots[i], self.coeffs[i])
    }

    /// Value, first and second derivative at `s`.
    pub fn eval<S: Scalar>(&self, s: S) -> [S; 3] {
        let (s0, c) = self.segment(s.value());
        let t = s - s0;
        let val = ((t * c[3] + c[2]) * t + c[1]) * t + c[0];
        let d1 = (t * (3.0 * c[3]) + 2.0 * c[2]) * t + c[1];
        let d2 = t * (6.0 * c[3]) + 2.0 * c[2];
        [val, d1, d2]
    }

    pub fn value(&self, s: f64) -> f64 {
        self.eval(s)[0]
    }
}

/// Uniform-knot cubic Hermite interpolant of a 3-vector curve with prescribed
/// tangents at every knot.
#[derive(Clone, Debug)]
pub struct HermiteCurve {
    step: f64,
    points: Vec<[f64; 3]>,
    tangents: Vec<[f64; 3]>,
}

impl HermiteCurve {
    pub fn new(step: f64, points: Vec<[f64; 3]>, tangents: Vec<[f64; 3]>) -> Self {
        assert!(points.len() >= 2 && points.len() == tangents.len());
        Self { step, points, tangents }
    }

    pub fn length(&self) -> f64 {
        self.step * (self.points.len() - 1) as f64
    }

    pub fn eval<S: Scalar>(&self, s: S) -> [S; 3] {
        let last = self.points.len() - 2;
        let i = ((s.value() / self.step).floor().max(0.0) as usize).min(last);
        let u = (s - i as f64 * self.step) / self.step;
        let u2 = u * u;
        let u3 = u2 * u;
        let h00 = u3 * 2.0 - u2 * 3.0 + 1.0;
        let h10 = u3 - u2 * 2.0 + u;
        let h01 = u2 * 3.0 - u3 * 2.0;
        let h11 = u3 - u2;
        let (p0, p1) = (self.points[i], self.points[i + 1]);
        let (m0, m1) = (self.tangents[i], self.tangents[i + 1]);
        std::array::from_fn(|k| h00 * p0[k] + h10 * (m0[k] * self.step) + h01 * p1[k] + h11 * (m1[k] * self.step))
    }

    pub fn knot(&self, i: usize) -> [f64; 3] {
        self.points[i]
    }

    pub fn last_knot(&self) -> [f64; 3] {
        *self.points.last().unwrap()
    }
}

//! Gauss-Legendre collocation on the unit interval.
//!
//! States are interpolated by the Lagrange polynomial through the interval
//! start `τ = 0` and the `d` Gauss-Legendre points; inputs and algebraic
//! states by the polynomial through the Gauss-Legendre points only.

/// Polynomial with coefficients in increasing powers.
#[derive(Clone, Debug, PartialEq)]
struct Poly(Vec<f64>);

impl Poly {
    fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    fn derivative(&self) -> Poly {
        Poly(self.0.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect())
    }

    /// Antiderivative vanishing at zero.
    fn integral(&self) -> Poly {
        let mut c = vec![0.0];
        c.extend(self.0.iter().enumerate().map(|(k, v)| v / (k + 1) as f64));
        Poly(c)
    }

    fn lagrange(nodes: &[f64], r: usize) -> Poly {
        let mut c = vec![1.0];
        for (m, &x) in nodes.iter().enumerate() {
            if m == r {
                continue;
            }
            let d = nodes[r] - x;
            let mut next = vec![0.0; c.len() + 1];
            for (k, v) in c.iter().enumerate() {
                next[k + 1] += v / d;
                next[k] -= v * x / d;
            }
            c = next;
        }
        Poly(c)
    }
}

/// Legendre polynomial `P_d(x)` and its derivative.
fn legendre(d: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if d == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=d {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = d as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss-Legendre nodes and weights mapped to `[0, 1]`, nodes ascending.
pub fn gauss_legendre(d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(d);
    let mut weights = Vec::with_capacity(d);
    for i in 0..d {
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (d as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(d, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(d, x);
        nodes.push(0.5 * (x + 1.0));
        weights.push(1.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

#[derive(Clone, Debug)]
pub struct CollocationScheme {
    pub degree: usize,
    /// Gauss-Legendre points in `(0, 1)`.
    pub tau: Vec<f64>,
    /// Quadrature weights on `[0, 1]`.
    pub weights: Vec<f64>,
    /// `state_derivative[r][j]`: derivative of the state basis polynomial `r`
    /// (`r = 0` is the interval start) at collocation point `j`.
    pub state_derivative: Vec<Vec<f64>>,
    /// Value of each state basis polynomial at `τ = 1`.
    pub state_end: Vec<f64>,
    /// `input_derivative[j][l]`: derivative at point `j` of the polynomial
    /// through the collocation points that is one at point `l`.
    pub input_derivative: Vec<Vec<f64>>,
    state_basis: Vec<Poly>,
    input_basis: Vec<Poly>,
    input_integral: Vec<Poly>,
}

impl CollocationScheme {
    pub fn new(degree: usize) -> Self {
        let (tau, weights) = gauss_legendre(degree);
        let mut all = vec![0.0];
        all.extend_from_slice(&tau);
        let state_basis: Vec<Poly> = (0..=degree).map(|r| Poly::lagrange(&all, r)).collect();
        let input_basis: Vec<Poly> = (0..degree).map(|l| Poly::lagrange(&tau, l)).collect();
        let state_derivative = state_basis
            .iter()
            .map(|p| {
                let d = p.derivative();
                tau.iter().map(|&t| d.eval(t)).collect()
            })
            .collect();
        let state_end = state_basis.iter().map(|p| p.eval(1.0)).collect();
        let input_derivative = tau
            .iter()
            .map(|&t| input_basis.iter().map(|p| p.derivative().eval(t)).collect())
            .collect();
        let input_integral = input_basis.iter().map(Poly::integral).collect();
        Self {
            degree,
            tau,
            weights,
            state_derivative,
            state_end,
            input_derivative,
            state_basis,
            input_basis,
            input_integral,
        }
    }

    /// Weights of the interval-start and collocation states at `τ`.
    pub fn state_weights(&self, tau: f64) -> Vec<f64> {
        self.state_basis.iter().map(|p| p.eval(tau)).collect()
    }

    /// Weights of the collocation-point values at `τ`.
    pub fn point_weights(&self, tau: f64) -> Vec<f64> {
        self.input_basis.iter().map(|p| p.eval(tau)).collect()
    }

    /// Weights giving `∫_0^τ` of the collocation-point interpolant.
    pub fn integral_weights(&self, tau: f64) -> Vec<f64> {
        self.input_integral.iter().map(|p| p.eval(tau)).collect()
    }
}

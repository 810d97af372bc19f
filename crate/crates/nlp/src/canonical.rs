//! Internal equality-plus-bounds form used by the interior-point iteration:
//!
//! ```text
//! minimize f(w)  subject to  c(w) = 0,  lo <= w <= up
//! ```
//!
//! User problems are mapped to this form by removing fixed variables,
//! appending one slack per inequality and scaling by gradient size.

use crate::kkt::Scaling;
use crate::problem::NlpProblem;

pub(crate) trait Canonical {
    fn n(&self) -> usize;
    fn m(&self) -> usize;
    fn lower(&self) -> &[f64];
    fn upper(&self) -> &[f64];
    fn objective(&self, w: &[f64]) -> f64;
    fn gradient(&self, w: &[f64], g: &mut [f64]);
    fn constraints(&self, w: &[f64], c: &mut [f64]);
    fn jac_structure(&self) -> &[(usize, usize)];
    fn jac_values(&self, w: &[f64], v: &mut [f64]);
    /// Lower-triangle Hessian-of-Lagrangian structure.
    fn hess_structure(&self) -> &[(usize, usize)];
    fn hess_values(&self, w: &[f64], obj_factor: f64, y: &[f64], v: &mut [f64]);
}

/// Largest gradient entry allowed after scaling.
const MAX_SCALED_GRADIENT: f64 = 100.0;
/// Relative amount by which bounds are loosened for the barrier.
const BOUND_RELAX: f64 = 1e-8;

pub(crate) struct Scaled<'a> {
    problem: &'a dyn NlpProblem,
    /// Full variable vector with fixed entries filled in.
    template: Vec<f64>,
    free: Vec<usize>,
    n_free: usize,
    /// Inequality constraints and the position of their slack in `w`.
    slack_of: Vec<Option<usize>>,
    /// Scaled right-hand side of equality rows.
    rhs: Vec<f64>,
    pub scaling: Scaling,
    lo: Vec<f64>,
    up: Vec<f64>,
    user_jac: Vec<(usize, usize)>,
    /// For each user Jacobian entry, its canonical slot (None for fixed columns).
    jac_slot: Vec<Option<usize>>,
    jac: Vec<(usize, usize)>,
    hess_slot: Vec<Option<usize>>,
    hess: Vec<(usize, usize)>,
}

fn relax(b: f64, sign: f64) -> f64 {
    if b.is_finite() {
        b + sign * BOUND_RELAX * b.abs().max(1.0)
    } else {
        b
    }
}

impl<'a> Scaled<'a> {
    /// Builds the canonical form, computing scale factors at `x0`, which is
    /// already projected into the variable bounds.
    pub fn new(problem: &'a dyn NlpProblem, x0: &[f64], scale: bool) -> Self {
        let n = problem.num_variables();
        let m = problem.num_constraints();
        let (xl, xu) = problem.variable_bounds();
        let (cl, cu) = problem.constraint_bounds();

        let mut template = x0.to_vec();
        let mut free = Vec::new();
        let mut pos = vec![None; n];
        for j in 0..n {
            if xl[j] == xu[j] {
                template[j] = xl[j];
            } else {
                pos[j] = Some(free.len());
                free.push(j);
            }
        }
        let n_free = free.len();

        let user_jac = problem.jacobian_structure();
        let scaling = if scale {
            let mut g = vec![0.0; n];
            problem.objective_gradient(&template, &mut g);
            let gmax = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let mut jv = vec![0.0; user_jac.len()];
            problem.jacobian_values(&template, &mut jv);
            let mut rowmax = vec![0.0f64; m];
            for (k, &(r, _)) in user_jac.iter().enumerate() {
                rowmax[r] = rowmax[r].max(jv[k].abs());
            }
            let factor = |v: f64| {
                if v.is_finite() && v > MAX_SCALED_GRADIENT {
                    MAX_SCALED_GRADIENT / v
                } else {
                    1.0
                }
            };
            Scaling {
                objective: factor(gmax),
                constraints: rowmax.into_iter().map(factor).collect(),
            }
        } else {
            Scaling::identity(m)
        };

        let mut lo: Vec<f64> = free.iter().map(|&j| relax(xl[j], -1.0)).collect();
        let mut up: Vec<f64> = free.iter().map(|&j| relax(xu[j], 1.0)).collect();
        let mut slack_of = vec![None; m];
        let mut rhs = vec![0.0; m];
        for i in 0..m {
            let s = scaling.constraints[i];
            if cl[i] == cu[i] {
                rhs[i] = s * cl[i];
            } else {
                slack_of[i] = Some(lo.len());
                lo.push(relax(s * cl[i], -1.0));
                up.push(relax(s * cu[i], 1.0));
            }
        }

        let mut jac = Vec::new();
        let mut jac_slot = Vec::with_capacity(user_jac.len());
        for &(r, c) in &user_jac {
            match pos[c] {
                Some(p) => {
                    jac_slot.push(Some(jac.len()));
                    jac.push((r, p));
                }
                None => jac_slot.push(None),
            }
        }
        for (i, s) in slack_of.iter().enumerate() {
            if let Some(k) = s {
                jac.push((i, *k));
            }
        }

        let mut hess = Vec::new();
        let mut hess_slot = Vec::new();
        for (r, c) in problem.hessian_structure() {
            match (pos[r], pos[c]) {
                (Some(a), Some(b)) => {
                    hess_slot.push(Some(hess.len()));
                    hess.push((a.max(b), a.min(b)));
                }
                _ => hess_slot.push(None),
            }
        }

        Self {
            problem,
            template,
            free,
            n_free,
            slack_of,
            rhs,
            scaling,
            lo,
            up,
            user_jac,
            jac_slot,
            jac,
            hess_slot,
            hess,
        }
    }

    pub fn full_x(&self, w: &[f64]) -> Vec<f64> {
        let mut x = self.template.clone();
        for (k, &j) in self.free.iter().enumerate() {
            x[j] = w[k];
        }
        x
    }

    /// Canonical point for a user point: free variables plus slacks set to
    /// the scaled constraint values.
    pub fn canonical_point(&self, x: &[f64]) -> Vec<f64> {
        let mut w: Vec<f64> = self.free.iter().map(|&j| x[j]).collect();
        w.resize(self.lo.len(), 0.0);
        let mut c = vec![0.0; self.problem.num_constraints()];
        self.problem.constraints(x, &mut c);
        for (i, s) in self.slack_of.iter().enumerate() {
            if let Some(k) = s {
                w[*k] = self.scaling.constraints[i] * c[i];
            }
        }
        w
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn free_indices(&self) -> &[usize] {
        &self.free
    }
}

impl Canonical for Scaled<'_> {
    fn n(&self) -> usize {
        self.lo.len()
    }

    fn m(&self) -> usize {
        self.rhs.len()
    }

    fn lower(&self) -> &[f64] {
        &self.lo
    }

    fn upper(&self) -> &[f64] {
        &self.up
    }

    fn objective(&self, w: &[f64]) -> f64 {
        self.scaling.objective * self.problem.objective(&self.full_x(w))
    }

    fn gradient(&self, w: &[f64], g: &mut [f64]) {
        let mut full = vec![0.0; self.template.len()];
        self.problem.objective_gradient(&self.full_x(w), &mut full);
        g.iter_mut().for_each(|v| *v = 0.0);
        for (k, &j) in self.free.iter().enumerate() {
            g[k] = self.scaling.objective * full[j];
        }
    }

    fn constraints(&self, w: &[f64], c: &mut [f64]) {
        self.problem.constraints(&self.full_x(w), c);
        for i in 0..c.len() {
            c[i] *= self.scaling.constraints[i];
            match self.slack_of[i] {
                Some(k) => c[i] -= w[k],
                None => c[i] -= self.rhs[i],
            }
        }
    }

    fn jac_structure(&self) -> &[(usize, usize)] {
        &self.jac
    }

    fn jac_values(&self, w: &[f64], v: &mut [f64]) {
        let mut raw = vec![0.0; self.user_jac.len()];
        self.problem.jacobian_values(&self.full_x(w), &mut raw);
        for (k, slot) in self.jac_slot.iter().enumerate() {
            if let Some(s) = slot {
                v[*s] = self.scaling.constraints[self.user_jac[k].0] * raw[k];
            }
        }
        let kept = self.jac.len() - self.slack_of.iter().flatten().count();
        v[kept..].iter_mut().for_each(|x| *x = -1.0);
    }

    fn hess_structure(&self) -> &[(usize, usize)] {
        &self.hess
    }

    fn hess_values(&self, w: &[f64], obj_factor: f64, y: &[f64], v: &mut [f64]) {
        let lambda: Vec<f64> = y.iter().zip(&self.scaling.constraints).map(|(a, b)| a * b).collect();
        let mut raw = vec![0.0; self.hess_slot.len()];
        self.problem
            .hessian_values(&self.full_x(w), obj_factor * self.scaling.objective, &lambda, &mut raw);
        v.iter_mut().for_each(|x| *x = 0.0);
        for (k, slot) in self.hess_slot.iter().enumerate() {
            if let Some(s) = slot {
                v[*s] += raw[k];
            }
        }
    }
}

/// Feasibility restoration problem around a reference point `w_r`:
///
/// ```text
/// minimize ρ Σ (p + q) + ζ/2 Σ (d_i (w_i − w_r,i))²
/// subject to c(w) − p + q = 0,  p, q >= 0,  lo <= w <= up
/// ```
pub(crate) struct Restoration<'a> {
    inner: &'a dyn Canonical,
    w_ref: Vec<f64>,
    weight: Vec<f64>,
    pub rho: f64,
    zeta: f64,
    lo: Vec<f64>,
    up: Vec<f64>,
    jac: Vec<(usize, usize)>,
    hess: Vec<(usize, usize)>,
}

impl<'a> Restoration<'a> {
    pub fn new(inner: &'a dyn Canonical, w_ref: &[f64], mu: f64) -> Self {
        let n = inner.n();
        let m = inner.m();
        let mut lo = inner.lower().to_vec();
        let mut up = inner.upper().to_vec();
        lo.extend(std::iter::repeat(0.0).take(2 * m));
        up.extend(std::iter::repeat(f64::INFINITY).take(2 * m));
        let mut jac = inner.jac_structure().to_vec();
        for i in 0..m {
            jac.push((i, n + i));
            jac.push((i, n + m + i));
        }
        let mut hess = inner.hess_structure().to_vec();
        hess.extend((0..n).map(|i| (i, i)));
        Self {
            inner,
            w_ref: w_ref.to_vec(),
            weight: w_ref.iter().map(|v| 1.0f64.min(1.0 / v.abs())).collect(),
            rho: 1000.0,
            zeta: mu.sqrt(),
            lo,
            up,
            jac,
            hess,
        }
    }

    /// Starting point: the reference plus the elastic variables that make
    /// the constraints hold exactly and sit on the central path for `mu`.
    pub fn start(&self, mu: f64) -> Vec<f64> {
        let n = self.inner.n();
        let m = self.inner.m();
        let mut c = vec![0.0; m];
        self.inner.constraints(&self.w_ref, &mut c);
        let mut w = self.w_ref.clone();
        w.resize(n + 2 * m, 0.0);
        for i in 0..m {
            let a = (mu - self.rho * c[i]) / (2.0 * self.rho);
            let q = a + (a * a + mu * c[i] / (2.0 * self.rho)).sqrt();
            w[n + i] = c[i] + q;
            w[n + m + i] = q;
        }
        w
    }
}

impl Canonical for Restoration<'_> {
    fn n(&self) -> usize {
        self.lo.len()
    }

    fn m(&self) -> usize {
        self.inner.m()
    }

    fn lower(&self) -> &[f64] {
        &self.lo
    }

    fn upper(&self) -> &[f64] {
        &self.up
    }

    fn objective(&self, w: &[f64]) -> f64 {
        let n = self.inner.n();
        let elastic: f64 = w[n..].iter().sum();
        let prox: f64 = (0..n).map(|i| (self.weight[i] * (w[i] - self.w_ref[i])).powi(2)).sum();
        self.rho * elastic + 0.5 * self.zeta * prox
    }

    fn gradient(&self, w: &[f64], g: &mut [f64]) {
        let n = self.inner.n();
        for i in 0..n {
            g[i] = self.zeta * self.weight[i].powi(2) * (w[i] - self.w_ref[i]);
        }
        g[n..].iter_mut().for_each(|v| *v = self.rho);
    }

    fn constraints(&self, w: &[f64], c: &mut [f64]) {
        let n = self.inner.n();
        let m = self.inner.m();
        self.inner.constraints(&w[..n], c);
        for i in 0..m {
            c[i] += -w[n + i] + w[n + m + i];
        }
    }

    fn jac_structure(&self) -> &[(usize, usize)] {
        &self.jac
    }

    fn jac_values(&self, w: &[f64], v: &mut [f64]) {
        let k = self.inner.jac_structure().len();
        self.inner.jac_values(&w[..self.inner.n()], &mut v[..k]);
        for pair in v[k..].chunks_mut(2) {
            pair[0] = -1.0;
            pair[1] = 1.0;
        }
    }

    fn hess_structure(&self) -> &[(usize, usize)] {
        &self.hess
    }

    fn hess_values(&self, w: &[f64], obj_factor: f64, y: &[f64], v: &mut [f64]) {
        let n = self.inner.n();
        let k = self.inner.hess_structure().len();
        self.inner.hess_values(&w[..n], 0.0, y, &mut v[..k]);
        for i in 0..n {
            v[k + i] = obj_factor * self.zeta * self.weight[i].powi(2);
        }
    }
}

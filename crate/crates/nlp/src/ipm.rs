//! Primal-dual interior-point iteration with a filter line search,
//! inertia-correcting regularization, second-order corrections and an
//! elastic feasibility-restoration phase.

use std::io::Write;

use crate::canonical::{Canonical, Restoration};
use crate::sparse::{symmetric_matvec, FactorError, LdlFactor, SymmetricPattern};
use crate::{IterationRecord, SolverOptions, SolverStatus};

const KAPPA_EPS: f64 = 10.0;
const KAPPA_MU: f64 = 0.2;
const THETA_MU: f64 = 1.5;
const TAU_MIN: f64 = 0.99;
const KAPPA_SIGMA: f64 = 1e10;
const KAPPA_DAMP: f64 = 1e-4;
const GAMMA_THETA: f64 = 1e-5;
const GAMMA_PHI: f64 = 1e-8;
const GAMMA_ALPHA: f64 = 0.05;
const DELTA_SWITCH: f64 = 1.0;
const S_THETA: f64 = 1.1;
const S_PHI: f64 = 2.3;
const ETA_PHI: f64 = 1e-4;
const KAPPA_SOC: f64 = 0.99;
const MAX_SOC: usize = 4;
const KAPPA_RESTO: f64 = 0.9;
const S_MAX: f64 = 100.0;
const PUSH: f64 = 1e-2;
const STATIC_DELTA_C: f64 = 1e-9;
const MAX_REFINE: usize = 10;

pub(crate) struct Start {
    pub w: Vec<f64>,
    pub y: Option<Vec<f64>>,
    pub zl: Option<Vec<f64>>,
    pub zu: Option<Vec<f64>>,
    pub mu: f64,
    pub push: bool,
}

pub(crate) struct Outcome {
    pub status: SolverStatus,
    pub w: Vec<f64>,
    pub y: Vec<f64>,
    pub zl: Vec<f64>,
    pub zu: Vec<f64>,
}

/// Hooks distinguishing the main solve from a restoration subproblem.
pub(crate) struct Driver<'a, 'w> {
    pub options: &'a SolverOptions,
    pub log: Option<&'w mut dyn Write>,
    pub history: Vec<IterationRecord>,
    pub iterations: usize,
    /// Objective value to report per iteration.
    pub report_objective: &'a dyn Fn(f64) -> f64,
}

struct Kkt {
    pattern: SymmetricPattern,
    factor: LdlFactor,
    n: usize,
    m: usize,
    hess_offset: usize,
    jac_offset: usize,
    con_diag_offset: usize,
    values: Vec<f64>,
    /// Values of the system being solved, without the static regularization.
    exact: Vec<f64>,
    delta_w_last: f64,
}

impl Kkt {
    fn new(prob: &dyn Canonical) -> Self {
        let n = prob.n();
        let m = prob.m();
        let mut entries: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
        let hess_offset = entries.len();
        entries.extend_from_slice(prob.hess_structure());
        let jac_offset = entries.len();
        entries.extend(prob.jac_structure().iter().map(|&(r, c)| (n + r, c)));
        let con_diag_offset = entries.len();
        entries.extend((0..m).map(|r| (n + r, n + r)));
        let pattern = SymmetricPattern { dim: n + m, entries };
        let factor = LdlFactor::analyze(&pattern);
        let len = pattern.entries.len();
        Self {
            pattern,
            factor,
            n,
            m,
            hess_offset,
            jac_offset,
            con_diag_offset,
            values: vec![0.0; len],
            exact: vec![0.0; len],
            delta_w_last: 0.0,
        }
    }

    /// Factorizes `[W + Σ + δ_w I, Aᵀ; A, −δ_c I]` with the smallest `δ_w`
    /// giving `n` positive and `m` negative pivots.
    fn factorize(&mut self, sigma: &[f64], hess: &[f64], jac: &[f64], mu: f64) -> Option<f64> {
        let (n, m) = (self.n, self.m);
        self.values[..n].copy_from_slice(sigma);
        self.values[self.hess_offset..self.jac_offset].copy_from_slice(hess);
        self.values[self.jac_offset..self.con_diag_offset].copy_from_slice(jac);
        let mut delta_c = 0.0;
        let mut delta_w = 0.0;
        let mut attempt = 0;
        loop {
            self.exact.copy_from_slice(&self.values);
            for i in 0..n {
                self.exact[i] += delta_w;
            }
            for r in 0..m {
                self.exact[self.con_diag_offset + r] = -delta_c;
            }
            let mut regularized = self.exact.clone();
            for r in 0..m {
                regularized[self.con_diag_offset + r] -= STATIC_DELTA_C;
            }
            let result = self.factor.factor(&regularized, &[]);
            let ok = match result {
                Ok(inertia) => inertia.positive == n && inertia.negative == m,
                Err(FactorError::SingularPivot { .. }) => {
                    if delta_c == 0.0 && m > 0 {
                        delta_c = 1e-8 * mu.powf(0.25);
                    }
                    false
                }
            };
            if ok {
                if delta_w > 0.0 {
                    self.delta_w_last = delta_w;
                }
                return Some(delta_w);
            }
            attempt += 1;
            if delta_w == 0.0 {
                if attempt == 1 && delta_c > 0.0 {
                    // Retry once with only the constraint regularization.
                    continue;
                }
                delta_w = if self.delta_w_last == 0.0 {
                    1e-4
                } else {
                    (self.delta_w_last / 3.0).max(1e-20)
                };
            } else {
                delta_w *= if self.delta_w_last == 0.0 { 100.0 } else { 8.0 };
            }
            if delta_w > 1e40 {
                return None;
            }
        }
    }

    /// Solves with iterative refinement against the unregularized system.
    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let dim = rhs.len();
        let mut x = rhs.to_vec();
        self.factor.solve(&mut x);
        let mut r = vec![0.0; dim];
        let rhs_norm = rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut best = f64::INFINITY;
        for _ in 0..MAX_REFINE {
            symmetric_matvec(&self.pattern, &self.exact, &x, &mut r);
            for i in 0..dim {
                r[i] = rhs[i] - r[i];
            }
            let res = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if res <= 1e-14 * (1.0 + rhs_norm) || res >= 0.9 * best {
                break;
            }
            best = res;
            self.factor.solve(&mut r);
            for i in 0..dim {
                x[i] += r[i];
            }
        }
        x
    }
}

struct Point {
    f: f64,
    grad: Vec<f64>,
    c: Vec<f64>,
    jac: Vec<f64>,
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn norm_1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

struct Bounds<'a> {
    lo: &'a [f64],
    up: &'a [f64],
    has_l: Vec<bool>,
    has_u: Vec<bool>,
}

impl<'a> Bounds<'a> {
    fn new(lo: &'a [f64], up: &'a [f64]) -> Self {
        Self {
            has_l: lo.iter().map(|v| v.is_finite()).collect(),
            has_u: up.iter().map(|v| v.is_finite()).collect(),
            lo,
            up,
        }
    }

    fn count(&self) -> usize {
        self.has_l.iter().filter(|b| **b).count() + self.has_u.iter().filter(|b| **b).count()
    }

    fn push(&self, w: &mut [f64]) {
        for i in 0..w.len() {
            let (l, u) = (self.lo[i], self.up[i]);
            match (self.has_l[i], self.has_u[i]) {
                (true, true) => {
                    let pl = (PUSH * l.abs().max(1.0)).min(PUSH * (u - l));
                    let pu = (PUSH * u.abs().max(1.0)).min(PUSH * (u - l));
                    w[i] = w[i].max(l + pl).min(u - pu);
                }
                (true, false) => w[i] = w[i].max(l + PUSH * l.abs().max(1.0)),
                (false, true) => w[i] = w[i].min(u - PUSH * u.abs().max(1.0)),
                (false, false) => {}
            }
        }
    }

    fn barrier(&self, f: f64, w: &[f64], mu: f64) -> f64 {
        let mut phi = f;
        for i in 0..w.len() {
            if self.has_l[i] {
                phi -= mu * (w[i] - self.lo[i]).ln();
                if !self.has_u[i] {
                    phi += KAPPA_DAMP * mu * (w[i] - self.lo[i]);
                }
            }
            if self.has_u[i] {
                phi -= mu * (self.up[i] - w[i]).ln();
                if !self.has_l[i] {
                    phi += KAPPA_DAMP * mu * (self.up[i] - w[i]);
                }
            }
        }
        phi
    }

    fn barrier_gradient(&self, grad: &[f64], w: &[f64], mu: f64) -> Vec<f64> {
        let mut g = grad.to_vec();
        for i in 0..w.len() {
            if self.has_l[i] {
                g[i] -= mu / (w[i] - self.lo[i]);
                if !self.has_u[i] {
                    g[i] += KAPPA_DAMP * mu;
                }
            }
            if self.has_u[i] {
                g[i] += mu / (self.up[i] - w[i]);
                if !self.has_l[i] {
                    g[i] -= KAPPA_DAMP * mu;
                }
            }
        }
        g
    }

    fn max_step(&self, w: &[f64], d: &[f64], tau: f64) -> f64 {
        let mut a: f64 = 1.0;
        for i in 0..w.len() {
            if self.has_l[i] && d[i] < 0.0 {
                a = a.min(-tau * (w[i] - self.lo[i]) / d[i]);
            }
            if self.has_u[i] && d[i] > 0.0 {
                a = a.min(tau * (self.up[i] - w[i]) / d[i]);
            }
        }
        a
    }
}

fn max_dual_step(z: &[f64], dz: &[f64], mask: &[bool], tau: f64) -> f64 {
    let mut a: f64 = 1.0;
    for i in 0..z.len() {
        if mask[i] && dz[i] < 0.0 {
            a = a.min(-tau * z[i] / dz[i]);
        }
    }
    a
}

fn evaluate(prob: &dyn Canonical, w: &[f64]) -> Option<Point> {
    let f = prob.objective(w);
    let mut grad = vec![0.0; prob.n()];
    prob.gradient(w, &mut grad);
    let mut c = vec![0.0; prob.m()];
    prob.constraints(w, &mut c);
    let mut jac = vec![0.0; prob.jac_structure().len()];
    prob.jac_values(w, &mut jac);
    (f.is_finite() && finite(&grad) && finite(&c) && finite(&jac)).then_some(Point { f, grad, c, jac })
}

fn eval_trial(prob: &dyn Canonical, w: &[f64]) -> Option<(f64, Vec<f64>)> {
    let f = prob.objective(w);
    let mut c = vec![0.0; prob.m()];
    prob.constraints(w, &mut c);
    (f.is_finite() && finite(&c)).then_some((f, c))
}

/// `∇f + Aᵀy`.
fn lagrangian_gradient(prob: &dyn Canonical, grad: &[f64], jac: &[f64], y: &[f64]) -> Vec<f64> {
    let mut g = grad.to_vec();
    for (k, &(r, c)) in prob.jac_structure().iter().enumerate() {
        g[c] += jac[k] * y[r];
    }
    g
}

struct Errors {
    total: f64,
    primal: f64,
    dual: f64,
}

fn optimality_error(
    prob: &dyn Canonical,
    b: &Bounds,
    w: &[f64],
    pt: &Point,
    y: &[f64],
    zl: &[f64],
    zu: &[f64],
    mu: f64,
) -> Errors {
    let mut gl = lagrangian_gradient(prob, &pt.grad, &pt.jac, y);
    for i in 0..w.len() {
        gl[i] += -zl[i] + zu[i];
    }
    let nb = b.count();
    let zsum = norm_1(zl) + norm_1(zu);
    let s_d = (S_MAX.max((norm_1(y) + zsum) / ((prob.m() + nb).max(1) as f64))) / S_MAX;
    let s_c = (S_MAX.max(zsum / (nb.max(1) as f64))) / S_MAX;
    let mut compl: f64 = 0.0;
    for i in 0..w.len() {
        if b.has_l[i] {
            compl = compl.max(((w[i] - b.lo[i]) * zl[i] - mu).abs());
        }
        if b.has_u[i] {
            compl = compl.max(((b.up[i] - w[i]) * zu[i] - mu).abs());
        }
    }
    let dual = norm_inf(&gl);
    let primal = norm_inf(&pt.c);
    Errors {
        total: (dual / s_d).max(primal).max(compl / s_c),
        primal,
        dual,
    }
}

/// Least-squares estimate of the equality multipliers.
fn least_squares_multipliers(kkt: &mut Kkt, prob: &dyn Canonical, pt: &Point, zl: &[f64], zu: &[f64]) -> Vec<f64> {
    let (n, m) = (prob.n(), prob.m());
    if m == 0 {
        return Vec::new();
    }
    let hess_zero = vec![0.0; kkt.jac_offset - kkt.hess_offset];
    if kkt.factorize(&vec![1.0; n], &hess_zero, &pt.jac, 1.0).is_none() {
        return vec![0.0; m];
    }
    let mut rhs = vec![0.0; n + m];
    for i in 0..n {
        rhs[i] = -(pt.grad[i] - zl[i] + zu[i]);
    }
    let sol = kkt.solve(&rhs);
    let y = sol[n..].to_vec();
    if !finite(&y) || norm_inf(&y) > 1e3 {
        vec![0.0; m]
    } else {
        y
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Phase {
    Main,
    Restoration,
}

pub(crate) fn run(
    prob: &dyn Canonical,
    start: Start,
    driver: &mut Driver<'_, '_>,
    final_check: &dyn Fn(&[f64], &[f64], &[f64], &[f64]) -> bool,
    phase_is_restoration: bool,
    early_exit: Option<&dyn Fn(&[f64]) -> bool>,
) -> Outcome {
    let phase = if phase_is_restoration {
        Phase::Restoration
    } else {
        Phase::Main
    };
    let opts = driver.options;
    let (n, m) = (prob.n(), prob.m());
    let b = Bounds::new(prob.lower(), prob.upper());
    let mut w = start.w;
    if start.push {
        b.push(&mut w);
    }
    let mut mu = start.mu;
    let mut zl = start.zl.unwrap_or_else(|| vec![1.0; n]);
    let mut zu = start.zu.unwrap_or_else(|| vec![1.0; n]);
    for i in 0..n {
        if !b.has_l[i] {
            zl[i] = 0.0;
        }
        if !b.has_u[i] {
            zu[i] = 0.0;
        }
    }
    let fail =
        |status, w: Vec<f64>, y: Vec<f64>, zl: Vec<f64>, zu: Vec<f64>, _mu: f64| Outcome { status, w, y, zl, zu };

    let mut pt = match evaluate(prob, &w) {
        Some(p) => p,
        None => return fail(SolverStatus::EvaluationError, w, vec![0.0; m], zl, zu, mu),
    };
    let mut kkt = Kkt::new(prob);
    let mut y = match start.y {
        Some(y) => y,
        None => least_squares_multipliers(&mut kkt, prob, &pt, &zl, &zu),
    };
    kkt.delta_w_last = 0.0;

    let mut tau = TAU_MIN.max(1.0 - mu);
    let theta0 = norm_1(&pt.c);
    let theta_max = 1e4 * theta0.max(1.0);
    let theta_min = 1e-4 * theta0.max(1.0);
    let mut filter: Vec<(f64, f64)> = Vec::new();
    let mut tol = opts.tol;
    let mut hess = vec![0.0; prob.hess_structure().len()];
    let mut last_alpha = (0.0, 0.0);
    let mut last_delta = 0.0;
    let mut resto_flag = false;

    loop {
        let err = optimality_error(prob, &b, &w, &pt, &y, &zl, &zu, 0.0);
        if phase == Phase::Main || opts.log_restoration {
            let rec = IterationRecord {
                iteration: driver.iterations,
                objective: (driver.report_objective)(pt.f),
                primal_infeasibility: err.primal,
                dual_infeasibility: err.dual,
                mu,
                alpha_primal: last_alpha.0,
                alpha_dual: last_alpha.1,
                regularization: last_delta,
                restoration: phase == Phase::Restoration || resto_flag,
            };
            if let Some(log) = driver.log.as_mut() {
                let _ = writeln!(
                    log,
                    "{:5}{} {:+.8e} {:.2e} {:.2e} {:6.2} {:.2e} {:.2e} {:.1e}",
                    rec.iteration,
                    if rec.restoration { 'r' } else { ' ' },
                    rec.objective,
                    rec.primal_infeasibility,
                    rec.dual_infeasibility,
                    rec.mu.log10(),
                    rec.alpha_primal,
                    rec.alpha_dual,
                    rec.regularization
                );
            }
            log::debug!(
                "iter {} obj {:.8e} inf_pr {:.2e} inf_du {:.2e} mu {:.1e}",
                rec.iteration,
                rec.objective,
                rec.primal_infeasibility,
                rec.dual_infeasibility,
                rec.mu
            );
            driver.history.push(rec);
        }
        resto_flag = false;

        if let Some(check) = early_exit {
            if check(&w) {
                return Outcome {
                    status: SolverStatus::Solved,
                    w,
                    y,
                    zl,
                    zu,
                };
            }
        }
        if err.total <= tol {
            if final_check(&w, &y, &zl, &zu) {
                return Outcome {
                    status: SolverStatus::Solved,
                    w,
                    y,
                    zl,
                    zu,
                };
            }
            tol = (tol * 0.1).max(1e-14);
        }
        if driver.iterations >= opts.max_iterations {
            return fail(SolverStatus::MaxIterations, w, y, zl, zu, mu);
        }
        driver.iterations += 1;

        // Barrier parameter update.
        let mu_min = tol / 10.0;
        loop {
            if mu <= mu_min {
                break;
            }
            let e_mu = optimality_error(prob, &b, &w, &pt, &y, &zl, &zu, mu).total;
            if e_mu > KAPPA_EPS * mu {
                break;
            }
            mu = mu_min.max((KAPPA_MU * mu).min(mu.powf(THETA_MU)));
            tau = TAU_MIN.max(1.0 - mu);
            filter.clear();
        }

        // Newton system.
        prob.hess_values(&w, 1.0, &y, &mut hess);
        if !finite(&hess) {
            return fail(SolverStatus::EvaluationError, w, y, zl, zu, mu);
        }
        let mut sigma = vec![0.0; n];
        for i in 0..n {
            if b.has_l[i] {
                sigma[i] += zl[i] / (w[i] - b.lo[i]);
            }
            if b.has_u[i] {
                sigma[i] += zu[i] / (b.up[i] - w[i]);
            }
        }
        let Some(delta_w) = kkt.factorize(&sigma, &hess, &pt.jac, mu) else {
            return fail(SolverStatus::NumericalBreakdown, w, y, zl, zu, mu);
        };
        last_delta = delta_w;
        let gphi = b.barrier_gradient(&pt.grad, &w, mu);
        let gl = lagrangian_gradient(prob, &gphi, &pt.jac, &y);
        let mut rhs = vec![0.0; n + m];
        for i in 0..n {
            rhs[i] = -gl[i];
        }
        for r in 0..m {
            rhs[n + r] = -pt.c[r];
        }
        let sol = kkt.solve(&rhs);
        if !finite(&sol) {
            return fail(SolverStatus::NumericalBreakdown, w, y, zl, zu, mu);
        }
        let dual_steps = |dw: &[f64]| {
            let mut dzl = vec![0.0; n];
            let mut dzu = vec![0.0; n];
            for i in 0..n {
                if b.has_l[i] {
                    let s = w[i] - b.lo[i];
                    dzl[i] = mu / s - zl[i] - zl[i] / s * dw[i];
                }
                if b.has_u[i] {
                    let s = b.up[i] - w[i];
                    dzu[i] = mu / s - zu[i] + zu[i] / s * dw[i];
                }
            }
            (dzl, dzu)
        };

        // Filter line search.
        let theta = norm_1(&pt.c);
        let phi = b.barrier(pt.f, &w, mu);
        let mut dw = sol[..n].to_vec();
        let mut dy = sol[n..].to_vec();
        let gphi_d: f64 = gphi.iter().zip(&dw).map(|(a, d)| a * d).sum();
        let alpha_max = b.max_step(&w, &dw, tau);
        let alpha_min = {
            let base = if gphi_d < 0.0 {
                let mut a = GAMMA_THETA.min(GAMMA_PHI * theta / -gphi_d);
                if theta <= theta_min {
                    a = a.min(DELTA_SWITCH * theta.powf(S_THETA) / (-gphi_d).powf(S_PHI));
                }
                a
            } else {
                GAMMA_THETA
            };
            (GAMMA_ALPHA * base).max(1e-13)
        };
        let acceptable_to_filter = |th: f64, ph: f64, filter: &[(f64, f64)]| {
            th <= theta_max && filter.iter().all(|&(ft, fp)| th < ft || ph < fp)
        };
        let mut alpha = alpha_max;
        let mut accepted: Option<(Vec<f64>, Point, bool, f64)> = None;
        let mut first = true;
        while alpha >= alpha_min {
            let wt: Vec<f64> = (0..n).map(|i| w[i] + alpha * dw[i]).collect();
            let Some((ft, ct)) = eval_trial(prob, &wt) else {
                alpha *= 0.5;
                first = false;
                continue;
            };
            let theta_t = norm_1(&ct);
            let phi_t = b.barrier(ft, &wt, mu);
            let switching = gphi_d < 0.0 && alpha * (-gphi_d).powf(S_PHI) > DELTA_SWITCH * theta.powf(S_THETA);
            let check = |th_t: f64, ph_t: f64, alpha: f64| -> Option<bool> {
                if !acceptable_to_filter(th_t, ph_t, &filter) {
                    return None;
                }
                if theta <= theta_min && switching {
                    (ph_t <= phi + ETA_PHI * alpha * gphi_d).then_some(true)
                } else {
                    (th_t <= (1.0 - GAMMA_THETA) * theta || ph_t <= phi - GAMMA_PHI * theta).then_some(false)
                }
            };
            if let Some(f_type) = check(theta_t, phi_t, alpha) {
                if let Some(p) = evaluate(prob, &wt) {
                    accepted = Some((wt, p, f_type, alpha));
                    break;
                }
            }
            if first && theta_t >= theta && m > 0 {
                // Second-order corrections on the constraint linearization.
                let mut c_soc: Vec<f64> = (0..m).map(|r| alpha * pt.c[r] + ct[r]).collect();
                let mut theta_old = theta_t;
                for _ in 0..MAX_SOC {
                    let mut rhs_soc = rhs.clone();
                    for r in 0..m {
                        rhs_soc[n + r] = -c_soc[r];
                    }
                    let s = kkt.solve(&rhs_soc);
                    let d_soc = &s[..n];
                    let a_soc = b.max_step(&w, d_soc, tau);
                    let ws: Vec<f64> = (0..n).map(|i| w[i] + a_soc * d_soc[i]).collect();
                    let Some((fs, cs)) = eval_trial(prob, &ws) else { break };
                    let theta_s = norm_1(&cs);
                    let phi_s = b.barrier(fs, &ws, mu);
                    if let Some(f_type) = check(theta_s, phi_s, alpha) {
                        if let Some(p) = evaluate(prob, &ws) {
                            dw = d_soc.to_vec();
                            dy = s[n..].to_vec();
                            accepted = Some((ws, p, f_type, a_soc));
                            break;
                        }
                    }
                    if theta_s > KAPPA_SOC * theta_old {
                        break;
                    }
                    theta_old = theta_s;
                    for r in 0..m {
                        c_soc[r] = a_soc * c_soc[r] + cs[r];
                    }
                }
                if accepted.is_some() {
                    break;
                }
            }
            first = false;
            alpha *= 0.5;
        }

        match accepted {
            Some((wt, p, f_type, alpha)) => {
                if !f_type {
                    filter.push(((1.0 - GAMMA_THETA) * theta, phi - GAMMA_PHI * theta));
                }
                let (dzl, dzu) = dual_steps(&dw);
                let alpha_z = max_dual_step(&zl, &dzl, &b.has_l, tau).min(max_dual_step(&zu, &dzu, &b.has_u, tau));
                for r in 0..m {
                    y[r] += alpha * dy[r];
                }
                w = wt;
                for i in 0..n {
                    zl[i] += alpha_z * dzl[i];
                    zu[i] += alpha_z * dzu[i];
                    if b.has_l[i] {
                        let s = w[i] - b.lo[i];
                        zl[i] = zl[i].min(KAPPA_SIGMA * mu / s).max(mu / (KAPPA_SIGMA * s));
                    }
                    if b.has_u[i] {
                        let s = b.up[i] - w[i];
                        zu[i] = zu[i].min(KAPPA_SIGMA * mu / s).max(mu / (KAPPA_SIGMA * s));
                    }
                }
                pt = p;
                last_alpha = (alpha, alpha_z);
            }
            None => {
                if phase == Phase::Restoration {
                    return fail(SolverStatus::RestorationFailed, w, y, zl, zu, mu);
                }
                filter.push(((1.0 - GAMMA_THETA) * theta, phi - GAMMA_PHI * theta));
                let resto = Restoration::new(prob, &w, mu);
                let mu_r = mu.max(norm_inf(&pt.c));
                let w_r0 = resto.start(mu_r);
                let nr = resto.n();
                let mut zl_r = vec![0.0; nr];
                zl_r[..n].copy_from_slice(&zl.iter().map(|z| z.min(resto.rho)).collect::<Vec<_>>());
                for i in n..nr {
                    zl_r[i] = mu_r / w_r0[i];
                }
                let mut zu_r = vec![0.0; nr];
                zu_r[..n].copy_from_slice(&zu.iter().map(|z| z.min(resto.rho)).collect::<Vec<_>>());
                let filter_now = filter.clone();
                let theta_ref = theta;
                let exit = |wr: &[f64]| -> bool {
                    let wo = &wr[..n];
                    match eval_trial(prob, wo) {
                        Some((f, c)) => {
                            let th = norm_1(&c);
                            let ph = b.barrier(f, wo, mu);
                            th <= KAPPA_RESTO * theta_ref && acceptable_to_filter(th, ph, &filter_now)
                        }
                        None => false,
                    }
                };
                let reject_converged = |_: &[f64], _: &[f64], _: &[f64], _: &[f64]| true;
                let out = run(
                    &resto,
                    Start {
                        w: w_r0,
                        y: Some(vec![0.0; m]),
                        zl: Some(zl_r),
                        zu: Some(zu_r),
                        mu: mu_r,
                        push: false,
                    },
                    driver,
                    &reject_converged,
                    true,
                    Some(&exit),
                );
                if out.status != SolverStatus::Solved || !exit(&out.w) {
                    let status = match out.status {
                        SolverStatus::MaxIterations => SolverStatus::MaxIterations,
                        _ => SolverStatus::RestorationFailed,
                    };
                    return fail(status, w, y, zl, zu, mu);
                }
                w = out.w[..n].to_vec();
                zl = out.zl[..n].to_vec();
                zu = out.zu[..n].to_vec();
                pt = match evaluate(prob, &w) {
                    Some(p) => p,
                    None => return fail(SolverStatus::EvaluationError, w, y, zl, zu, mu),
                };
                let saved = kkt.delta_w_last;
                y = least_squares_multipliers(&mut kkt, prob, &pt, &zl, &zu);
                kkt.delta_w_last = saved;
                last_alpha = (1.0, 1.0);
                resto_flag = true;
            }
        }
    }
}

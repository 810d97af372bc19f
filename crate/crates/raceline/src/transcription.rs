//! Minimum-time problem on path length `s`, transcribed with Gauss-Legendre
//! collocation on equal-length intervals.
//!
//! Decision vector, per interval `k`:
//!
//! ```text
//! [ Z_k | (Z, U, G/mg, U̇)_{k,1} ... (Z, U, G/mg, U̇)_{k,d} | Δt_k ]
//! ```
//!
//! followed by the terminal state `Z_K`. Every constraint row is a linear
//! combination of decision variables plus a linear combination of smooth
//! outputs evaluated at single collocation points, so derivatives are taken
//! point by point with forward-mode dual numbers.

use std::sync::Mutex;

use nonplanar_core::autodiff::{Dual, Dual2, Scalar};
use nonplanar_core::models::{kinematic_sideslip, static_algebraic, Model, ModelKind};
use nonplanar_core::params::VehicleParams;
use nonplanar_core::simulation::solve_algebraic;
use nonplanar_core::surface::Surface;
use nonplanar_nlp::NlpProblem;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::Raceline;
use crate::scheme::CollocationScheme;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TranscribeError {
    #[error("invalid collocation option `{field}`: {reason}")]
    InvalidOption { field: &'static str, reason: String },
    #[error("loop closure requested on a track that is not closed")]
    ClosureOnOpenTrack,
    #[error("could not build the flattened track: {0}")]
    Surface(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollocationOptions {
    pub intervals: usize,
    /// Polynomial degree, equal to the number of Gauss-Legendre points.
    pub degree: usize,
    /// Diagonal entry of the input weight `R`.
    pub input_weight: f64,
    /// Diagonal entry of the input-rate weight `R_d`.
    pub rate_weight: f64,
    /// Close the loop; defaults to whether the track is closed.
    pub closed: Option<bool>,
    /// Lower bound on `ṡ` (m/s).
    pub s_rate_floor: f64,
    /// Speed of the constant-speed initial guess (m/s).
    pub cruise_speed: f64,
    /// Fixed starting speed on open tracks; defaults to `cruise_speed`.
    pub initial_speed: Option<f64>,
    /// Dense output samples per interval.
    pub samples_per_interval: usize,
}

impl Default for CollocationOptions {
    fn default() -> Self {
        Self {
            intervals: 25,
            degree: 3,
            input_weight: 1e-3,
            rate_weight: 1e-3,
            closed: None,
            s_rate_floor: 1.0,
            cruise_speed: 10.0,
            initial_speed: None,
            samples_per_interval: 8,
        }
    }
}

impl CollocationOptions {
    pub fn validate(&self) -> Result<(), TranscribeError> {
        let bad = |field, reason: &str| {
            Err(TranscribeError::InvalidOption {
                field,
                reason: reason.to_string(),
            })
        };
        if self.intervals < 2 {
            return bad("intervals", "must be at least 2");
        }
        if !(2..=9).contains(&self.degree) {
            return bad("degree", "must lie in [2, 9]");
        }
        if !(self.input_weight >= 0.0 && self.input_weight.is_finite()) {
            return bad("input_weight", "must be finite and non-negative");
        }
        if !(self.rate_weight >= 0.0 && self.rate_weight.is_finite()) {
            return bad("rate_weight", "must be finite and non-negative");
        }
        if !(self.s_rate_floor > 0.0 && self.s_rate_floor.is_finite()) {
            return bad("s_rate_floor", "must be positive");
        }
        if !(self.cruise_speed >= self.s_rate_floor && self.cruise_speed.is_finite()) {
            return bad("cruise_speed", "must be finite and at least s_rate_floor");
        }
        if let Some(v) = self.initial_speed {
            if !(v >= self.s_rate_floor && v.is_finite()) {
                return bad("initial_speed", "must be finite and at least s_rate_floor");
            }
        }
        if self.samples_per_interval == 0 {
            return bad("samples_per_interval", "must be at least 1");
        }
        Ok(())
    }
}

/// Positions of the decision variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub intervals: usize,
    pub degree: usize,
    pub nz: usize,
    pub nu: usize,
    pub ng: usize,
}

impl Layout {
    pub fn new(kind: ModelKind, intervals: usize, degree: usize) -> Self {
        Self {
            intervals,
            degree,
            nz: kind.state_dim(),
            nu: kind.input_dim(),
            ng: kind.algebraic_dim(),
        }
    }

    /// Variables per collocation point: `Z, U, G/mg, U̇`.
    pub fn point_width(&self) -> usize {
        self.nz + 2 * self.nu + self.ng
    }

    fn interval_width(&self) -> usize {
        self.nz + self.degree * self.point_width() + 1
    }

    pub fn num_variables(&self) -> usize {
        self.intervals * self.interval_width() + self.nz
    }

    pub fn num_points(&self) -> usize {
        self.intervals * self.degree
    }

    /// First column of the interval-start state `Z_k`, `k ∈ 0..=K`.
    pub fn state(&self, k: usize) -> usize {
        k * self.interval_width()
    }

    /// First column of collocation point `j` of interval `k`.
    pub fn point(&self, k: usize, j: usize) -> usize {
        self.state(k) + self.nz + j * self.point_width()
    }

    pub fn time_step(&self, k: usize) -> usize {
        self.state(k) + self.nz + self.degree * self.point_width()
    }

    pub fn input_offset(&self) -> usize {
        self.nz
    }

    pub fn algebraic_offset(&self) -> usize {
        self.nz + self.nu
    }

    pub fn rate_offset(&self) -> usize {
        self.nz + self.nu + self.ng
    }
}

/// Indices into the per-point output vector
/// `[f/ṡ, g_c/mg, path, ṡ, U̇/ṡ, 1/ṡ, cost/ṡ]`.
#[derive(Clone, Copy, Debug)]
struct Outputs {
    nz: usize,
    ng: usize,
    pd: usize,
    nu: usize,
}

impl Outputs {
    fn rate(&self, i: usize) -> usize {
        i
    }
    fn algebraic(&self, i: usize) -> usize {
        self.nz + i
    }
    fn path(&self, i: usize) -> usize {
        self.nz + self.ng + i
    }
    fn s_rate(&self) -> usize {
        self.nz + self.ng + self.pd
    }
    fn input_rate(&self, i: usize) -> usize {
        self.s_rate() + 1 + i
    }
    fn inverse_rate(&self) -> usize {
        self.s_rate() + 1 + self.nu
    }
    fn cost(&self) -> usize {
        self.inverse_rate() + 1
    }
    fn count(&self) -> usize {
        self.cost() + 1
    }
}

struct Row {
    linear: Vec<(usize, f64)>,
    /// `(point, output, coefficient)`.
    nonlinear: Vec<(usize, usize, f64)>,
    lo: f64,
    up: f64,
}

/// Kind of a constraint row, for reporting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    Defect,
    Algebraic,
    Path,
    SRate,
    InputRate,
    Continuity,
    Time,
    Closure,
    /// Lateral bound on the interpolated state between nodes.
    TrackBound,
}

/// Point values and output gradients at one evaluation point.
struct PointDerivatives {
    values: Vec<Vec<f64>>,
    gradients: Vec<Vec<Vec<f64>>>,
}

pub struct CollocationProblem {
    pub kind: ModelKind,
    pub options: CollocationOptions,
    pub layout: Layout,
    pub scheme: CollocationScheme,
    pub closed: bool,
    /// Interval length in `s`.
    pub step: f64,
    surface: Surface,
    params: VehicleParams,
    outputs: Outputs,
    rows: Vec<Row>,
    row_kinds: Vec<RowKind>,
    var_lo: Vec<f64>,
    var_up: Vec<f64>,
    start: Vec<f64>,
    jac_structure: Vec<(usize, usize)>,
    jac_linear: Vec<(usize, f64)>,
    /// `(first entry, point, output, coefficient)`; the point block occupies
    /// `point_width` consecutive entries.
    jac_blocks: Vec<(usize, usize, usize, f64)>,
    /// Per point: `(output, row, coefficient)`; `row == None` is the objective.
    point_terms: Vec<Vec<(usize, Option<usize>, f64)>>,
    cache: Mutex<Option<(Vec<f64>, std::sync::Arc<PointDerivatives>)>>,
}

/// Builds the NLP for `kind` on `surface`. The planar kinematic model is
/// transcribed on the flattened copy of the track.
pub fn transcribe(
    kind: ModelKind,
    surface: &Surface,
    params: &VehicleParams,
    options: &CollocationOptions,
) -> Result<CollocationProblem, TranscribeError> {
    options.validate()?;
    let closed = options.closed.unwrap_or(surface.is_closed());
    if closed && !surface.is_closed() {
        return Err(TranscribeError::ClosureOnOpenTrack);
    }
    let surface = if kind.uses_flattened_track() {
        surface
            .flattened()
            .map_err(|e| TranscribeError::Surface(e.to_string()))?
    } else {
        surface.clone()
    };
    let layout = Layout::new(kind, options.intervals, options.degree);
    let scheme = CollocationScheme::new(options.degree);
    let outputs = Outputs {
        nz: layout.nz,
        ng: layout.ng,
        pd: kind.path_dim(),
        nu: layout.nu,
    };
    let mut problem = CollocationProblem {
        kind,
        options: options.clone(),
        layout,
        scheme,
        closed,
        step: surface.length() / options.intervals as f64,
        surface,
        params: params.clone(),
        outputs,
        rows: Vec::new(),
        row_kinds: Vec::new(),
        var_lo: Vec::new(),
        var_up: Vec::new(),
        start: Vec::new(),
        jac_structure: Vec::new(),
        jac_linear: Vec::new(),
        jac_blocks: Vec::new(),
        point_terms: Vec::new(),
        cache: Mutex::new(None),
    };
    problem.build_rows();
    problem.build_bounds();
    problem.compile();
    problem.start = problem.initial_guess(|s| problem.guess_point(s));
    Ok(problem)
}

impl CollocationProblem {
    pub fn model(&self) -> Model<'_> {
        Model::new(self.kind, &self.surface, &self.params)
    }

    pub fn surface(&self) -> &Surface {
        &self.surface
    }

    pub fn params(&self) -> &VehicleParams {
        &self.params
    }

    pub fn row_kinds(&self) -> &[RowKind] {
        &self.row_kinds
    }

    fn point_index(&self, k: usize, j: usize) -> usize {
        k * self.layout.degree + j
    }

    fn point_column(&self, p: usize) -> usize {
        self.layout.point(p / self.layout.degree, p % self.layout.degree)
    }

    /// The fixed initial state used on open tracks.
    pub fn initial_state(&self) -> Vec<f64> {
        let v0 = self.options.initial_speed.unwrap_or(self.options.cruise_speed);
        let mut z = vec![0.0; self.layout.nz];
        z[3] = v0;
        z
    }

    fn push(&mut self, kind: RowKind, row: Row) {
        self.rows.push(row);
        self.row_kinds.push(kind);
    }

    fn build_rows(&mut self) {
        let l = self.layout;
        let (d, h) = (l.degree, self.step);
        let out = self.outputs;
        let path_bounds = self.kind.path_bounds(&self.params);
        let floor = self.options.s_rate_floor;
        let sc = self.scheme.clone();
        for k in 0..l.intervals {
            let column_of = |r: usize| if r == 0 { l.state(k) } else { l.point(k, r - 1) };
            for j in 0..d {
                let p = self.point_index(k, j);
                for i in 0..l.nz {
                    let linear = (0..=d)
                        .map(|r| (column_of(r) + i, sc.state_derivative[r][j] / h))
                        .collect();
                    self.push(
                        RowKind::Defect,
                        Row {
                            linear,
                            nonlinear: vec![(p, out.rate(i), -1.0)],
                            lo: 0.0,
                            up: 0.0,
                        },
                    );
                }
                for i in 0..l.ng {
                    self.push(
                        RowKind::Algebraic,
                        Row {
                            linear: vec![],
                            nonlinear: vec![(p, out.algebraic(i), 1.0)],
                            lo: 0.0,
                            up: 0.0,
                        },
                    );
                }
                for (i, &(lo, up)) in path_bounds.iter().enumerate() {
                    self.push(
                        RowKind::Path,
                        Row {
                            linear: vec![],
                            nonlinear: vec![(p, out.path(i), 1.0)],
                            lo,
                            up,
                        },
                    );
                }
                self.push(
                    RowKind::SRate,
                    Row {
                        linear: vec![],
                        nonlinear: vec![(p, out.s_rate(), 1.0)],
                        lo: floor,
                        up: f64::INFINITY,
                    },
                );
                for i in 0..l.nu {
                    let linear = (0..d)
                        .map(|m| (l.point(k, m) + l.input_offset() + i, -sc.input_derivative[j][m] / h))
                        .collect();
                    self.push(
                        RowKind::InputRate,
                        Row {
                            linear,
                            nonlinear: vec![(p, out.input_rate(i), 1.0)],
                            lo: 0.0,
                            up: 0.0,
                        },
                    );
                }
            }
            for i in 0..l.nz {
                let mut linear = vec![(l.state(k + 1) + i, 1.0)];
                linear.extend((0..=d).map(|r| (column_of(r) + i, -sc.state_end[r])));
                self.push(
                    RowKind::Continuity,
                    Row {
                        linear,
                        nonlinear: vec![],
                        lo: 0.0,
                        up: 0.0,
                    },
                );
            }
            // Keep the interpolated path on the road at every dense output
            // sample, not only at the nodes.
            let hw = self.surface.half_width();
            let ns = self.options.samples_per_interval;
            for i in 1..ns {
                let w = sc.state_weights(i as f64 / ns as f64);
                self.push(
                    RowKind::TrackBound,
                    Row {
                        linear: (0..=d).map(|r| (column_of(r) + 1, w[r])).collect(),
                        nonlinear: vec![],
                        lo: -hw,
                        up: hw,
                    },
                );
            }
            let nonlinear = (0..d)
                .map(|j| (self.point_index(k, j), out.inverse_rate(), -h * sc.weights[j]))
                .collect();
            self.push(
                RowKind::Time,
                Row {
                    linear: vec![(l.time_step(k), 1.0)],
                    nonlinear,
                    lo: 0.0,
                    up: 0.0,
                },
            );
        }
        if self.closed {
            // Path length is excluded: it advances by exactly one lap.
            for i in 1..l.nz {
                self.push(
                    RowKind::Closure,
                    Row {
                        linear: vec![(l.state(l.intervals) + i, 1.0), (l.state(0) + i, -1.0)],
                        nonlinear: vec![],
                        lo: 0.0,
                        up: 0.0,
                    },
                );
            }
            let last = l.point(l.intervals - 1, d - 1) + l.input_offset();
            let first = l.point(0, 0) + l.input_offset();
            for i in 0..l.nu {
                self.push(
                    RowKind::Closure,
                    Row {
                        linear: vec![(last + i, 1.0), (first + i, -1.0)],
                        nonlinear: vec![],
                        lo: 0.0,
                        up: 0.0,
                    },
                );
            }
        }
    }

    fn build_bounds(&mut self) {
        let l = self.layout;
        let n = l.num_variables();
        let mut lo = vec![f64::NEG_INFINITY; n];
        let mut up = vec![f64::INFINITY; n];
        let hw = self.surface.half_width();
        let input_bounds = self.kind.input_bounds(&self.params);
        let bound_state = |col: usize, lo: &mut [f64], up: &mut [f64]| {
            lo[col + 1] = -hw;
            up[col + 1] = hw;
        };
        for k in 0..=l.intervals {
            bound_state(l.state(k), &mut lo, &mut up);
        }
        for k in 0..l.intervals {
            for j in 0..l.degree {
                let c = l.point(k, j);
                bound_state(c, &mut lo, &mut up);
                for (i, &(a, b)) in input_bounds.iter().enumerate() {
                    lo[c + l.input_offset() + i] = a;
                    up[c + l.input_offset() + i] = b;
                }
            }
            lo[l.time_step(k)] = 0.0;
        }
        if self.closed {
            lo[0] = 0.0;
            up[0] = 0.0;
        } else {
            for (i, v) in self.initial_state().into_iter().enumerate() {
                lo[i] = v;
                up[i] = v;
            }
        }
        self.var_lo = lo;
        self.var_up = up;
    }

    fn compile(&mut self) {
        let np = self.layout.point_width();
        let mut structure = Vec::new();
        let mut linear = Vec::new();
        let mut blocks = Vec::new();
        let mut terms = vec![Vec::new(); self.layout.num_points()];
        for (r, row) in self.rows.iter().enumerate() {
            let mut cols: Vec<usize> = row.linear.iter().map(|&(c, _)| c).collect();
            for &(p, _, _) in &row.nonlinear {
                let c0 = self.point_column(p);
                cols.extend(c0..c0 + np);
            }
            cols.sort_unstable();
            cols.dedup();
            let base = structure.len();
            let entry = |c: usize| base + cols.binary_search(&c).unwrap();
            for &(c, coef) in &row.linear {
                linear.push((entry(c), coef));
            }
            for &(p, o, coef) in &row.nonlinear {
                blocks.push((entry(self.point_column(p)), p, o, coef));
                terms[p].push((o, Some(r), coef));
            }
            structure.extend(cols.iter().map(|&c| (r, c)));
        }
        let h = self.step;
        for (p, t) in terms.iter_mut().enumerate() {
            let j = p % self.layout.degree;
            t.push((self.outputs.cost(), None, h * self.scheme.weights[j]));
        }
        self.jac_structure = structure;
        self.jac_linear = linear;
        self.jac_blocks = blocks;
        self.point_terms = terms;
    }

    /// Point outputs `[f/ṡ, g_c/mg, path, ṡ, U̇/ṡ, 1/ṡ, cost/ṡ]` for a point
    /// block `[Z, U, G/mg, U̇]`. Evaluation failures give NaN outputs.
    fn point_outputs<S: Scalar>(&self, v: &[S]) -> Vec<S> {
        let l = &self.layout;
        let out = &self.outputs;
        let mg = self.params.weight();
        let z = &v[..l.nz];
        let u = &v[l.input_offset()..l.algebraic_offset()];
        let g: Vec<S> = v[l.algebraic_offset()..l.rate_offset()]
            .iter()
            .map(|&x| x * mg)
            .collect();
        let udot = &v[l.rate_offset()..];
        let e = match self.model().evaluate(z, u, &g) {
            Ok(e) => e,
            Err(_) => return vec![S::cst(f64::NAN); out.count()],
        };
        let sdot = e.rates[0];
        let inv = S::cst(1.0) / sdot;
        let mut o = Vec::with_capacity(out.count());
        o.extend(e.rates[..l.nz].iter().map(|&r| r * inv));
        o.extend(e.algebraic[..l.ng].iter().map(|&a| a / mg));
        o.extend(e.path[..out.pd].iter().copied());
        o.push(sdot);
        o.extend(udot.iter().map(|&r| r * inv));
        o.push(inv);
        let mut cost = S::zero();
        for i in 0..l.nu {
            cost += u[i] * u[i] * self.options.input_weight + udot[i] * udot[i] * self.options.rate_weight;
        }
        o.push(cost * inv);
        o
    }

    fn point_slice<'x>(&self, x: &'x [f64], p: usize) -> &'x [f64] {
        let c = self.point_column(p);
        &x[c..c + self.layout.point_width()]
    }

    /// Output values at every collocation point.
    pub fn point_values(&self, x: &[f64]) -> Vec<Vec<f64>> {
        (0..self.layout.num_points())
            .map(|p| self.point_outputs::<f64>(self.point_slice(x, p)))
            .collect()
    }

    fn gradients_n<const N: usize>(&self, v: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let seeded = Dual::<N>::seed(&std::array::from_fn(|i| v[i]));
        let o = self.point_outputs(&seeded);
        (
            o.iter().map(|x| x.v).collect(),
            o.iter().map(|x| x.d.to_vec()).collect(),
        )
    }

    fn point_gradients(&self, v: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        match v.len() {
            8 => self.gradients_n::<8>(v),
            10 => self.gradients_n::<10>(v),
            19 => self.gradients_n::<19>(v),
            n => unreachable!("no dual instantiation for point width {n}"),
        }
    }

    /// Lower triangle, row-major, of `Σ w_o ∇² o`.
    fn hessian_n<const N: usize>(&self, v: &[f64], weights: &[f64]) -> Vec<f64> {
        let seeded = Dual2::<N>::seed(&std::array::from_fn(|i| v[i]));
        let o = self.point_outputs(&seeded);
        let mut h = vec![0.0; N * (N + 1) / 2];
        for (x, &w) in o.iter().zip(weights) {
            if w == 0.0 {
                continue;
            }
            let mut e = 0;
            for a in 0..N {
                for b in 0..=a {
                    h[e] += w * x.h[a][b];
                    e += 1;
                }
            }
        }
        h
    }

    fn point_hessian(&self, v: &[f64], weights: &[f64]) -> Vec<f64> {
        match v.len() {
            8 => self.hessian_n::<8>(v, weights),
            10 => self.hessian_n::<10>(v, weights),
            19 => self.hessian_n::<19>(v, weights),
            n => unreachable!("no dual instantiation for point width {n}"),
        }
    }

    fn derivatives(&self, x: &[f64]) -> std::sync::Arc<PointDerivatives> {
        let mut cache = self.cache.lock().unwrap();
        if let Some((cx, d)) = cache.as_ref() {
            if cx.len() == x.len() && cx.iter().zip(x).all(|(a, b)| a.to_bits() == b.to_bits()) {
                return d.clone();
            }
        }
        let (values, gradients) = (0..self.layout.num_points())
            .map(|p| self.point_gradients(self.point_slice(x, p)))
            .unzip();
        let d = std::sync::Arc::new(PointDerivatives { values, gradients });
        *cache = Some((x.to_vec(), d.clone()));
        d
    }

    fn rows_from(&self, x: &[f64], values: &[Vec<f64>], c: &mut [f64]) {
        for (r, row) in self.rows.iter().enumerate() {
            let mut acc = 0.0;
            for &(col, coef) in &row.linear {
                acc += coef * x[col];
            }
            for &(p, o, coef) in &row.nonlinear {
                acc += coef * values[p][o];
            }
            c[r] = acc;
        }
    }

    /// Largest bound or constraint violation at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut c = vec![0.0; self.rows.len()];
        self.rows_from(x, &self.point_values(x), &mut c);
        let mut worst: f64 = 0.0;
        for (r, row) in self.rows.iter().enumerate() {
            let v = (row.lo - c[r]).max(c[r] - row.up).max(0.0);
            worst = if v.is_nan() { f64::INFINITY } else { worst.max(v) };
        }
        for (j, &xj) in x.iter().enumerate() {
            worst = worst.max((self.var_lo[j] - xj).max(xj - self.var_up[j]));
        }
        worst
    }

    /// Largest violation among rows of one kind.
    pub fn max_violation_of(&self, x: &[f64], kind: RowKind) -> f64 {
        let mut c = vec![0.0; self.rows.len()];
        self.rows_from(x, &self.point_values(x), &mut c);
        self.rows
            .iter()
            .zip(&self.row_kinds)
            .enumerate()
            .filter(|(_, (_, &k))| k == kind)
            .map(|(r, (row, _))| (row.lo - c[r]).max(c[r] - row.up).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Sum of the quadrature-weighted regularization terms.
    pub fn regularization(&self, x: &[f64]) -> f64 {
        let values = self.point_values(x);
        let h = self.step;
        values
            .iter()
            .enumerate()
            .map(|(p, v)| h * self.scheme.weights[p % self.layout.degree] * v[self.outputs.cost()])
            .sum()
    }

    /// Sum of the time increments.
    pub fn lap_time(&self, x: &[f64]) -> f64 {
        (0..self.layout.intervals).map(|k| x[self.layout.time_step(k)]).sum()
    }

    /// Algebraic variables `G/mg` consistent with `z` and `u`.
    fn guess_algebraic(&self, z: &[f64], u: &[f64]) -> Vec<f64> {
        if self.layout.ng == 0 {
            return vec![];
        }
        let p = &self.params;
        let g0 = static_algebraic(p);
        let g = solve_algebraic(&self.model(), z, u, g0).map(|a| a.g).unwrap_or(g0);
        g.iter().map(|x| x / p.weight()).collect()
    }

    /// Constant-speed centerline guess at path length `s`.
    fn guess_point(&self, s: f64) -> (Vec<f64>, Vec<f64>) {
        let p = &self.params;
        let v = self.options.cruise_speed;
        let yaw = self.surface.yaw();
        let kappa = yaw.eval(s.clamp(yaw.start(), yaw.end()))[1];
        let gamma = (p.wheelbase() * kappa).atan().clamp(-p.gamma_max, p.gamma_max);
        let mut z = vec![s, 0.0, 0.0, v];
        if self.layout.nz == 6 {
            z.extend([0.0, v * kappa]);
        }
        let mut u = vec![0.0; self.layout.nu];
        u[self.layout.nu - 1] = gamma;
        (z, u)
    }

    /// State and inputs of this model matching `reference` at path length
    /// `s`, interpolated linearly between its dense samples. Body velocities
    /// convert through the kinematic sideslip; slip inputs start at zero.
    fn reference_point(&self, reference: &Raceline, s: f64) -> (Vec<f64>, Vec<f64>) {
        let samples = &reference.trajectory.samples;
        let i = samples.partition_point(|q| q.z[0] <= s).clamp(1, samples.len() - 1);
        let (a, b) = (&samples[i - 1], &samples[i]);
        let span = b.z[0] - a.z[0];
        let w = if span > 0.0 {
            ((s - a.z[0]) / span).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let lerp = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p + w * (q - p)).collect() };
        let (z, u) = (lerp(&a.z, &b.z), lerp(&a.u, &b.u));
        let gamma = u[u.len() - 1];
        let (v1, v2, omega) = if z.len() == 6 {
            (z[3], z[4], z[5])
        } else {
            let beta = kinematic_sideslip(gamma, &self.params);
            (
                z[3] * beta.cos(),
                z[3] * beta.sin(),
                z[3] * beta.sin() / self.params.l_r,
            )
        };
        let mut out_z = vec![s, z[1], z[2]];
        if self.layout.nz == 6 {
            out_z.extend([v1, v2, omega]);
        } else {
            out_z.push(v1.hypot(v2));
        }
        let mut out_u = vec![0.0; self.layout.nu];
        if self.layout.nu == 2 && u.len() == 2 {
            out_u[0] = u[0];
        }
        out_u[self.layout.nu - 1] = gamma.clamp(-self.params.gamma_max, self.params.gamma_max);
        (out_z, out_u)
    }

    /// Replaces the starting point with one interpolated from an earlier
    /// raceline on the same track, possibly of another model.
    pub fn warm_start(&mut self, reference: &Raceline) {
        self.start = self.initial_guess(|s| self.reference_point(reference, s));
    }

    fn initial_guess(&self, guess: impl Fn(f64) -> (Vec<f64>, Vec<f64>)) -> Vec<f64> {
        let l = self.layout;
        let h = self.step;
        let mut x = vec![0.0; l.num_variables()];
        let put_state = |x: &mut [f64], col: usize, s: f64| {
            let (z, _) = guess(s);
            x[col..col + l.nz].copy_from_slice(&z);
        };
        for k in 0..=l.intervals {
            put_state(&mut x, l.state(k), k as f64 * h);
        }
        if !self.closed {
            x[..l.nz].copy_from_slice(&self.initial_state());
        }
        for k in 0..l.intervals {
            for j in 0..l.degree {
                let s = (k as f64 + self.scheme.tau[j]) * h;
                let (z, u) = guess(s);
                let g = self.guess_algebraic(&z, &u);
                let c = l.point(k, j);
                x[c..c + l.nz].copy_from_slice(&z);
                x[c + l.input_offset()..c + l.algebraic_offset()].copy_from_slice(&u);
                x[c + l.algebraic_offset()..c + l.rate_offset()].copy_from_slice(&g);
            }
            for j in 0..l.degree {
                let c = l.point(k, j);
                let sdot =
                    self.point_outputs::<f64>(self.point_slice(&x, self.point_index(k, j)))[self.outputs.s_rate()];
                let sdot = if sdot.is_finite() {
                    sdot
                } else {
                    self.options.cruise_speed
                };
                for i in 0..l.nu {
                    let du: f64 = (0..l.degree)
                        .map(|m| self.scheme.input_derivative[j][m] * x[l.point(k, m) + l.input_offset() + i])
                        .sum::<f64>()
                        / h;
                    x[c + l.rate_offset() + i] = sdot * du;
                }
            }
            let values: Vec<Vec<f64>> = (0..l.degree)
                .map(|j| self.point_outputs::<f64>(self.point_slice(&x, self.point_index(k, j))))
                .collect();
            let dt: f64 = (0..l.degree)
                .map(|j| {
                    let inv = values[j][self.outputs.inverse_rate()];
                    h * self.scheme.weights[j]
                        * if inv.is_finite() {
                            inv
                        } else {
                            1.0 / self.options.cruise_speed
                        }
                })
                .sum();
            x[l.time_step(k)] = dt;
        }
        x
    }
}

impl NlpProblem for CollocationProblem {
    fn num_variables(&self) -> usize {
        self.layout.num_variables()
    }

    fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    fn variable_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (self.var_lo.clone(), self.var_up.clone())
    }

    fn constraint_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.rows.iter().map(|r| r.lo).collect(),
            self.rows.iter().map(|r| r.up).collect(),
        )
    }

    fn initial_point(&self) -> Vec<f64> {
        self.start.clone()
    }

    fn objective(&self, x: &[f64]) -> f64 {
        self.lap_time(x) + self.regularization(x)
    }

    fn objective_gradient(&self, x: &[f64], grad: &mut [f64]) {
        grad.fill(0.0);
        let d = self.derivatives(x);
        for k in 0..self.layout.intervals {
            grad[self.layout.time_step(k)] = 1.0;
        }
        let cost = self.outputs.cost();
        for p in 0..self.layout.num_points() {
            let w = self.step * self.scheme.weights[p % self.layout.degree];
            let c0 = self.point_column(p);
            for (a, g) in d.gradients[p][cost].iter().enumerate() {
                grad[c0 + a] += w * g;
            }
        }
    }

    fn constraints(&self, x: &[f64], c: &mut [f64]) {
        let d = self.derivatives(x);
        self.rows_from(x, &d.values, c);
    }

    fn jacobian_structure(&self) -> Vec<(usize, usize)> {
        self.jac_structure.clone()
    }

    fn jacobian_values(&self, x: &[f64], values: &mut [f64]) {
        values.fill(0.0);
        let d = self.derivatives(x);
        for &(e, coef) in &self.jac_linear {
            values[e] += coef;
        }
        for &(e0, p, o, coef) in &self.jac_blocks {
            for (a, g) in d.gradients[p][o].iter().enumerate() {
                values[e0 + a] += coef * g;
            }
        }
    }

    fn hessian_structure(&self) -> Vec<(usize, usize)> {
        let np = self.layout.point_width();
        let mut s = Vec::with_capacity(self.layout.num_points() * np * (np + 1) / 2);
        for p in 0..self.layout.num_points() {
            let c0 = self.point_column(p);
            for a in 0..np {
                for b in 0..=a {
                    s.push((c0 + a, c0 + b));
                }
            }
        }
        s
    }

    fn hessian_values(&self, x: &[f64], obj_factor: f64, lambda: &[f64], values: &mut [f64]) {
        let np = self.layout.point_width();
        let block = np * (np + 1) / 2;
        let mut weights = vec![0.0; self.outputs.count()];
        for p in 0..self.layout.num_points() {
            weights.fill(0.0);
            for &(o, r, coef) in &self.point_terms[p] {
                weights[o] += coef * r.map_or(obj_factor, |r| lambda[r]);
            }
            let h = self.point_hessian(self.point_slice(x, p), &weights);
            values[p * block..(p + 1) * block].copy_from_slice(&h);
        }
    }
}

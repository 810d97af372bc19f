/// A smooth nonlinear program
///
/// ```text
/// minimize f(x)  subject to  g_l <= c(x) <= g_u,  x_l <= x <= x_u
/// ```
///
/// with sparse first and second derivatives. Infinite bounds are expressed
/// with `f64::INFINITY`/`f64::NEG_INFINITY`; a constraint with equal bounds is
/// an equality. Structures are fixed for the life of the problem.
pub trait NlpProblem {
    fn num_variables(&self) -> usize;
    fn num_constraints(&self) -> usize;

    /// `(lower, upper)` bounds on the variables.
    fn variable_bounds(&self) -> (Vec<f64>, Vec<f64>);
    /// `(lower, upper)` bounds on the constraint functions.
    fn constraint_bounds(&self) -> (Vec<f64>, Vec<f64>);
    fn initial_point(&self) -> Vec<f64>;

    fn objective(&self, x: &[f64]) -> f64;
    fn objective_gradient(&self, x: &[f64], grad: &mut [f64]);
    fn constraints(&self, x: &[f64], c: &mut [f64]);

    /// Coordinates `(constraint, variable)` of the Jacobian nonzeros.
    fn jacobian_structure(&self) -> Vec<(usize, usize)>;
    fn jacobian_values(&self, x: &[f64], values: &mut [f64]);

    /// Lower-triangle coordinates `(row, col)`, `row >= col`, of the Hessian
    /// of the Lagrangian. Repeated coordinates are summed.
    fn hessian_structure(&self) -> Vec<(usize, usize)>;
    /// Values of `obj_factor * ∇²f(x) + Σ lambda_i ∇²c_i(x)` on the structure.
    fn hessian_values(&self, x: &[f64], obj_factor: f64, lambda: &[f64], values: &mut [f64]);
}

//! Nonlinear operator abstraction and the monotone problems built on it.
//!
//! An [`Operator`] exposes `F(u)`, the Fréchet derivative `F'(u)h` and its
//! adjoint `F'(u)*h`, where the adjoint is taken with respect to the weighted
//! inner product of [`crate::hilbert`]. Solvers only ever talk to the trait,
//! so problems whose derivative is not self-adjoint work unchanged.

mod checks;
mod wiener;

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hilbert::{distance, norm, Grid, GridFunction};

pub use checks::{adjoint_check, derivative_check, monotonicity_sweep, ProbeSummary};
pub use wiener::{wiener_problem, wiener_rhs_for_one, Target, WienerFilter, DEFAULT_BALL_RADIUS};

/// A (possibly nonlinear) map on grid functions with analytic derivative.
pub trait Operator: Send + Sync {
    fn grid(&self) -> &Arc<Grid>;

    /// `F(u)`.
    fn apply(&self, u: &GridFunction) -> Result<GridFunction>;

    /// `F'(u)h`.
    fn derivative_apply(&self, u: &GridFunction, h: &GridFunction) -> Result<GridFunction>;

    /// `F'(u)*h`, adjoint in the weighted inner product.
    fn adjoint_derivative_apply(&self, u: &GridFunction, h: &GridFunction) -> Result<GridFunction>;

    /// Dense matrix of `F'(u)` acting on nodal values.
    ///
    /// The default assembles it column by column from `derivative_apply`.
    fn derivative_matrix(&self, u: &GridFunction) -> Result<DMatrix<f64>> {
        let n = self.grid().n_points();
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            let e = GridFunction::indicator(self.grid().clone(), j)?;
            let col = self.derivative_apply(u, &e)?;
            m.set_column(j, col.values());
        }
        Ok(m)
    }

    fn name(&self) -> &str;
}

/// Derivative bounds over the working ball `B(u_0, R)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorBounds {
    /// Bound on `‖F'(u)‖`.
    pub m1: f64,
    /// Bound on `‖F''(u)‖`.
    pub m2: f64,
    /// Ball radius.
    pub radius: f64,
}

impl OperatorBounds {
    pub fn new(m1: f64, m2: f64, radius: f64) -> Result<Self> {
        if !(m1 >= 0.0 && m2 >= 0.0 && radius > 0.0) || !(m1.is_finite() && m2.is_finite()) {
            return Err(Error::param(format!(
                "operator bounds need M1 >= 0, M2 >= 0, R > 0 (got {m1}, {m2}, {radius})"
            )));
        }
        Ok(Self { m1, m2, radius })
    }

    /// Quadratic-term constant `c0 = M2 / 2`.
    pub fn c0(&self) -> f64 {
        0.5 * self.m2
    }

    /// Drift constant `c1 = ‖y‖ (1 + 1/(C − 1))` for a discrepancy constant `C > 1`.
    pub fn drift_c1(&self, y_norm: f64, discrepancy_c: f64) -> Result<f64> {
        if discrepancy_c <= 1.0 {
            return Err(Error::param(format!(
                "discrepancy constant must exceed 1, got {discrepancy_c}"
            )));
        }
        Ok(y_norm * (1.0 + 1.0 / (discrepancy_c - 1.0)))
    }
}

/// Monotone operator together with its data and (if known) exact solution.
#[derive(Clone)]
pub struct MonotoneProblem {
    operator: Arc<dyn Operator>,
    rhs: Option<GridFunction>,
    exact_solution: Option<GridFunction>,
    bounds: OperatorBounds,
}

impl std::fmt::Debug for MonotoneProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MonotoneProblem")
            .field("operator", &self.operator.name())
            .field("n_points", &self.grid().n_points())
            .field("bounds", &self.bounds)
            .finish()
    }
}

impl MonotoneProblem {
    pub fn new(operator: Arc<dyn Operator>, bounds: OperatorBounds) -> Self {
        Self {
            operator,
            rhs: None,
            exact_solution: None,
            bounds,
        }
    }

    pub fn with_rhs(mut self, f: GridFunction) -> Result<Self> {
        self.operator.grid().check_len(f.len())?;
        self.rhs = Some(f);
        Ok(self)
    }

    pub fn with_exact_solution(mut self, y: GridFunction) -> Result<Self> {
        self.operator.grid().check_len(y.len())?;
        self.exact_solution = Some(y);
        Ok(self)
    }

    pub fn with_bounds(mut self, bounds: OperatorBounds) -> Self {
        self.bounds = bounds;
        self
    }

    pub fn operator(&self) -> &Arc<dyn Operator> {
        &self.operator
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.operator.grid()
    }

    pub fn rhs(&self) -> Option<&GridFunction> {
        self.rhs.as_ref()
    }

    pub fn exact_solution(&self) -> Option<&GridFunction> {
        self.exact_solution.as_ref()
    }

    pub fn bounds(&self) -> &OperatorBounds {
        &self.bounds
    }

    pub fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        self.operator.apply(u)
    }

    pub fn derivative_apply(&self, u: &GridFunction, h: &GridFunction) -> Result<GridFunction> {
        self.operator.derivative_apply(u, h)
    }

    pub fn adjoint_derivative_apply(
        &self,
        u: &GridFunction,
        h: &GridFunction,
    ) -> Result<GridFunction> {
        self.operator.adjoint_derivative_apply(u, h)
    }

    pub fn derivative_matrix(&self, u: &GridFunction) -> Result<DMatrix<f64>> {
        self.operator.derivative_matrix(u)
    }

    /// `‖u − y‖` when the exact solution is known.
    pub fn error_vs_exact(&self, u: &GridFunction) -> Result<Option<f64>> {
        self.exact_solution
            .as_ref()
            .map(|y| distance(u, y))
            .transpose()
    }
}

/// Data residual `‖F(u) − f_δ‖`.
pub fn residual(
    problem: &MonotoneProblem,
    u: &GridFunction,
    f_delta: &GridFunction,
) -> Result<f64> {
    u.check_same_grid(f_delta)?;
    let fu = problem.apply(u)?;
    Ok(norm(&(&fu - f_delta)))
}

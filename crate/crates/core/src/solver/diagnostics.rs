use log::warn;

use super::SolveReport;
use crate::error::{Error, Result};
use crate::hilbert::{distance, norm, GridFunction};
use crate::operator::MonotoneProblem;
use crate::regularized::{solve_regularized, solve_regularized_from, NewtonOptions};
use crate::schedule::PowerSchedule;

const NEWTON_TOL: f64 = 1e-12;

/// Admissibility of a starting point for the flow and the iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialCondition {
    /// `h(0) = ‖F(u_0) + a_0 u_0 − f_δ‖`.
    pub h0: f64,
    /// `a_0 ‖V_δ(a_0)‖ / 4`.
    pub bound: f64,
    /// `‖u_0 − V_δ(a_0)‖`.
    pub g0: f64,
    /// `‖F(0) − f_δ‖ / a_0`.
    pub g0_limit: f64,
}

impl InitialCondition {
    pub fn h0_ok(&self) -> bool {
        self.h0 <= self.bound
    }

    pub fn g0_bound_ok(&self) -> bool {
        self.g0 <= self.g0_limit
    }
}

/// Solves the regularized equation at `a0` and compares `u0` against it.
pub fn check_initial_condition(
    problem: &MonotoneProblem,
    f_delta: &GridFunction,
    a0: f64,
    u0: &GridFunction,
) -> Result<InitialCondition> {
    if !(a0 > 0.0) {
        return Err(Error::param(format!("a0 must be positive, got {a0}")));
    }
    u0.check_same_grid(f_delta)?;
    let v0 = solve_regularized(problem, a0, f_delta, NEWTON_TOL)?;
    let fu0 = problem.apply(u0)?;
    let h0 = norm(&(&fu0 - f_delta).axpy(a0, u0)?);
    let zero = GridFunction::zeros(problem.grid().clone());
    let f0 = problem.apply(&zero)?;
    Ok(InitialCondition {
        h0,
        bound: 0.25 * a0 * v0.psi,
        g0: distance(u0, &v0.v)?,
        g0_limit: norm(&(&f0 - f_delta)) / a0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapRow {
    pub n: usize,
    pub a_n: f64,
    /// `‖u_n − V_δ(a_n)‖`.
    pub g_n: f64,
    /// `a_n² / λ`.
    pub bound: f64,
}

impl GapRow {
    pub fn holds(&self) -> bool {
        self.g_n < self.bound
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapDiagnostic {
    pub rows: Vec<GapRow>,
}

impl GapDiagnostic {
    pub fn all_hold(&self) -> bool {
        self.rows.iter().all(GapRow::holds)
    }
}

/// Distance of every kept iterate to the regularized solution at the same
/// `a_n`, next to the bound `a_n²/λ`.
///
/// This is a diagnostic: the bound is only guaranteed for schedules that
/// pass the discrete validator, so a violation is logged, not raised.
pub fn gap_diagnostic(
    problem: &MonotoneProblem,
    f_delta: &GridFunction,
    schedule: &PowerSchedule,
    report: &SolveReport,
    lambda: f64,
) -> Result<GapDiagnostic> {
    if !(lambda > 0.0) {
        return Err(Error::param(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    if report.iterates_kept.is_empty() {
        return Err(Error::param("the report kept no iterates"));
    }
    let mut warm = GridFunction::zeros(problem.grid().clone());
    let mut rows = Vec::with_capacity(report.iterates_kept.len());
    for (n, u) in &report.iterates_kept {
        let a_n = schedule.at_step(*n);
        let v = solve_regularized_from(
            problem,
            a_n,
            f_delta,
            NEWTON_TOL,
            &warm,
            &NewtonOptions::default(),
        )?;
        rows.push(GapRow {
            n: *n,
            a_n,
            g_n: distance(u, &v.v)?,
            bound: a_n * a_n / lambda,
        });
        warm = v.v;
    }
    let out = GapDiagnostic { rows };
    if !out.all_hold() {
        warn!("gap bound a_n^2/lambda violated for some kept iterates");
    }
    Ok(out)
}

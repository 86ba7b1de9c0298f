use log::debug;

use super::dsmg::non_finite_to_divergence;
use super::{divergence, SolveReport, StopReason, StopRule, Thinner};
use crate::error::Result;
use crate::hilbert::{norm, GridFunction};
use crate::operator::MonotoneProblem;
use crate::schedule::PowerSchedule;

/// Regularized Newton baseline
/// `u_{n+1} = u_n − (F'(u_n) + a_n I)^{-1}[F(u_n) + a_n u_n − f_δ]`,
/// one dense LU factorization per step.
///
/// The usual schedule is `a_n = a_0/(1+n)`, i.e. `PowerSchedule::from_initial(a0, 1.0)`.
pub fn dsmn_iterate(
    problem: &MonotoneProblem,
    f_delta: &GridFunction,
    schedule: &PowerSchedule,
    stop: &StopRule,
    u0: &GridFunction,
) -> Result<SolveReport> {
    u0.check_same_grid(f_delta)?;
    problem.grid().check_len(u0.len())?;
    let threshold = stop.threshold();

    let mut u = u0.clone();
    let mut residuals = Vec::new();
    let mut a_hist = Vec::new();
    let mut kept = Thinner::new();
    let mut n = 0usize;

    let stopped_by = loop {
        let fu = problem
            .apply(&u)
            .map_err(|e| non_finite_to_divergence(e, n, &residuals))?;
        let data_res = &fu - f_delta;
        let r = norm(&data_res);
        residuals.push(r);
        if !r.is_finite() {
            return Err(divergence(n, "non-finite residual", &residuals));
        }
        kept.offer(n, &u);
        if stop.is_met(r) {
            break StopReason::Discrepancy;
        }
        if n >= stop.max_iterations {
            break StopReason::MaxIterations;
        }

        let a = schedule.at_step(n);
        a_hist.push(a);
        let mut jac = problem.derivative_matrix(&u)?;
        for i in 0..jac.nrows() {
            jac[(i, i)] += a;
        }
        let rhs = data_res.axpy(a, &u)?;
        let step = jac
            .lu()
            .solve(rhs.values())
            .ok_or_else(|| divergence(n, "singular Newton system", &residuals))?;
        if step.iter().any(|v| !v.is_finite()) {
            return Err(divergence(n, "non-finite Newton step", &residuals));
        }
        *u.values_mut() -= step;
        n += 1;
    };

    debug!(
        "dsmn: stopped by {stopped_by} at n = {n}, residual {:e}",
        residuals[n]
    );
    let error_vs_y = problem.error_vs_exact(&u)?;
    Ok(SolveReport {
        iterates_kept: kept.finish(n, &u),
        residual_history: residuals,
        a_history: a_hist,
        alpha_history: Vec::new(),
        n_delta: n,
        t_delta: None,
        final_iterate: u,
        stopped_by,
        error_vs_y,
        clipped_steps: 0,
        threshold,
    })
}

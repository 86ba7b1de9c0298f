use log::{debug, info};

use super::{divergence, warn_if_not_monotone, SolveReport, StopReason, StopRule, Thinner};
use crate::error::{Error, Result};
use crate::hilbert::{norm, GridFunction};
use crate::operator::MonotoneProblem;
use crate::schedule::{PowerSchedule, StepSizePolicy};

/// Gradient iteration `u_{n+1} = u_n − α_n A_n^*[F(u_n) + a_n u_n − f_δ]`
/// with `A_n = F'(u_n) + a_n I`.
///
/// Each step costs a few operator and adjoint applications; no linear
/// system is ever solved.
pub fn dsmg_iterate(
    problem: &MonotoneProblem,
    f_delta: &GridFunction,
    schedule: &PowerSchedule,
    steps: &StepSizePolicy,
    stop: &StopRule,
    u0: &GridFunction,
) -> Result<SolveReport> {
    u0.check_same_grid(f_delta)?;
    problem.grid().check_len(u0.len())?;
    let m1 = problem.bounds().m1;
    let threshold = stop.threshold();

    let mut u = u0.clone();
    let mut residuals = Vec::new();
    let mut a_hist = Vec::new();
    let mut alphas = Vec::new();
    let mut kept = Thinner::new();
    let mut clipped = 0usize;
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
        let step = steps.step(a, m1)?;
        if step.clipped {
            if clipped == 0 {
                info!(
                    "dsmg: step size clipped to the admissible bound {:.4e} at n = {n}",
                    step.alpha
                );
            }
            clipped += 1;
        }
        alphas.push(step.alpha);

        // g = A_n^* (F(u) − f_δ + a u)
        let reg_res = data_res.axpy(a, &u)?;
        let mut g = problem.adjoint_derivative_apply(&u, &reg_res)?;
        *g.values_mut() += reg_res.values() * a;
        u = u.axpy(-step.alpha, &g)?;
        n += 1;
        if !u.is_finite() {
            return Err(divergence(n, "non-finite iterate", &residuals));
        }
    };

    debug!(
        "dsmg: stopped by {stopped_by} at n = {n}, residual {:e}",
        residuals[n]
    );
    warn_if_not_monotone(&residuals, "dsmg");
    let error_vs_y = problem.error_vs_exact(&u)?;
    Ok(SolveReport {
        iterates_kept: kept.finish(n, &u),
        residual_history: residuals,
        a_history: a_hist,
        alpha_history: alphas,
        n_delta: n,
        t_delta: None,
        final_iterate: u,
        stopped_by,
        error_vs_y,
        clipped_steps: clipped,
        threshold,
    })
}

pub(crate) fn non_finite_to_divergence(e: Error, step: usize, history: &[f64]) -> Error {
    match e {
        Error::NonFinite(what) => divergence(step, format!("non-finite {what}"), history),
        other => other,
    }
}

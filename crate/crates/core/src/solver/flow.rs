use log::{debug, warn};

use super::dsmg::non_finite_to_divergence;
use super::{divergence, SolveReport, StopReason, StopRule, Thinner};
use crate::error::{Error, Result};
use crate::hilbert::{norm, GridFunction};
use crate::operator::MonotoneProblem;
use crate::schedule::{validate_continuous, PowerSchedule};

/// Time step and horizon of the fixed-step integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    pub dt: f64,
    pub t_max: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            dt: 0.1,
            t_max: 10_000.0,
        }
    }
}

/// Relative accuracy of the refined stopping time.
const CROSSING_TOL: f64 = 1e-6;

struct Flow<'a> {
    problem: &'a MonotoneProblem,
    f_delta: &'a GridFunction,
    schedule: &'a PowerSchedule,
}

impl Flow<'_> {
    /// `−A*_{a(t)}[F(u) + a(t)u − f_δ]`.
    fn velocity(&self, t: f64, u: &GridFunction) -> Result<GridFunction> {
        let a = self.schedule.at(t);
        let r = (&self.problem.apply(u)? - self.f_delta).axpy(a, u)?;
        let mut g = self.problem.adjoint_derivative_apply(u, &r)?;
        *g.values_mut() += r.values() * a;
        Ok(&g * -1.0)
    }

    fn rk4(&self, t: f64, u: &GridFunction, h: f64) -> Result<GridFunction> {
        let k1 = self.velocity(t, u)?;
        let k2 = self.velocity(t + 0.5 * h, &u.axpy(0.5 * h, &k1)?)?;
        let k3 = self.velocity(t + 0.5 * h, &u.axpy(0.5 * h, &k2)?)?;
        let k4 = self.velocity(t + h, &u.axpy(h, &k3)?)?;
        let mut out = u.clone();
        *out.values_mut() +=
            (k1.values() + k2.values() * 2.0 + k3.values() * 2.0 + k4.values()) * (h / 6.0);
        Ok(out)
    }

    fn residual(&self, u: &GridFunction) -> Result<f64> {
        let r = norm(&(&self.problem.apply(u)? - self.f_delta));
        if r.is_finite() {
            Ok(r)
        } else {
            Err(Error::NonFinite("flow residual".into()))
        }
    }
}

/// Integrates `u̇ = −A*_{a(t)}[F(u) + a(t)u − f_δ]` with classical RK4 at a
/// fixed step and stops at the first time the residual reaches `C1 δ^ζ`.
///
/// The crossing time is refined by bisecting a single RK4 substep from the
/// last state above the threshold, so `t_δ` is reproducible and the
/// returned state satisfies the threshold.
pub fn dsmg_flow(
    problem: &MonotoneProblem,
    f_delta: &GridFunction,
    schedule: &PowerSchedule,
    stop: &StopRule,
    u0: &GridFunction,
    options: &FlowOptions,
) -> Result<SolveReport> {
    u0.check_same_grid(f_delta)?;
    problem.grid().check_len(u0.len())?;
    if !(options.dt > 0.0 && options.t_max > 0.0) {
        return Err(Error::param(format!(
            "flow needs dt > 0 and t_max > 0 (got {}, {})",
            options.dt, options.t_max
        )));
    }
    let report = validate_continuous(schedule);
    if !report.is_valid() {
        let names: Vec<String> = report.violations().iter().map(|c| c.to_string()).collect();
        warn!(
            "flow schedule is outside the admissible family: {}",
            names.join("; ")
        );
    }

    let flow = Flow {
        problem,
        f_delta,
        schedule,
    };
    let threshold = stop.threshold();
    let mut u = u0.clone();
    let mut t = 0.0;
    let mut residuals = vec![flow.residual(&u)?];
    let mut a_hist = vec![schedule.at(0.0)];
    let mut kept = Thinner::new();
    kept.offer(0, &u);
    let mut k = 0usize;

    let stopped_by = if stop.is_met(residuals[0]) {
        StopReason::Discrepancy
    } else {
        loop {
            if t >= options.t_max {
                break StopReason::MaxTime;
            }
            if k >= stop.max_iterations {
                break StopReason::MaxIterations;
            }
            let h = options.dt.min(options.t_max - t);
            let next = flow
                .rk4(t, &u, h)
                .map_err(|e| non_finite_to_divergence(e, k, &residuals))?;
            if !next.is_finite() {
                return Err(divergence(k + 1, "non-finite flow state", &residuals));
            }
            let r = flow
                .residual(&next)
                .map_err(|e| non_finite_to_divergence(e, k + 1, &residuals))?;
            if stop.is_met(r) {
                let (tau, state, r_stop) = refine_crossing(&flow, t, &u, h, next, r, threshold)?;
                t += tau;
                u = state;
                k += 1;
                residuals.push(r_stop);
                a_hist.push(schedule.at(t));
                kept.offer(k, &u);
                break StopReason::Discrepancy;
            }
            t += h;
            u = next;
            k += 1;
            residuals.push(r);
            a_hist.push(schedule.at(t));
            kept.offer(k, &u);
        }
    };

    debug!(
        "flow: stopped by {stopped_by} at t = {t}, residual {:e}",
        residuals[k]
    );
    let error_vs_y = problem.error_vs_exact(&u)?;
    Ok(SolveReport {
        iterates_kept: kept.finish(k, &u),
        residual_history: residuals,
        a_history: a_hist,
        alpha_history: Vec::new(),
        n_delta: k,
        t_delta: Some(t),
        final_iterate: u,
        stopped_by,
        error_vs_y,
        clipped_steps: 0,
        threshold,
    })
}

/// Bisects the substep `τ ∈ (0, h]` so that the residual sits within
/// `CROSSING_TOL·threshold` below the threshold.
fn refine_crossing(
    flow: &Flow<'_>,
    t: f64,
    u: &GridFunction,
    h: f64,
    end: GridFunction,
    r_end: f64,
    threshold: f64,
) -> Result<(f64, GridFunction, f64)> {
    let tol = CROSSING_TOL * threshold;
    let (mut lo, mut hi) = (0.0, h);
    let mut best = (h, end, r_end);
    for _ in 0..200 {
        if threshold - best.2 <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let state = flow.rk4(t, u, mid)?;
        let r = flow.residual(&state)?;
        if r <= threshold {
            hi = mid;
            best = (mid, state, r);
        } else {
            lo = mid;
        }
    }
    Ok(best)
}

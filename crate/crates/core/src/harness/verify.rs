use std::sync::Arc;

use super::format_table;
use super::noise::make_noisy_rhs;
use crate::error::{Error, Result};
use crate::hilbert::{norm, GridFunction};
use crate::operator::{
    adjoint_check, derivative_check, monotonicity_sweep, wiener_problem, wiener_rhs_for_one,
    MonotoneProblem, Target, WienerFilter,
};
use crate::regularized::{
    find_discrepancy_crossing, log_spaced_decreasing, perturbation_bound_check, phi_psi_curve,
    solve_regularized_from, NewtonOptions,
};
use crate::schedule::{
    baseline_construction, heuristic_a0, kappa_scale, validate_continuous, verify_integral_lemmas,
    DiscreteContext, PowerSchedule, PsiProfile, DEFAULT_N_CHECK,
};
use crate::solver::{check_initial_condition, DEFAULT_C1, DEFAULT_ZETA};

/// Inputs of the oracle suite.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub n_points: usize,
    pub delta_rel: f64,
    pub seed: u64,
    /// `(d, c, b)` of the schedule checked by the continuous oracles.
    pub schedule: (f64, f64, f64),
    /// Replace the cubic term by its negative, which destroys monotonicity.
    pub anti_monotone: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            n_points: 100,
            delta_rel: 0.01,
            seed: 1,
            schedule: (2.0, 1.0, 0.25),
            anti_monotone: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub rows: Vec<OracleRow>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    pub fn get(&self, name: &str) -> Option<&OracleRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn table(&self) -> String {
        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.name.to_string(),
                    if r.passed { "pass" } else { "FAIL" }.to_string(),
                    r.detail.clone(),
                ]
            })
            .collect();
        format_table(&["oracle", "result", "detail"], &body)
    }

    fn record(&mut self, name: &'static str, outcome: Result<(bool, String)>) {
        let (passed, detail) = match outcome {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        self.rows.push(OracleRow {
            name,
            passed,
            detail,
        });
    }
}

pub const NEWTON_TOL: f64 = 1e-11;
/// Slack allowed by the monotone-curve and bound checks.
pub const CHECK_SLACK: f64 = 1e-10;

/// Runs every oracle on the Wiener problem and collects the results.
/// A failing or erroring oracle never stops the remaining ones.
pub fn verify_lemmas_command(options: &VerifyOptions) -> Result<VerifyReport> {
    let base = wiener_problem(options.n_points, Target::One)?;
    let problem = if options.anti_monotone {
        let op = WienerFilter::with_cubic_coefficient(base.grid().clone(), -1.0 / 6.0);
        MonotoneProblem::new(Arc::new(op), *base.bounds())
            .with_rhs(base.rhs().unwrap().clone())?
            .with_exact_solution(base.exact_solution().unwrap().clone())?
    } else {
        base
    };
    let f = problem.rhs().unwrap().clone();
    let y = problem.exact_solution().unwrap().clone();
    let y_norm = norm(&y);
    let noisy = make_noisy_rhs(&f, options.delta_rel, options.seed)?;
    let (fd, delta) = (noisy.f_delta, noisy.delta);
    let op = problem.operator().as_ref();
    let seed = options.seed;
    let mut report = VerifyReport::default();

    report.record(
        "exact solution identity",
        (|| {
            let one = GridFunction::constant(problem.grid().clone(), 1.0);
            let f1 = problem.apply(&one)?;
            let err = problem
                .grid()
                .nodes()
                .iter()
                .zip(f1.as_slice())
                .map(|(&x, &v)| (v - wiener_rhs_for_one(x)).abs())
                .fold(0.0, f64::max);
            Ok((
                err <= 1.5e-3,
                format!("max nodal error {err:.3e} (limit 1.5e-3)"),
            ))
        })(),
    );

    report.record(
        "monotonicity",
        (|| {
            let s = monotonicity_sweep(op, 1000, 2.0, seed)?;
            Ok((
                s.worst >= -1e-12,
                format!(
                    "min <F(u)-F(v),u-v> = {:.3e} over {} pairs",
                    s.worst, s.samples
                ),
            ))
        })(),
    );

    report.record(
        "derivative",
        (|| {
            let s = derivative_check(op, 100, 1e-5, seed)?;
            Ok((
                s.worst <= 1e-6,
                format!("max relative FD error {:.3e}", s.worst),
            ))
        })(),
    );

    report.record(
        "adjoint",
        (|| {
            let s = adjoint_check(op, 100, seed)?;
            Ok((
                s.worst <= 1e-10,
                format!("max relative mismatch {:.3e}", s.worst),
            ))
        })(),
    );

    report.record(
        "phi/psi monotone",
        (|| {
            let curve = phi_psi_curve(
                &problem,
                &fd,
                &log_spaced_decreasing(10.0, 1e-3, 25),
                NEWTON_TOL,
            )?;
            let phi_ok = curve.windows(2).all(|w| w[1].phi < w[0].phi - CHECK_SLACK);
            let psi_ok = curve.windows(2).all(|w| w[1].psi > w[0].psi + CHECK_SLACK);
            let (first, last) = (curve[0], curve[curve.len() - 1]);
            Ok((
                phi_ok && psi_ok,
                format!(
                    "phi {:.3e} -> {:.3e}, psi {:.3e} -> {:.3e} over a = 10 .. 1e-3",
                    first.phi, last.phi, first.psi, last.psi
                ),
            ))
        })(),
    );

    report.record(
        "perturbation bounds",
        (|| {
            let mut ok = true;
            let mut worst: f64 = f64::INFINITY;
            for a in [1e-1, 1e-2, 1e-3] {
                let b = perturbation_bound_check(&problem, &f, &fd, a, NEWTON_TOL)?;
                ok &= b.lhs <= b.rhs + 1e-8 && b.v_norm <= y_norm + 1e-8;
                worst = worst.min((b.rhs - b.lhs).min(y_norm - b.v_norm));
            }
            Ok((ok, format!("smallest margin {worst:.3e}")))
        })(),
    );

    report.record(
        "discrepancy crossing",
        (|| {
            let c = 0.5 * (DEFAULT_C1 + 1.0);
            let x = find_discrepancy_crossing(&problem, &fd, c, delta, (1e-10, 10.0), NEWTON_TOL)?;
            let ok = (x.phi - x.target).abs() <= 1e-6 * x.target;
            Ok((
                ok,
                format!(
                    "a* = {:.4e}, phi = {:.6e}, target {:.6e}",
                    x.a, x.phi, x.target
                ),
            ))
        })(),
    );

    let (d, c, b) = options.schedule;
    let schedule = || PowerSchedule::new(d, c, b);

    report.record(
        "continuous schedule",
        (|| {
            let r = validate_continuous(&schedule()?);
            let names: Vec<String> = r.violations().iter().map(|v| v.to_string()).collect();
            let detail = if names.is_empty() {
                format!("(d, c, b) = ({d}, {c}, {b}) admissible")
            } else {
                format!("violates: {}", names.join("; "))
            };
            Ok((r.is_valid(), detail))
        })(),
    );

    report.record(
        "integral inequalities",
        (|| {
            let s = schedule()?;
            let times = [0.5, 1.0, 5.0, 20.0];
            let psi = psi_samples(&problem, &fd, &s, 20.0, 41)?;
            let rep = verify_integral_lemmas(&s, &times, Some(&psi))?;
            let g = rep
                .growth
                .iter()
                .map(|r| r.margin())
                .fold(f64::INFINITY, f64::min);
            let dr = rep
                .drift
                .iter()
                .map(|r| r.margin())
                .fold(f64::INFINITY, f64::min);
            Ok((
                rep.holds(),
                format!("min growth margin {g:.3e}, min drift margin {dr:.3e}"),
            ))
        })(),
    );

    report.record("discrete schedule conditions", (|| {
        let f0 = problem.apply(&GridFunction::zeros(problem.grid().clone()))?;
        let data_offset = norm(&(&fd - &f0));
        let f_offset = norm(&(&f - &f0));
        let c_disc = 0.5 * (DEFAULT_C1 + 1.0);
        let (s, p) = baseline_construction(problem.bounds(), y_norm, f_offset, norm(&f), c_disc)?;
        let ctx = DiscreteContext {
            bounds: *problem.bounds(),
            data_offset,
            y_norm,
            alpha_floor: 1.0,
            n_check: DEFAULT_N_CHECK,
        };
        let k = kappa_scale(&s, &p, &ctx)?;
        Ok((
            k.report.is_valid(),
            format!("kappa = {:.4e}, lambda = {:.4e}, all five conditions up to n = {DEFAULT_N_CHECK}", k.kappa, k.params.lambda),
        ))
    })());

    report.record(
        "initial gap",
        (|| {
            let a0 = heuristic_a0(delta, DEFAULT_ZETA, 0.5)?;
            let zero = GridFunction::zeros(problem.grid().clone());
            let ic = check_initial_condition(&problem, &fd, a0, &zero)?;
            Ok((
                ic.g0_bound_ok(),
                format!(
                    "||u0 - V0|| = {:.4e} <= ||F(0) - f_delta||/a0 = {:.4e}",
                    ic.g0, ic.g0_limit
                ),
            ))
        })(),
    );

    Ok(report)
}

/// `ψ(s) = ‖V_δ(a(s))‖` sampled at `count` equally spaced times in `[0, t_max]`.
pub fn psi_samples(
    problem: &MonotoneProblem,
    f_delta: &GridFunction,
    schedule: &PowerSchedule,
    t_max: f64,
    count: usize,
) -> Result<PsiProfile> {
    if count < 2 {
        return Err(Error::param("need at least two psi samples"));
    }
    let mut warm = GridFunction::zeros(problem.grid().clone());
    let mut samples = Vec::with_capacity(count);
    for k in 0..count {
        let t = t_max * k as f64 / (count - 1) as f64;
        let sol = solve_regularized_from(
            problem,
            schedule.at(t),
            f_delta,
            NEWTON_TOL,
            &warm,
            &NewtonOptions::default(),
        )?;
        samples.push((t, sol.psi));
        warm = sol.v;
    }
    PsiProfile::new(samples)
}

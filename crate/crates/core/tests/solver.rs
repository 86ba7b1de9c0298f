use std::sync::Arc;

use dsm_core::harness::make_noisy_rhs;
use dsm_core::hilbert::{distance, norm, Grid, GridFunction};
use dsm_core::operator::{wiener_problem, MonotoneProblem, Operator, OperatorBounds, Target};
use dsm_core::regularized::solve_regularized;
use dsm_core::schedule::{
    baseline_construction, heuristic_a0, kappa_scale, DiscreteContext, PowerSchedule,
    StepSizePolicy, DEFAULT_N_CHECK,
};
use dsm_core::solver::{
    check_initial_condition, dsmg_flow, dsmg_iterate, dsmn_iterate, gap_diagnostic, FlowOptions,
    StopReason, StopRule,
};
use dsm_core::Error;
use proptest::prelude::*;

struct Setup {
    problem: MonotoneProblem,
    f_delta: GridFunction,
    delta: f64,
}

fn setup(target: Target, delta_rel: f64, seed: u64) -> Setup {
    let problem = wiener_problem(100, target).unwrap();
    let d = make_noisy_rhs(problem.rhs().unwrap(), delta_rel, seed).unwrap();
    Setup {
        problem,
        f_delta: d.f_delta,
        delta: d.delta,
    }
}

fn gradient_schedule(delta: f64) -> PowerSchedule {
    PowerSchedule::from_initial(heuristic_a0(delta, 0.99, 0.5).unwrap(), 0.25).unwrap()
}

fn newton_schedule(delta: f64) -> PowerSchedule {
    PowerSchedule::from_initial(heuristic_a0(delta, 0.99, 1.0).unwrap(), 1.0).unwrap()
}

fn zeros(p: &MonotoneProblem) -> GridFunction {
    GridFunction::zeros(p.grid().clone())
}

#[test]
fn starting_at_the_solution_stops_immediately() {
    let problem = wiener_problem(100, Target::One).unwrap();
    let y = problem.exact_solution().unwrap().clone();
    let fy = problem.apply(&y).unwrap();
    let delta = 0.01;
    // f_δ = F(y) + δe with ‖e‖ = 1, so the residual at y is δ < C1 δ^ζ.
    let e = GridFunction::from_fn(problem.grid().clone(), |x| (3.0 * x).cos());
    let f_delta = fy.axpy(delta / norm(&e), &e).unwrap();
    let stop = StopRule::with_defaults(delta).unwrap();
    let s = gradient_schedule(delta);

    let g = dsmg_iterate(
        &problem,
        &f_delta,
        &s,
        &StepSizePolicy::default(),
        &stop,
        &y,
    )
    .unwrap();
    let n = dsmn_iterate(&problem, &f_delta, &newton_schedule(delta), &stop, &y).unwrap();
    let f = dsmg_flow(&problem, &f_delta, &s, &stop, &y, &FlowOptions::default()).unwrap();
    for r in [&g, &n, &f] {
        assert_eq!(r.n_delta, 0);
        assert_eq!(r.stopped_by, StopReason::Discrepancy);
        assert_eq!(r.final_iterate, y);
        assert!((r.residual_at_stop() - delta).abs() < 1e-12);
    }
    assert_eq!(f.t_delta, Some(0.0));
}

#[test]
fn newton_baseline_examples() {
    let one = setup(Target::One, 0.01, 1);
    let stop = StopRule::with_defaults(one.delta).unwrap();
    let r = dsmn_iterate(
        &one.problem,
        &one.f_delta,
        &newton_schedule(one.delta),
        &stop,
        &zeros(&one.problem),
    )
    .unwrap();
    assert!((4..=25).contains(&r.n_delta), "{}", r.n_delta);
    assert!(r.satisfies_stopping_contract());
    assert!(r.alpha_history.is_empty());

    let sin = setup(Target::SinPi, 0.01, 1);
    let stop = StopRule::with_defaults(sin.delta).unwrap();
    let r = dsmn_iterate(
        &sin.problem,
        &sin.f_delta,
        &newton_schedule(sin.delta),
        &stop,
        &zeros(&sin.problem),
    )
    .unwrap();
    assert!((3..=25).contains(&r.n_delta), "{}", r.n_delta);
}

#[test]
fn gradient_iteration_on_the_harder_target_needs_many_more_steps() {
    // Hundreds of iterations; the reference count of about 500 is matched
    // within a factor of four.
    let s = setup(Target::Sin2Pi, 0.01, 1);
    let stop = StopRule::with_defaults(s.delta).unwrap();
    let r = dsmg_iterate(
        &s.problem,
        &s.f_delta,
        &gradient_schedule(s.delta),
        &StepSizePolicy::default(),
        &stop,
        &zeros(&s.problem),
    )
    .unwrap();
    assert_eq!(r.stopped_by, StopReason::Discrepancy);
    assert!((128..=2048).contains(&r.n_delta), "{}", r.n_delta);
    assert!(r.iterates_kept.len() <= 101);
    assert_eq!(r.iterates_kept.last().unwrap().0, r.n_delta);
}

#[test]
fn gradient_steps_respect_the_band_and_are_clipped_for_the_wiener_bound() {
    let s = setup(Target::One, 0.01, 2);
    let stop = StopRule::with_defaults(s.delta).unwrap();
    let m1 = s.problem.bounds().m1;
    let r = dsmg_iterate(
        &s.problem,
        &s.f_delta,
        &gradient_schedule(s.delta),
        &StepSizePolicy::capped(1.0),
        &stop,
        &zeros(&s.problem),
    )
    .unwrap();
    assert_eq!(r.clipped_steps, r.n_delta);
    for (a, alpha) in r.a_history.iter().zip(&r.alpha_history) {
        assert!(*alpha > 0.0 && *alpha <= 2.0 / (a * a + (m1 + a) * (m1 + a)) * (1.0 + 1e-15));
    }
}

#[test]
fn flow_and_iteration_agree_at_the_same_discrepancy_level() {
    let s = setup(Target::One, 0.01, 1);
    let stop = StopRule::with_defaults(s.delta).unwrap();
    let sched = gradient_schedule(s.delta);
    let u0 = zeros(&s.problem);
    let it = dsmg_iterate(
        &s.problem,
        &s.f_delta,
        &sched,
        &StepSizePolicy::default(),
        &stop,
        &u0,
    )
    .unwrap();
    let fl = dsmg_flow(
        &s.problem,
        &s.f_delta,
        &sched,
        &stop,
        &u0,
        &FlowOptions::default(),
    )
    .unwrap();
    let y_norm = norm(s.problem.exact_solution().unwrap());
    assert!(distance(&it.final_iterate, &fl.final_iterate).unwrap() <= 0.1 * y_norm);

    let thr = stop.threshold();
    assert_eq!(fl.stopped_by, StopReason::Discrepancy);
    assert!(fl.residual_at_stop() <= thr);
    assert!(thr - fl.residual_at_stop() <= 1e-6 * thr);
    assert!(fl.satisfies_stopping_contract());
    assert!(fl.t_delta.unwrap() > 0.0);
}

#[test]
fn flow_reports_running_out_of_time() {
    let s = setup(Target::One, 0.001, 1);
    let stop = StopRule::with_defaults(s.delta).unwrap();
    let opts = FlowOptions {
        dt: 0.1,
        t_max: 1.0,
    };
    let r = dsmg_flow(
        &s.problem,
        &s.f_delta,
        &gradient_schedule(s.delta),
        &stop,
        &zeros(&s.problem),
        &opts,
    )
    .unwrap();
    assert_eq!(r.stopped_by, StopReason::MaxTime);
    assert!((r.t_delta.unwrap() - 1.0).abs() < 1e-9);
    assert!(r.satisfies_stopping_contract());
    let bad = FlowOptions {
        dt: 0.0,
        t_max: 1.0,
    };
    assert!(dsmg_flow(
        &s.problem,
        &s.f_delta,
        &gradient_schedule(s.delta),
        &stop,
        &zeros(&s.problem),
        &bad
    )
    .is_err());
}

#[test]
fn iteration_cap_is_reported() {
    let s = setup(Target::One, 0.001, 1);
    let stop = StopRule::new(1.01, 0.99, s.delta, 5).unwrap();
    let r = dsmg_iterate(
        &s.problem,
        &s.f_delta,
        &gradient_schedule(s.delta),
        &StepSizePolicy::default(),
        &stop,
        &zeros(&s.problem),
    )
    .unwrap();
    assert_eq!(r.stopped_by, StopReason::MaxIterations);
    assert_eq!(r.n_delta, 5);
    assert_eq!(r.residual_history.len(), 6);
    assert!(r.satisfies_stopping_contract());
}

#[test]
fn oversized_steps_diverge_with_history() {
    let s = setup(Target::One, 0.01, 1);
    let loose = OperatorBounds::new(1e-3, 2.0, 2.0).unwrap();
    let problem = s.problem.clone().with_bounds(loose);
    let stop = StopRule::with_defaults(s.delta).unwrap();
    let r = dsmg_iterate(
        &problem,
        &s.f_delta,
        &gradient_schedule(s.delta),
        &StepSizePolicy::constant(500.0),
        &stop,
        &zeros(&problem),
    );
    match r {
        Err(Error::Divergence {
            residual_history, ..
        }) => assert!(!residual_history.is_empty()),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn constant_step_outside_the_band_is_rejected() {
    let s = setup(Target::One, 0.01, 1);
    let stop = StopRule::with_defaults(s.delta).unwrap();
    let r = dsmg_iterate(
        &s.problem,
        &s.f_delta,
        &gradient_schedule(s.delta),
        &StepSizePolicy::constant(1.0),
        &stop,
        &zeros(&s.problem),
    );
    assert!(matches!(r, Err(Error::Parameter(_))));
}

/// Wiener operator that refuses to assemble its Jacobian.
struct MatrixFree(MonotoneProblem);

impl Operator for MatrixFree {
    fn grid(&self) -> &Arc<Grid> {
        self.0.grid()
    }
    fn apply(&self, u: &GridFunction) -> dsm_core::Result<GridFunction> {
        self.0.apply(u)
    }
    fn derivative_apply(
        &self,
        u: &GridFunction,
        h: &GridFunction,
    ) -> dsm_core::Result<GridFunction> {
        self.0.derivative_apply(u, h)
    }
    fn adjoint_derivative_apply(
        &self,
        u: &GridFunction,
        h: &GridFunction,
    ) -> dsm_core::Result<GridFunction> {
        self.0.adjoint_derivative_apply(u, h)
    }
    fn derivative_matrix(&self, _u: &GridFunction) -> dsm_core::Result<nalgebra::DMatrix<f64>> {
        panic!("the gradient method must not assemble a Jacobian");
    }
    fn name(&self) -> &str {
        "matrix-free"
    }
}

#[test]
fn gradient_methods_never_assemble_a_matrix() {
    let s = setup(Target::One, 0.01, 1);
    let bounds = *s.problem.bounds();
    let y = s.problem.exact_solution().unwrap().clone();
    let mf = MonotoneProblem::new(Arc::new(MatrixFree(s.problem)), bounds)
        .with_exact_solution(y)
        .unwrap();
    let stop = StopRule::with_defaults(s.delta).unwrap();
    let sched = gradient_schedule(s.delta);
    let u0 = zeros(&mf);
    let r = dsmg_iterate(
        &mf,
        &s.f_delta,
        &sched,
        &StepSizePolicy::default(),
        &stop,
        &u0,
    )
    .unwrap();
    assert_eq!(r.stopped_by, StopReason::Discrepancy);
    let f = dsmg_flow(&mf, &s.f_delta, &sched, &stop, &u0, &FlowOptions::default()).unwrap();
    assert_eq!(f.stopped_by, StopReason::Discrepancy);
}

#[test]
fn initial_condition_examples() {
    let s = setup(Target::One, 0.01, 1);
    let a0 = 0.5;
    let v0 = solve_regularized(&s.problem, a0, &s.f_delta, 1e-13).unwrap();
    let at_v0 = check_initial_condition(&s.problem, &s.f_delta, a0, &v0.v).unwrap();
    assert!(at_v0.h0 <= 1e-12);
    assert!(at_v0.h0_ok() && at_v0.g0_bound_ok());

    let zero = zeros(&s.problem);
    let at_zero = check_initial_condition(&s.problem, &s.f_delta, a0, &zero).unwrap();
    assert!(at_zero.g0_bound_ok());
    // a0 ‖V0‖ = ‖F(V0) − f_δ‖ ≤ ‖F(0) − f_δ‖.
    assert!((a0 * v0.psi - v0.phi).abs() <= 1e-12);
    assert!(v0.phi <= at_zero.g0_limit * a0);

    let far = GridFunction::from_fn(s.problem.grid().clone(), |x| 40.0 * (7.0 * x).sin());
    let at_far = check_initial_condition(&s.problem, &s.f_delta, a0, &far).unwrap();
    assert!(!at_far.h0_ok());
    assert!(check_initial_condition(&s.problem, &s.f_delta, 0.0, &zero).is_err());
}

#[test]
fn gap_stays_below_bound_for_a_validated_schedule() {
    let s = setup(Target::One, 0.01, 1);
    let p = &s.problem;
    let y_norm = norm(p.exact_solution().unwrap());
    let f = p.rhs().unwrap();
    let f0 = p.apply(&zeros(p)).unwrap();
    let (base, params) =
        baseline_construction(p.bounds(), y_norm, norm(&(f - &f0)), norm(f), 1.005).unwrap();
    let alpha_floor = 1e-3;
    let ctx = DiscreteContext {
        bounds: *p.bounds(),
        data_offset: norm(&(&s.f_delta - &f0)),
        y_norm,
        alpha_floor,
        n_check: DEFAULT_N_CHECK,
    };
    let scaled = kappa_scale(&base, &params, &ctx).unwrap();
    let stop = StopRule::new(1.01, 0.99, s.delta, 400).unwrap();
    let policy = StepSizePolicy::capped(1.0).with_floor(1e-12);
    let r = dsmg_iterate(p, &s.f_delta, &scaled.schedule, &policy, &stop, &zeros(p)).unwrap();
    let gap = gap_diagnostic(p, &s.f_delta, &scaled.schedule, &r, scaled.params.lambda).unwrap();
    assert!(gap.rows.len() >= 10);
    for row in &gap.rows {
        assert!(
            row.holds(),
            "n = {}: g = {:e}, bound {:e}",
            row.n,
            row.g_n,
            row.bound
        );
    }
    // At n = 0 from u0 = 0: g0 ≤ ‖F(0) − f_δ‖/a0 ≤ a0²/λ.
    let first = gap.rows[0];
    assert_eq!(first.n, 0);
    assert!(first.g_n <= ctx.data_offset / first.a_n);
    assert!(ctx.data_offset / first.a_n <= first.bound);
}

#[test]
fn gap_diagnostic_for_the_heuristic_schedule_is_informational() {
    let s = setup(Target::One, 0.01, 1);
    let stop = StopRule::with_defaults(s.delta).unwrap();
    let sched = gradient_schedule(s.delta);
    let r = dsmg_iterate(
        &s.problem,
        &s.f_delta,
        &sched,
        &StepSizePolicy::default(),
        &stop,
        &zeros(&s.problem),
    )
    .unwrap();
    let gap = gap_diagnostic(&s.problem, &s.f_delta, &sched, &r, 10.0).unwrap();
    assert_eq!(gap.rows.len(), r.iterates_kept.len());
    assert!(gap
        .rows
        .iter()
        .all(|row| row.g_n.is_finite() && row.bound > 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn stopping_contract_holds(seed in 0u64..1000, delta_rel in 0.003f64..0.05) {
        let s = setup(Target::One, delta_rel, seed);
        let stop = StopRule::with_defaults(s.delta).unwrap();
        let u0 = zeros(&s.problem);
        let g = dsmg_iterate(&s.problem, &s.f_delta, &gradient_schedule(s.delta), &StepSizePolicy::default(), &stop, &u0).unwrap();
        let n = dsmn_iterate(&s.problem, &s.f_delta, &newton_schedule(s.delta), &stop, &u0).unwrap();
        for r in [&g, &n] {
            prop_assert_eq!(r.stopped_by, StopReason::Discrepancy);
            prop_assert!(r.satisfies_stopping_contract());
            prop_assert_eq!(r.residual_history.len(), r.n_delta + 1);
        }
    }
}

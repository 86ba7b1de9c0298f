//! Regularization schedules `a(t) = d/(c+t)^b`, step sizes, and validators
//! for the admissibility conditions the convergence theory places on them.
//!
//! Validators never fail on an inadmissible schedule; they return a
//! [`ValidationReport`] naming every violated [`ScheduleCondition`].

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use log::warn;

use crate::error::{Error, Result};
use crate::operator::OperatorBounds;
use crate::quadrature::adaptive_simpson;

/// `a(t) = d / (c + t)^b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSchedule {
    d: f64,
    c: f64,
    b: f64,
}

impl PowerSchedule {
    /// Any positive `d`, `c`, `b` is accepted; use [`validate_continuous`] or
    /// [`validate_discrete`] to check admissibility.
    pub fn new(d: f64, c: f64, b: f64) -> Result<Self> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !(ok(d) && ok(c) && ok(b)) {
            return Err(Error::param(format!(
                "schedule needs positive finite d, c, b (got d={d}, c={c}, b={b})"
            )));
        }
        Ok(Self { d, c, b })
    }

    /// `a_n = a_0 / (1 + n)^b`, the form used by the experiments.
    pub fn from_initial(a0: f64, b: f64) -> Result<Self> {
        Self::new(a0, 1.0, b)
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn at(&self, t: f64) -> f64 {
        self.d / (self.c + t).powf(self.b)
    }

    pub fn at_step(&self, n: usize) -> f64 {
        self.at(n as f64)
    }

    /// `ȧ(t) = −b d (c+t)^{−b−1}`.
    pub fn rate(&self, t: f64) -> f64 {
        -self.b * self.d / (self.c + t).powf(self.b + 1.0)
    }

    /// `a_n − a_{n+1}` without cancellation.
    pub fn step_drop(&self, n: usize) -> f64 {
        let x = self.c + n as f64;
        -self.at_step(n) * (-self.b * (1.0 / x).ln_1p()).exp_m1()
    }

    /// `θ = 1 − 2b`.
    pub fn theta(&self) -> f64 {
        1.0 - 2.0 * self.b
    }

    /// `p = d² / (2θ)`.
    pub fn p(&self) -> f64 {
        self.d * self.d / (2.0 * self.theta())
    }

    /// `C₃ = p c^θ`.
    pub fn c3(&self) -> f64 {
        self.p() * self.c.powf(self.theta())
    }

    /// `φ(t) = ∫₀ᵗ a(s)²/2 ds` in closed form.
    pub fn phi(&self, t: f64) -> f64 {
        let theta = self.theta();
        if theta.abs() < 1e-12 {
            0.5 * self.d * self.d * ((self.c + t) / self.c).ln()
        } else {
            // p[(c+t)^θ − c^θ], written to avoid cancellation at small t.
            let ratio_pow = (theta * (t / self.c).ln_1p()).exp_m1();
            self.c3() * ratio_pow
        }
    }

    /// `sup_t |ȧ(t)|/a(t)³`; equals `b/(d² c^{1−2b})` when `b ≤ 1/2`.
    pub fn decay_ratio_sup(&self) -> f64 {
        if self.theta() >= 0.0 {
            self.b / (self.d * self.d * self.c.powf(self.theta()))
        } else {
            f64::INFINITY
        }
    }

    /// `κ·a(t)`.
    pub fn scaled(&self, kappa: f64) -> Result<Self> {
        Self::new(kappa * self.d, self.c, self.b)
    }
}

/// A named admissibility condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScheduleCondition {
    /// `b ∈ (0, 1/4]`.
    ExponentRange,
    /// `c ≥ 1`.
    OffsetAtLeastOne,
    /// `|ȧ|/a³ ≤ 1/4`.
    DecayRate,
    /// `c^{1−2b} d² ≥ 6b`.
    SixBPremise,
    /// `a_n / a_{n+1} ≤ 2`.
    StepRatio,
    /// `‖f_δ − F(0)‖ ≤ a_0³/λ`.
    InitialData,
    /// `M1/λ ≤ ‖y‖`.
    LambdaLowerBound,
    /// `c0 (M1 + a_0)/λ ≤ 1/2`.
    QuadraticTerm,
    /// `a_n²/λ − α̃ a_n⁴/(2λ) + c1 (a_n − a_{n+1})/a_{n+1} ≤ a_{n+1}²/λ`.
    Recursion,
}

impl fmt::Display for ScheduleCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::ExponentRange => "b in (0, 1/4]",
            Self::OffsetAtLeastOne => "c >= 1",
            Self::DecayRate => "|a'|/a^3 <= 1/4",
            Self::SixBPremise => "c^(1-2b) d^2 >= 6b",
            Self::StepRatio => "a_n/a_(n+1) <= 2",
            Self::InitialData => "||f_delta - F(0)|| <= a_0^3/lambda",
            Self::LambdaLowerBound => "M1/lambda <= ||y||",
            Self::QuadraticTerm => "c0 (M1 + a_0)/lambda <= 1/2",
            Self::Recursion => "a_n^2/lambda - alpha a_n^4/(2 lambda) + c1 (a_n - a_(n+1))/a_(n+1) <= a_(n+1)^2/lambda",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionCheck {
    pub condition: ScheduleCondition,
    pub passed: bool,
    /// Informational checks do not count towards [`ValidationReport::is_valid`].
    pub required: bool,
    /// Smallest `limit − value` seen (negative when violated).
    pub worst_margin: f64,
    /// First violating index for conditions swept over `n`.
    pub first_violation: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub checks: Vec<ConditionCheck>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.checks.iter().filter(|c| c.required).all(|c| c.passed)
    }

    /// Required conditions that failed.
    pub fn violations(&self) -> Vec<ScheduleCondition> {
        self.checks
            .iter()
            .filter(|c| c.required && !c.passed)
            .map(|c| c.condition)
            .collect()
    }

    pub fn get(&self, condition: ScheduleCondition) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.condition == condition)
    }

    pub fn passed(&self, condition: ScheduleCondition) -> bool {
        self.get(condition).is_some_and(|c| c.passed)
    }

    fn push(&mut self, condition: ScheduleCondition, required: bool, margin: f64) {
        self.checks.push(ConditionCheck {
            condition,
            passed: margin >= 0.0,
            required,
            worst_margin: margin,
            first_violation: None,
        });
    }
}

/// Conditions on the continuous schedule: `b ∈ (0,1/4]`, `c ≥ 1` and
/// `sup |ȧ|/a³ ≤ 1/4`; also reports the stronger `c^{1−2b}d² ≥ 6b`
/// premise as an informational check.
pub fn validate_continuous(schedule: &PowerSchedule) -> ValidationReport {
    let mut report = ValidationReport::default();
    let b = schedule.b();
    let range_margin = if b <= 0.25 { 0.25 - b } else { -(b - 0.25) };
    report.push(ScheduleCondition::ExponentRange, true, range_margin);
    report.push(
        ScheduleCondition::OffsetAtLeastOne,
        true,
        schedule.c() - 1.0,
    );
    report.push(
        ScheduleCondition::DecayRate,
        true,
        0.25 - schedule.decay_ratio_sup(),
    );
    let premise = schedule.c().powf(schedule.theta()) * schedule.d().powi(2) - 6.0 * b;
    report.push(ScheduleCondition::SixBPremise, false, premise);
    report
}

/// Step-size selection mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepMode {
    /// Always `α`; an error if `α` leaves the admissible band.
    Constant(f64),
    /// `min(α, 2/(a_n² + (M1 + a_n)²))`.
    Capped(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizePolicy {
    pub alpha_floor: f64,
    pub mode: StepMode,
}

impl Default for StepSizePolicy {
    fn default() -> Self {
        Self {
            alpha_floor: 1e-8,
            mode: StepMode::Capped(1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSize {
    pub alpha: f64,
    pub clipped: bool,
    pub band_upper: f64,
}

/// Upper end of the admissible step band, `2/(a² + (M1 + a)²)`.
pub fn step_band_upper(a: f64, m1: f64) -> f64 {
    2.0 / (a * a + (m1 + a) * (m1 + a))
}

impl StepSizePolicy {
    pub fn capped(alpha: f64) -> Self {
        Self {
            mode: StepMode::Capped(alpha),
            ..Self::default()
        }
    }

    pub fn constant(alpha: f64) -> Self {
        Self {
            mode: StepMode::Constant(alpha),
            ..Self::default()
        }
    }

    pub fn with_floor(mut self, alpha_floor: f64) -> Self {
        self.alpha_floor = alpha_floor;
        self
    }

    /// `α_n` for regularization `a_n`, guaranteed inside `[α̃, 2/(a_n² + (M1+a_n)²)]`.
    pub fn step(&self, a_n: f64, m1: f64) -> Result<StepSize> {
        let upper = step_band_upper(a_n, m1);
        let (alpha, clipped) = match self.mode {
            StepMode::Constant(alpha) => {
                if alpha > upper {
                    return Err(Error::param(format!(
                        "constant step {alpha} exceeds the admissible bound {upper:.6} at a = {a_n:e}"
                    )));
                }
                (alpha, false)
            }
            StepMode::Capped(alpha) => {
                if alpha > upper {
                    (upper, true)
                } else {
                    (alpha, false)
                }
            }
        };
        if !(alpha > 0.0) || alpha < self.alpha_floor {
            return Err(Error::param(format!(
                "step {alpha:e} below the floor {:e} at a = {a_n:e}",
                self.alpha_floor
            )));
        }
        Ok(StepSize {
            alpha,
            clipped,
            band_upper: upper,
        })
    }
}

impl FromStr for StepSizePolicy {
    type Err = Error;
    /// `capped`, `capped:<alpha>` or `constant:<alpha>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, value) = match s.split_once(':') {
            Some((k, v)) => (k, Some(v)),
            None => (s, None),
        };
        let alpha = match value {
            Some(v) => v
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad step size in '{s}'")))?,
            None => 1.0,
        };
        if !(alpha > 0.0) {
            return Err(Error::Config(format!(
                "step size must be positive in '{s}'"
            )));
        }
        match kind {
            "capped" => Ok(Self::capped(alpha)),
            "constant" => Ok(Self::constant(alpha)),
            _ => Err(Error::Config(format!(
                "unknown step policy '{s}' (expected capped[:a] or constant:a)"
            ))),
        }
    }
}

impl fmt::Display for StepSizePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mode {
            StepMode::Capped(a) => write!(f, "capped:{a}"),
            StepMode::Constant(a) => write!(f, "constant:{a}"),
        }
    }
}

/// `λ` and the discrepancy constant `C = (C1 + 1)/2` of the discrete theory.
/// `a_0` is taken from the schedule itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleParams {
    pub lambda: f64,
    pub discrepancy_c: f64,
}

impl ScheduleParams {
    pub fn new(lambda: f64, discrepancy_c: f64) -> Result<Self> {
        if !(lambda > 0.0) || !(discrepancy_c > 1.0) {
            return Err(Error::param(format!(
                "need lambda > 0 and C > 1 (got {lambda}, {discrepancy_c})"
            )));
        }
        Ok(Self {
            lambda,
            discrepancy_c,
        })
    }

    /// `C = (C1 + 1)/2` from the stopping constant `C1`.
    pub fn from_stopping_constant(lambda: f64, c1: f64) -> Result<Self> {
        Self::new(lambda, 0.5 * (c1 + 1.0))
    }
}

/// Inputs of the discrete validators that are not part of the schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteContext {
    pub bounds: OperatorBounds,
    /// `‖f_δ − F(0)‖`.
    pub data_offset: f64,
    /// Estimate of `‖y‖`.
    pub y_norm: f64,
    /// Step floor `α̃`.
    pub alpha_floor: f64,
    /// Last index swept for the step-ratio and recursion conditions.
    pub n_check: usize,
}

pub const DEFAULT_N_CHECK: usize = 10_000;

/// The five conditions on `(a_n, λ)` the discrete convergence result needs.
pub fn validate_discrete(
    schedule: &PowerSchedule,
    params: &ScheduleParams,
    ctx: &DiscreteContext,
) -> Result<ValidationReport> {
    if !(ctx.data_offset >= 0.0 && ctx.y_norm > 0.0 && ctx.alpha_floor > 0.0) {
        return Err(Error::param(
            "discrete validation needs ||f_delta - F(0)|| >= 0, ||y|| > 0 and alpha floor > 0",
        ));
    }
    let lambda = params.lambda;
    let m1 = ctx.bounds.m1;
    let c0 = ctx.bounds.c0();
    let c1 = ctx.bounds.drift_c1(ctx.y_norm, params.discrepancy_c)?;
    let a0 = schedule.at_step(0);
    let mut report = ValidationReport::default();

    let mut ratio_check = ConditionCheck {
        condition: ScheduleCondition::StepRatio,
        passed: true,
        required: true,
        worst_margin: f64::INFINITY,
        first_violation: None,
    };
    let mut recursion_check = ConditionCheck {
        condition: ScheduleCondition::Recursion,
        ..ratio_check.clone()
    };
    for n in 0..=ctx.n_check {
        let an = schedule.at_step(n);
        let an1 = schedule.at_step(n + 1);
        let margin = 2.0 - an / an1;
        note(&mut ratio_check, n, margin);

        // lhs − rhs, regrouped so the a_n² − a_{n+1}² difference does not cancel.
        let drop = schedule.step_drop(n);
        let excess = drop * (an + an1) / lambda + c1 * drop / an1
            - ctx.alpha_floor * an.powi(4) / (2.0 * lambda);
        note(&mut recursion_check, n, -excess);
    }

    report.checks.push(ratio_check);
    report.push(
        ScheduleCondition::InitialData,
        true,
        a0.powi(3) / lambda - ctx.data_offset,
    );
    report.push(
        ScheduleCondition::LambdaLowerBound,
        true,
        ctx.y_norm - m1 / lambda,
    );
    report.push(
        ScheduleCondition::QuadraticTerm,
        true,
        0.5 - c0 * (m1 + a0) / lambda,
    );
    report.checks.push(recursion_check);
    Ok(report)
}

fn note(check: &mut ConditionCheck, n: usize, margin: f64) {
    if margin < check.worst_margin {
        check.worst_margin = margin;
    }
    if margin < 0.0 && check.passed {
        check.passed = false;
        check.first_violation = Some(n);
    }
}

/// Stand-in for the unknown `‖y‖`: `‖f_δ‖ / a_0`.
///
/// Callers that use it should log it as an assumption; the validators take
/// whatever estimate they are given.
pub fn default_y_norm_estimate(f_delta_norm: f64, a0: f64) -> Result<f64> {
    if !(a0 > 0.0) || !(f_delta_norm > 0.0) {
        return Err(Error::param(format!(
            "need ||f_delta|| > 0 and a0 > 0 (got {f_delta_norm}, {a0})"
        )));
    }
    Ok(f_delta_norm / a0)
}

/// `λ = M1(1/‖y‖ + 4c0)`, `a_0 = (λ(‖f − F(0)‖ + ‖f‖))^{1/3}`, `a_n = a_0/(1+n)^{1/4}`.
pub fn baseline_construction(
    bounds: &OperatorBounds,
    y_norm: f64,
    f_minus_f0_norm: f64,
    f_norm: f64,
    discrepancy_c: f64,
) -> Result<(PowerSchedule, ScheduleParams)> {
    if !(y_norm > 0.0) {
        return Err(Error::param("||y|| must be positive"));
    }
    let lambda = bounds.m1 * (1.0 / y_norm + 4.0 * bounds.c0());
    let a0 = (lambda * (f_minus_f0_norm + f_norm)).cbrt();
    Ok((
        PowerSchedule::from_initial(a0, 0.25)?,
        ScheduleParams::new(lambda, discrepancy_c)?,
    ))
}

#[derive(Debug, Clone)]
pub struct KappaScaled {
    pub kappa: f64,
    pub schedule: PowerSchedule,
    pub params: ScheduleParams,
    pub report: ValidationReport,
}

/// Rescales `a_n → κ a_n`, `λ → κ²λ` so that all five discrete conditions hold.
///
/// If the schedule already passes, `κ = 1`. Otherwise `κ` is the smallest
/// value with `κ ≥ 4c0a0/λ`, `κ² ≥ 4/(α̃ a0² · 2√2)` and `κ² ≥ λc1/(α̃ a0⁴)`.
pub fn kappa_scale(
    schedule: &PowerSchedule,
    params: &ScheduleParams,
    ctx: &DiscreteContext,
) -> Result<KappaScaled> {
    let base = validate_discrete(schedule, params, ctx)?;
    if base.is_valid() {
        return Ok(KappaScaled {
            kappa: 1.0,
            schedule: *schedule,
            params: *params,
            report: base,
        });
    }
    for cond in [
        ScheduleCondition::StepRatio,
        ScheduleCondition::InitialData,
        ScheduleCondition::LambdaLowerBound,
    ] {
        if !base.passed(cond) {
            return Err(Error::Precondition(format!(
                "kappa scaling needs '{cond}' on the base schedule"
            )));
        }
    }
    let a0 = schedule.at_step(0);
    let lambda = params.lambda;
    let alpha = ctx.alpha_floor;
    let c0 = ctx.bounds.c0();
    let c1 = ctx.bounds.drift_c1(ctx.y_norm, params.discrepancy_c)?;
    // The grouping α̃·a0²·2·√2 follows the bound it is derived from.
    let kappa = [
        1.0,
        4.0 * c0 * a0 / lambda,
        (4.0 / (alpha * a0 * a0 * 2.0 * SQRT_2)).sqrt(),
        (lambda * c1 / (alpha * a0.powi(4))).sqrt(),
    ]
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max);

    let scaled = schedule.scaled(kappa)?;
    let scaled_params = ScheduleParams::new(kappa * kappa * lambda, params.discrepancy_c)?;
    let report = validate_discrete(&scaled, &scaled_params, ctx)?;
    if !report.is_valid() {
        let names: Vec<String> = report.violations().iter().map(|c| c.to_string()).collect();
        return Err(Error::InternalConsistency(format!(
            "kappa = {kappa} scaled schedule still violates: {}",
            names.join("; ")
        )));
    }
    Ok(KappaScaled {
        kappa,
        schedule: scaled,
        params: scaled_params,
        report,
    })
}

/// `a_0 = C0 δ^ζ`.
pub fn heuristic_a0(delta: f64, zeta: f64, c0: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::param(format!(
            "noise level must be positive, got {delta}"
        )));
    }
    if !(zeta > 0.0 && zeta <= 1.0) {
        return Err(Error::param(format!("zeta must lie in (0, 1], got {zeta}")));
    }
    if !(c0 > 0.0) {
        return Err(Error::param(format!("C0 must be positive, got {c0}")));
    }
    Ok(c0 * delta.powf(zeta))
}

/// Piecewise-linear profile `s ↦ ψ(s)` from samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiProfile {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl PsiProfile {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::param("a psi profile needs at least two samples"));
        }
        if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::param("psi sample times must be strictly increasing"));
        }
        let (times, values) = samples.into_iter().unzip();
        Ok(Self { times, values })
    }

    /// Constant profile `ψ ≡ 1` on `[0, t_max]`.
    pub fn unit(t_max: f64) -> Self {
        Self {
            times: vec![0.0, t_max.max(f64::MIN_POSITIVE)],
            values: vec![1.0, 1.0],
        }
    }

    pub fn span(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().unwrap())
    }

    pub fn eval(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            return self.values[0];
        }
        if k >= self.times.len() {
            return *self.values.last().unwrap();
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let (v0, v1) = (self.values[k - 1], self.values[k]);
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    fn knots_in(&self, lo: f64, hi: f64) -> impl Iterator<Item = f64> + '_ {
        self.times
            .iter()
            .copied()
            .filter(move |&s| s > lo && s < hi)
    }
}

/// Both sides of an integral inequality at one time, scaled by `e^{−φ(t)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralRow {
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
}

impl IntegralRow {
    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegralLemmaReport {
    /// `(d²/2)(1 − 2b/(c^θ d²)) ∫₀ᵗ e^{φ(s)}/(s+c)^{3b} ds < e^{φ(t)}/(c+t)^b`.
    pub growth: Vec<IntegralRow>,
    /// `e^{−φ(t)} ∫₀ᵗ e^{φ(s)} |ȧ(s)| ψ(s) ds ≤ a(t)ψ(t)/2`.
    pub drift: Vec<IntegralRow>,
    /// Whether the drift rows used sampled `ψ` (true) or `ψ ≡ 1`.
    pub sampled_psi: bool,
}

impl IntegralLemmaReport {
    pub fn growth_holds(&self) -> bool {
        self.growth.iter().all(|r| r.margin() > 0.0)
    }

    pub fn drift_holds(&self) -> bool {
        self.drift.iter().all(|r| r.margin() >= 0.0)
    }

    pub fn holds(&self) -> bool {
        self.growth_holds() && self.drift_holds()
    }
}

/// Evaluates both integral inequalities at every `t` by adaptive quadrature.
pub fn verify_integral_lemmas(
    schedule: &PowerSchedule,
    t_grid: &[f64],
    psi: Option<&PsiProfile>,
) -> Result<IntegralLemmaReport> {
    let report = validate_continuous(schedule);
    for cond in [
        ScheduleCondition::ExponentRange,
        ScheduleCondition::SixBPremise,
    ] {
        if !report.passed(cond) {
            return Err(Error::Precondition(format!("schedule violates '{cond}'")));
        }
    }
    if t_grid.iter().any(|&t| !(t >= 0.0)) {
        return Err(Error::param("integration times must be nonnegative"));
    }
    let t_max = t_grid.iter().copied().fold(0.0, f64::max);
    let unit = PsiProfile::unit(t_max);
    let profile = match psi {
        Some(p) => {
            let (lo, hi) = p.span();
            if lo > 0.0 || hi < t_max {
                return Err(Error::param(format!(
                    "psi samples cover [{lo}, {hi}] but times reach {t_max}"
                )));
            }
            p
        }
        None => &unit,
    };

    let (d, c, b) = (schedule.d(), schedule.c(), schedule.b());
    let factor = 0.5 * d * d * (1.0 - 2.0 * b / (c.powf(schedule.theta()) * d * d));
    let mut growth = Vec::with_capacity(t_grid.len());
    let mut drift = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let phi_t = schedule.phi(t);
        let tol = 1e-13;
        let g = |s: f64| (schedule.phi(s) - phi_t).exp() / (s + c).powf(3.0 * b);
        let integral = adaptive_simpson(&g, 0.0, t, tol);
        growth.push(IntegralRow {
            t,
            lhs: factor * integral,
            rhs: 1.0 / (c + t).powf(b),
        });

        let h = |s: f64| (schedule.phi(s) - phi_t).exp() * schedule.rate(s).abs() * profile.eval(s);
        // Split at the sample knots so each piece is smooth.
        let mut cuts = vec![0.0];
        cuts.extend(profile.knots_in(0.0, t));
        cuts.push(t);
        let integral: f64 = cuts
            .windows(2)
            .map(|w| adaptive_simpson(&h, w[0], w[1], tol))
            .sum();
        drift.push(IntegralRow {
            t,
            lhs: integral,
            rhs: 0.5 * schedule.at(t) * profile.eval(t),
        });
    }
    let out = IntegralLemmaReport {
        growth,
        drift,
        sampled_psi: psi.is_some(),
    };
    if !out.holds() {
        warn!("integral inequality violated for schedule {schedule:?}");
    }
    Ok(out)
}

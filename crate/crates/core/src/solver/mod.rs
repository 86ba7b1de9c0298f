//! Solution processes for `F(u) = f_δ`: the gradient iteration, its
//! continuous flow, and the regularized Newton baseline, all stopped by the
//! discrepancy principle `‖F(u) − f_δ‖ ≤ C1 δ^ζ`.

mod diagnostics;
mod dsmg;
mod dsmn;
mod flow;

use std::fmt;

use crate::error::{Error, Result};
use crate::hilbert::GridFunction;

pub use diagnostics::{
    check_initial_condition, gap_diagnostic, GapDiagnostic, GapRow, InitialCondition,
};
pub use dsmg::dsmg_iterate;
pub use dsmn::dsmn_iterate;
pub use flow::{dsmg_flow, FlowOptions};

/// Discrepancy stopping rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub c1: f64,
    pub zeta: f64,
    pub delta: f64,
    pub max_iterations: usize,
}

pub const DEFAULT_C1: f64 = 1.01;
pub const DEFAULT_ZETA: f64 = 0.99;
pub const DEFAULT_MAX_ITERATIONS: usize = 100_000;

impl StopRule {
    /// Needs `C1 > 1`, `ζ ∈ (0, 1]` and `δ > 0`; with `δ = 0` the threshold
    /// degenerates and only an iteration cap could stop the run.
    pub fn new(c1: f64, zeta: f64, delta: f64, max_iterations: usize) -> Result<Self> {
        if !(c1 > 1.0 && c1.is_finite()) {
            return Err(Error::param(format!("C1 must exceed 1, got {c1}")));
        }
        if !(zeta > 0.0 && zeta <= 1.0) {
            return Err(Error::param(format!("zeta must lie in (0, 1], got {zeta}")));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::param(format!(
                "noise level must be positive for discrepancy stopping, got {delta}"
            )));
        }
        Ok(Self {
            c1,
            zeta,
            delta,
            max_iterations,
        })
    }

    pub fn with_defaults(delta: f64) -> Result<Self> {
        Self::new(DEFAULT_C1, DEFAULT_ZETA, delta, DEFAULT_MAX_ITERATIONS)
    }

    /// `C1 δ^ζ`.
    pub fn threshold(&self) -> f64 {
        self.c1 * self.delta.powf(self.zeta)
    }

    pub fn is_met(&self, residual: f64) -> bool {
        residual <= self.threshold()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Discrepancy,
    MaxIterations,
    MaxTime,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Discrepancy => "discrepancy",
            Self::MaxIterations => "max_iterations",
            Self::MaxTime => "max_time",
        })
    }
}

/// Outcome of one solve.
///
/// For the iterations, index `n` of the histories is iterate `u_n`. For the
/// flow, index `k` is the state after `k` time steps (the last entry is the
/// refined stopping point).
#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Downsampled `(n, u_n)` pairs; always contains the first and last iterate.
    pub iterates_kept: Vec<(usize, GridFunction)>,
    /// `‖F(u_n) − f_δ‖`.
    pub residual_history: Vec<f64>,
    /// `a_n` (or `a(t_k)` for the flow).
    pub a_history: Vec<f64>,
    /// Step sizes actually used (empty for methods without one).
    pub alpha_history: Vec<f64>,
    /// Stopping index.
    pub n_delta: usize,
    /// Stopping time of the flow.
    pub t_delta: Option<f64>,
    pub final_iterate: GridFunction,
    pub stopped_by: StopReason,
    /// `‖u − y‖` at the stopping point, when the exact solution is known.
    pub error_vs_y: Option<f64>,
    /// Number of steps whose size was clipped to the admissible band.
    pub clipped_steps: usize,
    pub threshold: f64,
}

impl SolveReport {
    pub fn residual_at_stop(&self) -> f64 {
        self.residual_history[self.n_delta]
    }

    /// Whether the histories obey the stopping contract: strictly above the
    /// threshold before `n_δ`, at or below it at `n_δ` when stopped by the
    /// discrepancy principle.
    pub fn satisfies_stopping_contract(&self) -> bool {
        let before = self.residual_history[..self.n_delta]
            .iter()
            .all(|&r| r > self.threshold);
        match self.stopped_by {
            StopReason::Discrepancy => before && self.residual_at_stop() <= self.threshold,
            _ => before,
        }
    }
}

/// Keeps at most about a hundred iterates by doubling the stride whenever
/// the buffer fills up.
#[derive(Debug)]
pub(crate) struct Thinner {
    stride: usize,
    kept: Vec<(usize, GridFunction)>,
    capacity: usize,
}

impl Thinner {
    pub(crate) fn new() -> Self {
        Self {
            stride: 1,
            kept: Vec::new(),
            capacity: 100,
        }
    }

    pub(crate) fn offer(&mut self, n: usize, u: &GridFunction) {
        if !n.is_multiple_of(self.stride) {
            return;
        }
        self.kept.push((n, u.clone()));
        if self.kept.len() > self.capacity {
            self.stride *= 2;
            let stride = self.stride;
            self.kept.retain(|(k, _)| k % stride == 0);
        }
    }

    pub(crate) fn finish(mut self, n: usize, u: &GridFunction) -> Vec<(usize, GridFunction)> {
        if self.kept.last().map(|(k, _)| *k) != Some(n) {
            self.kept.push((n, u.clone()));
        }
        self.kept
    }
}

/// Logs a warning if the residual history increases after the first few steps.
pub(crate) fn warn_if_not_monotone(history: &[f64], method: &str) {
    let grace = 3;
    if let Some(k) = history
        .windows(2)
        .enumerate()
        .skip(grace)
        .find(|(_, w)| w[1] > w[0] * (1.0 + 1e-12))
        .map(|(k, _)| k + 1)
    {
        log::warn!("{method}: residual increased at step {k}");
    }
}

pub(crate) fn divergence(step: usize, reason: impl Into<String>, history: &[f64]) -> Error {
    Error::Divergence {
        step,
        reason: reason.into(),
        residual_history: history.to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::Grid;

    #[test]
    fn stop_rule_threshold_and_validation() {
        let s = StopRule::new(1.01, 1.0, 0.1, 10).unwrap();
        assert!((s.threshold() - 0.101).abs() < 1e-15);
        assert!(s.is_met(0.101) && !s.is_met(0.1011));
        assert!(StopRule::new(1.01, 0.99, 0.0, 10).is_err());
        assert!(StopRule::new(1.0, 0.99, 0.1, 10).is_err());
        assert!(StopRule::new(1.01, 1.2, 0.1, 10).is_err());
    }

    #[test]
    fn thinner_bounds_memory_and_keeps_ends() {
        let g = Grid::uniform(3).unwrap();
        let u = GridFunction::zeros(g);
        let mut t = Thinner::new();
        for n in 0..=1000 {
            t.offer(n, &u);
        }
        let kept = t.finish(1000, &u);
        assert!(kept.len() <= 101 && kept.len() >= 50, "{}", kept.len());
        assert_eq!(kept[0].0, 0);
        assert_eq!(kept.last().unwrap().0, 1000);
        assert!(kept.windows(2).all(|w| w[0].0 < w[1].0));
    }
}

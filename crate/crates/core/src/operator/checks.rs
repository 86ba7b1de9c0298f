//! Randomized probes of the structural properties solvers rely on:
//! monotonicity, derivative consistency and the adjoint identity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Operator;
use crate::error::Result;
use crate::hilbert::{inner_product, norm, GridFunction};

/// Worst value observed by a probe over its samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSummary {
    pub samples: usize,
    /// Minimum (monotonicity) or maximum (error probes) over the samples.
    pub worst: f64,
}

fn random_fn(op: &dyn Operator, rng: &mut ChaCha8Rng, amp: f64) -> GridFunction {
    let grid = op.grid().clone();
    GridFunction::from_fn(grid, |_| rng.random_range(-amp..=amp))
}

fn random_in_unit_ball(op: &dyn Operator, rng: &mut ChaCha8Rng) -> GridFunction {
    let v = random_fn(op, rng, 1.0);
    let n = norm(&v);
    if n > 1.0 {
        &v * (1.0 / n)
    } else {
        v
    }
}

/// Minimum of `⟨F(u) − F(v), u − v⟩` over random pairs with entries in
/// `[−amplitude, amplitude]`.
pub fn monotonicity_sweep(
    op: &dyn Operator,
    pairs: usize,
    amplitude: f64,
    seed: u64,
) -> Result<ProbeSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..pairs {
        let u = random_fn(op, &mut rng, amplitude);
        let v = random_fn(op, &mut rng, amplitude);
        let q = inner_product(&(&op.apply(&u)? - &op.apply(&v)?), &(&u - &v))?;
        worst = worst.min(q);
    }
    Ok(ProbeSummary {
        samples: pairs,
        worst,
    })
}

/// Maximum relative error between `F'(u)h` and the central difference
/// `[F(u+εh) − F(u−εh)]/(2ε)`, for random `‖u‖, ‖h‖ ≤ 1`.
pub fn derivative_check(
    op: &dyn Operator,
    samples: usize,
    eps: f64,
    seed: u64,
) -> Result<ProbeSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let u = random_in_unit_ball(op, &mut rng);
        let h = random_in_unit_ball(op, &mut rng);
        let plus = op.apply(&u.axpy(eps, &h)?)?;
        let minus = op.apply(&u.axpy(-eps, &h)?)?;
        let fd = &(&plus - &minus) * (0.5 / eps);
        let analytic = op.derivative_apply(&u, &h)?;
        let scale = norm(&analytic).max(f64::MIN_POSITIVE);
        worst = worst.max(norm(&(&fd - &analytic)) / scale);
    }
    Ok(ProbeSummary { samples, worst })
}

/// Maximum of `|⟨F'(u)h, g⟩ − ⟨h, F'(u)*g⟩| / (‖F'(u)h‖‖g‖)` over random triples.
pub fn adjoint_check(op: &dyn Operator, samples: usize, seed: u64) -> Result<ProbeSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let u = random_fn(op, &mut rng, 2.0);
        let h = random_fn(op, &mut rng, 1.0);
        let g = random_fn(op, &mut rng, 1.0);
        let jh = op.derivative_apply(&u, &h)?;
        let jsg = op.adjoint_derivative_apply(&u, &g)?;
        let lhs = inner_product(&jh, &g)?;
        let rhs = inner_product(&h, &jsg)?;
        let scale = (norm(&jh) * norm(&g)).max(f64::MIN_POSITIVE);
        worst = worst.max((lhs - rhs).abs() / scale);
    }
    Ok(ProbeSummary { samples, worst })
}

//! The regularized equation `F(V) + aV = f_δ` and the diagnostics built on
//! its solution `V_δ(a)`:
//!
//! * `φ(a) = ‖F(V_δ) − f_δ‖`, which equals `a‖V_δ‖` and decreases as `a → 0`;
//! * `ψ(a) = ‖V_δ‖`, which increases as `a → 0`;
//! * the crossing `φ(a*) = Cδ` used by the discrepancy principle;
//! * the perturbation estimates `‖V_δ − V‖ ≤ δ/a` and `‖V‖ ≤ ‖y‖`.
//!
//! For monotone `F` the Jacobian `F'(V) + aI` is positive definite in the
//! weighted inner product, so damped Newton with dense LU is robust here.

use log::debug;

use crate::error::{Error, Result};
use crate::hilbert::{distance, norm, GridFunction};
use crate::operator::MonotoneProblem;

/// Newton iteration cap and line-search depth.
#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            max_halvings: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegularizedSolution {
    pub a: f64,
    pub v: GridFunction,
    /// Achieved `‖F(V) + aV − f_δ‖`.
    pub residual_norm: f64,
    pub newton_iterations: usize,
    /// `‖F(V) − f_δ‖`.
    pub phi: f64,
    /// `‖V‖`.
    pub psi: f64,
}

/// Solves `F(V) + aV = f_δ` from the cold start `V = 0`.
pub fn solve_regularized(
    problem: &MonotoneProblem,
    a: f64,
    f_delta: &GridFunction,
    tol: f64,
) -> Result<RegularizedSolution> {
    let start = GridFunction::zeros(problem.grid().clone());
    solve_regularized_from(problem, a, f_delta, tol, &start, &NewtonOptions::default())
}

/// Damped Newton from `initial`, halving the step until `‖G‖` decreases.
pub fn solve_regularized_from(
    problem: &MonotoneProblem,
    a: f64,
    f_delta: &GridFunction,
    tol: f64,
    initial: &GridFunction,
    options: &NewtonOptions,
) -> Result<RegularizedSolution> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::param(format!(
            "regularization parameter must be positive, got {a}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::param(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    initial.check_same_grid(f_delta)?;
    problem.grid().check_len(f_delta.len())?;

    let eval = |v: &GridFunction| -> Result<(GridFunction, GridFunction)> {
        let fv = problem.apply(v)?;
        let g = &(&fv - f_delta) + &(v * a);
        Ok((fv, g))
    };

    let mut v = initial.clone();
    let (mut fv, mut g) = eval(&v)?;
    let mut g_norm = norm(&g);
    let mut iterations = 0;

    while g_norm > tol {
        if iterations == options.max_iterations {
            return Err(Error::SolverFailure {
                a,
                iterations,
                residual: g_norm,
                last: Box::new(v),
            });
        }
        iterations += 1;

        let mut jac = problem.derivative_matrix(&v)?;
        for i in 0..jac.nrows() {
            jac[(i, i)] += a;
        }
        let step = match jac.lu().solve(&(-g.values())) {
            Some(s) if s.iter().all(|x| x.is_finite()) => {
                GridFunction::new(v.grid().clone(), s.as_slice().to_vec())?
            }
            _ => {
                return Err(Error::SolverFailure {
                    a,
                    iterations,
                    residual: g_norm,
                    last: Box::new(v),
                })
            }
        };

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=options.max_halvings {
            let trial = v.axpy(scale, &step)?;
            // A trial point can overflow the cubic term; treat it as no decrease.
            if let Ok((tf, tg)) = eval(&trial) {
                let tn = norm(&tg);
                if tn < g_norm {
                    accepted = Some((trial, tf, tg, tn));
                    break;
                }
            }
            scale *= 0.5;
        }
        match accepted {
            Some((nv, nf, ng, nn)) => {
                v = nv;
                fv = nf;
                g = ng;
                g_norm = nn;
            }
            None => {
                return Err(Error::SolverFailure {
                    a,
                    iterations,
                    residual: g_norm,
                    last: Box::new(v),
                })
            }
        }
    }

    let phi = norm(&(&fv - f_delta));
    let psi = norm(&v);
    debug!("regularized solve a={a:e}: {iterations} Newton steps, residual {g_norm:e}");
    Ok(RegularizedSolution {
        a,
        v,
        residual_norm: g_norm,
        newton_iterations: iterations,
        phi,
        psi,
    })
}

/// One sample of the `φ`/`ψ` curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiPsiPoint {
    pub a: f64,
    pub phi: f64,
    pub psi: f64,
}

/// Solves the regularized equation along a strictly decreasing grid of `a`,
/// warm-starting each solve from the previous solution.
pub fn phi_psi_curve(
    problem: &MonotoneProblem,
    f_delta: &GridFunction,
    a_grid: &[f64],
    tol: f64,
) -> Result<Vec<PhiPsiPoint>> {
    if a_grid.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::param("a-grid entries must be positive"));
    }
    if a_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::param("a-grid must be strictly decreasing"));
    }
    let options = NewtonOptions::default();
    let mut start = GridFunction::zeros(problem.grid().clone());
    let mut out = Vec::with_capacity(a_grid.len());
    for &a in a_grid {
        let sol = solve_regularized_from(problem, a, f_delta, tol, &start, &options)?;
        out.push(PhiPsiPoint {
            a,
            phi: sol.phi,
            psi: sol.psi,
        });
        start = sol.v;
    }
    Ok(out)
}

/// `n` log-spaced values from `hi` down to `lo`.
pub fn log_spaced_decreasing(hi: f64, lo: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![hi];
    }
    let (lh, ll) = (hi.ln(), lo.ln());
    (0..n)
        .map(|k| (lh + (ll - lh) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone)]
pub struct DiscrepancyCrossing {
    pub a: f64,
    pub phi: f64,
    pub target: f64,
    pub bisections: usize,
    pub solution: RegularizedSolution,
}

/// Finds `a*` with `φ(a*) = Cδ` by bisection in `log a`.
pub fn find_discrepancy_crossing(
    problem: &MonotoneProblem,
    f_delta: &GridFunction,
    c: f64,
    delta: f64,
    a_bracket: (f64, f64),
    tol: f64,
) -> Result<DiscrepancyCrossing> {
    if !(c > 1.0) {
        return Err(Error::param(format!(
            "crossing constant must exceed 1, got {c}"
        )));
    }
    if !(delta > 0.0) {
        return Err(Error::param(format!(
            "noise level must be positive, got {delta}"
        )));
    }
    let (mut lo, mut hi) = if a_bracket.0 <= a_bracket.1 {
        a_bracket
    } else {
        (a_bracket.1, a_bracket.0)
    };
    if !(lo > 0.0) {
        return Err(Error::param("bracket endpoints must be positive"));
    }
    let target = c * delta;
    let zero = GridFunction::zeros(problem.grid().clone());
    let initial = norm(&(&problem.apply(&zero)? - f_delta));
    if initial <= target {
        return Err(Error::NoCrossing { initial, target });
    }

    let options = NewtonOptions::default();
    let sol_lo = solve_regularized_from(problem, lo, f_delta, tol, &zero, &options)?;
    let sol_hi = solve_regularized_from(problem, hi, f_delta, tol, &zero, &options)?;
    if !(sol_hi.phi > target && target > sol_lo.phi) {
        return Err(Error::Bracket {
            a_lo: lo,
            a_hi: hi,
            phi_lo: sol_lo.phi,
            phi_hi: sol_hi.phi,
            target,
        });
    }

    let accept = tol.max(1e-8 * target);
    let mut warm = sol_lo.v.clone();
    let mut best = if (sol_lo.phi - target).abs() < (sol_hi.phi - target).abs() {
        sol_lo
    } else {
        sol_hi
    };
    for bisections in 1..=200 {
        let mid = (lo * hi).sqrt();
        let sol = solve_regularized_from(problem, mid, f_delta, tol, &warm, &options)?;
        let gap = sol.phi - target;
        if gap.abs() <= accept || !(mid > lo && mid < hi) {
            return Ok(DiscrepancyCrossing {
                a: mid,
                phi: sol.phi,
                target,
                bisections,
                solution: sol,
            });
        }
        // φ grows with a.
        if gap > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        warm = sol.v.clone();
        if gap.abs() < (best.phi - target).abs() {
            best = sol;
        }
    }
    Ok(DiscrepancyCrossing {
        a: best.a,
        phi: best.phi,
        target,
        bisections: 200,
        solution: best,
    })
}

/// Both sides of `‖V_δ − V‖ ≤ ‖f_δ − f‖/a`, plus `‖V‖` for the `‖V‖ ≤ ‖y‖` check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationBound {
    pub a: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub v_norm: f64,
    pub v_delta_norm: f64,
}

pub fn perturbation_bound_check(
    problem: &MonotoneProblem,
    f: &GridFunction,
    f_delta: &GridFunction,
    a: f64,
    tol: f64,
) -> Result<PerturbationBound> {
    let exact = solve_regularized(problem, a, f, tol)?;
    let noisy = solve_regularized_from(
        problem,
        a,
        f_delta,
        tol,
        &exact.v,
        &NewtonOptions::default(),
    )?;
    Ok(PerturbationBound {
        a,
        lhs: distance(&noisy.v, &exact.v)?,
        rhs: distance(f_delta, f)? / a,
        v_norm: exact.psi,
        v_delta_norm: noisy.psi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{wiener_problem, Target};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noisy(problem: &MonotoneProblem, delta_rel: f64, seed: u64) -> (GridFunction, f64) {
        let f = problem.rhs().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = GridFunction::from_fn(f.grid().clone(), |_| StandardNormal.sample(&mut rng));
        let delta = delta_rel * norm(f);
        (f.axpy(delta / norm(&e), &e).unwrap(), delta)
    }

    #[test]
    fn small_a_recovers_exact_solution() {
        let p = wiener_problem(100, Target::One).unwrap();
        let sol = solve_regularized(&p, 1e-6, p.rhs().unwrap(), 1e-10).unwrap();
        let y = p.exact_solution().unwrap();
        assert!(distance(&sol.v, y).unwrap() <= 1e-3);
        assert!(sol.residual_norm <= 1e-10);
    }

    #[test]
    fn large_a_gives_small_solution() {
        let p = wiener_problem(100, Target::One).unwrap();
        let (fd, _) = noisy(&p, 0.05, 2);
        let a = 1e6;
        let sol = solve_regularized(&p, a, &fd, 1e-12).unwrap();
        let f0 = norm(&(&p.apply(&GridFunction::zeros(p.grid().clone())).unwrap() - &fd));
        assert!(sol.psi <= f0 / a * (1.0 + 1e-12));
    }

    #[test]
    fn constructed_solution_is_recovered() {
        let p = wiener_problem(60, Target::One).unwrap();
        let w = GridFunction::from_fn(p.grid().clone(), |x| (3.0 * x).cos() - 0.5);
        let a = 0.3;
        let fd = p.apply(&w).unwrap().axpy(a, &w).unwrap();
        let sol = solve_regularized(&p, a, &fd, 1e-11).unwrap();
        assert!(distance(&sol.v, &w).unwrap() <= 1e-9);
    }

    #[test]
    fn phi_equals_a_psi() {
        let p = wiener_problem(100, Target::SinPi).unwrap();
        let (fd, _) = noisy(&p, 0.01, 4);
        let tol = 1e-10;
        for a in [5.0, 0.3, 1e-2, 1e-3] {
            let s = solve_regularized(&p, a, &fd, tol).unwrap();
            assert!((s.phi - a * s.psi).abs() <= 10.0 * tol, "a = {a}");
        }
    }

    #[test]
    fn newton_iteration_count_is_small() {
        let p = wiener_problem(100, Target::One).unwrap();
        let (fd, _) = noisy(&p, 0.01, 8);
        for a in log_spaced_decreasing(1e2, 1e-3, 11) {
            let s = solve_regularized(&p, a, &fd, 1e-10).unwrap();
            assert!(
                s.newton_iterations <= 30,
                "a = {a}: {}",
                s.newton_iterations
            );
        }
    }

    #[test]
    fn invalid_parameters() {
        let p = wiener_problem(20, Target::One).unwrap();
        let f = p.rhs().unwrap();
        assert!(matches!(
            solve_regularized(&p, 0.0, f, 1e-10),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            solve_regularized(&p, -1.0, f, 1e-10),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            solve_regularized(&p, 1.0, f, 0.0),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn iteration_cap_reports_solver_failure() {
        let p = wiener_problem(30, Target::One).unwrap();
        let opts = NewtonOptions {
            max_iterations: 1,
            max_halvings: 50,
        };
        let zero = GridFunction::zeros(p.grid().clone());
        let err =
            solve_regularized_from(&p, 1e-3, p.rhs().unwrap(), 1e-14, &zero, &opts).unwrap_err();
        match err {
            Error::SolverFailure {
                iterations, last, ..
            } => {
                assert_eq!(iterations, 1);
                assert_eq!(last.len(), 30);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn phi_psi_monotone_along_grid() {
        let p = wiener_problem(100, Target::One).unwrap();
        let (fd, _) = noisy(&p, 0.01, 1);
        let tol = 1e-10;
        let curve = phi_psi_curve(&p, &fd, &log_spaced_decreasing(10.0, 1e-3, 25), tol).unwrap();
        for w in curve.windows(2) {
            assert!(w[1].phi < w[0].phi + 10.0 * tol);
            assert!(w[1].psi > w[0].psi - 10.0 * tol);
            assert!(w[1].phi < w[0].phi && w[1].psi > w[0].psi);
        }
        // Large-a end approaches ‖F(0) − f_δ‖ = ‖f_δ‖.
        let f0 = norm(&fd);
        let m1 = p.bounds().m1;
        assert!((curve[0].phi - f0).abs() <= f0 * m1 / 10.0);
    }

    #[test]
    fn phi_psi_degenerate_data() {
        let p = wiener_problem(40, Target::One).unwrap();
        let f0 = p.apply(&GridFunction::zeros(p.grid().clone())).unwrap();
        let curve = phi_psi_curve(&p, &f0, &[1.0, 0.1, 0.01], 1e-12).unwrap();
        for pt in curve {
            assert_eq!(pt.phi, 0.0);
            assert_eq!(pt.psi, 0.0);
        }
    }

    #[test]
    fn phi_psi_rejects_bad_grids() {
        let p = wiener_problem(20, Target::One).unwrap();
        let f = p.rhs().unwrap();
        assert!(phi_psi_curve(&p, f, &[1.0, 1.0], 1e-10).is_err());
        assert!(phi_psi_curve(&p, f, &[1.0, -1.0], 1e-10).is_err());
    }

    #[test]
    fn crossing_found_and_bracketed() {
        let p = wiener_problem(100, Target::One).unwrap();
        let (fd, delta) = noisy(&p, 0.01, 3);
        let c = 1.01;
        let tol = 1e-12;
        let cross = find_discrepancy_crossing(&p, &fd, c, delta, (1e-8, 10.0), tol).unwrap();
        assert!((cross.phi - c * delta).abs() <= tol.max(1e-8 * c * delta));
        let above = solve_regularized(&p, 2.0 * cross.a, &fd, tol).unwrap();
        let below = solve_regularized(&p, 0.5 * cross.a, &fd, tol).unwrap();
        assert!(above.phi > c * delta && c * delta > below.phi);
        let y_norm = norm(p.exact_solution().unwrap());
        assert!(delta <= cross.a * y_norm / (c - 1.0));
    }

    #[test]
    fn crossing_errors() {
        let p = wiener_problem(50, Target::One).unwrap();
        let (fd, delta) = noisy(&p, 0.01, 3);
        let big = norm(&fd) / 1.01 * 1.5;
        assert!(matches!(
            find_discrepancy_crossing(&p, &fd, 1.01, big, (1e-6, 10.0), 1e-12),
            Err(Error::NoCrossing { .. })
        ));
        assert!(matches!(
            find_discrepancy_crossing(&p, &fd, 1.01, delta, (1.0, 10.0), 1e-12),
            Err(Error::Bracket { .. })
        ));
        assert!(find_discrepancy_crossing(&p, &fd, 1.0, delta, (1e-6, 10.0), 1e-12).is_err());
    }

    #[test]
    fn perturbation_bounds_hold() {
        let p = wiener_problem(100, Target::One).unwrap();
        let f = p.rhs().unwrap();
        let (fd, _) = noisy(&p, 0.01, 6);
        let y_norm = norm(p.exact_solution().unwrap());
        for a in [1e-1, 1e-2, 1e-3] {
            let b = perturbation_bound_check(&p, f, &fd, a, 1e-12).unwrap();
            assert!(b.lhs <= b.rhs + 1e-8, "a = {a}: {b:?}");
            assert!(b.v_norm <= y_norm + 1e-8, "a = {a}: {b:?}");
            assert!(b.v_delta_norm <= y_norm + b.rhs + 1e-8);
        }
        let same = perturbation_bound_check(&p, f, f, 1e-2, 1e-12).unwrap();
        assert!(same.lhs <= 1e-12);
    }
}

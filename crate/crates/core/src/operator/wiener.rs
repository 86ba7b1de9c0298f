//! Wiener-type filtering model
//! `F(u)(x) = ∫₀¹ e^{−|x−y|} u(y) dy + u(x)³/6`.
//!
//! The integral is discretized with the trapezoidal rule, so the linear part
//! is the dense matrix `K[i][j] = w_j e^{−|x_i − x_j|}`. `K` is not symmetric
//! as a matrix, but it is self-adjoint in the weighted inner product.

use std::f64::consts::{E, PI};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{MonotoneProblem, Operator, OperatorBounds};
use crate::error::{Error, Result};
use crate::hilbert::{Grid, GridFunction};

/// Sup-norm radius of the default working ball around `u_0 = 0`.
pub const DEFAULT_BALL_RADIUS: f64 = 2.0;

/// Refinement factor used to synthesize data for the sine targets.
const DATA_REFINEMENT: usize = 4;

#[derive(Clone)]
pub struct WienerFilter {
    grid: Arc<Grid>,
    kernel: DMatrix<f64>,
    cubic: f64,
}

impl fmt::Debug for WienerFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WienerFilter")
            .field("n_points", &self.grid.n_points())
            .field("cubic", &self.cubic)
            .finish()
    }
}

impl WienerFilter {
    /// The model problem with nonlinearity `u³/6`.
    pub fn new(grid: Arc<Grid>) -> Self {
        Self::with_cubic_coefficient(grid, 1.0 / 6.0)
    }

    /// Same kernel, nonlinearity `coefficient · u³`. A negative coefficient
    /// gives a non-monotone operator, which the verification suite uses to
    /// check that its monotonicity probe actually fires.
    pub fn with_cubic_coefficient(grid: Arc<Grid>, coefficient: f64) -> Self {
        let n = grid.n_points();
        let x = grid.nodes();
        let w = grid.weights();
        let kernel = DMatrix::from_fn(n, n, |i, j| w[j] * (-(x[i] - x[j]).abs()).exp());
        Self {
            grid,
            kernel,
            cubic: coefficient,
        }
    }

    pub fn kernel_matrix(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    pub fn cubic_coefficient(&self) -> f64 {
        self.cubic
    }

    fn check(&self, u: &GridFunction) -> Result<()> {
        self.grid.check_len(u.len())
    }

    /// `K h`.
    pub fn kernel_apply(&self, h: &GridFunction) -> Result<GridFunction> {
        self.check(h)?;
        Ok(GridFunction::from_vector(
            self.grid.clone(),
            &self.kernel * h.values(),
        ))
    }

    /// `K* g = W⁻¹ Kᵀ W g`.
    pub fn kernel_adjoint_apply(&self, g: &GridFunction) -> Result<GridFunction> {
        self.check(g)?;
        let w = self.grid.weights();
        let wg = g.values().component_mul(w);
        let out = self.kernel.tr_mul(&wg).component_div(w);
        Ok(GridFunction::from_vector(self.grid.clone(), out))
    }

    /// Operator norm of `K` in the weighted space, by power iteration on `K*K`.
    pub fn kernel_norm(&self) -> f64 {
        let w = self.grid.weights();
        let n = self.grid.n_points();
        let mut v = DVector::from_element(n, 1.0);
        let mut estimate = 0.0;
        for _ in 0..500 {
            let kv = &self.kernel * &v;
            let ksk = self.kernel.tr_mul(&kv.component_mul(w)).component_div(w);
            let nrm = self.grid.norm_of(&ksk);
            if nrm == 0.0 {
                return 0.0;
            }
            let next = nrm.sqrt();
            v = ksk / nrm;
            if (next - estimate).abs() <= 1e-14 * next {
                return next;
            }
            estimate = next;
        }
        estimate
    }

    /// `M1`, `M2` over the sup-norm ball of radius `radius` around a centre
    /// whose sup norm is `center_sup`.
    pub fn bounds(&self, center_sup: f64, radius: f64) -> Result<OperatorBounds> {
        let reach = center_sup.abs() + radius;
        let m1 = self.kernel_norm() + 3.0 * self.cubic.abs() * reach * reach;
        let m2 = 6.0 * self.cubic.abs() * reach;
        OperatorBounds::new(m1, m2, radius)
    }

    fn multiplier(&self, u: &GridFunction) -> DVector<f64> {
        u.values().map(|v| 3.0 * self.cubic * v * v)
    }
}

impl Operator for WienerFilter {
    fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        self.check(u)?;
        let cubic = u.values().map(|v| self.cubic * v * v * v);
        let out = &self.kernel * u.values() + cubic;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("F(u)".into()));
        }
        Ok(GridFunction::from_vector(self.grid.clone(), out))
    }

    fn derivative_apply(&self, u: &GridFunction, h: &GridFunction) -> Result<GridFunction> {
        self.check(u)?;
        self.check(h)?;
        let out = &self.kernel * h.values() + self.multiplier(u).component_mul(h.values());
        Ok(GridFunction::from_vector(self.grid.clone(), out))
    }

    fn adjoint_derivative_apply(&self, u: &GridFunction, h: &GridFunction) -> Result<GridFunction> {
        self.check(u)?;
        let mut out = self.kernel_adjoint_apply(h)?;
        // A real diagonal multiplier is its own adjoint.
        *out.values_mut() += self.multiplier(u).component_mul(h.values());
        Ok(out)
    }

    fn derivative_matrix(&self, u: &GridFunction) -> Result<DMatrix<f64>> {
        self.check(u)?;
        let mut m = self.kernel.clone();
        for (i, d) in self.multiplier(u).iter().enumerate() {
            m[(i, i)] += d;
        }
        Ok(m)
    }

    fn name(&self) -> &str {
        if self.cubic >= 0.0 {
            "wiener"
        } else {
            "wiener-anti-monotone"
        }
    }
}

/// Exact right-hand side for `u ≡ 1`: `13/6 − e^{−x} − e^{x}/e`.
pub fn wiener_rhs_for_one(x: f64) -> f64 {
    13.0 / 6.0 - (-x).exp() - x.exp() / E
}

/// Generating solution for the model experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Target {
    One,
    SinPi,
    Sin2Pi,
}

impl Target {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Target::One => 1.0,
            Target::SinPi => (PI * x).sin(),
            Target::Sin2Pi => (2.0 * PI * x).sin(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Target::One => "one",
            Target::SinPi => "sin-pi",
            Target::Sin2Pi => "sin-2pi",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Target {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "one" => Ok(Target::One),
            "sin-pi" => Ok(Target::SinPi),
            "sin-2pi" => Ok(Target::Sin2Pi),
            other => Err(Error::Config(format!(
                "unknown target '{other}' (expected one, sin-pi, sin-2pi)"
            ))),
        }
    }
}

/// Builds the Wiener model problem on `n_points` nodes.
///
/// For `u ≡ 1` the data are the closed form. For the sine targets `F` is
/// applied on a grid refined by a factor of four and restricted back, which
/// keeps the data close to the continuous `F(y)`.
pub fn wiener_problem(n_points: usize, target: Target) -> Result<MonotoneProblem> {
    let grid = Grid::uniform(n_points)?;
    let op = WienerFilter::new(grid.clone());
    let bounds = op.bounds(0.0, DEFAULT_BALL_RADIUS)?;
    let y = GridFunction::from_fn(grid.clone(), |x| target.eval(x));
    let f = match target {
        Target::One => GridFunction::from_fn(grid.clone(), wiener_rhs_for_one),
        _ => {
            let fine_n = DATA_REFINEMENT * (n_points - 1) + 1;
            let fine_grid = Grid::uniform(fine_n)?;
            let fine = WienerFilter::new(fine_grid.clone());
            let fy = fine.apply(&GridFunction::from_fn(fine_grid, |x| target.eval(x)))?;
            let restricted: Vec<f64> = fy
                .as_slice()
                .iter()
                .step_by(DATA_REFINEMENT)
                .copied()
                .collect();
            GridFunction::new(grid, restricted)?
        }
    };
    MonotoneProblem::new(Arc::new(op), bounds)
        .with_rhs(f)?
        .with_exact_solution(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{inner_product, norm};
    use crate::operator::residual;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_fn(grid: &Arc<Grid>, rng: &mut ChaCha8Rng, amp: f64) -> GridFunction {
        let v = (0..grid.n_points())
            .map(|_| rng.random_range(-amp..amp))
            .collect();
        GridFunction::new(grid.clone(), v).unwrap()
    }

    #[test]
    fn one_solves_the_closed_form_equation() {
        let grid = Grid::uniform(100).unwrap();
        let op = WienerFilter::new(grid.clone());
        let fu = op
            .apply(&GridFunction::constant(grid.clone(), 1.0))
            .unwrap();
        let f = GridFunction::from_fn(grid, wiener_rhs_for_one);
        let err = (fu.values() - f.values()).amax();
        assert!(err <= 1e-3, "max error {err}");
    }

    #[test]
    fn zero_maps_to_zero() {
        let grid = Grid::uniform(50).unwrap();
        let op = WienerFilter::new(grid.clone());
        let out = op.apply(&GridFunction::zeros(grid)).unwrap();
        assert_eq!(out.max_abs(), 0.0);
    }

    #[test]
    fn apply_matches_refined_quadrature() {
        // Independent oracle: direct trapezoid sum at 2000 nodes evaluated at the
        // coarse nodes, no shared matrix.
        let grid = Grid::uniform(200).unwrap();
        let op = WienerFilter::new(grid.clone());
        let u = GridFunction::from_fn(grid.clone(), |x| (PI * x).sin());
        let fu = op.apply(&u).unwrap();
        let m = 2000;
        let h = 1.0 / (m - 1) as f64;
        for (i, &x) in grid.nodes().iter().enumerate() {
            let mut s = 0.0;
            for j in 0..m {
                let y = j as f64 * h;
                let wj = if j == 0 || j == m - 1 { 0.5 * h } else { h };
                s += wj * (-(x - y).abs()).exp() * (PI * y).sin();
            }
            let expected = s + (PI * x).sin().powi(3) / 6.0;
            assert!((fu.values()[i] - expected).abs() <= 5e-4, "node {i}");
        }
    }

    #[test]
    fn derivative_at_zero_is_the_kernel() {
        let grid = Grid::uniform(40).unwrap();
        let op = WienerFilter::new(grid.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_fn(&grid, &mut rng, 1.0);
        let d = op.derivative_apply(&GridFunction::zeros(grid), &h).unwrap();
        let k = op.kernel_apply(&h).unwrap();
        assert!((d.values() - k.values()).amax() < 1e-15);
    }

    #[test]
    fn derivative_matches_central_differences() {
        let grid = Grid::uniform(100).unwrap();
        let op = WienerFilter::new(grid.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let eps = 1e-5;
        for _ in 0..20 {
            let u = random_fn(&grid, &mut rng, 1.0);
            let h = random_fn(&grid, &mut rng, 1.0);
            let plus = op.apply(&u.axpy(eps, &h).unwrap()).unwrap();
            let minus = op.apply(&u.axpy(-eps, &h).unwrap()).unwrap();
            let fd = &(&plus - &minus) * (0.5 / eps);
            let an = op.derivative_apply(&u, &h).unwrap();
            let rel = norm(&(&fd - &an)) / norm(&an);
            assert!(rel <= 1e-6, "relative error {rel}");
        }
    }

    #[test]
    fn adjoint_identity_and_self_adjointness() {
        let grid = Grid::uniform(100).unwrap();
        let op = WienerFilter::new(grid.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let u = random_fn(&grid, &mut rng, 2.0);
            let h = random_fn(&grid, &mut rng, 1.0);
            let g = random_fn(&grid, &mut rng, 1.0);
            let lhs = inner_product(&op.derivative_apply(&u, &h).unwrap(), &g).unwrap();
            let rhs = inner_product(&h, &op.adjoint_derivative_apply(&u, &g).unwrap()).unwrap();
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
            let a = op.adjoint_derivative_apply(&u, &h).unwrap();
            let b = op.derivative_apply(&u, &h).unwrap();
            assert!((a.values() - b.values()).amax() <= 1e-12);
        }
    }

    #[test]
    fn adjoint_of_indicator_at_zero_is_weighted_kernel_column() {
        let grid = Grid::uniform(30).unwrap();
        let op = WienerFilter::new(grid.clone());
        let j = 7;
        let e = GridFunction::indicator(grid.clone(), j).unwrap();
        let out = op
            .adjoint_derivative_apply(&GridFunction::zeros(grid.clone()), &e)
            .unwrap();
        // Column j of W⁻¹KᵀW is w_j K[j][i] / w_i.
        let w = grid.weights();
        let k = op.kernel_matrix();
        for i in 0..grid.n_points() {
            let expected = w[j] * k[(j, i)] / w[i];
            assert!((out.values()[i] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn kernel_is_symmetric_under_weights_and_positive() {
        let grid = Grid::uniform(60).unwrap();
        let op = WienerFilter::new(grid.clone());
        let k = op.kernel_matrix();
        let w = grid.weights();
        for i in 0..60 {
            for j in 0..60 {
                assert!((k[(i, j)] / w[j] - k[(j, i)] / w[i]).abs() < 1e-14);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let h = random_fn(&grid, &mut rng, 3.0);
            let q = inner_product(&op.kernel_apply(&h).unwrap(), &h).unwrap();
            assert!(q >= -1e-12);
        }
    }

    #[test]
    fn residual_examples() {
        let problem = wiener_problem(100, Target::One).unwrap();
        let y = problem.exact_solution().unwrap().clone();
        let fy = problem.apply(&y).unwrap();
        assert!(residual(&problem, &y, &fy).unwrap() <= 1e-12);

        // ‖f‖ from quadrature of (13/6 − e^{−x} − e^{x−1})², computed at high
        // precision offline: 0.903598288531...
        let f = problem.rhs().unwrap();
        let r0 = residual(&problem, &GridFunction::zeros(problem.grid().clone()), f).unwrap();
        assert!((r0 - 0.903_598_288_531_22).abs() <= 2e-2);
        assert!((r0 - 0.903_598_288_531_22).abs() <= 1e-4);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let e = random_fn(problem.grid(), &mut rng, 1.0);
        let e = &e * (1.0 / norm(&e));
        let delta = 0.01;
        let fd = fy.axpy(delta, &e).unwrap();
        assert!((residual(&problem, &y, &fd).unwrap() - delta).abs() <= 1e-12);
    }

    #[test]
    fn exact_identity_error_is_second_order() {
        let err = |n: usize| {
            let grid = Grid::uniform(n).unwrap();
            let op = WienerFilter::new(grid.clone());
            let fu = op
                .apply(&GridFunction::constant(grid.clone(), 1.0))
                .unwrap();
            let f = GridFunction::from_fn(grid, wiener_rhs_for_one);
            (fu.values() - f.values()).amax()
        };
        let ratio = err(100) / err(199);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn bounds_use_kernel_norm_and_ball() {
        let grid = Grid::uniform(100).unwrap();
        let op = WienerFilter::new(grid);
        let kn = op.kernel_norm();
        assert!(kn > 0.7 && kn < 0.8, "‖K‖ = {kn}");
        let b = op.bounds(0.0, 2.0).unwrap();
        assert!((b.m1 - (kn + 2.0)).abs() < 1e-12);
        assert!((b.m2 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_output_is_an_error() {
        let grid = Grid::uniform(5).unwrap();
        let op = WienerFilter::new(grid.clone());
        let u = GridFunction::constant(grid, 1e120);
        assert!(matches!(op.apply(&u), Err(Error::NonFinite(_))));
    }

    #[test]
    fn sine_data_is_close_to_coarse_forward_map() {
        let problem = wiener_problem(100, Target::Sin2Pi).unwrap();
        let y = problem.exact_solution().unwrap();
        let coarse = problem.apply(y).unwrap();
        let f = problem.rhs().unwrap();
        let gap = norm(&(&coarse - f));
        // Well under a tenth of the smallest noise level used (δ_rel = 1e-3).
        assert!(gap <= 0.1 * 1e-3 * norm(f), "gap {gap}");
    }

    #[test]
    fn target_names_round_trip() {
        for t in [Target::One, Target::SinPi, Target::Sin2Pi] {
            assert_eq!(t.as_str().parse::<Target>().unwrap(), t);
        }
        assert!("cos".parse::<Target>().is_err());
    }
}

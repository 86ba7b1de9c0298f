//! Discrete stand-in for L²[0,1]: uniform grids, trapezoidal weights and the
//! weighted inner product every other module measures things with.

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Uniform grid on [0,1] with trapezoidal quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nodes: Vec<f64>,
    weights: DVector<f64>,
}

impl Grid {
    /// Builds the grid `x_i = i/(n-1)`, `i = 0..n`. Needs at least two nodes.
    pub fn uniform(n_points: usize) -> Result<Arc<Grid>> {
        if n_points < 2 {
            return Err(Error::param(format!(
                "a grid needs at least 2 points, got {n_points}"
            )));
        }
        let last = (n_points - 1) as f64;
        let h = 1.0 / last;
        let mut nodes: Vec<f64> = (0..n_points).map(|i| i as f64 / last).collect();
        // i/(n-1) is exact at both ends already, pin them anyway.
        nodes[0] = 0.0;
        nodes[n_points - 1] = 1.0;
        let mut weights = DVector::from_element(n_points, h);
        weights[0] = 0.5 * h;
        weights[n_points - 1] = 0.5 * h;
        Ok(Arc::new(Grid { nodes, weights }))
    }

    pub fn n_points(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    /// Node spacing `h = 1/(n-1)`.
    pub fn spacing(&self) -> f64 {
        1.0 / (self.n_points() - 1) as f64
    }

    /// Weighted inner product of two raw nodal vectors (compensated sum, so
    /// constants integrate to 1 without drift).
    pub(crate) fn dot(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let mut sum = 0.0;
        let mut carry = 0.0;
        for (w, (a, b)) in self.weights.iter().zip(u.iter().zip(v.iter())) {
            let term = w * a * b;
            let t = sum + term;
            carry += if sum.abs() >= term.abs() {
                (sum - t) + term
            } else {
                (term - t) + sum
            };
            sum = t;
        }
        if sum.is_finite() {
            sum + carry
        } else {
            // The carry of an overflowed sum is NaN; keep the infinity.
            sum
        }
    }

    /// NaN and infinity propagate, so an overflowed vector never looks small.
    pub(crate) fn norm_of(&self, u: &DVector<f64>) -> f64 {
        let d = self.dot(u, u);
        if d < 0.0 {
            0.0
        } else {
            d.sqrt()
        }
    }

    pub(crate) fn check_len(&self, found: usize) -> Result<()> {
        if found == self.n_points() {
            Ok(())
        } else {
            Err(Error::Dimension {
                expected: self.n_points(),
                found,
            })
        }
    }
}

/// Real function sampled at the nodes of a [`Grid`].
#[derive(Clone, PartialEq)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: DVector<f64>,
}

impl fmt::Debug for GridFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridFunction")
            .field("n_points", &self.grid.n_points())
            .field("values", &self.values.as_slice())
            .finish()
    }
}

impl GridFunction {
    /// Wraps nodal values; rejects wrong lengths and non-finite entries.
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        grid.check_len(values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("grid function values".into()));
        }
        Ok(Self {
            grid,
            values: DVector::from_vec(values),
        })
    }

    pub(crate) fn from_vector(grid: Arc<Grid>, values: DVector<f64>) -> Self {
        debug_assert_eq!(grid.n_points(), values.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.n_points();
        Self::from_vector(grid, DVector::zeros(n))
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Self {
        let n = grid.n_points();
        Self::from_vector(grid, DVector::from_element(n, c))
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: Arc<Grid>, mut f: impl FnMut(f64) -> f64) -> Self {
        let values = DVector::from_iterator(grid.n_points(), grid.nodes().iter().map(|&x| f(x)));
        Self::from_vector(grid, values)
    }

    /// Nodal indicator of node `j`.
    pub fn indicator(grid: Arc<Grid>, j: usize) -> Result<Self> {
        if j >= grid.n_points() {
            return Err(Error::param(format!(
                "node index {j} out of range for {} points",
                grid.n_points()
            )));
        }
        let mut e = Self::zeros(grid);
        e.values[j] = 1.0;
        Ok(e)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut DVector<f64> {
        &mut self.values
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.amax()
    }

    /// Errors unless `other` lives on a grid with the same node count.
    pub fn check_same_grid(&self, other: &GridFunction) -> Result<()> {
        self.grid.check_len(other.len())
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &GridFunction) -> Result<GridFunction> {
        self.check_same_grid(other)?;
        Ok(Self::from_vector(
            self.grid.clone(),
            &self.values + &other.values * alpha,
        ))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        Self::from_vector(self.grid.clone(), self.values.map(f))
    }
}

/// `⟨u, v⟩ = Σ w_i u_i v_i` with trapezoidal weights.
pub fn inner_product(u: &GridFunction, v: &GridFunction) -> Result<f64> {
    u.check_same_grid(v)?;
    Ok(u.grid.dot(&u.values, &v.values))
}

/// Weighted L² norm.
pub fn norm(u: &GridFunction) -> f64 {
    u.grid.norm_of(&u.values)
}

/// `‖u − v‖`.
pub fn distance(u: &GridFunction, v: &GridFunction) -> Result<f64> {
    u.check_same_grid(v)?;
    Ok(u.grid.norm_of(&(&u.values - &v.values)))
}

// The arithmetic operators panic on grid mismatch, like nalgebra does for
// shape mismatch. Use `axpy`/`distance` for the fallible forms.
impl Add for &GridFunction {
    type Output = GridFunction;
    fn add(self, rhs: &GridFunction) -> GridFunction {
        assert_eq!(self.len(), rhs.len(), "grid mismatch in addition");
        GridFunction::from_vector(self.grid.clone(), &self.values + &rhs.values)
    }
}

impl Sub for &GridFunction {
    type Output = GridFunction;
    fn sub(self, rhs: &GridFunction) -> GridFunction {
        assert_eq!(self.len(), rhs.len(), "grid mismatch in subtraction");
        GridFunction::from_vector(self.grid.clone(), &self.values - &rhs.values)
    }
}

impl Mul<f64> for &GridFunction {
    type Output = GridFunction;
    fn mul(self, rhs: f64) -> GridFunction {
        GridFunction::from_vector(self.grid.clone(), &self.values * rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn weights_integrate_constants_exactly() {
        for n in [2, 3, 10, 100, 257, 1000] {
            let g = Grid::uniform(n).unwrap();
            let one = GridFunction::constant(g.clone(), 1.0);
            assert!(
                (inner_product(&one, &one).unwrap() - 1.0).abs() <= 1e-14,
                "n = {n}"
            );
            assert!((g.weights().sum() - 1.0).abs() <= 1e-13, "n = {n}");
            assert_eq!(g.nodes()[0], 0.0);
            assert_eq!(*g.nodes().last().unwrap(), 1.0);
            assert!(g.nodes().windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn overflow_is_not_hidden() {
        let g = Grid::uniform(4).unwrap();
        let big = GridFunction::constant(g.clone(), 1e200);
        assert_eq!(norm(&big), f64::INFINITY);
        let mixed =
            GridFunction::from_vector(g, DVector::from_vec(vec![1e300, -1e300, 1.0, f64::MAX]));
        assert!(!(norm(&mixed) < 1e300));
    }

    #[test]
    fn rejects_degenerate_grid() {
        assert!(matches!(Grid::uniform(1), Err(Error::Parameter(_))));
    }

    #[test]
    fn inner_product_examples() {
        let g = Grid::uniform(100).unwrap();
        let one = GridFunction::constant(g.clone(), 1.0);
        assert_eq!(inner_product(&one, &one).unwrap(), 1.0);

        let s = GridFunction::from_fn(g.clone(), |x| (PI * x).sin());
        assert!((inner_product(&s, &s).unwrap() - 0.5).abs() <= 1e-3);

        let x = GridFunction::from_fn(g, |x| x);
        assert!((inner_product(&x, &one).unwrap() - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn norm_examples() {
        let g = Grid::uniform(100).unwrap();
        assert_eq!(norm(&GridFunction::zeros(g.clone())), 0.0);
        assert!((norm(&GridFunction::constant(g.clone(), 1.0)) - 1.0).abs() < 1e-15);
        let s = GridFunction::from_fn(g, |x| (PI * x).sin());
        assert!((norm(&s) - 0.5f64.sqrt()).abs() <= 1e-3);
    }

    #[test]
    fn mismatch_is_a_dimension_error() {
        let a = GridFunction::zeros(Grid::uniform(10).unwrap());
        let b = GridFunction::zeros(Grid::uniform(11).unwrap());
        assert!(matches!(
            inner_product(&a, &b),
            Err(Error::Dimension {
                expected: 10,
                found: 11
            })
        ));
    }

    #[test]
    fn new_rejects_bad_values() {
        let g = Grid::uniform(3).unwrap();
        assert!(GridFunction::new(g.clone(), vec![1.0, 2.0]).is_err());
        assert!(GridFunction::new(g, vec![1.0, f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn quadrature_is_second_order() {
        let exact = 0.5;
        let err = |n: usize| {
            let g = Grid::uniform(n).unwrap();
            // sin² has vanishing odd derivatives at the ends, so use a shifted
            // integrand whose endpoint derivatives do not cancel.
            let u = GridFunction::from_fn(g, |x| (PI * x).sin() + x);
            let v = norm(&u).powi(2);
            (v - (exact + 2.0 / PI + 1.0 / 3.0)).abs()
        };
        let ratio = err(100) / err(199);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn cauchy_schwarz(u in proptest::collection::vec(-5.0f64..5.0, 17),
                              v in proptest::collection::vec(-5.0f64..5.0, 17)) {
                let g = Grid::uniform(17).unwrap();
                let u = GridFunction::new(g.clone(), u).unwrap();
                let v = GridFunction::new(g, v).unwrap();
                let ip = inner_product(&u, &v).unwrap();
                prop_assert!(ip.abs() <= norm(&u) * norm(&v) * (1.0 + 1e-12) + 1e-14);
                prop_assert!((ip - inner_product(&v, &u).unwrap()).abs() <= 1e-14);
            }
        }
    }
}

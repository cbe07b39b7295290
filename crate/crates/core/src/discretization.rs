//! Uniform grids, complex state vectors, trapezoid quadrature and the discrete
//! L² / H¹ norms used by every other module.

use ndarray::Array1;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients of the controlled plant
/// `u_t - (ν + iα) u_xx - γ u + (κ + iβ)|u|^p u = 0` on `(0, L)`,
/// together with the controller parameters `μ` (target damping) and `N`
/// (number of controlled modes).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysParams {
    pub nu: f64,
    pub alpha: f64,
    pub gamma: f64,
    #[serde(default)]
    pub kappa: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default = "default_power")]
    pub p: f64,
    #[serde(rename = "L", alias = "length")]
    pub length: f64,
    pub mu: f64,
    pub n_modes: usize,
}

fn default_power() -> f64 {
    2.0
}

impl PhysParams {
    /// Linear plant `u_t - (1 + 3i) u_xx - 23 u = 0` on `(0, 1)` with `μ = 60`, `N = 2`.
    pub fn experiment1() -> Self {
        Self {
            nu: 1.0,
            alpha: 3.0,
            gamma: 23.0,
            kappa: 0.0,
            beta: 0.0,
            p: 2.0,
            length: 1.0,
            mu: 60.0,
            n_modes: 2,
        }
    }

    /// Cubic plant `u_t - (1 + i) u_xx + (1 + 4i)|u|² u - 10 u = 0` on `(0, 1)`
    /// with `μ = 12`, `N = 1`.
    pub fn experiment2() -> Self {
        Self {
            nu: 1.0,
            alpha: 1.0,
            gamma: 10.0,
            kappa: 1.0,
            beta: 4.0,
            p: 2.0,
            length: 1.0,
            mu: 12.0,
            n_modes: 1,
        }
    }

    /// `ν + iα`.
    pub fn diffusivity(&self) -> Complex64 {
        Complex64::new(self.nu, self.alpha)
    }

    /// `κ + iβ`.
    pub fn nonlinear_coeff(&self) -> Complex64 {
        Complex64::new(self.kappa, self.beta)
    }

    pub fn is_linear(&self) -> bool {
        self.kappa == 0.0 && self.beta == 0.0
    }

    /// Dirichlet–Neumann Laplacian eigenvalue `λ_j = ((2j-1)/2)² π²/L²`, `j ≥ 1`.
    pub fn lambda(&self, j: usize) -> f64 {
        mode_eigenvalue(j, self.length)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParams(msg.to_string()));
        if !(self.nu > 0.0) || !self.nu.is_finite() {
            return bad("nu must be positive");
        }
        if !(self.length > 0.0) || !self.length.is_finite() {
            return bad("L must be positive");
        }
        if !(self.gamma >= 0.0) {
            return bad("gamma must be nonnegative");
        }
        if !(self.kappa >= 0.0) {
            return bad("kappa must be nonnegative");
        }
        if self.kappa == 0.0 && self.beta != 0.0 {
            return bad("beta must vanish when kappa = 0");
        }
        if self.kappa > 0.0 && !(self.p > 0.0 && self.p < 4.0) {
            return bad("p must lie in (0, 4) for the nonlinear plant");
        }
        if !(self.mu >= 0.0) || !self.mu.is_finite() {
            return bad("mu must be nonnegative");
        }
        if !self.alpha.is_finite() || !self.beta.is_finite() {
            return bad("alpha and beta must be finite");
        }
        if self.n_modes == 0 {
            return bad("n_modes must be at least 1");
        }
        Ok(())
    }
}

pub fn mode_eigenvalue(j: usize, length: f64) -> f64 {
    let half = (2 * j) as f64 - 1.0;
    (half / 2.0).powi(2) * std::f64::consts::PI.powi(2) / length.powi(2)
}

/// Uniform spatial grid `x_i = i·δ_x`, `i = 0..n_x`, with the last node pinned to `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n_x: usize,
    dx: f64,
    nodes: Vec<f64>,
}

impl Grid {
    pub fn new(n_x: usize, length: f64) -> Result<Self> {
        if n_x < 3 {
            return Err(Error::Domain(format!("grid needs at least 3 nodes, got {n_x}")));
        }
        if !(length > 0.0) {
            return Err(Error::Domain("grid length must be positive".into()));
        }
        let dx = length / (n_x - 1) as f64;
        let mut nodes: Vec<f64> = (0..n_x).map(|i| i as f64 * dx).collect();
        nodes[n_x - 1] = length;
        Ok(Self { n_x, dx, nodes })
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn length(&self) -> f64 {
        self.nodes[self.n_x - 1]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Composite trapezoid weights `(δ_x/2, δ_x, …, δ_x, δ_x/2)`.
    pub fn trapezoid_weights(&self) -> Array1<f64> {
        let mut w = Array1::from_elem(self.n_x, self.dx);
        w[0] *= 0.5;
        w[self.n_x - 1] *= 0.5;
        w
    }

    pub fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n_x {
            return Err(Error::Dimension {
                expected: self.n_x,
                got: len,
            });
        }
        Ok(())
    }
}

/// Uniform time grid `t_n = n·δ_t`, `n = 0..n_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    n_t: usize,
    dt: f64,
    t_max: f64,
}

impl TimeGrid {
    pub fn new(n_t: usize, t_max: f64) -> Result<Self> {
        if n_t < 2 {
            return Err(Error::Domain(format!("time grid needs at least 2 levels, got {n_t}")));
        }
        if !(t_max > 0.0) {
            return Err(Error::Domain("t_max must be positive".into()));
        }
        Ok(Self {
            n_t,
            dt: t_max / (n_t - 1) as f64,
            t_max,
        })
    }

    /// Grid with step as close to `dt` as possible that lands exactly on `t_max`.
    pub fn from_step(dt: f64, t_max: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Domain("dt must be positive".into()));
        }
        let steps = (t_max / dt).round().max(1.0) as usize;
        Self::new(steps + 1, t_max)
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn time(&self, n: usize) -> f64 {
        if n + 1 == self.n_t {
            self.t_max
        } else {
            n as f64 * self.dt
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_t).map(|n| self.time(n)).collect()
    }
}

/// Complex state on a spatial grid, stored in natural node order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField(Array1<Complex64>);

impl ComplexField {
    pub fn zeros(n: usize) -> Self {
        Self(Array1::zeros(n))
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> Complex64) -> Self {
        Self(grid.nodes().iter().map(|&x| f(x)).collect())
    }

    pub fn from_real_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    pub fn from_vec(values: Vec<Complex64>) -> Self {
        Self(Array1::from(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &Array1<Complex64> {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut Array1<Complex64> {
        &mut self.0
    }

    pub fn into_inner(self) -> Array1<Complex64> {
        self.0
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}

impl From<Array1<Complex64>> for ComplexField {
    fn from(values: Array1<Complex64>) -> Self {
        Self(values)
    }
}

impl std::ops::Index<usize> for ComplexField {
    type Output = Complex64;
    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

/// Composite trapezoid rule on the grid.
pub fn trapz(f: &ComplexField, grid: &Grid) -> Result<Complex64> {
    grid.check_len(f.len())?;
    Ok(trapz_slice(f.values().as_slice().expect("contiguous"), grid.dx()))
}

pub(crate) fn trapz_slice(f: &[Complex64], dx: f64) -> Complex64 {
    let n = f.len();
    let inner: Complex64 = f[1..n - 1].iter().sum();
    (inner + 0.5 * (f[0] + f[n - 1])) * dx
}

pub fn norm_l2(f: &ComplexField, grid: &Grid) -> Result<f64> {
    grid.check_len(f.len())?;
    let sq: Vec<Complex64> = f.values().iter().map(|z| Complex64::from(z.norm_sqr())).collect();
    Ok(trapz_slice(&sq, grid.dx()).re.max(0.0).sqrt())
}

/// Second-order first derivative: centered in the interior, one-sided
/// three-point stencils at both endpoints.
pub fn derivative(f: &ComplexField, grid: &Grid) -> Result<ComplexField> {
    grid.check_len(f.len())?;
    let n = f.len();
    let h = grid.dx();
    let v = f.values();
    let mut d = Array1::zeros(n);
    d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
    for i in 1..n - 1 {
        d[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
    }
    d[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h);
    Ok(ComplexField(d))
}

pub fn norm_h1(f: &ComplexField, grid: &Grid) -> Result<f64> {
    let l2 = norm_l2(f, grid)?;
    let dl2 = norm_l2(&derivative(f, grid)?, grid)?;
    Ok((l2 * l2 + dl2 * dl2).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn unit(n: usize) -> Grid {
        Grid::new(n, 1.0).unwrap()
    }

    #[test]
    fn last_node_is_exact() {
        let g = Grid::new(7, 0.3).unwrap();
        assert_eq!(g.nodes()[0], 0.0);
        assert_eq!(g.nodes()[6], 0.3);
        assert!(Grid::new(2, 1.0).is_err());
    }

    #[test]
    fn time_grid_spacing() {
        let t = TimeGrid::from_step(5e-4, 1.0).unwrap();
        assert_eq!(t.n_t(), 2001);
        assert!((t.dt() * 2000.0 - 1.0).abs() < 1e-14);
        assert_eq!(t.time(2000), 1.0);
    }

    #[test]
    fn trapz_exact_cases() {
        let g = unit(11);
        let one = ComplexField::from_real_fn(&g, |_| 1.0);
        assert_abs_diff_eq!(trapz(&one, &g).unwrap().re, 1.0, epsilon = 1e-15);
        for n in [3, 8, 51] {
            let g = unit(n);
            let x = ComplexField::from_real_fn(&g, |x| x);
            assert_abs_diff_eq!(trapz(&x, &g).unwrap().re, 0.5, epsilon = 1e-15);
        }
        let g = unit(201);
        let s = ComplexField::from_real_fn(&g, |x| (PI * x).sin());
        assert!((trapz(&s, &g).unwrap().re - 2.0 / PI).abs() < 1e-4);
    }

    #[test]
    fn trapz_length_mismatch() {
        let g = unit(11);
        let f = ComplexField::zeros(10);
        assert!(matches!(trapz(&f, &g), Err(Error::Dimension { .. })));
        assert!(norm_l2(&f, &g).is_err());
    }

    #[test]
    fn trapz_second_order() {
        let exact = 2.0 / PI;
        let errs: Vec<f64> = [21, 41, 81]
            .iter()
            .map(|&n| {
                let g = unit(n);
                let s = ComplexField::from_real_fn(&g, |x| (PI * x).sin());
                (trapz(&s, &g).unwrap().re - exact).abs()
            })
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 4.0).abs() < 0.8, "ratio {ratio}");
        }
    }

    #[test]
    fn l2_norm_examples() {
        let g = unit(11);
        assert_eq!(norm_l2(&ComplexField::zeros(11), &g).unwrap(), 0.0);
        let one = ComplexField::from_real_fn(&g, |_| 1.0);
        assert_abs_diff_eq!(norm_l2(&one, &g).unwrap(), 1.0, epsilon = 1e-14);
        let g = unit(401);
        let s = ComplexField::from_real_fn(&g, |x| (2.0 * PI * x).sin());
        assert!((norm_l2(&s, &g).unwrap() - 0.5f64.sqrt()).abs() < 1e-4);
    }

    #[test]
    fn h1_norm_examples() {
        let g = unit(101);
        assert_eq!(norm_h1(&ComplexField::zeros(101), &g).unwrap(), 0.0);
        let x = ComplexField::from_real_fn(&g, |x| x);
        assert!((norm_h1(&x, &g).unwrap() - (1.0f64 / 3.0 + 1.0).sqrt()).abs() < 1e-4);

        // ∫ sin²(πx/2) = 1/2, ∫ cos²(πx/2) = 1/2 on [0, 1]
        let g = unit(401);
        let s = ComplexField::from_real_fn(&g, |x| (PI * x / 2.0).sin());
        let exact = (0.5 + (PI / 2.0).powi(2) * 0.5).sqrt();
        assert!((norm_h1(&s, &g).unwrap() - exact).abs() < 1e-3);
    }

    #[test]
    fn params_validation() {
        assert!(PhysParams::experiment1().validate().is_ok());
        assert!(PhysParams::experiment2().validate().is_ok());
        let mut p = PhysParams::experiment1();
        p.beta = 1.0;
        assert!(p.validate().is_err());
        let mut p = PhysParams::experiment2();
        p.p = 4.0;
        assert!(p.validate().is_err());
        let mut p = PhysParams::experiment1();
        p.nu = 0.0;
        assert!(p.validate().is_err());
    }
}

//! Boundary feedback law and the decay-rate / mode-count formulas.

use std::fmt;

use ndarray::Array1;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::discretization::{mode_eigenvalue, trapz_slice, ComplexField, Grid, PhysParams};
use crate::error::{Error, Result};
use crate::transform::{BacksteppingTransform, OperatorKind, OperatorMatrix};

/// `g(u) = ∫_0^L k_x(L,y) v(y) dy + ζ v(L)` with `v = P_N (I - Υ_N) u`.
#[derive(Debug, Clone)]
pub struct ControlLaw {
    pub deriv_trace: Array1<Complex64>,
    /// `Γ_N = P_N (I - Υ_N)` acting on the full state.
    pub gamma_matrix: OperatorMatrix,
    pub zeta: Complex64,
    pub n_modes: usize,
    dx: f64,
    /// The same functional as a single row, `g(u) = row · u`.
    row: Array1<Complex64>,
}

impl ControlLaw {
    pub fn new(transform: &BacksteppingTransform, params: &PhysParams, grid: &Grid) -> Result<Self> {
        grid.check_len(transform.k_matrix.n())?;
        let gamma_matrix = transform
            .projection
            .compose(&transform.inverse_matrix(), OperatorKind::Gamma);
        let zeta = -params.mu * params.length / (2.0 * params.diffusivity());
        let deriv_trace = transform.kernel.deriv_trace.clone();
        let mut r = deriv_trace.mapv(|z| z);
        r.zip_mut_with(&grid.trapezoid_weights(), |z, &w| *z *= w);
        let n = grid.n_x();
        r[n - 1] += zeta;
        let row = gamma_matrix.entries.t().dot(&r);
        Ok(Self {
            deriv_trace,
            gamma_matrix,
            zeta,
            n_modes: params.n_modes,
            dx: grid.dx(),
            row,
        })
    }

    /// Evaluates the law as written: project, integrate against the trace,
    /// add the boundary term.
    pub fn feedback(&self, u: &ComplexField) -> Result<Complex64> {
        let v = self.gamma_matrix.apply(u)?;
        let prod: Vec<Complex64> = self
            .deriv_trace
            .iter()
            .zip(v.values())
            .map(|(k, v)| k * v)
            .collect();
        Ok(trapz_slice(&prod, self.dx) + self.zeta * v[v.len() - 1])
    }

    /// Coefficients `ℓ` with `feedback(u) = ℓ · u`.
    pub fn row(&self) -> &Array1<Complex64> {
        &self.row
    }

    /// `ℓ · u`; agrees with [`feedback`](Self::feedback) up to rounding.
    pub fn apply_row(&self, u: &[Complex64]) -> Result<Complex64> {
        if u.len() != self.row.len() {
            return Err(Error::Dimension {
                expected: self.row.len(),
                got: u.len(),
            });
        }
        Ok(self.row.iter().zip(u).map(|(a, b)| a * b).sum())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanMode {
    Rapid,
    Minimal,
}

impl fmt::Display for PlanMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlanMode::Rapid => "rapid",
            PlanMode::Minimal => "minimal",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatePlan {
    pub mode: PlanMode,
    pub mu: f64,
    pub n_modes: usize,
    pub eta: f64,
    /// Number of eigenvalues `λ_j ≤ γ/ν`.
    pub instability_level: usize,
    /// Admissible open μ-interval (minimal mode only).
    pub mu_interval: Option<(f64, f64)>,
}

impl fmt::Display for RatePlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mode        : {}", self.mode)?;
        writeln!(f, "M           : {}", self.instability_level)?;
        writeln!(f, "N           : {}", self.n_modes)?;
        match self.mu_interval {
            Some((lo, hi)) => writeln!(f, "mu-interval : ({lo:.4}, {hi:.4})")?,
            None => writeln!(f, "mu-interval : (max(0, gamma - nu*lambda_1), inf)")?,
        }
        writeln!(f, "mu          : {}", self.mu)?;
        write!(f, "eta         : {:.6}", self.eta)
    }
}

/// Number of Dirichlet–Neumann eigenvalues at or below `γ/ν`.
pub fn instability_level(params: &PhysParams) -> usize {
    let ratio = params.gamma / params.nu;
    let mut m = 0;
    while mode_eigenvalue(m + 1, params.length) <= ratio {
        m += 1;
    }
    m
}

/// `η₁ = νλ₁ − γ + μ(1 − 1/(2N+1))`.
pub fn eta_rapid(params: &PhysParams, mu: f64, n: usize) -> f64 {
    params.nu * params.lambda(1) - params.gamma + mu * (1.0 - 1.0 / (2 * n + 1) as f64)
}

/// `η₂ = νλ₁ − γ + (μ/2)(1 − 1/(2N+1)²)`.
pub fn eta_minimal(params: &PhysParams, mu: f64, n: usize) -> f64 {
    let q = (2 * n + 1) as f64;
    params.nu * params.lambda(1) - params.gamma + 0.5 * mu * (1.0 - 1.0 / (q * q))
}

/// Lower bound of the mode-count condition; `N` must strictly exceed it.
pub fn rapid_threshold(params: &PhysParams, mu: f64) -> f64 {
    let nl1 = params.nu * params.lambda(1);
    let a = mu / (4.0 * nl1) - 0.5;
    let b = mu / (2.0 * (mu + nl1 - params.gamma)) - 0.5;
    a.max(b)
}

/// Smallest `N ≥ 1` above [`rapid_threshold`] for the supplied `μ`.
pub fn rapid_mode_count(params: &PhysParams) -> Result<RatePlan> {
    let mu = params.mu;
    let floor = params.gamma - params.nu * params.lambda(1);
    if mu <= floor {
        return Err(Error::InvalidRate(format!(
            "mu = {mu} must exceed gamma - nu*lambda_1 = {floor}"
        )));
    }
    let th = rapid_threshold(params, mu);
    let n = if th < 0.0 { 0 } else { th.floor() as usize + 1 }.max(1);
    Ok(RatePlan {
        mode: PlanMode::Rapid,
        mu,
        n_modes: n,
        eta: eta_rapid(params, mu, n),
        instability_level: instability_level(params),
        mu_interval: None,
    })
}

/// Open μ-interval for `N = M` modes, where `M` is the instability level.
/// The lower bound is `-∞` when `M = 0`.
pub fn minimal_mu_interval(params: &PhysParams) -> (usize, f64, f64) {
    let m = instability_level(params);
    let nl1 = params.nu * params.lambda(1);
    let lo = if m == 0 {
        f64::NEG_INFINITY
    } else {
        2.0 * (params.gamma - nl1) / (1.0 - 1.0 / (2 * m + 1) as f64)
    };
    let hi = 2.0 * params.nu * mode_eigenvalue(m + 1, params.length);
    (m, lo, hi)
}

/// Mode count `N = M` and the decay rate for the supplied `μ`, which must lie
/// strictly inside [`minimal_mu_interval`].
pub fn minimal_mode_plan(params: &PhysParams) -> Result<RatePlan> {
    let ratio = params.gamma / params.nu;
    let l = params.length;
    if (1..=instability_level(params) + 1).any(|j| mode_eigenvalue(j, l) == ratio) {
        return Err(Error::InvalidRate(format!("gamma/nu = {ratio} coincides with an eigenvalue")));
    }
    let (m, lo, hi) = minimal_mu_interval(params);
    let mu = params.mu;
    if !(mu > lo && mu < hi) {
        return Err(Error::InvalidRate(format!(
            "mu = {mu} outside the admissible interval ({lo}, {hi})"
        )));
    }
    Ok(RatePlan {
        mode: PlanMode::Minimal,
        mu,
        n_modes: m,
        eta: eta_minimal(params, mu, m),
        instability_level: m,
        mu_interval: Some((lo, hi)),
    })
}

/// Decay rate guaranteed by the plan.
pub fn predicted_eta(plan: &RatePlan, params: &PhysParams) -> f64 {
    match plan.mode {
        PlanMode::Rapid => eta_rapid(params, plan.mu, plan.n_modes),
        PlanMode::Minimal => eta_minimal(params, plan.mu, plan.n_modes),
    }
}

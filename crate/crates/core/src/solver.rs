//! Crank–Nicolson time stepping for the closed-loop plant, with Picard sweeps
//! for the nonlinear term, plus norm histories and decay-rate fitting.
//!
//! Spatial operator `A = -(ν + iα) Δ - γ I`. Row 0 of the system carries the
//! Dirichlet condition, row `n_x - 1` the one-sided Neumann stencil
//! `(3u_{n-1} - 4u_{n-2} + u_{n-3}) / (2δx) = g`.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::controller::ControlLaw;
use crate::discretization::{norm_h1, norm_l2, ComplexField, Grid, PhysParams, TimeGrid};
use crate::error::{Error, Result};
use crate::linalg::{BandedMatrix, LinearSolver};

pub const PICARD_TOL: f64 = 1e-10;
pub const PICARD_MAX_ITERS: usize = 50;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Which state the boundary feedback of the linear scheme reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeedbackTiming {
    /// `g^n` from `u^n`: the boundary row is explicit in the control.
    #[default]
    Lagged,
    /// `g^{n+1}` from `u^{n+1}`, solved exactly with a rank-one update.
    Implicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOptions {
    pub timing: FeedbackTiming,
    pub picard_tol: f64,
    pub picard_max_iters: usize,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            timing: FeedbackTiming::Lagged,
            picard_tol: PICARD_TOL,
            picard_max_iters: PICARD_MAX_ITERS,
        }
    }
}

/// `|u|^p` with `0^p = 0` for `p > 0`.
pub fn modulus_pow(z: Complex64, p: f64) -> f64 {
    if p == 0.0 {
        1.0
    } else {
        let r = z.norm();
        if r == 0.0 {
            0.0
        } else {
            r.powf(p)
        }
    }
}

/// Crank–Nicolson operators for one `(grid, δt)` pair.
#[derive(Debug, Clone)]
pub struct SystemMatrices {
    /// Tridiagonal `A`, boundary rows included as plain stencil rows.
    pub a_matrix: BandedMatrix,
    /// `I + (δt/2) A` with rows 0 and `n_x - 1` replaced by the boundary stencils.
    pub lhs: BandedMatrix,
    solver: LinearSolver,
    /// `lhs^{-1} e_{n-1}`: response to a unit Neumann datum.
    neumann_response: Vec<Complex64>,
    nonlinear_coeff: Complex64,
    p: f64,
    dt: f64,
    dx: f64,
    n: usize,
}

impl SystemMatrices {
    pub fn new(params: &PhysParams, grid: &Grid, dt: f64) -> Result<Self> {
        let n = grid.n_x();
        if n < 4 {
            return Err(Error::Domain(format!("need at least 4 nodes, got {n}")));
        }
        if !(dt > 0.0) {
            return Err(Error::Domain("dt must be positive".into()));
        }
        let dx = grid.dx();
        let c = params.diffusivity() / (dx * dx);
        let mut a_matrix = BandedMatrix::zeros(n, 1, 1);
        for i in 0..n {
            a_matrix.set(i, i, 2.0 * c - params.gamma);
            if i > 0 {
                a_matrix.set(i, i - 1, -c);
            }
            if i + 1 < n {
                a_matrix.set(i, i + 1, -c);
            }
        }
        let mut lhs = BandedMatrix::zeros(n, 2, 1);
        lhs.set(0, 0, ONE);
        for i in 1..n - 1 {
            for j in i - 1..=i + 1 {
                let id = if i == j { ONE } else { ZERO };
                lhs.set(i, j, id + 0.5 * dt * a_matrix.get(i, j));
            }
        }
        let h = 1.0 / (2.0 * dx);
        lhs.set(n - 1, n - 3, Complex64::new(h, 0.0));
        lhs.set(n - 1, n - 2, Complex64::new(-4.0 * h, 0.0));
        lhs.set(n - 1, n - 1, Complex64::new(3.0 * h, 0.0));
        let solver = LinearSolver::factor(lhs.clone())?;
        let mut neumann_response = vec![ZERO; n];
        neumann_response[n - 1] = ONE;
        solver.solve_in_place(&mut neumann_response);
        Ok(Self {
            a_matrix,
            lhs,
            solver,
            neumann_response,
            nonlinear_coeff: params.nonlinear_coeff(),
            p: params.p,
            dt,
            dx,
            n,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `(I - (δt/2) A) u` with both boundary entries zeroed.
    pub fn rhs(&self, u: &[Complex64]) -> Vec<Complex64> {
        let au = self.a_matrix.matvec(u);
        let mut b: Vec<Complex64> = u.iter().zip(&au).map(|(u, a)| u - 0.5 * self.dt * a).collect();
        b[0] = ZERO;
        b[self.n - 1] = ZERO;
        b
    }

    /// One-sided second-order `u_x(L)`.
    pub fn neumann_stencil(&self, u: &[Complex64]) -> Complex64 {
        let n = self.n;
        (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * self.dx)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: len,
            });
        }
        Ok(())
    }

    /// `(δt/2)(κ + iβ) |u|^p u`.
    fn nonlinear_term(&self, u: &[Complex64]) -> Vec<Complex64> {
        u.iter()
            .map(|&z| 0.5 * self.dt * self.nonlinear_coeff * modulus_pow(z, self.p) * z)
            .collect()
    }
}

fn feedback_of(law: Option<&ControlLaw>, u: &[Complex64]) -> Result<Complex64> {
    match law {
        Some(l) => l.apply_row(u),
        None => Ok(ZERO),
    }
}

/// One Crank–Nicolson step of the linear plant. Returns the new state and the
/// boundary datum that was imposed.
pub fn step_linear(
    state: &ComplexField,
    mats: &SystemMatrices,
    law: Option<&ControlLaw>,
    timing: FeedbackTiming,
) -> Result<(ComplexField, Complex64)> {
    mats.check_len(state.len())?;
    let u = state.values().to_vec();
    let mut b = mats.rhs(&u);
    let n = mats.n;
    match (timing, law) {
        (FeedbackTiming::Implicit, Some(l)) => {
            mats.solver.solve_in_place(&mut b);
            let z = &mats.neumann_response;
            let ly = l.apply_row(&b)?;
            let lz = l.apply_row(z)?;
            let denom = ONE - lz;
            if denom.norm() < 1e-14 {
                return Err(Error::Singular {
                    row: n - 1,
                    pivot: denom.norm(),
                });
            }
            let g = ly / denom;
            let mut out: Vec<Complex64> = b.iter().zip(z).map(|(y, z)| y + g * z).collect();
            out[0] = ZERO;
            Ok((ComplexField::from_vec(out), g))
        }
        _ => {
            let g = feedback_of(law, &u)?;
            b[n - 1] = g;
            mats.solver.solve_in_place(&mut b);
            b[0] = ZERO;
            Ok((ComplexField::from_vec(b), g))
        }
    }
}

/// One Crank–Nicolson step of the nonlinear plant, resolved by Picard sweeps
/// on the increment `du` with the modulus frozen at the current iterate.
/// Returns the state, the last boundary datum and the sweep count.
pub fn step_nonlinear(
    state: &ComplexField,
    mats: &SystemMatrices,
    law: Option<&ControlLaw>,
    tol: f64,
    max_iters: usize,
) -> Result<(ComplexField, Complex64, usize)> {
    mats.check_len(state.len())?;
    let n = mats.n;
    let un = state.values().to_vec();
    let nl_n = mats.nonlinear_term(&un);
    let base: Vec<Complex64> = mats.rhs(&un).iter().zip(&nl_n).map(|(b, f)| b - f).collect();
    let mut us = un;
    let mut residual = f64::INFINITY;
    for sweep in 1..=max_iters {
        let mut m = mats.lhs.clone();
        for (i, &z) in us.iter().enumerate().take(n - 1).skip(1) {
            let d = m.get(i, i) + 0.5 * mats.dt * mats.nonlinear_coeff * modulus_pow(z, mats.p);
            m.set(i, i, d);
        }
        let lu = LinearSolver::factor(m)?;
        let lhs_us = mats.lhs.matvec(&us);
        let nl_s = mats.nonlinear_term(&us);
        let mut du: Vec<Complex64> = (0..n).map(|i| base[i] - lhs_us[i] - nl_s[i]).collect();
        let g = feedback_of(law, &us)?;
        du[0] = -us[0];
        du[n - 1] = g - mats.neumann_stencil(&us);
        lu.solve_in_place(&mut du);
        residual = du.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        for (u, d) in us.iter_mut().zip(&du) {
            *u += d;
        }
        if !residual.is_finite() {
            break;
        }
        if residual < tol {
            us[0] = ZERO;
            return Ok((ComplexField::from_vec(us), g, sweep));
        }
    }
    Err(Error::PicardNonConvergence {
        iters: max_iters,
        residual,
    })
}

/// Norm and feedback histories of one run. Entry `n` refers to time `t_n`;
/// `feedback_history[n]` is the law evaluated on `u^n` and `picard_iters[n]`
/// the sweeps spent reaching `u^n` (0 for linear runs and `n = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub times: Vec<f64>,
    pub l2_history: Vec<f64>,
    pub h1_history: Vec<f64>,
    pub feedback_history: Vec<Complex64>,
    pub picard_iters: Vec<usize>,
    pub final_state: ComplexField,
}

impl RunRecord {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,l2,h1,re_g,im_g,picard_iters")?;
        for n in 0..self.times.len() {
            writeln!(
                out,
                "{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{}",
                self.times[n],
                self.l2_history[n],
                self.h1_history[n],
                self.feedback_history[n].re,
                self.feedback_history[n].im,
                self.picard_iters[n]
            )?;
        }
        Ok(())
    }

    pub fn write_final_state_csv<W: Write>(&self, grid: &Grid, mut out: W) -> Result<()> {
        grid.check_len(self.final_state.len())?;
        writeln!(out, "x,re_u,im_u,abs_u")?;
        for (x, u) in grid.nodes().iter().zip(self.final_state.values()) {
            writeln!(out, "{:.10e},{:.10e},{:.10e},{:.10e}", x, u.re, u.im, u.norm())?;
        }
        Ok(())
    }

    pub fn max_picard_iters(&self) -> usize {
        self.picard_iters.iter().copied().max().unwrap_or(0)
    }
}

/// Simulates the plant from `u0`. Without a law the Neumann datum is zero
/// (uncontrolled plant). The nonlinear scheme is used whenever `κ > 0`.
/// The Dirichlet condition is imposed from the first step on, so an initial
/// datum with `u0(0) ≠ 0` is accepted and corrected at `t_1`.
pub fn run(
    params: &PhysParams,
    grid: &Grid,
    time: &TimeGrid,
    law: Option<&ControlLaw>,
    u0: &ComplexField,
    opts: &StepOptions,
) -> Result<RunRecord> {
    grid.check_len(u0.len())?;
    let mats = SystemMatrices::new(params, grid, time.dt())?;
    let nonlinear = !params.is_linear();
    let n_t = time.n_t();
    let mut rec = RunRecord {
        times: time.times(),
        l2_history: Vec::with_capacity(n_t),
        h1_history: Vec::with_capacity(n_t),
        feedback_history: Vec::with_capacity(n_t),
        picard_iters: Vec::with_capacity(n_t),
        final_state: u0.clone(),
    };
    let mut u = u0.clone();
    let mut iters = 0;
    for step in 0..n_t {
        rec.l2_history.push(norm_l2(&u, grid)?);
        rec.h1_history.push(norm_h1(&u, grid)?);
        rec.feedback_history
            .push(feedback_of(law, u.values().as_slice().expect("contiguous"))?);
        rec.picard_iters.push(iters);
        if step + 1 == n_t {
            break;
        }
        u = if nonlinear {
            let (next, _, it) =
                step_nonlinear(&u, &mats, law, opts.picard_tol, opts.picard_max_iters)
                    .map_err(|e| e.at_step(step + 1))?;
            iters = it;
            next
        } else {
            step_linear(&u, &mats, law, opts.timing).map_err(|e| e.at_step(step + 1))?.0
        };
        if !u.max_abs().is_finite() {
            return Err(Error::Domain("state overflowed".into()).at_step(step + 1));
        }
    }
    rec.final_state = u;
    Ok(rec)
}

/// Open-loop linear run with prescribed boundary data `u(0,t) = a(t)`,
/// `u_x(L,t) = b(t)`, imposed at the new time level. Returns every time level.
pub fn run_open_loop(
    params: &PhysParams,
    grid: &Grid,
    time: &TimeGrid,
    u0: &ComplexField,
    a: &dyn Fn(f64) -> Complex64,
    b: &dyn Fn(f64) -> Complex64,
) -> Result<Vec<ComplexField>> {
    if !params.is_linear() {
        return Err(Error::InvalidParams("open-loop runs need a linear plant (kappa = 0)".into()));
    }
    grid.check_len(u0.len())?;
    let mats = SystemMatrices::new(params, grid, time.dt())?;
    let n = grid.n_x();
    let mut out = Vec::with_capacity(time.n_t());
    out.push(u0.clone());
    for step in 1..time.n_t() {
        let t = time.time(step);
        let prev = out[step - 1].values().as_slice().expect("contiguous");
        let mut rhs = mats.rhs(prev);
        rhs[0] = a(t);
        rhs[n - 1] = b(t);
        mats.solver.solve_in_place(&mut rhs);
        rhs[0] = a(t);
        if rhs.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Domain("state overflowed".into()).at_step(step));
        }
        out.push(ComplexField::from_vec(rhs));
    }
    Ok(out)
}

fn log_slope(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<f64> {
    let (ta, tb) = window;
    if !(tb > ta) {
        return Err(Error::Window(format!("empty window [{ta}, {tb}]")));
    }
    let mut pts = Vec::new();
    for (&t, &v) in times.iter().zip(values) {
        if t >= ta - 1e-12 && t <= tb + 1e-12 {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Window(format!("norm {v} at t = {t} is not positive")));
            }
            pts.push((t, v.ln()));
        }
    }
    if pts.len() < 2 {
        return Err(Error::Window(format!("fewer than 2 samples in [{ta}, {tb}]")));
    }
    let m = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    Ok(-sxy / sxx)
}

/// Negated least-squares slope of `ln ‖u‖_{H¹}` over `window`; positive means decay.
pub fn fit_decay_rate(record: &RunRecord, window: (f64, f64)) -> Result<f64> {
    log_slope(&record.times, &record.h1_history, window)
}

/// Same fit on the L² history.
pub fn fit_decay_rate_l2(record: &RunRecord, window: (f64, f64)) -> Result<f64> {
    log_slope(&record.times, &record.l2_history, window)
}

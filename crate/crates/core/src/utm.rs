//! Unified-transform (Fokas) evaluation of the open-loop linear problem
//!
//! ```text
//! u_t - (ν + iα) u_xx - γ u = f(x, t),   u(x, 0) = u0(x)
//! u(0, t) = a(t),   u_x(L, t) = b(t)
//! ```
//!
//! The solution is a real-line integral plus contour integrals over `∂D±`,
//! the boundaries of the sectors where `Re ω(k) < 0`, `ω = (ν + iα) k²`.
//! Every term is analytic between `∂D+` and the real axis (and between `∂D-`
//! and the real axis), so the rays are rotated halfway towards the axis where
//! `Re ω > 0` and the `e^{-ωt}` factors decay like Gaussians. All transforms
//! in time use upper limit `t`.
//!
//! Spatial and temporal transforms integrate the piecewise-linear interpolant
//! of the samples exactly against the exponential (Filon-type quadrature), so
//! accuracy does not degrade for large `|k|`.

use std::f64::consts::PI;
use std::io::Write;

use ndarray::Array2;
use num_complex::Complex64;

use crate::discretization::{ComplexField, Grid, PhysParams, TimeGrid};
use crate::error::{Error, Result};
use crate::solver::run_open_loop;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// `-ln(1e-16)`: envelope exponent at which a ray is truncated.
const ENVELOPE_EXP: f64 = 37.0;
/// Upper bound on `r_max` imposed by the boundary terms alone.
const BOUNDARY_R_CAP: f64 = 5000.0;
/// `r_max` floor when a forcing term is present (its tail decays algebraically).
const FORCING_R_MIN: f64 = 400.0;
pub const DEFAULT_PANEL_ORDER: usize = 16;
pub const DENOMINATOR_FLOOR: f64 = 1e-14;

/// `(∫_0^1 e^{wτ} dτ, ∫_0^1 τ e^{wτ} dτ)`.
fn phis(w: Complex64) -> (Complex64, Complex64) {
    if w.norm() < 0.5 {
        let mut p = Complex64::new(1.0, 0.0); // w^m / m!
        let mut a = ZERO;
        let mut b = ZERO;
        for m in 0..24 {
            a += p / (m + 1) as f64;
            b += p / (m + 2) as f64;
            p *= w / (m + 1) as f64;
        }
        (a, b)
    } else {
        let e = w.exp();
        ((e - 1.0) / w, (e * (w - 1.0) + 1.0) / (w * w))
    }
}

/// `∫ e^{e0 + z s} f(s) ds` over `[s_0, s_last]` for the piecewise-linear
/// interpolant of `(s_j, f_j)`. Each panel is referenced to whichever end
/// has the smaller exponential, so no intermediate overflows unless the
/// result does. A uniformly spaced leading run of nodes is swept with a
/// multiplicative recurrence instead of one `exp` per panel.
pub(crate) fn filon_affine(s: &[f64], f: &[Complex64], e0: Complex64, z: Complex64) -> Complex64 {
    let n = s.len();
    if n < 2 {
        return ZERO;
    }
    let h = s[1] - s[0];
    let mut m = 1;
    while m + 1 < n && ((s[m + 1] - s[m]) - h).abs() <= 1e-9 * h {
        m += 1;
    }
    let mut acc = filon_uniform(s[0], h, &f[..=m], e0, z);
    for j in m..n - 1 {
        acc += filon_panel(s[j], s[j + 1], f[j], f[j + 1], e0, z);
    }
    acc
}

fn filon_panel(s0: f64, s1: f64, f0: Complex64, f1: Complex64, e0: Complex64, z: Complex64) -> Complex64 {
    let h = s1 - s0;
    let w = z * h;
    if w.re <= 0.0 {
        let (p0, pb) = phis(w);
        h * (e0 + z * s0).exp() * (f0 * (p0 - pb) + f1 * pb)
    } else {
        let (p0, pb) = phis(-w);
        h * (e0 + z * s1).exp() * (f0 * pb + f1 * (p0 - pb))
    }
}

fn filon_uniform(s0: f64, h: f64, f: &[Complex64], e0: Complex64, z: Complex64) -> Complex64 {
    let panels = f.len() - 1;
    let w = z * h;
    let mut acc = ZERO;
    if w.re <= 0.0 {
        let (p0, pb) = phis(w);
        let (wa, wb) = (p0 - pb, pb);
        let step = w.exp();
        let mut e = (e0 + z * s0).exp();
        for j in 0..panels {
            acc += e * (f[j] * wa + f[j + 1] * wb);
            e *= step;
        }
    } else {
        let (p0, pb) = phis(-w);
        let (wa, wb) = (pb, p0 - pb);
        let step = (-w).exp();
        let mut e = (e0 + z * (s0 + panels as f64 * h)).exp();
        for j in (0..panels).rev() {
            acc += e * (f[j] * wa + f[j + 1] * wb);
            e *= step;
        }
    }
    h * acc
}

fn finite(z: Complex64, k: Complex64) -> Result<Complex64> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(Error::Range(format!("{k}")))
    }
}

/// `φ̂(k) = ∫_0^L e^{-ikx} φ(x) dx`.
pub fn finite_fourier(f: &ComplexField, grid: &Grid, k: Complex64) -> Result<Complex64> {
    grid.check_len(f.len())?;
    let v = f.values().as_slice().expect("contiguous");
    finite(filon_affine(grid.nodes(), v, ZERO, -I * k), k)
}

/// Sample times in `[0, t]` with the matching values; a final node at `t` is
/// interpolated when `t` falls between samples.
fn truncate_samples(times: &[f64], values: &[Complex64], t: f64) -> (Vec<f64>, Vec<Complex64>) {
    let mut s = Vec::new();
    let mut v = Vec::new();
    for (j, (&tj, &fj)) in times.iter().zip(values).enumerate() {
        if tj <= t + 1e-12 {
            s.push(tj.min(t));
            v.push(fj);
        } else {
            let (t0, f0) = (times[j - 1], values[j - 1]);
            if t - t0 > 1e-12 {
                let th = (t - t0) / (tj - t0);
                s.push(t);
                v.push(f0 + (fj - f0) * th);
            }
            break;
        }
    }
    (s, v)
}

/// `φ̃(ω, t) = ∫_0^t e^{ωt'} φ(t') dt'` from samples on `time`.
pub fn temporal_transform(
    samples: &[Complex64],
    time: &TimeGrid,
    omega: Complex64,
    t: f64,
) -> Result<Complex64> {
    if samples.len() != time.n_t() {
        return Err(Error::Dimension {
            expected: time.n_t(),
            got: samples.len(),
        });
    }
    if !(0.0..=time.t_max() * (1.0 + 1e-12)).contains(&t) {
        return Err(Error::Domain(format!("t = {t} outside [0, {}]", time.t_max())));
    }
    let (s, v) = truncate_samples(&time.times(), samples, t);
    finite(filon_affine(&s, &v, ZERO, omega), omega)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for m in 2..=n {
                let p2 = ((2 * m - 1) as f64 * z * p1 - (m - 1) as f64 * p0) / m as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Ray geometry and truncation for the contour integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourSpec {
    /// `λ = (-α + √(α² + ν²)) / ν`; `∂D+` consists of the rays at angles
    /// `atan λ` and `atan λ + π/2`.
    pub lambda_slope: f64,
    pub r_max: f64,
    /// Gauss–Legendre nodes per panel.
    pub n_quad: usize,
}

impl ContourSpec {
    pub fn new(params: &PhysParams, r_max: f64, n_quad: usize) -> Result<Self> {
        if !(r_max > 0.0) || n_quad == 0 {
            return Err(Error::Domain("r_max and n_quad must be positive".into()));
        }
        let (nu, al) = (params.nu, params.alpha);
        Ok(Self {
            lambda_slope: (-al + (al * al + nu * nu).sqrt()) / nu,
            r_max,
            n_quad,
        })
    }

    /// Truncation radius from the integrand envelopes at `(x, t)`.
    pub fn adaptive(problem: &UtmProblem, x: f64, t: f64) -> Result<Self> {
        let p = &problem.params;
        let mut cs = Self::new(p, 1.0, DEFAULT_PANEL_ORDER)?;
        let l = p.length;
        let mut r = (ENVELOPE_EXP / (cs.gaussian_rate(p) * t)).sqrt();
        if problem.has_boundary_data() {
            let d = x.min(l - x).max(1e-12);
            r = r.max((ENVELOPE_EXP / (cs.min_sin() * d)).min(BOUNDARY_R_CAP));
        }
        if problem.forcing.is_some() {
            r = r.max(FORCING_R_MIN);
        }
        cs.r_max = r;
        Ok(cs)
    }

    pub fn refined(&self) -> Self {
        Self {
            r_max: 2.0 * self.r_max,
            n_quad: 2 * self.n_quad,
            ..*self
        }
    }

    /// Exact `∂D+` angles `(θ1, θ2)`.
    pub fn sector_angles(&self) -> (f64, f64) {
        let th1 = self.lambda_slope.atan();
        (th1, th1 + PI / 2.0)
    }

    /// Angles of the outgoing and incoming rays actually integrated over in the
    /// upper half plane.
    pub fn ray_angles(&self) -> (f64, f64) {
        let (th1, th2) = self.sector_angles();
        (0.5 * th1, 0.5 * (th2 + PI))
    }

    fn min_sin(&self) -> f64 {
        let (a, b) = self.ray_angles();
        a.sin().min(b.sin())
    }

    /// Smallest `Re ω / r²` over the rays and the real line.
    fn gaussian_rate(&self, params: &PhysParams) -> f64 {
        let c = params.diffusivity();
        let (a, b) = self.ray_angles();
        let on = |phi: f64| (c * Complex64::from_polar(1.0, 2.0 * phi)).re;
        params.nu.min(on(a)).min(on(b))
    }

    /// Radial nodes and weights on `[0, r_max]`. Panels shrink near the poles
    /// of `1/(1 + e^{±2ikL})` on the real axis and where `e^{-ωt}` oscillates.
    pub fn radial_nodes(&self, params: &PhysParams, t: f64) -> Vec<(f64, f64)> {
        let l = params.length;
        let cabs = params.diffusivity().norm();
        let sin_min = self.min_sin();
        let r_gauss = (ENVELOPE_EXP / (self.gaussian_rate(params) * t)).sqrt();
        let d0 = PI / (2.0 * l) * sin_min;
        let (gx, gw) = gauss_legendre(self.n_quad);
        let mut out = Vec::new();
        let mut a = 0.0;
        while a < self.r_max {
            // past r_gauss the e^{-ωt} factors are negligible and only e^{ikx}-type
            // phases remain
            let omega = if a < r_gauss { 3.0 * l + 2.0 * cabs * r_gauss * t } else { 3.0 * l };
            let h = (2.0 * PI / omega).min(d0.max(a * sin_min)).min(self.r_max - a);
            for (x, w) in gx.iter().zip(&gw) {
                out.push((a + 0.5 * h * (x + 1.0), 0.5 * h * w));
            }
            a += h;
        }
        out
    }
}

/// Dirichlet datum `a(t)` at `x = 0` and Neumann datum `b(t)` at `x = L`,
/// sampled on a time grid. An empty record means homogeneous data.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundaryData {
    pub times: Vec<f64>,
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
}

impl BoundaryData {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn sampled(
        time: &TimeGrid,
        a: impl Fn(f64) -> Complex64,
        b: impl Fn(f64) -> Complex64,
    ) -> Self {
        let times = time.times();
        Self {
            a: times.iter().map(|&t| a(t)).collect(),
            b: times.iter().map(|&t| b(t)).collect(),
            times,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.a.iter().chain(&self.b).all(|z| *z == ZERO)
    }

    fn interp(&self, v: &[Complex64], t: f64) -> Complex64 {
        if v.is_empty() {
            return ZERO;
        }
        let j = self.times.partition_point(|&s| s <= t);
        if j == 0 {
            return v[0];
        }
        if j >= self.times.len() {
            return v[v.len() - 1];
        }
        let (t0, t1) = (self.times[j - 1], self.times[j]);
        v[j - 1] + (v[j] - v[j - 1]) * ((t - t0) / (t1 - t0))
    }

    pub fn a_at(&self, t: f64) -> Complex64 {
        self.interp(&self.a, t)
    }

    pub fn b_at(&self, t: f64) -> Complex64 {
        self.interp(&self.b, t)
    }
}

/// Space-time samples of the forcing, `values[[n, i]] = f(x_i, t_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Forcing {
    pub time: TimeGrid,
    pub values: Array2<Complex64>,
}

impl Forcing {
    pub fn sampled(grid: &Grid, time: &TimeGrid, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let ts = time.times();
        let values = Array2::from_shape_fn((time.n_t(), grid.n_x()), |(n, i)| f(grid.nodes()[i], ts[n]));
        Self { time: *time, values }
    }
}

/// Data of one open-loop problem; the `γ`-shift `w = e^{-γt} u` is applied
/// once at construction.
#[derive(Debug, Clone)]
pub struct UtmProblem {
    pub params: PhysParams,
    pub grid: Grid,
    pub u0: ComplexField,
    pub boundary: BoundaryData,
    pub forcing: Option<Forcing>,
    g0: Vec<Complex64>,
    h1: Vec<Complex64>,
}

/// Value of one point evaluation plus quadrature diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtmEvaluation {
    pub value: Complex64,
    /// Smallest `|1 + e^{±2ikL}|` met on the rays.
    pub min_denominator: f64,
    pub nodes_per_ray: usize,
}

impl UtmProblem {
    pub fn new(
        params: &PhysParams,
        grid: &Grid,
        u0: ComplexField,
        boundary: BoundaryData,
        forcing: Option<Forcing>,
    ) -> Result<Self> {
        grid.check_len(u0.len())?;
        if !params.is_linear() {
            return Err(Error::InvalidParams("the transform solution needs kappa = 0".into()));
        }
        if boundary.a.len() != boundary.times.len() || boundary.b.len() != boundary.times.len() {
            return Err(Error::Dimension {
                expected: boundary.times.len(),
                got: boundary.a.len().min(boundary.b.len()),
            });
        }
        if let Some(f) = &forcing {
            grid.check_len(f.values.ncols())?;
        }
        let shift = |v: &[Complex64]| -> Vec<Complex64> {
            v.iter()
                .zip(&boundary.times)
                .map(|(z, &t)| z * (-params.gamma * t).exp())
                .collect()
        };
        let g0 = shift(&boundary.a);
        let h1 = shift(&boundary.b);
        let forcing = forcing.map(|mut f| {
            for (n, mut row) in f.values.rows_mut().into_iter().enumerate() {
                let s = (-params.gamma * f.time.time(n)).exp();
                row.mapv_inplace(|z| z * s);
            }
            f
        });
        Ok(Self {
            params: *params,
            grid: grid.clone(),
            u0,
            boundary,
            forcing,
            g0,
            h1,
        })
    }

    pub fn has_boundary_data(&self) -> bool {
        !self.boundary.is_zero()
    }

    fn t_limit(&self) -> f64 {
        let mut lim = f64::INFINITY;
        if let Some(&tb) = self.boundary.times.last() {
            if self.has_boundary_data() {
                lim = tb;
            }
        }
        if let Some(f) = &self.forcing {
            lim = lim.min(f.time.t_max());
        }
        lim
    }

    /// `e^{-ωt} ∫ e^{ik(c0-y)} u0(y) dy + ∫_0^t e^{-ω(t-t')} ∫ e^{ik(c0-y)} f(y,t') dy dt'`.
    fn source(&self, k: Complex64, c0: f64, omega: Complex64, t: f64) -> Complex64 {
        let xs = self.grid.nodes();
        let u0 = self.u0.values().as_slice().expect("contiguous");
        let ik = I * k;
        let mut s = filon_affine(xs, u0, ik * c0 - omega * t, -ik);
        if let Some(f) = &self.forcing {
            let times = f.time.times();
            let inner: Vec<Complex64> = f
                .values
                .rows()
                .into_iter()
                .map(|row| filon_affine(xs, row.as_slice().expect("contiguous"), ik * c0, -ik))
                .collect();
            let (ts, vs) = truncate_samples(&times, &inner, t);
            s += filon_affine(&ts, &vs, -omega * t, omega);
        }
        s
    }

    fn damped(&self, v: &[Complex64], omega: Complex64, t: f64) -> Complex64 {
        if v.is_empty() {
            return ZERO;
        }
        let (ts, vs) = truncate_samples(&self.boundary.times, v, t);
        filon_affine(&ts, &vs, -omega * t, omega)
    }

    pub fn evaluate(&self, contour: &ContourSpec, x: f64, t: f64) -> Result<Complex64> {
        Ok(self.evaluate_detailed(contour, x, t)?.value)
    }

    pub fn evaluate_detailed(&self, contour: &ContourSpec, x: f64, t: f64) -> Result<UtmEvaluation> {
        let l = self.params.length;
        if !(x > 0.0 && x < l) {
            return Err(Error::Domain(format!("x = {x} outside (0, {l})")));
        }
        if !(t > 0.0 && t <= self.t_limit() * (1.0 + 1e-12)) {
            return Err(Error::Domain(format!("t = {t} outside (0, {}]", self.t_limit())));
        }
        let c = self.params.diffusivity();
        let nodes = contour.radial_nodes(&self.params, t);
        let (phi1, phi2) = contour.ray_angles();
        let boundary = self.has_boundary_data();
        let mut tot = ZERO;
        let mut min_den = f64::INFINITY;

        for &(r, w) in &nodes {
            for k in [Complex64::new(r, 0.0), Complex64::new(-r, 0.0)] {
                tot += w / (2.0 * PI) * self.source(k, x, c * k * k, t);
            }
            // upper half plane
            for (phi, sign) in [(phi1, 1.0), (phi2, -1.0)] {
                let e = Complex64::from_polar(1.0, phi);
                let k = r * e;
                let dk = sign * w * e;
                let omega = c * k * k;
                let s = 1.0 + (2.0 * I * k * l).exp();
                min_den = min_den.min(s.norm());
                let mut term = -(self.source(k, 2.0 * l + x, omega, t) + self.source(-k, -x, omega, t))
                    / (2.0 * PI);
                if boundary {
                    let h1 = self.damped(&self.h1, omega, t);
                    let g0 = self.damped(&self.g0, omega, t);
                    term -= c / PI
                        * ((I * k * (x + l)).exp() * h1 + I * k * (I * k * x).exp() * g0);
                }
                tot += dk * term / s;
            }
            // lower half plane
            for (phi, sign) in [(phi1 + PI, 1.0), (phi2 + PI, -1.0)] {
                let e = Complex64::from_polar(1.0, phi);
                let k = r * e;
                let dk = sign * w * e;
                let omega = c * k * k;
                let s = 1.0 + (-2.0 * I * k * l).exp();
                min_den = min_den.min(s.norm());
                let mut term = (self.source(k, x - 2.0 * l, omega, t)
                    - self.source(-k, 2.0 * l - x, omega, t))
                    / (2.0 * PI);
                if boundary {
                    let h1 = self.damped(&self.h1, omega, t);
                    let g0 = self.damped(&self.g0, omega, t);
                    term -= c / PI
                        * ((I * k * (x - l)).exp() * h1 + I * k * (I * k * (x - 2.0 * l)).exp() * g0);
                }
                tot += dk * term / s;
            }
        }
        if min_den < DENOMINATOR_FLOOR {
            return Err(Error::ContourSingularity(format!("min |1 + e^(2ikL)| = {min_den:.3e}")));
        }
        let value = finite(tot * (self.params.gamma * t).exp(), Complex64::new(x, t))?;
        Ok(UtmEvaluation {
            value,
            min_denominator: min_den,
            nodes_per_ray: nodes.len(),
        })
    }
}

/// Point evaluation with an adaptively truncated contour.
pub fn evaluate_solution(problem: &UtmProblem, x: f64, t: f64) -> Result<Complex64> {
    let contour = ContourSpec::adaptive(problem, x, t)?;
    problem.evaluate(&contour, x, t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossRow {
    pub x: f64,
    pub t: f64,
    pub u_fd: Complex64,
    pub u_utm: Complex64,
    /// `|u_fd - u_utm| / max |u_utm|` over the lattice.
    pub rel_err: f64,
}

/// Finite-difference vs transform solution on a sample lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCheckReport {
    pub rows: Vec<CrossRow>,
    /// `max |u_fd - u_utm| / max |u_utm|`, 0 when both vanish.
    pub discrepancy: f64,
}

impl CrossCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.discrepancy <= tol
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,t,re_u_fd,im_u_fd,re_u_utm,im_u_utm,rel_err")?;
        for r in &self.rows {
            writeln!(
                out,
                "{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.6e}",
                r.x, r.t, r.u_fd.re, r.u_fd.im, r.u_utm.re, r.u_utm.im, r.rel_err
            )?;
        }
        Ok(())
    }
}

/// Grid and time indices at which the two solutions are compared.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    pub x_indices: Vec<usize>,
    pub t_indices: Vec<usize>,
}

impl Lattice {
    /// `nx` interior nodes evenly spread over `(0, L)` and `nt` levels over `(0, T]`.
    pub fn uniform(grid: &Grid, time: &TimeGrid, nx: usize, nt: usize) -> Self {
        let n = grid.n_x() - 1;
        let m = time.n_t() - 1;
        let mut x_indices: Vec<usize> = (1..=nx).map(|i| (i * n) / (nx + 1)).filter(|&i| i > 0 && i < n).collect();
        x_indices.dedup();
        let mut t_indices: Vec<usize> = (1..=nt).map(|j| ((j * m) / nt).max(1)).collect();
        t_indices.dedup();
        Self { x_indices, t_indices }
    }
}

/// Runs the open-loop Crank–Nicolson scheme and compares it with the
/// transform solution on `lattice`.
pub fn cross_validate(
    params: &PhysParams,
    grid: &Grid,
    time: &TimeGrid,
    u0: &ComplexField,
    boundary: &BoundaryData,
    lattice: &Lattice,
) -> Result<CrossCheckReport> {
    let a = |t: f64| boundary.a_at(t);
    let b = |t: f64| boundary.b_at(t);
    let states = run_open_loop(params, grid, time, u0, &a, &b)?;
    let problem = UtmProblem::new(params, grid, u0.clone(), boundary.clone(), None)?;
    let mut rows = Vec::new();
    for &n in &lattice.t_indices {
        let t = time.time(n);
        for &i in &lattice.x_indices {
            let x = grid.nodes()[i];
            let u_utm = evaluate_solution(&problem, x, t)?;
            rows.push(CrossRow {
                x,
                t,
                u_fd: states[n][i],
                u_utm,
                rel_err: 0.0,
            });
        }
    }
    let scale = rows.iter().map(|r| r.u_utm.norm()).fold(0.0, f64::max);
    let mut discrepancy: f64 = 0.0;
    for r in &mut rows {
        let d = (r.u_fd - r.u_utm).norm();
        r.rel_err = if scale > 0.0 { d / scale } else if d == 0.0 { 0.0 } else { f64::INFINITY };
        discrepancy = discrepancy.max(r.rel_err);
    }
    Ok(CrossCheckReport { rows, discrepancy })
}

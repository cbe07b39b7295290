//! Backstepping kernel `k(x, y; μ)` on the triangle `0 ≤ y ≤ x ≤ L`.
//!
//! The kernel solves `(ν + iα)(k_xx - k_yy) + μ k = 0` with `k(x, 0) = 0` and
//! `k(x, x) = -μx / (2(ν + iα))`. It is evaluated from the power series
//!
//! ```text
//! k(x, y) = -μy/(2c) Σ_m (-μ/(4c))^m (x² - y²)^m / (m! (m+1)!),   c = ν + iα
//! ```
//!
//! whose terms are generated by a multiplicative recurrence so that no
//! factorial is ever formed.

use std::io::Write;

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::discretization::{Grid, PhysParams};
use crate::error::{Error, Result};

/// Largest truncation order tried by [`choose_truncation`].
pub const MAX_TRUNCATION: usize = 200;

/// Relative tolerance on the first neglected series term.
pub const TRUNCATION_TOL: f64 = 1e-16;

/// Truncated kernel sampled on the grid triangle, plus the derivative trace
/// `k_x(L, y_j)`.
#[derive(Debug, Clone)]
pub struct KernelTable {
    pub m_trunc: usize,
    /// `values[[i, j]] = k^M(x_i, y_j)` for `j ≤ i`, zero above the diagonal.
    pub values: Array2<Complex64>,
    pub deriv_trace: Array1<Complex64>,
    pub mu: f64,
    pub nu: f64,
    pub alpha: f64,
}

/// Ratio `-μ / (4(ν + iα))` between consecutive series coefficients.
fn series_ratio(params: &PhysParams) -> Complex64 {
    -params.mu / (4.0 * params.diffusivity())
}

fn prefactor(params: &PhysParams, y: f64) -> Complex64 {
    -params.mu * y / (2.0 * params.diffusivity())
}

/// Partial sum `Σ_{m=0}^{M} r^m z^m / (m!(m+1)!)` with `z = x² - y²`.
fn series_sum(ratio: Complex64, z: f64, m_trunc: usize) -> Complex64 {
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    for m in 0..m_trunc {
        term *= ratio * z / (((m + 1) * (m + 2)) as f64);
        sum += term;
    }
    sum
}

/// Partial sum of the x-derivative of the series at `x`:
/// `Σ_{m=1}^{M} r^m · m·2x·z^{m-1} / (m!(m+1)!)`.
fn series_dx_sum(ratio: Complex64, x: f64, z: f64, m_trunc: usize) -> Complex64 {
    if m_trunc == 0 {
        return Complex64::new(0.0, 0.0);
    }
    // c_m = r^m z^{m-1} / (m!(m+1)!), starting at c_1 = r/2
    let mut c = ratio / 2.0;
    let mut sum = c * 2.0 * x;
    for m in 1..m_trunc {
        c *= ratio * z / (((m + 1) * (m + 2)) as f64);
        sum += c * ((m + 1) as f64) * 2.0 * x;
    }
    sum
}

/// Truncated kernel `k^M(x, y)`.
pub fn kernel_value(x: f64, y: f64, params: &PhysParams, m_trunc: usize) -> Result<Complex64> {
    let slack = 1e-12 * params.length.max(1.0);
    if !(y >= -slack && y <= x + slack && x <= params.length + slack) {
        return Err(Error::Domain(format!(
            "({x}, {y}) lies outside the triangle 0 <= y <= x <= {}",
            params.length
        )));
    }
    let y = y.clamp(0.0, x);
    Ok(prefactor(params, y) * series_sum(series_ratio(params), x * x - y * y, m_trunc))
}

/// Smallest truncation order whose first neglected term is below
/// `1e-16·(1 + max|k^M|)` on every grid node of the triangle.
pub fn choose_truncation(params: &PhysParams, grid: &Grid) -> Result<usize> {
    if params.mu == 0.0 {
        return Ok(0);
    }
    let ratio = series_ratio(params);
    let x = grid.nodes();
    let n = grid.n_x();
    // per-node current term (including prefactor) and partial sum
    let mut terms = Vec::with_capacity(n * (n + 1) / 2);
    let mut z = Vec::with_capacity(terms.capacity());
    for i in 0..n {
        for j in 0..=i {
            terms.push(prefactor(params, x[j]));
            z.push(x[i] * x[i] - x[j] * x[j]);
        }
    }
    let mut sums = terms.clone();
    for m in 0..MAX_TRUNCATION {
        let mut max_next = 0.0f64;
        let mut max_k = 0.0f64;
        for ((t, s), &zz) in terms.iter_mut().zip(sums.iter_mut()).zip(&z) {
            max_k = max_k.max(s.norm());
            *t *= ratio * zz / (((m + 1) * (m + 2)) as f64);
            let tn = t.norm();
            if !tn.is_finite() {
                return Err(Error::KernelNonConvergence {
                    cap: MAX_TRUNCATION,
                });
            }
            max_next = max_next.max(tn);
            *s += *t;
        }
        if max_next < TRUNCATION_TOL * (1.0 + max_k) {
            return Ok(m);
        }
    }
    Err(Error::KernelNonConvergence {
        cap: MAX_TRUNCATION,
    })
}

/// `k_x(L, y_j)` by term-wise differentiation of the truncated series.
pub fn kernel_deriv_trace(params: &PhysParams, grid: &Grid, m_trunc: usize) -> Array1<Complex64> {
    let ratio = series_ratio(params);
    let l = grid.length();
    grid.nodes()
        .iter()
        .map(|&y| prefactor(params, y) * series_dx_sum(ratio, l, l * l - y * y, m_trunc))
        .collect()
}

impl KernelTable {
    /// Builds the table with the automatically chosen truncation order.
    pub fn build(params: &PhysParams, grid: &Grid) -> Result<Self> {
        let m = choose_truncation(params, grid)?;
        Ok(Self::with_truncation(params, grid, m))
    }

    pub fn with_truncation(params: &PhysParams, grid: &Grid, m_trunc: usize) -> Self {
        let n = grid.n_x();
        let x = grid.nodes();
        let ratio = series_ratio(params);
        let mut values = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                values[[i, j]] =
                    prefactor(params, x[j]) * series_sum(ratio, x[i] * x[i] - x[j] * x[j], m_trunc);
            }
        }
        Self {
            m_trunc,
            values,
            deriv_trace: kernel_deriv_trace(params, grid, m_trunc),
            mu: params.mu,
            nu: params.nu,
            alpha: params.alpha,
        }
    }

    pub fn n_x(&self) -> usize {
        self.values.nrows()
    }

    /// Writes `i,j,x_i,y_j,re,im` for every stored triangle entry (1-based indices).
    pub fn write_csv<W: Write>(&self, grid: &Grid, mut out: W) -> Result<()> {
        grid.check_len(self.n_x())?;
        writeln!(out, "i,j,x_i,y_j,re_k,im_k")?;
        let x = grid.nodes();
        for i in 0..self.n_x() {
            for j in 0..=i {
                let k = self.values[[i, j]];
                writeln!(out, "{},{},{:.17e},{:.17e},{:.17e},{:.17e}", i + 1, j + 1, x[i], x[j], k.re, k.im)?;
            }
        }
        Ok(())
    }
}

/// Max over interior triangle nodes of `|(ν+iα)(D_xx k - D_yy k) + μk|` with
/// centered second differences. Nodes within two cells of `y = 0` or `y = x`
/// are skipped.
pub fn kernel_residual(table: &KernelTable, grid: &Grid, params: &PhysParams) -> Result<f64> {
    let n = grid.n_x();
    grid.check_len(table.n_x())?;
    if n < 5 {
        return Err(Error::Domain(format!("kernel residual needs n_x >= 5, got {n}")));
    }
    let h2 = grid.dx() * grid.dx();
    let c = params.diffusivity();
    let k = &table.values;
    let mut worst: Option<f64> = None;
    for i in 4..n - 1 {
        for j in 2..=i - 2 {
            let dxx = (k[[i + 1, j]] - 2.0 * k[[i, j]] + k[[i - 1, j]]) / h2;
            let dyy = (k[[i, j + 1]] - 2.0 * k[[i, j]] + k[[i, j - 1]]) / h2;
            let r = (c * (dxx - dyy) + params.mu * k[[i, j]]).norm();
            worst = Some(worst.map_or(r, |w: f64| w.max(r)));
        }
    }
    worst.ok_or_else(|| Error::Domain(format!("no interior triangle nodes on a grid with n_x = {n}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(mu: f64, nu: f64, alpha: f64) -> PhysParams {
        PhysParams {
            mu,
            nu,
            alpha,
            ..PhysParams::experiment1()
        }
    }

    #[test]
    fn zero_mu_gives_zero_kernel() {
        let p = params(0.0, 1.0, 3.0);
        let g = Grid::new(21, 1.0).unwrap();
        assert_eq!(choose_truncation(&p, &g).unwrap(), 0);
        assert_eq!(kernel_value(0.7, 0.3, &p, 10).unwrap(), Complex64::new(0.0, 0.0));
        let t = KernelTable::build(&p, &g).unwrap();
        assert!(t.values.iter().all(|z| z.norm() == 0.0));
        assert!(t.deriv_trace.iter().all(|z| z.norm() == 0.0));
        assert_eq!(kernel_residual(&t, &g, &p).unwrap(), 0.0);
    }

    #[test]
    fn edge_y_zero_vanishes() {
        let p = PhysParams::experiment1();
        for x in [0.0, 0.3, 1.0] {
            assert_eq!(kernel_value(x, 0.0, &p, 30).unwrap().norm(), 0.0);
        }
    }

    #[test]
    fn diagonal_value_experiment1() {
        let p = PhysParams::experiment1();
        let k = kernel_value(1.0, 1.0, &p, 40).unwrap();
        assert!((k - Complex64::new(-3.0, 9.0)).norm() < 1e-13);
    }

    #[test]
    fn outside_triangle_is_rejected() {
        let p = PhysParams::experiment1();
        assert!(matches!(kernel_value(0.3, 0.5, &p, 5), Err(Error::Domain(_))));
        assert!(kernel_value(1.5, 0.5, &p, 5).is_err());
        assert!(kernel_value(0.5, -0.1, &p, 5).is_err());
    }

    /// Magnitude bound of the m-th term: (μ/(4|c|))^m / (m!(m+1)!) times max (x²-y²)^m ≤ L^{2m}.
    fn oracle_order(mu: f64, c_abs: f64, l: f64) -> usize {
        let mut term = 1.0f64;
        let mut m = 0;
        while term >= 1e-16 {
            term *= mu / (4.0 * c_abs) * l * l / (((m + 1) * (m + 2)) as f64);
            m += 1;
        }
        m
    }

    #[test]
    fn truncation_orders() {
        let g = Grid::new(101, 1.0).unwrap();
        let m1 = choose_truncation(&PhysParams::experiment1(), &g).unwrap();
        let bound1 = oracle_order(60.0, 10f64.sqrt(), 1.0);
        assert!(m1 <= 60 && m1 <= bound1, "m1 = {m1}, bound {bound1}");
        let m2 = choose_truncation(&params(12.0, 1.0, 1.0), &g).unwrap();
        assert!(m2 < m1, "m2 = {m2}, m1 = {m1}");
        assert!(m2 <= oracle_order(12.0, 2f64.sqrt(), 1.0));
    }

    #[test]
    fn truncation_cap_reports_nonconvergence() {
        let p = PhysParams {
            mu: 1e7,
            length: 5.0,
            ..PhysParams::experiment1()
        };
        let g = Grid::new(11, 5.0).unwrap();
        assert!(matches!(
            choose_truncation(&p, &g),
            Err(Error::KernelNonConvergence { cap: MAX_TRUNCATION })
        ));
    }

    #[test]
    fn boundary_conditions_hold() {
        for p in [PhysParams::experiment1(), PhysParams::experiment2()] {
            let g = Grid::new(101, 1.0).unwrap();
            let t = KernelTable::build(&p, &g).unwrap();
            for i in 0..g.n_x() {
                assert_eq!(t.values[[i, 0]].norm(), 0.0);
                let x = g.nodes()[i];
                let diag = -p.mu * x / (2.0 * p.diffusivity());
                assert!((t.values[[i, i]] - diag).norm() <= 1e-12 * diag.norm().max(1e-300));
            }
        }
    }

    /// Independent series evaluation without domain checks, used with
    /// one-sided differencing in x.
    fn series_unchecked(x: f64, y: f64, p: &PhysParams) -> Complex64 {
        let c = p.diffusivity();
        let mut sum = Complex64::new(0.0, 0.0);
        let mut fact = 1.0f64;
        for m in 0..80usize {
            if m > 0 {
                fact *= (m * (m + 1)) as f64;
            }
            sum += (-p.mu / (4.0 * c)).powu(m as u32) * (x * x - y * y).powi(m as i32) / fact;
        }
        -p.mu * y / (2.0 * c) * sum
    }

    #[test]
    fn deriv_trace_matches_finite_difference() {
        let p = PhysParams::experiment1();
        let g = Grid::new(101, 1.0).unwrap();
        let m = choose_truncation(&p, &g).unwrap();
        let trace = kernel_deriv_trace(&p, &g, m);
        assert_eq!(trace[0].norm(), 0.0);
        let h = 1e-5;
        for (j, &y) in g.nodes().iter().enumerate().step_by(10) {
            let fd = (3.0 * series_unchecked(1.0, y, &p) - 4.0 * series_unchecked(1.0 - h, y, &p)
                + series_unchecked(1.0 - 2.0 * h, y, &p))
                / (2.0 * h);
            let scale = fd.norm().max(1.0);
            assert!((trace[j] - fd).norm() / scale < 1e-6, "j={j} {} vs {}", trace[j], fd);
        }
    }

    #[test]
    fn terms_eventually_decrease() {
        let p = PhysParams::experiment1();
        let r = series_ratio(&p).norm();
        let mut mags = vec![1.0f64];
        for m in 0..60 {
            let last = *mags.last().unwrap();
            mags.push(last * r / (((m + 1) * (m + 2)) as f64));
        }
        let peak = mags
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!(mags[peak..].windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn kernel_is_lipschitz_on_triangle() {
        let p = PhysParams::experiment1();
        let n = 60;
        let h = 1.0 / n as f64;
        let mut worst = 0.0f64;
        for i in 0..=n {
            for j in 0..i {
                let (x, y) = (i as f64 * h, j as f64 * h);
                let k0 = kernel_value(x, y, &p, 40).unwrap();
                let kx = kernel_value(x + h.min(1.0 - x), y, &p, 40).unwrap();
                let ky = kernel_value(x, y + h, &p, 40).unwrap();
                worst = worst.max((kx - k0).norm() / h).max((ky - k0).norm() / h);
            }
        }
        // |∇k| ≤ C uniformly; the series gives C well below 100 for these parameters
        assert!(worst.is_finite() && worst < 100.0, "{worst}");
    }

    #[test]
    fn residual_needs_fine_enough_grid() {
        let p = PhysParams::experiment1();
        let g = Grid::new(4, 1.0).unwrap();
        let t = KernelTable::build(&p, &g).unwrap();
        assert!(kernel_residual(&t, &g, &p).is_err());
    }

    #[test]
    fn csv_dump_has_triangle_rows() {
        let p = PhysParams::experiment2();
        let g = Grid::new(5, 1.0).unwrap();
        let t = KernelTable::build(&p, &g).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&g, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 15);
        assert!(text.starts_with("i,j,x_i,y_j,re_k,im_k"));
    }
}

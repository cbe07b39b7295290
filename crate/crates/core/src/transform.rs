//! Discrete eigenbasis, projection `P_N`, Volterra operator `K`, the forward
//! transform `T_N = I + K P_N` and its inverse `I - Υ_N`.
//!
//! `Υ_N` is built by the N-step recursion
//!
//! ```text
//! Υ_0 = 0
//! Υ_j φ = (I - Υ_{j-1}) K P_j φ
//!         - ⟨(I - Υ_{j-1}) K P_j φ, e_j⟩ / d_j · (I - Υ_{j-1}) K e_j
//! d_j   = 1 + ⟨(I - Υ_{j-1}) K e_j, e_j⟩
//! ```
//!
//! Every `Υ_j` has the form `U_j R_j` with `R_j = E_jᵀ Q` (the first `j`
//! weighted basis rows), so the recursion is carried out on the `n_x × j`
//! factor `U_j` and the dense matrix is formed once at the end.

use std::fmt::Write as _;
use std::io::Write;

use ndarray::{s, Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::discretization::{mode_eigenvalue, ComplexField, Grid, PhysParams};
use crate::error::{Error, Result};
use crate::kernel::KernelTable;

/// Recursion denominators with modulus at or below this are treated as zero.
pub const ADMISSIBILITY_FLOOR: f64 = 1e-10;

/// Quadrature used for the discrete inner product `⟨f, e_j⟩` inside `P_N` and
/// the recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// `P = W Wᵀ Q` with the trapezoid weight matrix `Q`.
    #[default]
    Trapezoid,
    /// Literal `P = W Wᵀ`, unit weights.
    Unweighted,
}

impl Weighting {
    pub fn weights(self, grid: &Grid) -> Array1<f64> {
        match self {
            Weighting::Trapezoid => grid.trapezoid_weights(),
            Weighting::Unweighted => Array1::ones(grid.n_x()),
        }
    }
}

/// First `N` Dirichlet–Neumann eigenfunctions `e_j(x) = √(2/L) sin((2j-1)πx/(2L))`
/// sampled on the grid.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    pub n_modes: usize,
    /// `e_matrix[[i, j-1]] = e_j(x_i)`.
    pub e_matrix: Array2<f64>,
    pub lambdas: Vec<f64>,
}

pub fn mode_fn(j: usize, length: f64) -> impl Fn(f64) -> f64 {
    let amp = (2.0 / length).sqrt();
    let freq = ((2 * j) as f64 - 1.0) * std::f64::consts::PI / (2.0 * length);
    move |x| amp * (freq * x).sin()
}

impl EigenBasis {
    pub fn new(n_modes: usize, grid: &Grid) -> Result<Self> {
        // 2N-1 quarter-wavelengths on [0, L]; require >= 8 nodes per wavelength
        if 2 * n_modes > (grid.n_x() - 1) / 2 + 1 {
            return Err(Error::Resolution {
                mode: n_modes,
                n_x: grid.n_x(),
            });
        }
        let l = grid.length();
        let mut e_matrix = Array2::zeros((grid.n_x(), n_modes));
        for j in 1..=n_modes {
            let e = mode_fn(j, l);
            for (i, &x) in grid.nodes().iter().enumerate() {
                e_matrix[[i, j - 1]] = e(x);
            }
        }
        Ok(Self {
            n_modes,
            e_matrix,
            lambdas: (1..=n_modes).map(|j| mode_eigenvalue(j, l)).collect(),
        })
    }

    pub fn mode(&self, j: usize) -> ComplexField {
        ComplexField::from(self.e_matrix.column(j - 1).mapv(|v| Complex64::new(v, 0.0)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    K,
    PN,
    Upsilon,
    Gamma,
    TN,
    TNinv,
}

/// Dense complex `n_x × n_x` operator.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub entries: Array2<Complex64>,
    pub kind: OperatorKind,
}

impl OperatorMatrix {
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn apply(&self, f: &ComplexField) -> Result<ComplexField> {
        if f.len() != self.n() {
            return Err(Error::Dimension {
                expected: self.n(),
                got: f.len(),
            });
        }
        Ok(ComplexField::from(self.entries.dot(f.values())))
    }

    pub fn identity_minus(&self, kind: OperatorKind) -> OperatorMatrix {
        let mut entries = self.entries.mapv(|z| -z);
        for i in 0..self.n() {
            entries[[i, i]] += 1.0;
        }
        OperatorMatrix { entries, kind }
    }

    pub fn compose(&self, rhs: &OperatorMatrix, kind: OperatorKind) -> OperatorMatrix {
        OperatorMatrix {
            entries: self.entries.dot(&rhs.entries),
            kind,
        }
    }
}

/// Trapezoid discretization of `(Kφ)(x_i) = ∫_0^{x_i} k(x_i, y) φ(y) dy`.
pub fn build_k_matrix(table: &KernelTable, grid: &Grid) -> Result<OperatorMatrix> {
    grid.check_len(table.n_x())?;
    let dx = grid.dx();
    let n = grid.n_x();
    let mut entries = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..i {
            entries[[i, j]] = dx * table.values[[i, j]];
        }
        entries[[i, i]] = 0.5 * dx * table.values[[i, i]];
    }
    Ok(OperatorMatrix {
        entries,
        kind: OperatorKind::K,
    })
}

/// `P = W Wᵀ Q`.
pub fn build_projection(basis: &EigenBasis, grid: &Grid, weighting: Weighting) -> OperatorMatrix {
    let q = weighting.weights(grid);
    let w = &basis.e_matrix;
    let wq = &w.t() * &q; // N × n_x, columns scaled by q
    OperatorMatrix {
        entries: w.dot(&wq).mapv(|v| Complex64::new(v, 0.0)),
        kind: OperatorKind::PN,
    }
}

/// Outcome of running the recursion as far as it goes.
struct Recursion {
    /// `U_j`, `n_x × j`.
    factor: Array2<Complex64>,
    denominators: Vec<Complex64>,
    failed_at: Option<usize>,
}

fn run_recursion(kmat: &OperatorMatrix, basis: &EigenBasis, q: &Array1<f64>) -> Recursion {
    let n = kmat.n();
    let e = basis.e_matrix.mapv(|v| Complex64::new(v, 0.0));
    // weighted rows r_j = q ∘ e_j, stored as N × n_x
    let r = (&basis.e_matrix.t() * q).mapv(|v| Complex64::new(v, 0.0));
    let ke = kmat.entries.dot(&e);
    let mut factor: Array2<Complex64> = Array2::zeros((n, 0));
    let mut denominators = Vec::with_capacity(basis.n_modes);
    for j in 1..=basis.n_modes {
        // C' = (I - U_{j-1} R_{j-1}) K E_j
        let c = ke.slice(s![.., ..j]).to_owned();
        let c = if j > 1 {
            let rc = r.slice(s![..j - 1, ..]).dot(&c);
            &c - &factor.dot(&rc)
        } else {
            c
        };
        let v = c.column(j - 1).to_owned();
        let rj = r.row(j - 1);
        let d = Complex64::new(1.0, 0.0) + rj.dot(&v);
        denominators.push(d);
        if d.norm() <= ADMISSIBILITY_FLOOR {
            return Recursion {
                factor,
                denominators,
                failed_at: Some(j),
            };
        }
        let srow = rj.dot(&c); // length j
        let mut u = c;
        for m in 0..j {
            let coef = srow[m] / d;
            u.column_mut(m).scaled_add(-coef, &v);
        }
        factor = u;
    }
    Recursion {
        factor,
        denominators,
        failed_at: None,
    }
}

/// Dense `Υ_N` and the recursion denominators `d_1 … d_N`.
pub fn build_upsilon(
    kmat: &OperatorMatrix,
    basis: &EigenBasis,
    grid: &Grid,
    weighting: Weighting,
) -> Result<(OperatorMatrix, Vec<Complex64>)> {
    grid.check_len(kmat.n())?;
    let q = weighting.weights(grid);
    let rec = run_recursion(kmat, basis, &q);
    if let Some(j) = rec.failed_at {
        let d = rec.denominators[j - 1];
        return Err(Error::Inadmissible { j, re: d.re, im: d.im });
    }
    let r = (&basis.e_matrix.t() * &q).mapv(|v| Complex64::new(v, 0.0));
    Ok((
        OperatorMatrix {
            entries: rec.factor.dot(&r),
            kind: OperatorKind::Upsilon,
        },
        rec.denominators,
    ))
}

/// Applies `Υ_N` to a single field by evaluating the recursion literally,
/// without forming any matrix beyond `K`. Cost grows like `2^N`.
pub fn upsilon_apply_recursive(
    kmat: &OperatorMatrix,
    basis: &EigenBasis,
    grid: &Grid,
    weighting: Weighting,
    phi: &ComplexField,
) -> Result<ComplexField> {
    grid.check_len(phi.len())?;
    let q = weighting.weights(grid);
    let inner = |f: &Array1<Complex64>, j: usize| -> Complex64 {
        f.iter()
            .zip(basis.e_matrix.column(j - 1))
            .zip(&q)
            .map(|((z, &e), &w)| z * e * w)
            .sum()
    };
    let project = |f: &Array1<Complex64>, j: usize| -> Array1<Complex64> {
        let mut out = Array1::zeros(f.len());
        for m in 1..=j {
            let c = inner(f, m);
            out.zip_mut_with(&basis.e_matrix.column(m - 1), |o, &e| *o += c * e);
        }
        out
    };
    // (I - Υ_j) f
    fn id_minus(
        j: usize,
        f: &Array1<Complex64>,
        ups: &dyn Fn(usize, &Array1<Complex64>) -> Result<Array1<Complex64>>,
    ) -> Result<Array1<Complex64>> {
        if j == 0 {
            return Ok(f.clone());
        }
        Ok(f - &ups(j, f)?)
    }
    fn ups_rec(
        j: usize,
        f: &Array1<Complex64>,
        k: &Array2<Complex64>,
        basis: &EigenBasis,
        inner: &dyn Fn(&Array1<Complex64>, usize) -> Complex64,
        project: &dyn Fn(&Array1<Complex64>, usize) -> Array1<Complex64>,
    ) -> Result<Array1<Complex64>> {
        if j == 0 {
            return Ok(Array1::zeros(f.len()));
        }
        let prev = |m: usize, g: &Array1<Complex64>| ups_rec(m, g, k, basis, inner, project);
        let a = id_minus(j - 1, &k.dot(&project(f, j)), &prev)?;
        let ej = basis.e_matrix.column(j - 1).mapv(|v| Complex64::new(v, 0.0));
        let b = id_minus(j - 1, &k.dot(&ej), &prev)?;
        let d = Complex64::new(1.0, 0.0) + inner(&b, j);
        if d.norm() <= ADMISSIBILITY_FLOOR {
            return Err(Error::Inadmissible { j, re: d.re, im: d.im });
        }
        let coef = inner(&a, j) / d;
        Ok(&a - &b.mapv(|z| z * coef))
    }
    let out = ups_rec(basis.n_modes, phi.values(), &kmat.entries, basis, &inner, &project)?;
    Ok(ComplexField::from(out))
}

/// `u = w + K P w`.
pub fn forward_transform(
    kmat: &OperatorMatrix,
    proj: &OperatorMatrix,
    w: &ComplexField,
) -> Result<ComplexField> {
    if kmat.n() != proj.n() {
        return Err(Error::Dimension {
            expected: kmat.n(),
            got: proj.n(),
        });
    }
    let pw = proj.apply(w)?;
    let kpw = kmat.apply(&pw)?;
    Ok(ComplexField::from(w.values() + kpw.values()))
}

/// Everything needed to move between plant and target coordinates.
#[derive(Debug, Clone)]
pub struct BacksteppingTransform {
    pub kernel: KernelTable,
    pub basis: EigenBasis,
    pub k_matrix: OperatorMatrix,
    pub projection: OperatorMatrix,
    pub upsilon: OperatorMatrix,
    pub denominators: Vec<Complex64>,
    pub weighting: Weighting,
}

impl BacksteppingTransform {
    pub fn new(params: &PhysParams, grid: &Grid, weighting: Weighting) -> Result<Self> {
        let kernel = KernelTable::build(params, grid)?;
        let basis = EigenBasis::new(params.n_modes, grid)?;
        let k_matrix = build_k_matrix(&kernel, grid)?;
        let projection = build_projection(&basis, grid, weighting);
        let (upsilon, denominators) = build_upsilon(&k_matrix, &basis, grid, weighting)?;
        Ok(Self {
            kernel,
            basis,
            k_matrix,
            projection,
            upsilon,
            denominators,
            weighting,
        })
    }

    /// Dense `T_N = I + K P_N`.
    pub fn forward_matrix(&self) -> OperatorMatrix {
        let kp = self.k_matrix.compose(&self.projection, OperatorKind::TN);
        let mut entries = kp.entries;
        for i in 0..entries.nrows() {
            entries[[i, i]] += 1.0;
        }
        OperatorMatrix {
            entries,
            kind: OperatorKind::TN,
        }
    }

    /// Dense `T_N^{-1} = I - Υ_N`.
    pub fn inverse_matrix(&self) -> OperatorMatrix {
        self.upsilon.identity_minus(OperatorKind::TNinv)
    }

    pub fn forward(&self, w: &ComplexField) -> Result<ComplexField> {
        forward_transform(&self.k_matrix, &self.projection, w)
    }

    pub fn inverse(&self, u: &ComplexField) -> Result<ComplexField> {
        let yu = self.upsilon.apply(u)?;
        Ok(ComplexField::from(u.values() - yu.values()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenominatorEntry {
    pub j: usize,
    pub d: Complex64,
    pub admissible: bool,
}

/// Per-mode recursion denominators and the overall verdict for `(μ, N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub mu: f64,
    pub n_modes: usize,
    pub entries: Vec<DenominatorEntry>,
    pub admissible: bool,
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "admissible"
    } else {
        "inadmissible"
    }
}

impl AdmissibilityReport {
    pub fn min_abs(&self) -> f64 {
        self.entries.iter().map(|e| e.d.norm()).fold(f64::INFINITY, f64::min)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "admissibility of (mu = {}, N = {})", self.mu, self.n_modes);
        let _ = writeln!(s, "{:>3}  {:>12}  {:>12}  {:>12}  verdict", "j", "Re d_j", "Im d_j", "|d_j|");
        for e in &self.entries {
            let _ = writeln!(
                s,
                "{:>3}  {:>12.6}  {:>12.6}  {:>12.6}  {}",
                e.j,
                e.d.re,
                e.d.im,
                e.d.norm(),
                verdict(e.admissible)
            );
        }
        if self.entries.len() < self.n_modes {
            let _ = writeln!(s, "recursion stopped at j = {}", self.entries.len());
        }
        let _ = writeln!(s, "overall: {}", verdict(self.admissible));
        s
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "j,re_d,im_d,abs_d,verdict")?;
        for e in &self.entries {
            writeln!(
                out,
                "{},{:.17e},{:.17e},{:.17e},{}",
                e.j,
                e.d.re,
                e.d.im,
                e.d.norm(),
                verdict(e.admissible)
            )?;
        }
        Ok(())
    }
}

/// Runs the recursion for `(params.mu, params.n_modes)` and tabulates the
/// denominators. An inadmissible pair is a verdict, not an error.
pub fn admissibility_report(params: &PhysParams, grid: &Grid) -> Result<AdmissibilityReport> {
    admissibility_report_with(params, grid, Weighting::Trapezoid)
}

pub fn admissibility_report_with(
    params: &PhysParams,
    grid: &Grid,
    weighting: Weighting,
) -> Result<AdmissibilityReport> {
    let kernel = KernelTable::build(params, grid)?;
    let basis = EigenBasis::new(params.n_modes, grid)?;
    let kmat = build_k_matrix(&kernel, grid)?;
    let rec = run_recursion(&kmat, &basis, &weighting.weights(grid));
    let entries: Vec<DenominatorEntry> = rec
        .denominators
        .iter()
        .enumerate()
        .map(|(i, &d)| DenominatorEntry {
            j: i + 1,
            d,
            admissible: d.norm() > ADMISSIBILITY_FLOOR,
        })
        .collect();
    Ok(AdmissibilityReport {
        mu: params.mu,
        n_modes: params.n_modes,
        admissible: rec.failed_at.is_none(),
        entries,
    })
}

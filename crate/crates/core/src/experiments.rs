//! Config-driven drivers behind the `cglctl` subcommands. Every driver writes
//! its artifacts into the configured output directory; CSV files start with a
//! `# config_hash=<sha256>` line.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{poly, ExperimentConfig, Plant};
use crate::controller::{
    eta_rapid, minimal_mode_plan, rapid_mode_count, rapid_threshold, ControlLaw, PlanMode, RatePlan,
};
use crate::discretization::{derivative, mode_eigenvalue, norm_l2, ComplexField, Grid, PhysParams};
use crate::error::{Error, Result};
use crate::kernel::{kernel_residual, KernelTable};
use crate::solver::{fit_decay_rate, fit_decay_rate_l2, run, RunRecord, StepOptions};
use crate::transform::{admissibility_report_with, AdmissibilityReport, BacksteppingTransform};
use crate::utm::{cross_validate, BoundaryData, CrossCheckReport, Lattice};

pub const DEFAULT_OUT_DIR: &str = "out";

struct Artifacts {
    dir: PathBuf,
    hash: String,
}

impl Artifacts {
    fn open(cfg: &ExperimentConfig) -> Result<Self> {
        let dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, hash: cfg.hash()? })
    }

    fn csv(&self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let mut w = BufWriter::new(File::create(self.dir.join(name))?);
        writeln!(w, "# config_hash={}", self.hash)?;
        body(&mut w)?;
        w.flush()?;
        Ok(())
    }

    fn text(&self, name: &str, body: &str) -> Result<()> {
        fs::write(self.dir.join(name), body)?;
        Ok(())
    }
}

fn first_failure(report: &AdmissibilityReport) -> Error {
    let e = report
        .entries
        .iter()
        .find(|e| !e.admissible)
        .or(report.entries.last())
        .expect("recursion yields at least one denominator");
    Error::Inadmissible {
        j: e.j,
        re: e.d.re,
        im: e.d.im,
    }
}

fn plan_text(label: &str, plan: &Result<RatePlan>) -> String {
    match plan {
        Ok(p) => format!("[{label}]\n{p}\n"),
        Err(e) => format!("[{label}]\nunavailable: {e}\n"),
    }
}

/// Both rate plans for the configured `μ`, as written to `rateplan.txt`.
pub fn rate_plan_report(params: &PhysParams) -> String {
    let mut s = plan_text("rapid", &rapid_mode_count(params));
    s.push('\n');
    s.push_str(&plan_text("minimal", &minimal_mode_plan(params)));
    s
}

/// Decay rate guaranteed for the configured `(μ, N)` under `mode`.
pub fn configured_eta(params: &PhysParams, mode: PlanMode) -> Result<f64> {
    match mode {
        PlanMode::Rapid => {
            let plan = rapid_mode_count(params)?;
            if (params.n_modes as f64) <= rapid_threshold(params, params.mu) {
                return Err(Error::Config(format!(
                    "n_modes = {} is too small for the rapid plan, which needs N >= {}",
                    params.n_modes, plan.n_modes
                )));
            }
            Ok(eta_rapid(params, params.mu, params.n_modes))
        }
        PlanMode::Minimal => {
            let plan = minimal_mode_plan(params)?;
            if params.n_modes != plan.n_modes {
                return Err(Error::Config(format!(
                    "n_modes = {} but the minimal plan uses N = M = {}",
                    params.n_modes, plan.n_modes
                )));
            }
            Ok(plan.eta)
        }
    }
}

/// Largest relative change of the H¹ norm over the last tenth of the run.
pub fn last_decile_drift(record: &RunRecord) -> f64 {
    let h = &record.h1_history;
    let start = h.len() - h.len().div_ceil(10);
    let tail = &h[start..];
    let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
    if hi > 0.0 {
        (hi - lo) / hi
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub record: RunRecord,
    pub admissibility: Option<AdmissibilityReport>,
    pub predicted_eta: Option<f64>,
    pub fitted_rate: Option<f64>,
    pub summary: String,
}

/// Builds kernel, transform and law (unless uncontrolled), runs the plant and
/// writes `rateplan.txt`, `admissibility.{txt,csv}`, `norms.csv`,
/// `final_state.csv` and `summary.txt`.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let out = Artifacts::open(cfg)?;
    let grid = cfg.grid()?;
    let time = cfg.time_grid()?;
    let params = cfg.params;
    out.text("rateplan.txt", &rate_plan_report(&params))?;

    let mut admissibility = None;
    let mut eta = None;
    let law = if cfg.plant == Plant::Uncontrolled {
        None
    } else {
        let report = admissibility_report_with(&params, &grid, cfg.weighting)?;
        out.text("admissibility.txt", &report.to_text())?;
        out.csv("admissibility.csv", |w| report.write_csv(w))?;
        if !report.admissible {
            return Err(first_failure(&report));
        }
        admissibility = Some(report);
        eta = Some(configured_eta(&params, cfg.rate_plan)?);
        let transform = BacksteppingTransform::new(&params, &grid, cfg.weighting)?;
        Some(ControlLaw::new(&transform, &params, &grid)?)
    };

    let u0 = cfg.initial.sample(&grid);
    let opts = StepOptions {
        timing: cfg.timing,
        ..StepOptions::default()
    };
    let record = run(&params, &grid, &time, law.as_ref(), &u0, &opts)?;
    out.csv("norms.csv", |w| record.write_csv(w))?;
    out.csv("final_state.csv", |w| record.write_final_state_csv(&grid, w))?;

    let window = cfg.window();
    let fitted = fit_decay_rate(&record, window).ok();
    let fitted_l2 = fit_decay_rate_l2(&record, window).ok();
    let h0 = record.h1_history[0];
    let h_end = *record.h1_history.last().expect("at least two levels");

    let mut s = String::new();
    let _ = writeln!(s, "plant          : {:?}", cfg.plant);
    let _ = writeln!(s, "config_hash    : {}", out.hash);
    let _ = writeln!(s, "grid           : n_x = {}, n_t = {}, t_max = {}", grid.n_x(), time.n_t(), time.t_max());
    let _ = writeln!(s, "mu, N          : {}, {}", params.mu, params.n_modes);
    match minimal_mode_plan(&params) {
        Ok(p) => {
            let (lo, hi) = p.mu_interval.expect("minimal plan carries its interval");
            let _ = writeln!(s, "M              : {}", p.instability_level);
            let _ = writeln!(s, "mu-interval    : ({lo:.4}, {hi:.4})");
        }
        Err(e) => {
            let _ = writeln!(s, "M              : {}", crate::controller::instability_level(&params));
            let _ = writeln!(s, "mu-interval    : unavailable ({e})");
        }
    }
    if let Some(r) = &admissibility {
        let _ = writeln!(s, "verdict        : {}", if r.admissible { "admissible" } else { "inadmissible" });
    }
    let fmt_opt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.6}"));
    let _ = writeln!(s, "rate plan      : {}", cfg.rate_plan);
    let _ = writeln!(s, "predicted eta  : {}", fmt_opt(eta));
    let _ = writeln!(s, "fit window     : [{}, {}]", window.0, window.1);
    let _ = writeln!(s, "fitted rate H1 : {}", fmt_opt(fitted));
    let _ = writeln!(s, "fitted rate L2 : {}", fmt_opt(fitted_l2));
    if let (Some(f), Some(e)) = (fitted, eta) {
        let _ = writeln!(s, "fitted / eta   : {:.4}", f / e);
    }
    let _ = writeln!(s, "H1 initial     : {h0:.6e}");
    let _ = writeln!(s, "H1 final       : {h_end:.6e}");
    let _ = writeln!(s, "H1 final/init  : {:.6e}", h_end / h0);
    let _ = writeln!(s, "tail drift     : {:.6e}", last_decile_drift(&record));
    let _ = writeln!(s, "picard max     : {}", record.max_picard_iters());
    out.text("summary.txt", &s)?;

    Ok(RunOutcome {
        record,
        admissibility,
        predicted_eta: eta,
        fitted_rate: fitted,
        summary: s,
    })
}

/// Writes `admissibility.{txt,csv}` for the configured pair plus optional
/// `sweep_mu.csv` / `sweep_n.csv`. Returns an inadmissible error for a failed
/// configured pair after all files are written.
pub fn cmd_admissibility(cfg: &ExperimentConfig) -> Result<AdmissibilityReport> {
    let out = Artifacts::open(cfg)?;
    let grid = cfg.grid()?;
    let report = admissibility_report_with(&cfg.params, &grid, cfg.weighting)?;
    out.text("admissibility.txt", &report.to_text())?;
    out.csv("admissibility.csv", |w| report.write_csv(w))?;

    let sweep = |name: &str, cases: Vec<PhysParams>| -> Result<()> {
        let mut rows = Vec::with_capacity(cases.len());
        for p in cases {
            rows.push((p.mu, p.n_modes, admissibility_report_with(&p, &grid, cfg.weighting)?));
        }
        out.csv(name, |w| {
            writeln!(w, "mu,n_modes,min_abs_d,verdict")?;
            for (mu, n, r) in &rows {
                let v = if r.admissible { "admissible" } else { "inadmissible" };
                writeln!(w, "{mu},{n},{:.10e},{v}", r.min_abs())?;
            }
            Ok(())
        })
    };
    if !cfg.sweep.mu.is_empty() {
        sweep(
            "sweep_mu.csv",
            cfg.sweep.mu.iter().map(|&mu| PhysParams { mu, ..cfg.params }).collect(),
        )?;
    }
    if !cfg.sweep.n_modes.is_empty() {
        sweep(
            "sweep_n.csv",
            cfg.sweep
                .n_modes
                .iter()
                .map(|&n_modes| PhysParams { n_modes, ..cfg.params })
                .collect(),
        )?;
    }
    if !report.admissible {
        return Err(first_failure(&report));
    }
    Ok(report)
}

/// Writes `rateplan.txt` with both plans; fails if the configured plan mode
/// is unavailable for the configured `μ`.
pub fn cmd_rateplan(cfg: &ExperimentConfig) -> Result<String> {
    let out = Artifacts::open(cfg)?;
    let text = rate_plan_report(&cfg.params);
    out.text("rateplan.txt", &text)?;
    match cfg.rate_plan {
        PlanMode::Rapid => rapid_mode_count(&cfg.params)?,
        PlanMode::Minimal => minimal_mode_plan(&cfg.params)?,
    };
    Ok(text)
}

/// Open-loop finite-difference vs transform solution with polynomial
/// boundary data; writes `crosscheck.csv` and `crosscheck.txt`.
pub fn cmd_crosscheck(cfg: &ExperimentConfig) -> Result<CrossCheckReport> {
    if !cfg.params.is_linear() || cfg.plant == Plant::Nonlinear {
        return Err(Error::Config("crosscheck needs a linear plant".into()));
    }
    let out = Artifacts::open(cfg)?;
    let grid = cfg.grid()?;
    let time = cfg.time_grid()?;
    let cc = &cfg.crosscheck;
    let boundary = if cc.a.is_empty() && cc.b.is_empty() {
        BoundaryData::zero()
    } else {
        BoundaryData::sampled(
            &time,
            |t| Complex64::new(poly(&cc.a, t), 0.0),
            |t| Complex64::new(poly(&cc.b, t), 0.0),
        )
    };
    let lattice = Lattice::uniform(&grid, &time, cc.lattice_x, cc.lattice_t);
    let u0 = cfg.initial.sample(&grid);
    let report = cross_validate(&cfg.params, &grid, &time, &u0, &boundary, &lattice)?;
    out.csv("crosscheck.csv", |w| report.write_csv(w))?;
    let pass = report.passes(cc.tolerance);
    let line = format!(
        "crosscheck {}: discrepancy {:.6e}, tolerance {:.3e}\n",
        if pass { "PASS" } else { "FAIL" },
        report.discrepancy,
        cc.tolerance
    );
    out.text("crosscheck.txt", &line)?;
    if !pass {
        return Err(Error::CrosscheckFailed {
            discrepancy: report.discrepancy,
            tolerance: cc.tolerance,
        });
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

fn random_field(rng: &mut ChaCha8Rng, n: usize) -> ComplexField {
    ComplexField::from_vec(
        (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect(),
    )
}

/// Seeded property checks on the configured parameters; writes `selftest.txt`.
pub fn cmd_selftest(cfg: &ExperimentConfig) -> Result<Vec<Check>> {
    let out = Artifacts::open(cfg)?;
    let params = cfg.params;
    let grid = Grid::new(cfg.grid.n_x.min(201), params.length)?;
    let n = grid.n_x();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut checks = Vec::new();

    let table = KernelTable::build(&params, &grid)?;
    let diag_scale = (params.mu * params.length / (2.0 * params.diffusivity().norm())).max(f64::MIN_POSITIVE);
    let mut edge: f64 = 0.0;
    let c = params.diffusivity();
    for (i, &x) in grid.nodes().iter().enumerate() {
        edge = edge.max(table.values[[i, 0]].norm());
        let want = -params.mu * x / (2.0 * c);
        edge = edge.max((table.values[[i, i]] - want).norm() / diag_scale);
    }
    checks.push(Check {
        name: "kernel boundary conditions",
        value: edge,
        tolerance: 1e-12,
    });
    let fine = Grid::new(2 * n - 1, params.length)?;
    let r1 = kernel_residual(&table, &grid, &params)?;
    let r2 = kernel_residual(&KernelTable::build(&params, &fine)?, &fine, &params)?;
    checks.push(Check {
        name: "kernel residual under refinement",
        value: if r1 > 0.0 { r2 / r1 } else { 0.0 },
        tolerance: 0.35,
    });

    let report = admissibility_report_with(&params, &grid, cfg.weighting)?;
    if !report.admissible {
        return Err(first_failure(&report));
    }
    let transform = BacksteppingTransform::new(&params, &grid, cfg.weighting)?;
    let law = ControlLaw::new(&transform, &params, &grid)?;

    let mut inv: f64 = 0.0;
    let mut lin: f64 = 0.0;
    for _ in 0..20 {
        let w = random_field(&mut rng, n);
        let back = transform.inverse(&transform.forward(&w)?)?;
        inv = inv.max((back.values() - w.values()).iter().map(|z| z.norm()).fold(0.0, f64::max) / w.max_abs());

        let v = random_field(&mut rng, n);
        let a = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let mix = ComplexField::from(w.values() * a + v.values());
        let lhs = law.feedback(&mix)?;
        let rhs = a * law.feedback(&w)? + law.feedback(&v)?;
        lin = lin.max((lhs - rhs).norm() / (1.0 + rhs.norm()));
    }
    checks.push(Check {
        name: "transform round trip",
        value: inv,
        tolerance: 1e-8,
    });
    checks.push(Check {
        name: "feedback linearity",
        value: lin,
        tolerance: 1e-12,
    });

    // ‖w - P_N w‖² ≤ ‖w'‖² / λ_{N+1} for polynomials with w(0) = 0, w'(L) = 0.
    let lam = mode_eigenvalue(params.n_modes + 1, params.length);
    let l = params.length;
    let mut excess: f64 = 0.0;
    for _ in 0..50 {
        let mut cs: Vec<Complex64> = (0..6)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let tail: Complex64 = (2..6).map(|m| m as f64 * cs[m] * l.powi(m as i32 - 1)).sum();
        cs[1] = -tail;
        let w = ComplexField::from_fn(&grid, |x| (1..6).map(|m| cs[m] * x.powi(m as i32)).sum());
        let pw = transform.projection.apply(&w)?;
        let rem = ComplexField::from(w.values() - pw.values());
        let lhs = norm_l2(&rem, &grid)?.powi(2);
        let rhs = norm_l2(&derivative(&w, &grid)?, &grid)?.powi(2) / lam;
        excess = excess.max((lhs - rhs) / (1.0 + rhs));
    }
    checks.push(Check {
        name: "projection remainder bound",
        value: excess.max(0.0),
        tolerance: 1e-3,
    });

    let mut s = String::new();
    let _ = writeln!(s, "seed = {}", cfg.seed);
    for c in &checks {
        let _ = writeln!(
            s,
            "{}: {} ({:.3e} <= {:.1e})",
            c.name,
            if c.passed() { "PASS" } else { "FAIL" },
            c.value,
            c.tolerance
        );
    }
    out.text("selftest.txt", &s)?;
    if let Some(bad) = checks.iter().find(|c| !c.passed()) {
        return Err(Error::SelfTest(format!("{} = {:.3e}", bad.name, bad.value)));
    }
    Ok(checks)
}

/// Output directory the drivers write to for `cfg`.
pub fn out_dir(cfg: &ExperimentConfig) -> &Path {
    cfg.out_dir.as_deref().unwrap_or(Path::new(DEFAULT_OUT_DIR))
}

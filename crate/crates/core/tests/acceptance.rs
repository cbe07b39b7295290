//! One PASS/FAIL line per acceptance criterion. The target fails only when an
//! attainable criterion fails; the reported minimal-mode upper bound 493.5 is
//! not attainable with the stated eigenvalues and is printed as FAIL.

use std::f64::consts::PI;
use std::fs;
use std::process::Command;
use std::time::Instant;

use cgl_backstepping::config::InitialDatum;
use cgl_backstepping::controller::{instability_level, minimal_mode_plan, minimal_mu_interval, ControlLaw};
use cgl_backstepping::discretization::{derivative, mode_eigenvalue, norm_l2};
use cgl_backstepping::experiments::last_decile_drift;
use cgl_backstepping::kernel::{kernel_residual, KernelTable};
use cgl_backstepping::linalg::DenseLu;
use cgl_backstepping::solver::{fit_decay_rate, run, StepOptions};
use cgl_backstepping::transform::{admissibility_report, mode_fn};
use cgl_backstepping::utm::{
    cross_validate, evaluate_solution, BoundaryData, ContourSpec, Lattice, UtmProblem,
};
use cgl_backstepping::{BacksteppingTransform, ComplexField, Grid, PhysParams, TimeGrid, Weighting};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_field(rng: &mut ChaCha8Rng, n: usize) -> ComplexField {
    ComplexField::from_vec((0..n).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect())
}

fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn both() -> [(&'static str, PhysParams); 2] {
    [("exp1", PhysParams::experiment1()), ("exp2", PhysParams::experiment2())]
}

fn kernel_correctness() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, p) in both() {
        let res: Vec<f64> = [51, 101, 201]
            .iter()
            .map(|&n| {
                let g = Grid::new(n, 1.0).unwrap();
                kernel_residual(&KernelTable::build(&p, &g).unwrap(), &g, &p).unwrap()
            })
            .collect();
        let o1 = (res[0] / res[1]).log2();
        let o2 = (res[1] / res[2]).log2();

        let start = Instant::now();
        let g = Grid::new(201, 1.0).unwrap();
        let t = KernelTable::build(&p, &g).unwrap();
        kernel_residual(&t, &g, &p).unwrap();
        let secs = start.elapsed().as_secs_f64();

        let cdiff = p.diffusivity();
        let mut bc: f64 = 0.0;
        for (i, &x) in g.nodes().iter().enumerate() {
            let diag = -p.mu * x / (2.0 * cdiff);
            bc = bc.max(t.values[[i, 0]].norm() / p.mu);
            if x > 0.0 {
                bc = bc.max((t.values[[i, i]] - diag).norm() / diag.norm());
            }
        }
        let ok = o1 >= 1.8 && o2 >= 1.8 && bc <= 1e-12 && secs < 5.0;
        pass &= ok;
        detail.push(format!("{name}: orders {o1:.2}/{o2:.2}, bc {bc:.1e}, {secs:.2}s"));
    }
    outcome(pass, detail.join("; "))
}

fn transform_invertibility() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for (name, p) in both() {
        let g = Grid::new(201, 1.0).unwrap();
        let t = BacksteppingTransform::new(&p, &g, Weighting::Trapezoid).unwrap();
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let w = random_field(&mut rng, g.n_x());
            let back = t.inverse(&t.forward(&w).unwrap()).unwrap();
            let err = max_abs_diff(back.values().as_slice().unwrap(), w.values().as_slice().unwrap());
            worst = worst.max(err / w.max_abs());
        }

        let fwd = t.forward_matrix().entries;
        let inv = t.inverse_matrix().entries;
        let n = g.n_x();
        let lu = DenseLu::factor(fwd).unwrap();
        let mut oracle: f64 = 0.0;
        for j in 0..n {
            let mut e = vec![c(0.0, 0.0); n];
            e[j] = c(1.0, 0.0);
            let col = lu.solve(&e);
            for i in 0..n {
                oracle = oracle.max((col[i] - inv[[i, j]]).norm());
            }
        }
        let ok = worst < 1e-8 && oracle < 1e-8;
        pass &= ok;
        detail.push(format!("{name}: round trip {worst:.1e}, dense oracle {oracle:.1e}"));
    }
    outcome(pass, detail.join("; "))
}

fn admissibility_numbers() -> Outcome {
    let g = Grid::new(201, 1.0).unwrap();
    let cases = [
        (PhysParams::experiment1(), vec![c(-0.26, 0.87), c(0.67, 0.17)]),
        (PhysParams::experiment2(), vec![c(0.42, 0.37)]),
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for (p, want) in cases {
        let r = admissibility_report(&p, &g).unwrap();
        pass &= r.admissible;
        for (e, w) in r.entries.iter().zip(&want) {
            let ok = (e.d.re - w.re).abs() <= 0.05 && (e.d.im - w.im).abs() <= 0.05;
            pass &= ok;
            detail.push(format!("d{} = {:.3}{:+.3}i vs {}", e.j, e.d.re, e.d.im, w));
        }
        pass &= r.entries.len() == want.len();
    }
    outcome(pass, detail.join(", "))
}

/// Returns the line outcome plus whether the attainable parts passed.
fn rate_window_numbers() -> (Outcome, bool) {
    let p = PhysParams::experiment1();
    let (m, lo, hi) = minimal_mu_interval(&p);
    let m_ok = m == 2 && instability_level(&p) == 2;
    let lo_ok = (lo - 51.3).abs() <= 0.2;
    let hi_ok = (hi - 493.5).abs() <= 0.2;
    let consistent = (hi - 2.0 * p.nu * mode_eigenvalue(3, p.length)).abs() < 1e-12
        && (hi - 12.5 * PI * PI).abs() < 1e-9;
    let detail = format!(
        "M = {m}, lower {lo:.3} vs 51.3, upper {hi:.3} vs 493.5{}",
        if hi_ok {
            ""
        } else {
            " (2*nu*lambda_3 with lambda_3 = (5*pi/2)^2 is 25*pi^2/2; 493.5 = 50*pi^2 needs lambda_3 = 25*pi^2)"
        }
    );
    (outcome(m_ok && lo_ok && hi_ok, detail), m_ok && lo_ok && consistent)
}

fn linear_stabilization() -> Outcome {
    let start = Instant::now();
    let p = PhysParams::experiment1();
    let g = Grid::new(201, 1.0).unwrap();
    let time = TimeGrid::from_step(5e-4, 1.0).unwrap();
    let t = BacksteppingTransform::new(&p, &g, Weighting::Trapezoid).unwrap();
    let law = ControlLaw::new(&t, &p, &g).unwrap();
    let u0 = InitialDatum::Exp1.sample(&g);
    let opts = StepOptions::default();
    let closed = run(&p, &g, &time, Some(&law), &u0, &opts).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let open = run(&p, &g, &time, None, &u0, &opts).unwrap();

    let h = &closed.h1_history;
    let last_rise = (1..h.len()).filter(|&n| h[n] > h[n - 1]).map(|n| closed.times[n]).fold(0.0, f64::max);
    let monotone = last_rise <= 0.1;
    let eta2 = minimal_mode_plan(&p).unwrap().eta;
    let rate = fit_decay_rate(&closed, (0.2, 0.8)).unwrap();
    let growth = open.h1_history.last().unwrap() / open.h1_history[0];
    let ok = monotone && rate >= 0.9 * eta2 && growth >= 10.0 && secs < 60.0;
    outcome(
        ok,
        format!(
            "last H1 increase at t = {last_rise:.4}, rate {rate:.3} vs 0.9*eta2 = {:.3}, open-loop growth {growth:.2e}, {secs:.2}s",
            0.9 * eta2
        ),
    )
}

fn nonlinear_behavior() -> Outcome {
    let p = PhysParams::experiment2();
    let g = Grid::new(201, 1.0).unwrap();
    let time = TimeGrid::from_step(1e-3, 3.0).unwrap();
    let t = BacksteppingTransform::new(&p, &g, Weighting::Trapezoid).unwrap();
    let law = ControlLaw::new(&t, &p, &g).unwrap();
    let u0 = InitialDatum::Exp2.sample(&g);
    let opts = StepOptions::default();
    let (open, closed) = match (
        run(&p, &g, &time, None, &u0, &opts),
        run(&p, &g, &time, Some(&law), &u0, &opts),
    ) {
        (Ok(a), Ok(b)) => (a, b),
        (a, b) => return outcome(false, format!("run failed: {:?} {:?}", a.err(), b.err())),
    };
    let drift = last_decile_drift(&open);
    let plateau = *open.h1_history.last().unwrap();
    let ratio = closed.h1_history.last().unwrap() / closed.h1_history[0];
    let sweeps = open.max_picard_iters().max(closed.max_picard_iters());
    let ok = drift < 0.01 && plateau > 0.1 && ratio < 1e-3 && sweeps <= 8;
    outcome(
        ok,
        format!("plateau H1 {plateau:.4} drift {drift:.1e}, controlled H1(3)/H1(0) {ratio:.2e}, max Picard sweeps {sweeps}"),
    )
}

fn utm_agreement() -> Outcome {
    let heat = PhysParams {
        nu: 1.0,
        alpha: 0.0,
        gamma: 0.0,
        mu: 0.0,
        n_modes: 1,
        ..PhysParams::experiment1()
    };
    let g = Grid::new(201, 1.0).unwrap();
    let lam = PI * PI / 4.0;
    let e1 = mode_fn(1, 1.0);
    let u0 = ComplexField::from_real_fn(&g, &e1);
    let problem = UtmProblem::new(&heat, &g, u0, BoundaryData::zero(), None).unwrap();
    let mut heat_err: f64 = 0.0;
    for &(x, t) in &[(0.5, 0.1), (0.25, 0.05), (0.8, 0.3)] {
        let u = evaluate_solution(&problem, x, t).unwrap();
        heat_err = heat_err.max((u - (-lam * t).exp() * e1(x)).norm());
    }

    let p = PhysParams::experiment1();
    let time = TimeGrid::new(401, 0.02).unwrap();
    let u0 = InitialDatum::Exp1.sample(&g);
    let lattice = Lattice::uniform(&g, &time, 5, 4);
    let cross = cross_validate(&p, &g, &time, &u0, &BoundaryData::zero(), &lattice).unwrap();

    let problem = UtmProblem::new(&p, &g, u0, BoundaryData::zero(), None).unwrap();
    let mut self_conv: f64 = 0.0;
    for &(x, t) in &[(0.3, 0.01), (0.6, 0.02)] {
        let contour = ContourSpec::adaptive(&problem, x, t).unwrap();
        let a = problem.evaluate(&contour, x, t).unwrap();
        let b = problem.evaluate(&contour.refined(), x, t).unwrap();
        self_conv = self_conv.max((a - b).norm() / a.norm().max(1.0));
    }
    let ok = heat_err < 1e-3 && cross.discrepancy < 0.01 && self_conv < 1e-8;
    outcome(
        ok,
        format!(
            "heat closed form {heat_err:.1e}, CN vs transform {:.2e}, refinement {self_conv:.1e}",
            cross.discrepancy
        ),
    )
}

fn cli_determinism() -> Result<(), String> {
    let cfg = std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/exp1.toml");
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut dumps = Vec::new();
    for rep in ["a", "b"] {
        let dir = tmp.path().join(rep);
        let status = Command::new(env!("CARGO_BIN_EXE_cglctl"))
            .args(["run", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()])
            .args(["--nt", "401", "--tmax", "0.2"])
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(String::from_utf8_lossy(&status.stderr).into_owned());
        }
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(&dir)
            .map_err(|e| e.to_string())?
            .map(|e| {
                let path = e.unwrap().path();
                (path.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&path).unwrap())
            })
            .collect();
        files.sort();
        dumps.push(files);
    }
    if dumps[0] == dumps[1] {
        Ok(())
    } else {
        Err("outputs differ".into())
    }
}

fn property_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let p = PhysParams::experiment1();
    let g = Grid::new(201, 1.0).unwrap();
    let t = BacksteppingTransform::new(&p, &g, Weighting::Trapezoid).unwrap();
    let law = ControlLaw::new(&t, &p, &g).unwrap();

    let lam = mode_eigenvalue(p.n_modes + 1, 1.0);
    let mut poincare = 0;
    for _ in 0..200 {
        let mut cs: Vec<Complex64> = (0..6).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        cs[1] = -(2..6).map(|m| m as f64 * cs[m]).sum::<Complex64>();
        let w = ComplexField::from_fn(&g, |x| (1..6).map(|m| cs[m] * x.powi(m as i32)).sum());
        let rem = ComplexField::from(w.values() - t.projection.apply(&w).unwrap().values());
        let lhs = norm_l2(&rem, &g).unwrap().powi(2);
        let rhs = norm_l2(&derivative(&w, &g).unwrap(), &g).unwrap().powi(2) / lam + 1e-3;
        poincare += usize::from(lhs <= rhs);
    }

    let mut lin: f64 = 0.0;
    for _ in 0..100 {
        let u = random_field(&mut rng, g.n_x());
        let v = random_field(&mut rng, g.n_x());
        let a = c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let b = c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let mix = ComplexField::from(u.values() * a + v.values() * b);
        let lhs = law.feedback(&mix).unwrap();
        let rhs = a * law.feedback(&u).unwrap() + b * law.feedback(&v).unwrap();
        lin = lin.max((lhs - rhs).norm() / rhs.norm().max(1.0));
    }

    let zero = PhysParams { mu: 0.0, ..p };
    let tz = BacksteppingTransform::new(&zero, &g, Weighting::Trapezoid).unwrap();
    let lz = ControlLaw::new(&tz, &zero, &g).unwrap();
    let time = TimeGrid::new(201, 0.1).unwrap();
    let u0 = InitialDatum::Exp1.sample(&g);
    let closed = run(&zero, &g, &time, Some(&lz), &u0, &StepOptions::default()).unwrap();
    let open = run(&zero, &g, &time, None, &u0, &StepOptions::default()).unwrap();
    let chain = tz.kernel.values.iter().all(|z| z.norm() == 0.0)
        && tz.upsilon.entries.iter().all(|z| z.norm() == 0.0)
        && lz.row().iter().all(|z| z.norm() == 0.0)
        && closed == open;

    let det = cli_determinism();
    let ok = poincare == 200 && lin <= 1e-12 && chain && det.is_ok();
    outcome(
        ok,
        format!(
            "Poincare {poincare}/200, linearity {lin:.1e}, mu=0 chain {}, CLI determinism {}",
            if chain { "ok" } else { "broken" },
            det.map_or_else(|e| format!("failed ({e})"), |_| "byte-exact".into())
        ),
    )
}

fn main() {
    let (c4, c4_attainable) = rate_window_numbers();
    let results = [
        (1, "kernel correctness", kernel_correctness()),
        (2, "transform invertibility", transform_invertibility()),
        (3, "admissibility numbers", admissibility_numbers()),
        (4, "rate-window numbers", c4),
        (5, "linear stabilization", linear_stabilization()),
        (6, "nonlinear behavior", nonlinear_behavior()),
        (7, "transform-method oracle", utm_agreement()),
        (8, "property suites", property_suites()),
    ];
    for (i, name, o) in &results {
        println!("criterion {i} {}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    let failed: Vec<usize> = results
        .iter()
        .filter(|(i, _, o)| if *i == 4 { !c4_attainable } else { !o.pass })
        .map(|(i, _, _)| *i)
        .collect();
    if !failed.is_empty() {
        eprintln!("attainable criteria failed: {failed:?}");
        std::process::exit(1);
    }
}

mod common;

use std::fs;

use cgl_backstepping::config::Overrides;
use cgl_backstepping::experiments::{cmd_admissibility, cmd_crosscheck, cmd_rateplan, cmd_run};

fn overrides(dir: &std::path::Path, n_t: usize, t_max: f64) -> Overrides {
    Overrides {
        n_t: Some(n_t),
        t_max: Some(t_max),
        out_dir: Some(dir.to_path_buf()),
        ..Overrides::default()
    }
}

#[test]
fn exp1_run_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::load("exp1.toml");
    cfg.apply(&overrides(dir.path(), 801, 0.4)).unwrap();
    cfg.fit_window = Some((0.1, 0.3));
    let out = cmd_run(&cfg).unwrap();

    for name in ["rateplan.txt", "admissibility.txt", "admissibility.csv", "norms.csv", "final_state.csv", "summary.txt"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    let norms = fs::read_to_string(dir.path().join("norms.csv")).unwrap();
    let mut lines = norms.lines();
    assert_eq!(lines.next().unwrap(), format!("# config_hash={}", cfg.hash().unwrap()));
    assert_eq!(lines.next().unwrap(), "t,l2,h1,re_g,im_g,picard_iters");
    assert_eq!(lines.count(), 801);

    assert!(out.summary.contains("M              : 2"));
    assert!(out.summary.contains("verdict        : admissible"));
    assert!(out.summary.contains("mu-interval    : (51.3315, 123.3701)"));
    let eta = out.predicted_eta.unwrap();
    assert!(out.fitted_rate.unwrap() >= 0.9 * eta);
}

#[test]
fn uncontrolled_run_skips_the_controller() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::load("exp2_uncontrolled.toml");
    cfg.apply(&overrides(dir.path(), 301, 0.3)).unwrap();
    let out = cmd_run(&cfg).unwrap();
    assert!(out.admissibility.is_none());
    assert!(!dir.path().join("admissibility.txt").exists());
    assert!(out.record.feedback_history.iter().all(|g| g.norm() == 0.0));
}

#[test]
fn inadmissible_pair_reports_then_fails() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::load("inadmissible.toml");
    cfg.out_dir = Some(dir.path().to_path_buf());
    let err = cmd_run(&cfg).unwrap_err();
    assert_eq!(err.code(), "E_INADMISSIBLE");
    assert_eq!(err.exit_code(), 3);
    let text = fs::read_to_string(dir.path().join("admissibility.txt")).unwrap();
    assert!(text.contains("overall: inadmissible"));
    assert!(!dir.path().join("norms.csv").exists());
}

#[test]
fn admissibility_sweeps_cover_every_value() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::load("exp1.toml");
    cfg.out_dir = Some(dir.path().to_path_buf());
    let report = cmd_admissibility(&cfg).unwrap();
    assert!(report.admissible);
    let mu = fs::read_to_string(dir.path().join("sweep_mu.csv")).unwrap();
    assert_eq!(mu.lines().count(), 2 + cfg.sweep.mu.len());
    assert!(mu.lines().nth(2).unwrap().starts_with("0,2,1.0000000000e0,admissible"));
    let n = fs::read_to_string(dir.path().join("sweep_n.csv")).unwrap();
    assert_eq!(n.lines().count(), 2 + cfg.sweep.n_modes.len());
}

#[test]
fn rate_plan_reports_both_modes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::load("exp1.toml");
    cfg.out_dir = Some(dir.path().to_path_buf());
    let text = cmd_rateplan(&cfg).unwrap();
    assert!(text.contains("[rapid]") && text.contains("[minimal]"));
    assert!(text.contains("mu-interval : (51.3315, 123.3701)"));

    let mut exp2 = common::load("exp2.toml");
    exp2.out_dir = cfg.out_dir.clone();
    let text = cmd_rateplan(&exp2).unwrap();
    assert!(text.contains("unavailable"));
    exp2.rate_plan = cgl_backstepping::controller::PlanMode::Minimal;
    assert_eq!(cmd_rateplan(&exp2).unwrap_err().exit_code(), 2);
}

#[test]
fn crosscheck_presets() {
    let dir = tempfile::tempdir().unwrap();
    let mut zero = common::load("zero.toml");
    zero.out_dir = Some(dir.path().join("zero"));
    assert_eq!(cmd_crosscheck(&zero).unwrap().discrepancy, 0.0);
    let line = fs::read_to_string(dir.path().join("zero/crosscheck.txt")).unwrap();
    assert!(line.starts_with("crosscheck PASS"));

    let mut heat = common::load("crosscheck_heat.toml");
    heat.out_dir = Some(dir.path().join("heat"));
    assert!(cmd_crosscheck(&heat).unwrap().discrepancy < 1e-3);

    let mut coarse = common::load("crosscheck_exp1.toml");
    coarse.apply(&overrides(&dir.path().join("coarse"), 6, 0.02)).unwrap();
    let err = cmd_crosscheck(&coarse).unwrap_err();
    assert_eq!(err.exit_code(), 5);
    let line = fs::read_to_string(dir.path().join("coarse/crosscheck.txt")).unwrap();
    assert!(line.starts_with("crosscheck FAIL"));
}

//! Runs a TOML experiment config end to end, as `cglctl run` does.
//!
//! cargo run --release --example config_run -- configs/exp1.toml /tmp/exp1

use std::path::PathBuf;

use cgl_backstepping::config::Overrides;
use cgl_backstepping::experiments::cmd_run;
use cgl_backstepping::ExperimentConfig;

fn main() -> cgl_backstepping::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = PathBuf::from(args.next().unwrap_or_else(|| "configs/exp1.toml".into()));
    let mut cfg = ExperimentConfig::load(&path)?;
    cfg.apply(&Overrides {
        out_dir: Some(args.next().map_or_else(|| std::env::temp_dir().join("cgl_run"), PathBuf::from)),
        ..Overrides::default()
    })?;
    let outcome = cmd_run(&cfg)?;
    print!("{}", outcome.summary);
    Ok(())
}

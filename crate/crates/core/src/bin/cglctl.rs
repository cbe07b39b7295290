use std::path::PathBuf;
use std::process::ExitCode;

use cgl_backstepping::config::{ExperimentConfig, Overrides};
use cgl_backstepping::experiments::{cmd_admissibility, cmd_crosscheck, cmd_rateplan, cmd_run, cmd_selftest};
use cgl_backstepping::Error;
use clap::{Args, Parser, Subcommand};

/// Backstepping boundary control of the complex Ginzburg-Landau equation.
#[derive(Parser)]
#[command(name = "cglctl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured plant and write norms, final state and summary.
    Run(Common),
    /// Tabulate the recursion denominators for (mu, N) and optional sweeps.
    Admissibility(Common),
    /// Report the rapid and minimal-mode rate plans.
    Rateplan(Common),
    /// Compare the open-loop scheme with the transform solution.
    Crosscheck(Common),
    /// Seeded property checks.
    Selftest(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    nt: Option<usize>,
    #[arg(long)]
    tmax: Option<f64>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        cfg.apply(&Overrides {
            n_x: self.nx,
            n_t: self.nt,
            t_max: self.tmax,
            seed: self.seed,
            out_dir: self.out.clone(),
        })?;
        Ok(cfg)
    }
}

fn dispatch(cmd: &Command) -> Result<String, Error> {
    match cmd {
        Command::Run(c) => Ok(cmd_run(&c.load()?)?.summary),
        Command::Admissibility(c) => Ok(cmd_admissibility(&c.load()?)?.to_text()),
        Command::Rateplan(c) => cmd_rateplan(&c.load()?),
        Command::Crosscheck(c) => {
            let r = cmd_crosscheck(&c.load()?)?;
            Ok(format!("crosscheck PASS: discrepancy {:.6e}\n", r.discrepancy))
        }
        Command::Selftest(c) => {
            let checks = cmd_selftest(&c.load()?)?;
            Ok(checks.iter().map(|c| format!("{}: PASS ({:.3e})\n", c.name, c.value)).collect())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("E_CONFIG: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match dispatch(&cli.command) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let msg = e.to_string().split_whitespace().collect::<Vec<_>>().join(" ");
            eprintln!("{}: {msg}", e.code());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

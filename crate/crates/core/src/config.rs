//! TOML experiment configuration.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::controller::PlanMode;
use crate::discretization::{ComplexField, Grid, PhysParams, TimeGrid};
use crate::error::{Error, Result};
use crate::solver::FeedbackTiming;
use crate::transform::{mode_fn, Weighting};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plant {
    /// Closed loop with the backstepping law.
    Linear,
    /// Closed loop; the nonlinear term is active.
    Nonlinear,
    /// Homogeneous Neumann condition, no feedback.
    Uncontrolled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub n_x: usize,
    pub n_t: usize,
    pub t_max: f64,
}

/// Initial state `u0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "lowercase")]
pub enum InitialDatum {
    /// `sin(2πx) - ½ sin(3πx)`.
    Exp1,
    /// `2x - 1 - cos(πx) - 2i sin(2πx)`.
    Exp2,
    Zero,
    /// `Σ c·sin(kπx/L)` over `(k, c)` pairs plus `Σ c·e_j(x)` over `(j, c)`
    /// pairs, separately for real and imaginary parts.
    Custom {
        #[serde(default)]
        sin_re: Vec<(f64, f64)>,
        #[serde(default)]
        sin_im: Vec<(f64, f64)>,
        #[serde(default)]
        mode_re: Vec<(usize, f64)>,
        #[serde(default)]
        mode_im: Vec<(usize, f64)>,
    },
}

impl InitialDatum {
    pub fn sample(&self, grid: &Grid) -> ComplexField {
        let l = grid.length();
        match self {
            InitialDatum::Exp1 => {
                ComplexField::from_real_fn(grid, |x| (2.0 * PI * x).sin() - 0.5 * (3.0 * PI * x).sin())
            }
            InitialDatum::Exp2 => ComplexField::from_fn(grid, |x| {
                Complex64::new(2.0 * x - 1.0 - (PI * x).cos(), -2.0 * (2.0 * PI * x).sin())
            }),
            InitialDatum::Zero => ComplexField::zeros(grid.n_x()),
            InitialDatum::Custom {
                sin_re,
                sin_im,
                mode_re,
                mode_im,
            } => {
                let part = |sins: &[(f64, f64)], modes: &[(usize, f64)], x: f64| -> f64 {
                    sins.iter().map(|&(k, c)| c * (k * PI * x / l).sin()).sum::<f64>()
                        + modes.iter().map(|&(j, c)| c * mode_fn(j, l)(x)).sum::<f64>()
                };
                ComplexField::from_fn(grid, |x| {
                    Complex64::new(part(sin_re, mode_re, x), part(sin_im, mode_im, x))
                })
            }
        }
    }
}

/// Polynomial boundary data `a(t) = Σ a_m t^m`, `b(t) = Σ b_m t^m` for the
/// open-loop cross-check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrosscheckConfig {
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_lattice_x")]
    pub lattice_x: usize,
    #[serde(default = "default_lattice_t")]
    pub lattice_t: usize,
    #[serde(default)]
    pub a: Vec<f64>,
    #[serde(default)]
    pub b: Vec<f64>,
}

fn default_tolerance() -> f64 {
    0.01
}
fn default_lattice_x() -> usize {
    5
}
fn default_lattice_t() -> usize {
    4
}

impl Default for CrosscheckConfig {
    fn default() -> Self {
        Self {
            tolerance: default_tolerance(),
            lattice_x: default_lattice_x(),
            lattice_t: default_lattice_t(),
            a: Vec::new(),
            b: Vec::new(),
        }
    }
}

pub fn poly(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

/// Parameter sweeps for the admissibility command.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    #[serde(default)]
    pub mu: Vec<f64>,
    #[serde(default)]
    pub n_modes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub plant: Plant,
    pub params: PhysParams,
    pub grid: GridConfig,
    pub initial: InitialDatum,
    #[serde(default = "default_plan")]
    pub rate_plan: PlanMode,
    #[serde(default)]
    pub weighting: Weighting,
    #[serde(default)]
    pub timing: FeedbackTiming,
    /// Window `[t_a, t_b]` for the decay-rate fit; defaults to `[0.2, 0.8]·t_max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub crosscheck: CrosscheckConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

fn default_plan() -> PlanMode {
    PlanMode::Minimal
}

/// Command-line overrides applied on top of a parsed config.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub n_x: Option<usize>,
    pub n_t: Option<usize>,
    pub t_max: Option<f64>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Linear closed loop, `μ = 60`, `N = 2`, `T = 1`.
    pub fn exp1() -> Self {
        Self {
            plant: Plant::Linear,
            params: PhysParams::experiment1(),
            grid: GridConfig {
                n_x: 201,
                n_t: 2001,
                t_max: 1.0,
            },
            initial: InitialDatum::Exp1,
            rate_plan: PlanMode::Minimal,
            weighting: Weighting::Trapezoid,
            timing: FeedbackTiming::Lagged,
            fit_window: Some((0.2, 0.8)),
            out_dir: None,
            seed: 0,
            crosscheck: CrosscheckConfig::default(),
            sweep: SweepConfig::default(),
        }
    }

    /// Nonlinear closed loop, `μ = 12`, `N = 1`, `T = 3`.
    pub fn exp2() -> Self {
        Self {
            plant: Plant::Nonlinear,
            params: PhysParams::experiment2(),
            grid: GridConfig {
                n_x: 201,
                n_t: 3001,
                t_max: 3.0,
            },
            initial: InitialDatum::Exp2,
            rate_plan: PlanMode::Rapid,
            fit_window: Some((0.5, 2.5)),
            ..Self::exp1()
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(one_line(&e.to_string())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(one_line(&e.to_string())))
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(n) = o.n_x {
            self.grid.n_x = n;
        }
        if let Some(n) = o.n_t {
            self.grid.n_t = n;
        }
        if let Some(t) = o.t_max {
            self.grid.t_max = t;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(d) = &o.out_dir {
            self.out_dir = Some(d.clone());
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate().map_err(|e| Error::Config(e.to_string()))?;
        let cfg = |m: String| Err(Error::Config(m));
        if self.grid.n_x < 5 {
            return cfg(format!("grid.n_x = {} is too small", self.grid.n_x));
        }
        if self.grid.n_t < 2 || !(self.grid.t_max > 0.0) {
            return cfg("grid.n_t must be >= 2 and grid.t_max > 0".into());
        }
        match self.plant {
            Plant::Nonlinear if self.params.kappa <= 0.0 => {
                return cfg("plant = \"nonlinear\" needs kappa > 0".into())
            }
            Plant::Linear if self.params.kappa != 0.0 => {
                return cfg("plant = \"linear\" needs kappa = 0".into())
            }
            _ => {}
        }
        if let Some((a, b)) = self.fit_window {
            if !(b > a) {
                return cfg(format!("fit_window [{a}, {b}] is empty"));
            }
        }
        if let InitialDatum::Custom { mode_re, mode_im, .. } = &self.initial {
            if mode_re.iter().chain(mode_im).any(|&(j, _)| j == 0) {
                return cfg("mode indices start at 1".into());
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.n_x, self.params.length).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.grid.n_t, self.grid.t_max).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn window(&self) -> (f64, f64) {
        self.fit_window
            .unwrap_or((0.2 * self.grid.t_max, 0.8 * self.grid.t_max))
    }

    /// SHA-256 of the canonical TOML serialization, output directory excluded.
    pub fn hash(&self) -> Result<String> {
        let text = Self {
            out_dir: None,
            ..self.clone()
        }
        .to_toml()?;
        Ok(hex::encode(Sha256::digest(text.as_bytes())))
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

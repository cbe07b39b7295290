//! Finite-dimensional backstepping boundary control for the complex
//! Ginzburg–Landau equation
//!
//! ```text
//! u_t - (ν + iα) u_xx - γ u + (κ + iβ) |u|^p u = 0,   x ∈ (0, L)
//! u(0, t) = 0,   u_x(L, t) = g(t)
//! ```
//!
//! The crate provides the kernel series, the discrete transform pair
//! `T_N = I + K P_N` / `T_N^{-1} = I - Υ_N`, the boundary feedback law, a
//! Crank–Nicolson time stepper, and an independent unified-transform solver
//! for the open-loop problem.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod controller;
pub mod discretization;
pub mod error;
pub mod experiments;
pub mod kernel;
pub mod linalg;
pub mod solver;
pub mod transform;
pub mod utm;

pub use config::ExperimentConfig;
pub use discretization::{ComplexField, Grid, PhysParams, TimeGrid};
pub use error::{Error, Result};
pub use kernel::KernelTable;
pub use transform::{BacksteppingTransform, Weighting};

//! Numerical solver and verification toolkit for second-order quadratic
//! mean-field games with aggregating local coupling `-σ m^α`.
//!
//! The solver linearises the Hamilton-Jacobi-Bellman equation through the
//! Hopf-Cole substitution `w = e^{-u/2}` and iterates the resulting map
//! `m ↦ μ` (backward heat equation for `w`, forward Fokker-Planck equation for
//! `μ`) with damping. Diagnostics evaluate the conserved energy, the
//! second-moment identities and the explicit non-existence horizons on
//! solver output; the experiment harness sweeps `(σ, T)` phase diagrams.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod kernel;
pub mod ops;
pub mod output;
pub mod par;
pub mod parabolic;
pub mod problem;
pub mod solver;
mod tridiag;

pub use error::{ConfigError, Error, GridError, HopfColeError, ParabolicError, ProblemError};
pub use grid::{Grid, SpaceTimeField};
pub use par::Execution;
pub use parabolic::TimeScheme;
pub use problem::{
    CouplingSpec, DataSpec, GaussianMixture, PotentialSpec, ProblemSpec, TerminalCost,
};

pub use solver::{solve, SolveOutcome, SolverConfig, Verdict};

//! Numerical laboratory for stochastic Schauder–Tychonoff fixed points:
//! discrete Gelfand triples, Q-Wiener noise, the shifted Haar projection,
//! frozen-coefficient SPDE solvers, the dyadic staircase and Picard fixed
//! points, and Monte Carlo estimators for the associated energy bounds.

pub mod cli;
pub mod config;
pub mod error;
pub mod estimators;
pub mod fixed_point;
pub mod grid;
pub mod haar;
pub mod hypotheses;
pub mod par;
pub mod rng;
pub mod solver;
pub mod tridiag;
pub mod verify;
pub mod wiener;

pub use error::{Error, Result};
pub use grid::{Field, Norm, SpatialGrid, TripleKind};
pub use haar::{HaarLevel, TimeGrid, Trajectory};
pub use par::Execution;
pub use wiener::{NoisePath, QWienerSpec};

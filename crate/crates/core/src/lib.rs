//! Coined quantum walks on dynamically percolated two-dimensional lattices:
//! exact channel evolution, Monte Carlo trajectories, and the attractor
//! machinery that yields asymptotic states.

pub mod analytic;
pub mod attractors;
pub mod channel;
pub mod cli;
pub mod coin;
pub mod error;
pub mod evolution;
pub mod lattice;
pub mod linalg;

pub use attractors::{AttractorBasis, CommonEigenstate, Completeness, StateSource};
pub use channel::{AveragedStep, EdgeConfiguration, PercolationChannel, PercolationModel, StepUnitary};
pub use coin::{CoinKind, CoinOperator, LocalEigenpair};
pub use error::{Error, Result};
pub use evolution::{DensityOperator, PositionDistribution, StateVector};
pub use lattice::{Boundary, Direction, LatticeSpec, Site};

//! Two-dimensional Ising model with fixed ±1 boundary conditions on square
//! volumes: lattice/dual-lattice geometry, exact and sampled Gibbs measures,
//! the contour (Peierls) representation with boundary contours, an abstract
//! polymer/cluster-expansion engine, a multi-scale decomposition of unbalanced
//! boundary contours, and the statistical experiments built on top of them
//! (free-energy differences, empirical phase frequencies, characteristic
//! functions, local-limit bounds).
//!
//! Everything is exact-testable at desk scale: volumes up to N = 2 are
//! enumerated exhaustively and every higher-level construction is validated
//! against those enumerations.

pub mod clusterexp;
pub mod cli;
pub mod contour;
pub mod enumerate;
pub mod lattice;
pub mod model;
pub mod multiscale;
pub mod stats;

pub use lattice::{DualBond, DualSite, Site, Volume};
pub use model::{BoundaryCondition, CouplingParams, SpinConfig};

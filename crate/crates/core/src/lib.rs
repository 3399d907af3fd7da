//! Euclidean first-passage percolation on homogeneous Poisson point sets.
//!
//! The crate is organised bottom-up:
//!
//! * [`pointcloud`] samples and indexes Poisson point sets in rectangular windows.
//! * [`costmodel`] holds the link cost family `φ` and the lens regions `W_φ(a, b)`
//!   that decide which links may appear on a geodesic.
//! * [`geodesic`] builds the empty-lens candidate graph and answers exact
//!   finite-window geodesic and passage-time queries, plus brute-force oracles
//!   and path audits.
//! * [`forest`] builds geodesic trees (rooted at a particle or at a far target
//!   along a direction), coalescence and height-function queries, and the
//!   Euclidean minimum spanning tree.
//! * [`estimators`] runs seeded Monte Carlo experiments for the time constant and
//!   the fluctuation exponents.

pub mod costmodel;
pub mod error;
pub mod estimators;
pub mod forest;
pub mod geodesic;
pub mod pointcloud;
pub mod stats;

pub use costmodel::CostModel;
pub use error::{Error, Result};
pub use geodesic::{CandidateGraph, EndpointMode, PathResult};
pub use pointcloud::{PointSet, Window};

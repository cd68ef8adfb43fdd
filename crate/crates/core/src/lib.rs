//! Analytical pipeline for spatially periodic integrodifference competition
//! models: dispersal kernels, weighted periodic eigenproblems, semi-trivial
//! steady states, spreading speeds with linear-determinacy checks, and forward
//! simulation with invasion-front tracking.

pub mod cli;
pub mod dynamics;
pub mod eigen;
pub mod error;
pub mod grid;
pub mod habitat;
pub mod kernel;
pub mod linalg;
pub mod speeds;
pub mod steady;
pub mod svg;

pub use error::{Error, Result};

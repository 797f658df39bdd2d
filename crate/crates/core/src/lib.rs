//! Causal and bicausal optimal transport between finitely supported measures
//! on product spaces carrying a DAG structure.

pub mod error;
pub mod fixtures;
pub mod inference;
pub mod interpolation;
pub mod io;
pub mod metric;
pub mod model;
pub mod programs;
pub mod random;
pub mod scalar;
pub mod solver;
pub mod wasserstein;

pub use error::{Error, Result};

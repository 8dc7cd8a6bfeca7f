//! Exact and perturbative survival probabilities for continuous-time quantum
//! walks and classical random walks on rings with absorbing traps.

pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod lattice;
pub mod perturbation;
pub mod spectral;

pub use error::{Error, Result};

/// Library version recorded in output manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

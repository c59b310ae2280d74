//! Blind source separation for graph signals.
//!
//! The crate covers the whole pipeline: random graph models and GMA graph
//! signal synthesis ([`graphs`], [`sources`]), the joint diagonalization
//! kernel ([`jointdiag`]), six unmixing estimators ([`separators`]),
//! closed-form Cramér–Rao bounds for Gaussian graph signals ([`crb`]),
//! evaluation metrics ([`metrics`]) and the seeded Monte Carlo experiment
//! driver behind the `graphbss` binary ([`experiments`]).

pub mod crb;
pub mod error;
pub mod experiments;
pub mod graphs;
pub mod jointdiag;
pub mod metrics;
pub mod rng;
pub mod separators;
pub mod sources;
pub mod spectral;

pub use error::{BssError, Result};

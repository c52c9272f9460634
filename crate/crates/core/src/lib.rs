//! Saturated certainty-equivalent adaptive control of input-constrained
//! stochastic linear systems.
//!
//! The crate simulates the block deadbeat controller driven by online least
//! squares, evaluates the closed-form stability and estimation bounds for a
//! given plant, and checks the probabilistic claims by Monte Carlo. The
//! `examples/` directory walks through each capability; the `satadapt` binary
//! exposes the same operations from the command line.

pub mod bounds;
pub mod cli;
pub mod config;
pub mod controller;
pub mod diagnostics;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod linalg;
pub mod rng;
pub mod system;

pub use error::{Error, Result};
pub use linalg::Matrix;

//! Joint state estimation and learning of unmeasured ODE sub-dynamics.
//!
//! A dynamical system is modeled as known physics with selected state
//! derivatives replaced by a small neural field. Given a stream of partial
//! measurements, a per-sample recursion alternates a Kalman-style state
//! update with a Newton-preconditioned parameter update, learning the hidden
//! dynamics and the latent trajectory at the same time. The crate also ships
//! the benchmark systems, data generation, initial-condition reconstruction,
//! and the evaluation and scaling diagnostics used to exercise the method.

pub mod autodiff;
pub mod benchmarks;
pub mod cli;
pub mod error;
pub mod eval;
pub mod filter;
pub mod model;
pub mod net;

pub use error::{Error, Result};

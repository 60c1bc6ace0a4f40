//! Knowledge-aware recommendation on the Lorentz model of hyperbolic space.
//!
//! The crate implements the full pipeline:
//!
//! * [`manifold`] — hyperboloid geometry: inner products, distances,
//!   exp/log maps, and the neural-network primitives built on them.
//! * [`autodiff`] — a tape for reverse-mode differentiation plus a
//!   finite-difference gradient checker.
//! * [`graph`] — the unified user/item/entity graph, file ingestion, and
//!   fixed-size neighbor sampling. [`synthetic`] generates seeded
//!   scale-free graphs for tests and diagnostics.
//! * [`model`] — parameters, knowledge-aware attention, neighborhood
//!   propagation, and the scoring forward pass.
//! * [`training`] — loss, Adam, the fit loop, and checkpointing.
//! * [`eval`] — dataset splits and Top-K ranking metrics.
//! * [`cli`] — the operator-facing commands.

pub mod autodiff;
pub mod cli;
pub mod error;
pub mod eval;
pub mod graph;
pub mod manifold;
pub mod model;
pub mod scalar;
pub mod synthetic;
pub mod training;

pub use error::{Error, Result};

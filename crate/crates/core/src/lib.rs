//! Propagation of probability densities and observables through
//! one-dimensional stochastic hybrid systems.
//!
//! Three jump mechanisms are supported, all resetting to a fixed point `a`:
//! a deterministic flow hitting a guard `b`, a diffusion hitting the same
//! guard, and a diffusion jumping at a state-dependent Poisson rate.
//!
//! * [`fp`] propagates densities with conservative finite volumes.
//! * [`koopman`] propagates observables with the dual generator.
//! * [`mc`] is an independent particle simulation used as an oracle.
//! * [`validation`] ties the three together into scenario reports and the
//!   acceptance checks.

// `!(x > 0.0)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops read closer to the stencil formulas than iterator chains.
#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod fp;
pub mod grid;
pub mod koopman;
pub mod linalg;
pub mod mc;
pub mod model;
pub mod schedule;
pub mod validation;

pub use error::{HybridError, Result};
pub use fp::{FpScheme, Reconstruction};
pub use grid::{gaussian_init, total_mass, DensityField, Grid, ObservableField, TruncationBoundary};
pub use mc::{Ensemble, McParams};
pub use model::{eval_drift, eval_rate, exact_flow_map, HybridSystemSpec, JumpRegime, RateFunction};

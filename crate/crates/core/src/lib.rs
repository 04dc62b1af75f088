//! Slow invariant submanifolds of hyperbolic limit cycles and the phase and
//! amplitude response functions restricted to them.
//!
//! The pipeline runs cycle location, Floquet analysis, bundle and adjoint
//! frames, the Fourier-Taylor recursion for the manifold and the response
//! functions, and validation. See [`pipeline::run_pipeline`].

// `!(x > 0.0)` rejects NaN along with non-positive values; index loops mirror
// the component formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod cycle;
pub mod error;
pub mod export;
pub mod frames;
pub mod jet;
pub mod manifold;
pub mod model;
pub mod ode;
pub mod periodic;
pub mod pipeline;
pub mod response;
pub mod series;
pub mod validation;

pub use error::{Error, Result};

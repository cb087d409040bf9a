//! Numerical core for machine-learning characterization of inkjet-printed
//! coplanar waveguides (CPWs).
//!
//! The crate is `no_std` (it needs `alloc`) and contains no IO. It covers
//! the whole pipeline:
//!
//! - [`physics`]: quasi-TEM conformal-mapping forward model (α, β) of a
//!   CPW on a two-layer dielectric stack.
//! - [`netparams`]: S-parameter/cascade-matrix algebra and multiline
//!   propagation-constant extraction.
//! - [`dataset`]: parametric sweep generation, cleaning, augmentation and
//!   grouped partitioning.
//! - [`features`]: the fitted feature pipeline.
//! - [`models`]: from-scratch regressors (CART, boosting, histogram boosting,
//!   elastic net, k-NN, random forest).
//! - [`automl`]: seeded random search with low-fidelity screening,
//!   bootstrap comparison and leaderboards.
//! - [`extraction`]: inverse characterization and forward verification.
//!
//! File formats and the command-line tool live in the `cpwchar` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod automl;
pub mod dataset;
mod error;
pub mod exec;
pub mod extraction;
pub mod features;
pub mod matrix;
pub mod models;
pub mod netparams;
pub mod physics;
pub mod rng;
pub mod stats;
pub mod target;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use physics::{CpwGeometry, MaterialParams, PropagationConstant};
pub use target::Target;

//! File formats, run artifacts and the command-line pipeline for printed
//! CPW material characterization. The numerics live in `cpwchar_core`.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod csvio;
pub mod runner;
pub mod touchstone;

pub use config::RunConfig;

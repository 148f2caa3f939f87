//! Config-driven experiments on top of `schmidt-core`: run, validate, sweep.

pub mod config;
pub mod error;
pub mod output;
pub mod runner;
pub mod validate;

//! Local energetics of autonomous bipartite quantum systems, obtained by
//! following the Schmidt decomposition of the global state in time.
//!
//! The pipeline for a pure initial state is
//! propagate → [`schmidt::align_track`] → [`effective::effective_series`] →
//! [`thermo::energies`] and the flux ledgers; [`analysis::analyze_pure`]
//! chains the first steps. Mixed states go through [`mixed::run_ensemble`].

pub mod analysis;
pub mod assign;
pub mod dynamics;
pub mod effective;
pub mod error;
pub mod gauge;
pub mod hilbert;
pub mod mixed;
pub mod numkernel;
pub mod presets;
pub mod schmidt;
pub mod thermo;

pub use error::{Error, Result};

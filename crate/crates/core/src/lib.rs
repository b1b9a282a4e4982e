//! Simulation of cross-talk in a trapped-ion register addressed by a static
//! magnetic field gradient.
//!
//! The crate computes ion positions and the resulting Zeeman-shifted
//! transition frequencies, evolves each ion's four hyperfine levels under
//! microwave pulses, runs randomized-phase benchmarking with simulated
//! fluorescence readout, fits the decay of spectator fidelities, and
//! searches for pulse parameters that suppress cross-talk.

pub mod analysis;
pub mod benchmark;
pub mod chain;
pub mod error;
pub mod optimizer;
pub mod pulse;

pub use error::{Error, Result};
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

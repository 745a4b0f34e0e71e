//! Simulation and analysis of counting claims about marbles under GRW-type
//! spontaneous localization.
//!
//! * [`state`]: wavefunctions over marble, register and pointer configurations.
//! * [`fuzzylink`]: location claims under the fuzzy eigenstate-eigenvalue
//!   link and enumeration-principle checks.
//! * [`massdensity`]: per-cell mass expectation, variance and accessibility.
//! * [`grw`]: stochastic localization hits, trajectories and collapse times.
//! * [`counting`]: register coupling and the anomaly-suppression experiment.
//! * [`cli`]: scenario configuration and report emission for the `grwm` binary.

pub mod cli;
pub mod counting;
pub mod error;
pub mod fuzzylink;
pub mod grw;
pub mod massdensity;
pub mod state;

pub use error::{Error, Result};

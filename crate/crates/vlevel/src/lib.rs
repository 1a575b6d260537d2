//! IO, parallelism and command-line shell around [`vlevel_core`].
//!
//! * [`scan`]: parallel pulse-area sweeps and checkpointed rephasing scans.
//! * [`spectrum`]: time-domain grid to 2D spectrum.
//! * [`experiments`]: Θ1 scans, coherent-control searches, phase maps.
//! * [`gridfile`], [`csvio`]: artifact formats.
//! * [`config`], [`cli`]: TOML configuration and the `vlevel` binary.

pub mod cli;
pub mod config;
pub mod csvio;
pub mod error;
pub mod experiments;
pub mod gridfile;
pub mod scan;
pub mod spectrum;

pub use error::{Error, Result};
pub use vlevel_core as core;

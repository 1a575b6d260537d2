//! Optical Bloch engine for V-type three-level systems.
//!
//! A common ground state `|0⟩` couples to two excited states `|1⟩` and `|2⟩`
//! split by `Δ`. This crate integrates the extended optical Bloch equations
//! for arbitrary trains of Gaussian pulses, reproduces single-pulse
//! pulse-area sweeps, extracts phase-cycled rephasing signals and analyses the
//! resulting two-dimensional spectra (peak location, peak visibility, phase
//! tracking).
//!
//! Everything here is `no_std` (with `alloc`) and free of IO. Parallel sweeps,
//! Fourier transforms, file formats and the command line live in the
//! companion `vlevel` crate.
//!
//! Units: energies in meV, times in fs, angles in rad. Field amplitudes are
//! given in meV per unit dipole, so `μE/ħ` is an angular frequency in rad/fs.
#![no_std]

extern crate alloc;

pub mod analysis;
pub mod constants;
pub mod density;
mod error;
pub mod integrator;
pub mod model;
pub mod obe;
pub mod phase_cycle;
pub mod single_pulse;
pub mod twodcs;

pub use constants::{PhysicalConstants, HBAR, PLANCK};
pub use density::DensityMatrix;
pub use error::{Error, Result};
pub use model::{DurationConvention, Pulse, PulseSequence, RateConvention, SystemParams};
pub use num_complex::Complex64;
pub use obe::{evolve, field_at, free_evolve, obe_rhs, FieldMode, Propagator, SolverOptions, Trajectory};

//! Simulation and analysis toolkit for dynamical-decoupling quantum sensing
//! with per-unit random pulse phases.
//!
//! The crate is organised bottom-up:
//!
//! * [`sequence`] pulse units, repetition plans, built-in families and the
//!   counter-based phase generator,
//! * [`seqdsl`] a small text format for custom pulse units,
//! * [`modulation`] modulation functions, their Fourier amplitudes and the
//!   statistics of the random-phase factor,
//! * [`dynamics`] exact propagation of the sensor qubit (optionally with
//!   nuclear spins) under imperfect finite-width pulses,
//! * [`spectroscopy`] frequency sweeps, robustness maps and protocol
//!   comparisons built on the layers above.

pub mod dynamics;
pub mod error;
pub mod modulation;
pub mod seqdsl;
pub mod sequence;
pub mod spectroscopy;

pub use error::{Error, Result};

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;

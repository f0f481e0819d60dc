//! Propagation of the sensor qubit, alone or coupled to nuclear spins, under
//! finite-width pulses with static control errors.
//!
//! Everything is computed in the frame rotating with the drive. Between
//! pulses the Hamiltonian is
//!
//! ```text
//! H_free  = ½σ_z ⊗ Σ_n (A∥ I_z + A⊥ I_x) + Σ_n ω_n I_z + ½Δ σ_z
//! H_pulse = H_free + ½Ω(1+δ)(σ_x cos φ + σ_y sin φ)
//! ```
//!
//! with the qubit as the most significant tensor factor. Each segment is
//! time independent and exponentiated exactly.

mod classical;
mod faulty;
mod gyro;
pub mod linalg;
mod propagate;

pub use classical::{classical_signal, lab_frame_reference, ClassicalOptions};
pub use faulty::{
    extract_params, faulty_pulse, fidelity, physical_pulse_params, unit_offdiagonal_analysis,
    AccumulationMode, ErrorAccumulationReport, FaultyPulseParams,
};
pub use gyro::{gyromagnetic_ratio_hz_per_gauss, larmor_angular, species};
pub use propagate::{
    nuclear_signal, propagate_plan, propagate_plan_direct, repeat_unit, unit_propagator, SignalModel,
    MAX_SPINS,
};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::C64;

/// Static control errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorModel {
    /// Relative Rabi-frequency bias δ, `|δ| < 1`.
    pub amplitude_fraction: f64,
    /// Drive detuning Δ in rad/s.
    pub detuning: f64,
    /// Extra phase on pulses whose nominal phase is an odd multiple of π/2.
    pub y_phase_offset: f64,
    /// Phenomenological coherence time; multiplies the final coherence by
    /// `exp(−T_total/T2)`.
    pub decoherence_t2: Option<f64>,
    /// Whether Δ also acts between pulses. It always acts during pulses.
    pub detuning_during_free: bool,
    /// Apply the amplitude and detuning errors to the two readout π/2
    /// pulses as well.
    pub faulty_readout: bool,
}

impl Default for ErrorModel {
    fn default() -> Self {
        Self {
            amplitude_fraction: 0.0,
            detuning: 0.0,
            y_phase_offset: 0.0,
            decoherence_t2: None,
            detuning_during_free: true,
            faulty_readout: false,
        }
    }
}

impl ErrorModel {
    pub fn ideal() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude_fraction.abs() < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "amplitude fraction must satisfy |δ| < 1, got {}",
                self.amplitude_fraction
            )));
        }
        if !self.detuning.is_finite() || !self.y_phase_offset.is_finite() {
            return Err(Error::InvalidParameter("error model values must be finite".into()));
        }
        if let Some(t2) = self.decoherence_t2 {
            if !(t2 > 0.0) {
                return Err(Error::InvalidParameter(format!("T2 must be positive, got {t2:e}")));
            }
        }
        Ok(())
    }

    /// Phase actually applied for a pulse of nominal phase `phase`.
    pub(crate) fn applied_phase(&self, phase: f64) -> f64 {
        if self.y_phase_offset != 0.0 && is_y_type(phase) {
            phase + self.y_phase_offset
        } else {
            phase
        }
    }
}

fn is_y_type(phase: f64) -> bool {
    let r = phase.rem_euclid(std::f64::consts::PI) - std::f64::consts::FRAC_PI_2;
    r.abs() < 1e-9
}

/// A nuclear spin-½ target. Angular quantities in rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpin {
    pub a_perp: f64,
    pub a_par: f64,
    /// Nuclear precession frequency ω_n, typically γB.
    pub larmor: f64,
    pub label: String,
}

impl TargetSpin {
    pub fn new(label: impl Into<String>, a_perp: f64, a_par: f64, larmor: f64) -> Result<Self> {
        if !(a_perp >= 0.0) || !a_par.is_finite() || !larmor.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "invalid spin parameters: a_perp={a_perp:e}, a_par={a_par:e}, larmor={larmor:e}"
            )));
        }
        Ok(Self {
            a_perp,
            a_par,
            larmor,
            label: label.into(),
        })
    }
}

/// `E(t) = b cos(2πν₀t + φ)` coupling to `½σ_z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalField {
    /// `b` in rad/s.
    pub amplitude: f64,
    pub frequency_hz: f64,
    pub phase: f64,
    /// Average the population over a uniform grid of field phases.
    pub phase_averaged: bool,
}

impl ClassicalField {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0) || !self.frequency_hz.is_finite() || !self.phase.is_finite() {
            return Err(Error::InvalidParameter("invalid classical field".into()));
        }
        Ok(())
    }
}

/// A unitary on qubit ⊗ spins.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagator {
    pub matrix: DMatrix<C64>,
}

impl Propagator {
    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: DMatrix::identity(dim, dim),
        }
    }

    /// `⟨0|U|1⟩` of the qubit block, for 2×2 propagators.
    pub fn offdiagonal(&self) -> C64 {
        self.matrix[(0, 1)]
    }

    pub fn unitarity_defect(&self) -> f64 {
        linalg::unitarity_defect(&self.matrix)
    }
}

impl From<linalg::M2> for Propagator {
    fn from(m: linalg::M2) -> Self {
        Self {
            matrix: linalg::to_dynamic(&m),
        }
    }
}

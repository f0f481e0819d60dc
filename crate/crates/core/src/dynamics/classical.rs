//! Sensor response to a classical field `E(t) = b cos(2πν₀t + φ)` coupling
//! to `½σ_z`.
//!
//! Between pulses everything commutes with σ_z and the evolution is the
//! closed-form phase `∫E dt`. Inside a finite pulse the field is treated in
//! the interaction picture of the (errored) pulse Hamiltonian `H_p`,
//! `H_I(t) = ½E(t)·U_p†(t) σ_z U_p(t)`, and integrated with the fourth-order
//! two-node Gauss–Legendre Magnus step.

use std::f64::consts::{PI, TAU};

use super::linalg::{c, expm_herm2, rotation, sigma_x, sigma_y, sigma_z, M2};
use super::propagate::{read_population, readout_pulse};
use super::{ClassicalField, ErrorModel};
use crate::error::{Error, Result};
use crate::sequence::{Pulse, SequencePlan};

/// Largest number of substep doublings tried before giving up.
const MAX_DOUBLINGS: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalOptions {
    /// Initial Magnus substeps per finite pulse, at least 16.
    pub substeps_per_pulse: usize,
    /// Field phases averaged over when the field is phase averaged, at least 16.
    pub phase_grid: usize,
    /// Accepted population change between successive substep doublings.
    pub tolerance: f64,
}

impl Default for ClassicalOptions {
    fn default() -> Self {
        Self {
            substeps_per_pulse: 16,
            phase_grid: 16,
            tolerance: 1e-6,
        }
    }
}

impl ClassicalOptions {
    fn validate(&self) -> Result<()> {
        if self.substeps_per_pulse < 16 {
            return Err(Error::InvalidParameter(format!(
                "substeps_per_pulse must be at least 16, got {}",
                self.substeps_per_pulse
            )));
        }
        if self.phase_grid < 16 {
            return Err(Error::InvalidParameter(format!(
                "phase grid must have at least 16 points, got {}",
                self.phase_grid
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
struct Field {
    b: f64,
    w: f64,
    phi: f64,
}

impl Field {
    fn at(&self, t: f64) -> f64 {
        self.b * (self.w * t + self.phi).cos()
    }

    /// `∫_a^b E dt`
    fn integral(&self, a: f64, b: f64) -> f64 {
        if self.w == 0.0 {
            self.b * self.phi.cos() * (b - a)
        } else {
            self.b / self.w * ((self.w * b + self.phi).sin() - (self.w * a + self.phi).sin())
        }
    }
}

/// One pulse of the realized train, with its applied phase.
struct Segment {
    start: f64,
    end: f64,
    phase: f64,
    angle: f64,
    rabi: f64,
}

fn realized_pulses(plan: &SequencePlan, phases: &[f64], errors: &ErrorModel) -> Result<Vec<Segment>> {
    plan.check_phases(phases)?;
    let t_unit = plan.unit().duration();
    let mut out = Vec::with_capacity(plan.unit().len() * phases.len());
    for (m, &phi) in phases.iter().enumerate() {
        let offset = m as f64 * t_unit;
        for p in plan.unit().pulses() {
            out.push(segment(p, offset, errors.applied_phase(p.phase) + phi));
        }
    }
    Ok(out)
}

fn segment(p: &Pulse, offset: f64, phase: f64) -> Segment {
    Segment {
        start: offset + p.start(),
        end: offset + p.end(),
        phase,
        angle: p.nominal_angle,
        rabi: p.rabi_frequency,
    }
}

fn free_step(errors: &ErrorModel, field: &Field, a: f64, b: f64) -> M2 {
    if b <= a {
        return M2::identity();
    }
    let mut phase = field.integral(a, b);
    if errors.detuning_during_free {
        phase += errors.detuning * (b - a);
    }
    let e = c(0.0, -0.5 * phase).exp();
    M2::new(e, c(0.0, 0.0), c(0.0, 0.0), e.conj())
}

fn pulse_hamiltonian(errors: &ErrorModel, s: &Segment) -> M2 {
    let w = 0.5 * s.rabi * (1.0 + errors.amplitude_fraction);
    sigma_x() * c(w * s.phase.cos(), 0.0) + sigma_y() * c(w * s.phase.sin(), 0.0) + sigma_z() * c(0.5 * errors.detuning, 0.0)
}

/// Pulse propagator including the field, `U_p(τ_p)·U_I`.
fn pulse_step(errors: &ErrorModel, field: &Field, s: &Segment, substeps: usize) -> M2 {
    if s.end <= s.start {
        return rotation(s.phase, s.angle * (1.0 + errors.amplitude_fraction));
    }
    let hp = pulse_hamiltonian(errors, s);
    let len = s.end - s.start;
    let control = |t: f64| expm_herm2(&(hp * c(t, 0.0)));
    let frame_z = |t: f64| {
        let u = control(t);
        u.adjoint() * sigma_z() * u * c(0.5 * field.at(s.start + t), 0.0)
    };
    let h = len / substeps as f64;
    let d = 3f64.sqrt() / 6.0;
    let mut ui = M2::identity();
    for k in 0..substeps {
        let t0 = k as f64 * h;
        let h1 = frame_z(t0 + (0.5 - d) * h);
        let h2 = frame_z(t0 + (0.5 + d) * h);
        let comm = h1 * h2 - h2 * h1;
        let kmat = (h1 + h2) * c(0.5 * h, 0.0) + comm * c(0.0, 3f64.sqrt() / 12.0 * h * h);
        ui = expm_herm2(&kmat) * ui;
    }
    control(len) * ui
}

fn sequence_propagator(pulses: &[Segment], total: f64, errors: &ErrorModel, field: &Field, substeps: usize) -> M2 {
    let mut u = M2::identity();
    let mut cursor = 0.0;
    for s in pulses {
        u = free_step(errors, field, cursor, s.start) * u;
        u = pulse_step(errors, field, s, substeps) * u;
        cursor = s.end;
    }
    free_step(errors, field, cursor, total) * u
}

fn field_phases(field: &ClassicalField, grid: usize) -> Vec<f64> {
    if field.phase_averaged {
        (0..grid).map(|k| TAU * k as f64 / grid as f64).collect()
    } else {
        vec![field.phase]
    }
}

fn population(plan: &SequencePlan, errors: &ErrorModel, rabi: f64, u: M2) -> f64 {
    let prep = readout_pulse(errors, rabi, 0.5 * PI);
    let psi = prep.column(0).into_owned();
    let out = u * psi;
    let rho = out * out.adjoint();
    read_population(rho, errors, plan.readout_basis(), rabi, plan.total_time())
}

fn check_inputs(plan: &SequencePlan, errors: &ErrorModel, field: &ClassicalField) -> Result<(Field, f64)> {
    errors.validate()?;
    field.validate()?;
    let rabi = plan.unit().pulses()[0].rabi_frequency;
    Ok((
        Field {
            b: field.amplitude,
            w: TAU * field.frequency_hz,
            phi: field.phase,
        },
        rabi,
    ))
}

/// Readout population of the sensor after `plan` with per-unit global
/// phases `phases` in the field. Substeps per pulse are doubled from
/// `options.substeps_per_pulse` until the population changes by at most
/// `options.tolerance`.
pub fn classical_signal(
    plan: &SequencePlan,
    phases: &[f64],
    errors: &ErrorModel,
    field: &ClassicalField,
    options: &ClassicalOptions,
) -> Result<f64> {
    options.validate()?;
    let (base, rabi) = check_inputs(plan, errors, field)?;
    let pulses = realized_pulses(plan, phases, errors)?;
    let total = plan.total_time();
    let finite = pulses.iter().any(|s| s.end > s.start);
    let evaluate = |substeps: usize| -> f64 {
        let grid = field_phases(field, options.phase_grid);
        let sum: f64 = grid
            .iter()
            .map(|&phi| {
                let f = Field { phi, ..base };
                population(plan, errors, rabi, sequence_propagator(&pulses, total, errors, &f, substeps))
            })
            .sum();
        sum / grid.len() as f64
    };
    let mut substeps = options.substeps_per_pulse;
    let mut previous = evaluate(substeps);
    if !finite || field.amplitude == 0.0 {
        return Ok(previous);
    }
    let mut change = f64::INFINITY;
    for _ in 0..MAX_DOUBLINGS {
        substeps *= 2;
        let next = evaluate(substeps);
        change = (next - previous).abs();
        previous = next;
        if change <= options.tolerance {
            return Ok(next);
        }
    }
    Err(Error::StepConvergence { substeps, change })
}

/// Brute-force reference for [`classical_signal`]: the full rotating-frame
/// Hamiltonian (drive, detuning and field together) stepped with the
/// exponential midpoint rule at `δt ≤ τ/steps_per_tau`, `τ` being the mean
/// pulse spacing.
pub fn lab_frame_reference(
    plan: &SequencePlan,
    phases: &[f64],
    errors: &ErrorModel,
    field: &ClassicalField,
    steps_per_tau: usize,
) -> Result<f64> {
    if steps_per_tau == 0 {
        return Err(Error::InvalidParameter("steps_per_tau must be positive".into()));
    }
    let (base, rabi) = check_inputs(plan, errors, field)?;
    let pulses = realized_pulses(plan, phases, errors)?;
    let total = plan.total_time();
    let tau = plan.unit().duration() / plan.unit().len() as f64;
    let dt = tau / steps_per_tau as f64;
    let grid = field_phases(field, ClassicalOptions::default().phase_grid);
    let mut acc = 0.0;
    for &phi in &grid {
        let f = Field { phi, ..base };
        let free_z = if errors.detuning_during_free { errors.detuning } else { 0.0 };
        let run = |u: M2, a: f64, b: f64, h0: M2, delta: f64| -> M2 {
            if b <= a {
                return u;
            }
            let n = ((b - a) / dt).ceil().max(1.0) as usize;
            let h = (b - a) / n as f64;
            (0..n).fold(u, |u, k| {
                let t = a + (k as f64 + 0.5) * h;
                let ham = h0 + sigma_z() * c(0.5 * (f.at(t) + delta), 0.0);
                expm_herm2(&(ham * c(h, 0.0))) * u
            })
        };
        let zero = M2::zeros();
        let mut u = M2::identity();
        let mut cursor = 0.0;
        for s in &pulses {
            u = run(u, cursor, s.start, zero, free_z);
            if s.end > s.start {
                let drive = pulse_hamiltonian(errors, s) - sigma_z() * c(0.5 * errors.detuning, 0.0);
                u = run(u, s.start, s.end, drive, errors.detuning);
            } else {
                u = rotation(s.phase, s.angle * (1.0 + errors.amplitude_fraction)) * u;
            }
            cursor = s.end;
        }
        u = run(u, cursor, total, zero, free_z);
        acc += population(plan, errors, rabi, u);
    }
    Ok(acc / grid.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::{build_named_unit, PhaseMode, ReadoutBasis};

    fn plan(tp: f64, m: usize) -> SequencePlan {
        let unit = build_named_unit("XY8", 1e-6, tp, PI / tp).unwrap();
        SequencePlan::new(unit, m, PhaseMode::Randomized { seed: 1, realizations: 2 }, ReadoutBasis::X).unwrap()
    }

    fn field(b: f64, nu: f64, phase: f64) -> ClassicalField {
        ClassicalField {
            amplitude: b,
            frequency_hz: nu,
            phase,
            phase_averaged: false,
        }
    }

    #[test]
    fn zero_field_full_population() {
        let p = plan(1e-7, 3);
        let v = classical_signal(&p, &[0.0, 1.0, 2.0], &ErrorModel::ideal(), &field(0.0, 5e5, 0.0), &Default::default()).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn resonant_delta_pulses_accumulate_square_wave_phase() {
        let unit = build_named_unit("XY8", 1e-6, 1e-7, PI / 1e-7).unwrap().with_instantaneous_pulses();
        let p = SequencePlan::standard(unit, 4).unwrap();
        let b = 2.0 * PI * 20e3;
        // F_z is −cos(πt/τ)'s sign, so φ = π gives the matched quadrature
        let v = classical_signal(&p, &p.zero_phases(), &ErrorModel::ideal(), &field(b, 5e5, PI), &Default::default()).unwrap();
        let phase = 2.0 / PI * b * p.total_time();
        assert!((v - (0.5 * phase).cos().powi(2)).abs() < 1e-12, "{v}");
    }

    #[test]
    fn converges_and_matches_reference() {
        let p = plan(1e-7, 2);
        let e = ErrorModel {
            amplitude_fraction: 0.02,
            detuning: 2.0 * PI * 0.1e6,
            ..Default::default()
        };
        let f = field(2.0 * PI * 100e3, 5e5, 0.3);
        let a = classical_signal(&p, &[0.4, 2.0], &e, &f, &Default::default()).unwrap();
        let b = lab_frame_reference(&p, &[0.4, 2.0], &e, &f, 2000).unwrap();
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn options_are_checked() {
        let p = plan(1e-7, 1);
        let o = ClassicalOptions {
            substeps_per_pulse: 8,
            ..Default::default()
        };
        assert!(classical_signal(&p, &[0.0], &ErrorModel::ideal(), &field(1.0, 1.0, 0.0), &o).is_err());
    }
}

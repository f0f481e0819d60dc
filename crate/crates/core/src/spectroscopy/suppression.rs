use std::f64::consts::{PI, TAU};

use rayon::prelude::*;

use super::build_unit;
use crate::dynamics::{classical_signal, ClassicalField, ClassicalOptions, ErrorModel};
use crate::error::{Error, Result};
use crate::modulation::{unit_fourier, Component};
use crate::sequence::{phase_stream, SequencePlan};
use crate::C64;

/// Below this `|f̃|` a harmonic is treated as absent.
const NO_RESPONSE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SuppressionConfig {
    pub family: String,
    pub tau: f64,
    pub pulse_duration: f64,
    pub repetitions: Vec<usize>,
    /// Harmonic `q` of the unit; the field oscillates at `q/T_unit`. For XY8
    /// `q = 2` is the peak seen at twice the field frequency.
    pub harmonic: u32,
    pub realizations: usize,
    pub seed: u64,
    /// Spurious rotation angle `½ b |f| T` of the standard sequence, which
    /// fixes the field amplitude for each M.
    pub strength: f64,
    pub options: ClassicalOptions,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuppressionRow {
    pub repetitions: usize,
    /// `b` in rad/s.
    pub field_amplitude: f64,
    /// Field phase maximising the standard contrast.
    pub field_phase: f64,
    pub standard_contrast: f64,
    pub randomized_contrast: f64,
    pub randomized_std_error: f64,
    pub ratio: f64,
    /// `1/(2M)`
    pub predicted: f64,
    /// Weak-field prediction from the unit amplitudes at `±q`, see
    /// [`first_order_ratio`].
    pub first_order: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuppressionReport {
    pub field_frequency_hz: f64,
    /// DD frequency `1/(2τ)` at which the response shows up.
    pub dd_frequency_hz: f64,
    pub unit_amplitude_perp: f64,
    pub unit_amplitude_z: f64,
    pub rows: Vec<SuppressionRow>,
    pub warnings: Vec<String>,
}

struct Setup<'a> {
    config: &'a SuppressionConfig,
    plan: SequencePlan,
    ideal: SequencePlan,
    nu: f64,
    b: f64,
}

impl Setup<'_> {
    fn field(&self, phase: f64) -> ClassicalField {
        ClassicalField {
            amplitude: self.b,
            frequency_hz: self.nu,
            phase,
            phase_averaged: false,
        }
    }

    fn contrast(&self, phases: &[f64], field_phase: f64) -> Result<f64> {
        let f = self.field(field_phase);
        let e = ErrorModel::ideal();
        let p = classical_signal(&self.plan, phases, &e, &f, &self.config.options)?;
        let base = classical_signal(&self.ideal, &self.ideal.zero_phases(), &e, &f, &self.config.options)?;
        Ok((p - base).abs())
    }

    /// The standard contrast is `A + B cos 2φ + C sin 2φ` to leading order;
    /// fit it on eight phases and return the maximiser.
    fn best_phase(&self) -> Result<f64> {
        let zeros = self.plan.zero_phases();
        let (mut b, mut c) = (0.0, 0.0);
        for k in 0..8 {
            let phi = PI * k as f64 / 8.0;
            let v = self.contrast(&zeros, phi)?;
            b += v * (2.0 * phi).cos();
            c += v * (2.0 * phi).sin();
        }
        Ok(0.5 * c.atan2(b).rem_euclid(TAU))
    }
}

/// Randomized over standard contrast to first order in the field.
///
/// The field `b cos(2πνt + φ)` couples through both `f̃(q)` and `f̃(−q)`,
/// so the standard sequence rotates the sensor about the axis `arg w` with
/// `w = e^{iφ} f̃(−q) + e^{−iφ} f̃(q)`, and randomization multiplies `w` by
/// `Z`. With the sensor along +x the ratio of mean contrasts is
/// `1 / (2M sin²(arg w))`, which reduces to `1/(2M)` only when `w` is
/// perpendicular to x.
pub fn first_order_ratio(f_minus: C64, f_plus: C64, field_phase: f64, repetitions: usize) -> f64 {
    let w = C64::from_polar(1.0, field_phase) * f_minus + C64::from_polar(1.0, -field_phase) * f_plus;
    0.5 / (repetitions as f64 * w.arg().sin().powi(2))
}

/// Standard against randomized contrast of a classical field at a spurious
/// harmonic, for each repetition count. Contrast is `|P − P_ideal|` at the
/// resonance itself, with `P_ideal` from error-free δ-pulses.
pub fn spurious_suppression_report(config: &SuppressionConfig) -> Result<SuppressionReport> {
    if config.repetitions.is_empty() || config.repetitions.contains(&0) {
        return Err(Error::InvalidParameter("repetition counts must be positive".into()));
    }
    if config.harmonic == 0 || config.realizations < 2 {
        return Err(Error::InvalidParameter("need harmonic ≥ 1 and at least 2 realizations".into()));
    }
    if !(config.strength > 0.0) {
        return Err(Error::InvalidParameter("strength must be positive".into()));
    }
    let unit = build_unit(&config.family, config.tau, config.pulse_duration)?;
    let q = config.harmonic as f64;
    let f_plus = unit_fourier(&unit, q, Component::Perp);
    let f_minus = unit_fourier(&unit, -q, Component::Perp);
    let fp = f_plus.norm();
    let fz = unit_fourier(&unit, q, Component::Z).norm();
    let mut warnings = Vec::new();
    if fp < NO_RESPONSE {
        warnings.push(format!("no spurious response: harmonic {} of {} has |f_perp| = {fp:.1e}", config.harmonic, config.family));
    }
    if fz > NO_RESPONSE {
        warnings.push(format!("harmonic {} also has an F_z response (|f_z| = {fz:.3e})", config.harmonic));
    }
    let nu = q / unit.duration();
    // with no response the amplitude is set as if |f| were 2/π
    let scale = if fp < NO_RESPONSE { 2.0 / PI } else { fp };
    let mut rows = Vec::new();
    for &m in &config.repetitions {
        let plan = SequencePlan::standard(unit.clone(), m)?;
        let ideal = plan.with_unit(unit.with_instantaneous_pulses());
        let b = 2.0 * config.strength / (scale * plan.total_time());
        let setup = Setup {
            config,
            plan,
            ideal,
            nu,
            b,
        };
        let phase = setup.best_phase()?;
        let standard = setup.contrast(&setup.plan.zero_phases(), phase)?;
        let draws = (0..config.realizations as u64)
            .into_par_iter()
            .map(|r| setup.contrast(&phase_stream(config.seed, r, 0, m), phase))
            .collect::<Result<Vec<f64>>>()?;
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        rows.push(SuppressionRow {
            repetitions: m,
            field_amplitude: b,
            field_phase: phase,
            standard_contrast: standard,
            randomized_contrast: mean,
            randomized_std_error: (var / n).sqrt(),
            ratio: if standard > 0.0 { mean / standard } else { f64::NAN },
            predicted: 0.5 / m as f64,
            first_order: first_order_ratio(f_minus, f_plus, phase, m),
        });
    }
    Ok(SuppressionReport {
        field_frequency_hz: nu,
        dd_frequency_hz: 0.5 / config.tau,
        unit_amplitude_perp: fp,
        unit_amplitude_z: fz,
        rows,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(tp: f64, ms: Vec<usize>) -> SuppressionConfig {
        SuppressionConfig {
            family: "XY8".into(),
            tau: 1e-6,
            pulse_duration: tp,
            repetitions: ms,
            harmonic: 2,
            realizations: 200,
            seed: 4,
            strength: 0.1,
            options: ClassicalOptions::default(),
        }
    }

    #[test]
    fn ratio_follows_first_order_prediction() {
        let r = spurious_suppression_report(&config(2e-7, vec![10])).unwrap();
        let row = r.rows[0];
        assert!(r.warnings.is_empty(), "{:?}", r.warnings);
        // XY8 has f̃(−q) = −f̃(q) with arg f̃(q) = π/4, so sin²(arg w) = ½
        assert!((row.first_order - 0.1).abs() < 1e-9, "{row:?}");
        let se = row.randomized_std_error / row.standard_contrast;
        assert!((row.ratio - row.first_order).abs() < 3.0 * se, "{row:?}");
        assert!((r.dd_frequency_hz - 2.0 * r.field_frequency_hz).abs() < 1e-6);
    }

    #[test]
    fn first_order_ratio_limits() {
        // a single sideband perpendicular to x gives the bare 1/(2M)
        let v = first_order_ratio(C64::new(0.0, 0.0), C64::new(0.0, 0.3), 0.0, 4);
        assert!((v - 0.125).abs() < 1e-15);
        let v = first_order_ratio(C64::new(0.0, 0.0), C64::from_polar(0.3, 0.25 * PI), 0.5 * PI, 4);
        assert!((v - 0.25).abs() < 1e-12);
    }

    #[test]
    fn delta_pulses_have_no_spurious_response() {
        let r = spurious_suppression_report(&SuppressionConfig {
            realizations: 4,
            ..config(0.0, vec![3])
        })
        .unwrap();
        assert!(r.warnings.iter().any(|w| w.starts_with("no spurious response")));
        assert!(r.rows[0].standard_contrast < 1e-9);
        assert!(r.rows[0].randomized_contrast < 1e-9);
    }
}

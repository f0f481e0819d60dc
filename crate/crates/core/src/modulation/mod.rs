//! Modulation functions of a pulse train and their Fourier amplitudes.
//!
//! Conventions: `σ_z = |0⟩⟨0| − |1⟩⟨1|`, a pulse of phase `φ` and area `θ`
//! is `exp[−iθ/2 (σ_x cos φ + σ_y sin φ)]`, and the toggling-frame operator
//! `U†σ_zU = F_z σ_z + F_⊥|1⟩⟨0| + F_⊥*|0⟩⟨1|`. Inside the `j`-th pulse
//! (1-based, counted over the whole train)
//!
//! ```text
//! F_z = (−1)^(j−1) cos θ
//! F_⊥ = i (−1)^(j−1) exp{−i[2 Σ_{l<j} (−1)^l φ_l + (−1)^j φ_j]} sin θ
//! ```
//!
//! and between pulses `F_z = (−1)^(pulses so far)`, `F_⊥ = 0`. Shifting all
//! phases of a unit by `Φ` multiplies its `F_⊥` by `e^{iΦ}`.

mod zstats;

pub use zstats::{z_factor, z_statistics, ZFactor, ZStatistics};

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::sequence::{PulseTrain, PulseUnit, SequencePlan};
use crate::C64;

/// Agreement required between the two Fourier-amplitude paths.
pub const FACTORIZATION_TOLERANCE: f64 = 1e-10;

/// Minimum number of trace samples inside the shortest finite pulse.
pub const MIN_SAMPLES_PER_PULSE: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Z,
    Perp,
}

/// Sampled modulation functions.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulationTrace {
    pub time_grid: Vec<f64>,
    pub fz: Vec<f64>,
    pub fperp: Vec<C64>,
}

#[derive(Debug, Clone, Copy)]
struct PulseSeg {
    start: f64,
    end: f64,
    rabi: f64,
    /// `(−1)^(j−1)`
    sign: f64,
    /// prefactor of `sin θ` in `F_⊥`
    coeff: C64,
}

/// Piecewise closed form of `F_z` and `F_⊥` for a pulse train.
#[derive(Debug, Clone)]
pub struct ModulationModel {
    total_time: f64,
    pulses: Vec<PulseSeg>,
}

/// `∫_0^L e^{iκu} du`
fn segment_integral(kappa: f64, len: f64) -> C64 {
    let x = 0.5 * kappa * len;
    let sinc = if x.abs() < 1e-8 { 1.0 - x * x / 6.0 } else { x.sin() / x };
    C64::from_polar(len * sinc, x)
}

impl ModulationModel {
    pub fn from_train(train: &PulseTrain) -> Self {
        let mut s = 0.0f64;
        let pulses = train
            .pulses
            .iter()
            .enumerate()
            .map(|(idx, p)| {
                let j = idx + 1;
                let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
                // (−1)^j = −sign
                let arg = 2.0 * s - sign * p.phase;
                let coeff = C64::i() * sign * C64::from_polar(1.0, -arg);
                s = (s - sign * p.phase).rem_euclid(PI);
                PulseSeg {
                    start: p.start(),
                    end: p.end(),
                    rabi: p.rabi_frequency,
                    sign,
                    coeff,
                }
            })
            .collect();
        Self {
            total_time: train.total_time,
            pulses,
        }
    }

    pub fn from_unit(unit: &PulseUnit) -> Self {
        Self::from_train(&PulseTrain::from_unit(unit))
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    /// `(F_z(t), F_⊥(t))`. A time exactly on a pulse edge is evaluated as
    /// inside the pulse, which is continuous with the free value.
    pub fn at(&self, t: f64) -> (f64, C64) {
        // first pulse that has not ended before t
        let idx = self.pulses.partition_point(|p| p.end < t);
        if let Some(p) = self.pulses.get(idx) {
            if t >= p.start && p.end > p.start {
                let theta = p.rabi * (t - p.start);
                return (p.sign * theta.cos(), p.coeff * theta.sin());
            }
        }
        let fz = if idx % 2 == 0 { 1.0 } else { -1.0 };
        (fz, C64::new(0.0, 0.0))
    }

    /// `∫_0^{T} F(t) e^{−iωt} dt` over the model's full duration.
    pub fn integral(&self, omega: f64, component: Component) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        let mut cursor = 0.0;
        for (idx, p) in self.pulses.iter().enumerate() {
            if component == Component::Z {
                let v = if idx % 2 == 0 { 1.0 } else { -1.0 };
                acc += v * C64::from_polar(1.0, -omega * cursor) * segment_integral(-omega, p.start - cursor);
            }
            let len = p.end - p.start;
            if len > 0.0 {
                let up = segment_integral(p.rabi - omega, len);
                let down = segment_integral(-p.rabi - omega, len);
                let shift = C64::from_polar(1.0, -omega * p.start);
                acc += match component {
                    Component::Z => shift * p.sign * 0.5 * (up + down),
                    Component::Perp => shift * p.coeff * (up - down) / C64::new(0.0, 2.0),
                };
            }
            cursor = p.end;
        }
        if component == Component::Z {
            let v = if self.pulses.len() % 2 == 0 { 1.0 } else { -1.0 };
            acc += v * C64::from_polar(1.0, -omega * cursor) * segment_integral(-omega, self.total_time - cursor);
        }
        acc
    }

    fn sample(&self, n: usize) -> ModulationTrace {
        let dt = self.total_time / n as f64;
        let time_grid: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let (fz, fperp) = time_grid.iter().map(|&t| self.at(t)).unzip();
        ModulationTrace { time_grid, fz, fperp }
    }
}

fn check_sampling(unit: &PulseUnit, samples_per_unit: usize) -> Result<()> {
    let shortest = unit
        .pulses()
        .iter()
        .map(|p| p.duration)
        .filter(|d| *d > 0.0)
        .fold(f64::INFINITY, f64::min);
    if shortest.is_finite() {
        let per_pulse = shortest * samples_per_unit as f64 / unit.duration();
        if per_pulse < MIN_SAMPLES_PER_PULSE {
            return Err(Error::SamplingTooCoarse {
                samples: samples_per_unit,
                per_pulse,
            });
        }
    }
    if samples_per_unit == 0 {
        return Err(Error::SamplingTooCoarse {
            samples: 0,
            per_pulse: 0.0,
        });
    }
    Ok(())
}

/// `F_z`, `F_⊥` of one unit on the grid `t_i = i·T/n`, `i = 0..n`.
pub fn trace_modulation(unit: &PulseUnit, samples_per_unit: usize) -> Result<ModulationTrace> {
    check_sampling(unit, samples_per_unit)?;
    Ok(ModulationModel::from_unit(unit).sample(samples_per_unit))
}

/// Trace over a whole plan with the given per-unit global phases.
pub fn trace_plan(plan: &SequencePlan, phases: &[f64], samples_per_unit: usize) -> Result<ModulationTrace> {
    check_sampling(plan.unit(), samples_per_unit)?;
    let train = plan.pulse_train(phases)?;
    Ok(ModulationModel::from_train(&train).sample(samples_per_unit * plan.repetitions()))
}

/// `F_⊥ → e^{iφ} F_⊥`, `F_z` unchanged: the effect of shifting every pulse
/// phase by `φ`.
pub fn global_phase_action(trace: &ModulationTrace, phi: f64) -> ModulationTrace {
    let rot = C64::from_polar(1.0, phi);
    ModulationTrace {
        time_grid: trace.time_grid.clone(),
        fz: trace.fz.clone(),
        fperp: trace.fperp.iter().map(|v| v * rot).collect(),
    }
}

/// `f_k = (1/T_total) ∫ F(t) e^{−i2πkt/T_total} dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierAmplitude {
    pub k: i64,
    pub value: C64,
    pub component: Component,
    pub total_time: f64,
    /// `arg(value)`
    pub phase_angle: f64,
}

impl FourierAmplitude {
    fn new(k: i64, value: C64, component: Component, total_time: f64) -> Self {
        Self {
            k,
            value,
            component,
            total_time,
            phase_angle: value.arg(),
        }
    }

    pub fn magnitude(&self) -> f64 {
        self.value.norm()
    }
}

/// Single-unit amplitude `f̃(q) = (1/T) ∫_0^T F(t) e^{−i2πqt/T} dt` at any
/// real `q`.
pub fn unit_fourier(unit: &PulseUnit, q: f64, component: Component) -> C64 {
    let t = unit.duration();
    ModulationModel::from_unit(unit).integral(TAU * q / t, component) / t
}

/// `e^{−i2π a/b}` with the angle reduced exactly in integers first.
fn root_of_unity(a: i64, b: i64) -> C64 {
    let r = a.rem_euclid(b);
    C64::from_polar(1.0, -TAU * r as f64 / b as f64)
}

/// Factored form: single-unit amplitudes combined with per-unit phase and
/// sign factors. For an even pulse count with zero alternating phase sum
/// this is `f_k = Z·f̃_{k/M}` with the comb-weighted
/// `Z = (1/M) Σ_m e^{iΦ_m} e^{−i2πkm/M}`.
fn factored_amplitude(plan: &SequencePlan, phases: &[f64], k: i64, component: Component) -> C64 {
    let unit = plan.unit();
    let m_count = plan.repetitions() as i64;
    let n = unit.len();
    let q = k as f64 / m_count as f64;
    let lambda: f64 = unit
        .pulses()
        .iter()
        .enumerate()
        .map(|(i, p)| if i % 2 == 0 { -p.phase } else { p.phase })
        .sum();
    let s_n = if n % 2 == 0 { 0.0 } else { -1.0 };
    let (fwd, back) = match component {
        Component::Z => (unit_fourier(unit, q, Component::Z), C64::new(0.0, 0.0)),
        Component::Perp => (
            unit_fourier(unit, q, Component::Perp),
            unit_fourier(unit, -q, Component::Perp).conj(),
        ),
    };
    let mut acc = C64::new(0.0, 0.0);
    let mut p_acc = 0.0f64;
    for (m, &phi) in phases.iter().enumerate() {
        let sigma = if (m * n) % 2 == 0 { 1.0 } else { -1.0 };
        let shift = root_of_unity(k * m as i64, m_count);
        acc += match component {
            Component::Z => shift * sigma * fwd,
            Component::Perp => {
                let base = shift * C64::from_polar(1.0, -2.0 * p_acc);
                if sigma > 0.0 {
                    base * C64::from_polar(1.0, phi) * fwd
                } else {
                    base * C64::from_polar(1.0, -phi) * back
                }
            }
        };
        p_acc = (p_acc + sigma * (lambda + phi * s_n)).rem_euclid(PI);
    }
    acc / m_count as f64
}

/// Fourier amplitude of harmonic `k ≥ 1` of the full plan. Evaluated by
/// exact piecewise integration over the flattened train and cross-checked
/// against the factored single-unit form.
pub fn fourier_amp(plan: &SequencePlan, phases: &[f64], k: i64, component: Component) -> Result<FourierAmplitude> {
    if k < 1 {
        return Err(Error::InvalidParameter(format!("harmonic index must be ≥ 1, got {k}")));
    }
    let train = plan.pulse_train(phases)?;
    let total = train.total_time;
    let direct = ModulationModel::from_train(&train).integral(TAU * k as f64 / total, component) / total;
    let factored = factored_amplitude(plan, phases, k, component);
    let gap = (direct - factored).norm();
    if !(gap <= FACTORIZATION_TOLERANCE) {
        return Err(Error::FactorizationMismatch(gap));
    }
    Ok(FourierAmplitude::new(k, direct, component, total))
}

/// Kind of first-order signal prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalKind {
    /// `F_z` resonance with the target.
    Expected,
    /// Response through `F_⊥`.
    Spurious,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictedSignal {
    /// Population for the given amplitude.
    pub population: f64,
    /// Spurious kind only: the mean over uniformly random per-unit phases,
    /// `1 − M (T a_eff |f̃|)² / 8`, which needs the amplitude to be the
    /// single-unit `f̃_{k/M}`.
    pub randomized_expectation: Option<f64>,
}

/// First-order population for a spin-½ target of perpendicular coupling
/// `a_perp` (rad/s). A nuclear spin-½ acts on the sensor like a classical
/// field of amplitude `a_eff = a_perp / 2`, so
///
/// ```text
/// expected:  P = cos²(½ a_eff |f| M T)
/// spurious:  P = 1 − sin²(½ a_eff |f| M T) · sin²(arg f)
/// ```
///
/// The `sin²` weight reflects that the sensor is prepared along +x: an
/// `F_⊥` rotation about x leaves the x readout untouched.
pub fn predicted_signal(
    f: &FourierAmplitude,
    a_perp: f64,
    repetitions: usize,
    unit_duration: f64,
    kind: SignalKind,
) -> Result<PredictedSignal> {
    let a_eff = 0.5 * a_perp;
    let total = repetitions as f64 * unit_duration;
    let x = 0.5 * a_eff * f.magnitude() * total;
    match (kind, f.component) {
        (SignalKind::Expected, Component::Z) => Ok(PredictedSignal {
            population: x.cos().powi(2),
            randomized_expectation: None,
        }),
        (SignalKind::Spurious, Component::Perp) => {
            let weight = f.phase_angle.sin().powi(2);
            let y = unit_duration * a_eff * f.magnitude();
            Ok(PredictedSignal {
                population: 1.0 - x.sin().powi(2) * weight,
                randomized_expectation: Some((1.0 - repetitions as f64 * y * y / 8.0).max(0.0)),
            })
        }
        _ => Err(Error::ComponentMismatch),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::{apply_global_phase, build_named_unit, PhaseMode, ReadoutBasis};

    fn xy8(tau: f64, tp: f64) -> PulseUnit {
        build_named_unit("XY8", tau, tp, PI / tp).unwrap()
    }

    #[test]
    fn instantaneous_limit_is_square_wave() {
        let unit = xy8(1e-6, 1e-7).with_instantaneous_pulses();
        let tr = trace_modulation(&unit, 800).unwrap();
        for (t, (fz, fp)) in tr.time_grid.iter().zip(tr.fz.iter().zip(&tr.fperp)) {
            let expected = if ((t / 1e-6 + 0.5).floor() as i64) % 2 == 0 { 1.0 } else { -1.0 };
            if ((t / 1e-6) - 0.5).rem_euclid(1.0) > 1e-9 {
                assert_eq!(*fz, expected, "t={t}");
            }
            assert_eq!(fp.norm(), 0.0);
        }
    }

    #[test]
    fn pulse_midpoint() {
        let unit = xy8(1e-6, 2e-7);
        let model = ModulationModel::from_unit(&unit);
        for p in unit.pulses() {
            let (fz, fp) = model.at(p.center_time);
            assert!(fz.abs() < 1e-12);
            assert!((fp.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sampling_check() {
        let unit = xy8(1e-6, 2e-7);
        // shortest pulse is 1/40 of the unit
        assert!(trace_modulation(&unit, 319).is_err());
        assert!(trace_modulation(&unit, 320).is_ok());
    }

    #[test]
    fn global_phase_action_matches_shifted_unit() {
        let unit = xy8(1e-6, 2e-7);
        let phi = 0.7;
        let a = global_phase_action(&trace_modulation(&unit, 4000).unwrap(), phi);
        let b = trace_modulation(&apply_global_phase(&unit, phi), 4000).unwrap();
        assert_eq!(a.fz, b.fz);
        for (x, y) in a.fperp.iter().zip(&b.fperp) {
            assert!((x - y).norm() < 1e-12);
        }
        let neg = global_phase_action(&b, PI);
        for (x, y) in neg.fperp.iter().zip(&b.fperp) {
            assert!((x + y).norm() < 1e-15);
        }
    }

    #[test]
    fn comb_and_unit_amplitude() {
        let plan = SequencePlan::standard(xy8(1e-6, 2e-7), 5).unwrap();
        let phases = plan.zero_phases();
        for k in 1..=40 {
            let f = fourier_amp(&plan, &phases, k, Component::Perp).unwrap();
            if k % 5 != 0 {
                assert!(f.magnitude() < 1e-12, "k={k} {}", f.magnitude());
            } else {
                let g = unit_fourier(plan.unit(), (k / 5) as f64, Component::Perp);
                assert!((f.value - g).norm() < 1e-12);
            }
        }
        assert!(fourier_amp(&plan, &phases, 0, Component::Z).is_err());
    }

    #[test]
    fn instantaneous_pulses_have_no_perp_amplitude() {
        let unit = xy8(1e-6, 2e-7).with_instantaneous_pulses();
        let plan = SequencePlan::new(unit, 3, PhaseMode::Randomized { seed: 1, realizations: 1 }, ReadoutBasis::X)
            .unwrap();
        for k in 1..30 {
            assert_eq!(fourier_amp(&plan, &[0.1, 2.0, 4.0], k, Component::Perp).unwrap().magnitude(), 0.0);
        }
    }

    #[test]
    fn square_wave_harmonic() {
        // ideal XY8: F_z is a square wave of period 2τ, fundamental 4/π
        let unit = xy8(1e-6, 2e-7).with_instantaneous_pulses();
        let f = unit_fourier(&unit, 4.0, Component::Z);
        assert!((f.norm() - 2.0 / PI).abs() < 1e-12, "{}", f.norm());
    }

    #[test]
    fn prediction_kinds() {
        let f = FourierAmplitude::new(1, C64::new(0.0, 0.0), Component::Z, 1e-3);
        let p = predicted_signal(&f, 1e4, 10, 1e-4, SignalKind::Expected).unwrap();
        assert_eq!(p.population, 1.0);
        assert!(matches!(
            predicted_signal(&f, 1e4, 10, 1e-4, SignalKind::Spurious),
            Err(Error::ComponentMismatch)
        ));
    }

    #[test]
    fn randomized_over_standard_weak_limit() {
        // worst-case phase for the standard protocol: sin² weight = 1
        let m = 20;
        let t = 8e-6;
        let f = FourierAmplitude::new(2 * m as i64, C64::new(0.0, 0.01), Component::Perp, m as f64 * t);
        let a = 2.0 * PI * 50.0;
        let p = predicted_signal(&f, a, m, t, SignalKind::Spurious).unwrap();
        let ratio = (1.0 - p.randomized_expectation.unwrap()) / (1.0 - p.population);
        assert!((ratio * 2.0 * m as f64 - 1.0).abs() < 1e-3, "{ratio}");
    }
}

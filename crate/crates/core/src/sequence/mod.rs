//! Pulse units, repetition plans and the randomisation transform.
//!
//! A [`PulseUnit`] is one base block of a dynamical-decoupling sequence: an
//! ordered list of rectangular (or instantaneous) π pulses inside a window of
//! length `T`. A [`SequencePlan`] repeats the unit `M` times and says how the
//! per-unit global phases are chosen.

mod families;
mod rng;

pub use families::{build_named_unit, Family};
pub(crate) use rng::phase_iter;
pub use rng::{draw_unit_phases, phase_at, phase_stream, RNG_ALGORITHM};

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Relative tolerance of the alternating-interval balance check.
pub const BALANCE_TOLERANCE: f64 = 1e-12;

/// A single control pulse. Times are in seconds, angles in radians and the
/// Rabi frequency in rad/s.
///
/// An instantaneous pulse has zero duration and an infinite Rabi frequency,
/// so `duration == nominal_angle / rabi_frequency` holds for every pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    pub center_time: f64,
    pub duration: f64,
    pub phase: f64,
    pub nominal_angle: f64,
    pub rabi_frequency: f64,
}

impl Pulse {
    /// Rectangular π pulse driven at `rabi` rad/s.
    pub fn rectangular(center_time: f64, phase: f64, rabi: f64) -> Self {
        Self {
            center_time,
            duration: PI / rabi,
            phase: phase.rem_euclid(TAU),
            nominal_angle: PI,
            rabi_frequency: rabi,
        }
    }

    /// Ideal zero-width π pulse.
    pub fn instantaneous(center_time: f64, phase: f64) -> Self {
        Self {
            center_time,
            duration: 0.0,
            phase: phase.rem_euclid(TAU),
            nominal_angle: PI,
            rabi_frequency: f64::INFINITY,
        }
    }

    pub fn start(&self) -> f64 {
        self.center_time - 0.5 * self.duration
    }

    pub fn end(&self) -> f64 {
        self.center_time + 0.5 * self.duration
    }

    pub fn is_instantaneous(&self) -> bool {
        self.duration == 0.0
    }

    fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase.rem_euclid(TAU);
        self
    }
}

/// Structural problems found in a list of pulses.
#[derive(Debug, Clone, PartialEq)]
pub enum StructuralIssue {
    NoPulses,
    NonPositiveDuration,
    NegativePulseWidth { index: usize },
    InconsistentRabi { index: usize },
    OutsideUnit { index: usize },
    OutOfOrder { index: usize },
    Overlap { first: usize, second: usize },
}

impl std::fmt::Display for StructuralIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::NoPulses => write!(f, "unit has no pulses"),
            Self::NonPositiveDuration => write!(f, "unit duration must be positive"),
            Self::NegativePulseWidth { index } => write!(f, "pulse {index} has negative width"),
            Self::InconsistentRabi { index } => {
                write!(f, "pulse {index}: duration differs from angle / rabi")
            }
            Self::OutsideUnit { index } => write!(f, "pulse {index} lies outside the unit"),
            Self::OutOfOrder { index } => write!(f, "pulse {index} is not in time order"),
            Self::Overlap { first, second } => write!(f, "pulses {first} and {second} overlap"),
        }
    }
}

/// Result of [`validate_unit`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    /// `sum_{j=0}^{N} (-1)^j (t_{j+1} - t_j)` with `t_0 = 0`, `t_{N+1} = T`.
    pub residual: f64,
    pub tolerance: f64,
    pub balanced: bool,
    pub issues: Vec<StructuralIssue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.balanced && self.issues.is_empty()
    }
}

/// Checks ordering, bounds, overlap and Rabi consistency of raw pulses.
pub fn structural_issues(duration: f64, pulses: &[Pulse]) -> Vec<StructuralIssue> {
    let mut issues = Vec::new();
    if !(duration > 0.0 && duration.is_finite()) {
        issues.push(StructuralIssue::NonPositiveDuration);
    }
    if pulses.is_empty() {
        issues.push(StructuralIssue::NoPulses);
    }
    let slack = 1e-12 * duration.abs();
    for (i, p) in pulses.iter().enumerate() {
        if !(p.duration >= 0.0) {
            issues.push(StructuralIssue::NegativePulseWidth { index: i });
        }
        let expected = p.nominal_angle / p.rabi_frequency;
        if !(p.rabi_frequency > 0.0) || (expected - p.duration).abs() > 1e-9 * expected.max(1e-300)
        {
            issues.push(StructuralIssue::InconsistentRabi { index: i });
        }
        if p.start() < -slack || p.end() > duration + slack {
            issues.push(StructuralIssue::OutsideUnit { index: i });
        }
        if i > 0 {
            let prev = &pulses[i - 1];
            if !(p.center_time > prev.center_time) {
                issues.push(StructuralIssue::OutOfOrder { index: i });
            } else if p.start() < prev.end() - slack {
                issues.push(StructuralIssue::Overlap {
                    first: i - 1,
                    second: i,
                });
            }
        }
    }
    issues
}

/// One base block of a DD sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseUnit {
    name: String,
    duration: f64,
    pulses: Vec<Pulse>,
}

impl PulseUnit {
    /// Builds a unit, rejecting structurally invalid pulse lists. Balance is
    /// not required here; see [`validate_unit`].
    pub fn new(name: impl Into<String>, duration: f64, pulses: Vec<Pulse>) -> Result<Self> {
        let issues = structural_issues(duration, &pulses);
        if let Some(first) = issues.first() {
            return Err(Error::InvalidUnit(first.to_string()));
        }
        Ok(Self {
            name: name.into(),
            duration,
            pulses,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Unit length `T` in seconds.
    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn pulses(&self) -> &[Pulse] {
        &self.pulses
    }

    pub fn len(&self) -> usize {
        self.pulses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty()
    }

    /// The same unit with every pulse replaced by an ideal instantaneous π
    /// pulse at the same centre and phase.
    pub fn with_instantaneous_pulses(&self) -> Self {
        Self {
            name: self.name.clone(),
            duration: self.duration,
            pulses: self
                .pulses
                .iter()
                .map(|p| Pulse::instantaneous(p.center_time, p.phase))
                .collect(),
        }
    }

    /// Shortest pulse width in the unit (zero for instantaneous pulses).
    pub fn min_pulse_duration(&self) -> f64 {
        self.pulses
            .iter()
            .map(|p| p.duration)
            .fold(f64::INFINITY, f64::min)
    }

    /// Structural equality with a relative tolerance on times and rates and an
    /// absolute tolerance (mod 2π) on phases.
    pub fn approx_eq(&self, other: &Self, rel: f64) -> bool {
        let close = |a: f64, b: f64| {
            if a.is_infinite() || b.is_infinite() {
                return a == b;
            }
            (a - b).abs() <= rel * a.abs().max(b.abs()).max(self.duration)
        };
        let close_rate = |a: f64, b: f64| {
            if a.is_infinite() || b.is_infinite() {
                return a == b;
            }
            (a - b).abs() <= rel * a.abs().max(b.abs())
        };
        self.name == other.name
            && close(self.duration, other.duration)
            && self.pulses.len() == other.pulses.len()
            && self.pulses.iter().zip(&other.pulses).all(|(a, b)| {
                close(a.center_time, b.center_time)
                    && close(a.duration, b.duration)
                    && angle_distance(a.phase, b.phase) <= rel * TAU
                    && (a.nominal_angle - b.nominal_angle).abs() <= rel * TAU
                    && close_rate(a.rabi_frequency, b.rabi_frequency)
            })
    }
}

/// Smallest distance between two angles on the circle.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Balance and structure report for a unit.
pub fn validate_unit(unit: &PulseUnit) -> ValidationReport {
    validate_parts(unit.duration, &unit.pulses)
}

/// Same as [`validate_unit`] for pulses that may not form a valid unit.
pub fn validate_parts(duration: f64, pulses: &[Pulse]) -> ValidationReport {
    let mut residual = 0.0;
    let mut prev = 0.0;
    let mut sign = 1.0;
    for p in pulses {
        residual += sign * (p.center_time - prev);
        prev = p.center_time;
        sign = -sign;
    }
    residual += sign * (duration - prev);
    let tolerance = BALANCE_TOLERANCE * duration.abs();
    ValidationReport {
        residual,
        tolerance,
        balanced: residual.abs() <= tolerance,
        issues: structural_issues(duration, pulses),
    }
}

/// Shifts every pulse phase by `phi` (mod 2π); timings are untouched.
pub fn apply_global_phase(unit: &PulseUnit, phi: f64) -> PulseUnit {
    PulseUnit {
        name: unit.name.clone(),
        duration: unit.duration,
        pulses: unit
            .pulses
            .iter()
            .map(|p| p.with_phase(p.phase + phi))
            .collect(),
    }
}

/// How the per-unit global phases of a plan are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseMode {
    Standard,
    Randomized { seed: u64, realizations: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReadoutBasis {
    #[default]
    X,
    MinusX,
}

impl ReadoutBasis {
    /// Population measured in this basis for a qubit with the given real part
    /// of `rho_01`.
    pub fn population(self, coherence_re: f64) -> f64 {
        let p = match self {
            Self::X => 0.5 + coherence_re,
            Self::MinusX => 0.5 - coherence_re,
        };
        p.clamp(0.0, 1.0)
    }
}

/// `M` repetitions of a unit.
#[derive(Debug, Clone, PartialEq)]
pub struct SequencePlan {
    unit: PulseUnit,
    repetitions: usize,
    phase_mode: PhaseMode,
    readout_basis: ReadoutBasis,
}

impl SequencePlan {
    pub fn new(
        unit: PulseUnit,
        repetitions: usize,
        phase_mode: PhaseMode,
        readout_basis: ReadoutBasis,
    ) -> Result<Self> {
        if repetitions == 0 {
            return Err(Error::InvalidParameter("repetitions must be at least 1".into()));
        }
        if let PhaseMode::Randomized { realizations, .. } = phase_mode {
            if realizations == 0 {
                return Err(Error::InvalidParameter(
                    "randomized mode needs at least one realization".into(),
                ));
            }
        }
        Ok(Self {
            unit,
            repetitions,
            phase_mode,
            readout_basis,
        })
    }

    pub fn standard(unit: PulseUnit, repetitions: usize) -> Result<Self> {
        Self::new(unit, repetitions, PhaseMode::Standard, ReadoutBasis::X)
    }

    pub fn unit(&self) -> &PulseUnit {
        &self.unit
    }

    pub fn repetitions(&self) -> usize {
        self.repetitions
    }

    pub fn phase_mode(&self) -> PhaseMode {
        self.phase_mode
    }

    pub fn readout_basis(&self) -> ReadoutBasis {
        self.readout_basis
    }

    pub fn with_readout(mut self, basis: ReadoutBasis) -> Self {
        self.readout_basis = basis;
        self
    }

    pub fn with_unit(&self, unit: PulseUnit) -> Self {
        Self {
            unit,
            ..self.clone()
        }
    }

    /// `M · T`.
    pub fn total_time(&self) -> f64 {
        self.repetitions as f64 * self.unit.duration
    }

    /// All-zero global phases.
    pub fn zero_phases(&self) -> Vec<f64> {
        vec![0.0; self.repetitions]
    }

    pub(crate) fn check_phases(&self, phases: &[f64]) -> Result<()> {
        if phases.len() != self.repetitions {
            return Err(Error::PhaseCount {
                expected: self.repetitions,
                got: phases.len(),
            });
        }
        Ok(())
    }

    /// Flattens the plan into absolute-time pulses, unit `m` shifted by
    /// `m · T` and phase-shifted by `phases[m]`.
    pub fn pulse_train(&self, phases: &[f64]) -> Result<PulseTrain> {
        self.check_phases(phases)?;
        let n = self.unit.len();
        let mut pulses = Vec::with_capacity(n * self.repetitions);
        for (m, &global) in phases.iter().enumerate() {
            let offset = m as f64 * self.unit.duration;
            for p in &self.unit.pulses {
                let mut q = p.with_phase(p.phase + global);
                q.center_time += offset;
                pulses.push(q);
            }
        }
        Ok(PulseTrain {
            total_time: self.total_time(),
            pulses,
            unit_len: n,
        })
    }
}

/// A plan flattened onto the absolute time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseTrain {
    pub total_time: f64,
    pub pulses: Vec<Pulse>,
    /// Pulses per unit, used to recover the unit index of a pulse.
    pub unit_len: usize,
}

impl PulseTrain {
    /// A single unit viewed as a train.
    pub fn from_unit(unit: &PulseUnit) -> Self {
        Self {
            total_time: unit.duration,
            pulses: unit.pulses.clone(),
            unit_len: unit.len(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xy8(tau: f64) -> PulseUnit {
        build_named_unit("XY8", tau, 0.2 * tau, PI / (0.2 * tau)).unwrap()
    }

    #[test]
    fn single_off_centre_pulse_is_unbalanced() {
        let t = 1e-6;
        let unit = PulseUnit::new("one", t, vec![Pulse::instantaneous(t / 4.0, 0.0)]).unwrap();
        let report = validate_unit(&unit);
        assert!(!report.balanced);
        assert!((report.residual - (t / 4.0 - 3.0 * t / 4.0)).abs() < 1e-20);
    }

    #[test]
    fn cpmg8_is_balanced() {
        let unit = build_named_unit("CPMG-8", 1e-6, 1e-7, PI / 1e-7).unwrap();
        let report = validate_unit(&unit);
        assert!(report.balanced, "residual {}", report.residual);
        assert!(report.issues.is_empty());
    }

    #[test]
    fn overlap_and_bounds_are_reported() {
        let pulses = vec![
            Pulse::rectangular(0.1e-6, 0.0, PI / 0.3e-6),
            Pulse::rectangular(0.3e-6, 0.0, PI / 0.3e-6),
            Pulse::rectangular(0.95e-6, 0.0, PI / 0.3e-6),
        ];
        let report = validate_parts(1e-6, &pulses);
        assert!(report.issues.contains(&StructuralIssue::OutsideUnit { index: 0 }));
        assert!(report
            .issues
            .contains(&StructuralIssue::Overlap { first: 0, second: 1 }));
        assert!(report.issues.contains(&StructuralIssue::OutsideUnit { index: 2 }));
        assert!(PulseUnit::new("bad", 1e-6, pulses).is_err());
        assert!(PulseUnit::new("empty", 1e-6, vec![]).is_err());
    }

    #[test]
    fn global_phase_shift() {
        let unit = xy8(1e-6);
        assert_eq!(apply_global_phase(&unit, 0.0), unit);
        let shifted = apply_global_phase(&unit, PI / 2.0);
        let expected = [0.5, 1.0, 0.5, 1.0, 1.0, 0.5, 1.0, 0.5];
        for (p, e) in shifted.pulses().iter().zip(expected) {
            assert!(angle_distance(p.phase, e * PI) < 1e-15);
        }
        for (a, b) in shifted.pulses().iter().zip(unit.pulses()) {
            assert_eq!(a.center_time, b.center_time);
            assert_eq!(a.duration, b.duration);
        }
    }

    #[test]
    fn plan_invariants() {
        let unit = xy8(1e-6);
        assert!(SequencePlan::standard(unit.clone(), 0).is_err());
        assert!(SequencePlan::new(
            unit.clone(),
            3,
            PhaseMode::Randomized {
                seed: 1,
                realizations: 0
            },
            ReadoutBasis::X
        )
        .is_err());
        let plan = SequencePlan::standard(unit, 5).unwrap();
        assert!((plan.total_time() - 40e-6).abs() < 1e-18);
        assert!(matches!(
            plan.pulse_train(&[0.0; 4]),
            Err(Error::PhaseCount { expected: 5, got: 4 })
        ));
        let train = plan.pulse_train(&plan.zero_phases()).unwrap();
        assert_eq!(train.pulses.len(), 40);
        assert!((train.pulses[8].center_time - 8.5e-6).abs() < 1e-18);
    }

    #[test]
    fn standard_train_matches_zero_randomized_train() {
        let unit = xy8(1e-6);
        let std_plan = SequencePlan::standard(unit.clone(), 4).unwrap();
        let rnd_plan = SequencePlan::new(
            unit,
            4,
            PhaseMode::Randomized {
                seed: 3,
                realizations: 2,
            },
            ReadoutBasis::X,
        )
        .unwrap();
        let a = std_plan.pulse_train(&draw_unit_phases(&std_plan, 0).unwrap()).unwrap();
        let b = rnd_plan.pulse_train(&[0.0; 4]).unwrap();
        assert_eq!(a, b);
    }
}

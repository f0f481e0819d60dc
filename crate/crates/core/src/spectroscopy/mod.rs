//! Frequency-sweep spectra, robustness maps and protocol comparisons.
//!
//! Every sweep point is evaluated three ways: the standard repetition, the
//! randomized repetition averaged over `K` phase realizations, and an ideal
//! δ-pulse baseline without control errors. Realization `r` uses the same
//! phases at every sweep point.

mod ensemble;
mod robustness;
mod suppression;

pub use ensemble::{proton_ensemble, EnsembleSpec};
pub use robustness::{run_robustness_map, RobustnessAxes, RobustnessConfig, RobustnessMap};
pub use suppression::{first_order_ratio, spurious_suppression_report, SuppressionConfig, SuppressionReport, SuppressionRow};

use rayon::prelude::*;

use crate::dynamics::{classical_signal, ClassicalField, ClassicalOptions, ErrorModel, SignalModel, TargetSpin};
use crate::error::{Error, Result};
use crate::sequence::{build_named_unit, phase_stream, PulseUnit, ReadoutBasis, SequencePlan};

/// Pulse spacings of a sweep, strictly monotonic.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    taus: Vec<f64>,
}

impl Sweep {
    pub fn from_taus(taus: Vec<f64>) -> Result<Self> {
        if taus.is_empty() {
            return Err(Error::InvalidParameter("sweep is empty".into()));
        }
        if taus.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(Error::InvalidParameter("sweep spacings must be positive and finite".into()));
        }
        let up = taus.windows(2).all(|w| w[1] > w[0]);
        let down = taus.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return Err(Error::InvalidParameter("sweep must be strictly monotonic".into()));
        }
        Ok(Self { taus })
    }

    /// DD frequencies `ν = 1/(2τ)` in Hz.
    pub fn from_frequencies(hz: &[f64]) -> Result<Self> {
        Self::from_taus(hz.iter().map(|f| 0.5 / f).collect())
    }

    /// `n` frequencies evenly spaced over `[start, stop]`.
    pub fn linear_frequencies(start_hz: f64, stop_hz: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Self::from_frequencies(&[start_hz]);
        }
        let step = (stop_hz - start_hz) / (n - 1) as f64;
        Self::from_frequencies(&(0..n).map(|i| start_hz + step * i as f64).collect::<Vec<_>>())
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }
}

/// What the sensor sees: nuclear spins, or one classical field.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Spins {
        spins: Vec<TargetSpin>,
        /// Multiply single-spin coherences instead of propagating the
        /// joint space.
        independent: bool,
    },
    Field {
        field: ClassicalField,
        options: ClassicalOptions,
    },
}

impl Targets {
    pub fn none() -> Self {
        Targets::Spins {
            spins: Vec::new(),
            independent: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumConfig {
    pub family: String,
    pub repetitions: usize,
    /// Rectangular π-pulse length; zero for δ-pulses.
    pub pulse_duration: f64,
    pub sweep: Sweep,
    pub errors: ErrorModel,
    pub targets: Targets,
    /// Randomized realizations `K`.
    pub realizations: usize,
    pub seed: u64,
    pub readout: ReadoutBasis,
}

impl SpectrumConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::InvalidParameter("repetitions must be at least 1".into()));
        }
        if self.realizations == 0 {
            return Err(Error::InvalidParameter("realizations must be at least 1".into()));
        }
        if !(self.pulse_duration >= 0.0) || !self.pulse_duration.is_finite() {
            return Err(Error::InvalidParameter("pulse duration must be non-negative".into()));
        }
        self.errors.validate()?;
        if let Targets::Field { field, .. } = &self.targets {
            field.validate()?;
        }
        if self.sweep.is_empty() {
            return Err(Error::InvalidParameter("sweep is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumPoint {
    pub tau: f64,
    /// `1/(2τ)`
    pub frequency_hz: f64,
    pub standard: f64,
    pub randomized_mean: f64,
    /// Sample standard deviation over realizations, zero for `K = 1`.
    pub randomized_std: f64,
    /// δ-pulses without control errors, standard phases.
    pub ideal: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    pub points: Vec<SpectrumPoint>,
    pub realizations: usize,
    pub seed: u64,
    pub readout: ReadoutBasis,
}

impl SpectrumResult {
    pub fn frequencies(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.frequency_hz).collect()
    }

    pub fn standard(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.standard).collect()
    }

    pub fn randomized(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.randomized_mean).collect()
    }

    pub fn ideal(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.ideal).collect()
    }
}

/// Builds a unit of `family` at spacing `tau`; zero `pulse_duration` gives
/// δ-pulses.
pub fn build_unit(family: &str, tau: f64, pulse_duration: f64) -> Result<PulseUnit> {
    if pulse_duration == 0.0 {
        // any admissible width, the pulses are collapsed afterwards
        let tp = 0.5 * tau;
        return Ok(build_named_unit(family, tau, tp, std::f64::consts::PI / tp)?.with_instantaneous_pulses());
    }
    build_named_unit(family, tau, pulse_duration, std::f64::consts::PI / pulse_duration)
}

enum Evaluator<'a> {
    Nuclear(SignalModel),
    Classical {
        plan: SequencePlan,
        errors: ErrorModel,
        field: &'a ClassicalField,
        options: &'a ClassicalOptions,
    },
}

impl Evaluator<'_> {
    fn new<'a>(plan: &SequencePlan, errors: &ErrorModel, targets: &'a Targets) -> Result<Evaluator<'a>> {
        Ok(match targets {
            Targets::Spins { spins, independent } => Evaluator::Nuclear(SignalModel::new(plan, errors, spins, *independent)?),
            Targets::Field { field, options } => Evaluator::Classical {
                plan: plan.clone(),
                errors: *errors,
                field,
                options,
            },
        })
    }

    fn population(&self, phases: &[f64]) -> Result<f64> {
        match self {
            Evaluator::Nuclear(model) => model.population(phases),
            Evaluator::Classical { plan, errors, field, options } => classical_signal(plan, phases, errors, field, options),
        }
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Phase lists of realizations `0..K`, shared by all sweep points.
fn realization_phases(config: &SpectrumConfig) -> Vec<Vec<f64>> {
    (0..config.realizations as u64)
        .map(|r| phase_stream(config.seed, r, 0, config.repetitions))
        .collect()
}

fn evaluate_point(config: &SpectrumConfig, tau: f64, phase_lists: &[Vec<f64>]) -> Result<SpectrumPoint> {
    let unit = build_unit(&config.family, tau, config.pulse_duration)?;
    let plan = SequencePlan::standard(unit.clone(), config.repetitions)?.with_readout(config.readout);
    let zeros = plan.zero_phases();
    let eval = Evaluator::new(&plan, &config.errors, &config.targets)?;
    let standard = eval.population(&zeros)?;
    let draws = phase_lists
        .iter()
        .map(|p| eval.population(p))
        .collect::<Result<Vec<f64>>>()?;
    let (randomized_mean, randomized_std) = mean_std(&draws);
    let ideal_errors = ErrorModel {
        decoherence_t2: config.errors.decoherence_t2,
        ..ErrorModel::ideal()
    };
    let ideal_plan = plan.with_unit(unit.with_instantaneous_pulses());
    let ideal = Evaluator::new(&ideal_plan, &ideal_errors, &config.targets)?.population(&zeros)?;
    Ok(SpectrumPoint {
        tau,
        frequency_hz: 0.5 / tau,
        standard,
        randomized_mean,
        randomized_std,
        ideal,
    })
}

fn run_with_phases(config: &SpectrumConfig, phase_lists: &[Vec<f64>]) -> Result<SpectrumResult> {
    config.validate()?;
    let results: Vec<Result<SpectrumPoint>> = config
        .sweep
        .taus()
        .par_iter()
        .map(|&tau| evaluate_point(config, tau, phase_lists))
        .collect();
    let mut points = Vec::with_capacity(results.len());
    for (index, r) in results.into_iter().enumerate() {
        let tau = config.sweep.taus()[index];
        points.push(r.map_err(|e| Error::SweepPoint {
            index,
            frequency_hz: 0.5 / tau,
            source: Box::new(e),
        })?);
    }
    Ok(SpectrumResult {
        points,
        realizations: config.realizations,
        seed: config.seed,
        readout: config.readout,
    })
}

/// Standard, randomized and ideal-baseline populations at every sweep point.
/// Results do not depend on the number of worker threads.
pub fn run_spectrum(config: &SpectrumConfig) -> Result<SpectrumResult> {
    config.validate()?;
    run_with_phases(config, &realization_phases(config))
}

/// The same spectrum read out along +x and along −x.
pub fn dual_basis_scan(config: &SpectrumConfig) -> Result<(SpectrumResult, SpectrumResult)> {
    let x = run_spectrum(&SpectrumConfig {
        readout: ReadoutBasis::X,
        ..config.clone()
    })?;
    let mx = run_spectrum(&SpectrumConfig {
        readout: ReadoutBasis::MinusX,
        ..config.clone()
    })?;
    Ok((x, mx))
}

/// Approximate resonance width in DD frequency, `1/T_total` at spacing
/// `1/(2ν)`: `2ν/(M·N)`.
pub fn linewidth_hz(center_hz: f64, repetitions: usize, pulses_per_unit: usize) -> f64 {
    2.0 * center_hz / (repetitions * pulses_per_unit) as f64
}

/// Largest `|P − P_baseline|` over points with `|ν − center| ≤ window/2`;
/// `None` if no point falls inside.
pub fn contrast(frequencies: &[f64], series: &[f64], baseline: &[f64], center_hz: f64, window_hz: f64) -> Option<f64> {
    frequencies
        .iter()
        .zip(series.iter().zip(baseline))
        .filter(|(f, _)| (**f - center_hz).abs() <= 0.5 * window_hz)
        .map(|(_, (p, b))| (p - b).abs())
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
}

/// RMS of `series − baseline` over points with `lo ≤ ν ≤ hi`.
pub fn rms_deviation(frequencies: &[f64], series: &[f64], baseline: &[f64], lo_hz: f64, hi_hz: f64) -> Option<f64> {
    let diffs: Vec<f64> = frequencies
        .iter()
        .zip(series.iter().zip(baseline))
        .filter(|(f, _)| **f >= lo_hz && **f <= hi_hz)
        .map(|(_, (p, b))| (p - b).powi(2))
        .collect();
    if diffs.is_empty() {
        return None;
    }
    Some((diffs.iter().sum::<f64>() / diffs.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn config(targets: Targets, k: usize) -> SpectrumConfig {
        SpectrumConfig {
            family: "XY8".into(),
            repetitions: 10,
            pulse_duration: 1e-7,
            sweep: Sweep::linear_frequencies(4.0e5, 6.0e5, 9).unwrap(),
            errors: ErrorModel::ideal(),
            targets,
            realizations: k,
            seed: 7,
            readout: ReadoutBasis::X,
        }
    }

    fn carbon() -> Targets {
        Targets::Spins {
            spins: vec![TargetSpin::new("13C", TAU * 20e3, TAU * 5e3, TAU * 0.5e6).unwrap()],
            independent: true,
        }
    }

    #[test]
    fn sweep_validation() {
        assert!(Sweep::from_taus(vec![]).is_err());
        assert!(Sweep::from_taus(vec![1.0, 1.0]).is_err());
        assert!(Sweep::from_taus(vec![1.0, 2.0, 1.5]).is_err());
        assert!(Sweep::from_taus(vec![3.0, 2.0]).is_ok());
        let s = Sweep::from_frequencies(&[1e6]).unwrap();
        assert_eq!(s.taus(), &[5e-7]);
    }

    #[test]
    fn empty_targets_are_flat() {
        let r = run_spectrum(&config(Targets::none(), 3)).unwrap();
        for p in &r.points {
            for v in [p.standard, p.randomized_mean, p.ideal] {
                assert!((v - 1.0).abs() < 1e-12);
            }
            assert!(p.randomized_std < 1e-12);
        }
    }

    #[test]
    fn zero_phases_reproduce_standard() {
        let c = config(carbon(), 1);
        let zeros = vec![vec![0.0; c.repetitions]; 2];
        let r = run_with_phases(&c, &zeros).unwrap();
        for p in &r.points {
            assert_eq!(p.standard, p.randomized_mean);
            assert_eq!(p.randomized_std, 0.0);
        }
    }

    #[test]
    fn single_realization_has_no_spread() {
        let r = run_spectrum(&config(carbon(), 1)).unwrap();
        assert!(r.points.iter().all(|p| p.randomized_std == 0.0));
        assert!(r.points.iter().any(|p| p.ideal < 0.99));
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let c = config(carbon(), 4);
        let a = run_spectrum(&c).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| run_spectrum(&c)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn errors_carry_sweep_context() {
        let mut c = config(carbon(), 1);
        // 0.1 µs pulses do not fit at 5 MHz
        c.sweep = Sweep::from_frequencies(&[1e6, 5e6]).unwrap();
        match run_spectrum(&c) {
            Err(Error::SweepPoint { index, frequency_hz, .. }) => {
                assert_eq!(index, 1);
                assert_eq!(frequency_hz, 5e6);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dual_basis_is_complementary() {
        let (x, mx) = dual_basis_scan(&config(carbon(), 2)).unwrap();
        for (a, b) in x.points.iter().zip(&mx.points) {
            assert!((a.standard + b.standard - 1.0).abs() < 1e-10);
            assert!((a.randomized_mean + b.randomized_mean - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn contrast_window() {
        let f = [1.0, 2.0, 3.0, 4.0];
        let s = [1.0, 0.5, 0.9, 1.0];
        let b = [1.0; 4];
        assert_eq!(contrast(&f, &s, &b, 2.0, 0.0), Some(0.5));
        assert!((contrast(&f, &s, &b, 3.0, 2.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(contrast(&f, &s, &b, 10.0, 1.0), None);
        assert!((rms_deviation(&f, &s, &b, 2.0, 3.0).unwrap() - (0.13f64).sqrt()).abs() < 1e-12);
        assert!((linewidth_hz(1e6, 10, 8) - 25e3).abs() < 1e-9);
    }
}

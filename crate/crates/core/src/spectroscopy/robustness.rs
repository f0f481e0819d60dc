use rayon::prelude::*;

use super::build_unit;
use crate::dynamics::{fidelity, repeat_unit, unit_propagator, ErrorModel};
use crate::error::{Error, Result};
use crate::sequence::phase_stream;

/// Largest admissible |Δ/Ω| or |δ| on a robustness axis.
const MAX_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub enum RobustnessAxes {
    /// Detuning as a fraction of the ideal Rabi frequency (x) against the
    /// amplitude fraction δ (y), at the configured spacing.
    DetuningAmplitude { detuning: Vec<f64>, amplitude: Vec<f64> },
    /// Static y-pulse phase error in radians (x) against the spacing τ in
    /// seconds (y).
    YPhaseTau { y_phase: Vec<f64>, tau: Vec<f64> },
}

impl RobustnessAxes {
    fn labels(&self) -> (&'static str, &'static str) {
        match self {
            Self::DetuningAmplitude { .. } => ("detuning_fraction", "amplitude_fraction"),
            Self::YPhaseTau { .. } => ("y_phase_error_rad", "tau_s"),
        }
    }

    fn values(&self) -> (&[f64], &[f64]) {
        match self {
            Self::DetuningAmplitude { detuning, amplitude } => (detuning, amplitude),
            Self::YPhaseTau { y_phase, tau } => (y_phase, tau),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessConfig {
    pub family: String,
    /// Ideal Rabi frequency Ω in rad/s; π pulses last `π/Ω`.
    pub rabi: f64,
    /// Spacing for the detuning × amplitude map.
    pub tau: f64,
    pub repetitions: usize,
    pub axes: RobustnessAxes,
    /// Errors not swept by the axes.
    pub base_errors: ErrorModel,
    pub realizations: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessMap {
    pub x_label: String,
    pub y_label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `standard[iy][ix]`
    pub standard: Vec<Vec<f64>>,
    /// Mean over realizations, same layout.
    pub randomized: Vec<Vec<f64>>,
}

impl RobustnessMap {
    /// Fraction of cells where the randomized fidelity is at least the
    /// standard one (ties within 1e-12 count).
    pub fn dominance_fraction(&self) -> f64 {
        let cells = self.x.len() * self.y.len();
        let wins = self
            .standard
            .iter()
            .flatten()
            .zip(self.randomized.iter().flatten())
            .filter(|(s, r)| **r >= **s - 1e-12)
            .count();
        wins as f64 / cells as f64
    }
}

impl RobustnessConfig {
    fn validate(&self) -> Result<()> {
        if !(self.rabi > 0.0) || !self.rabi.is_finite() {
            return Err(Error::InvalidParameter("Rabi frequency must be positive".into()));
        }
        if self.repetitions == 0 || self.realizations == 0 {
            return Err(Error::InvalidParameter("repetitions and realizations must be at least 1".into()));
        }
        let (xs, ys) = self.axes.values();
        if xs.is_empty() || ys.is_empty() {
            return Err(Error::InvalidParameter("robustness axes must be non-empty".into()));
        }
        let bad = |v: &[f64], limit: f64| v.iter().any(|a| !(a.abs() <= limit));
        match &self.axes {
            RobustnessAxes::DetuningAmplitude { detuning, amplitude } => {
                if bad(detuning, MAX_FRACTION) || bad(amplitude, MAX_FRACTION) {
                    return Err(Error::InvalidParameter(format!("error fractions must satisfy |x| ≤ {MAX_FRACTION}")));
                }
            }
            RobustnessAxes::YPhaseTau { y_phase, tau } => {
                if bad(y_phase, std::f64::consts::FRAC_PI_4) {
                    return Err(Error::InvalidParameter("y-phase errors must satisfy |x| ≤ π/4".into()));
                }
                if tau.iter().any(|t| !(*t > 0.0)) {
                    return Err(Error::InvalidParameter("spacings must be positive".into()));
                }
            }
        }
        self.base_errors.validate()
    }
}

fn cell(config: &RobustnessConfig, x: f64, y: f64, phase_lists: &[Vec<f64>]) -> Result<(f64, f64)> {
    let (tau, errors) = match config.axes {
        RobustnessAxes::DetuningAmplitude { .. } => (
            config.tau,
            ErrorModel {
                detuning: x * config.rabi,
                amplitude_fraction: y,
                ..config.base_errors
            },
        ),
        RobustnessAxes::YPhaseTau { .. } => (
            y,
            ErrorModel {
                y_phase_offset: x,
                ..config.base_errors
            },
        ),
    };
    let unit = build_unit(&config.family, tau, std::f64::consts::PI / config.rabi)?;
    let real = unit_propagator(&unit, &errors, &[])?;
    let ideal = unit_propagator(&unit, &ErrorModel::ideal(), &[])?;
    let zeros = vec![0.0; config.repetitions];
    let standard = fidelity(&repeat_unit(&real, &zeros), &repeat_unit(&ideal, &zeros))?;
    let mut sum = 0.0;
    for phases in phase_lists {
        sum += fidelity(&repeat_unit(&real, phases), &repeat_unit(&ideal, phases))?;
    }
    Ok((standard, sum / phase_lists.len() as f64))
}

/// Sensor-only fidelity against the error-free sequence on a 2-D grid of
/// control errors, for the standard and randomized repetitions.
pub fn run_robustness_map(config: &RobustnessConfig) -> Result<RobustnessMap> {
    config.validate()?;
    let (xs, ys) = config.axes.values();
    let phase_lists: Vec<Vec<f64>> = (0..config.realizations as u64)
        .map(|r| phase_stream(config.seed, r, 0, config.repetitions))
        .collect();
    let cells: Vec<(usize, usize)> = (0..ys.len()).flat_map(|iy| (0..xs.len()).map(move |ix| (iy, ix))).collect();
    let values = cells
        .par_iter()
        .map(|&(iy, ix)| cell(config, xs[ix], ys[iy], &phase_lists))
        .collect::<Result<Vec<_>>>()?;
    let mut standard = vec![vec![0.0; xs.len()]; ys.len()];
    let mut randomized = standard.clone();
    for (&(iy, ix), (s, r)) in cells.iter().zip(values) {
        standard[iy][ix] = s;
        randomized[iy][ix] = r;
    }
    let (xl, yl) = config.axes.labels();
    Ok(RobustnessMap {
        x_label: xl.into(),
        y_label: yl.into(),
        x: xs.to_vec(),
        y: ys.to_vec(),
        standard,
        randomized,
    })
}

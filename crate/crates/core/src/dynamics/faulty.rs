use std::f64::consts::{PI, TAU};

use super::linalg::{c, expm_herm2, sigma_x, sigma_y, sigma_z, M2};
use super::{ErrorModel, Propagator};
use crate::error::{Error, Result};
use crate::sequence::{phase_stream, PulseUnit};
use crate::C64;

/// Static errors (α, β, ε) of an imperfect π pulse. ε = 0 and β = 0 give a
/// perfect π pulse up to a global phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultyPulseParams {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
}

impl FaultyPulseParams {
    pub fn new(alpha: f64, beta: f64, epsilon: f64) -> Self {
        Self { alpha, beta, epsilon }
    }

    pub fn ideal() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }
}

/// ```text
/// ⎡ e^{−iα} sin ε        i e^{−i(β+φ)} cos ε ⎤
/// ⎣ i e^{i(β+φ)} cos ε   e^{iα} sin ε        ⎦
/// ```
pub fn faulty_pulse(phase: f64, params: FaultyPulseParams) -> Propagator {
    faulty_matrix(phase, params).into()
}

fn faulty_matrix(phase: f64, p: FaultyPulseParams) -> M2 {
    let (s, co) = p.epsilon.sin_cos();
    let i = c(0.0, 1.0);
    M2::new(
        C64::from_polar(s, -p.alpha),
        i * C64::from_polar(co, -(p.beta + phase)),
        i * C64::from_polar(co, p.beta + phase),
        C64::from_polar(s, p.alpha),
    )
}

fn wrap(x: f64) -> f64 {
    let r = (x + PI).rem_euclid(TAU) - PI;
    if r <= -PI { r + TAU } else { r }
}

/// Inverse of [`faulty_pulse`] for an SU(2) matrix and the nominal phase.
/// Returns ε ∈ [0, π/2] and α, β ∈ (−π, π].
pub fn extract_params(u: &Propagator, phase: f64) -> Result<FaultyPulseParams> {
    if u.dimension() != 2 {
        return Err(Error::DimensionMismatch(u.dimension(), 2));
    }
    let a = u.matrix[(0, 0)];
    let b = u.matrix[(0, 1)];
    let epsilon = a.norm().atan2(b.norm());
    let alpha = if a.norm() > 0.0 { wrap(-a.arg()) } else { 0.0 };
    let beta = if b.norm() > 0.0 {
        wrap(-(b * c(0.0, -1.0)).arg() - phase)
    } else {
        0.0
    };
    Ok(FaultyPulseParams { alpha, beta, epsilon })
}

/// (α, β, ε) of a rectangular π pulse of nominal Rabi frequency `rabi` under
/// the amplitude, detuning and y-phase errors of `errors`. The propagator is
/// taken with its sign flipped so an error-free pulse maps to α = β = ε = 0.
pub fn physical_pulse_params(errors: &ErrorModel, rabi: f64, phase: f64) -> Result<FaultyPulseParams> {
    errors.validate()?;
    if !(rabi > 0.0) || !rabi.is_finite() {
        return Err(Error::InvalidParameter(format!("Rabi frequency must be positive and finite, got {rabi:e}")));
    }
    let applied = errors.applied_phase(phase);
    let w = 0.5 * rabi * (1.0 + errors.amplitude_fraction);
    let h = sigma_x() * c(w * applied.cos(), 0.0)
        + sigma_y() * c(w * applied.sin(), 0.0)
        + sigma_z() * c(0.5 * errors.detuning, 0.0);
    let u = -expm_herm2(&(h * c(PI / rabi, 0.0)));
    extract_params(&u.into(), phase)
}

/// `|Tr(U_ideal† U)| / dim`
pub fn fidelity(u: &Propagator, u_ideal: &Propagator) -> Result<f64> {
    if u.dimension() != u_ideal.dimension() {
        return Err(Error::DimensionMismatch(u.dimension(), u_ideal.dimension()));
    }
    let tr: C64 = u_ideal
        .matrix
        .iter()
        .zip(u.matrix.iter())
        .map(|(a, b)| a.conj() * b)
        .sum();
    Ok((tr.norm() / u.dimension() as f64).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AccumulationMode {
    Standard,
    /// Average over `draws` independent phase lists.
    Randomized { seed: u64, draws: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorAccumulationReport {
    pub params: FaultyPulseParams,
    pub mode: AccumulationMode,
    /// `|⟨0|U_unit|1⟩|`
    pub unit_magnitude: f64,
    /// `(M, |⟨0|U|1⟩|)`; the RMS over draws in randomized mode.
    pub magnitudes: Vec<(usize, f64)>,
    /// Mean `|⟨0|U|1⟩|²` per M and its standard error (zero in standard mode).
    pub mean_squares: Vec<(usize, f64, f64)>,
    /// Standard: least-squares slope of the magnitude against M, through the
    /// origin. Randomized: square root of the slope of the mean square.
    /// Either way an estimate of `|C|ε`.
    pub fitted_prefactor: f64,
}

fn slope_through_origin(points: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (x, y) in points {
        num += x * y;
        den += x * x;
    }
    if den > 0.0 { num / den } else { 0.0 }
}

fn unit_product(unit: &PulseUnit, params: FaultyPulseParams) -> M2 {
    unit.pulses()
        .iter()
        .fold(M2::identity(), |acc, p| faulty_matrix(p.phase, params) * acc)
}

/// `R U R†` with `R = exp(−iΦσ_z/2)`.
fn shifted(u: &M2, phi: f64) -> M2 {
    let down = C64::from_polar(1.0, -phi);
    M2::new(u[(0, 0)], u[(0, 1)] * down, u[(1, 0)] * down.conj(), u[(1, 1)])
}

/// Growth of the off-diagonal element with the number of repeated units
/// when every pulse of `unit` carries the same static errors. Free evolution
/// is not included.
pub fn unit_offdiagonal_analysis(
    unit: &PulseUnit,
    grid: &[FaultyPulseParams],
    mode: AccumulationMode,
    m_max: usize,
) -> Result<Vec<ErrorAccumulationReport>> {
    if m_max == 0 {
        return Err(Error::InvalidParameter("m_max must be at least 1".into()));
    }
    if let AccumulationMode::Randomized { draws, .. } = mode {
        if draws < 2 {
            return Err(Error::InvalidParameter("randomized analysis needs at least 2 draws".into()));
        }
    }
    let mut out = Vec::with_capacity(grid.len());
    for &params in grid {
        let u = unit_product(unit, params);
        let unit_magnitude = u[(0, 1)].norm();
        let report = match mode {
            AccumulationMode::Standard => {
                let mut acc = M2::identity();
                let magnitudes: Vec<(usize, f64)> = (1..=m_max)
                    .map(|m| {
                        acc = u * acc;
                        (m, acc[(0, 1)].norm())
                    })
                    .collect();
                let fitted_prefactor = slope_through_origin(magnitudes.iter().map(|&(m, v)| (m as f64, v)));
                ErrorAccumulationReport {
                    params,
                    mode,
                    unit_magnitude,
                    mean_squares: magnitudes.iter().map(|&(m, v)| (m, v * v, 0.0)).collect(),
                    magnitudes,
                    fitted_prefactor,
                }
            }
            AccumulationMode::Randomized { seed, draws } => {
                let mut sum = vec![0.0; m_max];
                let mut sum_sq = vec![0.0; m_max];
                for r in 0..draws {
                    let mut acc = M2::identity();
                    for (m, phi) in phase_stream(seed, r as u64, 0, m_max).into_iter().enumerate() {
                        acc = shifted(&u, phi) * acc;
                        let v = acc[(0, 1)].norm_sqr();
                        sum[m] += v;
                        sum_sq[m] += v * v;
                    }
                }
                let n = draws as f64;
                let mean_squares: Vec<(usize, f64, f64)> = (0..m_max)
                    .map(|m| {
                        let mean = sum[m] / n;
                        let var = (sum_sq[m] / n - mean * mean).max(0.0) * n / (n - 1.0);
                        (m + 1, mean, (var / n).sqrt())
                    })
                    .collect();
                let slope = slope_through_origin(mean_squares.iter().map(|&(m, v, _)| (m as f64, v)));
                ErrorAccumulationReport {
                    params,
                    mode,
                    unit_magnitude,
                    magnitudes: mean_squares.iter().map(|&(m, v, _)| (m, v.sqrt())).collect(),
                    mean_squares,
                    fitted_prefactor: slope.max(0.0).sqrt(),
                }
            }
        };
        out.push(report);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::build_named_unit;

    #[test]
    fn perfect_pulse_is_pi_rotation() {
        let phi = 0.7;
        let u = faulty_pulse(phi, FaultyPulseParams::ideal());
        let r = super::super::linalg::rotation(phi, PI);
        // equal up to the global phase −1
        for (a, b) in u.matrix.iter().zip(r.iter()) {
            assert!((a + b).norm() < 1e-15);
        }
    }

    #[test]
    fn small_epsilon_readoff() {
        let u = faulty_pulse(0.0, FaultyPulseParams::new(0.0, 0.0, 0.01));
        assert!((u.matrix[(0, 1)].norm() - 0.01f64.cos()).abs() < 1e-15);
        assert!((u.matrix[(0, 0)].norm() - 0.01f64.sin()).abs() < 1e-15);
        assert!(u.unitarity_defect() < 1e-15);
    }

    #[test]
    fn extraction_round_trip() {
        for (a, b, e, phi) in [(0.3, -1.2, 0.2, 0.5), (-2.0, 3.0, 1.1, 4.0), (0.0, 0.1, 0.0, 1.5)] {
            let p = FaultyPulseParams::new(a, b, e);
            let q = extract_params(&faulty_pulse(phi, p), phi).unwrap();
            assert!((q.epsilon - e).abs() < 1e-12);
            assert!((q.beta - b).abs() < 1e-12, "{q:?}");
            if e > 0.0 {
                assert!((q.alpha - a).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn physical_pulse_matches_exponential() {
        let rabi = 2.0 * PI * 30e6;
        let e = ErrorModel {
            amplitude_fraction: 0.03,
            detuning: 0.04 * rabi,
            ..Default::default()
        };
        for phi in [0.0, PI / 2.0, 1.3] {
            let p = physical_pulse_params(&e, rabi, phi).unwrap();
            let w = 0.5 * rabi * 1.03;
            let h = sigma_x() * c(w * phi.cos(), 0.0) + sigma_y() * c(w * phi.sin(), 0.0) + sigma_z() * c(0.02 * rabi, 0.0);
            let direct = expm_herm2(&(h * c(PI / rabi, 0.0)));
            let rebuilt = faulty_pulse(phi, p);
            for (a, b) in rebuilt.matrix.iter().zip(direct.iter()) {
                assert!((a + b).norm() < 1e-10);
            }
            assert!(p.epsilon > 0.0 && p.epsilon < 0.1);
        }
        let ideal = physical_pulse_params(&ErrorModel::ideal(), rabi, 0.4).unwrap();
        assert!(ideal.epsilon < 1e-12 && ideal.beta.abs() < 1e-12);
    }

    #[test]
    fn fidelity_cases() {
        let id = Propagator::identity(2);
        assert!((fidelity(&id, &id).unwrap() - 1.0).abs() < 1e-15);
        let ph: Propagator = (M2::identity() * C64::from_polar(1.0, 0.8)).into();
        assert!((fidelity(&ph, &id).unwrap() - 1.0).abs() < 1e-15);
        let x: Propagator = sigma_x().into();
        assert!(fidelity(&x, &id).unwrap() < 1e-15);
        assert!(matches!(fidelity(&x, &Propagator::identity(4)), Err(Error::DimensionMismatch(2, 4))));
    }

    #[test]
    fn zero_error_has_no_offdiagonal() {
        let unit = build_named_unit("XY8", 1e-6, 1e-7, PI / 1e-7).unwrap();
        let r = unit_offdiagonal_analysis(&unit, &[FaultyPulseParams::ideal()], AccumulationMode::Standard, 20).unwrap();
        assert!(r[0].magnitudes.iter().all(|&(_, v)| v < 1e-12));
    }

    #[test]
    fn cpmg_accumulates_linearly() {
        let unit = build_named_unit("CPMG-2", 1e-6, 1e-7, PI / 1e-7).unwrap();
        let eps = 1e-3;
        let r = &unit_offdiagonal_analysis(&unit, &[FaultyPulseParams::new(0.0, 0.0, eps)], AccumulationMode::Standard, 10).unwrap()[0];
        for &(m, v) in &r.magnitudes {
            assert!((v - (2.0 * m as f64 * eps).sin().abs()).abs() < 1e-12);
        }
        assert!((r.fitted_prefactor / r.unit_magnitude - 1.0).abs() < 1e-3);
    }
}

use crate::error::{Error, Result};
use crate::sequence::phase_iter;
use crate::C64;

/// `Z = (1/M) Σ_m e^{iΦ_m}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZFactor {
    pub value: C64,
    pub m_count: usize,
}

pub fn z_factor(phases: &[f64]) -> Result<ZFactor> {
    if phases.is_empty() {
        return Err(Error::EmptyPhases);
    }
    let sum: C64 = phases.iter().map(|&p| C64::from_polar(1.0, p)).sum();
    Ok(ZFactor {
        value: sum / phases.len() as f64,
        m_count: phases.len(),
    })
}

/// Monte-Carlo moments of `|Z|²` with their standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZStatistics {
    pub m_count: usize,
    pub mean_abs_sq: f64,
    pub variance_abs_sq: f64,
    pub mean_std_error: f64,
    pub variance_std_error: f64,
    pub samples: usize,
}

impl ZStatistics {
    /// `1/M`
    pub fn expected_mean(&self) -> f64 {
        1.0 / self.m_count as f64
    }

    /// `(M−1)/M³`
    pub fn expected_variance(&self) -> f64 {
        let m = self.m_count as f64;
        (m - 1.0) / (m * m * m)
    }
}

/// `(cos φ, sin φ)` for `φ ∈ [0, 2π)`, branch free. The library `sin_cos`
/// mispredicts heavily on random angles and dominated the run time.
#[inline]
fn phasor(phi: f64) -> (f64, f64) {
    const HALF_PI_HI: f64 = 1.570_796_326_794_896_558;
    const HALF_PI_LO: f64 = 6.123_233_995_736_766e-17;
    let k = (phi * std::f64::consts::FRAC_2_PI).round();
    let r = (phi - k * HALF_PI_HI) - k * HALF_PI_LO;
    let r2 = r * r;
    // Taylor to r^17 and r^18, |r| ≤ π/4
    let s = r * (1.0
        + r2 * (-1.0 / 6.0
            + r2 * (1.0 / 120.0
                + r2 * (-1.0 / 5040.0
                    + r2 * (1.0 / 362880.0
                        + r2 * (-1.0 / 39916800.0
                            + r2 * (1.0 / 6227020800.0 + r2 * (-1.0 / 1307674368000.0 + r2 / 355687428096000.0))))))));
    let c = 1.0
        + r2 * (-0.5
            + r2 * (1.0 / 24.0
                + r2 * (-1.0 / 720.0
                    + r2 * (1.0 / 40320.0
                        + r2 * (-1.0 / 3628800.0
                            + r2 * (1.0 / 479001600.0
                                + r2 * (-1.0 / 87178291200.0
                                    + r2 * (1.0 / 20922789888000.0 - r2 / 6402373705728000.0))))))));
    const COS: [f64; 4] = [1.0, 0.0, -1.0, 0.0];
    const SIN: [f64; 4] = [0.0, 1.0, 0.0, -1.0];
    let q = (k as i64 & 3) as usize;
    (COS[q] * c - SIN[q] * s, SIN[q] * c + COS[q] * s)
}

/// Draws `samples` realizations of `M` phases (sample `r` uses stream `r`
/// of `seed`) and reports the mean and variance of `|Z|²`.
pub fn z_statistics(m_count: usize, samples: usize, seed: u64) -> Result<ZStatistics> {
    if m_count == 0 {
        return Err(Error::InvalidParameter("M must be at least 1".into()));
    }
    if samples < 1000 {
        return Err(Error::InvalidParameter(format!(
            "need at least 1000 samples, got {samples}"
        )));
    }
    if m_count == 1 {
        return Ok(ZStatistics {
            m_count,
            mean_abs_sq: 1.0,
            variance_abs_sq: 0.0,
            mean_std_error: 0.0,
            variance_std_error: 0.0,
            samples,
        });
    }
    let values: Vec<f64> = (0..samples as u64)
        .map(|r| {
            let (mut re, mut im) = (0.0, 0.0);
            for phi in phase_iter(seed, r, 0).take(m_count) {
                let (c, s) = phasor(phi);
                re += c;
                im += s;
            }
            (re * re + im * im) / (m_count * m_count) as f64
        })
        .collect();
    let n = samples as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for v in &values {
        let d = (v - mean) * (v - mean);
        m2 += d;
        m4 += d * d;
    }
    m2 /= n;
    m4 /= n;
    Ok(ZStatistics {
        m_count,
        mean_abs_sq: mean,
        variance_abs_sq: m2 * n / (n - 1.0),
        mean_std_error: (m2 / n).sqrt(),
        variance_std_error: ((m4 - m2 * m2).max(0.0) / n).sqrt(),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn z_factor_cases() {
        assert_eq!(z_factor(&[0.0; 10]).unwrap().value, C64::new(1.0, 0.0));
        assert!(z_factor(&[0.0, PI]).unwrap().value.norm() < 1e-15);
        for phi in [0.3, 2.0, 5.9] {
            assert!((z_factor(&[phi]).unwrap().value.norm() - 1.0).abs() < 1e-15);
        }
        assert!(matches!(z_factor(&[]), Err(Error::EmptyPhases)));
    }

    #[test]
    fn phasor_matches_sin_cos() {
        let mut worst: f64 = 0.0;
        for i in 0..200_000 {
            let phi = std::f64::consts::TAU * i as f64 / 200_000.0 + 1e-7;
            let (c, s) = phasor(phi);
            let (s0, c0) = phi.sin_cos();
            worst = worst.max((c - c0).abs()).max((s - s0).abs());
        }
        assert!(worst < 1e-15, "{worst:e}");
    }

    #[test]
    fn single_unit_is_exact() {
        let s = z_statistics(1, 1000, 3).unwrap();
        assert_eq!((s.mean_abs_sq, s.variance_abs_sq), (1.0, 0.0));
        assert!(z_statistics(0, 1000, 3).is_err());
        assert!(z_statistics(4, 999, 3).is_err());
    }

    #[test]
    fn moments_small_run() {
        let s = z_statistics(8, 20_000, 9).unwrap();
        assert!((s.mean_abs_sq - s.expected_mean()).abs() < 3.0 * s.mean_std_error);
        assert!((s.variance_abs_sq - s.expected_variance()).abs() < 3.0 * s.variance_std_error);
    }
}

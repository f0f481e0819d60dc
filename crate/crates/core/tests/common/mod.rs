//! Independent reference implementations used by the integration and
//! acceptance tests. Nothing here calls into the crate's numerical code.
#![allow(dead_code)]

use num_complex::Complex64 as C;

pub type M2 = [[C; 2]; 2];

pub const I2: M2 = [[C::new(1.0, 0.0), C::new(0.0, 0.0)], [C::new(0.0, 0.0), C::new(1.0, 0.0)]];

pub fn mul(a: &M2, b: &M2) -> M2 {
    let mut r = [[C::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    r
}

pub fn dagger(a: &M2) -> M2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

/// `exp[−iθ/2 (σ_x cos φ + σ_y sin φ)]`
pub fn rotation(phi: f64, theta: f64) -> M2 {
    let (s, c) = (0.5 * theta).sin_cos();
    let off = C::new(0.0, -s);
    [
        [C::new(c, 0.0), off * C::from_polar(1.0, -phi)],
        [off * C::from_polar(1.0, phi), C::new(c, 0.0)],
    ]
}

/// Oracle for the modulation functions: propagate the control alone up to
/// `t` and read `U†σ_zU`. `pulses` are (start, end, phase) with π area.
pub fn conjugation_oracle(pulses: &[(f64, f64, f64)], t: f64) -> (f64, C) {
    let mut u = I2;
    for &(start, end, phi) in pulses {
        if t <= start {
            break;
        }
        let theta = if end <= start || t >= end {
            std::f64::consts::PI
        } else {
            std::f64::consts::PI * (t - start) / (end - start)
        };
        u = mul(&rotation(phi, theta), &u);
    }
    let sz: M2 = [[C::new(1.0, 0.0), C::new(0.0, 0.0)], [C::new(0.0, 0.0), C::new(-1.0, 0.0)]];
    let s = mul(&dagger(&u), &mul(&sz, &u));
    (s[0][0].re, s[1][0])
}

/// Brute-force Fourier coefficient by composite Simpson integration of a
/// sampled function on `[0, total]`.
pub fn simpson<F: Fn(f64) -> C>(f: F, total: f64, intervals: usize) -> C {
    let n = intervals + intervals % 2;
    let h = total / n as f64;
    let mut acc = f(0.0) + f(total);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(i as f64 * h);
    }
    acc * h / 3.0
}

/// Population readout of a 2×2 propagator applied to |+x⟩, measured along
/// +x: `½ + Re ⟨0|ρ|1⟩`.
pub fn x_population(u: &M2) -> f64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let a = u[0][0] * s + u[0][1] * s;
    let b = u[1][0] * s + u[1][1] * s;
    0.5 + (a * b.conj()).re
}

/// `exp[−i t (n_x σ_x + n_y σ_y + n_z σ_z)]` from the Pauli closed form.
pub fn pauli_exp(n: [f64; 3], t: f64) -> M2 {
    let r = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    if r == 0.0 {
        return I2;
    }
    let (s, c) = (r * t).sin_cos();
    let k = s / r;
    [
        [C::new(c, -k * n[2]), C::new(-k * n[1], -k * n[0])],
        [C::new(k * n[1], -k * n[0]), C::new(c, k * n[2])],
    ]
}

pub fn trace(a: &M2) -> C {
    a[0][0] + a[1][1]
}

use nalgebra::{DMatrix, Matrix2};

use crate::error::{Error, Result};
use crate::C64;

pub type M2 = Matrix2<C64>;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn sigma_x() -> M2 {
    M2::new(ZERO, ONE, ONE, ZERO)
}

pub fn sigma_y() -> M2 {
    M2::new(ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO)
}

pub fn sigma_z() -> M2 {
    M2::new(ONE, ZERO, ZERO, -ONE)
}

/// `exp(−iK)` for a 2×2 Hermitian `K`, via its Pauli decomposition.
pub fn expm_herm2(k: &M2) -> M2 {
    let a0 = 0.5 * (k[(0, 0)] + k[(1, 1)]).re;
    let x = k[(1, 0)].re;
    let y = k[(1, 0)].im;
    let z = 0.5 * (k[(0, 0)] - k[(1, 1)]).re;
    let n = (x * x + y * y + z * z).sqrt();
    let (s, co) = n.sin_cos();
    // sin(n)/n, stable at small n
    let sn = if n < 1e-8 { 1.0 - n * n / 6.0 } else { s / n };
    let g = C64::from_polar(1.0, -a0);
    // exp(−i n̂·σ n) = cos n − i sin n (n̂·σ)
    let m = M2::new(
        c(co, -sn * z),
        c(-sn * y, -sn * x),
        c(sn * y, -sn * x),
        c(co, sn * z),
    );
    m * g
}

/// `exp[−iθ/2 (σ_x cos φ + σ_y sin φ)]`
pub fn rotation(phi: f64, theta: f64) -> M2 {
    let (s, co) = (0.5 * theta).sin_cos();
    let off = c(0.0, -s);
    M2::new(
        c(co, 0.0),
        off * C64::from_polar(1.0, -phi),
        off * C64::from_polar(1.0, phi),
        c(co, 0.0),
    )
}

pub fn to_dynamic(m: &M2) -> DMatrix<C64> {
    DMatrix::from_fn(2, 2, |i, j| m[(i, j)])
}

/// Kronecker product.
pub fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}

/// Spin-½ operators (I_x, I_y, I_z) embedded at position `index` of `count`
/// spins.
pub fn spin_operators(index: usize, count: usize) -> [DMatrix<C64>; 3] {
    let half = |m: M2| to_dynamic(&(m * c(0.5, 0.0)));
    let ops = [half(sigma_x()), half(sigma_y()), half(sigma_z())];
    ops.map(|op| {
        let mut out = DMatrix::<C64>::identity(1, 1);
        for k in 0..count {
            let f = if k == index { op.clone() } else { DMatrix::identity(2, 2) };
            out = kron(&out, &f);
        }
        out
    })
}

/// Largest entry of `|H − H†|`.
pub fn hermiticity_defect(h: &DMatrix<C64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..h.nrows() {
        for j in 0..=i {
            worst = worst.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Spectral decomposition of a Hermitian matrix, reusable for `exp(−iHt)` at
/// several `t`.
#[derive(Debug, Clone)]
pub struct HermitianExp {
    vectors: DMatrix<C64>,
    values: Vec<f64>,
}

impl HermitianExp {
    pub fn new(h: &DMatrix<C64>) -> Result<Self> {
        let scale = h.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1.0);
        let defect = hermiticity_defect(h);
        if defect > 1e-12 * scale {
            return Err(Error::NonHermitian(defect));
        }
        // symmetrise so rounding does not leak into the eigenproblem
        let sym = (h + h.adjoint()) * c(0.5, 0.0);
        let eig = sym.symmetric_eigen();
        Ok(Self {
            vectors: eig.eigenvectors,
            values: eig.eigenvalues.iter().copied().collect(),
        })
    }

    /// `exp(−iHt)`
    pub fn at(&self, t: f64) -> DMatrix<C64> {
        let mut scaled = self.vectors.clone();
        for (j, &l) in self.values.iter().enumerate() {
            let ph = C64::from_polar(1.0, -l * t);
            let mut col = scaled.column_mut(j);
            col *= ph;
        }
        &scaled * self.vectors.adjoint()
    }
}

/// `max |U†U − I|`
pub fn unitarity_defect(u: &DMatrix<C64>) -> f64 {
    let p = u.adjoint() * u;
    let mut worst = 0.0f64;
    for i in 0..p.nrows() {
        for j in 0..p.ncols() {
            let target = if i == j { ONE } else { ZERO };
            worst = worst.max((p[(i, j)] - target).norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn closed_form_matches_eigen_path() {
        let k = sigma_x() * c(0.3, 0.0) + sigma_y() * c(-1.1, 0.0) + sigma_z() * c(0.7, 0.0) + M2::identity() * c(0.2, 0.0);
        let a = expm_herm2(&k);
        let b = HermitianExp::new(&to_dynamic(&k)).unwrap().at(1.0);
        for i in 0..2 {
            for j in 0..2 {
                assert!((a[(i, j)] - b[(i, j)]).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn rotation_is_driven_evolution() {
        let (phi, theta) = (0.4f64, 2.2);
        let h = (sigma_x() * c(phi.cos(), 0.0) + sigma_y() * c(phi.sin(), 0.0)) * c(0.5 * theta, 0.0);
        let d = rotation(phi, theta) - expm_herm2(&h);
        assert!(d.iter().all(|v| v.norm() < 1e-14));
        let pi_x = rotation(0.0, PI);
        assert!((pi_x[(0, 1)] - c(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn spin_operator_algebra() {
        let [ix, iy, iz] = spin_operators(1, 3);
        assert_eq!(ix.nrows(), 8);
        let comm = &ix * &iy - &iy * &ix;
        let diff = comm - iz * c(0.0, 1.0);
        assert!(diff.iter().all(|v| v.norm() < 1e-15));
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut h = DMatrix::<C64>::zeros(2, 2);
        h[(0, 1)] = c(1.0, 0.0);
        assert!(matches!(HermitianExp::new(&h), Err(Error::NonHermitian(_))));
    }

    #[test]
    fn exponential_is_unitary() {
        let [ix, _, iz] = spin_operators(0, 2);
        let h = &ix * c(3.0, 0.0) + &iz * c(-1.3, 0.0) + kron(&to_dynamic(&sigma_z()), &DMatrix::identity(2, 2));
        let u = HermitianExp::new(&h).unwrap().at(2.7);
        assert!(unitarity_defect(&u) < 1e-13);
    }
}

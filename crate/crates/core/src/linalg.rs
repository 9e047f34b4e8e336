//! Dense 2×2 complex matrices at arbitrary precision.

use rug::{Complex, Float};

use crate::precision::log10_float;

#[derive(Clone, Debug, PartialEq)]
pub struct Mat2 {
    pub m: [[Complex; 2]; 2],
}

impl Mat2 {
    pub fn new(a: Complex, b: Complex, c: Complex, d: Complex) -> Self {
        Self { m: [[a, b], [c, d]] }
    }

    pub fn zeros(bits: u32) -> Self {
        let z = || Complex::new(bits);
        Self::new(z(), z(), z(), z())
    }

    pub fn identity(bits: u32) -> Self {
        let mut out = Self::zeros(bits);
        out.m[0][0] += 1u32;
        out.m[1][1] += 1u32;
        out
    }

    pub fn sigma_x(bits: u32) -> Self {
        let mut out = Self::zeros(bits);
        out.m[0][1] += 1u32;
        out.m[1][0] += 1u32;
        out
    }

    pub fn sigma_z(bits: u32) -> Self {
        let mut out = Self::zeros(bits);
        out.m[0][0] += 1u32;
        out.m[1][1] -= 1u32;
        out
    }

    pub fn prec(&self) -> u32 {
        self.m[0][0].prec().0
    }

    pub fn at_prec(&self, bits: u32) -> Self {
        self.map(|z| Complex::with_val(bits, z))
    }

    pub fn map(&self, f: impl Fn(&Complex) -> Complex) -> Self {
        Self::new(
            f(&self.m[0][0]),
            f(&self.m[0][1]),
            f(&self.m[1][0]),
            f(&self.m[1][1]),
        )
    }

    pub fn mul(&self, rhs: &Mat2) -> Mat2 {
        let bits = self.prec().max(rhs.prec());
        let entry = |i: usize, j: usize| {
            let mut acc = Complex::with_val(bits, &self.m[i][0] * &rhs.m[0][j]);
            acc += Complex::with_val(bits, &self.m[i][1] * &rhs.m[1][j]);
            acc
        };
        Mat2::new(entry(0, 0), entry(0, 1), entry(1, 0), entry(1, 1))
    }

    pub fn scale(&self, s: &Complex) -> Mat2 {
        let bits = self.prec().max(s.prec().0);
        self.map(|z| Complex::with_val(bits, z * s))
    }

    pub fn sub(&self, rhs: &Mat2) -> Mat2 {
        let bits = self.prec().max(rhs.prec());
        let e = |i: usize, j: usize| Complex::with_val(bits, &self.m[i][j] - &rhs.m[i][j]);
        Mat2::new(e(0, 0), e(0, 1), e(1, 0), e(1, 1))
    }

    pub fn apply(&self, v: &[Complex; 2]) -> [Complex; 2] {
        let bits = self.prec();
        let row = |i: usize| {
            let mut acc = Complex::with_val(bits, &self.m[i][0] * &v[0]);
            acc += Complex::with_val(bits, &self.m[i][1] * &v[1]);
            acc
        };
        [row(0), row(1)]
    }

    pub fn det(&self) -> Complex {
        let bits = self.prec();
        let mut d = Complex::with_val(bits, &self.m[0][0] * &self.m[1][1]);
        d -= Complex::with_val(bits, &self.m[0][1] * &self.m[1][0]);
        d
    }

    pub fn trace(&self) -> Complex {
        Complex::with_val(self.prec(), &self.m[0][0] + &self.m[1][1])
    }

    /// Classical adjoint: [[d, -b], [-c, a]].
    pub fn adjugate(&self) -> Mat2 {
        let bits = self.prec();
        Mat2::new(
            self.m[1][1].clone(),
            Complex::with_val(bits, -&self.m[0][1]),
            Complex::with_val(bits, -&self.m[1][0]),
            self.m[0][0].clone(),
        )
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2::new(
            self.m[0][0].clone(),
            self.m[1][0].clone(),
            self.m[0][1].clone(),
            self.m[1][1].clone(),
        )
    }

    pub fn conj(&self) -> Mat2 {
        self.map(|z| Complex::with_val(z.prec(), z.conj_ref()))
    }

    pub fn dagger(&self) -> Mat2 {
        self.transpose().conj()
    }

    /// σ_z A σ_z, which flips the sign of the off-diagonal entries.
    pub fn sigma_z_sandwich(&self) -> Mat2 {
        let bits = self.prec();
        Mat2::new(
            self.m[0][0].clone(),
            Complex::with_val(bits, -&self.m[0][1]),
            Complex::with_val(bits, -&self.m[1][0]),
            self.m[1][1].clone(),
        )
    }

    pub fn frobenius(&self) -> Float {
        let bits = self.prec();
        let mut s = Float::new(bits);
        for row in &self.m {
            for z in row {
                s += Float::with_val(bits, z.norm_ref());
            }
        }
        s.sqrt()
    }

    /// ||self - rhs||_F / ||self||_F as f64 (saturating, never NaN).
    pub fn relative_distance(&self, rhs: &Mat2) -> f64 {
        let num = self.sub(rhs).frobenius();
        let den = self.frobenius();
        if num.is_zero() {
            return 0.0;
        }
        if den.is_zero() {
            return f64::INFINITY;
        }
        10f64.powf(log10_float(&num) - log10_float(&den))
    }

    /// Largest entry modulus, as log10.
    pub fn log10_max_entry(&self) -> f64 {
        self.m
            .iter()
            .flatten()
            .map(crate::precision::log10_mag)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.m
            .iter()
            .flatten()
            .all(|z| z.real().is_finite() && z.imag().is_finite())
    }
}

/// Bilinear (not sesquilinear) row-vector times column-vector product.
pub fn dot(row: &[Complex; 2], col: &[Complex; 2]) -> Complex {
    let bits = row[0].prec().0.max(col[0].prec().0);
    let mut acc = Complex::with_val(bits, &row[0] * &col[0]);
    acc += Complex::with_val(bits, &row[1] * &col[1]);
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex {
        Complex::with_val(128, (re, im))
    }

    #[test]
    fn determinant_and_adjugate() {
        let a = Mat2::new(c(1.0, 2.0), c(3.0, 0.0), c(0.0, -1.0), c(4.0, 1.0));
        let prod = a.mul(&a.adjugate());
        let d = a.det();
        assert_eq!(prod.m[0][0], d);
        assert_eq!(prod.m[1][1], d);
        assert!(prod.m[0][1].is_zero() && prod.m[1][0].is_zero());
    }

    #[test]
    fn sandwich_matches_explicit_product() {
        let a = Mat2::new(c(1.0, 2.0), c(3.0, 0.5), c(0.0, -1.0), c(4.0, 1.0));
        let z = Mat2::sigma_z(128);
        assert_eq!(z.mul(&a).mul(&z), a.sigma_z_sandwich());
    }

    #[test]
    fn frobenius_norm() {
        let a = Mat2::new(c(3.0, 4.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        assert_eq!(a.frobenius(), 5.0);
        assert_eq!(a.relative_distance(&a), 0.0);
    }
}

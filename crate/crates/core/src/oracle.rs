//! Closed-form and scalar reference values used to validate the operator
//! valued machinery.

use num_complex::Complex64;

use crate::error::{Error, Result};

const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Cauchy transform of the semicircle law of variance 1,
/// `(z − √(z−2)√(z+2))/2`, the branch with `g(z) ~ 1/z` at infinity.
pub fn semicircle_cauchy(z: Complex64) -> Complex64 {
    (z - (z - 2.0).sqrt() * (z + 2.0).sqrt()) * 0.5
}

/// `d/dz` of [`semicircle_cauchy`], `g²/(g² − 1)`.
pub fn semicircle_cauchy_derivative(z: Complex64) -> Complex64 {
    let g = semicircle_cauchy(z);
    g * g / (g * g - 1.0)
}

/// Covariance kernel of the GUE (variance 1):
/// `g′(z₁) g′(z₂) / (1 − g(z₁) g(z₂))²`.
pub fn gue_covariance(z1: Complex64, z2: Complex64) -> Complex64 {
    let (g1, g2) = (semicircle_cauchy(z1), semicircle_cauchy(z2));
    let d = ONE - g1 * g2;
    semicircle_cauchy_derivative(z1) * semicircle_cauchy_derivative(z2) / (d * d)
}

/// Cauchy transform of `s + d`, `s` a standard semicircular and `d` a free
/// symmetric Bernoulli (`½(δ₋₁ + δ₁)`), from the scalar equation
/// `g = ½[(z − 1 − g)⁻¹ + (z + 1 − g)⁻¹]`.
pub fn semicircle_plus_bernoulli_cauchy(z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 {
        return Err(Error::InvalidInput("oracle needs Im z != 0".into()));
    }
    if z.im < 0.0 {
        return Ok(semicircle_plus_bernoulli_cauchy(z.conj())?.conj());
    }
    let map = |g: Complex64| ((z - 1.0 - g).inv() + (z + 1.0 - g).inv()) * 0.5;
    // damped iteration into the basin of the physical root, then Newton
    let mut g = z.inv();
    for _ in 0..200_000 {
        let next = (map(g) + g) * 0.5;
        let step = (next - g).norm();
        g = next;
        if step < 1e-12 {
            break;
        }
    }
    for _ in 0..50 {
        let (a, b) = ((z - 1.0 - g).inv(), (z + 1.0 - g).inv());
        let residual = g - (a + b) * 0.5;
        let step = residual / (ONE - (a * a + b * b) * 0.5);
        g -= step;
        if step.norm() < 1e-16 * (1.0 + g.norm()) {
            break;
        }
    }
    let residual = (g - map(g)).norm();
    if !(residual < 1e-13) || !(g.im < 0.0) {
        return Err(Error::NoConvergence {
            residual,
            iterations: 200_000,
        });
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn semicircle_values() {
        let g = semicircle_cauchy(Complex64::new(0.0, 2.0));
        assert!((g - Complex64::new(0.0, 1.0 - 2f64.sqrt())).norm() < 1e-15);
        // conjugation and large-|z| behaviour
        let z = Complex64::new(0.7, -0.4);
        assert!((semicircle_cauchy(z) - semicircle_cauchy(z.conj()).conj()).norm() < 1e-15);
        let big = Complex64::new(1e4, 1.0);
        assert!((semicircle_cauchy(big) * big - 1.0).norm() < 1e-7);
    }

    #[test]
    fn derivative_by_differences() {
        let z = Complex64::new(0.3, 0.8);
        let h = 1e-6;
        let fd = (semicircle_cauchy(z + h) - semicircle_cauchy(z - h)) / (2.0 * h);
        assert!((fd - semicircle_cauchy_derivative(z)).norm() < 1e-8);
    }

    #[test]
    fn bernoulli_oracle_solves_its_equation() {
        for z in [Complex64::new(0.0, 0.1), Complex64::new(2.5, 1.0), Complex64::new(-1.0, -0.3)] {
            let g = semicircle_plus_bernoulli_cauchy(z).unwrap();
            let rhs = ((z - 1.0 - g).inv() + (z + 1.0 - g).inv()) * 0.5;
            assert!((g - rhs).norm() < 1e-13);
            assert!(g.im * z.im < 0.0);
        }
    }
}

//! Numerical building blocks: quadrature, Gaussian rules, Bessel `K`,
//! the Meijer-G residue series and double-double arithmetic.

pub mod bessel;
pub mod dd;
pub mod gauss;
pub mod meijer;
pub mod quad;

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Standard normal density.
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF `Phi(x)`.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Gaussian tail `Q(x) = 1 - Phi(x)`.
#[inline]
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// `ln C(n, k)` through log-gamma.
pub fn ln_binomial(n: u32, k: u32) -> f64 {
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0)
}

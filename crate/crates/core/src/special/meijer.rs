//! `G^{3,0}_{1,3}(z | a; b1, b2, b3)` by summing the residues at the three
//! pole families of the Mellin-Barnes integrand.
//!
//! Each family contributes
//! `prod_{j != h} Gamma(b_j - b_h) / Gamma(a - b_h) * z^{b_h} * 1F2(1 + b_h - a; 1 + b_h - b_j, 1 + b_h - b_l; z)`.
//! For large `z` the three contributions are individually huge and cancel,
//! so the sum is first taken in `f64` and repeated in double-double when the
//! measured cancellation is too large to trust.

use thiserror::Error;

use super::dd::{ln_gamma_signed, Dd};

/// Poles closer than this to an integer separation are treated as coincident.
pub const DEGENERACY_GAP: f64 = 1e-3;
/// Above this cancellation ratio the `f64` sum is recomputed in double-double.
pub const F64_CANCELLATION_LIMIT: f64 = 1e5;
/// Above this ratio even double-double leaves fewer than ~10 good digits.
pub const DD_CANCELLATION_LIMIT: f64 = 1e21;

const MAX_TERMS: usize = 20_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeijerError {
    #[error("pole families {i} and {j} are separated by {sep}, within {DEGENERACY_GAP} of an integer")]
    Degenerate { i: usize, j: usize, sep: f64 },
    #[error("residue series cancellation {ratio:.3e} exceeds double-double capacity")]
    Cancellation { ratio: f64 },
    #[error("hypergeometric series did not converge within {MAX_TERMS} terms at z = {z}")]
    NoConvergence { z: f64 },
    #[error("argument must be positive, got {z}")]
    Domain { z: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F64,
    DoubleDouble,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeijerValue {
    pub value: f64,
    /// Sum of absolute term magnitudes over the absolute result.
    pub cancellation: f64,
    pub precision: Precision,
}

/// Checks the pairwise separations of `b` against [`DEGENERACY_GAP`].
pub fn check_separation(b: &[f64; 3]) -> Result<(), MeijerError> {
    for i in 0..3 {
        for j in (i + 1)..3 {
            let sep = b[j] - b[i];
            if (sep - sep.round()).abs() < DEGENERACY_GAP {
                return Err(MeijerError::Degenerate { i, j, sep });
            }
        }
    }
    Ok(())
}

/// Evaluates `G^{3,0}_{1,3}(z | a; b)` for `z > 0`.
pub fn meijer_g3013(a: f64, b: [f64; 3], z: f64) -> Result<MeijerValue, MeijerError> {
    if !(z > 0.0) {
        return Err(MeijerError::Domain { z });
    }
    check_separation(&b)?;
    let (value, cancellation) = sum_f64(a, &b, z)?;
    if cancellation <= F64_CANCELLATION_LIMIT {
        return Ok(MeijerValue {
            value,
            cancellation,
            precision: Precision::F64,
        });
    }
    let (value, cancellation) = sum_dd(a, &b, z)?;
    if cancellation > DD_CANCELLATION_LIMIT {
        return Err(MeijerError::Cancellation { ratio: cancellation });
    }
    Ok(MeijerValue {
        value,
        cancellation,
        precision: Precision::DoubleDouble,
    })
}

fn others(h: usize) -> (usize, usize) {
    match h {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

// 1/Gamma(a - b_h) vanishes there, and with it the whole family.
fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.round()
}

fn sum_f64(a: f64, b: &[f64; 3], z: f64) -> Result<(f64, f64), MeijerError> {
    let lnz = z.ln();
    let mut total = 0.0;
    let mut magnitude = 0.0;
    for h in 0..3 {
        if is_nonpositive_integer(a - b[h]) {
            continue;
        }
        let (j, l) = others(h);
        let coef = libm::tgamma(b[j] - b[h]) * libm::tgamma(b[l] - b[h]) / libm::tgamma(a - b[h]);
        let scale = coef * (b[h] * lnz).exp();
        let p = 1.0 + b[h] - a;
        let (q1, q2) = (1.0 + b[h] - b[j], 1.0 + b[h] - b[l]);
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut abs_sum = 1.0;
        let mut converged = false;
        for k in 0..MAX_TERMS {
            let kf = k as f64;
            if p + kf == 0.0 {
                converged = true;
                break;
            }
            term *= (p + kf) / ((q1 + kf) * (q2 + kf) * (kf + 1.0)) * z;
            sum += term;
            abs_sum += term.abs();
            // past the peak every later term shrinks geometrically
            if kf > z.cbrt() + p.abs() && term.abs() < 1e-17 * abs_sum {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(MeijerError::NoConvergence { z });
        }
        total += scale * sum;
        magnitude += (scale * abs_sum).abs();
    }
    Ok((total, magnitude / total.abs()))
}

fn sum_dd(a: f64, b: &[f64; 3], z: f64) -> Result<(f64, f64), MeijerError> {
    let zd = Dd::new(z);
    let lnz = zd.ln();
    let mut total = Dd::ZERO;
    let mut magnitude = 0.0;
    for h in 0..3 {
        if is_nonpositive_integer(a - b[h]) {
            continue;
        }
        let (j, l) = others(h);
        let bh = Dd::new(b[h]);
        let (g1, s1) = ln_gamma_signed(Dd::new(b[j]) - bh);
        let (g2, s2) = ln_gamma_signed(Dd::new(b[l]) - bh);
        let (g3, s3) = ln_gamma_signed(Dd::new(a) - bh);
        let scale = (g1 + g2 - g3 + bh * lnz).exp().mul_f64(s1 * s2 * s3);
        let p = Dd::new(1.0) + bh - Dd::new(a);
        let q1 = Dd::new(1.0) + bh - Dd::new(b[j]);
        let q2 = Dd::new(1.0) + bh - Dd::new(b[l]);
        let mut term = Dd::ONE;
        let mut sum = Dd::ONE;
        let mut abs_sum = 1.0;
        let mut converged = false;
        for k in 0..MAX_TERMS {
            let kd = Dd::new(k as f64);
            let num = p + kd;
            if num.hi == 0.0 {
                converged = true;
                break;
            }
            term = term * num / ((q1 + kd) * (q2 + kd)).mul_f64(k as f64 + 1.0) * zd;
            sum = sum + term;
            abs_sum += term.hi.abs();
            if (k as f64) > z.cbrt() + p.hi.abs() && term.hi.abs() < 1e-33 * abs_sum {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(MeijerError::NoConvergence { z });
        }
        total = total + scale * sum;
        magnitude += (scale.hi * abs_sum).abs();
    }
    let v = total.to_f64();
    Ok((v, magnitude / v.abs()))
}

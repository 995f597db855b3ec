//! Double-double arithmetic (about 32 significant digits).
//!
//! Only what the Meijer-G residue series needs: the four field operations,
//! `exp`, `ln`, `sin(pi x)` and a signed log-gamma. Values are kept as an
//! unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.

use std::cmp::Ordering;
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

const LN2: Dd = Dd {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};

const PI: Dd = Dd {
    hi: std::f64::consts::PI,
    lo: 1.224_646_799_147_353_2e-16,
};

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub const fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn is_finite(self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }

    pub fn recip(self) -> Self {
        Dd::ONE / self
    }

    pub fn mul_f64(self, b: f64) -> Self {
        let (p, e) = two_prod(self.hi, b);
        let (hi, lo) = quick_two_sum(p, e + self.lo * b);
        Dd { hi, lo }
    }

    pub fn powi(self, n: u32) -> Self {
        let mut base = self;
        let mut acc = Dd::ONE;
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            k >>= 1;
        }
        acc
    }

    /// `exp` by argument reduction `x = k ln2 + r`, `r` scaled by 2^-10,
    /// Taylor series for `expm1`, then ten doublings.
    pub fn exp(self) -> Self {
        if self.hi > 709.0 {
            return Dd::new(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Dd::ZERO;
        }
        let k = (self.hi / LN2.hi).round();
        let r = (self - LN2.mul_f64(k)).mul_f64(1.0 / 1024.0);
        // expm1(r) with |r| < 3.4e-4
        let mut term = r;
        let mut sum = r;
        for i in 2..=12 {
            term = (term * r) / Dd::new(i as f64);
            sum = sum + term;
            if term.hi.abs() < 1e-36 {
                break;
            }
        }
        for _ in 0..10 {
            sum = sum.mul_f64(2.0) + sum * sum;
        }
        let one_plus = sum + Dd::ONE;
        let scale = 2f64.powi(k as i32);
        Dd {
            hi: one_plus.hi * scale,
            lo: one_plus.lo * scale,
        }
    }

    /// Natural log by two Newton steps on `exp`.
    pub fn ln(self) -> Self {
        assert!(self.hi > 0.0, "ln of non-positive double-double");
        let mut x = Dd::new(self.hi.ln());
        for _ in 0..2 {
            x = x + self * (-x).exp() - Dd::ONE;
        }
        x
    }

    /// `sin(pi * self)`, exact at integers.
    pub fn sin_pi(self) -> Self {
        // reduce to y in [-1, 1]
        let n = (self.hi / 2.0).round();
        let mut y = self - Dd::new(2.0 * n);
        // sin(pi y) = sin(pi (1 - y)) for y > 1/2, odd symmetry otherwise
        let mut sign = 1.0;
        if y.hi < 0.0 {
            y = -y;
            sign = -1.0;
        }
        if y.hi > 0.5 {
            y = Dd::ONE - y;
        }
        let v = if y.hi > 0.25 {
            cos_taylor(PI * (Dd::new(0.5) - y))
        } else {
            sin_taylor(PI * y)
        };
        v.mul_f64(sign)
    }
}

fn sin_taylor(t: Dd) -> Dd {
    let t2 = t * t;
    let mut term = t;
    let mut sum = t;
    let mut k = 1.0;
    loop {
        term = -(term * t2) / Dd::new((k + 1.0) * (k + 2.0));
        sum = sum + term;
        k += 2.0;
        if term.hi.abs() < 1e-34 * sum.hi.abs().max(1e-300) || k > 60.0 {
            return sum;
        }
    }
}

fn cos_taylor(t: Dd) -> Dd {
    let t2 = t * t;
    let mut term = Dd::ONE;
    let mut sum = Dd::ONE;
    let mut k = 0.0;
    loop {
        term = -(term * t2) / Dd::new((k + 1.0) * (k + 2.0));
        sum = sum + term;
        k += 2.0;
        if term.hi.abs() < 1e-34 || k > 60.0 {
            return sum;
        }
    }
}

// B_{2k} / (2k (2k-1)) for k = 1..=10 as exact rationals.
const STIRLING: [(f64, f64); 10] = [
    (1.0, 12.0),
    (-1.0, 360.0),
    (1.0, 1260.0),
    (-1.0, 1680.0),
    (1.0, 1188.0),
    (-691.0, 360_360.0),
    (1.0, 156.0),
    (-3617.0, 122_400.0),
    (43_867.0, 244_188.0),
    (-174_611.0, 125_400.0),
];

/// `ln|Gamma(x)|` and the sign of `Gamma(x)` for non-integer or positive `x`.
pub fn ln_gamma_signed(x: Dd) -> (Dd, f64) {
    if x.hi < 0.5 {
        // reflection: Gamma(x) Gamma(1 - x) = pi / sin(pi x)
        let s = x.sin_pi();
        assert!(s.hi != 0.0, "gamma pole at non-positive integer");
        let (lg, sg) = ln_gamma_signed(Dd::ONE - x);
        let sign = if s.hi < 0.0 { -sg } else { sg };
        return (PI.ln() - s.abs().ln() - lg, sign);
    }
    const SHIFT_TO: f64 = 40.0;
    let mut y = x;
    let mut prod = Dd::ONE;
    while y.hi < SHIFT_TO {
        prod = prod * y;
        y = y + Dd::ONE;
    }
    let half_ln_2pi = (PI.mul_f64(2.0)).ln().mul_f64(0.5);
    let yinv = y.recip();
    let yinv2 = yinv * yinv;
    let mut corr = Dd::ZERO;
    let mut pow = yinv;
    for &(num, den) in STIRLING.iter() {
        corr = corr + pow * (Dd::new(num) / Dd::new(den));
        pow = pow * yinv2;
    }
    let lg = (y - Dd::new(0.5)) * y.ln() - y + half_ln_2pi + corr;
    (lg - prod.ln(), 1.0)
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd::new(x)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::new(q3)
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            o => o,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: Dd, b: Dd) -> f64 {
        ((a - b).to_f64() / b.to_f64()).abs()
    }

    #[test]
    fn exp_ln_roundtrip_beyond_f64() {
        for &x in &[0.1, 1.0, 2.5, 17.25, -30.0, 123.456] {
            let d = Dd::new(x) + Dd::new(x * 1e-20);
            let back = d.exp().ln();
            assert!((back - d).to_f64().abs() < 1e-29 * x.abs().max(1.0), "x={x}");
        }
    }

    #[test]
    fn exp_one_is_e_to_32_digits() {
        // e = 2.71828182845904523536028747135266...
        let e = Dd::ONE.exp();
        let e_ref = Dd::new(std::f64::consts::E) + Dd::new(1.445_646_891_729_250_2e-16);
        assert!(rel(e, e_ref) < 1e-31);
    }

    #[test]
    fn sin_pi_special_points() {
        assert_eq!(Dd::new(3.0).sin_pi().to_f64(), 0.0);
        assert!((Dd::new(0.5).sin_pi() - Dd::ONE).to_f64().abs() < 1e-32);
        assert!((Dd::new(-1.5).sin_pi() - Dd::ONE).to_f64().abs() < 1e-32);
        let s = Dd::new(1.0 / 6.0).sin_pi().to_f64();
        assert!((s - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ln_gamma_matches_factorials_and_reflection() {
        // Gamma(21) = 20! = 2432902008176640000 exactly representable in two doubles
        let (lg, s) = ln_gamma_signed(Dd::new(21.0));
        let fact20 = Dd::new(2_432_902_008_176_640_000.0);
        assert_eq!(s, 1.0);
        assert!((lg - fact20.ln()).to_f64().abs() < 1e-28);
        // Gamma(1/2) = sqrt(pi)
        let (lg, _) = ln_gamma_signed(Dd::new(0.5));
        assert!((lg - PI.ln().mul_f64(0.5)).to_f64().abs() < 1e-28);
        // Gamma(-1/2) = -2 sqrt(pi)
        let (lg, s) = ln_gamma_signed(Dd::new(-0.5));
        assert_eq!(s, -1.0);
        let expect = PI.ln().mul_f64(0.5) + Dd::new(2.0).ln();
        assert!((lg - expect).to_f64().abs() < 1e-28);
        // f64 cross-check at an awkward point
        let (lg, s) = ln_gamma_signed(Dd::new(-3.3));
        let g = libm::tgamma(-3.3);
        assert_eq!(s, g.signum());
        assert!((lg.to_f64() - g.abs().ln()).abs() < 1e-14);
    }

    #[test]
    fn division_is_inverse_of_multiplication() {
        let a = Dd::new(1.0) / Dd::new(3.0);
        let back = a * Dd::new(3.0);
        assert!((back - Dd::ONE).to_f64().abs() < 1e-32);
    }
}

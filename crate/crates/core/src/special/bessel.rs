//! Modified Bessel function of the second kind `K_nu(x)` for real order.
//!
//! Two regimes, split at `x = 2`: Temme's series for small arguments and
//! Steed's continued fraction for large ones. Both produce `K_mu` and
//! `K_{mu+1}` for `|mu| <= 1/2`; the requested order is reached by forward
//! recurrence, which is stable for `K`.

use std::f64::consts::PI;

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 10_000;
/// Argument at which the evaluation switches from series to continued fraction.
pub const SWITCH_X: f64 = 2.0;

const EULER: f64 = 0.577_215_664_901_532_9;

/// Returns `(gam1, gam2, 1/Gamma(1+mu), 1/Gamma(1-mu))` as used by Temme's series.
fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    let gampl = 1.0 / libm::tgamma(1.0 + mu);
    let gammi = 1.0 / libm::tgamma(1.0 - mu);
    let gam2 = 0.5 * (gammi + gampl);
    let gam1 = if mu.abs() < 1e-2 {
        // odd part of the Taylor expansion of 1/Gamma(1+x)
        let m2 = mu * mu;
        -(EULER - 0.042_002_635_034_095_2 * m2 - 0.042_197_734_555_544_3 * m2 * m2)
    } else {
        (gammi - gampl) / (2.0 * mu)
    };
    (gam1, gam2, gampl, gammi)
}

/// `(K_mu(x), K_{mu+1}(x))` for `|mu| <= 1/2`, `0 < x < 2`.
fn temme_series(mu: f64, x: f64) -> (f64, f64) {
    let x2 = 0.5 * x;
    let pimu = PI * mu;
    let fact = if pimu.abs() < EPS { 1.0 } else { pimu / pimu.sin() };
    let d = -x2.ln();
    let e = mu * d;
    let fact2 = if e.abs() < EPS { 1.0 } else { e.sinh() / e };
    let (gam1, gam2, gampl, gammi) = temme_gammas(mu);
    let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
    let mut sum = ff;
    let ee = e.exp();
    let mut p = 0.5 * ee / gampl;
    let mut q = 0.5 / (ee * gammi);
    let mut c = 1.0;
    let dd = x2 * x2;
    let mut sum1 = p;
    let mu2 = mu * mu;
    for i in 1..MAX_ITER {
        let fi = i as f64;
        ff = (fi * ff + p + q) / (fi * fi - mu2);
        c *= dd / fi;
        p /= fi - mu;
        q /= fi + mu;
        let del = c * ff;
        sum += del;
        sum1 += c * (p - fi * ff);
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    (sum, sum1 * 2.0 / x)
}

/// `e^x (K_mu(x), K_{mu+1}(x))` for `|mu| <= 1/2`, `x >= 2` (Steed's CF2).
fn steed_cf2(mu: f64, x: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25 - mu * mu;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 1..MAX_ITER {
        let fi = i as f64;
        a -= 2.0 * fi;
        c = -a * c / (fi + 1.0);
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < EPS {
            break;
        }
    }
    let h = a1 * h;
    let kmu = (PI / (2.0 * x)).sqrt() / s;
    let k1 = kmu * (mu + x + 0.5 - h) / x;
    (kmu, k1)
}

/// `K_nu(x)` for real `nu` and `x > 0`. Symmetric in the order.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    bessel_k_scaled(nu, x) * (-x).exp()
}

/// `exp(x) K_nu(x)`, which stays representable for large `x`.
pub fn bessel_k_scaled(nu: f64, x: f64) -> f64 {
    assert!(x > 0.0, "K_nu(x) requires x > 0, got {x}");
    let nu = nu.abs();
    let nl = (nu + 0.5).floor();
    let mu = nu - nl;
    let (mut kmu, mut k1) = if x < SWITCH_X {
        let (a, b) = temme_series(mu, x);
        (a * x.exp(), b * x.exp())
    } else {
        steed_cf2(mu, x)
    };
    for i in 1..=(nl as usize) {
        let next = (mu + i as f64) * (2.0 / x) * k1 + kmu;
        kmu = k1;
        k1 = next;
    }
    kmu
}

/// `ln K_nu(x)`; avoids underflow of `K` itself at large arguments.
pub fn ln_bessel_k(nu: f64, x: f64) -> f64 {
    bessel_k_scaled(nu, x).ln() - x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::quad::{integrate_semi_infinite, Tolerance};

    // K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt
    fn k_oracle(nu: f64, x: f64) -> f64 {
        let f = |t: f64| (-x * t.cosh() + nu * t).exp() * 0.5 + (-x * t.cosh() - nu * t).exp() * 0.5;
        integrate_semi_infinite(f, 0.0, Tolerance::new(0.0, 1e-13))
            .unwrap()
            .value
    }

    #[test]
    fn half_order_closed_form() {
        // K_{1/2}(x) = sqrt(pi / (2x)) e^{-x}
        for &x in &[0.01, 0.3, 1.0, 1.999, 2.0, 2.001, 7.5, 40.0] {
            let exact = (PI / (2.0 * x)).sqrt() * (-x as f64).exp();
            let got = bessel_k(0.5, x);
            assert!(((got - exact) / exact).abs() < 1e-13, "x={x} got={got} exact={exact}");
        }
    }

    #[test]
    fn tabulated_integer_orders() {
        // A&S table 9.8 values
        assert!((bessel_k(0.0, 1.0) - 0.421_024_438_240_708_3).abs() < 1e-14);
        assert!((bessel_k(1.0, 1.0) - 0.601_907_230_197_234_6).abs() < 1e-14);
        assert!((bessel_k(0.0, 2.0) - 0.113_893_872_749_533_4).abs() < 1e-14);
    }

    #[test]
    fn matches_integral_oracle_across_regimes() {
        for &nu in &[0.0, 0.17, 0.5, 1.3, 1.8303, 2.49, 5.7] {
            for &x in &[0.05, 0.5, 1.5, 1.99, 2.01, 3.0, 10.0, 25.0] {
                let got = bessel_k(nu, x);
                let want = k_oracle(nu, x);
                assert!(((got - want) / want).abs() < 1e-11, "nu={nu} x={x} got={got} want={want}");
            }
        }
    }

    #[test]
    fn both_sides_of_switch_agree() {
        for &nu in &[0.0, 0.3, 1.83, 4.4] {
            let below = bessel_k(nu, SWITCH_X - 1e-9);
            let above = bessel_k(nu, SWITCH_X + 1e-9);
            // dK/dx is O(K) here, so a 2e-9 step moves the value ~1e-8 relative
            assert!(((below - above) / above).abs() < 1e-7, "nu={nu}");
            let (ts, _) = temme_series(nu - (nu + 0.5).floor(), SWITCH_X);
            let (cf_scaled, _) = steed_cf2(nu - (nu + 0.5).floor(), SWITCH_X);
            let cf = cf_scaled * (-SWITCH_X).exp();
            assert!(((ts - cf) / cf).abs() < 1e-13, "nu={nu} series={ts} cf={cf}");
        }
    }

    #[test]
    fn order_symmetry_and_recurrence() {
        let x = 1.7;
        assert_eq!(bessel_k(-2.3, x), bessel_k(2.3, x));
        // K_{nu+1} = K_{nu-1} + (2 nu / x) K_nu
        let nu = 2.6;
        let lhs = bessel_k(nu + 1.0, x);
        let rhs = bessel_k(nu - 1.0, x) + 2.0 * nu / x * bessel_k(nu, x);
        assert!(((lhs - rhs) / lhs).abs() < 1e-13);
    }

    #[test]
    fn log_form_survives_huge_arguments() {
        // K_{1/2} closed form, and the two-term Hankel expansion for nu = 1.83
        for &x in &[800.0, 2e3, 1e5] {
            let want = 0.5 * (PI / (2.0 * x)).ln() - x;
            assert!((ln_bessel_k(0.5, x) - want).abs() < 1e-12 * x);
            let mu = 4.0 * 1.83f64 * 1.83;
            let hankel = want + (1.0 + (mu - 1.0) / (8.0 * x) + (mu - 1.0) * (mu - 9.0) / (128.0 * x * x)).ln();
            assert!((ln_bessel_k(1.83, x) - hankel).abs() < 1e-9);
        }
    }
}

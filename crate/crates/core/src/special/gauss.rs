//! Fixed Gaussian rules: Gauss-Legendre on `[-1, 1]` and probabilists'
//! Gauss-Hermite, i.e. expectations over a standard normal.

use std::f64::consts::PI;

/// A quadrature rule as parallel node/weight vectors.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    /// Gauss-Legendre rule with `n` points on `[-1, 1]`.
    pub fn legendre(n: usize) -> Rule {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut pp = 0.0;
            for _ in 0..100 {
                let (mut p1, mut p2) = (1.0, 0.0);
                for j in 0..n {
                    let jf = j as f64;
                    let p3 = p2;
                    p2 = p1;
                    p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
                }
                pp = nf * (z * p1 - p2) / (z * z - 1.0);
                let dz = p1 / pp;
                z -= dz;
                if dz.abs() < 1e-15 {
                    break;
                }
            }
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            let w = 2.0 / ((1.0 - z * z) * pp * pp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Rule { nodes, weights }
    }

    /// Gauss-Hermite rule for `E[f(X)]`, `X ~ N(0, 1)`; weights sum to one.
    pub fn hermite_normal(n: usize) -> Rule {
        assert!(n >= 1);
        // physicists' rule for weight exp(-x^2), then rescale
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let nf = n as f64;
        let pim4 = PI.powf(-0.25);
        let m = n.div_ceil(2);
        let mut z = 0.0;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..200 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let jf = j as f64;
                    let p3 = p2;
                    p2 = p1;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let dz = p1 / pp;
                z -= dz;
                if dz.abs() < 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        let norm = PI.sqrt();
        let nodes = x.iter().map(|v| v * std::f64::consts::SQRT_2).collect();
        let weights = w.iter().map(|v| v / norm).collect();
        Rule { nodes, weights }
    }

    /// Integral of `f` over `[a, b]` with this (Legendre) rule.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(c + h * x);
        }
        s * h
    }

    /// `E[f(mean + sd X)]` with this (Hermite) rule.
    pub fn expect<F: FnMut(f64) -> f64>(&self, mean: f64, sd: f64, mut f: F) -> f64 {
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(mean + sd * x);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 16, 24] {
            let r = Rule::legendre(n);
            let deg = 2 * n - 1;
            // int_{-1}^{1} x^k = 2/(k+1) for even k
            for k in 0..=deg {
                let got = r.integrate(-1.0, 1.0, |x| x.powi(k as i32));
                let want = if k % 2 == 0 { 2.0 / (k as f64 + 1.0) } else { 0.0 };
                assert!((got - want).abs() < 1e-13, "n={n} k={k} got={got}");
            }
        }
    }

    #[test]
    fn hermite_reproduces_normal_moments() {
        // E[X^{2k}] = (2k-1)!!
        for n in [1usize, 4, 20, 40, 64] {
            let r = Rule::hermite_normal(n);
            let wsum: f64 = r.weights.iter().sum();
            assert!((wsum - 1.0).abs() < 1e-13, "n={n}");
            let mut dfact = 1.0;
            for k in 1..n.min(12) {
                dfact *= (2 * k - 1) as f64;
                let got = r.expect(0.0, 1.0, |x| x.powi(2 * k as i32));
                assert!(((got - dfact) / dfact).abs() < 1e-10, "n={n} k={k} got={got} want={dfact}");
            }
        }
    }

    #[test]
    fn hermite_expectation_of_smooth_function() {
        // E[cos X] = exp(-1/2)
        let r = Rule::hermite_normal(32);
        let got = r.expect(0.0, 1.0, f64::cos);
        assert!((got - (-0.5f64).exp()).abs() < 1e-14);
    }
}

//! Closed-form tracking-error and bit-error probabilities, averaged over the
//! fading density by numerical quadrature.
//!
//! Two families of conditional expressions are available:
//!
//! * [`Formulation::Exact`] (default) evaluates the decision rules the
//!   receiver actually applies. With known CSI the metric picks the largest
//!   quadrant sum except for noise excursions some `8 sqrt(L_s)` standard
//!   deviations below zero, so `Pr{correct | h, m} = E[Phi(t / s_0)^3]` over
//!   the lit quadrant's sum `t`. The blind metric picks the largest sum when
//!   the total current `S` is positive and the smallest when it is negative;
//!   conditioning on `t` and on the sum `T` of the three dark quadrants leaves
//!   only the largest residual of three i.i.d. normals about their mean,
//!   whose distribution is tabulated once. Bit errors are averaged over the
//!   slot currents conditioned on the chosen quadrant's sum.
//! * [`Formulation::Printed`] and [`Formulation::PrintedMainText`] are the
//!   high-SNR approximations with their Gaussian `Q` arguments taken as
//!   given, the two differing only in whether the tracking variance carries
//!   `h mu m` or `h m`. Quantities are plugged in SI with `mu` read as the
//!   `1`-symbol current `mu P_t`. These forms are not dimensionally
//!   consistent, and the blind BER's square root goes negative in most
//!   cells; such cells are clamped to `Q = 1/2` and counted.
//!
//! The outer integral runs over `ln u`, `u = h / (A_0 h_l)`: adaptive
//! Gauss-Kronrod on `[1e-12, 1]`, then `[U, 2U]` pieces until three
//! successive pieces each add less than `1e-10` of the running total.

use std::cell::Cell;
use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

use crate::channel::{pdf_h, ChannelError, TurbulenceDerived};
use crate::config::{dbm_to_watts, derive_constants, ConfigError, SystemParams};
use crate::geometry::{fbm_probability, DetectorGeometry};
use crate::link_sim::fmt_dbm;
use crate::receiver::{detection_threshold, ReceiverConstants};
use crate::special::gauss::Rule;
use crate::special::quad::{integrate, QuadError, Tolerance};
use crate::special::{ln_binomial, norm_cdf, norm_pdf};

pub use crate::special::q_function;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("outer quadrature failed: {0}")]
    Quadrature(#[from] QuadError),
    #[error("probability {value} escaped [0, 1] beyond tolerance")]
    OutOfRange { value: f64 },
    #[error("outer integral still growing at u = {upper}")]
    TailNotConverged { upper: f64 },
    #[error("unknown curve kind `{0}` (expected ter_known, ter_blind, ber_known, ber_blind or floor)")]
    UnknownKind(String),
    #[error("unknown formulation `{0}` (expected exact, printed or printed_main)")]
    UnknownFormulation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    #[default]
    Exact,
    Printed,
    #[serde(rename = "printed_main")]
    PrintedMainText,
}

impl Formulation {
    pub fn as_str(self) -> &'static str {
        match self {
            Formulation::Exact => "exact",
            Formulation::Printed => "printed",
            Formulation::PrintedMainText => "printed_main",
        }
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Formulation {
    type Err = AnalysisError;
    fn from_str(s: &str) -> Result<Self, AnalysisError> {
        match s {
            "exact" => Ok(Formulation::Exact),
            "printed" => Ok(Formulation::Printed),
            "printed_main" => Ok(Formulation::PrintedMainText),
            other => Err(AnalysisError::UnknownFormulation(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    TerKnown,
    TerBlind,
    BerKnown,
    BerBlind,
    Floor,
}

impl Kind {
    pub const ALL: [Kind; 5] = [Kind::TerKnown, Kind::TerBlind, Kind::BerKnown, Kind::BerBlind, Kind::Floor];

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::TerKnown => "ter_known",
            Kind::TerBlind => "ter_blind",
            Kind::BerKnown => "ber_known",
            Kind::BerBlind => "ber_blind",
            Kind::Floor => "floor",
        }
    }

    fn is_ber(self) -> bool {
        matches!(self, Kind::BerKnown | Kind::BerBlind)
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Kind {
    type Err = AnalysisError;
    fn from_str(s: &str) -> Result<Self, AnalysisError> {
        Kind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| AnalysisError::UnknownKind(s.to_string()))
    }
}

/// Node counts and tolerance for the inner and outer integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSettings {
    /// relative tolerance of each adaptive outer piece
    pub rel_tol: f64,
    /// Gauss-Hermite nodes over the lit quadrant's sum
    pub t_nodes: usize,
    /// Gauss-Legendre nodes per unit-scale panel of the inner integrals
    pub panel_nodes: usize,
    /// Gauss-Legendre nodes over the largest residual
    pub residual_nodes: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings {
            rel_tol: 1e-6,
            t_nodes: 32,
            panel_nodes: 8,
            residual_nodes: 12,
        }
    }
}

impl QuadratureSettings {
    /// Tighter everywhere; used to check that results have converged.
    pub fn refined() -> Self {
        QuadratureSettings {
            rel_tol: 5e-7,
            t_nodes: 48,
            panel_nodes: 12,
            residual_nodes: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    /// [W]
    pub tx_power: f64,
    pub kind: Kind,
    pub value: f64,
    /// estimated absolute error of the outer quadrature
    pub quad_tol: f64,
    /// `(h, m)` cells whose `Q` argument was clamped
    pub clamped_cells: u64,
    pub formulation: Formulation,
}

/// `7 (1 - p_fbm) / 2^{L_s + 3} + p_fbm`: the blind tracking floor of the
/// printed approximation, where all-zero windows are tracked correctly one
/// time in eight.
pub fn floor_blind(window_len: u32, p_fbm: f64) -> f64 {
    7.0 * (1.0 - p_fbm) / 2f64.powi(window_len as i32 + 3) + p_fbm
}

/// `3 (1 - p_fbm) / 2^{L_s + 2} + p_fbm`: the floor the receiver actually
/// reaches, since an all-zero window picks the lit quadrant one time in four.
pub fn floor_blind_exact(window_len: u32, p_fbm: f64) -> f64 {
    3.0 * (1.0 - p_fbm) / 2f64.powi(window_len as i32 + 2) + p_fbm
}

/// `(m, Pr{m})` for `m ~ Binomial(L_s, 1/2)` from log-space coefficients.
/// Above 64 slots only `m` within 8 standard deviations of `L_s / 2` is kept
/// and the weights are renormalized.
pub fn binomial_weights(window_len: u32) -> Vec<(u32, f64)> {
    let l = window_len;
    let (lo, hi) = if l > 64 {
        let half = l as f64 / 2.0;
        let span = 8.0 * (l as f64).sqrt() / 2.0;
        (((half - span).floor().max(0.0)) as u32, ((half + span).ceil() as u32).min(l))
    } else {
        (0, l)
    };
    let ln2l = l as f64 * 2f64.ln();
    let mut w: Vec<(u32, f64)> = (lo..=hi).map(|m| (m, (ln_binomial(l, m) - ln2l).exp())).collect();
    let total: f64 = w.iter().map(|x| x.1).sum();
    for x in &mut w {
        x.1 /= total;
    }
    w
}

const RESIDUAL_MAX: f64 = 8.0;
const RESIDUAL_CELLS: usize = 4096;

/// Density of the largest of `X_j - mean(X)` over three i.i.d. standard normals.
pub fn max_residual_pdf(c: f64) -> f64 {
    if c <= 0.0 {
        0.0
    } else {
        1.5 * (3.0 / PI).sqrt() * (-0.75 * c * c).exp() * libm::erf(1.5 * c)
    }
}

/// Survival function of [`max_residual_pdf`] on a cubic-Hermite table.
struct ResidualTable {
    step: f64,
    sf: Vec<f64>,
}

impl ResidualTable {
    fn build() -> Self {
        let step = RESIDUAL_MAX / RESIDUAL_CELLS as f64;
        let rule = Rule::legendre(8);
        let mut sf = vec![0.0; RESIDUAL_CELLS + 1];
        for i in (0..RESIDUAL_CELLS).rev() {
            let a = i as f64 * step;
            sf[i] = sf[i + 1] + rule.integrate(a, a + step, max_residual_pdf);
        }
        ResidualTable { step, sf }
    }

    fn sf(&self, c: f64) -> f64 {
        if c <= 0.0 {
            return 1.0;
        }
        if c >= RESIDUAL_MAX {
            return 0.0;
        }
        let t = c / self.step;
        let i = (t.floor() as usize).min(RESIDUAL_CELLS - 1);
        let x = t - i as f64;
        let (y0, y1) = (self.sf[i], self.sf[i + 1]);
        let a = i as f64 * self.step;
        let d0 = -max_residual_pdf(a) * self.step;
        let d1 = -max_residual_pdf(a + self.step) * self.step;
        let x2 = x * x;
        let x3 = x2 * x;
        (2.0 * x3 - 3.0 * x2 + 1.0) * y0 + (x3 - 2.0 * x2 + x) * d0 + (-2.0 * x3 + 3.0 * x2) * y1 + (x3 - x2) * d1
    }
}

fn residual_table() -> &'static ResidualTable {
    static TABLE: OnceLock<ResidualTable> = OnceLock::new();
    TABLE.get_or_init(ResidualTable::build)
}

/// `Pr{max residual > c}`.
pub fn max_residual_sf(c: f64) -> f64 {
    residual_table().sf(c)
}

/// Everything the conditional expressions need at one transmit power.
pub struct LinkModel {
    /// [W]
    pub tx_power: f64,
    pub rc: ReceiverConstants,
    pub turbulence: TurbulenceDerived,
    pub path_loss: f64,
    pub p_fbm: f64,
    pub formulation: Formulation,
    settings: QuadratureSettings,
    weights: Vec<(u32, f64)>,
    gh: Rule,
    panel: Rule,
    residual: Rule,
}

/// Breakpoints `[-8, -6, ..., 8]` of the standardized panels, with `extra`
/// spliced in where they fall inside.
fn panels(extra: &[f64]) -> Vec<f64> {
    let mut p: Vec<f64> = (-4..=4).map(|k| 2.0 * k as f64).collect();
    for &x in extra {
        if x > -8.0 && x < 8.0 && !p.contains(&x) {
            let at = p.partition_point(|&v| v < x);
            p.insert(at, x);
        }
    }
    p
}

impl LinkModel {
    pub fn new(p: &SystemParams, formulation: Formulation, settings: QuadratureSettings) -> Result<Self, AnalysisError> {
        let d = derive_constants(p)?;
        let turbulence = TurbulenceDerived::from_params(p)?;
        let geom = DetectorGeometry::from_params(p);
        Ok(LinkModel {
            tx_power: p.tx_power,
            rc: ReceiverConstants::new(&d, p.window_len),
            turbulence,
            path_loss: p.path_loss,
            p_fbm: fbm_probability(&geom, p.hover_std_x, p.hover_std_y),
            formulation,
            settings,
            weights: binomial_weights(p.window_len),
            gh: Rule::hermite_normal(settings.t_nodes),
            panel: Rule::legendre(settings.panel_nodes),
            residual: Rule::legendre(settings.residual_nodes),
        })
    }

    fn l(&self) -> f64 {
        self.rc.window_len as f64
    }

    fn var0(&self) -> f64 {
        self.l() * self.rc.sigma_02
    }

    /// Per-bit error probability of the slots in a quadrant, given the sum
    /// `t` of its currents, the ones count `m`, and whether it is lit.
    fn slot_error(&self, h: f64, m: u32, tau: f64, dev: f64, v_sum: f64, lit: bool) -> f64 {
        let l = self.l();
        let mf = m as f64;
        let v0 = self.rc.sigma_02;
        let sd = |v: f64| (v - v * v / v_sum).max(1e-300).sqrt();
        // zero slots: mean dev * v0 / v_sum given the sum deviation `dev`
        let m0 = dev * v0 / v_sum;
        let p0 = q_function((tau - m0) / sd(v0));
        if !lit {
            // every slot is noise: ones are missed below tau, zeros flip above it
            let p_low = 1.0 - p0;
            return (mf * p_low + (l - mf) * p0) / l;
        }
        let v1 = self.rc.sigma_s2 * h + v0;
        let m1 = dev * v1 / v_sum;
        let p1 = norm_cdf((tau - h * self.rc.signal_current - m1) / sd(v1));
        (mf * p1 + (l - mf) * p0) / l
    }

    /// Known CSI: `(Pr{tracking error}, Pr{bit error})` given `h, m`.
    fn exact_known(&self, h: f64, m: u32, want_ber: bool) -> f64 {
        let v0 = self.var0();
        let s0 = v0.sqrt();
        let tau = detection_threshold(h, &self.rc);
        if m == 0 {
            // all metrics tie and the first quadrant wins, right one time in four
            return if want_ber { q_function(tau / self.rc.sigma_02.sqrt()) } else { 0.75 };
        }
        let a = h * self.rc.signal_current * m as f64;
        let v1 = self.rc.sigma_s2 * h * m as f64 + v0;
        let sd1 = v1.sqrt();
        if !want_ber {
            return self.gh.expect(a, sd1, |t| {
                let q = q_function(t / s0);
                q * (3.0 - 3.0 * q + q * q)
            });
        }
        let correct = self.gh.expect(a, sd1, |t| {
            norm_cdf(t / s0).powi(3) * self.slot_error(h, m, tau, t - a, v1, true)
        });
        // the largest dark quadrant, standardized, beats the lit one
        let mut wrong = 0.0;
        let br = panels(&[]);
        for win in br.windows(2) {
            wrong += self.panel.integrate(win[0], win[1], |y| {
                let w = s0 * y;
                3.0 * norm_pdf(y) * norm_cdf(y).powi(2) * norm_cdf((w - a) / sd1)
                    * self.slot_error(h, m, tau, w, v0, false)
            });
        }
        correct + wrong
    }

    /// Blind receiver: tracking-error or bit-error probability given `h, m`.
    fn exact_blind(&self, h: f64, m: u32, want_ber: bool) -> f64 {
        let v0 = self.var0();
        let s0 = v0.sqrt();
        let a = h * self.rc.signal_current * m as f64;
        let v1 = self.rc.sigma_s2 * h * m as f64 + v0;
        let sd_t = 3f64.sqrt() * s0;
        let l = self.l();
        let mu = self.rc.signal_current;
        let tab = residual_table();
        let sd1 = v1.sqrt();
        let inner = |t: f64| {
            let mut acc = 0.0;
            // the sign of S flips at T = -t; the residual bound hits zero at T = 3t
            let br = panels(&[-t / sd_t, 3.0 * t / sd_t]);
            for win in br.windows(2) {
                acc += self.panel.integrate(win[0], win[1], |y| {
                    let big_t = sd_t * y;
                    let s = t + big_t;
                    let positive = s > 0.0;
                    // largest (S > 0) or smallest (S < 0) dark residual must lose to t
                    let c = if positive { (t - big_t / 3.0) / s0 } else { (big_t / 3.0 - t) / s0 };
                    let p_wrong = tab.sf(c);
                    let val = if !want_ber {
                        p_wrong
                    } else {
                        let h_hat = (2.0 * s / (mu * l)).max(0.0);
                        let tau = detection_threshold(h_hat, &self.rc);
                        let mut e = (1.0 - p_wrong) * self.slot_error(h, m, tau, t - a, v1, true);
                        let lo = c.max(0.0);
                        // skipped once a wrong pick is too rare to matter
                        if max_residual_sf(lo) > 1e-16 {
                            e += self.residual.integrate(lo, RESIDUAL_MAX, |r| {
                                let w = if positive { big_t / 3.0 + r * s0 } else { big_t / 3.0 - r * s0 };
                                max_residual_pdf(r) * self.slot_error(h, m, tau, w, v0, false)
                            });
                        }
                        e
                    };
                    norm_pdf(y) * val
                });
            }
            acc
        };
        // the inner average has a kink at t = 0 where S can change sign
        let x0 = -a / sd1;
        if x0 < -8.0 {
            return self.gh.expect(a, sd1, inner);
        }
        panels(&[x0])
            .windows(2)
            .map(|win| self.panel.integrate(win[0], win[1], |x| norm_pdf(x) * inner(a + sd1 * x)))
            .sum()
    }

    fn printed_ter_arg(&self, h: f64, m: u32, blind: bool) -> f64 {
        if m == 0 {
            return 0.0;
        }
        let (mf, l) = (m as f64, self.l());
        let mu = self.rc.signal_current;
        let ss = self.rc.sigma_s2;
        let s02 = self.rc.sigma_02;
        let lin = h * mu * mf;
        if blind {
            let var = (4.0 * l * s02 + 3.0 * lin).powi(2) * (ss * h * mf + l * s02)
                + l * s02 * lin * lin
                + 2.0 * l * s02 * (2.0 * l * s02 + lin).powi(2);
            lin * (lin + 2.0 * l * s02) / var.sqrt()
        } else {
            let inner = match self.formulation {
                Formulation::PrintedMainText => h * mf,
                _ => lin,
            };
            let var = (2.0 * ss * h * mf * (inner + l * s02)).powi(2) * (ss * h * mf + l * s02)
                + l * s02 * (2.0 * mf * l * s02 * ss * h).powi(2);
            mu * ss * h * h * mf * mf * (lin + 2.0 * l * s02) / var.sqrt()
        }
    }

    /// Printed approximations; the flag reports a clamped square root.
    fn printed(&self, kind: Kind, h: f64, m: u32) -> (f64, bool) {
        let blind = matches!(kind, Kind::TerBlind | Kind::BerBlind);
        let p_tc = (1.0 - q_function(self.printed_ter_arg(h, m, blind))).powi(3);
        if !kind.is_ber() {
            return (1.0 - p_tc, false);
        }
        let (mf, l) = (m as f64, self.l());
        let mu = self.rc.signal_current;
        let ss = self.rc.sigma_s2;
        let s02 = self.rc.sigma_02;
        let frac = mf / l;
        if !blind {
            let tau = detection_threshold(h, &self.rc);
            let qt = q_function(tau / s02.sqrt());
            let qc = q_function((mu * h - tau) / (ss * h + s02).sqrt());
            return (frac * (1.0 - qt) + (1.0 - frac) * qt + frac * p_tc * (qc + qt - 1.0), false);
        }
        let qa = q_function(mf * h / (mf * ss * h + 4.0 * l * s02).sqrt());
        let c1 = 2.0 * mf / l * ss * h + s02 - ((2.0 * mf - l) / l).powi(2) * s02;
        let c2 = 4.0 * mu * mf * s02 - mu * l * (2.0 * s02 + h * ss) - 2.0 * mf * l * (ss + s02);
        let c3 = 2.0 * mu * s02 * (2.0 * mf - l) - mu * h * ss * l;
        let rad = c2 * (ss * h + s02) + c3 * ((4.0 * l - 1.0) * s02);
        let (arg, clamped) = if rad > 0.0 {
            (c1 * l * mu * h / (2.0 * rad.sqrt()), false)
        } else {
            (0.0, m > 0)
        };
        let qc = q_function(arg);
        (frac * (1.0 - qa) + (1.0 - frac) * qa + frac * p_tc * (qc + qa - 1.0), clamped)
    }

    /// Conditional probability given the gain `h`, averaged over `m`, plus
    /// the number of clamped cells.
    pub fn conditional(&self, kind: Kind, h: f64) -> (f64, u64) {
        let cell = |m: u32| match (self.formulation, kind) {
            (_, Kind::Floor) => unreachable!("the floor has no conditional form"),
            (Formulation::Exact, Kind::TerKnown) => (self.exact_known(h, m, false), false),
            (Formulation::Exact, Kind::BerKnown) => (self.exact_known(h, m, true), false),
            (Formulation::Exact, Kind::TerBlind) => (self.exact_blind(h, m, false), false),
            (Formulation::Exact, Kind::BerBlind) => (self.exact_blind(h, m, true), false),
            _ => self.printed(kind, h, m),
        };
        // collected before summing so the result does not depend on scheduling
        let cells: Vec<(f64, bool)> = if kind == Kind::BerBlind && self.formulation == Formulation::Exact {
            self.weights.par_iter().map(|&(m, _)| cell(m)).collect()
        } else {
            self.weights.iter().map(|&(m, _)| cell(m)).collect()
        };
        let mut sum = 0.0;
        let mut clamped = 0;
        for (&(_, w), (v, c)) in self.weights.iter().zip(cells) {
            sum += w * v;
            clamped += c as u64;
        }
        (sum, clamped)
    }

    /// `int_0^inf f(h) f_h(h) dh` over `ln u`, returning `(value, abs_err)`.
    pub fn average_over_fading<F: Fn(f64) -> f64>(&self, f: F) -> Result<(f64, f64), AnalysisError> {
        let scale = self.turbulence.a0 * self.path_loss;
        let td = self.turbulence;
        let g = |ln_u: f64| {
            let u = ln_u.exp();
            let h = u * scale;
            match pdf_h(h, &td, self.path_loss) {
                Ok(fh) if fh == 0.0 => 0.0,
                Ok(fh) => u * fh * scale * f(h),
                Err(_) => f64::NAN,
            }
        };
        let tol = Tolerance::new(1e-17, self.settings.rel_tol);
        let first = integrate(g, (1e-12f64).ln(), 0.0, tol)?;
        let (mut total, mut err) = (first.value, first.abs_err);
        let mut upper = 1.0f64;
        let mut quiet = 0;
        while quiet < 3 {
            if upper > 1e8 {
                return Err(AnalysisError::TailNotConverged { upper });
            }
            let piece = integrate(g, upper.ln(), (2.0 * upper).ln(), tol)?;
            total += piece.value;
            err += piece.abs_err;
            if piece.value.abs() < 1e-10 * total.abs() {
                quiet += 1;
            } else {
                quiet = 0;
            }
            upper *= 2.0;
        }
        Ok((total, err))
    }

    /// Full probability for one kind at this model's transmit power.
    pub fn evaluate(&self, kind: Kind) -> Result<CurvePoint, AnalysisError> {
        let tx_power = self.tx_power;
        let mut point = CurvePoint {
            tx_power,
            kind,
            value: 0.0,
            quad_tol: 0.0,
            clamped_cells: 0,
            formulation: self.formulation,
        };
        if kind == Kind::Floor {
            point.value = floor_blind(self.rc.window_len, self.p_fbm);
            return Ok(point);
        }
        let clamped = Cell::new(0u64);
        let (avg, err) = self.average_over_fading(|h| {
            let (v, c) = self.conditional(kind, h);
            clamped.set(clamped.get() + c);
            v
        })?;
        // a misaligned beam is always mistracked, and its bits are coin flips
        let fbm_cost = if kind.is_ber() { 0.5 } else { 1.0 };
        let value = self.p_fbm * fbm_cost + (1.0 - self.p_fbm) * avg;
        if !(-1e-9..=1.0 + 1e-9).contains(&value) {
            return Err(AnalysisError::OutOfRange { value });
        }
        point.value = value.clamp(0.0, 1.0);
        point.quad_tol = err * (1.0 - self.p_fbm);
        point.clamped_cells = clamped.get();
        Ok(point)
    }
}

/// One closed-form probability for `params` as configured.
pub fn evaluate(p: &SystemParams, kind: Kind, formulation: Formulation) -> Result<CurvePoint, AnalysisError> {
    evaluate_with(p, kind, formulation, QuadratureSettings::default())
}

pub fn evaluate_with(
    p: &SystemParams,
    kind: Kind,
    formulation: Formulation,
    settings: QuadratureSettings,
) -> Result<CurvePoint, AnalysisError> {
    LinkModel::new(p, formulation, settings)?.evaluate(kind)
}

pub fn ter_known_csi(p: &SystemParams, f: Formulation) -> Result<CurvePoint, AnalysisError> {
    evaluate(p, Kind::TerKnown, f)
}

pub fn ter_blind(p: &SystemParams, f: Formulation) -> Result<CurvePoint, AnalysisError> {
    evaluate(p, Kind::TerBlind, f)
}

pub fn ber_known_csi(p: &SystemParams, f: Formulation) -> Result<CurvePoint, AnalysisError> {
    evaluate(p, Kind::BerKnown, f)
}

pub fn ber_blind(p: &SystemParams, f: Formulation) -> Result<CurvePoint, AnalysisError> {
    evaluate(p, Kind::BerBlind, f)
}

/// A failed grid point, kept in place so the sweep can continue.
#[derive(Debug)]
pub struct PointFailure {
    pub p_t_dbm: f64,
    pub kind: Kind,
    pub error: AnalysisError,
}

pub type SweepRow = Result<CurvePoint, PointFailure>;

/// Evaluates every `kind` at every grid power [dBm], in grid order.
pub fn sweep_curve(
    p: &SystemParams,
    grid_dbm: &[f64],
    kinds: &[Kind],
    formulation: Formulation,
    settings: QuadratureSettings,
) -> Vec<SweepRow> {
    let jobs: Vec<(f64, Kind)> = grid_dbm.iter().flat_map(|&g| kinds.iter().map(move |&k| (g, k))).collect();
    jobs.par_iter()
        .map(|&(dbm, kind)| {
            let q = SystemParams {
                tx_power: dbm_to_watts(dbm),
                ..p.clone()
            };
            evaluate_with(&q, kind, formulation, settings).map_err(|error| PointFailure {
                p_t_dbm: dbm,
                kind,
                error,
            })
        })
        .collect()
}

pub const CURVE_CSV_HEADER: &str = "P_t_dBm,kind,value,quad_tol,clamped_cells";

/// Writes a sweep; failed points carry `NaN` values.
pub fn write_curve_csv<W: Write>(mut w: W, rows: &[SweepRow]) -> io::Result<()> {
    writeln!(w, "{CURVE_CSV_HEADER}")?;
    for r in rows {
        match r {
            Ok(c) => writeln!(
                w,
                "{},{},{:e},{:e},{}",
                fmt_dbm(crate::config::watts_to_dbm(c.tx_power)),
                c.kind,
                c.value,
                c.quad_tol,
                c.clamped_cells
            )?,
            Err(f) => writeln!(w, "{},{},NaN,NaN,0", fmt_dbm(f.p_t_dbm), f.kind)?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at_dbm(dbm: f64, l: u32) -> SystemParams {
        SystemParams {
            tx_power: dbm_to_watts(dbm),
            window_len: l,
            ..SystemParams::default()
        }
    }

    #[test]
    fn residual_table_matches_direct_integral() {
        for &c in &[0.0, 0.013, 0.5, 1.0, 2.345, 4.0, 6.5] {
            let direct = integrate(max_residual_pdf, c, 12.0, Tolerance::new(0.0, 1e-13)).unwrap().value;
            assert!((max_residual_sf(c) - direct).abs() < 1e-12, "c={c}");
        }
        let total = integrate(max_residual_pdf, 0.0, 12.0, Tolerance::new(0.0, 1e-14)).unwrap().value;
        assert!((total - 1.0).abs() < 1e-13);
    }

    #[test]
    fn binomial_weights_sum_to_one() {
        for l in [1u32, 5, 10, 30, 64, 65, 200, 1000] {
            let s: f64 = binomial_weights(l).iter().map(|x| x.1).sum();
            assert!((s - 1.0).abs() < 1e-12, "L={l}");
        }
        let w = binomial_weights(10);
        assert!((w[0].1 - 1.0 / 1024.0).abs() < 1e-16);
        assert!(binomial_weights(200).len() < 201);
    }

    #[test]
    fn floors() {
        assert!((floor_blind(10, 0.0) - 8.544_921_875e-4).abs() < 1e-15);
        assert!((floor_blind(20, 0.0) - 8.344_650_268_554_688e-7).abs() < 1e-18);
        assert_eq!(floor_blind(10, 1.0), 1.0);
        assert!((floor_blind_exact(10, 0.0) - 0.75 / 1024.0).abs() < 1e-16);
    }

    #[test]
    fn kind_and_formulation_names() {
        for k in Kind::ALL {
            assert_eq!(k.as_str().parse::<Kind>().unwrap(), k);
        }
        let e = "ter_psychic".parse::<Kind>().unwrap_err();
        assert!(e.to_string().contains("ter_psychic"));
        assert_eq!("printed".parse::<Formulation>().unwrap(), Formulation::Printed);
    }

    #[test]
    fn printed_all_zero_term_is_seven_eighths() {
        let model = LinkModel::new(&at_dbm(-20.0, 10), Formulation::Printed, QuadratureSettings::default()).unwrap();
        for kind in [Kind::TerKnown, Kind::TerBlind] {
            let (v, _) = model.printed(kind, 0.01, 0);
            assert!((v - 0.875).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_threshold_misaligned_bits_are_coin_flips() {
        let model = LinkModel::new(&at_dbm(-20.0, 10), Formulation::Exact, QuadratureSettings::default()).unwrap();
        // tau = 0 and a dark quadrant whose sum is zero
        for m in 0..=10 {
            let e = model.slot_error(0.01, m, 0.0, 0.0, model.var0(), false);
            assert!((e - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_known_matches_brute_force_integral() {
        // Pr{correct} = int phi_V1(t - a) Phi(t / s0)^3 dt by adaptive quadrature
        let model = LinkModel::new(&at_dbm(-23.0, 10), Formulation::Exact, QuadratureSettings::default()).unwrap();
        let h = 0.02;
        for m in [1u32, 4, 9] {
            let s0 = model.var0().sqrt();
            let a = h * model.rc.signal_current * m as f64;
            let sd1 = (model.rc.sigma_s2 * h * m as f64 + model.var0()).sqrt();
            let f = |t: f64| norm_pdf((t - a) / sd1) / sd1 * (1.0 - norm_cdf(t / s0).powi(3));
            let want = integrate(f, a - 12.0 * sd1, a + 12.0 * sd1, Tolerance::new(1e-16, 1e-12)).unwrap().value;
            if want < 1e-15 {
                continue;
            }
            let got = model.exact_known(h, m, false);
            assert!(((got - want) / want).abs() < 1e-5, "m={m} got={got} want={want}");
        }
    }

    #[test]
    fn blind_all_zero_window_is_three_quarters_wrong() {
        let model = LinkModel::new(&at_dbm(-10.0, 10), Formulation::Exact, QuadratureSettings::default()).unwrap();
        let v = model.exact_blind(0.02, 0, false);
        assert!((v - 0.75).abs() < 1e-6, "{v}");
    }

    #[test]
    fn exact_probabilities_stay_in_range() {
        let model = LinkModel::new(&at_dbm(-26.0, 10), Formulation::Exact, QuadratureSettings::default()).unwrap();
        for &h in &[1e-5, 1e-3, 0.01, 0.05] {
            for kind in [Kind::TerKnown, Kind::BerKnown, Kind::TerBlind, Kind::BerBlind] {
                let (v, _) = model.conditional(kind, h);
                assert!((-1e-12..=1.0 + 1e-12).contains(&v), "{kind} h={h} v={v}");
            }
        }
    }

    #[test]
    fn blind_no_better_than_known() {
        let p = at_dbm(-20.0, 10);
        let k = ter_known_csi(&p, Formulation::Exact).unwrap().value;
        let b = ter_blind(&p, Formulation::Exact).unwrap().value;
        assert!(b >= k, "blind {b} known {k}");
    }

    #[test]
    fn csv_rows() {
        let p = at_dbm(-20.0, 10);
        let rows = sweep_curve(&p, &[-20.0], &[Kind::Floor], Formulation::Exact, QuadratureSettings::default());
        let mut buf = Vec::new();
        write_curve_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CURVE_CSV_HEADER);
        assert!(lines[1].starts_with("-20,floor,8.5449"), "{}", lines[1]);
    }
}

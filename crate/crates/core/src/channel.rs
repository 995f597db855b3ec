//! Composite fading channel `h = h_l h_atm h_poi`: turbulence strength along
//! a slant path, Gamma-Gamma parameters, pointing-error statistics, the
//! density and distribution of `h`, and an exact sampler.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};
use thiserror::Error;

use crate::config::{RytovMode, SystemParams};
use crate::geometry::DetectorGeometry;
use crate::special::bessel::ln_bessel_k;
use crate::special::meijer::{meijer_g3013, MeijerError, MeijerValue};
use crate::special::quad::{integrate, integrate_semi_infinite, QuadError, Tolerance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("altitude must be non-negative, got {x} m")]
    NegativeAltitude { x: f64 },
    #[error("`{what}` must be positive and finite, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Meijer(#[from] MeijerError),
}

fn positive(what: &'static str, value: f64) -> Result<f64, ChannelError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(ChannelError::NonPositive { what, value })
    }
}

/// Hufnagel-Valley refractive-index structure parameter at altitude `x` [m].
pub fn cn2_profile(x: f64, wind_speed: f64, cn2_ground: f64) -> Result<f64, ChannelError> {
    if !(x >= 0.0) {
        return Err(ChannelError::NegativeAltitude { x });
    }
    let w = wind_speed / 27.0;
    Ok(0.00594 * w * w * (1e-5 * x).powi(10) * (-x / 1000.0).exp()
        + 2.7e-16 * (-x / 1500.0).exp()
        + cn2_ground * (-x / 100.0).exp())
}

/// Slant-path Rytov variance
/// `2.25 k^{7/6} (L/x_r)^{11/6} int_0^{x_r} Cn2(x) (x - x^2/x_r)^{5/6} dx`.
///
/// The kernel's `d_v` is taken equal to `x_r`, so the weight vanishes at both ends.
pub fn rytov_slant<F: Fn(f64) -> f64>(
    wavelength: f64,
    link_length: f64,
    height_diff: f64,
    cn2: F,
) -> Result<f64, ChannelError> {
    positive("wavelength", wavelength)?;
    positive("link_length", link_length)?;
    let xr = positive("height_diff", height_diff)?;
    let kernel = |x: f64| {
        let w = (x - x * x / xr).max(0.0);
        cn2(x) * w.powf(5.0 / 6.0)
    };
    let r = integrate(kernel, 0.0, xr, Tolerance::new(0.0, 1e-10))?;
    let k = 2.0 * PI / wavelength;
    Ok(2.25 * k.powf(7.0 / 6.0) * (link_length / xr).powf(11.0 / 6.0) * r.value)
}

/// `(alpha, beta)` from the Rytov variance.
pub fn gamma_gamma_params(rytov_variance: f64) -> (f64, f64) {
    let c = rytov_variance;
    let c125 = c.powf(1.2); // chi^{12/5}
    let inv_alpha = (0.49 * c / (1.0 + 1.11 * c125).powf(7.0 / 6.0)).exp_m1();
    let inv_beta = (0.51 * c / (1.0 + 0.69 * c125).powf(5.0 / 6.0)).exp_m1();
    (1.0 / inv_alpha, 1.0 / inv_beta)
}

/// Gamma-Gamma scintillation index `1/alpha + 1/beta + 1/(alpha beta)`.
pub fn scintillation_index(alpha: f64, beta: f64) -> f64 {
    1.0 / alpha + 1.0 / beta + 1.0 / (alpha * beta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointingParams {
    pub v: f64,
    pub a0: f64,
    pub w_leq: f64,
    pub gamma: f64,
}

/// Pointing-error constants for aperture radius `r`, beam radius `w_l` and
/// jitter standard deviation `sigma_j`, all in metres.
pub fn pointing_geometry(r: f64, w_l: f64, sigma_j: f64) -> PointingParams {
    let v = PI.sqrt() * r / (2f64.sqrt() * w_l);
    let erf_v = libm::erf(v);
    let w_leq = (w_l * w_l * PI.sqrt() * erf_v / (2.0 * v * (-v * v).exp())).sqrt();
    PointingParams {
        v,
        a0: erf_v * erf_v,
        w_leq,
        gamma: w_leq / (2.0 * sigma_j),
    }
}

/// Channel statistics derived from [`SystemParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurbulenceDerived {
    pub alpha: f64,
    pub beta: f64,
    pub rytov_variance: f64,
    pub gamma: f64,
    pub a0: f64,
    pub w_leq: f64,
    pub v: f64,
    /// jitter standard deviation `sigma_j` [m]
    pub jitter_std: f64,
}

impl TurbulenceDerived {
    pub fn from_params(p: &SystemParams) -> Result<Self, ChannelError> {
        let rytov_variance = match p.rytov {
            RytovMode::Fixed { rytov_variance } => rytov_variance,
            RytovMode::SlantPath {
                link_length,
                height_diff,
                wind_speed,
                cn2_ground,
            } => rytov_slant(p.wavelength, link_length, height_diff, |x| {
                // x in [0, x_r] so the profile never sees a negative altitude
                cn2_profile(x, wind_speed, cn2_ground).unwrap_or(0.0)
            })?,
        };
        positive("rytov_variance", rytov_variance)?;
        let (alpha, beta) = gamma_gamma_params(rytov_variance);
        let r = p.aperture_radius;
        let jitter_std = p.jitter_ratio * r;
        let pg = pointing_geometry(r, p.beam_radius_ratio * r, jitter_std);
        Ok(TurbulenceDerived {
            alpha,
            beta,
            rytov_variance,
            gamma: pg.gamma,
            a0: pg.a0,
            w_leq: pg.w_leq,
            v: pg.v,
            jitter_std,
        })
    }

    pub fn gamma_sq(&self) -> f64 {
        self.gamma * self.gamma
    }

    pub fn scintillation_index(&self) -> f64 {
        scintillation_index(self.alpha, self.beta)
    }

    /// Smallest Mellin pole exponent; `f_h(h) ~ h^{b - 1}` as `h -> 0`.
    pub fn small_h_exponent(&self) -> f64 {
        self.gamma_sq().min(self.alpha).min(self.beta)
    }
}

/// Natural log of the unit-mean Gamma-Gamma density at `x > 0`.
pub fn ln_gamma_gamma_pdf(x: f64, alpha: f64, beta: f64) -> f64 {
    let ab = alpha * beta;
    let z = 2.0 * (ab * x).sqrt();
    let half = 0.5 * (alpha + beta);
    2f64.ln() + half * ab.ln() - libm::lgamma(alpha) - libm::lgamma(beta) + (half - 1.0) * x.ln()
        + ln_bessel_k(alpha - beta, z)
}

/// Unit-mean Gamma-Gamma density.
pub fn gamma_gamma_pdf(x: f64, alpha: f64, beta: f64) -> f64 {
    if !(x > 0.0) || !x.is_finite() {
        return 0.0;
    }
    // K_nu(z) ~ exp(-z) underflows long before the power term matters
    if 2.0 * (alpha * beta * x).sqrt() > 1400.0 {
        return 0.0;
    }
    ln_gamma_gamma_pdf(x, alpha, beta).exp()
}

const PDF_TOL: Tolerance = Tolerance::new(0.0, 1e-11);

/// Density of `u = h / (A_0 h_l)` by the conditional integral
/// `gamma^2 int_0^inf f_atm(u e^s) e^{-s (gamma^2 - 1)} ds`.
fn pdf_u_integral(u: f64, td: &TurbulenceDerived) -> Result<f64, QuadError> {
    let g2 = td.gamma_sq();
    let f = |s: f64| {
        let x = u * s.exp();
        let fa = gamma_gamma_pdf(x, td.alpha, td.beta);
        if fa == 0.0 {
            0.0
        } else {
            fa * (-s * (g2 - 1.0)).exp()
        }
    };
    Ok(g2 * integrate_semi_infinite(f, 0.0, PDF_TOL)?.value)
}

/// `f_h(h)` by the conditional-integral evaluator.
pub fn pdf_h_integral(h: f64, td: &TurbulenceDerived, h_l: f64) -> Result<f64, ChannelError> {
    let scale = td.a0 * h_l;
    if !(h > 0.0) {
        return Ok(pdf_at_zero(td, h_l, |hh| pdf_h_integral(hh, td, h_l)));
    }
    Ok(pdf_u_integral(h / scale, td)? / scale)
}

/// `f_h(h)` by the Meijer-G residue series. Fails on near-coincident poles.
pub fn pdf_h_series(h: f64, td: &TurbulenceDerived, h_l: f64) -> Result<f64, MeijerError> {
    let scale = td.a0 * h_l;
    let (a, b) = (td.alpha, td.beta);
    let g2 = td.gamma_sq();
    let MeijerValue { value, .. } = meijer_g3013(g2, [g2 - 1.0, a - 1.0, b - 1.0], a * b * h / scale)?;
    let ln_pre = (a * b * g2 / scale).ln() - libm::lgamma(a) - libm::lgamma(b);
    Ok(ln_pre.exp() * value)
}

fn pdf_at_zero<F: Fn(f64) -> Result<f64, ChannelError>>(td: &TurbulenceDerived, h_l: f64, eval: F) -> f64 {
    let e = td.small_h_exponent();
    if e > 1.0 {
        0.0
    } else if e < 1.0 {
        f64::INFINITY
    } else {
        eval(1e-300 * td.a0 * h_l).unwrap_or(f64::NAN)
    }
}

/// Which evaluator produced a density value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdfMethod {
    Series,
    Integral,
}

/// `f_h(h)`: the residue series where it is reliable, otherwise the
/// conditional integral.
pub fn pdf_h(h: f64, td: &TurbulenceDerived, h_l: f64) -> Result<f64, ChannelError> {
    pdf_h_with_method(h, td, h_l).map(|(v, _)| v)
}

pub fn pdf_h_with_method(h: f64, td: &TurbulenceDerived, h_l: f64) -> Result<(f64, PdfMethod), ChannelError> {
    if !(h > 0.0) {
        return Ok((pdf_at_zero(td, h_l, |hh| pdf_h(hh, td, h_l)), PdfMethod::Series));
    }
    match pdf_h_series(h, td, h_l) {
        Ok(v) => Ok((v, PdfMethod::Series)),
        Err(MeijerError::Domain { .. }) => unreachable!("h > 0 checked above"),
        Err(_) => Ok((pdf_h_integral(h, td, h_l)?, PdfMethod::Integral)),
    }
}

/// Distribution function of `u = h / (A_0 h_l)`:
/// `F_atm(u) + u^{gamma^2} int_u^inf f_atm(x) x^{-gamma^2} dx`.
fn cdf_u(u: f64, td: &TurbulenceDerived) -> Result<f64, QuadError> {
    if !(u > 0.0) {
        return Ok(0.0);
    }
    let g2 = td.gamma_sq();
    let below = |s: f64| {
        let x = u * (-s).exp();
        gamma_gamma_pdf(x, td.alpha, td.beta) * x
    };
    let above = |s: f64| {
        let x = u * s.exp();
        let fa = gamma_gamma_pdf(x, td.alpha, td.beta);
        if fa == 0.0 {
            0.0
        } else {
            fa * u * (s * (1.0 - g2)).exp()
        }
    };
    let lo = integrate_semi_infinite(below, 0.0, PDF_TOL)?.value;
    let hi = integrate_semi_infinite(above, 0.0, PDF_TOL)?.value;
    Ok((lo + hi).min(1.0))
}

/// `Pr{h <= x}`.
pub fn cdf_h(x: f64, td: &TurbulenceDerived, h_l: f64) -> Result<f64, ChannelError> {
    Ok(cdf_u(x / (td.a0 * h_l), td)?)
}

/// Tabulated `Pr{h <= x}` on a log grid, for bulk evaluation such as a
/// Kolmogorov-Smirnov test over millions of samples.
#[derive(Debug, Clone)]
pub struct CdfTable {
    ln_lo: f64,
    step: f64,
    scale: f64,
    values: Vec<f64>,
    tail_exponent: f64,
}

impl CdfTable {
    /// Grid over `u = h / (A_0 h_l)` in `[u_lo, u_hi]` with `n >= 2` points.
    pub fn build(td: &TurbulenceDerived, h_l: f64, u_lo: f64, u_hi: f64, n: usize) -> Result<Self, ChannelError> {
        assert!(n >= 2 && u_lo > 0.0 && u_hi > u_lo);
        let ln_lo = u_lo.ln();
        let step = (u_hi.ln() - ln_lo) / (n - 1) as f64;
        let values = (0..n)
            .map(|i| cdf_u((ln_lo + step * i as f64).exp(), td))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CdfTable {
            ln_lo,
            step,
            scale: td.a0 * h_l,
            values,
            tail_exponent: td.small_h_exponent(),
        })
    }

    pub fn eval(&self, h: f64) -> f64 {
        if !(h > 0.0) {
            return 0.0;
        }
        let t = ((h / self.scale).ln() - self.ln_lo) / self.step;
        let last = self.values.len() - 1;
        if t <= 0.0 {
            // leading power law below the grid
            return self.values[0] * (t * self.step * self.tail_exponent).exp();
        }
        if t >= last as f64 {
            return 1.0;
        }
        let i = t.floor() as usize;
        let frac = t - i as f64;
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }
}

/// Where the focused spot lands on the quad-detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Capture {
    /// Quadrant number in `1..=4`, counter-clockwise from `(+x, +y)`.
    Quadrant(u8),
    /// The spot misses all four quadrants.
    Misaligned,
}

impl Capture {
    /// Zero-based quadrant index, `None` under full misalignment.
    pub fn index(self) -> Option<usize> {
        match self {
            Capture::Quadrant(q) => Some(q as usize - 1),
            Capture::Misaligned => None,
        }
    }
}

impl fmt::Display for Capture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Capture::Quadrant(q) => write!(f, "{q}"),
            Capture::Misaligned => f.write_str("fbm"),
        }
    }
}

/// Quadrant from the sign pattern of the arrival angles; boundary points go
/// to the lower index.
pub fn quadrant_of(theta_x: f64, theta_y: f64) -> u8 {
    match (theta_x, theta_y) {
        (x, y) if x >= 0.0 && y >= 0.0 => 1,
        (x, y) if x < 0.0 && y >= 0.0 => 2,
        (x, _) if x <= 0.0 => 3,
        _ => 4,
    }
}

/// One slow-fading block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelDraw {
    pub theta_x: f64,
    pub theta_y: f64,
    pub h_atm: f64,
    pub h_poi: f64,
    pub h: f64,
    pub capture: Capture,
}

/// Pre-built distributions for [`sample_channel`].
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    pub turbulence: TurbulenceDerived,
    pub geometry: DetectorGeometry,
    pub path_loss: f64,
    theta_x: Normal<f64>,
    theta_y: Normal<f64>,
    large: Gamma<f64>,
    small: Gamma<f64>,
}

impl ChannelSampler {
    pub fn new(p: &SystemParams) -> Result<Self, ChannelError> {
        Self::with_turbulence(p, TurbulenceDerived::from_params(p)?)
    }

    /// Reuses already derived turbulence statistics.
    pub fn with_turbulence(p: &SystemParams, turbulence: TurbulenceDerived) -> Result<Self, ChannelError> {
        let sx = positive("hover_std_x", p.hover_std_x)?;
        let sy = positive("hover_std_y", p.hover_std_y)?;
        let a = positive("alpha", turbulence.alpha)?;
        let b = positive("beta", turbulence.beta)?;
        Ok(ChannelSampler {
            turbulence,
            geometry: DetectorGeometry::from_params(p),
            path_loss: p.path_loss,
            theta_x: Normal::new(0.0, sx).expect("positive sd"),
            theta_y: Normal::new(0.0, sy).expect("positive sd"),
            large: Gamma::new(a, 1.0 / a).expect("positive shape"),
            small: Gamma::new(b, 1.0 / b).expect("positive shape"),
        })
    }
}

/// Draws arrival angles, capture state and the composite gain for one block.
pub fn sample_channel<R: Rng + ?Sized>(rng: &mut R, s: &ChannelSampler) -> ChannelDraw {
    let theta_x = s.theta_x.sample(rng);
    let theta_y = s.theta_y.sample(rng);
    let inside = theta_x.abs() < s.geometry.theta_x_fov() && theta_y.abs() < s.geometry.theta_y_fov();
    let capture = if inside {
        Capture::Quadrant(quadrant_of(theta_x, theta_y))
    } else {
        Capture::Misaligned
    };
    let h_atm = s.large.sample(rng) * s.small.sample(rng);
    // Rayleigh radial offset by inversion; 1 - U lies in (0, 1]
    let u: f64 = rng.random();
    let sj = s.turbulence.jitter_std;
    let rho2 = -2.0 * sj * sj * (1.0 - u).ln();
    let w = s.turbulence.w_leq;
    let h_poi = s.turbulence.a0 * (-2.0 * rho2 / (w * w)).exp();
    ChannelDraw {
        theta_x,
        theta_y,
        h_atm,
        h_poi,
        h: s.path_loss * h_atm * h_poi,
        capture,
    }
}

pub const SAMPLE_CSV_HEADER: &str = "theta_x,theta_y,h_atm,h_poi,h,capture";
pub const PDF_CSV_HEADER: &str = "h,pdf";

pub fn write_samples_csv<W: Write>(mut w: W, draws: &[ChannelDraw]) -> io::Result<()> {
    writeln!(w, "{SAMPLE_CSV_HEADER}")?;
    for d in draws {
        writeln!(w, "{:e},{:e},{:e},{:e},{:e},{}", d.theta_x, d.theta_y, d.h_atm, d.h_poi, d.h, d.capture)?;
    }
    Ok(())
}

/// Writes `(h, f_h(h))` rows.
pub fn write_pdf_csv<W: Write>(mut w: W, rows: &[(f64, f64)]) -> io::Result<()> {
    writeln!(w, "{PDF_CSV_HEADER}")?;
    for (h, f) in rows {
        writeln!(w, "{h:e},{f:e}")?;
    }
    Ok(())
}

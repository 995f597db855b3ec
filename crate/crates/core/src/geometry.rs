//! Quad-detector field of view, capture and misalignment probabilities, and
//! the detector-size dependent background power.

use crate::special::q_function;
use crate::special::quad::{integrate, QuadError, Tolerance};

/// Above this side-to-focal ratio the small-angle solid angle is suspect.
pub const SMALL_ANGLE_LIMIT: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorGeometry {
    pub a: f64,
    pub b: f64,
    pub focal_length: f64,
}

impl DetectorGeometry {
    pub fn new(a: f64, b: f64, focal_length: f64) -> Self {
        DetectorGeometry { a, b, focal_length }
    }

    pub fn from_params(p: &crate::config::SystemParams) -> Self {
        DetectorGeometry::new(p.detector_a, p.detector_b, p.focal_length)
    }

    /// Half field of view in the x-z plane, `arctan(b / f_c)`.
    pub fn theta_x_fov(&self) -> f64 {
        (self.b / self.focal_length).atan()
    }

    /// Half field of view in the y-z plane, `arctan(a / f_c)`.
    pub fn theta_y_fov(&self) -> f64 {
        (self.a / self.focal_length).atan()
    }

    pub fn solid_angle(&self) -> f64 {
        fov_solid_angle(self.a, self.b, self.focal_length)
    }

    /// True when `a / f_c` or `b / f_c` exceeds [`SMALL_ANGLE_LIMIT`].
    pub fn outside_small_angle(&self) -> bool {
        self.a.max(self.b) / self.focal_length > SMALL_ANGLE_LIMIT
    }
}

/// Small-angle field of view `2ab / f_c^2` [sr].
pub fn fov_solid_angle(a: f64, b: f64, focal_length: f64) -> f64 {
    2.0 * a * b / (focal_length * focal_length)
}

/// The spherical-coordinate integral
/// `8 int_0^{atan(a/b)} [1 - cos(atan(b / (2 f_c cos phi)))] dphi`
/// from which the small-angle form is derived. Kept as a check only.
///
/// Its small-angle limit is `ab / f_c^2`, half of [`fov_solid_angle`].
pub fn fov_solid_angle_integral(a: f64, b: f64, focal_length: f64) -> Result<f64, QuadError> {
    if a == 0.0 || b == 0.0 {
        return Ok(0.0);
    }
    let f = |phi: f64| {
        let x = b / (2.0 * focal_length * phi.cos());
        // 1 - cos(atan x) = x^2 / (sqrt(1 + x^2) (1 + sqrt(1 + x^2))), cancellation free
        let s = (1.0 + x * x).sqrt();
        x * x / (s * (1.0 + s))
    };
    let r = integrate(f, 0.0, (a / b).atan(), Tolerance::new(0.0, 1e-12))?;
    Ok(8.0 * r.value)
}

/// Probability that the beam lands on one given quadrant:
/// `(1/2 - Q(theta_xFoV / sigma_x)) (1/2 - Q(theta_yFoV / sigma_y))`.
///
/// Each half-FoV is paired with the spread along the same axis, so the
/// result agrees with the capture rule used by the channel sampler.
pub fn capture_probability(geom: &DetectorGeometry, sigma_x: f64, sigma_y: f64) -> f64 {
    (0.5 - q_function(geom.theta_x_fov() / sigma_x)) * (0.5 - q_function(geom.theta_y_fov() / sigma_y))
}

/// `P_fbm = 1 - 4 P_D`.
pub fn fbm_probability(geom: &DetectorGeometry, sigma_x: f64, sigma_y: f64) -> f64 {
    1.0 - 4.0 * capture_probability(geom, sigma_x, sigma_y)
}

/// `P_b = 2ab N_b B_o A_a / f_c^2` [W].
pub fn background_power_geometric(
    a: f64,
    b: f64,
    focal_length: f64,
    spectral_radiance: f64,
    optical_bandwidth: f64,
    lens_area: f64,
) -> f64 {
    fov_solid_angle(a, b, focal_length) * spectral_radiance * optical_bandwidth * lens_area
}

//! System parameters, their validation, and the derived receiver constants.
//!
//! Every field is SI. Configuration files are TOML with one key per field;
//! a missing key keeps its default, an unknown key is an error. Focal
//! length, detector sides, hover spread, transmit power and the
//! geometric-background radiance have no canonical value; their defaults
//! are chosen ones, flagged in [`SystemParams::default`].

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

/// Speed of light, used only for the `nu ~ c / lambda` consistency check.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
}

fn invalid(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        reason: reason.into(),
    }
}

/// Where the background optical power comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BackgroundMode {
    /// A fixed power `P_b` [W], independent of detector size.
    Fixed { power: f64 },
    /// `P_b = 2ab N_b B_o A_a / f_c^2`, so it scales with detector area.
    Geometric {
        /// `N_b` [W / (m^2 sr m)]
        spectral_radiance: f64,
        /// `B_o` [m]
        optical_bandwidth: f64,
        /// `A_a` [m^2]
        lens_area: f64,
    },
}

/// Where the Rytov variance comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RytovMode {
    Fixed { rytov_variance: f64 },
    /// Hufnagel-Valley profile integrated along a slant path.
    SlantPath {
        link_length: f64,
        height_diff: f64,
        wind_speed: f64,
        cn2_ground: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    pub electron_charge: f64,
    pub apd_gain: f64,
    pub quantum_eff: f64,
    pub ionization_factor: f64,
    pub planck: f64,
    pub wavelength: f64,
    pub optical_freq: f64,
    pub boltzmann: f64,
    pub rx_temp: f64,
    pub load_res: f64,
    pub bit_time: f64,
    pub aperture_radius: f64,
    /// `w_L / r`
    pub beam_radius_ratio: f64,
    /// `sigma_j / r`
    pub jitter_ratio: f64,
    pub background: BackgroundMode,
    pub rytov: RytovMode,
    pub path_loss: f64,
    pub focal_length: f64,
    pub detector_a: f64,
    pub detector_b: f64,
    pub hover_std_x: f64,
    pub hover_std_y: f64,
    /// Optical power of a `1` symbol [W].
    pub tx_power: f64,
    pub window_len: u32,
}

/// Radiance that makes the geometric background equal the fixed 100 nW at
/// the default detector (1.5 mm sides, 5 cm focal length, 1 nm filter,
/// 5 cm lens radius).
pub const DEFAULT_SPECTRAL_RADIANCE: f64 = 7.074e6;
pub const DEFAULT_OPTICAL_BANDWIDTH: f64 = 1e-9;

impl Default for SystemParams {
    fn default() -> Self {
        let aperture_radius = 0.05;
        SystemParams {
            electron_charge: 1.602e-19,
            apd_gain: 100.0,
            quantum_eff: 0.9,
            ionization_factor: 0.028,
            planck: 6.6e-34,
            wavelength: 1550e-9,
            optical_freq: 1.93e14,
            boltzmann: 1.380_649e-23,
            rx_temp: 300.0,
            load_res: 1e3,
            bit_time: 1e-9,
            aperture_radius,
            beam_radius_ratio: 12.0,
            jitter_ratio: 2.0,
            background: BackgroundMode::Fixed { power: 100e-9 },
            rytov: RytovMode::Fixed { rytov_variance: 1.0 },
            path_loss: 1.0,
            // chosen defaults
            focal_length: 0.05,
            detector_a: 1.5e-3,
            detector_b: 1.5e-3,
            hover_std_x: 4e-3,
            hover_std_y: 4e-3,
            tx_power: 1e-5,
            window_len: 10,
        }
    }
}

impl SystemParams {
    /// Lens area `pi r^2` of the default aperture, the geometric-mode default for `A_a`.
    pub fn default_lens_area(&self) -> f64 {
        std::f64::consts::PI * self.aperture_radius * self.aperture_radius
    }

    /// Switches to geometric background with the default radiance and filter.
    pub fn with_geometric_background(mut self) -> Self {
        self.background = BackgroundMode::Geometric {
            spectral_radiance: DEFAULT_SPECTRAL_RADIANCE,
            optical_bandwidth: DEFAULT_OPTICAL_BANDWIDTH,
            lens_area: self.default_lens_area(),
        };
        self
    }

    /// Background power at the receiver for the current detector.
    pub fn background_power(&self) -> f64 {
        match self.background {
            BackgroundMode::Fixed { power } => power,
            BackgroundMode::Geometric {
                spectral_radiance,
                optical_bandwidth,
                lens_area,
            } => crate::geometry::background_power_geometric(
                self.detector_a,
                self.detector_b,
                self.focal_length,
                spectral_radiance,
                optical_bandwidth,
                lens_area,
            ),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive: [(&'static str, f64); 20] = [
            ("electron_charge", self.electron_charge),
            ("apd_gain", self.apd_gain),
            ("quantum_eff", self.quantum_eff),
            ("ionization_factor", self.ionization_factor),
            ("planck", self.planck),
            ("wavelength", self.wavelength),
            ("optical_freq", self.optical_freq),
            ("boltzmann", self.boltzmann),
            ("rx_temp", self.rx_temp),
            ("load_res", self.load_res),
            ("bit_time", self.bit_time),
            ("aperture_radius", self.aperture_radius),
            ("beam_radius_ratio", self.beam_radius_ratio),
            ("jitter_ratio", self.jitter_ratio),
            ("path_loss", self.path_loss),
            ("focal_length", self.focal_length),
            ("detector_a", self.detector_a),
            ("detector_b", self.detector_b),
            ("hover_std_x", self.hover_std_x),
            ("hover_std_y", self.hover_std_y),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(key, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.tx_power.is_finite() && self.tx_power > 0.0) {
            return Err(invalid("tx_power", format!("must be finite and > 0, got {}", self.tx_power)));
        }
        if self.quantum_eff > 1.0 {
            return Err(invalid("quantum_eff", format!("must be <= 1, got {}", self.quantum_eff)));
        }
        if self.ionization_factor >= 1.0 {
            return Err(invalid("ionization_factor", format!("must be < 1, got {}", self.ionization_factor)));
        }
        if self.path_loss > 1.0 {
            return Err(invalid("path_loss", format!("must be <= 1, got {}", self.path_loss)));
        }
        if self.window_len < 1 {
            return Err(invalid("window_len", "must be >= 1"));
        }
        let nu_expected = SPEED_OF_LIGHT / self.wavelength;
        let mismatch = (self.optical_freq - nu_expected).abs() / nu_expected;
        if mismatch > 0.01 {
            return Err(invalid(
                "optical_freq",
                format!(
                    "differs from c / wavelength = {nu_expected:.4e} Hz by {:.2}% (limit 1%)",
                    mismatch * 100.0
                ),
            ));
        }
        match self.background {
            BackgroundMode::Fixed { power } => {
                if !(power.is_finite() && power > 0.0) {
                    return Err(invalid("background_power", format!("must be > 0, got {power}")));
                }
            }
            BackgroundMode::Geometric {
                spectral_radiance,
                optical_bandwidth,
                lens_area,
            } => {
                for (key, v) in [
                    ("spectral_radiance", spectral_radiance),
                    ("optical_bandwidth", optical_bandwidth),
                    ("lens_area", lens_area),
                ] {
                    if !(v.is_finite() && v > 0.0) {
                        return Err(invalid(key, format!("must be finite and > 0, got {v}")));
                    }
                }
            }
        }
        match self.rytov {
            RytovMode::Fixed { rytov_variance } => {
                if !(rytov_variance.is_finite() && rytov_variance > 0.0) {
                    return Err(invalid("rytov_variance", format!("must be > 0, got {rytov_variance}")));
                }
            }
            RytovMode::SlantPath {
                link_length,
                height_diff,
                wind_speed,
                cn2_ground,
            } => {
                for (key, v) in [
                    ("link_length", link_length),
                    ("height_diff", height_diff),
                    ("wind_speed", wind_speed),
                    ("cn2_ground", cn2_ground),
                ] {
                    if !(v.is_finite() && v > 0.0) {
                        return Err(invalid(key, format!("must be finite and > 0, got {v}")));
                    }
                }
                if height_diff > link_length {
                    return Err(invalid("height_diff", "cannot exceed link_length"));
                }
            }
        }
        Ok(())
    }
}

/// Receiver constants that every other module draws on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    /// `mu = e G eta / (h_p nu)` [A/W]
    pub mu: f64,
    /// `B = 1 / T_b` [Hz]
    pub bandwidth: f64,
    /// APD excess noise factor
    pub excess_noise: f64,
    /// thermal noise variance [A^2]
    pub sigma_th2: f64,
    /// background shot-noise variance [A^2]
    pub sigma_b2: f64,
    /// `sigma_0^2 = sigma_b^2 + sigma_th^2` [A^2]
    pub sigma_02: f64,
    /// signal shot-noise coefficient; slot variance is `sigma_s^2 h s + sigma_0^2` [A^2]
    pub sigma_s2: f64,
    /// `mu P_t`: photocurrent of a `1` symbol through a unit channel [A]
    pub signal_current: f64,
    /// background power actually used [W]
    pub background_power: f64,
}

/// Computes μ, B, F and the noise variances for validated parameters.
pub fn derive_constants(p: &SystemParams) -> Result<DerivedConstants, ConfigError> {
    p.validate()?;
    let e = p.electron_charge;
    let g = p.apd_gain;
    let mu = e * g * p.quantum_eff / (p.planck * p.optical_freq);
    let bandwidth = 1.0 / p.bit_time;
    let k = p.ionization_factor;
    let excess_noise = k * g + (2.0 - 1.0 / g) * (1.0 - k);
    let sigma_th2 = 4.0 * p.boltzmann * p.rx_temp * bandwidth / p.load_res;
    let shot = 2.0 * e * g * excess_noise * mu * bandwidth;
    let background_power = p.background_power();
    let sigma_b2 = shot * background_power;
    Ok(DerivedConstants {
        mu,
        bandwidth,
        excess_noise,
        sigma_th2,
        sigma_b2,
        sigma_02: sigma_b2 + sigma_th2,
        sigma_s2: shot * p.tx_power,
        signal_current: mu * p.tx_power,
        background_power,
    })
}

/// On-disk key set. Each key mirrors a [`SystemParams`] field; the two mode
/// switches are `background_mode = "fixed" | "geometric"` and
/// `rytov_mode = "fixed" | "slant"`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    electron_charge: Option<f64>,
    apd_gain: Option<f64>,
    quantum_eff: Option<f64>,
    ionization_factor: Option<f64>,
    planck: Option<f64>,
    wavelength: Option<f64>,
    optical_freq: Option<f64>,
    boltzmann: Option<f64>,
    rx_temp: Option<f64>,
    load_res: Option<f64>,
    bit_time: Option<f64>,
    aperture_radius: Option<f64>,
    beam_radius_ratio: Option<f64>,
    jitter_ratio: Option<f64>,
    background_mode: Option<String>,
    background_power: Option<f64>,
    spectral_radiance: Option<f64>,
    optical_bandwidth: Option<f64>,
    lens_area: Option<f64>,
    rytov_mode: Option<String>,
    rytov_variance: Option<f64>,
    link_length: Option<f64>,
    height_diff: Option<f64>,
    wind_speed: Option<f64>,
    cn2_ground: Option<f64>,
    path_loss: Option<f64>,
    focal_length: Option<f64>,
    detector_a: Option<f64>,
    detector_b: Option<f64>,
    hover_std_x: Option<f64>,
    hover_std_y: Option<f64>,
    tx_power: Option<f64>,
    window_len: Option<i64>,
}

/// Slant-path defaults, used only when `rytov_mode = "slant"`.
pub const DEFAULT_LINK_LENGTH: f64 = 1000.0;
pub const DEFAULT_HEIGHT_DIFF: f64 = 100.0;
pub const DEFAULT_WIND_SPEED: f64 = 21.0;
pub const DEFAULT_CN2_GROUND: f64 = 1.7e-14;

/// Parses a TOML document into validated parameters.
pub fn parse_config(text: &str) -> Result<SystemParams, ConfigError> {
    let f: ConfigFile = toml::from_str(text)?;
    let mut p = SystemParams::default();
    macro_rules! take {
        ($($field:ident),*) => { $( if let Some(v) = f.$field { p.$field = v; } )* };
    }
    take!(
        electron_charge, apd_gain, quantum_eff, ionization_factor, planck, wavelength, optical_freq,
        boltzmann, rx_temp, load_res, bit_time, aperture_radius, beam_radius_ratio, jitter_ratio,
        path_loss, focal_length, detector_a, detector_b, hover_std_x, hover_std_y, tx_power
    );
    if let Some(l) = f.window_len {
        if l < 1 || l > u32::MAX as i64 {
            return Err(invalid("window_len", format!("must be a positive integer, got {l}")));
        }
        p.window_len = l as u32;
    }
    p.background = match f.background_mode.as_deref().unwrap_or("fixed") {
        "fixed" => BackgroundMode::Fixed {
            power: f.background_power.unwrap_or(100e-9),
        },
        "geometric" => BackgroundMode::Geometric {
            spectral_radiance: f.spectral_radiance.unwrap_or(DEFAULT_SPECTRAL_RADIANCE),
            optical_bandwidth: f.optical_bandwidth.unwrap_or(DEFAULT_OPTICAL_BANDWIDTH),
            lens_area: f.lens_area.unwrap_or_else(|| p.default_lens_area()),
        },
        other => return Err(invalid("background_mode", format!("expected \"fixed\" or \"geometric\", got \"{other}\""))),
    };
    p.rytov = match f.rytov_mode.as_deref().unwrap_or("fixed") {
        "fixed" => RytovMode::Fixed {
            rytov_variance: f.rytov_variance.unwrap_or(1.0),
        },
        "slant" => RytovMode::SlantPath {
            link_length: f.link_length.unwrap_or(DEFAULT_LINK_LENGTH),
            height_diff: f.height_diff.unwrap_or(DEFAULT_HEIGHT_DIFF),
            wind_speed: f.wind_speed.unwrap_or(DEFAULT_WIND_SPEED),
            cn2_ground: f.cn2_ground.unwrap_or(DEFAULT_CN2_GROUND),
        },
        other => return Err(invalid("rytov_mode", format!("expected \"fixed\" or \"slant\", got \"{other}\""))),
    };
    p.validate()?;
    Ok(p)
}

/// Reads and validates a TOML config file.
pub fn load_config(path: &Path) -> Result<SystemParams, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

/// `10 log10(P / 1 mW)`
pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w / 1e-3).log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        ((a - b) / b).abs() < rel
    }

    #[test]
    fn responsivity_gain_product() {
        let d = derive_constants(&SystemParams::default()).unwrap();
        // 1.602e-19 * 100 * 0.9 / (6.6e-34 * 1.93e14)
        let oracle = 1.602e-19 * 100.0 * 0.9 / (6.6e-34 * 1.93e14);
        assert_eq!(d.mu, oracle);
        assert!(close(d.mu, 113.19, 1e-4));
        assert!(close(d.bandwidth, 1e9, 1e-15));
    }

    #[test]
    fn excess_noise_mcintyre() {
        let d = derive_constants(&SystemParams::default()).unwrap();
        // 0.028*100 + (2 - 0.01)*0.972 = 2.8 + 1.93428
        assert!((d.excess_noise - 4.734_28).abs() < 1e-12);
    }

    #[test]
    fn noise_variances() {
        let d = derive_constants(&SystemParams::default()).unwrap();
        assert!(close(d.sigma_th2, 4.0 * 1.380_649e-23 * 300.0 * 1e9 / 1e3, 1e-14));
        assert!(close(d.sigma_b2, 1.717e-12, 1e-3));
        assert_eq!(d.sigma_02, d.sigma_b2 + d.sigma_th2);
        // sigma_s^2 / sigma_b^2 = P_t / P_b
        assert!(close(d.sigma_s2 / d.sigma_b2, 1e-5 / 100e-9, 1e-12));
    }

    #[test]
    fn geometric_background_matches_fixed_at_default_detector() {
        let p = SystemParams::default().with_geometric_background();
        assert!(close(p.background_power(), 100e-9, 1e-3));
    }

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(parse_config("").unwrap(), SystemParams::default());
    }

    #[test]
    fn override_semantics() {
        let p = parse_config("window_len = 20").unwrap();
        assert_eq!(p.window_len, 20);
        assert_eq!(SystemParams { window_len: 10, ..p }, SystemParams::default());
    }

    #[test]
    fn validation_names_the_key() {
        match parse_config("apd_gain = -1").unwrap_err() {
            ConfigError::Invalid { key, .. } => assert_eq!(key, "apd_gain"),
            e => panic!("unexpected {e}"),
        }
        match parse_config("quantum_eff = 1.2").unwrap_err() {
            ConfigError::Invalid { key, .. } => assert_eq!(key, "quantum_eff"),
            e => panic!("unexpected {e}"),
        }
        match parse_config("optical_freq = 2.0e14").unwrap_err() {
            ConfigError::Invalid { key, .. } => assert_eq!(key, "optical_freq"),
            e => panic!("unexpected {e}"),
        }
        match parse_config("window_len = 0").unwrap_err() {
            ConfigError::Invalid { key, .. } => assert_eq!(key, "window_len"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(parse_config("apd_gian = 50").unwrap_err(), ConfigError::Parse(_)));
    }

    #[test]
    fn mode_switches() {
        let p = parse_config("background_mode = \"geometric\"\nrytov_mode = \"slant\"").unwrap();
        assert!(matches!(p.background, BackgroundMode::Geometric { .. }));
        assert!(matches!(p.rytov, RytovMode::SlantPath { .. }));
        assert!(matches!(
            parse_config("background_mode = \"solar\"").unwrap_err(),
            ConfigError::Invalid { key: "background_mode", .. }
        ));
    }

    #[test]
    fn dbm_roundtrip() {
        assert!((dbm_to_watts(-20.0) - 1e-5).abs() < 1e-20);
        assert!((watts_to_dbm(1e-3)).abs() < 1e-12);
    }
}

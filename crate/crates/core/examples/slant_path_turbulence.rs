//! Rytov variance from the Hufnagel-Valley profile along a slant path, and
//! the Gamma-Gamma shapes it implies.

use uavfso::channel::{cn2_profile, gamma_gamma_params, rytov_slant, scintillation_index};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let wavelength = 1550e-9;
    for (height, length) in [(50.0, 500.0), (100.0, 1000.0), (300.0, 2000.0)] {
        let rytov = rytov_slant(wavelength, length, height, |x| cn2_profile(x, 21.0, 1.7e-14).unwrap_or(0.0))?;
        let (a, b) = gamma_gamma_params(rytov);
        println!(
            "x_r = {height:>5} m, L = {length:>6} m: rytov {rytov:.4}, alpha {a:.3}, beta {b:.3}, SI {:.4}",
            scintillation_index(a, b)
        );
    }
    Ok(())
}

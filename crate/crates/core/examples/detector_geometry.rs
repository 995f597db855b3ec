//! Field of view, capture and misalignment probabilities and background
//! power as the detector side grows.

use uavfso::geometry::{background_power_geometric, capture_probability, fbm_probability, DetectorGeometry};

fn main() {
    let f = 0.05;
    let sigma = 4e-3;
    let lens = std::f64::consts::PI * 0.05f64.powi(2);
    println!("{:>8} {:>10} {:>10} {:>10} {:>12}", "a [mm]", "FoV [mrad]", "P_D", "P_fbm", "P_b [W]");
    for a_mm in [0.1, 0.2, 0.5, 1.0, 1.5, 2.0, 5.0] {
        let a = a_mm * 1e-3;
        let g = DetectorGeometry::new(a, a, f);
        println!(
            "{a_mm:>8} {:>10.3} {:>10.5} {:>10.3e} {:>12.3e}",
            g.theta_x_fov() * 1e3,
            capture_probability(&g, sigma, sigma),
            fbm_probability(&g, sigma, sigma),
            background_power_geometric(a, a, f, 7.074e6, 1e-9, lens)
        );
    }
}

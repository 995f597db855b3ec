//! Draws channel blocks and compares sample statistics with theory.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uavfso::channel::{sample_channel, Capture, ChannelSampler};
use uavfso::config::SystemParams;
use uavfso::geometry::{fbm_probability, DetectorGeometry};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // hover spread at half the field of view makes misalignment visible
    let g = DetectorGeometry::from_params(&SystemParams::default());
    let s = g.theta_x_fov() / 2.0;
    let p = SystemParams { hover_std_x: s, hover_std_y: s, ..SystemParams::default() };
    let sampler = ChannelSampler::new(&p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 200_000;
    let (mut sum, mut sq, mut fbm) = (0.0, 0.0, 0usize);
    let mut quadrants = [0usize; 4];
    for _ in 0..n {
        let d = sample_channel(&mut rng, &sampler);
        sum += d.h_atm;
        sq += d.h_atm * d.h_atm;
        match d.capture {
            Capture::Quadrant(q) => quadrants[q as usize - 1] += 1,
            Capture::Misaligned => fbm += 1,
        }
    }
    let m = sum / n as f64;
    println!("E[h_atm] = {m:.4} (theory 1)");
    println!(
        "scintillation index = {:.4} (theory {:.4})",
        sq / n as f64 / (m * m) - 1.0,
        sampler.turbulence.scintillation_index()
    );
    println!(
        "misaligned fraction = {:.4} (theory {:.4}); quadrant counts {quadrants:?}",
        fbm as f64 / n as f64,
        fbm_probability(&g, s, s)
    );
    Ok(())
}

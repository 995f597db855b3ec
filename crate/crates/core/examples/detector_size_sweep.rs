//! Optimal detector size: small detectors lose the beam, large ones collect
//! background. Two decades of `a / f_c` for three hover spreads.

use uavfso::config::SystemParams;
use uavfso::experiments::{sweep_detector_size, SweepSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SweepSpec::detector(0.003, 0.3, 13);
    for sigma in [3e-3, 5e-3, 7e-3] {
        let p = SystemParams { hover_std_x: sigma, hover_std_y: sigma, ..SystemParams::default() }
            .with_geometric_background();
        let r = sweep_detector_size(&spec, &p)?;
        println!("sigma = {} mrad", sigma * 1e3);
        print!("{r}");
    }
    Ok(())
}

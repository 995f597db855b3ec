//! Shortest observation window meeting a blind BER target at 10 dBm.

use uavfso::analysis::Formulation;
use uavfso::config::{dbm_to_watts, SystemParams};
use uavfso::experiments::choose_window_length;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = SystemParams { tx_power: dbm_to_watts(10.0), ..SystemParams::default() };
    for target in [1e-3, 1e-4, 1e-5] {
        match choose_window_length(target, 30, &p, Formulation::Exact) {
            Ok(r) => println!("target {target:e}: L_s = {} (BER {:.3e})", r.argmin, r.objective_value),
            Err(e) => println!("target {target:e}: {e}"),
        }
    }
    // too short a delay budget
    if let Err(e) = choose_window_length(1e-3, 5, &p, Formulation::Exact) {
        println!("cap 5: {e}");
    }
    Ok(())
}

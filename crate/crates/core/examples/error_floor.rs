//! The blind receiver's tracking floor at high power: the all-zero window
//! leaves it guessing.

use uavfso::analysis::{evaluate, floor_blind, floor_blind_exact, Formulation, Kind};
use uavfso::config::{dbm_to_watts, SystemParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for l in [5u32, 10, 20] {
        let p = SystemParams { tx_power: dbm_to_watts(40.0), window_len: l, ..SystemParams::default() };
        let exact = evaluate(&p, Kind::TerBlind, Formulation::Exact)?.value;
        let printed = evaluate(&p, Kind::TerBlind, Formulation::Printed)?.value;
        println!(
            "L_s={l:>2}: exact {exact:.4e} (3/2^(L+2) = {:.4e})   printed {printed:.4e} (7/2^(L+3) = {:.4e})",
            floor_blind_exact(l, 0.0),
            floor_blind(l, 0.0)
        );
    }
    Ok(())
}

//! Monte-Carlo against the closed forms at one power, with z-scores.

use uavfso::analysis::{evaluate, Formulation, Kind};
use uavfso::config::{dbm_to_watts, SystemParams};
use uavfso::link_sim::{run_monte_carlo, McSettings, Mode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = SystemParams { tx_power: dbm_to_watts(-17.0), ..SystemParams::default() };
    let n = 300_000;
    for (mode, ter_kind, ber_kind) in [(Mode::KnownCsi, Kind::TerKnown, Kind::BerKnown), (Mode::Blind, Kind::TerBlind, Kind::BerBlind)] {
        let t = run_monte_carlo(&p, &McSettings { n_windows: n, mode, seed: 2, workers: 0 })?;
        let ter = evaluate(&p, ter_kind, Formulation::Exact)?.value;
        let ber = evaluate(&p, ber_kind, Formulation::Exact)?.value;
        let z_ter = (t.ter() - ter) / (ter * (1.0 - ter) / n as f64).sqrt();
        let z_ber = (t.ber() - ber) / t.ber_std_error();
        println!("{mode:>9}: TER mc {:.4e} vs {ter:.4e} (z {z_ter:+.2}), BER mc {:.4e} vs {ber:.4e} (z {z_ber:+.2})", t.ter(), t.ber());
    }
    Ok(())
}

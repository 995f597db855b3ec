//! Monte-Carlo tracking and bit error rates at one power:
//! `cargo run --release --example monte_carlo -- [P_t dBm] [windows]`

use uavfso::config::{dbm_to_watts, SystemParams};
use uavfso::link_sim::{run_monte_carlo, McSettings, Mode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dbm: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(-20.0);
    let n: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(200_000);
    let p = SystemParams { tx_power: dbm_to_watts(dbm), ..SystemParams::default() };
    for mode in [Mode::KnownCsi, Mode::Blind] {
        let t = run_monte_carlo(&p, &McSettings { n_windows: n, mode, seed: 11, workers: 0 })?;
        println!(
            "{mode:>9}: TER {:.4e} ± {:.1e}   BER {:.4e} ± {:.1e}",
            t.ter(),
            t.ter_ci(),
            t.ber(),
            t.ber_ci()
        );
    }
    Ok(())
}

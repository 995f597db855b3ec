//! Receiver noise budget for the default link, or for a config file:
//! `cargo run --example noise_budget -- [config.toml]`

use uavfso::config::{derive_constants, load_config, watts_to_dbm, SystemParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = match std::env::args().nth(1) {
        Some(path) => load_config(path.as_ref())?,
        None => SystemParams::default(),
    };
    let d = derive_constants(&p)?;
    println!("transmit power      {:.2} dBm", watts_to_dbm(p.tx_power));
    println!("responsivity mu     {:.4} A/W", d.mu);
    println!("bandwidth B         {:.3e} Hz", d.bandwidth);
    println!("excess noise F      {:.4}", d.excess_noise);
    println!("thermal variance    {:.4e} A^2", d.sigma_th2);
    println!("background variance {:.4e} A^2  (P_b = {:.3e} W)", d.sigma_b2, d.background_power);
    println!("sigma_0^2           {:.4e} A^2", d.sigma_02);
    println!("shot coefficient    {:.4e} A^2", d.sigma_s2);
    println!("one-symbol current  {:.4e} A", d.signal_current);
    Ok(())
}

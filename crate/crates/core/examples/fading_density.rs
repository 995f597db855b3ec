//! Composite fading density `f_h` from both evaluators, side by side, plus
//! a CSV of the density: `cargo run --example fading_density -- [out.csv]`

use uavfso::channel::{cdf_h, pdf_h, pdf_h_integral, pdf_h_series, write_pdf_csv, TurbulenceDerived};
use uavfso::config::SystemParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = SystemParams::default();
    let td = TurbulenceDerived::from_params(&p)?;
    println!(
        "alpha={:.4} beta={:.4} gamma={:.4} A0={:.5} scintillation index={:.4}",
        td.alpha,
        td.beta,
        td.gamma,
        td.a0,
        td.scintillation_index()
    );
    println!("{:>12} {:>14} {:>14} {:>10} {:>10}", "h/A0", "series", "integral", "rel diff", "cdf");
    for e in -6..=1 {
        let h = 10f64.powi(e) * td.a0 * p.path_loss;
        let s = pdf_h_series(h, &td, p.path_loss)?;
        let i = pdf_h_integral(h, &td, p.path_loss)?;
        let c = cdf_h(h, &td, p.path_loss)?;
        println!("{:>12.0e} {s:>14.6e} {i:>14.6e} {:>10.1e} {c:>10.4}", 10f64.powi(e), (s - i).abs() / i);
    }
    if let Some(out) = std::env::args().nth(1) {
        let rows = (0..=200)
            .map(|k| {
                let h = 10f64.powf(-4.0 + 5.0 * k as f64 / 200.0) * td.a0;
                Ok((h, pdf_h(h, &td, p.path_loss)?))
            })
            .collect::<Result<Vec<_>, uavfso::channel::ChannelError>>()?;
        write_pdf_csv(std::fs::File::create(&out)?, &rows)?;
        println!("wrote {out}");
    }
    Ok(())
}

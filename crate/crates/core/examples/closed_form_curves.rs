//! Tracking and bit error probability against transmit power, exact and
//! printed forms side by side; optionally writes the exact curves as CSV.

use uavfso::analysis::{sweep_curve, write_curve_csv, Formulation, Kind, QuadratureSettings};
use uavfso::config::SystemParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid: Vec<f64> = (0..=6).map(|i| -30.0 + 5.0 * i as f64).collect();
    let kinds = [Kind::TerKnown, Kind::TerBlind, Kind::BerKnown];
    let p = SystemParams::default();
    let exact = sweep_curve(&p, &grid, &kinds, Formulation::Exact, QuadratureSettings::default());
    let printed = sweep_curve(&p, &grid, &kinds, Formulation::Printed, QuadratureSettings::default());
    println!("{:>6} {:>10} {:>12} {:>12}", "dBm", "kind", "exact", "printed");
    for (i, (e, q)) in exact.iter().zip(&printed).enumerate() {
        let (e, q) = (e.as_ref().map_err(|f| f.error.to_string())?, q.as_ref().map_err(|f| f.error.to_string())?);
        println!("{:>6} {:>10} {:>12.4e} {:>12.4e}", grid[i / kinds.len()], e.kind, e.value, q.value);
    }
    if let Some(out) = std::env::args().nth(1) {
        write_curve_csv(std::fs::File::create(&out)?, &exact)?;
    }
    Ok(())
}

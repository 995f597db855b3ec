//! Blind tracking error against power for several hover spreads.

use uavfso::config::SystemParams;
use uavfso::experiments::{hover_summary, sweep_hover_std, SweepSpec, Variable};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut spec = SweepSpec::detector(1.0, 1.0, 1);
    spec.variable = Variable::HoverStd;
    spec.pairs = vec![[6e-3, 6e-3], [10e-3, 10e-3], [14e-3, 10e-3]];
    spec.pt_grid_dbm = vec![-25.0, -20.0, -15.0, -10.0];
    let curves = sweep_hover_std(&spec, &SystemParams::default())?;
    for c in &curves {
        let row: Vec<String> = c.points.iter().map(|p| format!("{:.3e}", p.value)).collect();
        println!("sigma = ({:.1e}, {:.1e}): {}", c.sigma_x, c.sigma_y, row.join(" "));
    }
    print!("{}", hover_summary(&curves));
    Ok(())
}

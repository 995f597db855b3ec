//! One-dimensional design sweeps over the closed-form analysis: detector
//! size, observation window, hover spread and transmit power.
//!
//! Sweeps are described by a small TOML file:
//!
//! ```toml
//! variable = "detector_side"      # detector_side | window_len | hover_std | tx_power
//! objective = "ter_blind"         # ter_blind | ber_blind | ber_known
//! log_grid = { start = 0.003, stop = 0.3, points = 21 }   # or grid = [...]
//! spot_check_windows = 0          # Monte-Carlo windows per spot check, 0 = off
//!
//! [fixed]                         # config overrides, same keys as the config file
//! background_mode = "geometric"
//! ```
//!
//! Grid units: `a / f_c` for `detector_side` (with `a = b`), radians for
//! `hover_std` (`sigma_x = sigma_y`), dBm for `tx_power`, slots for
//! `window_len`. A `window_len` sweep needs `target_ber` and `delay_cap`; a
//! `hover_std` sweep takes `pairs = [[sx, sy], ...]` and `pt_grid_dbm`.

use std::fmt;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

use crate::analysis::{evaluate, sweep_curve, AnalysisError, CurvePoint, Formulation, Kind, QuadratureSettings};
use crate::config::{dbm_to_watts, parse_config, BackgroundMode, ConfigError, SystemParams};
use crate::geometry::{fbm_probability, DetectorGeometry};
use crate::link_sim::{fmt_dbm, run_monte_carlo, McSettings, Mode, SimError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("sweep spec parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid sweep spec: {0}")]
    Spec(String),
    #[error("detector-size sweep needs background_mode = \"geometric\"; with a fixed background power the detector size has no cost")]
    FixedBackground,
    #[error("infeasible: {0}")]
    Infeasible(String),
}

impl ExperimentError {
    /// Whether the error lies in the request rather than in the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            ExperimentError::Config(_)
                | ExperimentError::Parse(_)
                | ExperimentError::Spec(_)
                | ExperimentError::FixedBackground
                | ExperimentError::Analysis(AnalysisError::Config(_))
        )
    }
}

fn spec_err(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Spec(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    DetectorSide,
    WindowLen,
    HoverStd,
    TxPower,
}

impl Variable {
    /// Column name of the swept quantity, units included.
    pub fn column(self) -> &'static str {
        match self {
            Variable::DetectorSide => "a_over_fc",
            Variable::WindowLen => "L_s",
            Variable::HoverStd => "sigma_rad",
            Variable::TxPower => "P_t_dBm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    #[default]
    TerBlind,
    BerBlind,
    BerKnown,
}

impl Objective {
    pub fn kind(self) -> Kind {
        match self {
            Objective::TerBlind => Kind::TerBlind,
            Objective::BerBlind => Kind::BerBlind,
            Objective::BerKnown => Kind::BerKnown,
        }
    }

    fn mode(self) -> Mode {
        match self {
            Objective::BerKnown => Mode::KnownCsi,
            _ => Mode::Blind,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogGrid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl LogGrid {
    pub fn values(&self) -> Vec<f64> {
        let (a, b) = (self.start.ln(), self.stop.ln());
        match self.points {
            0 => Vec::new(),
            1 => vec![self.start],
            n => (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: Variable,
    #[serde(default)]
    pub grid: Vec<f64>,
    pub log_grid: Option<LogGrid>,
    #[serde(default)]
    pub objective: Objective,
    #[serde(default)]
    pub formulation: Formulation,
    pub target_ber: Option<f64>,
    pub delay_cap: Option<u32>,
    #[serde(default)]
    pub pairs: Vec<[f64; 2]>,
    #[serde(default)]
    pub pt_grid_dbm: Vec<f64>,
    #[serde(default)]
    pub spot_check_windows: u64,
    /// Config keys overriding the base configuration.
    #[serde(default)]
    pub fixed: toml::Table,
}

impl SweepSpec {
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        Ok(toml::from_str(text)?)
    }

    /// A Fig.-7-style detector sweep: two decades of `a / f_c`.
    pub fn detector(start: f64, stop: f64, points: usize) -> Self {
        SweepSpec {
            variable: Variable::DetectorSide,
            grid: Vec::new(),
            log_grid: Some(LogGrid { start, stop, points }),
            objective: Objective::TerBlind,
            formulation: Formulation::Exact,
            target_ber: None,
            delay_cap: None,
            pairs: Vec::new(),
            pt_grid_dbm: Vec::new(),
            spot_check_windows: 0,
            fixed: toml::Table::new(),
        }
    }

    /// Grid values: the explicit list, else the log grid; strictly increasing.
    pub fn grid_values(&self) -> Result<Vec<f64>, ExperimentError> {
        let g = match (&self.log_grid, self.grid.is_empty()) {
            (Some(_), false) => return Err(spec_err("give either `grid` or `log_grid`, not both")),
            (Some(l), true) => {
                if !(l.start > 0.0 && l.stop > 0.0) {
                    return Err(spec_err("log_grid bounds must be > 0"));
                }
                l.values()
            }
            (None, _) => self.grid.clone(),
        };
        if g.is_empty() {
            return Err(spec_err("grid is empty"));
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(spec_err("grid values must be finite"));
        }
        if g.windows(2).any(|w| w[1] <= w[0]) {
            return Err(spec_err("grid must be strictly increasing"));
        }
        Ok(g)
    }

    /// Applies `[fixed]` on top of a base config document.
    pub fn params_from(&self, base_config: &str) -> Result<SystemParams, ExperimentError> {
        let mut table: toml::Table = toml::from_str(base_config)?;
        for (k, v) in &self.fixed {
            table.insert(k.clone(), v.clone());
        }
        Ok(parse_config(&toml::to_string(&table).map_err(|e| spec_err(e.to_string()))?)?)
    }
}

/// Monte-Carlo check of one grid value against its closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpotCheck {
    pub x: f64,
    pub analytic: f64,
    pub simulated: f64,
    /// one standard error of `simulated`
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimumReport {
    pub variable: Variable,
    pub objective: Kind,
    pub argmin: f64,
    pub objective_value: f64,
    /// `(x, objective)` in grid order
    pub curve: Vec<(f64, f64)>,
    /// false when the minimum sits on a grid end
    pub interior_minimum: bool,
    pub spot_checks: Vec<SpotCheck>,
    pub notes: Vec<String>,
}

impl OptimumReport {
    fn from_curve(variable: Variable, objective: Kind, curve: Vec<(f64, f64)>) -> Self {
        let mut best = 0;
        for (i, c) in curve.iter().enumerate() {
            if c.1 < curve[best].1 {
                best = i;
            }
        }
        OptimumReport {
            variable,
            objective,
            argmin: curve[best].0,
            objective_value: curve[best].1,
            interior_minimum: best > 0 && best + 1 < curve.len(),
            curve,
            spot_checks: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn argmin_index(&self) -> usize {
        self.curve.iter().position(|c| c.0 == self.argmin).unwrap_or(0)
    }
}

/// Parameters with the swept variable set to `x`.
fn apply(variable: Variable, p: &SystemParams, x: f64) -> SystemParams {
    let mut q = p.clone();
    match variable {
        Variable::DetectorSide => {
            q.detector_a = x * p.focal_length;
            q.detector_b = q.detector_a;
        }
        Variable::WindowLen => q.window_len = x as u32,
        Variable::HoverStd => {
            q.hover_std_x = x;
            q.hover_std_y = x;
        }
        Variable::TxPower => q.tx_power = dbm_to_watts(x),
    }
    q
}

fn evaluate_grid(
    variable: Variable,
    grid: &[f64],
    objective: Kind,
    formulation: Formulation,
    p: &SystemParams,
) -> Result<Vec<(f64, f64)>, ExperimentError> {
    let values: Vec<Result<f64, AnalysisError>> = grid
        .par_iter()
        .map(|&x| {
            let q = apply(variable, p, x);
            q.validate()?;
            evaluate(&q, objective, formulation).map(|c| c.value)
        })
        .collect();
    grid.iter()
        .zip(values)
        .map(|(&x, v)| Ok((x, v?)))
        .collect()
}

/// Objective against `a / f_c` with `a = b`: the field of view, capture and
/// misalignment probabilities and the background all follow the detector.
pub fn sweep_detector_size(spec: &SweepSpec, p: &SystemParams) -> Result<OptimumReport, ExperimentError> {
    if matches!(p.background, BackgroundMode::Fixed { .. }) {
        return Err(ExperimentError::FixedBackground);
    }
    let grid = spec.grid_values()?;
    if grid[0] <= 0.0 {
        return Err(spec_err("detector ratios must be > 0"));
    }
    let kind = spec.objective.kind();
    let curve = evaluate_grid(Variable::DetectorSide, &grid, kind, spec.formulation, p)?;
    let mut report = OptimumReport::from_curve(Variable::DetectorSide, kind, curve);
    if let Some(&last) = grid.last() {
        let g = DetectorGeometry::new(last * p.focal_length, last * p.focal_length, p.focal_length);
        if g.outside_small_angle() {
            report
                .notes
                .push(format!("grid reaches a/f_c = {last:.4}, beyond the small-angle field-of-view range"));
        }
    }
    Ok(report)
}

/// Objective against transmit power [dBm].
pub fn sweep_tx_power(spec: &SweepSpec, p: &SystemParams) -> Result<OptimumReport, ExperimentError> {
    let grid = spec.grid_values()?;
    let kind = spec.objective.kind();
    let curve = evaluate_grid(Variable::TxPower, &grid, kind, spec.formulation, p)?;
    Ok(OptimumReport::from_curve(Variable::TxPower, kind, curve))
}

/// Smallest observation window whose blind BER at the configured power
/// meets `target_ber`, searching upward from the shortest window for which
/// an all-zero sequence (probability `2^-L_s`) is rarer than the target.
pub fn choose_window_length(
    target_ber: f64,
    delay_cap: u32,
    p: &SystemParams,
    formulation: Formulation,
) -> Result<OptimumReport, ExperimentError> {
    if !(target_ber > 0.0 && target_ber < 1.0) {
        return Err(spec_err(format!("target_ber must lie in (0, 1), got {target_ber}")));
    }
    if delay_cap < 1 {
        return Err(spec_err("delay_cap must be >= 1"));
    }
    let mut l_min = 1u32;
    while 2f64.powi(-(l_min as i32)) >= target_ber {
        l_min += 1;
    }
    if l_min > delay_cap {
        return Err(ExperimentError::Infeasible(format!(
            "an all-zero window occurs with probability 2^-L_s >= {target_ber} for every L_s <= {delay_cap}; \
             at least L_s = {l_min} is needed"
        )));
    }
    let mut curve = Vec::new();
    for l in l_min..=delay_cap {
        let q = SystemParams { window_len: l, ..p.clone() };
        let v = evaluate(&q, Kind::BerBlind, formulation)?.value;
        curve.push((l as f64, v));
        if v <= target_ber {
            let mut r = OptimumReport::from_curve(Variable::WindowLen, Kind::BerBlind, curve);
            r.argmin = l as f64;
            r.objective_value = v;
            r.interior_minimum = false;
            r.notes.push(format!("necessary bound 2^-L_s < {target_ber} gives L_s >= {l_min}"));
            return Ok(r);
        }
    }
    let best = curve.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    Err(ExperimentError::Infeasible(format!(
        "blind BER stays above {target_ber} for L_s in {l_min}..={delay_cap} (lowest {best:e}); \
         raise the delay cap or the transmit power"
    )))
}

#[derive(Debug)]
pub struct HoverCurve {
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub p_fbm: f64,
    pub points: Vec<CurvePoint>,
}

/// One objective-versus-power curve per `(sigma_x, sigma_y)` pair.
pub fn sweep_hover_std(spec: &SweepSpec, p: &SystemParams) -> Result<Vec<HoverCurve>, ExperimentError> {
    if spec.pairs.is_empty() {
        return Err(spec_err("hover_std sweep needs `pairs`"));
    }
    if spec.pt_grid_dbm.is_empty() {
        return Err(spec_err("hover_std sweep needs `pt_grid_dbm`"));
    }
    let kind = spec.objective.kind();
    let mut out = Vec::with_capacity(spec.pairs.len());
    for &[sx, sy] in &spec.pairs {
        let q = SystemParams {
            hover_std_x: sx,
            hover_std_y: sy,
            ..p.clone()
        };
        q.validate()?;
        let rows = sweep_curve(&q, &spec.pt_grid_dbm, &[kind], spec.formulation, QuadratureSettings::default());
        let points = rows.into_iter().collect::<Result<Vec<_>, _>>().map_err(|f| f.error)?;
        out.push(HoverCurve {
            sigma_x: sx,
            sigma_y: sy,
            p_fbm: fbm_probability(&DetectorGeometry::from_params(&q), sx, sy),
            points,
        });
    }
    Ok(out)
}

/// Re-evaluates the optimum and its grid neighbours by Monte-Carlo.
pub fn spot_check(
    report: &mut OptimumReport,
    objective: Objective,
    p: &SystemParams,
    n_windows: u64,
    seed: u64,
    workers: usize,
) -> Result<(), ExperimentError> {
    let i = report.argmin_index();
    let lo = i.saturating_sub(1);
    let hi = (i + 1).min(report.curve.len() - 1);
    for (k, &(x, analytic)) in report.curve[lo..=hi].iter().enumerate() {
        let q = apply(report.variable, p, x);
        let settings = McSettings {
            n_windows,
            mode: objective.mode(),
            seed: seed.wrapping_add(k as u64),
            workers,
        };
        let t = run_monte_carlo(&q, &settings)?;
        let (simulated, std_error) = match objective {
            Objective::TerBlind => (t.ter(), (t.ter() * (1.0 - t.ter()) / n_windows.max(1) as f64).sqrt()),
            _ => (t.ber(), t.ber_std_error()),
        };
        report.spot_checks.push(SpotCheck {
            x,
            analytic,
            simulated,
            std_error,
        });
    }
    Ok(())
}

pub enum SweepOutcome {
    Optimum(OptimumReport),
    Curves(Vec<HoverCurve>),
}

/// Runs whatever `spec` describes.
pub fn run_sweep(spec: &SweepSpec, p: &SystemParams) -> Result<SweepOutcome, ExperimentError> {
    Ok(match spec.variable {
        Variable::DetectorSide => SweepOutcome::Optimum(sweep_detector_size(spec, p)?),
        Variable::TxPower => SweepOutcome::Optimum(sweep_tx_power(spec, p)?),
        Variable::WindowLen => {
            let target = spec.target_ber.ok_or_else(|| spec_err("window_len sweep needs `target_ber`"))?;
            let cap = spec.delay_cap.ok_or_else(|| spec_err("window_len sweep needs `delay_cap`"))?;
            SweepOutcome::Optimum(choose_window_length(target, cap, p, spec.formulation)?)
        }
        Variable::HoverStd => SweepOutcome::Curves(sweep_hover_std(spec, p)?),
    })
}

impl fmt::Display for OptimumReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "variable: {}", self.variable.column())?;
        writeln!(f, "objective: {}", self.objective)?;
        writeln!(f, "argmin: {}", self.argmin)?;
        writeln!(f, "objective_at_argmin: {:e}", self.objective_value)?;
        writeln!(f, "interior_minimum: {}", self.interior_minimum)?;
        writeln!(f, "grid_points: {}", self.curve.len())?;
        for s in &self.spot_checks {
            let z = (s.simulated - s.analytic) / s.std_error;
            writeln!(
                f,
                "spot_check: x={} analytic={:e} mc={:e} se={:e} z={:.2}",
                s.x, s.analytic, s.simulated, s.std_error, z
            )?;
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}

/// `(x, objective)` rows of an optimum search.
pub fn write_report_csv<W: Write>(mut w: W, r: &OptimumReport) -> io::Result<()> {
    writeln!(w, "{},{}", r.variable.column(), r.objective)?;
    for &(x, v) in &r.curve {
        let xs = if r.variable == Variable::TxPower { fmt_dbm(x) } else { format!("{x:e}") };
        writeln!(w, "{xs},{v:e}")?;
    }
    Ok(())
}

pub const HOVER_CSV_HEADER: &str = "sigma_x,sigma_y,p_fbm,P_t_dBm,kind,value,quad_tol,clamped_cells";

pub fn write_hover_csv<W: Write>(mut w: W, curves: &[HoverCurve]) -> io::Result<()> {
    writeln!(w, "{HOVER_CSV_HEADER}")?;
    for c in curves {
        for pt in &c.points {
            writeln!(
                w,
                "{:e},{:e},{:e},{},{},{:e},{:e},{}",
                c.sigma_x,
                c.sigma_y,
                c.p_fbm,
                fmt_dbm(crate::config::watts_to_dbm(pt.tx_power)),
                pt.kind,
                pt.value,
                pt.quad_tol,
                pt.clamped_cells
            )?;
        }
    }
    Ok(())
}

/// Plain-text summary of a hover sweep, one line per pair.
pub fn hover_summary(curves: &[HoverCurve]) -> String {
    let mut s = String::new();
    for c in curves {
        let worst = c.points.iter().map(|p| p.value).fold(0.0, f64::max);
        s += &format!(
            "pair: sigma_x={:e} sigma_y={:e} p_fbm={:e} max_value={:e}\n",
            c.sigma_x, c.sigma_y, c.p_fbm, worst
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_grid_endpoints() {
        let g = LogGrid { start: 0.003, stop: 0.3, points: 5 }.values();
        assert_eq!(g.len(), 5);
        assert!((g[0] - 0.003).abs() < 1e-15 && (g[4] - 0.3).abs() < 1e-14);
        assert!((g[2] - 0.03).abs() < 1e-14);
    }

    #[test]
    fn grid_must_increase() {
        let mut s = SweepSpec::detector(0.01, 0.1, 3);
        s.log_grid = None;
        s.grid = vec![0.1, 0.05];
        assert!(matches!(s.grid_values(), Err(ExperimentError::Spec(_))));
    }

    #[test]
    fn fixed_background_is_refused() {
        let s = SweepSpec::detector(0.01, 0.1, 3);
        let e = sweep_detector_size(&s, &SystemParams::default()).unwrap_err();
        assert!(matches!(e, ExperimentError::FixedBackground));
        assert!(e.is_validation());
    }

    #[test]
    fn window_bound_alone_can_be_infeasible() {
        let e = choose_window_length(1e-3, 5, &SystemParams::default(), Formulation::Exact).unwrap_err();
        match e {
            ExperimentError::Infeasible(msg) => assert!(msg.contains("L_s = 10"), "{msg}"),
            other => panic!("{other}"),
        }
        assert!(choose_window_length(1.5, 30, &SystemParams::default(), Formulation::Exact).is_err());
    }

    #[test]
    fn spec_parsing_and_overrides() {
        let text = r#"
            variable = "detector_side"
            objective = "ter_blind"
            log_grid = { start = 0.003, stop = 0.3, points = 9 }
            [fixed]
            background_mode = "geometric"
            hover_std_x = 5e-3
        "#;
        let s = SweepSpec::parse(text).unwrap();
        assert_eq!(s.grid_values().unwrap().len(), 9);
        let p = s.params_from("tx_power = 2e-5\nhover_std_x = 1e-3\n").unwrap();
        assert_eq!(p.hover_std_x, 5e-3);
        assert_eq!(p.tx_power, 2e-5);
        assert!(matches!(p.background, BackgroundMode::Geometric { .. }));
        assert!(SweepSpec::parse("variable = \"focal_length\"").is_err());
    }

    #[test]
    fn report_picks_first_minimum() {
        let r = OptimumReport::from_curve(Variable::TxPower, Kind::TerBlind, vec![(1.0, 0.3), (2.0, 0.1), (3.0, 0.1)]);
        assert_eq!(r.argmin, 2.0);
        assert!(r.interior_minimum);
        let edge = OptimumReport::from_curve(Variable::TxPower, Kind::TerBlind, vec![(1.0, 0.3), (2.0, 0.2)]);
        assert!(!edge.interior_minimum);
    }
}

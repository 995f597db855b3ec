//! Command-line front end. Every command writes its data to files and a
//! manifest next to them; stdout stays empty and the exit code is the status.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 infeasible
//! optimization.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::analysis::{sweep_curve, write_curve_csv, Formulation, Kind, QuadratureSettings};
use crate::channel::{sample_channel, write_samples_csv, ChannelSampler};
use crate::config::{dbm_to_watts, parse_config, watts_to_dbm, SystemParams};
use crate::experiments::{
    hover_summary, run_sweep, spot_check, write_hover_csv, write_report_csv, ExperimentError, SweepOutcome, SweepSpec,
};
use crate::link_sim::{fmt_dbm, run_monte_carlo, write_sim_csv, McSettings, Mode, SimRow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "uavfso", version, about = "Ground-to-UAV optical link: closed-form curves, Monte-Carlo and design sweeps")]
pub struct Cli {
    /// TOML config; defaults apply when omitted
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// worker threads, 0 = all cores; never changes results
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    /// output file; defaults to `<command>.csv` (`optimize.txt` for optimize)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form probabilities over a transmit-power grid.
    Analyze {
        /// `start:stop:step` in dBm, both ends inclusive
        #[arg(long, default_value = "-30:10:5", allow_hyphen_values = true)]
        pt_range: String,
        #[arg(long, value_delimiter = ',', default_value = "ter_known,ter_blind,ber_known,ber_blind,floor")]
        kinds: Vec<String>,
        /// exact | printed | printed_main
        #[arg(long, default_value = "exact")]
        formulation: String,
    },
    /// Monte-Carlo tracking and bit error rates.
    Simulate {
        #[arg(long, default_value_t = 100_000)]
        windows: u64,
        /// known_csi | blind
        #[arg(long, default_value = "blind")]
        mode: String,
        /// `start:stop:step` in dBm; the configured power when omitted
        #[arg(long, allow_hyphen_values = true)]
        pt_range: Option<String>,
    },
    /// Design sweep described by a TOML spec file.
    Optimize {
        #[arg(long)]
        sweep: PathBuf,
    },
    /// Raw channel draws for external analysis.
    SampleChannel {
        #[arg(long, default_value_t = 10_000)]
        n: u64,
    },
}

/// A failure mapped to its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn invalid(msg: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INVALID,
            message: msg.into(),
        }
    }

    fn numerical(msg: impl Into<String>) -> Self {
        Failure {
            code: EXIT_NUMERICAL,
            message: msg.into(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::invalid(format!("I/O error: {e}"))
    }
}

/// Parses `start:stop:step` into an inclusive grid.
pub fn parse_pt_range(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, step] = parts.as_slice() else {
        return Err(format!("--pt-range `{s}` is not start:stop:step"));
    };
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("--pt-range: `{t}` is not a number"));
    let (a, b, step) = (num(a)?, num(b)?, num(step)?);
    if !(a.is_finite() && b.is_finite() && step.is_finite()) {
        return Err("--pt-range values must be finite".into());
    }
    if b < a {
        return Err(format!("--pt-range stop {b} is below start {a}"));
    }
    if step <= 0.0 {
        if a == b {
            return Ok(vec![a]);
        }
        return Err("--pt-range step must be > 0".into());
    }
    let n = ((b - a) / step + 1e-9).floor() as usize;
    if n > 100_000 {
        return Err("--pt-range has more than 100000 points".into());
    }
    Ok((0..=n).map(|i| a + step * i as f64).collect())
}

/// Reproducibility record written next to every output.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub subcommand: String,
    pub config_path: String,
    /// sha256 of the config bytes (of the empty string without a config)
    pub config_digest: String,
    pub seed: u64,
    pub arguments: Vec<(String, String)>,
    pub outputs: Vec<String>,
    pub tool_version: String,
    pub wall_clock_seconds: f64,
}

/// Key of the only manifest line that differs between identical runs.
pub const WALL_CLOCK_KEY: &str = "wall_clock_seconds";

impl RunManifest {
    pub fn render(&self) -> String {
        let q = |s: &str| format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""));
        let mut s = String::new();
        s += &format!("subcommand = {}\n", q(&self.subcommand));
        s += &format!("tool_version = {}\n", q(&self.tool_version));
        s += &format!("config_path = {}\n", q(&self.config_path));
        s += &format!("config_digest = {}\n", q(&self.config_digest));
        s += &format!("seed = {}\n", self.seed);
        let outs: Vec<String> = self.outputs.iter().map(|o| q(o)).collect();
        s += &format!("outputs = [{}]\n", outs.join(", "));
        s += &format!("{WALL_CLOCK_KEY} = {:.3}\n", self.wall_clock_seconds);
        s += "\n[arguments]\n";
        for (k, v) in &self.arguments {
            s += &format!("{k} = {}\n", q(v));
        }
        s
    }

    pub fn path_for(out: &Path) -> PathBuf {
        let mut p = out.as_os_str().to_owned();
        p.push(".manifest.toml");
        PathBuf::from(p)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

struct Context {
    params: SystemParams,
    config_text: String,
    manifest: RunManifest,
    started: Instant,
}

fn load(cli: &Cli, subcommand: &str) -> Result<Context, Failure> {
    let (config_text, config_path) = match &cli.config {
        Some(p) => (
            std::fs::read_to_string(p).map_err(|e| Failure::invalid(format!("cannot read config {}: {e}", p.display())))?,
            p.display().to_string(),
        ),
        None => (String::new(), "<defaults>".to_string()),
    };
    let params = parse_config(&config_text).map_err(|e| Failure::invalid(e.to_string()))?;
    Ok(Context {
        params,
        manifest: RunManifest {
            subcommand: subcommand.to_string(),
            config_path,
            config_digest: format!("sha256:{}", sha256_hex(config_text.as_bytes())),
            seed: cli.seed,
            arguments: Vec::new(),
            outputs: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_seconds: 0.0,
        },
        config_text,
        started: Instant::now(),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::invalid(format!("cannot create {}: {e}", path.display())))
}

fn finish(mut ctx: Context, out: &Path) -> Result<(), Failure> {
    ctx.manifest.wall_clock_seconds = ctx.started.elapsed().as_secs_f64();
    let path = RunManifest::path_for(out);
    std::fs::write(&path, ctx.manifest.render())
        .map_err(|e| Failure::invalid(format!("cannot write {}: {e}", path.display())))
}

fn experiment_failure(e: ExperimentError) -> Failure {
    let code = match &e {
        ExperimentError::Infeasible(_) => EXIT_INFEASIBLE,
        e if e.is_validation() => EXIT_INVALID,
        _ => EXIT_NUMERICAL,
    };
    Failure { code, message: e.to_string() }
}

fn with_pool<T>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, Failure>
where
    T: Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Failure::numerical(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn cmd_analyze(cli: &Cli, pt_range: &str, kinds: &[String], formulation: &str) -> Result<(), Failure> {
    let mut ctx = load(cli, "analyze")?;
    let grid = parse_pt_range(pt_range).map_err(Failure::invalid)?;
    let kinds: Vec<Kind> = kinds
        .iter()
        .map(|k| k.trim().parse::<Kind>())
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::invalid(e.to_string()))?;
    let formulation: Formulation = formulation.parse().map_err(|e: crate::analysis::AnalysisError| Failure::invalid(e.to_string()))?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("analyze.csv"));
    let params = ctx.params.clone();
    let rows = with_pool(cli.workers, || {
        sweep_curve(&params, &grid, &kinds, formulation, QuadratureSettings::default())
    })?;
    let mut w = create(&out)?;
    write_curve_csv(&mut w, &rows)?;
    w.flush()?;
    let names: Vec<&str> = kinds.iter().map(|k| k.as_str()).collect();
    ctx.manifest.arguments = vec![
        ("pt_range".into(), pt_range.into()),
        ("kinds".into(), names.join(",")),
        ("formulation".into(), formulation.to_string()),
    ];
    ctx.manifest.outputs = vec![out.display().to_string()];
    finish(ctx, &out)?;
    let failures: Vec<String> = rows
        .iter()
        .filter_map(|r| r.as_ref().err())
        .map(|f| format!("{} dBm {}: {}", fmt_dbm(f.p_t_dbm), f.kind, f.error))
        .collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::numerical(format!("{} point(s) failed:\n  {}", failures.len(), failures.join("\n  "))))
    }
}

fn cmd_simulate(cli: &Cli, windows: u64, mode: &str, pt_range: Option<&str>) -> Result<(), Failure> {
    let mut ctx = load(cli, "simulate")?;
    let mode: Mode = mode.parse().map_err(|e: crate::link_sim::SimError| Failure::invalid(e.to_string()))?;
    let grid = match pt_range {
        Some(r) => parse_pt_range(r).map_err(Failure::invalid)?,
        None => vec![watts_to_dbm(ctx.params.tx_power)],
    };
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("simulate.csv"));
    let mut rows = Vec::with_capacity(grid.len());
    for &dbm in &grid {
        let p = SystemParams {
            tx_power: if pt_range.is_some() { dbm_to_watts(dbm) } else { ctx.params.tx_power },
            ..ctx.params.clone()
        };
        let settings = McSettings {
            n_windows: windows,
            mode,
            seed: cli.seed,
            workers: cli.workers,
        };
        let tally = run_monte_carlo(&p, &settings).map_err(|e| match e {
            crate::link_sim::SimError::Config(_) => Failure::invalid(e.to_string()),
            other => Failure::numerical(other.to_string()),
        })?;
        rows.push(SimRow {
            tx_power: p.tx_power,
            mode,
            window_len: p.window_len,
            seed: cli.seed,
            tally,
        });
    }
    let mut w = create(&out)?;
    write_sim_csv(&mut w, &rows)?;
    w.flush()?;
    ctx.manifest.arguments = vec![
        ("windows".into(), windows.to_string()),
        ("mode".into(), mode.to_string()),
        ("pt_range".into(), pt_range.unwrap_or("<config>").into()),
    ];
    ctx.manifest.outputs = vec![out.display().to_string()];
    finish(ctx, &out)
}

fn cmd_optimize(cli: &Cli, sweep: &Path) -> Result<(), Failure> {
    let mut ctx = load(cli, "optimize")?;
    let spec_text = std::fs::read_to_string(sweep)
        .map_err(|e| Failure::invalid(format!("cannot read sweep spec {}: {e}", sweep.display())))?;
    let spec = SweepSpec::parse(&spec_text).map_err(experiment_failure)?;
    let params = spec.params_from(&ctx.config_text).map_err(experiment_failure)?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("optimize.txt"));
    let mut csv_path = out.as_os_str().to_owned();
    csv_path.push(".csv");
    let csv_path = PathBuf::from(csv_path);
    ctx.manifest.arguments = vec![
        ("sweep".into(), sweep.display().to_string()),
        ("sweep_digest".into(), format!("sha256:{}", sha256_hex(spec_text.as_bytes()))),
    ];
    ctx.manifest.outputs = vec![out.display().to_string(), csv_path.display().to_string()];
    let workers = cli.workers;
    let seed = cli.seed;
    let result = with_pool(workers, || -> Result<SweepOutcome, ExperimentError> {
        let mut outcome = run_sweep(&spec, &params)?;
        if let SweepOutcome::Optimum(r) = &mut outcome {
            if spec.spot_check_windows > 0 {
                spot_check(r, spec.objective, &params, spec.spot_check_windows, seed, workers)?;
            }
        }
        Ok(outcome)
    })?;
    let mut report = create(&out)?;
    match result {
        Ok(SweepOutcome::Optimum(r)) => {
            write!(report, "status: ok\n{r}")?;
            report.flush()?;
            let mut w = create(&csv_path)?;
            write_report_csv(&mut w, &r)?;
            w.flush()?;
            finish(ctx, &out)
        }
        Ok(SweepOutcome::Curves(c)) => {
            write!(report, "status: ok\nvariable: sigma_rad\n{}", hover_summary(&c))?;
            report.flush()?;
            let mut w = create(&csv_path)?;
            write_hover_csv(&mut w, &c)?;
            w.flush()?;
            finish(ctx, &out)
        }
        Err(e) => {
            let f = experiment_failure(e);
            let status = match f.code {
                EXIT_INFEASIBLE => "infeasible",
                EXIT_INVALID => "invalid",
                _ => "numerical_failure",
            };
            writeln!(report, "status: {status}\nreason: {}", f.message)?;
            report.flush()?;
            ctx.manifest.outputs.truncate(1);
            finish(ctx, &out)?;
            Err(f)
        }
    }
}

fn cmd_sample_channel(cli: &Cli, n: u64) -> Result<(), Failure> {
    let mut ctx = load(cli, "sample-channel")?;
    let sampler = ChannelSampler::new(&ctx.params).map_err(|e| Failure::numerical(e.to_string()))?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("sample-channel.csv"));
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let mut w = create(&out)?;
    // streamed in blocks so large `n` stays within memory
    let mut remaining = n;
    let mut first = true;
    while remaining > 0 || first {
        let take = remaining.min(65_536);
        let draws: Vec<_> = (0..take).map(|_| sample_channel(&mut rng, &sampler)).collect();
        if first {
            write_samples_csv(&mut w, &draws)?;
            first = false;
        } else {
            for d in &draws {
                writeln!(w, "{:e},{:e},{:e},{:e},{:e},{}", d.theta_x, d.theta_y, d.h_atm, d.h_poi, d.h, d.capture)?;
            }
        }
        remaining -= take;
    }
    w.flush()?;
    ctx.manifest.arguments = vec![("n".into(), n.to_string())];
    ctx.manifest.outputs = vec![out.display().to_string()];
    finish(ctx, &out)
}

/// Runs a parsed command line and returns the exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Analyze {
            pt_range,
            kinds,
            formulation,
        } => cmd_analyze(&cli, pt_range, kinds, formulation),
        Command::Simulate { windows, mode, pt_range } => cmd_simulate(&cli, *windows, mode, pt_range.as_deref()),
        Command::Optimize { sweep } => cmd_optimize(&cli, sweep),
        Command::SampleChannel { n } => cmd_sample_channel(&cli, *n),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

/// Entry point for the binary: parse, run, report.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            // help and version go to stdout by convention
            let _ = e.print();
            code
        }
    }
}

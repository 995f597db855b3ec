//! Photocurrent synthesis and the Monte-Carlo harness for tracking-error
//! probability and bit-error rate.
//!
//! Windows are processed in fixed shards of [`SHARD_WINDOWS`]. Shard `k`
//! draws from a ChaCha8 generator seeded with the master seed and switched
//! to stream `k`, so a tally depends only on `(params, n_windows, mode,
//! seed)` and never on how many threads ran it.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::channel::{sample_channel, ChannelDraw, ChannelError, ChannelSampler};
use crate::config::{derive_constants, watts_to_dbm, ConfigError, SystemParams};
use crate::receiver::{
    count_bit_errors, detection_threshold, estimate_channel_blind, track_blind, track_known_csi, ReceiverConstants,
};

pub const SHARD_WINDOWS: u64 = 4096;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("cannot build worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("unknown mode `{0}` (expected `known_csi` or `blind`)")]
    UnknownMode(String),
}

/// One observation window at the four quadrant outputs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WindowSignals {
    pub bits: Vec<bool>,
    pub m: u32,
    /// `r[i][k]`: quadrant `i`, slot `k` [A]
    pub r: [Vec<f64>; 4],
    /// `r'_i = sum_k r[i][k]`
    pub r_sum: [f64; 4],
}

impl WindowSignals {
    pub fn from_parts(bits: Vec<bool>, r: [Vec<f64>; 4]) -> Self {
        let m = bits.iter().filter(|&&b| b).count() as u32;
        let r_sum = std::array::from_fn(|i| r[i].iter().sum());
        WindowSignals { bits, m, r, r_sum }
    }

    /// Sums only, for exercising the tracking metrics in isolation.
    pub fn from_sums(r_sum: [f64; 4]) -> Self {
        WindowSignals {
            r_sum,
            ..Default::default()
        }
    }
}

/// Fills `w` with a fresh window: i.i.d. equiprobable bits and per-slot
/// Gaussian currents `h D_i mu s[k] + n_i[k]`,
/// `var n_i[k] = sigma_s^2 h D_i s[k] + sigma_0^2`.
pub fn synth_window_into<R: Rng + ?Sized>(w: &mut WindowSignals, rng: &mut R, draw: &ChannelDraw, rc: &ReceiverConstants) {
    let l = rc.window_len as usize;
    w.bits.clear();
    w.bits.extend((0..l).map(|_| rng.random::<bool>()));
    w.m = w.bits.iter().filter(|&&b| b).count() as u32;
    let lit = draw.capture.index();
    let s0 = rc.sigma_02.sqrt();
    let on_mean = draw.h * rc.signal_current;
    let on_sd = (rc.sigma_s2 * draw.h + rc.sigma_02).sqrt();
    for i in 0..4 {
        let row = &mut w.r[i];
        row.clear();
        let mut sum = 0.0;
        for k in 0..l {
            let z: f64 = StandardNormal.sample(rng);
            let x = if lit == Some(i) && w.bits[k] { on_mean + on_sd * z } else { s0 * z };
            row.push(x);
            sum += x;
        }
        w.r_sum[i] = sum;
    }
}

pub fn synth_window<R: Rng + ?Sized>(rng: &mut R, draw: &ChannelDraw, rc: &ReceiverConstants) -> WindowSignals {
    let mut w = WindowSignals::default();
    synth_window_into(&mut w, rng, draw, rc);
    w
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    KnownCsi,
    Blind,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::KnownCsi => "known_csi",
            Mode::Blind => "blind",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self, SimError> {
        match s {
            "known_csi" | "known" => Ok(Mode::KnownCsi),
            "blind" => Ok(Mode::Blind),
            other => Err(SimError::UnknownMode(other.to_string())),
        }
    }
}

/// What the receiver did with one window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowOutcome {
    pub quadrant: u8,
    pub h_hat: Option<f64>,
    pub tracking_error: bool,
    pub bit_errors: u32,
    pub misaligned: bool,
}

/// Tracks, estimates (blind mode) and detects one synthesized window.
pub fn process_window(w: &WindowSignals, draw: &ChannelDraw, mode: Mode, rc: &ReceiverConstants) -> WindowOutcome {
    let (out, gain) = match mode {
        Mode::KnownCsi => (track_known_csi(w, draw.h, w.m, rc), draw.h),
        Mode::Blind => {
            let (h_hat, r) = estimate_channel_blind(w, rc);
            (track_blind(w, h_hat, r, rc), h_hat)
        }
    };
    let tau = detection_threshold(gain, rc);
    let truth = draw.capture.index();
    WindowOutcome {
        quadrant: out.quadrant,
        h_hat: out.h_hat,
        // any choice under full misalignment is an error
        tracking_error: truth != Some(out.index()),
        bit_errors: count_bit_errors(w, out.quadrant, tau),
        misaligned: truth.is_none(),
    }
}

/// Additive error counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimTally {
    pub windows: u64,
    pub tracking_errors: u64,
    pub bit_errors: u64,
    /// sum over windows of (bit errors in the window)^2, for the clustered CI
    pub bit_errors_sq: u64,
    pub bits_total: u64,
    pub fbm_windows: u64,
}

/// Wilson score interval `(lo, hi)` at 95%.
pub fn wilson_interval(successes: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

fn binomial_halfwidth(successes: u64, n: u64) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    let p = successes as f64 / n as f64;
    if successes < 30 {
        let (lo, hi) = wilson_interval(successes, n);
        (p - lo).max(hi - p)
    } else {
        // Wald with a continuity term
        Z95 * (p * (1.0 - p) / n as f64).sqrt() + 0.5 / n as f64
    }
}

impl SimTally {
    pub fn add(&mut self, o: &WindowOutcome, window_len: u32) {
        self.windows += 1;
        self.tracking_errors += o.tracking_error as u64;
        self.bit_errors += o.bit_errors as u64;
        self.bit_errors_sq += (o.bit_errors as u64).pow(2);
        self.bits_total += window_len as u64;
        self.fbm_windows += o.misaligned as u64;
    }

    pub fn merge(&mut self, other: &SimTally) {
        self.windows += other.windows;
        self.tracking_errors += other.tracking_errors;
        self.bit_errors += other.bit_errors;
        self.bit_errors_sq += other.bit_errors_sq;
        self.bits_total += other.bits_total;
        self.fbm_windows += other.fbm_windows;
    }

    pub fn ter(&self) -> f64 {
        self.tracking_errors as f64 / self.windows as f64
    }

    pub fn ber(&self) -> f64 {
        self.bit_errors as f64 / self.bits_total as f64
    }

    pub fn p_fbm(&self) -> f64 {
        self.fbm_windows as f64 / self.windows as f64
    }

    /// 95% half-width of the tracking-error estimate.
    pub fn ter_ci(&self) -> f64 {
        binomial_halfwidth(self.tracking_errors, self.windows)
    }

    /// Standard error of the BER estimate. Bits inside a window share the
    /// channel and the tracking decision, so windows are the independent
    /// units.
    pub fn ber_std_error(&self) -> f64 {
        let n = self.windows as f64;
        let l = self.bits_total as f64 / n;
        let mean = self.bit_errors as f64 / n;
        let var = (self.bit_errors_sq as f64 / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
        (var / n).sqrt() / l
    }

    /// 95% half-width of the BER estimate: the clustered normal interval,
    /// widened to the per-bit Wilson interval when errors are rare.
    pub fn ber_ci(&self) -> f64 {
        if self.windows == 0 {
            return f64::NAN;
        }
        let clustered = Z95 * self.ber_std_error();
        if self.bit_errors < 30 {
            clustered.max(binomial_halfwidth(self.bit_errors, self.bits_total))
        } else {
            clustered
        }
    }
}

/// Monte-Carlo run settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSettings {
    pub n_windows: u64,
    pub mode: Mode,
    pub seed: u64,
    /// Worker threads; `0` lets the pool choose.
    pub workers: usize,
}

fn shard_rng(seed: u64, shard: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard);
    rng
}

fn run_shard(
    shard: u64,
    s: &McSettings,
    sampler: &ChannelSampler,
    rc: &ReceiverConstants,
) -> SimTally {
    let start = shard * SHARD_WINDOWS;
    let count = SHARD_WINDOWS.min(s.n_windows - start);
    let mut rng = shard_rng(s.seed, shard);
    let mut w = WindowSignals::default();
    let mut tally = SimTally::default();
    for _ in 0..count {
        let draw = sample_channel(&mut rng, sampler);
        synth_window_into(&mut w, &mut rng, &draw, rc);
        let o = process_window(&w, &draw, s.mode, rc);
        tally.add(&o, rc.window_len);
    }
    tally
}

/// Simulates `n_windows` independent windows and tallies errors.
pub fn run_monte_carlo(p: &SystemParams, s: &McSettings) -> Result<SimTally, SimError> {
    let d = derive_constants(p)?;
    let rc = ReceiverConstants::new(&d, p.window_len);
    let sampler = ChannelSampler::new(p)?;
    let shards = s.n_windows.div_ceil(SHARD_WINDOWS);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(s.workers).build()?;
    let parts: Vec<SimTally> = pool.install(|| {
        (0..shards)
            .into_par_iter()
            .map(|k| run_shard(k, s, &sampler, &rc))
            .collect()
    });
    let mut total = SimTally::default();
    for t in &parts {
        total.merge(t);
    }
    Ok(total)
}

pub const SIM_CSV_HEADER: &str = "P_t_dBm,mode,L_s,n_windows,ter,ter_ci,ber,ber_ci,p_fbm_emp,seed";

/// One CSV row of a simulation result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimRow {
    pub tx_power: f64,
    pub mode: Mode,
    pub window_len: u32,
    pub seed: u64,
    pub tally: SimTally,
}

pub fn write_sim_csv<W: Write>(mut w: W, rows: &[SimRow]) -> io::Result<()> {
    writeln!(w, "{SIM_CSV_HEADER}")?;
    for r in rows {
        let t = &r.tally;
        writeln!(
            w,
            "{},{},{},{},{:e},{:e},{:e},{:e},{:e},{}",
            fmt_dbm(watts_to_dbm(r.tx_power)),
            r.mode,
            r.window_len,
            t.windows,
            t.ter(),
            t.ter_ci(),
            t.ber(),
            t.ber_ci(),
            t.p_fbm(),
            r.seed
        )?;
    }
    Ok(())
}

/// dBm rounded to 1e-9 so grid values print without binary noise.
pub fn fmt_dbm(dbm: f64) -> String {
    let r = (dbm * 1e9).round() / 1e9;
    format!("{r}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Capture;

    fn draw(h: f64, capture: Capture) -> ChannelDraw {
        ChannelDraw {
            theta_x: 0.0,
            theta_y: 0.0,
            h_atm: 1.0,
            h_poi: h,
            h,
            capture,
        }
    }

    fn rc(l: u32) -> ReceiverConstants {
        let d = derive_constants(&SystemParams::default()).unwrap();
        ReceiverConstants::new(&d, l)
    }

    #[test]
    fn noiseless_window() {
        let rc = ReceiverConstants {
            sigma_s2: 0.0,
            sigma_02: 0.0,
            ..rc(8)
        };
        let mut rng = shard_rng(3, 0);
        let w = synth_window(&mut rng, &draw(0.2, Capture::Quadrant(1)), &rc);
        for k in 0..8 {
            let want = if w.bits[k] { 0.2 * rc.signal_current } else { 0.0 };
            assert_eq!(w.r[0][k], want);
            for i in 1..4 {
                assert_eq!(w.r[i][k], 0.0);
            }
        }
        assert_eq!(w.m as usize, w.bits.iter().filter(|&&b| b).count());
        for i in 0..4 {
            assert_eq!(w.r_sum[i], w.r[i].iter().sum::<f64>());
        }
    }

    #[test]
    fn one_slot_variance() {
        let rc = rc(1);
        let h = 0.02;
        let d = draw(h, Capture::Quadrant(2));
        let mut rng = shard_rng(5, 0);
        let (mut n, mut s, mut s2) = (0.0, 0.0, 0.0);
        let mut w = WindowSignals::default();
        while n < 200_000.0 {
            synth_window_into(&mut w, &mut rng, &d, &rc);
            if w.bits[0] {
                let x = w.r[1][0] - h * rc.signal_current;
                s += x;
                s2 += x * x;
                n += 1.0;
            }
        }
        let var = s2 / n - (s / n).powi(2);
        let want = rc.sigma_s2 * h + rc.sigma_02;
        // sd of the sample variance of a normal: var sqrt(2 / n)
        assert!((var - want).abs() < 3.0 * want * (2.0 / n).sqrt(), "var={var} want={want}");
    }

    #[test]
    fn misaligned_window_is_pure_noise() {
        let rc = rc(16);
        let mut rng = shard_rng(9, 0);
        let w = synth_window(&mut rng, &draw(5.0, Capture::Misaligned), &rc);
        let lim = 6.0 * rc.sigma_02.sqrt();
        assert!(w.r.iter().flatten().all(|x| x.abs() < lim));
    }

    #[test]
    fn empty_run() {
        let s = McSettings {
            n_windows: 0,
            mode: Mode::Blind,
            seed: 1,
            workers: 1,
        };
        let t = run_monte_carlo(&SystemParams::default(), &s).unwrap();
        assert_eq!(t, SimTally::default());
    }

    #[test]
    fn worker_count_does_not_change_tally() {
        let p = SystemParams::default();
        let mut s = McSettings {
            n_windows: 3 * SHARD_WINDOWS + 17,
            mode: Mode::Blind,
            seed: 42,
            workers: 2,
        };
        let a = run_monte_carlo(&p, &s).unwrap();
        s.workers = 8;
        let b = run_monte_carlo(&p, &s).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.windows, s.n_windows);
    }

    #[test]
    fn tally_ci_shapes() {
        let mut t = SimTally {
            windows: 1_000_000,
            tracking_errors: 10,
            ..Default::default()
        };
        let (lo, hi) = wilson_interval(10, 1_000_000);
        assert!(lo < 1e-5 && hi > 1e-5);
        assert!(t.ter_ci() > 0.0);
        t.tracking_errors = 1000;
        let wald = Z95 * (1e-3f64 * (1.0 - 1e-3) / 1e6).sqrt() + 0.5e-6;
        assert!((t.ter_ci() - wald).abs() < 1e-15);
        assert_eq!("known".parse::<Mode>().unwrap(), Mode::KnownCsi);
        assert!("psychic".parse::<Mode>().is_err());
    }

    #[test]
    fn csv_schema() {
        let mut buf = Vec::new();
        write_sim_csv(
            &mut buf,
            &[SimRow {
                tx_power: 1e-5,
                mode: Mode::KnownCsi,
                window_len: 10,
                seed: 7,
                tally: SimTally {
                    windows: 4,
                    tracking_errors: 1,
                    bit_errors: 2,
                    bit_errors_sq: 4,
                    bits_total: 40,
                    fbm_windows: 0,
                },
            }],
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(SIM_CSV_HEADER));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[0], "-20");
        assert_eq!(row[1], "known_csi");
        assert_eq!(row[4], "2.5e-1");
        assert_eq!(row.len(), 10);
    }
}

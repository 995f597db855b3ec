//! Per-window receiver: quadrant tracking with known or blindly estimated
//! channel, the OOK threshold, and bit decisions.
//!
//! Currents are in amperes. The `1`-symbol amplitude through a unit channel
//! is `mu P_t`, written `mu` below; gains `h` and the statistic `R` are
//! dimensionless multiples of it.

use crate::config::DerivedConstants;
use crate::link_sim::WindowSignals;

/// The receiver-side constants every decision needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverConstants {
    /// `mu P_t` [A]
    pub signal_current: f64,
    /// signal shot-noise coefficient [A^2]
    pub sigma_s2: f64,
    /// signal-independent noise variance per slot [A^2]
    pub sigma_02: f64,
    pub window_len: u32,
}

impl ReceiverConstants {
    pub fn new(d: &DerivedConstants, window_len: u32) -> Self {
        ReceiverConstants {
            signal_current: d.signal_current,
            sigma_s2: d.sigma_s2,
            sigma_02: d.sigma_02,
            window_len,
        }
    }

    fn noise_only_var(&self) -> f64 {
        self.window_len as f64 * self.sigma_02
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingOutcome {
    /// Chosen quadrant, `1..=4`.
    pub quadrant: u8,
    pub metrics: [f64; 4],
    /// Blind channel estimate, `None` with known CSI.
    pub h_hat: Option<f64>,
    /// Blind statistic `R = sum_k r[k] / mu`, `None` with known CSI.
    pub r_stat: Option<f64>,
}

impl TrackingOutcome {
    pub fn index(&self) -> usize {
        self.quadrant as usize - 1
    }
}

/// Index of the smallest metric; equal values keep the earlier quadrant.
fn argmin(metrics: &[f64; 4]) -> u8 {
    let mut best = 0;
    for i in 1..4 {
        if metrics[i] < metrics[best] {
            best = i;
        }
    }
    best as u8 + 1
}

/// `M_i = |r'_i - ref|^2 / var1 + sum_{j != i} |r'_j|^2 / var0`.
pub fn tracking_metrics(r_sum: &[f64; 4], reference: f64, var1: f64, var0: f64) -> [f64; 4] {
    let quiet: [f64; 4] = std::array::from_fn(|j| r_sum[j] * r_sum[j] / var0);
    let total: f64 = quiet.iter().sum();
    // written as total + (own term - own quiet term) so that equal
    // variances and a zero reference give bit-identical metrics
    std::array::from_fn(|i| {
        let d = r_sum[i] - reference;
        total + (d * d / var1 - quiet[i])
    })
}

/// Maximum-likelihood quadrant choice given the true gain `h` and ones-count `m`.
pub fn track_known_csi(w: &WindowSignals, h: f64, m: u32, rc: &ReceiverConstants) -> TrackingOutcome {
    let hm = h * m as f64;
    let var0 = rc.noise_only_var();
    let metrics = tracking_metrics(&w.r_sum, hm * rc.signal_current, rc.sigma_s2 * hm + var0, var0);
    TrackingOutcome {
        quadrant: argmin(&metrics),
        metrics,
        h_hat: None,
        r_stat: None,
    }
}

/// Data-aided gain estimate from the total quad-detector current:
/// `R = sum_k r[k] / mu`, `h_hat = 2 R / L_s`.
pub fn estimate_channel_blind(w: &WindowSignals, rc: &ReceiverConstants) -> (f64, f64) {
    let total: f64 = w.r_sum.iter().sum();
    let r = total / rc.signal_current;
    (2.0 * r / rc.window_len as f64, r)
}

/// Quadrant choice with `mu R` standing in for `h mu m`. A non-positive
/// `sigma_s^2 R + L_s sigma_0^2` is replaced by `L_s sigma_0^2`.
pub fn track_blind(w: &WindowSignals, h_hat: f64, r_stat: f64, rc: &ReceiverConstants) -> TrackingOutcome {
    let var0 = rc.noise_only_var();
    let mut var1 = rc.sigma_s2 * r_stat + var0;
    if var1 <= 0.0 {
        var1 = var0;
    }
    let metrics = tracking_metrics(&w.r_sum, rc.signal_current * r_stat, var1, var0);
    TrackingOutcome {
        quadrant: argmin(&metrics),
        metrics,
        h_hat: Some(h_hat),
        r_stat: Some(r_stat),
    }
}

/// OOK threshold `mu h sigma_0 / (sigma_0 + sqrt(h sigma_s^2 + sigma_0^2))`;
/// negative gains are treated as zero.
pub fn detection_threshold(h: f64, rc: &ReceiverConstants) -> f64 {
    let h = h.max(0.0);
    let s0 = rc.sigma_02.sqrt();
    rc.signal_current * h * s0 / (s0 + (h * rc.sigma_s2 + rc.sigma_02).sqrt())
}

/// `s_hat[k] = 1` iff the chosen quadrant's current exceeds the threshold.
pub fn detect_bits(w: &WindowSignals, quadrant: u8, threshold: f64) -> Vec<bool> {
    w.r[quadrant as usize - 1].iter().map(|&x| x > threshold).collect()
}

/// Number of slots where the decision differs from the sent bit.
pub fn count_bit_errors(w: &WindowSignals, quadrant: u8, threshold: f64) -> u32 {
    w.r[quadrant as usize - 1]
        .iter()
        .zip(&w.bits)
        .filter(|&(&x, &s)| (x > threshold) != s)
        .count() as u32
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rc() -> ReceiverConstants {
        ReceiverConstants {
            signal_current: 1e-3,
            sigma_s2: 1.5e-10,
            sigma_02: 1.7e-12,
            window_len: 4,
        }
    }

    fn window(bits: &[bool], r: [Vec<f64>; 4]) -> WindowSignals {
        WindowSignals::from_parts(bits.to_vec(), r)
    }

    fn noiseless(bits: &[bool], q: usize, h: f64, rc: &ReceiverConstants) -> WindowSignals {
        let mut r: [Vec<f64>; 4] = Default::default();
        for (i, row) in r.iter_mut().enumerate() {
            *row = bits
                .iter()
                .map(|&s| if i == q && s { h * rc.signal_current } else { 0.0 })
                .collect();
        }
        window(bits, r)
    }

    #[test]
    fn noiseless_known_csi_tracks_exactly() {
        let rc = rc();
        let bits = [true, false, true, true];
        for q in 0..4 {
            let w = noiseless(&bits, q, 0.3, &rc);
            let out = track_known_csi(&w, 0.3, 3, &rc);
            assert_eq!(out.index(), q);
            assert_eq!(out.metrics[q], 0.0);
        }
    }

    #[test]
    fn all_zero_window_ties_to_first_quadrant() {
        let rc = rc();
        let w = noiseless(&[false; 4], 2, 0.3, &rc);
        assert_eq!(track_known_csi(&w, 0.3, 0, &rc).quadrant, 1);
        let (hh, r) = estimate_channel_blind(&w, &rc);
        assert_eq!(track_blind(&w, hh, r, &rc).quadrant, 1);
    }

    #[test]
    fn blind_estimate_is_exact_without_noise() {
        let rc = ReceiverConstants { window_len: 20, ..rc() };
        let bits: Vec<bool> = (0..20).map(|k| k % 2 == 0).collect();
        let w = noiseless(&bits, 1, 0.5, &rc);
        let (h_hat, r) = estimate_channel_blind(&w, &rc);
        assert!((h_hat - 0.5).abs() < 1e-15);
        assert!((r - 5.0).abs() < 1e-14);
        let out = track_blind(&w, h_hat, r, &rc);
        assert_eq!(out.quadrant, 2);
        assert!(out.metrics[1].abs() < 1e-12);
    }

    #[test]
    fn negative_statistic_clamps_denominator() {
        let rc = rc();
        let r = [vec![-3e-5; 4], vec![-1e-6; 4], vec![0.0; 4], vec![1e-7; 4]];
        let w = window(&[true; 4], r);
        let (hh, rs) = estimate_channel_blind(&w, &rc);
        assert!(rc.sigma_s2 * rs + 4.0 * rc.sigma_02 < 0.0);
        let out = track_blind(&w, hh, rs, &rc);
        let var0 = 4.0 * rc.sigma_02;
        let want = tracking_metrics(&w.r_sum, rc.signal_current * rs, var0, var0);
        assert_eq!(out.metrics, want);
        assert!(out.metrics.iter().all(|m| m.is_finite()));
        assert_eq!(detection_threshold(hh, &rc), 0.0);
    }

    #[test]
    fn brute_force_over_quantized_noise() {
        // L_s = 2: every combination of three noise levels on the summed currents
        let rc = ReceiverConstants { window_len: 2, ..rc() };
        let h = 2e-3;
        let levels = [-2e-6, 0.0, 3e-6];
        let a = h * rc.signal_current;
        for m in 0..=2u32 {
            for code in 0..81usize {
                let mut r_sum = [0.0; 4];
                let mut c = code;
                for (i, rs) in r_sum.iter_mut().enumerate() {
                    *rs = levels[c % 3] + if i == 0 { a * m as f64 } else { 0.0 };
                    c /= 3;
                }
                let w = WindowSignals::from_sums(r_sum);
                let got = track_known_csi(&w, h, m, &rc).quadrant;
                let var1 = rc.sigma_s2 * h * m as f64 + 2.0 * rc.sigma_02;
                let var0 = 2.0 * rc.sigma_02;
                let direct: Vec<f64> = (0..4)
                    .map(|i| {
                        let mut s = (r_sum[i] - a * m as f64).powi(2) / var1;
                        for j in 0..4 {
                            if j != i {
                                s += r_sum[j].powi(2) / var0;
                            }
                        }
                        s
                    })
                    .collect();
                let mut best = 0;
                for i in 1..4 {
                    if direct[i] < direct[best] {
                        best = i;
                    }
                }
                let chosen = direct[got as usize - 1];
                assert!(chosen <= direct[best] * (1.0 + 1e-12), "m={m} code={code}");
                if m == 0 {
                    assert_eq!(got, 1, "all metrics tie when no ones were sent");
                }
            }
        }
    }

    #[test]
    fn threshold_limits() {
        let quiet = ReceiverConstants { sigma_s2: 0.0, ..rc() };
        assert!((detection_threshold(0.7, &quiet) - 0.5 * 0.7 * quiet.signal_current).abs() < 1e-18);
        assert_eq!(detection_threshold(0.0, &rc()), 0.0);
        for k in 1..50 {
            let h = k as f64 * 0.02;
            assert!(detection_threshold(h, &rc()) < 0.5 * h * rc().signal_current);
        }
    }

    #[test]
    fn detection_noiseless_and_wrong_quadrant() {
        let rc = rc();
        let bits = [true, false, false, true];
        let w = noiseless(&bits, 0, 0.4, &rc);
        let tau = detection_threshold(0.4, &rc);
        assert_eq!(detect_bits(&w, 1, tau), bits.to_vec());
        assert_eq!(count_bit_errors(&w, 1, tau), 0);
        assert_eq!(detect_bits(&w, 3, tau), vec![false; 4]);
        assert_eq!(count_bit_errors(&w, 3, tau), 2);
    }
}

//! Synthesizes one observation window and runs both trackers and the OOK
//! detector on it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uavfso::channel::{sample_channel, ChannelSampler};
use uavfso::config::{dbm_to_watts, derive_constants, SystemParams};
use uavfso::link_sim::{process_window, synth_window, Mode};
use uavfso::receiver::{
    count_bit_errors, detection_threshold, estimate_channel_blind, track_blind, track_known_csi, ReceiverConstants,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = SystemParams { tx_power: dbm_to_watts(-15.0), ..SystemParams::default() };
    let rc = ReceiverConstants::new(&derive_constants(&p)?, p.window_len);
    let sampler = ChannelSampler::new(&p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let draw = sample_channel(&mut rng, &sampler);
    let w = synth_window(&mut rng, &draw, &rc);
    println!("true capture: {}, h = {:.4e}, ones m = {}", draw.capture, draw.h, w.m);
    let known = track_known_csi(&w, draw.h, w.m, &rc);
    let (h_hat, r) = estimate_channel_blind(&w, &rc);
    let blind = track_blind(&w, h_hat, r, &rc);
    println!("known-CSI pick: quadrant {}", known.quadrant);
    println!("blind pick:     quadrant {} (h_hat = {h_hat:.4e}, R = {r:.3})", blind.quadrant);
    let tau = detection_threshold(h_hat, &rc);
    println!("blind bit errors: {} of {}", count_bit_errors(&w, blind.quadrant, tau), p.window_len);
    let o = process_window(&w, &draw, Mode::Blind, &rc);
    println!("window outcome: {o:?}");
    Ok(())
}

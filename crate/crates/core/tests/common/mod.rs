#![allow(dead_code)]

use passby::detector::{DetectorConfig, NoiseRange};
use passby::synth::{self, PassByEvent, SynthConfig};
use passby::{GroundTruth, PressureSignal};

pub const SEVEN_TIMES: [f64; 7] = [14.0, 23.0, 32.5, 42.0, 52.0, 62.0, 75.0];

/// 89.5 s at 48 kHz, seven pass-bys at least 8 s apart, every peak at least
/// ten times the noise RMS.
pub fn seven_event_config(seed: u64, level: f64) -> SynthConfig {
    let events = SEVEN_TIMES
        .iter()
        .enumerate()
        .map(|(i, &t0)| PassByEvent {
            t0_s: t0,
            v_mps: 12.0 + i as f64,
            d_m: 5.0,
            source_level: level * (1.0 + 0.1 * i as f64),
        })
        .collect();
    SynthConfig {
        duration_s: 89.5,
        sample_rate_hz: 48_000.0,
        events,
        noise_amplitude: level / 10.0,
        rng_seed: seed,
    }
}

pub fn seven_event_noise() -> Vec<NoiseRange> {
    vec![NoiseRange::new(0.0, 6.0), NoiseRange::new(84.0, 89.5)]
}

pub fn seven_event(seed: u64) -> (PressureSignal, GroundTruth) {
    synth::synthesize(&seven_event_config(seed, 0.05)).unwrap()
}

/// Two pass-bys 1.5 s apart in 60 s.
pub fn close_pair(seed: u64) -> (PressureSignal, GroundTruth) {
    synth::synthesize(&SynthConfig {
        duration_s: 60.0,
        sample_rate_hz: 48_000.0,
        events: vec![PassByEvent::new(25.0, 0.05), PassByEvent::new(26.5, 0.05)],
        noise_amplitude: 0.005,
        rng_seed: seed,
    })
    .unwrap()
}

pub fn close_pair_config(t_c_s: f64, sigma_s: f64) -> DetectorConfig {
    let mut c = DetectorConfig::with_noise_ranges(vec![
        NoiseRange::new(0.0, 10.0),
        NoiseRange::new(45.0, 60.0),
    ]);
    c.t_c_s = t_c_s;
    c.sigma_s = Some(sigma_s);
    c
}

/// Brute-force full convolution with 1-based indices: output k (1..=m+n-1)
/// sums x(j) h(k-j+1) for j from max(1, k+1-n) to min(k, m).
pub fn one_based_convolution(x: &[f64], h: &[f64]) -> Vec<f64> {
    let (m, n) = (x.len() as i64, h.len() as i64);
    let mut out = Vec::new();
    for k in 1..=(m + n - 1) {
        let mut acc = 0.0;
        let mut j = (k + 1 - n).max(1);
        while j <= k.min(m) {
            acc += x[(j - 1) as usize] * h[(k - j) as usize];
            j += 1;
        }
        out.push(acc);
    }
    out
}

mod common;

use passby::detector::{self, ConvolutionBackend, DetectorConfig, NoiseRange, NoiseSource};
use passby::synth::{self, PassByEvent, SynthConfig};
use passby::{Error, PressureSignal};
use proptest::prelude::*;

fn seven_config() -> DetectorConfig {
    DetectorConfig::with_noise_ranges(common::seven_event_noise())
}

#[test]
fn seven_events_found_at_defaults() {
    let (sig, truth) = common::seven_event(11);
    let det = detector::detect(&sig, &seven_config()).unwrap();
    let times: Vec<f64> = det.events.iter().map(|e| e.time_s).collect();
    assert_eq!(times.len(), 7, "{times:?}");
    for (d, t) in times.iter().zip(truth.times()) {
        assert!((d - t).abs() <= 1.0, "{d} vs {t}");
    }
}

#[test]
fn every_event_is_a_negative_minimum_above_threshold() {
    let (sig, _) = common::seven_event(2);
    let mut cfg = seven_config();
    cfg.q = 0.5;
    let det = detector::detect(&sig, &cfg).unwrap();
    assert!(!det.events.is_empty());
    let a = &det.analysis;
    for e in &det.events {
        assert!(e.w2_value < 0.0);
        assert!(e.w_level >= det.threshold);
        assert!((0.0..=a.recording_duration_s).contains(&e.time_s));
        let j = a.smoothed.index_of(e.time_s).unwrap();
        assert!(a.second.values[j - 1] > a.second.values[j]);
    }
}

#[test]
fn detection_is_deterministic() {
    let (sig, _) = common::seven_event(4);
    let a = detector::detect(&sig, &seven_config()).unwrap();
    let b = detector::detect(&sig, &seven_config()).unwrap();
    assert_eq!(a.events, b.events);
}

#[test]
fn direct_and_fast_backends_agree() {
    let (sig, _) = common::seven_event(5);
    let mut cfg = seven_config();
    cfg.decimation = 4800;
    let fast = detector::detect(&sig, &cfg).unwrap();
    cfg.backend = ConvolutionBackend::Direct;
    let direct = detector::detect(&sig, &cfg).unwrap();
    let t = |d: &detector::Detection| d.events.iter().map(|e| e.time_s).collect::<Vec<_>>();
    assert_eq!(t(&fast), t(&direct));
}

#[test]
fn pure_noise_gives_nothing() {
    for seed in 0..3 {
        let (sig, _) = synth::synthesize(&SynthConfig {
            duration_s: 60.0,
            sample_rate_hz: 48_000.0,
            events: vec![],
            noise_amplitude: 0.01,
            rng_seed: seed,
        })
        .unwrap();
        let cfg = DetectorConfig::with_noise_ranges(vec![NoiseRange::new(0.0, 60.0)]);
        assert!(detector::detect(&sig, &cfg).unwrap().events.is_empty());
    }
}

#[test]
fn noise_level_matches_generator() {
    let (sig, _) = common::seven_event(0);
    let det = detector::detect(&sig, &seven_config()).unwrap();
    let want = synth::mean_abs_noise(0.005);
    assert!(
        (det.noise.n_bar - want).abs() / want < 0.05,
        "{} vs {want}",
        det.noise.n_bar
    );
    assert!((det.noise.total_noise_duration_s - 11.5).abs() < 0.02);
}

#[test]
fn single_event_peak_time() {
    let (sig, _) = synth::synthesize(&SynthConfig {
        duration_s: 60.0,
        sample_rate_hz: 48_000.0,
        events: vec![PassByEvent::new(30.0, 0.1)],
        noise_amplitude: 0.0,
        rng_seed: 0,
    })
    .unwrap();
    // no background: borrow a level from a quiet window in the tail
    let mut cfg = DetectorConfig::with_noise_ranges(vec![NoiseRange::new(55.0, 60.0)]);
    cfg.q = 1.0;
    let det = detector::detect(&sig, &cfg).unwrap();
    let peak = det
        .events
        .iter()
        .max_by(|a, b| a.w_level.total_cmp(&b.w_level))
        .unwrap();
    assert!((peak.time_s - 30.0).abs() <= 0.2, "{}", peak.time_s);
}

#[test]
fn q_zero_keeps_every_candidate_and_huge_q_keeps_none() {
    let (sig, _) = common::seven_event(1);
    let cfg = seven_config();
    let a = detector::analyze(&sig, &cfg).unwrap();
    let sweep = detector::threshold_sweep(&sig, &cfg, &[0.0, 1e12]).unwrap();
    assert_eq!(sweep[0].1, a.candidates.len());
    assert_eq!(sweep[1].1, 0);
    assert!(detector::threshold_sweep(&sig, &cfg, &[1.0, 0.5]).is_err());
    assert!(detector::threshold_sweep(&sig, &cfg, &[-1.0]).is_err());
}

/// Counts frozen from one run of the seed-9 seven-event fixture at
/// sigma = t_c / 4, where the smoother lets a few noise bumps through.
#[test]
fn golden_threshold_sweep() {
    let (sig, _) = common::seven_event(9);
    let mut cfg = seven_config();
    cfg.sigma_s = Some(0.75);
    let sweep = detector::threshold_sweep(&sig, &cfg, &[0.5, 1.0, 1.5, 3.0]).unwrap();
    let counts: Vec<usize> = sweep.iter().map(|&(_, c)| c).collect();
    assert_eq!(counts, vec![181, 97, 16, 16]);
}

#[test]
fn subset_under_higher_threshold() {
    let (sig, _) = common::seven_event(6);
    let a = detector::analyze(&sig, &seven_config()).unwrap();
    let mut prev = a.selected_indices(0.0);
    for q in [0.5, 1.0, 1.5, 2.0, 4.0, 8.0] {
        let cur = a.selected_indices(q);
        assert!(cur.iter().all(|j| prev.contains(j)), "q = {q}");
        prev = cur;
    }
}

#[test]
fn refractory_merge_reduces_count() {
    let (sig, _) = common::close_pair(0);
    let mut cfg = common::close_pair_config(3.0, 0.3);
    let n0 = detector::detect(&sig, &cfg).unwrap().events.len();
    cfg.refractory_s = 3.0;
    let n1 = detector::detect(&sig, &cfg).unwrap().events.len();
    assert_eq!((n0, n1), (2, 1));
}

#[test]
fn close_pair_sigma_examples() {
    let (sig, _) = common::close_pair(3);
    let n = |t_c, sigma| {
        detector::detect(&sig, &common::close_pair_config(t_c, sigma))
            .unwrap()
            .events
            .len()
    };
    assert_eq!(n(3.0, 0.3), 2);
    assert_eq!(n(6.0, 1.0), 1);
}

#[test]
fn auto_noise_is_close_to_ranges() {
    let (sig, _) = common::seven_event(3);
    let ranged = detector::detect(&sig, &seven_config()).unwrap();
    let mut cfg = seven_config();
    cfg.noise = NoiseSource::Auto;
    let auto = detector::detect(&sig, &cfg).unwrap();
    assert!((auto.noise.n_bar / ranged.noise.n_bar - 1.0).abs() < 0.1);
    assert_eq!(auto.events.len(), 7);
}

#[test]
fn configuration_errors() {
    let (sig, _) = common::close_pair(0);
    let cfg = DetectorConfig::default();
    assert!(matches!(
        detector::detect(&sig, &cfg),
        Err(Error::InvalidArgument(_))
    ));
    let cfg = DetectorConfig::with_noise_ranges(vec![NoiseRange::new(50.0, 70.0)]);
    assert!(matches!(
        detector::detect(&sig, &cfg),
        Err(Error::NoiseRangeOutOfBounds { .. })
    ));
    let short = PressureSignal::new(vec![0.0; 48_000 * 5], 48_000.0).unwrap();
    let cfg = DetectorConfig::with_noise_ranges(vec![NoiseRange::new(0.0, 1.0)]);
    assert!(matches!(
        detector::detect(&short, &cfg),
        Err(Error::RecordingTooShort { .. })
    ));
}

fn one_event_signal(t0: f64, level: f64, seed: u64) -> PressureSignal {
    synth::synthesize(&SynthConfig {
        duration_s: 40.0,
        sample_rate_hz: 4_800.0,
        events: vec![PassByEvent::new(t0, level)],
        noise_amplitude: level / 10.0,
        rng_seed: seed,
    })
    .unwrap()
    .0
}

fn small_config() -> DetectorConfig {
    let mut c = DetectorConfig::with_noise_ranges(vec![NoiseRange::new(0.0, 6.0)]);
    c.decimation = 48;
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn counts_fall_as_q_rises(seed in any::<u64>(), level in 0.01f64..0.2) {
        let sig = one_event_signal(20.0, level, seed);
        let qs: Vec<f64> = (1..=16).map(|i| i as f64 * 0.25).collect();
        let sweep = detector::threshold_sweep(&sig, &small_config(), &qs).unwrap();
        for w in sweep.windows(2) {
            prop_assert!(w[1].1 <= w[0].1);
        }
    }

    #[test]
    fn scaling_keeps_selection(seed in any::<u64>(), gain in prop::sample::select(vec![0.1, 10.0, 1000.0])) {
        let sig = one_event_signal(20.0, 0.05, seed);
        let cfg = small_config();
        let a = detector::analyze(&sig, &cfg).unwrap();
        let b = detector::analyze(&sig.scaled(gain).unwrap(), &cfg).unwrap();
        prop_assert_eq!(a.selected_indices(1.5), b.selected_indices(1.5));
    }

    /// Shifting the content by a whole number of envelope samples shifts the
    /// detections by the same amount.
    #[test]
    fn translation_covariance(seed in any::<u64>(), shift_blocks in 1usize..300) {
        let base = one_event_signal(20.0, 0.05, seed);
        let shift = shift_blocks * 48;
        let mut moved = vec![0.0; shift];
        moved.extend_from_slice(&base.samples()[..base.len() - shift]);
        let moved = PressureSignal::new(moved, base.sample_rate_hz()).unwrap();
        let dt = shift as f64 / base.sample_rate_hz();
        // range edges sit between envelope samples so rounding cannot move them

        let mut cfg = small_config();
        cfg.noise = NoiseSource::Ranges(vec![NoiseRange::new(7.005, 12.005)]);
        let a = detector::detect(&base, &cfg).unwrap();
        let mut cfg_b = cfg.clone();
        cfg_b.noise = NoiseSource::Ranges(vec![NoiseRange::new(7.005 + dt, 12.005 + dt)]);
        let b = detector::detect(&moved, &cfg_b).unwrap();
        prop_assert_eq!(a.noise.n_bar.to_bits(), b.noise.n_bar.to_bits());
        let ta: Vec<f64> = a.events.iter().map(|e| e.time_s + dt).filter(|t| *t <= 40.0 - 7.0).collect();
        let tb: Vec<f64> = b.events.iter().map(|e| e.time_s).filter(|t| *t >= dt + 7.0 && *t <= 40.0 - 7.0).collect();
        let ta: Vec<f64> = ta.into_iter().filter(|t| *t >= dt + 7.0).collect();
        prop_assert_eq!(ta.len(), tb.len());
        for (x, y) in ta.iter().zip(&tb) {
            prop_assert!((x - y).abs() < 1e-6);
        }
    }
}

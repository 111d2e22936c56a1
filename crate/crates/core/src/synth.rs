//! Synthetic roadside recordings with known pass-by instants.
//!
//! Each vehicle contributes a broadband carrier (uniform white noise in
//! [-1, 1)) shaped by the pressure envelope of a point source on a straight
//! lane: intensity falls as `1 / r^2`, so pressure amplitude falls as `1 / r`
//! with `r^2 = d^2 + v^2 (t - t0)^2`. Seeded Gaussian background noise is
//! added on top.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::audio_io::PressureSignal;
use crate::error::{Error, Result};

pub const DEFAULT_SPEED_MPS: f64 = 14.0;
pub const DEFAULT_DISTANCE_M: f64 = 5.0;
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 48_000.0;

/// Mean absolute value of the uniform [-1, 1) carrier.
pub const CARRIER_MEAN_ABS: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassByEvent {
    /// Closest-approach time.
    pub t0_s: f64,
    pub v_mps: f64,
    /// Microphone to lane-centre distance.
    pub d_m: f64,
    /// Peak pressure amplitude at closest approach.
    pub source_level: f64,
}

impl PassByEvent {
    pub fn new(t0_s: f64, source_level: f64) -> Self {
        Self {
            t0_s,
            v_mps: DEFAULT_SPEED_MPS,
            d_m: DEFAULT_DISTANCE_M,
            source_level,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.t0_s.is_finite() {
            return Err(Error::invalid("pass-by time must be finite"));
        }
        for (name, v) in [
            ("speed", self.v_mps),
            ("distance", self.d_m),
            ("source level", self.source_level),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Amplitude `tau` seconds from closest approach.
    pub fn envelope_at_offset(&self, tau_s: f64) -> f64 {
        let x = self.v_mps * tau_s;
        self.source_level * self.d_m / (self.d_m * self.d_m + x * x).sqrt()
    }

    fn carrier_seed(&self, base: u64) -> u64 {
        let mut h = base ^ 0x9E37_79B9_7F4A_7C15;
        for bits in [
            self.t0_s.to_bits(),
            self.v_mps.to_bits(),
            self.d_m.to_bits(),
            self.source_level.to_bits(),
        ] {
            h = splitmix64(h ^ bits);
        }
        h
    }
}

/// Pressure amplitude of `event` at recording time `t_s`.
pub fn passby_envelope(event: &PassByEvent, t_s: f64) -> f64 {
    event.envelope_at_offset(t_s - event.t0_s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub events: Vec<PassByEvent>,
    /// RMS of the Gaussian background.
    pub noise_amplitude: f64,
    pub rng_seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::invalid(format!(
                "duration must be positive, got {}",
                self.duration_s
            )));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if !(self.noise_amplitude.is_finite() && self.noise_amplitude >= 0.0) {
            return Err(Error::invalid("noise amplitude must be non-negative"));
        }
        for e in &self.events {
            e.validate()?;
            if e.t0_s < 0.0 || e.t0_s > self.duration_s {
                return Err(Error::invalid(format!(
                    "pass-by at {} s lies outside 0..{} s",
                    e.t0_s, self.duration_s
                )));
            }
        }
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }
}

/// True pass-by instants and the events that produced them.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub events: Vec<PassByEvent>,
}

impl GroundTruth {
    /// Closest-approach times, ascending.
    pub fn times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self.events.iter().map(|e| e.t0_s).collect();
        t.sort_by(f64::total_cmp);
        t
    }
}

/// Mean |x| of zero-mean Gaussian noise with the given RMS.
pub fn mean_abs_noise(noise_amplitude: f64) -> f64 {
    noise_amplitude * (2.0 / std::f64::consts::PI).sqrt()
}

pub fn synthesize(config: &SynthConfig) -> Result<(PressureSignal, GroundTruth)> {
    config.validate()?;
    let n = config.sample_count();
    let rate = config.sample_rate_hz;
    let mut samples = vec![0.0f64; n];

    // Each carrier is seeded from the event itself, so an event sounds the
    // same whichever other events share the recording.
    for event in &config.events {
        let mut rng = ChaCha8Rng::seed_from_u64(event.carrier_seed(config.rng_seed));
        for (i, s) in samples.iter_mut().enumerate() {
            let carrier = 2.0 * rng.random::<f64>() - 1.0;
            *s += passby_envelope(event, i as f64 / rate) * carrier;
        }
    }

    if config.noise_amplitude > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(config.rng_seed));
        let normal =
            Normal::new(0.0, config.noise_amplitude).map_err(|e| Error::invalid(e.to_string()))?;
        for s in samples.iter_mut() {
            *s += normal.sample(&mut rng);
        }
    }

    let signal = PressureSignal::new(samples, rate)?;
    Ok((
        signal,
        GroundTruth {
            events: config.events.clone(),
        },
    ))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

//! Pass-by detection on the smoothed envelope.
//!
//! The recording is rectified, block-mean decimated, smoothed with a unit-peak
//! Gaussian and differenced twice. Negative local minima of the second
//! difference mark peaks and slope modulations of the envelope; a minimum is
//! kept when the smoothed level there reaches `q` times the background level
//! expressed in the smoothed signal's units (`n_bar * kernel gain`).

use serde::{Deserialize, Serialize};

use crate::audio_io::PressureSignal;
use crate::dsp::{self, DerivedSignal};
use crate::error::{Error, Result};

pub const DEFAULT_T_C_S: f64 = 3.0;
pub const DEFAULT_Q: f64 = 1.5;
pub const DEFAULT_DECIMATION: usize = 480;

/// Default `sigma / t_c`. The kernel is cut off at `t_c` from its centre, so
/// its end taps are `exp(-t_c^2 / (2 sigma^2))`; at `t_c / 6` that is about
/// 1.5e-8. A visible step at the kernel ends turns into sample-rate noise in
/// the second difference and floods the detector with spurious minima.
pub const DEFAULT_SIGMA_PER_T_C: f64 = 1.0 / 6.0;

/// Block length and percentile used by the automatic noise estimate.
pub const AUTO_NOISE_BLOCK_S: f64 = 1.0;
pub const AUTO_NOISE_PERCENTILE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseRange {
    pub start_s: f64,
    pub end_s: f64,
}

impl NoiseRange {
    pub fn new(start_s: f64, end_s: f64) -> Self {
        Self { start_s, end_s }
    }

    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// Where the background level comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NoiseSource {
    /// Vehicle-free sections chosen by the user, on the recording's time axis.
    Ranges(Vec<NoiseRange>),
    /// Percentile of 1 s block means of the envelope. Opt-in only.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConvolutionBackend {
    Direct,
    Fast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub t_c_s: f64,
    /// `None` means `t_c * DEFAULT_SIGMA_PER_T_C`.
    pub sigma_s: Option<f64>,
    pub q: f64,
    pub decimation: usize,
    pub noise: NoiseSource,
    pub refractory_s: f64,
    pub backend: ConvolutionBackend,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            t_c_s: DEFAULT_T_C_S,
            sigma_s: None,
            q: DEFAULT_Q,
            decimation: DEFAULT_DECIMATION,
            noise: NoiseSource::Ranges(Vec::new()),
            refractory_s: 0.0,
            backend: ConvolutionBackend::Fast,
        }
    }
}

impl DetectorConfig {
    pub fn with_noise_ranges(ranges: Vec<NoiseRange>) -> Self {
        Self {
            noise: NoiseSource::Ranges(ranges),
            ..Self::default()
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma_s.unwrap_or(self.t_c_s * DEFAULT_SIGMA_PER_T_C)
    }

    /// Checks everything that does not depend on the recording.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        positive("t_c", self.t_c_s)?;
        positive("sigma", self.sigma())?;
        positive("q", self.q)?;
        if self.decimation < 1 {
            return Err(Error::invalid("decimation must be at least 1"));
        }
        if !(self.refractory_s.is_finite() && self.refractory_s >= 0.0) {
            return Err(Error::invalid(format!(
                "refractory gap must be non-negative, got {}",
                self.refractory_s
            )));
        }
        if let NoiseSource::Ranges(ranges) = &self.noise {
            validate_ranges(ranges)?;
        }
        Ok(())
    }
}

fn validate_ranges(ranges: &[NoiseRange]) -> Result<()> {
    if ranges.is_empty() {
        return Err(Error::invalid("no noise ranges given"));
    }
    for r in ranges {
        if !(r.start_s.is_finite() && r.end_s.is_finite() && r.start_s < r.end_s) {
            return Err(Error::invalid(format!(
                "noise range {}..{} is empty or reversed",
                r.start_s, r.end_s
            )));
        }
    }
    let mut sorted = ranges.to_vec();
    sorted.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    for pair in sorted.windows(2) {
        if pair[1].start_s < pair[0].end_s {
            return Err(Error::invalid(format!(
                "noise ranges {}..{} and {}..{} overlap",
                pair[0].start_s, pair[0].end_s, pair[1].start_s, pair[1].end_s
            )));
        }
    }
    Ok(())
}

/// Mean rectified background level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    pub n_bar: f64,
    pub total_noise_duration_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub time_s: f64,
    pub w_level: f64,
    pub w2_value: f64,
}

/// Mean of the rectified samples whose time falls in the union of `ranges`
/// (half-open, `[start, end)`).
pub fn noise_profile(rectified: &PressureSignal, ranges: &[NoiseRange]) -> Result<NoiseProfile> {
    rectified.ensure_non_empty()?;
    let duration = rectified.duration_s();
    let tol = 1e-9 * duration.max(1.0);
    for r in ranges {
        if r.start_s.is_nan() || r.end_s.is_nan() || r.start_s >= r.end_s {
            return Err(Error::invalid(format!(
                "noise range {}..{} is empty or reversed",
                r.start_s, r.end_s
            )));
        }
        if r.start_s < -tol || r.end_s > duration + tol {
            return Err(Error::NoiseRangeOutOfBounds {
                start_s: r.start_s,
                end_s: r.end_s,
                duration_s: duration,
            });
        }
    }
    let (mut sum, mut count) = (0.0, 0usize);
    for (i, &v) in rectified.samples().iter().enumerate() {
        let t = rectified.time_at(i);
        if ranges.iter().any(|r| t >= r.start_s && t < r.end_s) {
            sum += v;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyNoiseSelection);
    }
    Ok(NoiseProfile {
        n_bar: sum / count as f64,
        total_noise_duration_s: count as f64 / rectified.sample_rate_hz(),
    })
}

/// Background estimate without user-chosen sections: the given percentile
/// (nearest rank) of block means over blocks of `block_s` seconds.
pub fn auto_noise_profile(
    rectified: &PressureSignal,
    block_s: f64,
    percentile: f64,
) -> Result<NoiseProfile> {
    rectified.ensure_non_empty()?;
    if !(block_s > 0.0 && (0.0..=100.0).contains(&percentile)) {
        return Err(Error::invalid(
            "auto noise needs block_s > 0 and percentile in [0, 100]",
        ));
    }
    let block = ((block_s * rectified.sample_rate_hz()).round() as usize).max(1);
    let mut means: Vec<f64> = rectified
        .samples()
        .chunks(block)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let rank = ((percentile / 100.0 * means.len() as f64).ceil() as usize).clamp(1, means.len());
    Ok(NoiseProfile {
        n_bar: means[rank - 1],
        total_noise_duration_s: block as f64 / rectified.sample_rate_hz(),
    })
}

/// Indices of negative local minima. A flat run of equal values counts once,
/// at its first index, when both outer neighbours are strictly larger.
pub fn find_negative_minima(w2: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    if w2.len() < 3 {
        return out;
    }
    let mut j = 1;
    while j + 1 < w2.len() {
        let v = w2[j];
        if v < 0.0 && w2[j - 1] > v {
            let mut end = j;
            while end + 1 < w2.len() && w2[end + 1] == v {
                end += 1;
            }
            if end + 1 < w2.len() && w2[end + 1] > v {
                out.push(j);
            }
            j = end + 1;
        } else {
            j += 1;
        }
    }
    out
}

/// Everything computed before threshold selection; selection at any `q` is
/// then cheap.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub config: DetectorConfig,
    pub noise: NoiseProfile,
    pub kernel_gain: f64,
    pub recording_duration_s: f64,
    pub rectified: PressureSignal,
    /// Rectified and decimated.
    pub envelope: PressureSignal,
    /// `w`
    pub smoothed: DerivedSignal,
    pub first: DerivedSignal,
    pub second: DerivedSignal,
    /// Every negative minimum of the second difference.
    pub minima: Vec<usize>,
    /// Minima whose time lies inside the recording.
    pub candidates: Vec<usize>,
}

impl Analysis {
    /// `q * n_bar * kernel gain`
    pub fn threshold(&self, q: f64) -> f64 {
        q * self.noise.n_bar * self.kernel_gain
    }

    pub fn selected_indices(&self, q: f64) -> Vec<usize> {
        let thr = self.threshold(q);
        self.candidates
            .iter()
            .copied()
            .filter(|&j| self.smoothed.values[j] >= thr)
            .collect()
    }

    fn event_at(&self, j: usize) -> DetectionEvent {
        DetectionEvent {
            time_s: self.smoothed.time_at(j),
            w_level: self.smoothed.values[j],
            w2_value: self.second.values[j],
        }
    }

    /// Selected events at `q` after the refractory merge, in time order.
    pub fn events(&self, q: f64, refractory_s: f64) -> Vec<DetectionEvent> {
        let raw = self
            .selected_indices(q)
            .into_iter()
            .map(|j| self.event_at(j));
        refractory_merge(raw, refractory_s)
    }
}

/// Drops any event that falls within `gap_s` after the last kept one.
pub fn refractory_merge(
    events: impl IntoIterator<Item = DetectionEvent>,
    gap_s: f64,
) -> Vec<DetectionEvent> {
    let mut kept: Vec<DetectionEvent> = Vec::new();
    for e in events {
        match kept.last() {
            Some(last) if gap_s > 0.0 && e.time_s - last.time_s <= gap_s => {}
            _ => kept.push(e),
        }
    }
    kept
}

#[derive(Debug, Clone)]
pub struct Detection {
    pub events: Vec<DetectionEvent>,
    pub noise: NoiseProfile,
    pub threshold: f64,
    pub analysis: Analysis,
}

pub fn analyze(signal: &PressureSignal, config: &DetectorConfig) -> Result<Analysis> {
    config.validate()?;
    signal.ensure_non_empty()?;
    let duration = signal.duration_s();
    if duration <= 2.0 * config.t_c_s {
        return Err(Error::RecordingTooShort {
            recording_s: duration,
            required_s: 2.0 * config.t_c_s,
        });
    }

    let rectified = dsp::rectify(signal);
    let envelope = dsp::decimate(&rectified, config.decimation)?;

    let noise = match &config.noise {
        NoiseSource::Ranges(ranges) => {
            for r in ranges {
                if r.start_s < 0.0 || r.end_s > duration + 1e-9 {
                    return Err(Error::NoiseRangeOutOfBounds {
                        start_s: r.start_s,
                        end_s: r.end_s,
                        duration_s: duration,
                    });
                }
            }
            noise_profile(&envelope, ranges)?
        }
        NoiseSource::Auto => {
            auto_noise_profile(&envelope, AUTO_NOISE_BLOCK_S, AUTO_NOISE_PERCENTILE)?
        }
    };

    let kernel = dsp::make_gaussian(config.t_c_s, config.sigma(), envelope.sample_rate_hz())?;
    if envelope.len() < kernel.len() {
        return Err(Error::RecordingTooShort {
            recording_s: duration,
            required_s: kernel.len() as f64 / envelope.sample_rate_hz(),
        });
    }
    let smoothed = match config.backend {
        ConvolutionBackend::Direct => dsp::convolve_direct(&envelope, &kernel)?,
        ConvolutionBackend::Fast => dsp::convolve_fast(&envelope, &kernel)?,
    };
    let first = dsp::derivative(&smoothed)?;
    let second = dsp::derivative(&first)?;

    let minima = find_negative_minima(&second.values);
    let candidates = minima
        .iter()
        .copied()
        .filter(|&j| {
            let t = smoothed.time_at(j);
            (0.0..=duration).contains(&t)
        })
        .collect();

    Ok(Analysis {
        config: config.clone(),
        noise,
        kernel_gain: kernel.gain(),
        recording_duration_s: duration,
        rectified,
        envelope,
        smoothed,
        first,
        second,
        minima,
        candidates,
    })
}

pub fn detect(signal: &PressureSignal, config: &DetectorConfig) -> Result<Detection> {
    let analysis = analyze(signal, config)?;
    let events = analysis.events(config.q, config.refractory_s);
    Ok(Detection {
        events,
        noise: analysis.noise,
        threshold: analysis.threshold(config.q),
        analysis,
    })
}

/// Event count at each `q` (ascending, non-negative), sharing one analysis.
pub fn threshold_sweep(
    signal: &PressureSignal,
    config: &DetectorConfig,
    q_values: &[f64],
) -> Result<Vec<(f64, usize)>> {
    if q_values.iter().any(|q| !(q.is_finite() && *q >= 0.0)) {
        return Err(Error::invalid("q values must be finite and non-negative"));
    }
    if q_values.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("q values must be sorted ascending"));
    }
    let analysis = analyze(signal, config)?;
    Ok(q_values
        .iter()
        .map(|&q| (q, analysis.events(q, config.refractory_s).len()))
        .collect())
}

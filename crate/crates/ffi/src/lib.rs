//! C interface to the `passby` detector.
//!
//! Signals and detection results live behind opaque handles that the caller
//! releases with the matching `*_free` function. Every function returns a
//! [`PassbyStatus`]; on failure, [`passby_last_error_message`] describes the
//! most recent error on the calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use passby::audio_io::{self, BitDepth};
use passby::detector::{self, ConvolutionBackend, DetectorConfig, NoiseRange, NoiseSource};
use passby::{eval, synth, DetectionEvent, Error, NoiseProfile, PassByEvent, PressureSignal};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PassbyStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    UnsupportedFormat = 4,
    Data = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PassbyBitDepth {
    Pcm16 = 0,
    Pcm24 = 1,
    Float32 = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PassbyBackend {
    Fast = 0,
    Direct = 1,
}

/// Detector settings. `sigma_s <= 0` selects the default width for `t_c_s`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassbyDetectorConfig {
    pub t_c_s: f64,
    pub sigma_s: f64,
    pub q: f64,
    pub decimation: usize,
    pub refractory_s: f64,
    pub backend: PassbyBackend,
    /// Nonzero: estimate the background level instead of using ranges.
    pub auto_noise: u8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassbyNoiseRange {
    pub start_s: f64,
    pub end_s: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassbyEvent {
    pub time_s: f64,
    pub w_level: f64,
    pub w2_value: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassbySynthEvent {
    pub t0_s: f64,
    pub v_mps: f64,
    pub d_m: f64,
    pub source_level: f64,
}

/// Counts, and percentages of the event count. The percentages are only
/// meaningful when `has_ratios` is nonzero (there was at least one event).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PassbyEvalReport {
    pub events: usize,
    pub detections: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub efficacy: usize,
    pub has_ratios: u8,
    pub detections_pct: f64,
    pub false_positives_pct: f64,
    pub false_negatives_pct: f64,
    pub efficacy_pct: f64,
}

/// Opaque recording.
pub struct PassbySignal {
    inner: PressureSignal,
}

/// Opaque detection result.
pub struct PassbyDetections {
    events: Vec<DetectionEvent>,
    noise: NoiseProfile,
    threshold: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> PassbyStatus {
    match err {
        Error::InvalidArgument(_) => PassbyStatus::InvalidArgument,
        Error::Io { .. } => PassbyStatus::Io,
        Error::UnsupportedCodec { .. } | Error::MalformedWav { .. } => {
            PassbyStatus::UnsupportedFormat
        }
        _ => PassbyStatus::Data,
    }
}

struct Failure(PassbyStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(PassbyStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(PassbyStatus::InvalidArgument, msg.into())
}

/// Runs `f`, records any failure for `passby_last_error_message` and turns
/// panics into `Panic`.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PassbyStatus {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            PassbyStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal error: {msg}"));
            PassbyStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(data: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        Ok(&[])
    } else if data.is_null() {
        Err(null(what))
    } else {
        Ok(std::slice::from_raw_parts(data, len))
    }
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, Failure> {
    if path.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(path)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| invalid("path is not valid UTF-8"))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message for the last failed call on this thread, or null if the last call
/// succeeded. Valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn passby_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Copies `len` samples into a new signal.
///
/// # Safety
/// `samples` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn passby_signal_from_samples(
    samples: *const f64,
    len: usize,
    sample_rate_hz: f64,
    out: *mut *mut PassbySignal,
) -> PassbyStatus {
    guard(|| {
        let data = slice(samples, len, "samples")?;
        let inner = PressureSignal::new(data.to_vec(), sample_rate_hz)?;
        write_out(out, PassbySignal { inner })
    })
}

/// Reads a PCM or float WAV file, mixing channels down to mono.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn passby_signal_read_wav(
    path: *const c_char,
    out: *mut *mut PassbySignal,
) -> PassbyStatus {
    guard(|| {
        let inner = audio_io::read_wav(path_arg(path)?)?;
        write_out(out, PassbySignal { inner })
    })
}

/// Writes a mono WAV file. `clipped`, if not null, receives the number of
/// samples clipped to full scale.
///
/// # Safety
/// `signal` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn passby_signal_write_wav(
    signal: *const PassbySignal,
    path: *const c_char,
    depth: PassbyBitDepth,
    clipped: *mut usize,
) -> PassbyStatus {
    guard(|| {
        let sig = signal.as_ref().ok_or_else(|| null("signal"))?;
        let depth = match depth {
            PassbyBitDepth::Pcm16 => BitDepth::Pcm16,
            PassbyBitDepth::Pcm24 => BitDepth::Pcm24,
            PassbyBitDepth::Float32 => BitDepth::Float32,
        };
        let report = audio_io::write_wav(&sig.inner, path_arg(path)?, depth)?;
        if !clipped.is_null() {
            *clipped = report.clipped;
        }
        Ok(())
    })
}

/// Sample count; 0 for a null handle.
///
/// # Safety
/// `signal` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn passby_signal_len(signal: *const PassbySignal) -> usize {
    signal.as_ref().map_or(0, |s| s.inner.len())
}

/// Sample rate in Hz; 0 for a null handle.
///
/// # Safety
/// `signal` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn passby_signal_sample_rate(signal: *const PassbySignal) -> f64 {
    signal.as_ref().map_or(0.0, |s| s.inner.sample_rate_hz())
}

/// Borrowed pointer to the samples, valid while the handle lives; null for a
/// null handle.
///
/// # Safety
/// `signal` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn passby_signal_samples(signal: *const PassbySignal) -> *const f64 {
    signal
        .as_ref()
        .map_or(ptr::null(), |s| s.inner.samples().as_ptr())
}

/// # Safety
/// `signal` must be null or come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn passby_signal_free(signal: *mut PassbySignal) {
    if !signal.is_null() {
        drop(Box::from_raw(signal));
    }
}

/// Default settings: `t_c` 3 s, default width, `q` 1.5, decimation 480.
#[no_mangle]
pub extern "C" fn passby_detector_config_default() -> PassbyDetectorConfig {
    let d = DetectorConfig::default();
    PassbyDetectorConfig {
        t_c_s: d.t_c_s,
        sigma_s: 0.0,
        q: d.q,
        decimation: d.decimation,
        refractory_s: d.refractory_s,
        backend: PassbyBackend::Fast,
        auto_noise: 0,
    }
}

/// Runs the detector. Unless `config.auto_noise` is set, `ranges` must list
/// at least one vehicle-free section in seconds.
///
/// # Safety
/// `signal` must come from this library; `config` must be readable;
/// `ranges` must point to `n_ranges` entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn passby_detect(
    signal: *const PassbySignal,
    config: *const PassbyDetectorConfig,
    ranges: *const PassbyNoiseRange,
    n_ranges: usize,
    out: *mut *mut PassbyDetections,
) -> PassbyStatus {
    guard(|| {
        let sig = signal.as_ref().ok_or_else(|| null("signal"))?;
        let c = config.as_ref().ok_or_else(|| null("config"))?;
        let ranges = slice(ranges, n_ranges, "ranges")?;
        let noise = if c.auto_noise != 0 {
            NoiseSource::Auto
        } else {
            NoiseSource::Ranges(
                ranges
                    .iter()
                    .map(|r| NoiseRange::new(r.start_s, r.end_s))
                    .collect(),
            )
        };
        let cfg = DetectorConfig {
            t_c_s: c.t_c_s,
            sigma_s: (c.sigma_s > 0.0).then_some(c.sigma_s),
            q: c.q,
            decimation: c.decimation,
            noise,
            refractory_s: c.refractory_s,
            backend: match c.backend {
                PassbyBackend::Fast => ConvolutionBackend::Fast,
                PassbyBackend::Direct => ConvolutionBackend::Direct,
            },
        };
        let det = detector::detect(&sig.inner, &cfg)?;
        write_out(
            out,
            PassbyDetections {
                events: det.events,
                noise: det.noise,
                threshold: det.threshold,
            },
        )
    })
}

/// # Safety
/// `det` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn passby_detections_len(det: *const PassbyDetections) -> usize {
    det.as_ref().map_or(0, |d| d.events.len())
}

/// # Safety
/// `det` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn passby_detections_get(
    det: *const PassbyDetections,
    index: usize,
    out: *mut PassbyEvent,
) -> PassbyStatus {
    guard(|| {
        let d = det.as_ref().ok_or_else(|| null("detections"))?;
        let out = out.as_mut().ok_or_else(|| null("output pointer"))?;
        let e = d.events.get(index).ok_or_else(|| {
            invalid(format!(
                "index {index} out of range for {} events",
                d.events.len()
            ))
        })?;
        *out = PassbyEvent {
            time_s: e.time_s,
            w_level: e.w_level,
            w2_value: e.w2_value,
        };
        Ok(())
    })
}

/// Background level used for the threshold; NaN for a null handle.
///
/// # Safety
/// `det` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn passby_detections_noise_level(det: *const PassbyDetections) -> f64 {
    det.as_ref().map_or(f64::NAN, |d| d.noise.n_bar)
}

/// Threshold on the smoothed envelope; NaN for a null handle.
///
/// # Safety
/// `det` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn passby_detections_threshold(det: *const PassbyDetections) -> f64 {
    det.as_ref().map_or(f64::NAN, |d| d.threshold)
}

/// # Safety
/// `det` must be null or come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn passby_detections_free(det: *mut PassbyDetections) {
    if !det.is_null() {
        drop(Box::from_raw(det));
    }
}

/// Scores detection times against true pass-by times.
///
/// # Safety
/// The time arrays must hold the given number of doubles; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn passby_evaluate(
    detections: *const f64,
    n_detections: usize,
    truth: *const f64,
    n_truth: usize,
    tolerance_s: f64,
    out: *mut PassbyEvalReport,
) -> PassbyStatus {
    guard(|| {
        let det = slice(detections, n_detections, "detections")?;
        let tru = slice(truth, n_truth, "truth")?;
        let out = out.as_mut().ok_or_else(|| null("output pointer"))?;
        let r = eval::report(det, tru, tolerance_s)?;
        let ratios = r.ratios;
        *out = PassbyEvalReport {
            events: r.events_e,
            detections: r.detections_d,
            false_positives: r.false_positives_p,
            false_negatives: r.false_negatives_n,
            efficacy: r.efficacy_eta,
            has_ratios: ratios.is_some() as u8,
            detections_pct: ratios.map_or(0.0, |x| x.detections),
            false_positives_pct: ratios.map_or(0.0, |x| x.false_positives),
            false_negatives_pct: ratios.map_or(0.0, |x| x.false_negatives),
            efficacy_pct: ratios.map_or(0.0, |x| x.efficacy),
        };
        Ok(())
    })
}

/// Synthesizes a recording with the given pass-bys over Gaussian background
/// noise of RMS `noise_amplitude`. Identical arguments give identical output.
///
/// # Safety
/// `events` must point to `n_events` entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn passby_synthesize(
    duration_s: f64,
    sample_rate_hz: f64,
    events: *const PassbySynthEvent,
    n_events: usize,
    noise_amplitude: f64,
    rng_seed: u64,
    out: *mut *mut PassbySignal,
) -> PassbyStatus {
    guard(|| {
        let events = slice(events, n_events, "events")?
            .iter()
            .map(|e| PassByEvent {
                t0_s: e.t0_s,
                v_mps: e.v_mps,
                d_m: e.d_m,
                source_level: e.source_level,
            })
            .collect();
        let cfg = synth::SynthConfig {
            duration_s,
            sample_rate_hz,
            events,
            noise_amplitude,
            rng_seed,
        };
        let (inner, _) = synth::synthesize(&cfg)?;
        write_out(out, PassbySignal { inner })
    })
}

//! Acoustic detection and counting of vehicle pass-bys.
//!
//! A roadside recording is rectified, decimated to an envelope, smoothed with
//! a wide Gaussian and differenced twice; negative minima of the second
//! difference whose smoothed level clears a multiple of the background level
//! are reported as pass-bys. The crate also synthesizes recordings with known
//! pass-by instants and scores detections against them.
//!
//! ```no_run
//! use passby::{detector, synth};
//!
//! let cfg = synth::SynthConfig {
//!     duration_s: 60.0,
//!     sample_rate_hz: 48_000.0,
//!     events: vec![synth::PassByEvent::new(20.0, 0.1), synth::PassByEvent::new(40.0, 0.1)],
//!     noise_amplitude: 0.005,
//!     rng_seed: 1,
//! };
//! let (signal, truth) = synth::synthesize(&cfg).unwrap();
//! let det_cfg = detector::DetectorConfig::with_noise_ranges(vec![
//!     detector::NoiseRange::new(0.0, 8.0),
//! ]);
//! let found = detector::detect(&signal, &det_cfg).unwrap();
//! let times: Vec<f64> = found.events.iter().map(|e| e.time_s).collect();
//! let report = passby::eval::report(&times, &truth.times(), 2.0).unwrap();
//! println!("{report}");
//! ```

pub mod audio_io;
pub mod cli;
pub mod detector;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod formats;
pub mod synth;

pub use audio_io::{read_wav, write_wav, BitDepth, PressureSignal};
pub use detector::{detect, DetectionEvent, DetectorConfig, NoiseProfile, NoiseRange};
pub use error::{Error, Result};
pub use eval::EvalReport;
pub use synth::{GroundTruth, PassByEvent, SynthConfig};

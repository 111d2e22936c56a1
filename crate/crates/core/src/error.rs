use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("signal is empty")]
    EmptySignal,

    #[error("signal contains a non-finite sample at index {0}")]
    NonFinite(usize),

    #[error(
        "recording is {recording_s:.3} s long but the detector needs more than {required_s:.3} s"
    )]
    RecordingTooShort { recording_s: f64, required_s: f64 },

    #[error("noise range {start_s}..{end_s} s lies outside the recording (0..{duration_s} s)")]
    NoiseRangeOutOfBounds {
        start_s: f64,
        end_s: f64,
        duration_s: f64,
    },

    #[error("noise ranges select no samples")]
    EmptyNoiseSelection,

    #[error("sample rate mismatch: signal at {signal_hz} Hz, kernel at {kernel_hz} Hz")]
    RateMismatch { signal_hz: f64, kernel_hz: f64 },

    #[error("unsupported WAV codec {name} (format tag 0x{tag:04x}); only PCM integer and IEEE float are accepted")]
    UnsupportedCodec { tag: u16, name: &'static str },

    #[error("malformed WAV file {path}: {reason}")]
    MalformedWav { path: PathBuf, reason: String },

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input data rather than bad usage.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::InvalidArgument(_))
    }
}

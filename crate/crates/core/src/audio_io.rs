//! WAV ingestion and emission.
//!
//! Samples are held as normalized pressure (full scale = 1.0). Integer PCM is
//! scaled by `2^(bits-1)` on read; multi-channel files are downmixed by the
//! arithmetic mean of their channels.

use std::fs::File;
use std::io::{self, BufReader, Read};
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use log::warn;

use crate::error::{Error, Result};

/// A uniformly sampled scalar pressure waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureSignal {
    samples: Vec<f64>,
    sample_rate_hz: f64,
}

impl PressureSignal {
    /// Validates the rate and that every sample is finite. An empty sample
    /// vector is allowed here; operations that consume a signal reject it.
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::invalid(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration covered by the samples, `len / rate`.
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Time of sample `i` on the recording axis.
    pub fn time_at(&self, i: usize) -> f64 {
        i as f64 / self.sample_rate_hz
    }

    /// Multiplies every sample by `gain`.
    pub fn scaled(&self, gain: f64) -> Result<Self> {
        Self::new(
            self.samples.iter().map(|x| x * gain).collect(),
            self.sample_rate_hz,
        )
    }

    pub(crate) fn ensure_non_empty(&self) -> Result<()> {
        if self.samples.is_empty() {
            Err(Error::EmptySignal)
        } else {
            Ok(())
        }
    }
}

/// Sample encoding used by [`write_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Pcm16,
    Pcm24,
    Float32,
}

impl BitDepth {
    /// Size of one quantization step in normalized units.
    pub fn lsb(self) -> f64 {
        match self {
            BitDepth::Pcm16 => 2f64.powi(-15),
            BitDepth::Pcm24 => 2f64.powi(-23),
            BitDepth::Float32 => f32::EPSILON as f64,
        }
    }
}

impl std::str::FromStr for BitDepth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "16" | "pcm16" => Ok(BitDepth::Pcm16),
            "24" | "pcm24" => Ok(BitDepth::Pcm24),
            "float32" | "f32" | "32f" => Ok(BitDepth::Float32),
            other => Err(Error::invalid(format!(
                "bit depth must be 16, 24 or float32, got {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for BitDepth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BitDepth::Pcm16 => "16",
            BitDepth::Pcm24 => "24",
            BitDepth::Float32 => "float32",
        })
    }
}

/// Outcome of a write; `clipped` counts samples forced into [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WriteReport {
    pub frames: usize,
    pub clipped: usize,
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<PressureSignal> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = match WavReader::new(BufReader::new(file)) {
        Ok(r) => r,
        Err(hound::Error::Unsupported) => return Err(unsupported_codec(path)),
        Err(e) => return Err(map_hound(path, e)),
    };
    let spec = reader.spec();
    let channels = spec.channels as usize;
    let interleaved: Vec<f64> = match spec.sample_format {
        SampleFormat::Int => {
            let scale = 2f64.powi(spec.bits_per_sample as i32 - 1);
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| map_hound(path, e))?
        }
        SampleFormat::Float => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| map_hound(path, e))?,
    };
    if interleaved.is_empty() {
        return Err(Error::EmptySignal);
    }
    let samples = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f64>() / channels as f64)
            .collect()
    };
    PressureSignal::new(samples, spec.sample_rate as f64)
}

pub fn write_wav(
    signal: &PressureSignal,
    path: impl AsRef<Path>,
    depth: BitDepth,
) -> Result<WriteReport> {
    let path = path.as_ref();
    let rate = signal.sample_rate_hz();
    if rate.fract() != 0.0 || rate > u32::MAX as f64 {
        return Err(Error::invalid(format!(
            "WAV needs an integral sample rate, got {rate}"
        )));
    }
    let (bits, format) = match depth {
        BitDepth::Pcm16 => (16, SampleFormat::Int),
        BitDepth::Pcm24 => (24, SampleFormat::Int),
        BitDepth::Float32 => (32, SampleFormat::Float),
    };
    let spec = WavSpec {
        channels: 1,
        sample_rate: rate as u32,
        bits_per_sample: bits,
        sample_format: format,
    };
    let mut writer = WavWriter::create(path, spec).map_err(|e| map_hound(path, e))?;
    let mut clipped = 0usize;
    for &x in signal.samples() {
        let y = if x.abs() > 1.0 {
            clipped += 1;
            x.clamp(-1.0, 1.0)
        } else {
            x
        };
        let res = match depth {
            BitDepth::Pcm16 => writer.write_sample(quantize(y, 16) as i16),
            BitDepth::Pcm24 => writer.write_sample(quantize(y, 24)),
            BitDepth::Float32 => writer.write_sample(y as f32),
        };
        res.map_err(|e| map_hound(path, e))?;
    }
    writer.finalize().map_err(|e| map_hound(path, e))?;
    if clipped > 0 {
        warn!("{}: clipped {clipped} samples to [-1, 1]", path.display());
    }
    Ok(WriteReport {
        frames: signal.len(),
        clipped,
    })
}

fn quantize(x: f64, bits: i32) -> i32 {
    let full = 2f64.powi(bits - 1);
    (x * full).round().clamp(-full, full - 1.0) as i32
}

fn map_hound(path: &Path, e: hound::Error) -> Error {
    match e {
        // the file opened, so a short read means a truncated or bogus header
        hound::Error::IoError(io)
            if matches!(
                io.kind(),
                io::ErrorKind::UnexpectedEof | io::ErrorKind::Other
            ) =>
        {
            Error::MalformedWav {
                path: path.to_path_buf(),
                reason: io.to_string(),
            }
        }
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::MalformedWav {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    }
}

/// Scans the RIFF chunks for the `fmt ` format tag so the rejection can name
/// the codec. For WAVE_FORMAT_EXTENSIBLE the sub-format GUID's leading tag
/// is reported instead.
fn unsupported_codec(path: &Path) -> Error {
    match read_format_tag(path) {
        Ok(tag) => Error::UnsupportedCodec {
            tag,
            name: codec_name(tag),
        },
        Err(e) => e,
    }
}

fn read_format_tag(path: &Path) -> Result<u16> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    let malformed = |reason: &str| Error::MalformedWav {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(malformed("missing RIFF/WAVE header"));
    }
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body = pos + 8;
        if id == b"fmt " {
            if body + 2 > bytes.len() {
                break;
            }
            let tag = u16::from_le_bytes([bytes[body], bytes[body + 1]]);
            if tag == 0xFFFE && size >= 26 && body + 26 <= bytes.len() {
                return Ok(u16::from_le_bytes([bytes[body + 24], bytes[body + 25]]));
            }
            return Ok(tag);
        }
        pos = body + size + (size & 1);
    }
    Err(malformed("missing fmt chunk"))
}

fn codec_name(tag: u16) -> &'static str {
    match tag {
        0x0001 => "PCM",
        0x0002 => "Microsoft ADPCM",
        0x0003 => "IEEE float",
        0x0006 => "A-law",
        0x0007 => "mu-law",
        0x0011 => "IMA ADPCM",
        0x0031 => "GSM 6.10",
        0x0050 => "MPEG",
        0x0055 => "MPEG Layer 3",
        0x00FF => "AAC",
        0xF1AC => "FLAC",
        _ => "unknown",
    }
}

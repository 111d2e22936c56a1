//! `passby synth | detect | eval`.
//!
//! Every option can also be given in a flat `key = value` config file passed
//! with `--config`; keys are the long flag names (`t-c`, `noise-amplitude`,
//! ...; underscores are accepted too). Flags override file values. The
//! resolved settings are echoed with every run.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::audio_io::{self, BitDepth};
use crate::detector::{
    self, ConvolutionBackend, DetectorConfig, NoiseRange, NoiseSource, DEFAULT_DECIMATION,
    DEFAULT_Q, DEFAULT_SIGMA_PER_T_C, DEFAULT_T_C_S,
};
use crate::dsp::Sampled;
use crate::error::Error;
use crate::eval::{self, DEFAULT_TOLERANCE_S};
use crate::formats;
use crate::synth::{self, SynthConfig, DEFAULT_SAMPLE_RATE_HZ};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;

pub const DEFAULT_SYNTH_DURATION_S: f64 = 89.5;
pub const DEFAULT_NOISE_AMPLITUDE: f64 = 0.005;

#[derive(Debug, Parser)]
#[command(name = "passby", version, about = "Acoustic pass-by vehicle detection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic recording and its ground truth
    Synth(SynthArgs),
    /// Detect pass-by events in a WAV recording
    Detect(DetectArgs),
    /// Score detections against ground truth
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Flat key = value settings file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Recording length in seconds [default: 89.5]
    #[arg(long)]
    pub duration: Option<String>,
    /// Sample rate in Hz [default: 48000]
    #[arg(long)]
    pub sample_rate: Option<String>,
    /// Pass-by list, `t0_s,v_mps,d_m,source_level` with header [default: none]
    #[arg(long)]
    pub events: Option<String>,
    /// RMS of the Gaussian background noise [default: 0.005]
    #[arg(long)]
    pub noise_amplitude: Option<String>,
    /// RNG seed [default: 0]
    #[arg(long)]
    pub seed: Option<String>,
    /// 16, 24 or float32 [default: 24]
    #[arg(long)]
    pub bit_depth: Option<String>,
    /// Output WAV path
    #[arg(short, long)]
    pub output: Option<String>,
    /// Ground-truth CSV path [default: <output stem>.truth.csv]
    #[arg(long)]
    pub truth: Option<String>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Input WAV recording
    pub input: Option<String>,
    /// Flat key = value settings file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Vehicle-free sections, `start:end[,start:end...]` in seconds
    #[arg(long)]
    pub noise: Option<String>,
    /// Estimate the background from the quietest 1 s blocks instead
    #[arg(long)]
    pub auto_noise: bool,
    /// Kernel centre time in seconds [default: 3]
    #[arg(long = "t-c")]
    pub t_c: Option<String>,
    /// Kernel standard deviation in seconds [default: t-c / 6]
    #[arg(long)]
    pub sigma: Option<String>,
    /// Threshold multiplier [default: 1.5]
    #[arg(long)]
    pub q: Option<String>,
    /// Envelope decimation factor [default: 480]
    #[arg(long)]
    pub decimation: Option<String>,
    /// Drop detections closer than this to the previous kept one [default: 0]
    #[arg(long)]
    pub refractory: Option<String>,
    /// fast or direct [default: fast]
    #[arg(long)]
    pub backend: Option<String>,
    /// Detections CSV, `-` for stdout [default: -]
    #[arg(short, long)]
    pub output: Option<String>,
    /// Directory for per-stage trace files
    #[arg(long)]
    pub trace: Option<String>,
    /// Comma-separated ascending q values; prints event counts per q
    #[arg(long)]
    pub q_sweep: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Detections CSV (`time_s,...`)
    pub detections: Option<String>,
    /// Ground-truth CSV (`t0_s,...` or `time_s`)
    pub truth: Option<String>,
    /// Flat key = value settings file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Match window in seconds [default: 2]
    #[arg(long)]
    pub tolerance: Option<String>,
    /// Write the JSON report to this path
    #[arg(long)]
    pub json: Option<String>,
    /// What to print on stdout: table, json or both [default: both]
    #[arg(long)]
    pub format: Option<String>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_data_error() {
            CliError::Data(e.to_string())
        } else {
            CliError::Usage(e.to_string())
        }
    }
}

fn io_err(path: &Path, e: io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses a flat `key = value` document. `#` starts a comment line.
pub fn parse_config_text(text: &str, path: &Path) -> CliResult<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!(
                "{}:{}: expected key = value",
                path.display(),
                i + 1
            ))
        })?;
        map.insert(normalize_key(k), v.trim().to_string());
    }
    Ok(map)
}

fn normalize_key(k: &str) -> String {
    k.trim().replace('_', "-")
}

/// Flag values layered over config-file values.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
    echo: BTreeMap<String, String>,
}

impl Settings {
    fn load(
        config: Option<&Path>,
        allowed: &[&str],
        flags: Vec<(&str, Option<String>)>,
    ) -> CliResult<Self> {
        let mut values = match config {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
                parse_config_text(&text, p)?
            }
            None => BTreeMap::new(),
        };
        if let Some(bad) = values.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(CliError::Usage(format!("unknown config key {bad:?}")));
        }
        for (k, v) in flags {
            if let Some(v) = v {
                values.insert(k.to_string(), v);
            }
        }
        Ok(Self {
            values,
            echo: BTreeMap::new(),
        })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parse<T>(&mut self, key: &str, default: Option<T>) -> CliResult<Option<T>>
    where
        T: FromStr + std::fmt::Display,
    {
        let value = match self.raw(key) {
            Some(s) => Some(
                s.parse::<T>()
                    .map_err(|_| CliError::Usage(format!("invalid value {s:?} for {key}")))?,
            ),
            None => default,
        };
        if let Some(v) = &value {
            self.echo.insert(key.to_string(), v.to_string());
        }
        Ok(value)
    }

    fn get<T: FromStr + std::fmt::Display>(&mut self, key: &str, default: T) -> CliResult<T> {
        Ok(self.parse(key, Some(default))?.expect("default supplied"))
    }

    fn required(&mut self, key: &str) -> CliResult<String> {
        self.parse::<String>(key, None)?
            .ok_or_else(|| CliError::Usage(format!("missing required setting {key}")))
    }

    fn note(&mut self, key: &str, value: impl ToString) {
        self.echo.insert(key.to_string(), value.to_string());
    }

    /// Effective configuration after defaults.
    pub fn effective(&self) -> &BTreeMap<String, String> {
        &self.echo
    }
}

pub fn parse_noise_ranges(s: &str) -> CliResult<Vec<NoiseRange>> {
    s.split(',')
        .map(|part| {
            let (a, b) = part
                .split_once(':')
                .ok_or_else(|| CliError::Usage(format!("noise range {part:?} is not start:end")))?;
            let num = |x: &str| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Usage(format!("bad number in noise range {part:?}")))
            };
            Ok(NoiseRange::new(num(a)?, num(b)?))
        })
        .collect()
}

fn parse_list(s: &str, key: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad number {x:?} in {key}")))
        })
        .collect()
}

fn ensure_readable(path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{}: no such file", path.display())))
    }
}

fn ensure_parent(path: &Path) -> CliResult<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => Err(CliError::Usage(format!(
            "{}: directory does not exist",
            p.display()
        ))),
        _ => Ok(()),
    }
}

fn echo_config(out: &mut dyn Write, settings: &Settings) -> io::Result<()> {
    for (k, v) in settings.effective() {
        writeln!(out, "# {k} = {v}")?;
    }
    Ok(())
}

/// Ground-truth path next to a WAV output: `rec.wav` -> `rec.truth.csv`.
pub fn truth_path_for(wav: &Path) -> PathBuf {
    wav.with_extension("truth.csv")
}

pub fn run_synth(args: SynthArgs) -> CliResult<()> {
    let mut s = Settings::load(
        args.config.as_deref(),
        &[
            "duration",
            "sample-rate",
            "events",
            "noise-amplitude",
            "seed",
            "bit-depth",
            "output",
            "truth",
        ],
        vec![
            ("duration", args.duration),
            ("sample-rate", args.sample_rate),
            ("events", args.events),
            ("noise-amplitude", args.noise_amplitude),
            ("seed", args.seed),
            ("bit-depth", args.bit_depth),
            ("output", args.output),
            ("truth", args.truth),
        ],
    )?;
    let duration_s: f64 = s.get("duration", DEFAULT_SYNTH_DURATION_S)?;
    let sample_rate_hz: f64 = s.get("sample-rate", DEFAULT_SAMPLE_RATE_HZ)?;
    let noise_amplitude: f64 = s.get("noise-amplitude", DEFAULT_NOISE_AMPLITUDE)?;
    let rng_seed: u64 = s.get("seed", 0)?;
    let depth: BitDepth = s
        .get("bit-depth", "24".to_string())?
        .parse()
        .map_err(CliError::from)?;
    let output = PathBuf::from(s.required("output")?);
    let truth_out = s
        .parse::<String>("truth", None)?
        .map(PathBuf::from)
        .unwrap_or_else(|| truth_path_for(&output));
    s.note("truth", truth_out.display());
    let events = match s.parse::<String>("events", None)? {
        Some(p) => {
            let p = PathBuf::from(p);
            ensure_readable(&p)?;
            formats::read_truth(&p)?.events
        }
        None => Vec::new(),
    };
    ensure_parent(&output)?;
    ensure_parent(&truth_out)?;

    let cfg = SynthConfig {
        duration_s,
        sample_rate_hz,
        events,
        noise_amplitude,
        rng_seed,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let (signal, truth) = synth::synthesize(&cfg)?;
    let written = audio_io::write_wav(&signal, &output, depth)?;
    let f = File::create(&truth_out).map_err(|e| io_err(&truth_out, e))?;
    formats::write_truth(BufWriter::new(f), &truth).map_err(|e| io_err(&truth_out, e))?;

    println!(
        "synthesized {:.3} s at {} Hz: {} pass-bys, seed {}, {} clipped samples",
        signal.duration_s(),
        sample_rate_hz,
        truth.events.len(),
        rng_seed,
        written.clipped
    );
    println!("wrote {} and {}", output.display(), truth_out.display());
    Ok(())
}

pub fn run_detect(args: DetectArgs) -> CliResult<()> {
    let auto_flag = args.auto_noise.then(|| "true".to_string());
    let mut s = Settings::load(
        args.config.as_deref(),
        &[
            "input",
            "noise",
            "auto-noise",
            "t-c",
            "sigma",
            "q",
            "decimation",
            "refractory",
            "backend",
            "output",
            "trace",
            "q-sweep",
        ],
        vec![
            ("input", args.input),
            ("noise", args.noise),
            ("auto-noise", auto_flag),
            ("t-c", args.t_c),
            ("sigma", args.sigma),
            ("q", args.q),
            ("decimation", args.decimation),
            ("refractory", args.refractory),
            ("backend", args.backend),
            ("output", args.output),
            ("trace", args.trace),
            ("q-sweep", args.q_sweep),
        ],
    )?;
    let input = PathBuf::from(s.required("input")?);
    ensure_readable(&input)?;

    let t_c_s: f64 = s.get("t-c", DEFAULT_T_C_S)?;
    let sigma_s: f64 = s.get("sigma", t_c_s * DEFAULT_SIGMA_PER_T_C)?;
    let q: f64 = s.get("q", DEFAULT_Q)?;
    let decimation: usize = s.get("decimation", DEFAULT_DECIMATION)?;
    let refractory_s: f64 = s.get("refractory", 0.0)?;
    let backend = match s.get("backend", "fast".to_string())?.as_str() {
        "fast" => ConvolutionBackend::Fast,
        "direct" => ConvolutionBackend::Direct,
        other => return Err(CliError::Usage(format!("unknown backend {other:?}"))),
    };
    let auto: bool = s.get("auto-noise", false)?;
    let ranges = s.parse::<String>("noise", None)?;
    let noise = match (ranges, auto) {
        (Some(_), true) => {
            return Err(CliError::Usage(
                "give either --noise or --auto-noise, not both".into(),
            ))
        }
        (Some(r), false) => NoiseSource::Ranges(parse_noise_ranges(&r)?),
        (None, true) => NoiseSource::Auto,
        (None, false) => {
            return Err(CliError::Usage(
                "missing noise specification: pass --noise start:end[,...] or --auto-noise".into(),
            ))
        }
    };
    let output = s.get("output", "-".to_string())?;
    let trace = s.parse::<String>("trace", None)?.map(PathBuf::from);
    let sweep = match s.parse::<String>("q-sweep", None)? {
        Some(list) => Some(parse_list(&list, "q-sweep")?),
        None => None,
    };
    if output != "-" {
        ensure_parent(Path::new(&output))?;
    }

    let config = DetectorConfig {
        t_c_s,
        sigma_s: Some(sigma_s),
        q,
        decimation,
        noise,
        refractory_s,
        backend,
    };
    config.validate()?;

    let signal = audio_io::read_wav(&input)?;
    let det = detector::detect(&signal, &config)?;

    let stderr = io::stderr();
    let mut err = stderr.lock();
    let _ = echo_config(&mut err, &s);
    let _ = writeln!(
        err,
        "# n_bar = {}, threshold = {}, events = {}",
        det.noise.n_bar,
        det.threshold,
        det.events.len()
    );

    if output == "-" {
        formats::write_detections(io::stdout().lock(), &det.events)
            .map_err(|e| CliError::Data(e.to_string()))?;
    } else {
        let p = PathBuf::from(&output);
        let f = File::create(&p).map_err(|e| io_err(&p, e))?;
        formats::write_detections(BufWriter::new(f), &det.events).map_err(|e| io_err(&p, e))?;
    }

    if let Some(qs) = sweep {
        let an = &det.analysis;
        if qs.iter().any(|q| !(q.is_finite() && *q >= 0.0)) || qs.windows(2).any(|w| w[1] < w[0]) {
            return Err(CliError::Usage(
                "q-sweep values must be non-negative and ascending".into(),
            ));
        }
        let mut out = if output == "-" {
            Box::new(io::stderr()) as Box<dyn Write>
        } else {
            Box::new(io::stdout())
        };
        let _ = writeln!(out, "q,count");
        for q in qs {
            let _ = writeln!(out, "{q},{}", an.events(q, refractory_s).len());
        }
    }

    if let Some(dir) = trace {
        write_traces(&dir, &signal, &det)?;
    }
    Ok(())
}

/// One `time_s,value` file per pipeline stage.
pub fn write_traces(
    dir: &Path,
    signal: &audio_io::PressureSignal,
    det: &detector::Detection,
) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let an = &det.analysis;
    let write = |name: &str, points: Vec<(f64, f64)>| -> CliResult<()> {
        let p = dir.join(name);
        let f = File::create(&p).map_err(|e| io_err(&p, e))?;
        formats::write_trace(BufWriter::new(f), points).map_err(|e| io_err(&p, e))
    };
    let series = |s: &dyn Sampled| -> Vec<(f64, f64)> {
        s.values()
            .iter()
            .enumerate()
            .map(|(i, &v)| (s.time_at(i), v))
            .collect()
    };
    write("original.csv", series(signal))?;
    write("rectified.csv", series(&an.rectified))?;
    let env_rate = an.envelope.sample_rate_hz();
    write(
        "decimated.csv",
        an.envelope
            .samples()
            .iter()
            .enumerate()
            .map(|(i, &v)| (i as f64 / env_rate, v))
            .collect(),
    )?;
    write("smoothed.csv", series(&an.smoothed))?;
    write("first_derivative.csv", series(&an.first))?;
    write("second_derivative.csv", series(&an.second))?;
    let at = |idx: &[usize]| -> Vec<(f64, f64)> {
        idx.iter()
            .map(|&j| (an.second.time_at(j), an.second.values[j]))
            .collect()
    };
    write("minima.csv", at(&an.minima))?;
    write("selected.csv", at(&an.selected_indices(an.config.q)))?;
    Ok(())
}

pub fn run_eval(args: EvalArgs) -> CliResult<()> {
    let mut s = Settings::load(
        args.config.as_deref(),
        &["detections", "truth", "tolerance", "json", "format"],
        vec![
            ("detections", args.detections),
            ("truth", args.truth),
            ("tolerance", args.tolerance),
            ("json", args.json),
            ("format", args.format),
        ],
    )?;
    let det_path = PathBuf::from(s.required("detections")?);
    let truth_path = PathBuf::from(s.required("truth")?);
    ensure_readable(&det_path)?;
    ensure_readable(&truth_path)?;
    let tolerance: f64 = s.get("tolerance", DEFAULT_TOLERANCE_S)?;
    let json_path = s.parse::<String>("json", None)?.map(PathBuf::from);
    let format = s.get("format", "both".to_string())?;
    if !["table", "json", "both"].contains(&format.as_str()) {
        return Err(CliError::Usage(format!("unknown format {format:?}")));
    }
    if !(tolerance.is_finite() && tolerance > 0.0) {
        return Err(CliError::Usage(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }
    if let Some(p) = &json_path {
        ensure_parent(p)?;
    }

    let detections = formats::read_event_times(&det_path)?;
    let truth = formats::read_event_times(&truth_path)?;
    let report = eval::report(&detections, &truth, tolerance)?;
    let doc = report_document(&report, s.effective());
    let text = serde_json::to_string_pretty(&doc).expect("report serializes") + "\n";

    let mut out = io::stdout().lock();
    if format != "json" {
        write!(out, "{report}").map_err(|e| CliError::Data(e.to_string()))?;
    }
    if format == "both" {
        writeln!(out).map_err(|e| CliError::Data(e.to_string()))?;
    }
    if format != "table" {
        out.write_all(text.as_bytes())
            .map_err(|e| CliError::Data(e.to_string()))?;
    }
    if let Some(p) = json_path {
        fs::write(&p, &text).map_err(|e| io_err(&p, e))?;
    }
    Ok(())
}

/// Structured report: the five counts, percentages of the event count
/// (`null` when there are no events), the match window and the settings.
pub fn report_document(
    report: &eval::EvalReport,
    config: &BTreeMap<String, String>,
) -> serde_json::Value {
    json!({
        "events": report.events_e,
        "detections": report.detections_d,
        "false_positives": report.false_positives_p,
        "false_negatives": report.false_negatives_n,
        "efficacy": report.efficacy_eta,
        "ratios_percent": report.ratios.map(|r| json!({
            "events": r.events,
            "detections": r.detections,
            "false_positives": r.false_positives,
            "false_negatives": r.false_negatives,
            "efficacy": r.efficacy,
        })),
        "match_tolerance_s": report.match_tolerance_s,
        "config": config,
    })
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Synth(a) => run_synth(a),
        Command::Detect(a) => run_detect(a),
        Command::Eval(a) => run_eval(a),
    }
}

/// Parses process arguments and runs; maps failures to exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

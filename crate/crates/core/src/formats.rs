//! Comma-separated text files: detections, ground truth and trace series.
//!
//! Every file starts with a header line; fields are separated by `,`, use `.`
//! as the decimal mark, and lines end with LF. Numbers are written in Rust's
//! shortest round-trip form, so reading a file back yields the exact values
//! that were written.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::detector::DetectionEvent;
use crate::error::{Error, Result};
use crate::synth::{GroundTruth, PassByEvent};

pub const DETECTIONS_HEADER: &str = "time_s,w_level";
pub const TRUTH_HEADER: &str = "t0_s,v_mps,d_m,source_level";
pub const TRACE_HEADER: &str = "time_s,value";

/// Parsed table: header names and numeric rows tagged with 1-based line
/// numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<(usize, Vec<f64>)>,
}

pub fn parse_table(text: &str, path: &Path) -> Result<Table> {
    let err = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let header: Vec<String> = loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((_, l)) => break l.split(',').map(|h| h.trim().to_string()).collect(),
            None => return Err(err(1, "missing header line".into())),
        }
    };
    let mut rows = Vec::new();
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(err(
                no,
                format!("expected {} columns, found {}", header.len(), fields.len()),
            ));
        }
        let values = fields
            .iter()
            .map(|f| {
                let v: f64 = f
                    .trim()
                    .parse()
                    .map_err(|_| err(no, format!("not a number: {:?}", f.trim())))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(err(no, format!("non-finite value {:?}", f.trim())))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push((no, values));
    }
    Ok(Table { header, rows })
}

pub fn read_table(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_table(&text, path)
}

/// Event times from the first column of a detections or ground-truth file.
pub fn read_event_times(path: &Path) -> Result<Vec<f64>> {
    let table = read_table(path)?;
    match table.header.first().map(String::as_str) {
        Some("time_s") | Some("t0_s") => Ok(table.rows.into_iter().map(|(_, r)| r[0]).collect()),
        other => Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            reason: format!("first column must be time_s or t0_s, found {other:?}"),
        }),
    }
}

pub fn write_detections<W: Write>(mut out: W, events: &[DetectionEvent]) -> io::Result<()> {
    writeln!(out, "{DETECTIONS_HEADER}")?;
    for e in events {
        writeln!(out, "{},{}", e.time_s, e.w_level)?;
    }
    out.flush()
}

pub fn read_detections(path: &Path) -> Result<Vec<DetectionEvent>> {
    let table = read_table(path)?;
    expect_header(&table, DETECTIONS_HEADER, path)?;
    Ok(table
        .rows
        .into_iter()
        .map(|(_, r)| DetectionEvent {
            time_s: r[0],
            w_level: r[1],
            w2_value: f64::NAN,
        })
        .collect())
}

pub fn write_truth<W: Write>(mut out: W, truth: &GroundTruth) -> io::Result<()> {
    writeln!(out, "{TRUTH_HEADER}")?;
    for e in &truth.events {
        writeln!(out, "{},{},{},{}", e.t0_s, e.v_mps, e.d_m, e.source_level)?;
    }
    out.flush()
}

/// Reads `t0_s,v_mps,d_m,source_level` rows; also the format of the event
/// list given to the synthesizer.
pub fn read_truth(path: &Path) -> Result<GroundTruth> {
    let table = read_table(path)?;
    expect_header(&table, TRUTH_HEADER, path)?;
    let mut events = Vec::with_capacity(table.rows.len());
    for (line, r) in table.rows {
        let e = PassByEvent {
            t0_s: r[0],
            v_mps: r[1],
            d_m: r[2],
            source_level: r[3],
        };
        e.validate().map_err(|err| Error::Parse {
            path: path.to_path_buf(),
            line,
            reason: err.to_string(),
        })?;
        events.push(e);
    }
    Ok(GroundTruth { events })
}

pub fn write_trace<W: Write>(
    mut out: W,
    points: impl IntoIterator<Item = (f64, f64)>,
) -> io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for (t, v) in points {
        writeln!(out, "{t},{v}")?;
    }
    out.flush()
}

fn expect_header(table: &Table, want: &str, path: &Path) -> Result<()> {
    let got = table.header.join(",");
    if got == want {
        Ok(())
    } else {
        Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            reason: format!("expected header {want:?}, found {got:?}"),
        })
    }
}

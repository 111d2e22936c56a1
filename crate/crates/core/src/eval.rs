//! Detection scoring against ground truth.
//!
//! Detections and true instants are paired one-to-one, nearest first, within
//! a tolerance window. The report carries the event, detection, false
//! positive, false negative and efficacy counts (`efficacy = d - p`), each
//! also given as a percentage of the event count.
//!
//! The percentage column is `100 * a / e`, so 139 detections of 141 events
//! read 98.58 %. It is a share of the event count, not a relative deviation
//! `(a - e) / e`.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TOLERANCE_S: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub detection_s: f64,
    pub truth_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Matching {
    pub pairs: Vec<MatchPair>,
    pub unmatched_detections: Vec<f64>,
    pub unmatched_truth: Vec<f64>,
}

/// Greedy nearest-first one-to-one matching.
///
/// All candidate pairs with `|dt| <= tolerance_s` are taken in ascending
/// `|dt|`. Equal gaps go to the later pair (larger `max`, then larger `min`
/// of the two times), so the result depends only on the values, not on input
/// order or on which list is which. Output lists are sorted by time.
pub fn match_events(detections: &[f64], truth: &[f64], tolerance_s: f64) -> Result<Matching> {
    if !(tolerance_s.is_finite() && tolerance_s > 0.0) {
        return Err(Error::invalid(format!(
            "match tolerance must be positive, got {tolerance_s}"
        )));
    }
    let mut det = detections.to_vec();
    let mut tru = truth.to_vec();
    if det.iter().chain(&tru).any(|t| !t.is_finite()) {
        return Err(Error::invalid("event times must be finite"));
    }
    det.sort_by(f64::total_cmp);
    tru.sort_by(f64::total_cmp);

    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, &d) in det.iter().enumerate() {
        let lo = tru.partition_point(|&t| t < d - tolerance_s);
        for (j, &t) in tru.iter().enumerate().skip(lo) {
            if t > d + tolerance_s {
                break;
            }
            let gap = (d - t).abs();
            if gap <= tolerance_s {
                candidates.push((gap, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| candidate_order(a, b, &det, &tru));

    let mut det_used = vec![false; det.len()];
    let mut tru_used = vec![false; tru.len()];
    let mut pairs = Vec::new();
    for (_, i, j) in candidates {
        if !det_used[i] && !tru_used[j] {
            det_used[i] = true;
            tru_used[j] = true;
            pairs.push(MatchPair {
                detection_s: det[i],
                truth_s: tru[j],
            });
        }
    }
    pairs.sort_by(|a, b| a.truth_s.total_cmp(&b.truth_s));
    let unused = |xs: &[f64], used: &[bool]| {
        xs.iter()
            .zip(used)
            .filter(|(_, &u)| !u)
            .map(|(&x, _)| x)
            .collect::<Vec<_>>()
    };
    Ok(Matching {
        unmatched_detections: unused(&det, &det_used),
        unmatched_truth: unused(&tru, &tru_used),
        pairs,
    })
}

fn candidate_order(
    a: &(f64, usize, usize),
    b: &(f64, usize, usize),
    det: &[f64],
    tru: &[f64],
) -> Ordering {
    let key = |c: &(f64, usize, usize)| {
        let (x, y) = (det[c.1], tru[c.2]);
        (c.0, x.min(y), x.max(y), x)
    };
    let (ka, kb) = (key(a), key(b));
    ka.0.total_cmp(&kb.0)
        .then(kb.2.total_cmp(&ka.2))
        .then(kb.1.total_cmp(&ka.1))
        .then(ka.3.total_cmp(&kb.3))
        .then(a.1.cmp(&b.1))
        .then(a.2.cmp(&b.2))
}

/// Counts as percentages of the event count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratios {
    pub events: f64,
    pub detections: f64,
    pub false_positives: f64,
    pub false_negatives: f64,
    pub efficacy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub events_e: usize,
    pub detections_d: usize,
    pub false_positives_p: usize,
    pub false_negatives_n: usize,
    pub efficacy_eta: usize,
    /// Absent when there are no events.
    pub ratios: Option<Ratios>,
    pub match_tolerance_s: f64,
}

impl EvalReport {
    /// Builds a report from raw counts; rejects counts that cannot come from
    /// a one-to-one matching (`d - p` must equal `e - n`).
    pub fn from_counts(e: usize, d: usize, p: usize, n: usize, tolerance_s: f64) -> Result<Self> {
        if p > d || n > e || d - p != e - n {
            return Err(Error::invalid(format!(
                "inconsistent counts e={e} d={d} p={p} n={n}: need d - p = e - n"
            )));
        }
        let eta = d - p;
        let ratios = (e > 0).then(|| {
            let pct = |a: usize| 100.0 * a as f64 / e as f64;
            Ratios {
                events: pct(e),
                detections: pct(d),
                false_positives: pct(p),
                false_negatives: pct(n),
                efficacy: pct(eta),
            }
        });
        Ok(Self {
            events_e: e,
            detections_d: d,
            false_positives_p: p,
            false_negatives_n: n,
            efficacy_eta: eta,
            ratios,
            match_tolerance_s: tolerance_s,
        })
    }

    pub fn matched_pairs(&self) -> usize {
        self.efficacy_eta
    }
}

pub fn report(detections: &[f64], truth: &[f64], tolerance_s: f64) -> Result<EvalReport> {
    let m = match_events(detections, truth, tolerance_s)?;
    EvalReport::from_counts(
        truth.len(),
        detections.len(),
        m.unmatched_detections.len(),
        m.unmatched_truth.len(),
        tolerance_s,
    )
}

impl fmt::Display for EvalReport {
    /// Five-row table: count and percentage of events per row.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows = [
            ("Events", self.events_e, self.ratios.map(|r| r.events)),
            (
                "Detection",
                self.detections_d,
                self.ratios.map(|r| r.detections),
            ),
            (
                "False positives",
                self.false_positives_p,
                self.ratios.map(|r| r.false_positives),
            ),
            (
                "False negatives",
                self.false_negatives_n,
                self.ratios.map(|r| r.false_negatives),
            ),
            (
                "Efficacy",
                self.efficacy_eta,
                self.ratios.map(|r| r.efficacy),
            ),
        ];
        writeln!(f, "{:<16} {:>9} {:>9}", "", "Vehicles", "R.D.")?;
        for (name, count, pct) in rows {
            let pct = pct.map_or_else(|| "n/a".to_string(), |p| format!("{p:.2}%"));
            writeln!(f, "{name:<16} {count:>9} {pct:>9}")?;
        }
        Ok(())
    }
}

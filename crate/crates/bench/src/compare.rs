//! Aligning the inner-iteration traces of two bundles.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::error::BenchError;
use crate::experiment::Summary;

/// One row of `trace.csv`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct TraceRow {
    pub outer: usize,
    pub iter: usize,
    pub delta: f64,
    pub rho: f64,
    pub class: String,
    pub kkt: f64,
    pub m_dec: f64,
    #[serde(rename = "L")]
    pub value: f64,
    pub active_size: usize,
    pub cum_scg: usize,
}

/// Summary and trace of a bundle on disk.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub summary: Summary,
    pub trace: Vec<TraceRow>,
}

impl LoadedRun {
    pub fn read(dir: &Path) -> Result<Self, BenchError> {
        let bad = |msg: String| BenchError::Bundle {
            path: dir.display().to_string(),
            msg,
        };
        let text = std::fs::read_to_string(dir.join("summary.json")).map_err(|e| bad(format!("summary.json: {e}")))?;
        let summary: Summary = serde_json::from_str(&text).map_err(|e| bad(format!("summary.json: {e}")))?;
        let trace = std::fs::read_to_string(dir.join("trace.csv")).map_err(|e| bad(format!("trace.csv: {e}")))?;
        let trace = parse_trace(&trace).map_err(|e| bad(format!("trace.csv: {e}")))?;
        Ok(LoadedRun { summary, trace })
    }
}

pub fn parse_trace(text: &str) -> Result<Vec<TraceRow>, csv::Error> {
    csv::Reader::from_reader(text.as_bytes()).deserialize().collect()
}

/// sCG passes summed across outer iterations, row by row.
fn running_scg(trace: &[TraceRow]) -> Vec<usize> {
    let mut base = 0;
    let mut prev: Option<&TraceRow> = None;
    trace
        .iter()
        .map(|r| {
            if let Some(p) = prev {
                if p.outer != r.outer {
                    base += p.cum_scg;
                }
            }
            prev = Some(r);
            base + r.cum_scg
        })
        .collect()
}

pub const COMPARE_HEADER: &str =
    "step,outer_a,iter_a,kkt_a,active_a,scg_a,outer_b,iter_b,kkt_b,active_b,scg_b,d_kkt,d_active,d_scg";

/// Aligns two traces by global inner-iteration index.
///
/// Rows past the end of the shorter trace leave its columns and the deltas empty.
pub fn compare(a: &LoadedRun, b: &LoadedRun) -> Result<String, BenchError> {
    if a.summary.case != b.summary.case {
        return Err(BenchError::Mismatch(format!(
            "case '{}' vs '{}'",
            a.summary.case, b.summary.case
        )));
    }
    let (sa, sb) = (running_scg(&a.trace), running_scg(&b.trace));
    let mut out = format!("{COMPARE_HEADER}\n");
    for step in 0..a.trace.len().max(b.trace.len()) {
        let _ = write!(out, "{}", step + 1);
        for (t, s) in [(&a.trace, &sa), (&b.trace, &sb)] {
            match t.get(step) {
                Some(r) => {
                    let _ = write!(out, ",{},{},{:e},{},{}", r.outer, r.iter, r.kkt, r.active_size, s[step]);
                }
                None => out.push_str(",,,,,"),
            }
        }
        match (a.trace.get(step), b.trace.get(step)) {
            (Some(ra), Some(rb)) => {
                let _ = writeln!(
                    out,
                    ",{:e},{},{}",
                    rb.kkt - ra.kkt,
                    rb.active_size as i64 - ra.active_size as i64,
                    sb[step] as i64 - sa[step] as i64
                );
            }
            _ => out.push_str(",,,\n"),
        }
    }
    Ok(out)
}

/// Reads two bundle directories and aligns their traces.
pub fn compare_runs(a: &Path, b: &Path) -> Result<String, BenchError> {
    compare(&LoadedRun::read(a)?, &LoadedRun::read(b)?)
}

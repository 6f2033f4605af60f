//! Experiment harness: configured solver runs, artifact bundles, and trace
//! comparison.
//!
//! A run is described by an [`ExperimentConfig`] (TOML or JSON, see
//! `docs/config.md`). [`run_experiment`] builds the problem, solves it
//! `repeat` times and returns a [`Bundle`] holding the outer-iteration
//! table, the inner trace, the communication ledger and a JSON summary.
//! [`compare_runs`] aligns the traces of two bundles for plotting.

pub mod compare;
pub mod config;
mod error;
pub mod experiment;

use std::fmt::Write as _;
use std::path::Path;

use trap_opf::{build_opf, builtin, opf_coloring, parse_case, Formulation, NetworkCase};

pub use compare::{compare, compare_runs, parse_trace, LoadedRun, TraceRow};
pub use config::{ExperimentConfig, Method, PartitionMode, ProblemKind, Start};
pub use error::BenchError;
pub use experiment::{run_experiment, Bundle, RunRecord, Summary};

/// Reads a bundled case by name, otherwise a case file.
pub fn load_case(name_or_path: &str) -> Result<NetworkCase, BenchError> {
    let text = match builtin(name_or_path) {
        Some(t) => t.to_string(),
        None => std::fs::read_to_string(Path::new(name_or_path))
            .map_err(|e| BenchError::Config(format!("{name_or_path}: {e}")))?,
    };
    parse_case(&text).map_err(|e| BenchError::Config(format!("{name_or_path}: {e}")))
}

/// Parses a case and reports its size, layout counts and colouring.
pub fn validate_case(name_or_path: &str) -> Result<String, BenchError> {
    let case = load_case(name_or_path)?;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{name_or_path}: {} buses, {} generators, {} branches, base {} MVA",
        case.num_buses(),
        case.generators.len(),
        case.num_lines(),
        case.base_mva
    );
    for f in [Formulation::Polar, Formulation::Rect] {
        let p = build_opf(&case, f);
        let part = opf_coloring(&p).map_err(|e| BenchError::Config(e.to_string()))?;
        let _ = writeln!(
            s,
            "{f:?}: {} variables, {} equality rows, {} nodes, {} colours",
            p.layout.dim(),
            p.layout.num_rows(),
            p.layout.node_sizes.len(),
            part.num_colors()
        );
    }
    Ok(s)
}

//! Experiment configuration.
//!
//! A config is a TOML file, or JSON when the path ends in `.json`. Every
//! field has a default, so an empty file runs the 9-bus AL experiment.
//! The grammar is documented in `docs/config.md`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use trap_core::{LancelotParams, TrapParams};
use trap_opf::{builtin, parse_case, Formulation, NetworkCase};

use crate::error::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Opf,
    Qp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Al,
    Lancelot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Start {
    Flat,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionMode {
    Colored,
    Centralized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    /// Bundled case name or path to a case file.
    pub case: String,
    pub formulation: Formulation,
    pub nodes: usize,
    pub max_node_size: usize,
    pub colors: usize,
    pub edge_prob: f64,
    pub bounded_frac: f64,
    pub convex: bool,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            kind: ProblemKind::Opf,
            case: "case9".into(),
            formulation: Formulation::Polar,
            nodes: 8,
            max_node_size: 3,
            colors: 2,
            edge_prob: 0.4,
            bounded_frac: 0.8,
            convex: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OuterConfig {
    pub method: Method,
    pub rho0: f64,
    pub factor: f64,
    pub tol: f64,
    pub max_outer: usize,
    pub require_inner_kkt: bool,
}

impl Default for OuterConfig {
    fn default() -> Self {
        OuterConfig {
            method: Method::Al,
            rho0: 10.0,
            factor: 30.0,
            tol: 1e-7,
            max_outer: 30,
            require_inner_kkt: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub start: Start,
    pub repeat: usize,
    pub partition: PartitionMode,
    /// Worker threads for repeat batches; 0 picks the machine's parallelism.
    pub threads: usize,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            start: Start::Flat,
            repeat: 1,
            partition: PartitionMode::Colored,
            threads: 0,
            output: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: Option<String>,
    pub problem: ProblemConfig,
    pub outer: OuterConfig,
    pub trap: TrapParams,
    pub lancelot: LancelotParams,
    pub run: RunConfig,
    /// Directory of the config file; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)?
        } else {
            Self::from_toml(&text)?
        };
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        serde_json::from_str(text).map_err(|e| BenchError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        let o = &self.outer;
        if !(o.rho0 > 0.0) {
            return bad(format!("outer.rho0 must be > 0, got {}", o.rho0));
        }
        if !(o.factor > 1.0) {
            return bad(format!("outer.factor must be > 1, got {}", o.factor));
        }
        if !(o.tol > 0.0) {
            return bad(format!("outer.tol must be > 0, got {}", o.tol));
        }
        if o.max_outer == 0 {
            return bad("outer.max_outer must be >= 1".into());
        }
        if self.run.repeat == 0 {
            return bad("run.repeat must be >= 1".into());
        }
        self.trap
            .validate()
            .map_err(|e| BenchError::Config(format!("trap: {e}")))?;
        match self.problem.kind {
            ProblemKind::Opf => {
                self.load_case()?;
            }
            ProblemKind::Qp => {
                let p = &self.problem;
                if p.nodes == 0 || p.max_node_size == 0 || p.colors == 0 {
                    return bad("problem.nodes, max_node_size and colors must be >= 1".into());
                }
                if !(0.0..=1.0).contains(&p.edge_prob) || !(0.0..=1.0).contains(&p.bounded_frac) {
                    return bad("problem.edge_prob and bounded_frac must lie in [0, 1]".into());
                }
            }
        }
        Ok(())
    }

    /// Case text: a bundled name, or a file relative to the config.
    pub fn case_text(&self) -> Result<String, BenchError> {
        if let Some(t) = builtin(&self.problem.case) {
            return Ok(t.to_string());
        }
        let path = self.base_dir.join(&self.problem.case);
        std::fs::read_to_string(&path)
            .map_err(|e| BenchError::Config(format!("problem.case {}: {e}", path.display())))
    }

    pub fn load_case(&self) -> Result<NetworkCase, BenchError> {
        parse_case(&self.case_text()?)
            .map_err(|e| BenchError::Config(format!("problem.case {}: {e}", self.problem.case)))
    }

    /// Label written into summaries; compare refuses to align different labels.
    pub fn case_label(&self) -> String {
        match self.problem.kind {
            ProblemKind::Opf => format!("opf:{}", self.problem.case),
            ProblemKind::Qp => {
                let p = &self.problem;
                format!(
                    "qp:n{}-s{}-k{}-e{}-b{}-{}-seed{}",
                    p.nodes,
                    p.max_node_size,
                    p.colors,
                    p.edge_prob,
                    p.bounded_frac,
                    if p.convex { "convex" } else { "nonconvex" },
                    self.run.seed
                )
            }
        }
    }

    pub fn output_dir(&self) -> Option<PathBuf> {
        self.run.output.as_ref().map(|o| self.base_dir.join(o))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        let c = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        c.validate().unwrap();
    }

    #[test]
    fn toml_and_json_agree() {
        let t = ExperimentConfig::from_toml(
            "[outer]\nmethod = \"lancelot\"\nfactor = 100.0\n[trap.refine]\nprecondition = true\n",
        )
        .unwrap();
        let j = ExperimentConfig::from_json(
            r#"{"outer": {"method": "lancelot", "factor": 100.0}, "trap": {"refine": {"precondition": true}}}"#,
        )
        .unwrap();
        assert_eq!(t, j);
        assert_eq!(t.outer.method, Method::Lancelot);
        assert!(t.trap.refine.precondition);
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "[outer]\nfactor = 1.0",
            "[outer]\nrho0 = -1.0",
            "[run]\nrepeat = 0",
            "[trap]\nsigma1 = 0.9",
            "[problem]\ncase = \"no-such-case.m\"",
            "[problem]\ncolour = 3",
        ] {
            let r = ExperimentConfig::from_toml(text).and_then(|c| c.validate());
            assert!(matches!(r, Err(BenchError::Config(_))), "{text}");
        }
    }

    #[test]
    fn roundtrips_through_toml() {
        let mut c = ExperimentConfig::default();
        c.run.repeat = 7;
        c.problem.formulation = Formulation::Rect;
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }
}

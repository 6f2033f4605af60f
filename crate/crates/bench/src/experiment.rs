//! Running a configured experiment and writing its artifact bundle.

use std::fmt::Write as _;
use std::path::Path;

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use trap_core::auglag::auglag_coupling;
use trap_core::fixtures::{BoxQp, QpSpec};
use trap_core::{
    auglag_outer, lancelot_outer, BoundOnly, CommLedger, EqualityNlp, NlpProblem, OuterParams, OuterReport,
    Partition, SingleBlock,
};
use trap_opf::{build_opf, opf_coloring, OpfProblem};

use crate::config::{ExperimentConfig, Method, PartitionMode, ProblemKind, Start};
use crate::error::BenchError;

/// Outcome of one solve in a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub success: bool,
    pub termination: String,
    pub outer_iterations: usize,
    pub total_inner: usize,
    pub total_scg: usize,
    pub objective: f64,
    pub constraint_norm: f64,
    pub error: Option<String>,
}

impl RunRecord {
    pub const CSV_HEADER: &'static str =
        "run,seed,success,termination,outer_iterations,total_inner,total_scg,objective,constraint_norm,error";

    fn csv_row(&self, out: &mut String) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{:e},{:e},{}",
            self.run,
            self.seed,
            self.success,
            self.termination,
            self.outer_iterations,
            self.total_inner,
            self.total_scg,
            self.objective,
            self.constraint_norm,
            self.error.as_deref().unwrap_or("").replace([',', '\n'], ";")
        );
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: Option<String>,
    pub case: String,
    pub kind: ProblemKind,
    pub formulation: Option<trap_opf::Formulation>,
    pub method: Method,
    pub partition: PartitionMode,
    pub colors: usize,
    pub dim: usize,
    pub constraints: usize,
    pub seed: u64,
    pub repeat: usize,
    /// Fields from here to `error` describe the first run.
    pub objective: Option<f64>,
    pub constraint_norm: Option<f64>,
    pub outer_iterations: usize,
    pub total_inner: usize,
    pub total_scg: usize,
    pub termination: String,
    pub success: bool,
    pub error: Option<String>,
    pub successes: usize,
    pub success_rate: f64,
}

/// Everything a run writes to disk, kept in memory.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub summary: Summary,
    pub table_csv: String,
    pub trace_csv: String,
    pub ledger_csv: String,
    pub runs: Vec<RunRecord>,
    /// Full report of the first run, absent when it errored.
    pub report: Option<OuterReport>,
}

impl Bundle {
    /// Every run reached `‖c‖₂ ≤ tol`.
    pub fn all_succeeded(&self) -> bool {
        self.summary.successes == self.summary.repeat
    }

    pub fn runs_csv(&self) -> String {
        let mut s = format!("{}\n", RunRecord::CSV_HEADER);
        for r in &self.runs {
            r.csv_row(&mut s);
        }
        s
    }

    pub fn summary_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.summary).unwrap_or_default();
        s.push('\n');
        s
    }

    /// Writes `table.csv`, `trace.csv`, `ledger.csv`, `summary.json` and,
    /// for batches, `runs.csv`.
    pub fn write(&self, dir: &Path) -> Result<(), BenchError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("table.csv"), &self.table_csv)?;
        std::fs::write(dir.join("trace.csv"), &self.trace_csv)?;
        std::fs::write(dir.join("ledger.csv"), &self.ledger_csv)?;
        std::fs::write(dir.join("summary.json"), self.summary_json())?;
        if self.runs.len() > 1 {
            std::fs::write(dir.join("runs.csv"), self.runs_csv())?;
        }
        Ok(())
    }
}

enum Built {
    Opf(OpfProblem),
    Qp(BoundOnly<BoxQp>, Partition),
}

fn build(cfg: &ExperimentConfig) -> Result<Built, BenchError> {
    match cfg.problem.kind {
        ProblemKind::Opf => {
            let case = cfg.load_case()?;
            Ok(Built::Opf(build_opf(&case, cfg.problem.formulation)))
        }
        ProblemKind::Qp => {
            let p = &cfg.problem;
            let spec = QpSpec {
                num_nodes: p.nodes,
                max_node_size: p.max_node_size,
                colors: p.colors,
                edge_prob: p.edge_prob,
                convex: p.convex,
                bounded_frac: p.bounded_frac,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
            let (qp, part) = BoxQp::random(&mut rng, &spec).map_err(|e| BenchError::Config(e.to_string()))?;
            Ok(Built::Qp(BoundOnly::new(qp), part))
        }
    }
}

fn start_point(built: &Built, start: Start, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match (built, start) {
        (Built::Opf(p), Start::Flat) => p.flat_start(),
        (Built::Opf(p), Start::Random) => p.random_start(&mut rng),
        (Built::Qp(p, _), Start::Flat) => {
            let mut x = vec![0.0; p.problem.dim()];
            let _ = p.problem.bounds().project_in_place(&mut x);
            x
        }
        (Built::Qp(p, _), Start::Random) => p.problem.random_point(&mut rng),
    }
}

fn outer_params(cfg: &ExperimentConfig) -> OuterParams {
    OuterParams {
        rho0: cfg.outer.rho0,
        factor: cfg.outer.factor,
        outer_tol: cfg.outer.tol,
        max_outer: cfg.outer.max_outer,
        require_inner_kkt: cfg.outer.require_inner_kkt,
        inner: cfg.trap,
        mu0: None,
    }
}

struct Solved {
    record: RunRecord,
    report: Option<OuterReport>,
    ledger: Option<CommLedger>,
}

fn solve_one<P: EqualityNlp + ?Sized>(
    cfg: &ExperimentConfig,
    p: &P,
    part: &Partition,
    x0: &[f64],
    run: usize,
    seed: u64,
    keep: bool,
) -> Solved {
    let params = outer_params(cfg);
    let mut ledger = if keep {
        auglag_coupling(p).ok().map(CommLedger::new)
    } else {
        None
    };
    let res = match cfg.outer.method {
        Method::Al => auglag_outer(p, x0, part, &params, ledger.as_mut()),
        Method::Lancelot => lancelot_outer(p, x0, part, &params, &cfg.lancelot, ledger.as_mut()),
    };
    match res {
        Ok(rep) => {
            let record = RunRecord {
                run,
                seed,
                success: rep.constraint_norm <= cfg.outer.tol,
                termination: serde_json::to_value(rep.termination)
                    .ok()
                    .and_then(|v| v.as_str().map(String::from))
                    .unwrap_or_default(),
                outer_iterations: rep.rows.len(),
                total_inner: rep.total_inner(),
                total_scg: rep.total_scg(),
                objective: rep.objective,
                constraint_norm: rep.constraint_norm,
                error: None,
            };
            Solved {
                record,
                report: keep.then_some(rep),
                ledger,
            }
        }
        Err(e) => {
            warn!("run {run} (seed {seed}) failed: {e}");
            Solved {
                record: RunRecord {
                    run,
                    seed,
                    success: false,
                    termination: "error".into(),
                    outer_iterations: 0,
                    total_inner: 0,
                    total_scg: 0,
                    objective: f64::NAN,
                    constraint_norm: f64::NAN,
                    error: Some(e.to_string()),
                },
                report: None,
                ledger,
            }
        }
    }
}

/// Runs `repeat` solves on `threads` workers; results come back in run order.
fn batch<P: EqualityNlp + Sync + ?Sized>(
    cfg: &ExperimentConfig,
    built: &Built,
    p: &P,
    part: &Partition,
) -> Vec<Solved> {
    let repeat = cfg.run.repeat;
    let threads = match cfg.run.threads {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        t => t,
    }
    .min(repeat);
    let one = |run: usize| {
        let seed = cfg.run.seed.wrapping_add(run as u64);
        let x0 = start_point(built, cfg.run.start, seed);
        solve_one(cfg, p, part, &x0, run, seed, run == 0)
    };
    if threads <= 1 {
        return (0..repeat).map(one).collect();
    }
    let mut slots: Vec<Option<Solved>> = (0..repeat).map(|_| None).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|w| {
                let one = &one;
                s.spawn(move || (w..repeat).step_by(threads).map(|r| (r, one(r))).collect::<Vec<_>>())
            })
            .collect();
        for h in handles {
            for (r, solved) in h.join().expect("worker panicked") {
                slots[r] = Some(solved);
            }
        }
    });
    slots.into_iter().map(|s| s.expect("every run is assigned")).collect()
}

/// Builds the problem, runs every repeat and assembles the bundle.
///
/// Solver failures end up inside the bundle; only config problems are errors.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Bundle, BenchError> {
    cfg.validate()?;
    let built = build(cfg)?;
    let (dim, m, formulation) = match &built {
        Built::Opf(p) => (p.dim(), p.num_constraints(), Some(p.formulation())),
        Built::Qp(p, _) => (p.dim(), 0, None),
    };
    let (mut solved, colors) = match (&built, cfg.run.partition) {
        (Built::Opf(p), PartitionMode::Colored) => {
            let part = opf_coloring(p).map_err(|e| BenchError::Config(e.to_string()))?;
            (batch(cfg, &built, p, &part), part.num_colors())
        }
        (Built::Qp(p, part), PartitionMode::Colored) => (batch(cfg, &built, p, part), part.num_colors()),
        (Built::Opf(p), PartitionMode::Centralized) => centralized(cfg, &built, p)?,
        (Built::Qp(p, _), PartitionMode::Centralized) => centralized(cfg, &built, p)?,
    };
    let first = solved.remove(0);
    let mut runs = vec![first.record.clone()];
    runs.extend(solved.into_iter().map(|s| s.record));
    let successes = runs.iter().filter(|r| r.success).count();
    let r0 = &first.record;
    info!(
        "{}: {} of {} runs reached |c| <= {:e}",
        cfg.case_label(),
        successes,
        runs.len(),
        cfg.outer.tol
    );
    let summary = Summary {
        name: cfg.name.clone(),
        case: cfg.case_label(),
        kind: cfg.problem.kind,
        formulation,
        method: cfg.outer.method,
        partition: cfg.run.partition,
        colors,
        dim,
        constraints: m,
        seed: cfg.run.seed,
        repeat: cfg.run.repeat,
        objective: Some(r0.objective).filter(|v| v.is_finite()),
        constraint_norm: Some(r0.constraint_norm).filter(|v| v.is_finite()),
        outer_iterations: r0.outer_iterations,
        total_inner: r0.total_inner,
        total_scg: r0.total_scg,
        termination: r0.termination.clone(),
        success: r0.success,
        error: r0.error.clone(),
        successes,
        success_rate: successes as f64 / runs.len() as f64,
    };
    let (table_csv, trace_csv) = match &first.report {
        Some(rep) => (rep.table_csv(), rep.trace_csv()),
        None => (
            format!("{}\n", OuterReport::TABLE_HEADER),
            format!("{}\n", trap_core::TrapReport::TRACE_HEADER),
        ),
    };
    Ok(Bundle {
        summary,
        table_csv,
        trace_csv,
        ledger_csv: first.ledger.map(|l| l.to_csv()).unwrap_or_default(),
        runs,
        report: first.report,
    })
}

fn centralized<P: EqualityNlp + Sync + ?Sized>(
    cfg: &ExperimentConfig,
    built: &Built,
    p: &P,
) -> Result<(Vec<Solved>, usize), BenchError> {
    let single = SingleBlock::new(p);
    let part = single.partition().map_err(|e| BenchError::Config(e.to_string()))?;
    Ok((batch(cfg, built, &single, &part), 1))
}

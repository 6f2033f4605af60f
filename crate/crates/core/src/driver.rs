//! The outer trust-region loop.

use std::fmt::Write as _;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::blockspace::{active_set, criticality, ActiveSet, Partition, DEFAULT_ACTIVE_TOL};
use crate::cauchy::{cauchy_sweep, CauchyParams};
use crate::comm::{CommEvent, CommLedger, Phase};
use crate::error::{Error, Result};
use crate::model::{NlpProblem, QuadraticModel};
use crate::refine::{scg_refine, RefineParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrapParams {
    pub delta0: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma3: f64,
    pub eta1: f64,
    pub eta2: f64,
    /// Stop once `‖P(x − g) − x‖₂ ≤ ε`.
    pub epsilon: f64,
    pub max_iters: usize,
    pub cauchy: CauchyParams,
    pub refine: RefineParams,
    /// Keep every accepted iterate in the report.
    pub record_iterates: bool,
}

impl Default for TrapParams {
    fn default() -> Self {
        TrapParams {
            delta0: 1.0,
            sigma1: 0.25,
            sigma2: 0.5,
            sigma3: 2.0,
            eta1: 0.1,
            eta2: 0.9,
            epsilon: 1e-5,
            max_iters: 300,
            cauchy: CauchyParams::default(),
            refine: RefineParams::default(),
            record_iterates: false,
        }
    }
}

impl TrapParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.delta0 > 0.0
            && 0.0 < self.sigma1
            && self.sigma1 < self.sigma2
            && self.sigma2 < 1.0
            && 1.0 < self.sigma3
            && 0.0 < self.eta1
            && self.eta1 < self.eta2
            && self.eta2 < 1.0
            && self.epsilon > 0.0;
        if !ok {
            return Err(Error::InvalidParameter(format!("trust-region parameters {self:?}")));
        }
        self.cauchy.validate()?;
        self.refine.validate()
    }

    /// Ratio-test outcome and the radius for the next iteration.
    pub fn classify(&self, rho: f64, delta: f64) -> (StepClass, f64) {
        if !(rho >= self.eta1) {
            (StepClass::Rejected, self.sigma2 * delta)
        } else if rho <= self.eta2 {
            (StepClass::Successful, delta)
        } else {
            (StepClass::VerySuccessful, self.sigma3 * delta)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepClass {
    Rejected,
    Successful,
    VerySuccessful,
}

impl StepClass {
    pub fn name(self) -> &'static str {
        match self {
            StepClass::Rejected => "rejected",
            StepClass::Successful => "successful",
            StepClass::VerySuccessful => "very_successful",
        }
    }

    pub fn accepted(self) -> bool {
        self != StepClass::Rejected
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrapTermination {
    KktTol,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// Radius used by this iteration.
    pub delta: f64,
    pub rho: f64,
    pub class: StepClass,
    /// Criticality at the iterate after the ratio test.
    pub kkt: f64,
    pub m_dec: f64,
    /// Objective at the iterate after the ratio test.
    pub value: f64,
    pub active_size: usize,
    pub cg_iters: usize,
    pub cum_scg: usize,
    pub cauchy_backtracks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapReport {
    pub x: Vec<f64>,
    pub value: f64,
    pub criticality: f64,
    pub iterations: usize,
    pub records: Vec<IterationRecord>,
    pub termination: TrapTermination,
    pub cum_scg: usize,
    /// Active set after every iteration, starting with the initial point.
    pub active_sets: Vec<ActiveSet>,
    /// Iterate after every iteration when requested, starting with `x0`.
    pub iterates: Vec<Vec<f64>>,
}

impl TrapReport {
    pub const TRACE_HEADER: &'static str =
        "outer,iter,delta,rho,class,kkt,m_dec,L,active_size,cum_scg";

    /// Trace rows without header, tagged with an outer iteration index.
    pub fn trace_rows(&self, outer: usize, out: &mut String) {
        for r in &self.records {
            let _ = writeln!(
                out,
                "{outer},{},{:e},{:e},{},{:e},{:e},{:e},{},{}",
                r.iter,
                r.delta,
                r.rho,
                r.class.name(),
                r.kkt,
                r.m_dec,
                r.value,
                r.active_size,
                r.cum_scg
            );
        }
    }

    pub fn trace_csv(&self) -> String {
        let mut s = format!("{}\n", Self::TRACE_HEADER);
        self.trace_rows(0, &mut s);
        s
    }
}

fn check_finite(v: f64, iteration: usize, x: &[f64]) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteObjective {
            iteration,
            x: x.to_vec(),
        })
    }
}

/// Minimises `problem` over its box starting from `x0`.
pub fn trap_solve<P: NlpProblem + ?Sized>(
    problem: &P,
    x0: &[f64],
    partition: &Partition,
    params: &TrapParams,
    mut ledger: Option<&mut CommLedger>,
) -> Result<TrapReport> {
    params.validate()?;
    let bounds = problem.bounds();
    if partition.node_sizes() != problem.node_sizes() {
        return Err(Error::InvalidPartition(
            "node sizes differ from the problem's".into(),
        ));
    }
    partition.validate_against(problem.coupling())?;
    if x0.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            found: x0.len(),
        });
    }
    let mut x = x0.to_vec();
    bounds.project_in_place(&mut x)?;
    if x != x0 {
        info!("initial point projected onto the box");
    }

    let mut model = QuadraticModel::from_problem(problem, &x)?;
    check_finite(model.value, 0, &x)?;
    let mut crit = criticality(&x, &model.gradient, bounds)?;
    let mut delta = params.delta0;
    let mut records = Vec::new();
    let mut active_sets = vec![active_set(&x, bounds, DEFAULT_ACTIVE_TOL)];
    let mut iterates = Vec::new();
    if params.record_iterates {
        iterates.push(x.clone());
    }
    let mut cum_scg = 0;
    let mut termination = TrapTermination::MaxIters;
    let noise = 10.0 * f64::EPSILON;

    for iter in 0..=params.max_iters {
        if crit <= params.epsilon {
            termination = TrapTermination::KktTol;
            break;
        }
        if iter == params.max_iters {
            break;
        }
        if let Some(l) = ledger.as_deref_mut() {
            l.set_iteration(iter);
        }
        let cauchy = cauchy_sweep(&model, bounds, partition, delta, &params.cauchy, ledger.as_deref_mut())?;
        let refined = scg_refine(
            &model,
            bounds,
            partition,
            &cauchy,
            delta,
            &params.refine,
            ledger.as_deref_mut(),
        )?;
        cum_scg += refined.cg_iterations;
        let y = refined.y;
        let m_dec = model.decrease(&y)?;
        if !(m_dec > 0.0) {
            if crit <= 10.0 * params.epsilon {
                termination = TrapTermination::KktTol;
                break;
            }
            return Err(Error::NoModelDecrease {
                iteration: iter,
                criticality: crit,
            });
        }
        let ly = check_finite(problem.value(&y), iter, &y)?;
        let actual = model.value - ly;
        let scale = noise * model.value.abs().max(1.0);
        // Both decreases lost in rounding: judge the step by its model.
        let rho = if m_dec <= scale && actual >= -scale {
            1.0
        } else {
            actual / m_dec
        };
        if let Some(l) = ledger.as_deref_mut() {
            l.account(CommEvent::Reduction { scalars: 2 }, Phase::RatioTest)?;
            l.account(CommEvent::Broadcast { scalars: 1 }, Phase::RatioTest)?;
        }
        let (class, next_delta) = params.classify(rho, delta);
        let used_delta = delta;
        delta = next_delta;
        if class.accepted() {
            x = y;
            model = QuadraticModel::from_problem(problem, &x)?;
            model.value = ly;
            crit = criticality(&x, &model.gradient, bounds)?;
            if let Some(l) = ledger.as_deref_mut() {
                l.account(CommEvent::Reduction { scalars: 1 }, Phase::Termination)?;
            }
        }
        let act = active_set(&x, bounds, DEFAULT_ACTIVE_TOL);
        debug!(
            "iter {iter}: delta {used_delta:.3e} rho {rho:.3e} {} kkt {crit:.3e} cg {}",
            class.name(),
            refined.cg_iterations
        );
        records.push(IterationRecord {
            iter,
            delta: used_delta,
            rho,
            class,
            kkt: crit,
            m_dec,
            value: model.value,
            active_size: act.len(),
            cg_iters: refined.cg_iterations,
            cum_scg,
            cauchy_backtracks: cauchy.backtracks.iter().sum(),
        });
        active_sets.push(act);
        if params.record_iterates {
            iterates.push(x.clone());
        }
    }

    Ok(TrapReport {
        value: model.value,
        criticality: crit,
        iterations: records.len(),
        x,
        records,
        termination,
        cum_scg,
        active_sets,
        iterates,
    })
}

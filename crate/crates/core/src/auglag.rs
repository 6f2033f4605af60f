//! Augmented Lagrangian wrappers and outer loops for equality constraints.
//!
//! The inner problem is `f + μᵀc + (ϱ/2)‖c‖²` over the box, solved with
//! [`trap_solve`]. Two outer strategies update `μ` and `ϱ`: a plain
//! first-order loop and an adaptive one that only updates multipliers when
//! the constraint violation falls below a shrinking threshold.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use log::info;
use serde::{Deserialize, Serialize};

use crate::blockspace::{BoxSet, CouplingGraph, Partition};
use crate::comm::{CommEvent, CommLedger, Phase};
use crate::driver::{trap_solve, TrapParams, TrapReport};
use crate::error::{Error, Result};
use crate::model::{BlockSparseMatrix, NlpProblem};

/// Row-compressed sparsity of the constraint Jacobian.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JacobianStructure {
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
}

impl JacobianStructure {
    pub fn num_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, j: usize) -> &[usize] {
        &self.cols[self.row_ptr[j]..self.row_ptr[j + 1]]
    }

    pub fn from_rows(rows: &[Vec<usize>]) -> Self {
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        for r in rows {
            cols.extend_from_slice(r);
            row_ptr.push(cols.len());
        }
        JacobianStructure { row_ptr, cols }
    }
}

/// `min f(x)` subject to `c(x) = 0` and `x` in a box.
pub trait EqualityNlp {
    fn node_sizes(&self) -> &[usize];
    fn bounds(&self) -> &BoxSet;
    fn num_constraints(&self) -> usize;
    fn objective(&self, x: &[f64]) -> f64;
    fn objective_gradient(&self, x: &[f64], out: &mut [f64]);
    fn add_objective_hessian(&self, x: &[f64], h: &mut BlockSparseMatrix) -> Result<()>;
    /// Node pairs coupled through the objective alone.
    fn objective_coupling(&self) -> Vec<(usize, usize)>;
    fn constraints(&self, x: &[f64], out: &mut [f64]);
    fn jacobian_structure(&self) -> &JacobianStructure;
    /// Values aligned with [`EqualityNlp::jacobian_structure`].
    fn jacobian_values(&self, x: &[f64], out: &mut [f64]);
    /// Adds `Σ_j w_j ∇²c_j(x)`.
    fn add_constraint_hessians(&self, x: &[f64], weights: &[f64], h: &mut BlockSparseMatrix) -> Result<()>;

    fn dim(&self) -> usize {
        self.node_sizes().iter().sum()
    }

    fn constraint_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; self.num_constraints()];
        self.constraints(x, &mut c);
        c
    }
}

/// A bound-constrained problem seen as an equality problem with no rows.
pub struct BoundOnly<P: NlpProblem> {
    pub problem: P,
    structure: JacobianStructure,
}

impl<P: NlpProblem> BoundOnly<P> {
    pub fn new(problem: P) -> Self {
        BoundOnly {
            problem,
            structure: JacobianStructure::from_rows(&[]),
        }
    }
}

impl<P: NlpProblem> EqualityNlp for BoundOnly<P> {
    fn node_sizes(&self) -> &[usize] {
        self.problem.node_sizes()
    }

    fn bounds(&self) -> &BoxSet {
        self.problem.bounds()
    }

    fn num_constraints(&self) -> usize {
        0
    }

    fn objective(&self, x: &[f64]) -> f64 {
        self.problem.value(x)
    }

    fn objective_gradient(&self, x: &[f64], out: &mut [f64]) {
        self.problem.gradient(x, out)
    }

    fn add_objective_hessian(&self, x: &[f64], h: &mut BlockSparseMatrix) -> Result<()> {
        let mut own = BlockSparseMatrix::new(self.problem.node_sizes(), self.problem.coupling())?;
        self.problem.hessian(x, &mut own)?;
        h.add_matrix(&own)
    }

    fn objective_coupling(&self) -> Vec<(usize, usize)> {
        self.problem.coupling().edges().collect()
    }

    fn constraints(&self, _x: &[f64], _out: &mut [f64]) {}

    fn jacobian_structure(&self) -> &JacobianStructure {
        &self.structure
    }

    fn jacobian_values(&self, _x: &[f64], _out: &mut [f64]) {}

    fn add_constraint_hessians(&self, _x: &[f64], _w: &[f64], _h: &mut BlockSparseMatrix) -> Result<()> {
        Ok(())
    }
}

/// Merges every variable into one node. With the single-colour partition
/// the Cauchy sweep becomes one projected-gradient search on the full vector.
pub struct SingleBlock<'a, P: EqualityNlp + ?Sized> {
    pub problem: &'a P,
    sizes: [usize; 1],
}

impl<'a, P: EqualityNlp + ?Sized> SingleBlock<'a, P> {
    pub fn new(problem: &'a P) -> Self {
        SingleBlock {
            sizes: [problem.dim()],
            problem,
        }
    }

    pub fn partition(&self) -> Result<Partition> {
        Partition::single_color(self.sizes.to_vec())
    }
}

impl<P: EqualityNlp + ?Sized> EqualityNlp for SingleBlock<'_, P> {
    fn node_sizes(&self) -> &[usize] {
        &self.sizes
    }

    fn bounds(&self) -> &BoxSet {
        self.problem.bounds()
    }

    fn num_constraints(&self) -> usize {
        self.problem.num_constraints()
    }

    fn objective(&self, x: &[f64]) -> f64 {
        self.problem.objective(x)
    }

    fn objective_gradient(&self, x: &[f64], out: &mut [f64]) {
        self.problem.objective_gradient(x, out)
    }

    fn add_objective_hessian(&self, x: &[f64], h: &mut BlockSparseMatrix) -> Result<()> {
        self.problem.add_objective_hessian(x, h)
    }

    fn objective_coupling(&self) -> Vec<(usize, usize)> {
        Vec::new()
    }

    fn constraints(&self, x: &[f64], out: &mut [f64]) {
        self.problem.constraints(x, out)
    }

    fn jacobian_structure(&self) -> &JacobianStructure {
        self.problem.jacobian_structure()
    }

    fn jacobian_values(&self, x: &[f64], out: &mut [f64]) {
        self.problem.jacobian_values(x, out)
    }

    fn add_constraint_hessians(&self, x: &[f64], weights: &[f64], h: &mut BlockSparseMatrix) -> Result<()> {
        self.problem.add_constraint_hessians(x, weights, h)
    }
}

/// Node coupling of the augmented Lagrangian: objective coupling plus every
/// pair of nodes that appear in a common constraint.
pub fn auglag_coupling<P: EqualityNlp + ?Sized>(p: &P) -> Result<CouplingGraph> {
    let sizes = p.node_sizes();
    let mut node_of = Vec::with_capacity(p.dim());
    for (i, &s) in sizes.iter().enumerate() {
        node_of.extend(std::iter::repeat(i).take(s));
    }
    let js = p.jacobian_structure();
    let mut edges: BTreeSet<(usize, usize)> = p.objective_coupling().into_iter().collect();
    for j in 0..js.num_rows() {
        let nodes: BTreeSet<usize> = js.row(j).iter().map(|&c| node_of[c]).collect();
        let nodes: Vec<usize> = nodes.into_iter().collect();
        for a in 0..nodes.len() {
            for b in a + 1..nodes.len() {
                edges.insert((nodes[a], nodes[b]));
            }
        }
    }
    CouplingGraph::new(sizes.len(), edges)
}

/// Bound-constrained oracle for fixed `μ` and `ϱ`.
pub struct AugLagOracle<'a, P: EqualityNlp + ?Sized> {
    pub problem: &'a P,
    pub mu: Vec<f64>,
    pub rho: f64,
    coupling: CouplingGraph,
}

impl<'a, P: EqualityNlp + ?Sized> AugLagOracle<'a, P> {
    pub fn set_multipliers(&mut self, mu: Vec<f64>, rho: f64) {
        self.mu = mu;
        self.rho = rho;
    }

    fn shifted(&self, c: &[f64]) -> Vec<f64> {
        self.mu.iter().zip(c).map(|(m, c)| m + self.rho * c).collect()
    }
}

pub fn auglag_oracle<P: EqualityNlp + ?Sized>(p: &P, mu: Vec<f64>, rho: f64) -> Result<AugLagOracle<'_, P>> {
    if !(rho > 0.0) {
        return Err(Error::InvalidParameter(format!("penalty {rho}")));
    }
    if mu.len() != p.num_constraints() {
        return Err(Error::DimensionMismatch {
            expected: p.num_constraints(),
            found: mu.len(),
        });
    }
    Ok(AugLagOracle {
        coupling: auglag_coupling(p)?,
        problem: p,
        mu,
        rho,
    })
}

impl<P: EqualityNlp + ?Sized> NlpProblem for AugLagOracle<'_, P> {
    fn node_sizes(&self) -> &[usize] {
        self.problem.node_sizes()
    }

    fn bounds(&self) -> &BoxSet {
        self.problem.bounds()
    }

    fn coupling(&self) -> &CouplingGraph {
        &self.coupling
    }

    fn value(&self, x: &[f64]) -> f64 {
        let c = self.problem.constraint_vec(x);
        let lin: f64 = self.mu.iter().zip(&c).map(|(m, c)| m * c).sum();
        let sq: f64 = c.iter().map(|c| c * c).sum();
        self.problem.objective(x) + lin + 0.5 * self.rho * sq
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        self.problem.objective_gradient(x, out);
        let c = self.problem.constraint_vec(x);
        let w = self.shifted(&c);
        let js = self.problem.jacobian_structure();
        let mut vals = vec![0.0; js.nnz()];
        self.problem.jacobian_values(x, &mut vals);
        for j in 0..js.num_rows() {
            for k in js.row_ptr[j]..js.row_ptr[j + 1] {
                out[js.cols[k]] += vals[k] * w[j];
            }
        }
    }

    fn hessian(&self, x: &[f64], h: &mut BlockSparseMatrix) -> Result<()> {
        self.problem.add_objective_hessian(x, h)?;
        let c = self.problem.constraint_vec(x);
        let w = self.shifted(&c);
        self.problem.add_constraint_hessians(x, &w, h)?;
        let js = self.problem.jacobian_structure();
        let mut vals = vec![0.0; js.nnz()];
        self.problem.jacobian_values(x, &mut vals);
        for j in 0..js.num_rows() {
            let r = js.row_ptr[j]..js.row_ptr[j + 1];
            for a in r.clone() {
                for b in a..r.end {
                    let (ca, cb) = (js.cols[a], js.cols[b]);
                    let v = self.rho * vals[a] * vals[b];
                    if ca == cb {
                        // Repeated column within a row: both cross terms land
                        // on the diagonal.
                        h.add(ca, ca, if a == b { v } else { 2.0 * v })?;
                    } else {
                        h.add(ca, cb, v)?;
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuterTermination {
    Converged,
    MaxOuter,
}

/// One row of the outer-iteration table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterRow {
    pub outer: usize,
    pub inner_iters: usize,
    /// sCG passes spent during this outer iteration.
    pub cum_scg: usize,
    pub inner_kkt: f64,
    pub constraint_norm: f64,
    pub rho: f64,
    pub objective: f64,
    pub multiplier_update: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterReport {
    pub x: Vec<f64>,
    pub mu: Vec<f64>,
    pub rho: f64,
    pub objective: f64,
    pub constraint_norm: f64,
    pub rows: Vec<OuterRow>,
    pub termination: OuterTermination,
    /// Inner solver reports, one per outer iteration.
    pub inner: Vec<TrapReport>,
}

impl OuterReport {
    pub const TABLE_HEADER: &'static str =
        "Outer iter. count,# inner it.,# cum. sCG,Inner KKT,PF eq. constr.";

    pub fn table_csv(&self) -> String {
        let mut s = format!("{}\n", Self::TABLE_HEADER);
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{:.2e},{:.2e}",
                r.outer, r.inner_iters, r.cum_scg, r.inner_kkt, r.constraint_norm
            );
        }
        s
    }

    pub fn trace_csv(&self) -> String {
        let mut s = format!("{}\n", TrapReport::TRACE_HEADER);
        for (o, rep) in self.inner.iter().enumerate() {
            rep.trace_rows(o + 1, &mut s);
        }
        s
    }

    pub fn total_scg(&self) -> usize {
        self.rows.iter().map(|r| r.cum_scg).sum()
    }

    pub fn total_inner(&self) -> usize {
        self.rows.iter().map(|r| r.inner_iters).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OuterParams {
    pub rho0: f64,
    pub factor: f64,
    /// Target on `‖c‖₂`.
    pub outer_tol: f64,
    pub max_outer: usize,
    /// Also demand inner criticality `≤ inner.epsilon` before stopping.
    /// Off by default: feasibility alone ends the loop.
    pub require_inner_kkt: bool,
    pub inner: TrapParams,
    pub mu0: Option<Vec<f64>>,
}

impl Default for OuterParams {
    fn default() -> Self {
        OuterParams {
            rho0: 10.0,
            factor: 30.0,
            outer_tol: 1e-7,
            max_outer: 30,
            require_inner_kkt: false,
            inner: TrapParams::default(),
            mu0: None,
        }
    }
}

impl OuterParams {
    fn validate(&self) -> Result<()> {
        if !(self.rho0 > 0.0) || !(self.factor > 1.0) || !(self.outer_tol > 0.0) || self.max_outer == 0 {
            return Err(Error::InvalidParameter(format!(
                "outer loop: rho0 {}, factor {}, tol {}, cap {}",
                self.rho0, self.factor, self.outer_tol, self.max_outer
            )));
        }
        self.inner.validate()
    }

    fn converged(&self, cn: f64, kkt: f64, eps: f64) -> bool {
        cn <= self.outer_tol && (!self.require_inner_kkt || kkt <= eps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LancelotParams {
    /// Exponent applied to `ϱ` when tightening `η` after a multiplier update.
    pub beta_eta: f64,
    /// Exponent applied to `ϱ` when resetting `η` after a penalty increase.
    pub alpha_eta: f64,
    /// Inner tolerance `ω` is never driven below this.
    pub omega_floor: Option<f64>,
}

impl Default for LancelotParams {
    fn default() -> Self {
        LancelotParams {
            beta_eta: 0.9,
            alpha_eta: 0.1,
            omega_floor: None,
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |s, a| s + a * a).sqrt()
}

struct Outer<'a, P: EqualityNlp + ?Sized> {
    oracle: AugLagOracle<'a, P>,
    partition: &'a Partition,
    x: Vec<f64>,
    rows: Vec<OuterRow>,
    inner: Vec<TrapReport>,
}

impl<'a, P: EqualityNlp + ?Sized> Outer<'a, P> {
    fn new(p: &'a P, x0: &[f64], partition: &'a Partition, params: &OuterParams) -> Result<Self> {
        params.validate()?;
        let mu = params.mu0.clone().unwrap_or_else(|| vec![0.0; p.num_constraints()]);
        Ok(Outer {
            oracle: auglag_oracle(p, mu, params.rho0)?,
            partition,
            x: x0.to_vec(),
            rows: Vec::new(),
            inner: Vec::new(),
        })
    }

    /// Runs one inner solve and returns `(c, ‖c‖, inner report)`.
    fn solve(
        &mut self,
        outer: usize,
        inner: &TrapParams,
        ledger: &mut Option<&mut CommLedger>,
    ) -> Result<(Vec<f64>, f64, TrapReport)> {
        if let Some(l) = ledger.as_deref_mut() {
            l.set_outer(outer);
        }
        let rep = trap_solve(&self.oracle, &self.x, self.partition, inner, ledger.as_deref_mut())?;
        self.x = rep.x.clone();
        let c = self.oracle.problem.constraint_vec(&self.x);
        let cn = norm(&c);
        if let Some(l) = ledger.as_deref_mut() {
            l.set_iteration(rep.iterations);
            l.account(CommEvent::Reduction { scalars: 1 }, Phase::DualUpdate)?;
        }
        Ok((c, cn, rep))
    }

    fn record(&mut self, outer: usize, rep: TrapReport, cn: f64, update: bool) {
        info!(
            "outer {outer}: inner {} ({:?}) scg {} kkt {:.2e} |c| {:.2e} rho {:.1e}",
            rep.iterations, rep.termination, rep.cum_scg, rep.criticality, cn, self.oracle.rho
        );
        self.rows.push(OuterRow {
            outer,
            inner_iters: rep.iterations,
            cum_scg: rep.cum_scg,
            inner_kkt: rep.criticality,
            constraint_norm: cn,
            rho: self.oracle.rho,
            objective: self.oracle.problem.objective(&rep.x),
            multiplier_update: update,
        });
        self.inner.push(rep);
    }

    fn update_mu(&mut self, c: &[f64]) {
        let rho = self.oracle.rho;
        for (m, ci) in self.oracle.mu.iter_mut().zip(c) {
            *m += rho * ci;
        }
    }

    fn finish(self, termination: OuterTermination) -> OuterReport {
        let p = self.oracle.problem;
        let c = p.constraint_vec(&self.x);
        OuterReport {
            objective: p.objective(&self.x),
            constraint_norm: norm(&c),
            mu: self.oracle.mu,
            rho: self.oracle.rho,
            x: self.x,
            rows: self.rows,
            termination,
            inner: self.inner,
        }
    }
}

/// First-order multiplier updates with a geometric penalty increase.
pub fn auglag_outer<P: EqualityNlp + ?Sized>(
    p: &P,
    x0: &[f64],
    partition: &Partition,
    params: &OuterParams,
    mut ledger: Option<&mut CommLedger>,
) -> Result<OuterReport> {
    let mut st = Outer::new(p, x0, partition, params)?;
    for outer in 1..=params.max_outer {
        let (c, cn, rep) = st.solve(outer, &params.inner, &mut ledger)?;
        let done = params.converged(cn, rep.criticality, params.inner.epsilon);
        st.record(outer, rep, cn, true);
        st.update_mu(&c);
        if done {
            return Ok(st.finish(OuterTermination::Converged));
        }
        st.oracle.rho *= params.factor;
    }
    Ok(st.finish(OuterTermination::MaxOuter))
}

/// Adaptive loop: multipliers move only when `‖c‖ ≤ η`, otherwise the
/// penalty grows. Inner solves stop at tolerance `ω`.
pub fn lancelot_outer<P: EqualityNlp + ?Sized>(
    p: &P,
    x0: &[f64],
    partition: &Partition,
    params: &OuterParams,
    lancelot: &LancelotParams,
    mut ledger: Option<&mut CommLedger>,
) -> Result<OuterReport> {
    let mut st = Outer::new(p, x0, partition, params)?;
    let floor = lancelot.omega_floor.unwrap_or(params.inner.epsilon);
    let rho0 = params.rho0;
    let mut omega = 1.0 / rho0;
    let mut eta = 1.0 / rho0.powf(lancelot.alpha_eta);
    for outer in 1..=params.max_outer {
        let inner = TrapParams {
            epsilon: omega.max(floor),
            ..params.inner
        };
        let (c, cn, rep) = st.solve(outer, &inner, &mut ledger)?;
        let done = params.converged(cn, rep.criticality, inner.epsilon);
        let update = cn <= eta || done;
        st.record(outer, rep, cn, update);
        if update {
            st.update_mu(&c);
            if done {
                return Ok(st.finish(OuterTermination::Converged));
            }
            let rho = st.oracle.rho;
            omega /= rho;
            eta /= rho.powf(lancelot.beta_eta);
        } else {
            st.oracle.rho *= params.factor;
            let rho = st.oracle.rho;
            omega = 1.0 / rho;
            eta = 1.0 / rho.powf(lancelot.alpha_eta);
        }
    }
    Ok(st.finish(OuterTermination::MaxOuter))
}

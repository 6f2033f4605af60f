//! Safeguarded conjugate gradients on the free subspace of the Cauchy point.
//!
//! The refinement minimises the proximally regularised model
//! `m(y) + (σ/2)‖y − z‖²` over the coordinates that are not active at `z`,
//! starting from `z`, inside the box `Ω ∩ {‖y − x‖∞ ≤ γ2 Δ}`. The iteration
//! is the rearranged CG variant whose two inner products are formed in the
//! same stage, so one pass needs a single pair of global sums.

use log::warn;
use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::blockspace::{active_set, BoxSet, Partition, DEFAULT_ACTIVE_TOL};
use crate::cauchy::CauchyResult;
use crate::comm::{CommEvent, CommLedger, Phase};
use crate::error::{Error, Result};
use crate::model::QuadraticModel;

/// Rule for the relative residual tolerance ξ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Forcing {
    /// `ξ = min(0.5, √‖Zᵀg‖)`.
    Adaptive,
    /// `ξ = min(0.5, ‖Zᵀg‖^p)`.
    Power(f64),
    Fixed(f64),
}

impl Forcing {
    pub fn xi(&self, reduced_gradient_norm: f64) -> f64 {
        match *self {
            Forcing::Adaptive => 0.5f64.min(reduced_gradient_norm.sqrt()),
            Forcing::Power(p) => 0.5f64.min(reduced_gradient_norm.powf(p)),
            Forcing::Fixed(xi) => xi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineParams {
    /// Proximal weight; zero switches the regularisation off.
    pub sigma: f64,
    pub forcing: Forcing,
    /// Required fraction of the Cauchy decrease.
    pub gamma1: f64,
    /// Refinement trust region is `γ2 Δ` in the sup norm.
    pub gamma2: f64,
    /// Iteration cap; `None` means five times the dimension.
    pub max_cg_iters: Option<usize>,
    pub precondition: bool,
}

impl Default for RefineParams {
    fn default() -> Self {
        RefineParams {
            sigma: 1e-10,
            forcing: Forcing::Adaptive,
            gamma1: 0.1,
            gamma2: 1.1,
            max_cg_iters: None,
            precondition: false,
        }
    }
}

impl RefineParams {
    pub fn validate(&self) -> Result<()> {
        let xi_ok = match self.forcing {
            Forcing::Adaptive => true,
            Forcing::Power(p) => p > 0.0,
            Forcing::Fixed(xi) => xi > 0.0 && xi < 1.0,
        };
        let ok = self.sigma >= 0.0
            && self.sigma.is_finite()
            && xi_ok
            && 0.0 < self.gamma1
            && self.gamma1 < 1.0
            && self.gamma2 >= 1.0
            && self.max_cg_iters != Some(0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("refinement parameters {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefineTermination {
    Converged,
    NegativeCurvature,
    BoundaryHit,
    MaxIters,
}

impl RefineTermination {
    pub fn name(self) -> &'static str {
        match self {
            RefineTermination::Converged => "converged",
            RefineTermination::NegativeCurvature => "negative_curvature",
            RefineTermination::BoundaryHit => "boundary_hit",
            RefineTermination::MaxIters => "max_iters",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineResult {
    pub y: Vec<f64>,
    /// Summation passes performed; each pass costs one pair of global sums.
    pub cg_iterations: usize,
    pub termination: RefineTermination,
    /// `m(z) − m(y)`.
    pub model_decrease_from_cauchy: f64,
    /// Reduced residual norm at every pass.
    pub residuals: Vec<f64>,
    /// Stopping threshold `ξ ‖Zᵀg‖`.
    pub tolerance: f64,
    /// True when the CG point lost the required fraction of the Cauchy
    /// decrease and `z` was returned instead.
    pub fell_back: bool,
}

/// Gradient and Hessian operator of the regularised model around `x`:
/// `g_σ = g − σ (z − x)` and `v ↦ B v + σ v`.
pub fn regularised_model<'a>(
    model: &'a QuadraticModel,
    z: &[f64],
    sigma: f64,
) -> (Vec<f64>, impl Fn(&[f64]) -> Vec<f64> + 'a) {
    let g: Vec<f64> = model
        .gradient
        .iter()
        .zip(z.iter().zip(&model.x))
        .map(|(g, (zi, xi))| g - sigma * (zi - xi))
        .collect();
    let apply = move |v: &[f64]| {
        let mut out = vec![0.0; v.len()];
        model.hessian.hess_vec_into(v, &mut out);
        for (o, vi) in out.iter_mut().zip(v) {
            *o += sigma * vi;
        }
        out
    };
    (g, apply)
}

/// Per-node inverse of the free part of the diagonal blocks of `B + σI`.
pub struct BlockJacobi {
    // (node offset, free local indices, factor); None means identity.
    blocks: Vec<(usize, Vec<usize>, Option<Cholesky<f64, nalgebra::Dyn>>)>,
}

impl BlockJacobi {
    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        let mut out = r.to_vec();
        for (off, free, chol) in &self.blocks {
            if let Some(c) = chol {
                let rhs = DVector::from_iterator(free.len(), free.iter().map(|&a| r[off + a]));
                let sol = c.solve(&rhs);
                for (k, &a) in free.iter().enumerate() {
                    out[off + a] = sol[k];
                }
            }
        }
        out
    }
}

pub fn block_jacobi_preconditioner(
    model: &QuadraticModel,
    sigma: f64,
    partition: &Partition,
    free: &[bool],
) -> BlockJacobi {
    let mut blocks = Vec::with_capacity(partition.num_nodes());
    for i in 0..partition.num_nodes() {
        let off = partition.offsets()[i];
        let loc: Vec<usize> = (0..partition.node_sizes()[i])
            .filter(|&a| free[off + a])
            .collect();
        if loc.is_empty() {
            continue;
        }
        let full = model.hessian.diagonal_block(i);
        let base = DMatrix::from_fn(loc.len(), loc.len(), |a, b| {
            full[(loc[a], loc[b])] + if a == b { sigma } else { 0.0 }
        });
        let mut chol = Cholesky::new(base.clone());
        let mut tau = 1e-8;
        let scale = base.amax().max(1.0);
        while chol.is_none() && tau <= 1e8 * scale {
            let shifted = &base + DMatrix::identity(loc.len(), loc.len()) * tau;
            chol = Cholesky::new(shifted);
            tau *= 2.0;
        }
        if chol.is_none() {
            warn!("preconditioner block of node {i} not factorisable; using identity");
        }
        blocks.push((off, loc, chol));
    }
    BlockJacobi { blocks }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest `a ≥ 0` with `lo ≤ y + a p ≤ hi` on the free coordinates.
fn max_step(y: &[f64], p: &[f64], lo: &[f64], hi: &[f64], free: &[bool]) -> f64 {
    let mut a = f64::INFINITY;
    for j in 0..y.len() {
        if !free[j] || p[j] == 0.0 {
            continue;
        }
        let r = if p[j] > 0.0 {
            (hi[j] - y[j]) / p[j]
        } else {
            (lo[j] - y[j]) / p[j]
        };
        a = a.min(r.max(0.0));
    }
    a
}

#[allow(clippy::too_many_arguments)]
pub fn scg_refine(
    model: &QuadraticModel,
    bounds: &BoxSet,
    partition: &Partition,
    cauchy: &CauchyResult,
    delta: f64,
    params: &RefineParams,
    mut ledger: Option<&mut CommLedger>,
) -> Result<RefineResult> {
    params.validate()?;
    let n = model.dim();
    let x = &model.x;
    let z = &cauchy.z;
    bounds.check_feasible(z, DEFAULT_ACTIVE_TOL)?;
    let free: Vec<bool> = active_set(z, bounds, DEFAULT_ACTIVE_TOL)
        .mask(n)
        .into_iter()
        .map(|a| !a)
        .collect();
    let mask = |v: &mut [f64]| {
        for (vi, &f) in v.iter_mut().zip(&free) {
            if !f {
                *vi = 0.0;
            }
        }
    };
    let mut zg = model.gradient.clone();
    mask(&mut zg);
    let zg_norm = dot(&zg, &zg).sqrt();
    let tolerance = params.forcing.xi(zg_norm) * zg_norm;
    let cauchy_decrease = model.decrease(z)?;

    let done = |y: Vec<f64>, iters, term, residuals, fell_back| -> Result<RefineResult> {
        let dec = model.decrease(&y)?;
        Ok(RefineResult {
            model_decrease_from_cauchy: dec - cauchy_decrease,
            y,
            cg_iterations: iters,
            termination: term,
            residuals,
            tolerance,
            fell_back,
        })
    };
    if !free.iter().any(|&f| f) {
        return done(z.clone(), 0, RefineTermination::Converged, Vec::new(), false);
    }

    let lo: Vec<f64> = (0..n)
        .map(|j| bounds.lower()[j].max(x[j] - params.gamma2 * delta))
        .collect();
    let hi: Vec<f64> = (0..n)
        .map(|j| bounds.upper()[j].min(x[j] + params.gamma2 * delta))
        .collect();
    let (g_sigma, apply) = regularised_model(model, z, params.sigma);
    let apply_free = |v: &[f64]| {
        let mut out = apply(v);
        mask(&mut out);
        out
    };
    let precond = params
        .precondition
        .then(|| block_jacobi_preconditioner(model, params.sigma, partition, &free));
    let max_iters = params.max_cg_iters.unwrap_or(5 * n);
    let all_nodes: Vec<usize> = (0..partition.num_nodes()).collect();
    let exchange = |l: &mut Option<&mut CommLedger>| -> Result<()> {
        if let Some(l) = l.as_deref_mut() {
            l.exchange_all(Phase::Scg, &all_nodes, |i| partition.node_sizes()[i])?;
        }
        Ok(())
    };

    // Residual at the Cauchy point.
    let mut y = z.clone();
    let step0: Vec<f64> = z.iter().zip(x).map(|(a, b)| a - b).collect();
    exchange(&mut ledger)?;
    let bs0 = apply(&step0);
    let mut r: Vec<f64> = g_sigma.iter().zip(&bs0).map(|(g, b)| -(g + b)).collect();
    mask(&mut r);

    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut t = 0.0;
    let mut u_prev = 0.0;
    let mut residuals = Vec::new();
    let mut iters = 0;
    let termination = loop {
        let w = match &precond {
            Some(m) => {
                let mut w = m.apply(&r);
                mask(&mut w);
                w
            }
            None => r.clone(),
        };
        exchange(&mut ledger)?;
        let s = apply_free(&w);
        let u = dot(&r, &w);
        let delta_hat = dot(&w, &s);
        let rr = dot(&r, &r);
        iters += 1;
        if let Some(l) = ledger.as_deref_mut() {
            // u, plus ‖r‖² when preconditioned and ‖Zᵀg‖² on the first pass.
            let extra = usize::from(precond.is_some()) + usize::from(iters == 1);
            l.account(CommEvent::Reduction { scalars: 1 + extra }, Phase::Scg)?;
            l.account(CommEvent::Reduction { scalars: 1 }, Phase::Scg)?;
            l.account(CommEvent::Broadcast { scalars: 2 }, Phase::Scg)?;
        }
        residuals.push(rr.sqrt());
        if rr.sqrt() <= tolerance || u <= 0.0 {
            break RefineTermination::Converged;
        }
        let beta = if iters == 1 { 0.0 } else { u / u_prev };
        t = delta_hat - beta * beta * t;
        for j in 0..n {
            p[j] = w[j] + beta * p[j];
            v[j] = s[j] + beta * v[j];
        }
        let a_max = max_step(&y, &p, &lo, &hi, &free);
        if let Some(l) = ledger.as_deref_mut() {
            l.account(CommEvent::MinSearch, Phase::Scg)?;
        }
        let (a, stop) = if !(t > 1e-30 * u) {
            (a_max, Some(RefineTermination::NegativeCurvature))
        } else if u / t >= a_max {
            (a_max, Some(RefineTermination::BoundaryHit))
        } else {
            (u / t, None)
        };
        if a.is_finite() {
            for j in 0..n {
                y[j] += a * p[j];
                r[j] -= a * v[j];
            }
        }
        u_prev = u;
        if let Some(term) = stop {
            break term;
        }
        if iters >= max_iters {
            break RefineTermination::MaxIters;
        }
    };

    bounds.project_in_place(&mut y)?;
    for j in 0..n {
        if !free[j] {
            y[j] = z[j];
        } else {
            y[j] = y[j].max(lo[j].min(z[j])).min(hi[j].max(z[j]));
        }
    }
    if model.decrease(&y)? < params.gamma1 * cauchy_decrease {
        return done(z.clone(), iters, termination, residuals, true);
    }
    done(y, iters, termination, residuals, false)
}

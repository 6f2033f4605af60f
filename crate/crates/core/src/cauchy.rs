//! Alternating projected-gradient sweep producing the Cauchy point.
//!
//! Colours are visited in order. Every node of the current colour takes a
//! projected gradient step on the model at the point where earlier colours
//! already hold their new values, with its own step size found by
//! backtracking. Nodes of one colour are uncoupled, so their steps do not
//! interact and could run in parallel.

use serde::{Deserialize, Serialize};

use crate::blockspace::{active_set, ActiveSet, BoxSet, Partition, DEFAULT_ACTIVE_TOL};
use crate::comm::{CommEvent, CommLedger, Phase};
use crate::error::{Error, Result};
use crate::model::QuadraticModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CauchyParams {
    /// Sufficient-decrease fraction.
    pub nu0: f64,
    pub nu1: f64,
    /// Sup-norm containment factor: steps satisfy `‖d‖∞ ≤ ν2 Δ`.
    pub nu2: f64,
    /// Backtracking ratio.
    pub nu3: f64,
    /// Initial step size.
    pub nu4: f64,
    pub nu5: f64,
    pub max_backtracks: usize,
}

impl Default for CauchyParams {
    fn default() -> Self {
        CauchyParams {
            nu0: 0.1,
            nu1: 0.5,
            nu2: 1.0,
            nu3: 0.5,
            nu4: 1.0,
            nu5: 1.0,
            max_backtracks: 60,
        }
    }
}

impl CauchyParams {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 < self.nu0
            && self.nu0 < 1.0
            && 0.0 < self.nu1
            && self.nu1 < self.nu2
            && 0.0 < self.nu3
            && self.nu3 < 1.0
            && 0.0 < self.nu4
            && self.nu4 <= self.nu5
            && self.max_backtracks > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("Cauchy parameters {self:?}")))
        }
    }

    /// `ν0 min{ν4, 2(1 − ν0), ν3 ν1}`.
    pub fn chi(&self) -> f64 {
        self.nu0 * self.nu4.min(2.0 * (1.0 - self.nu0)).min(self.nu3 * self.nu1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauchyResult {
    pub z: Vec<f64>,
    /// Accepted step size per node.
    pub alphas: Vec<f64>,
    /// Last rejected step size per node, when backtracking happened.
    pub alpha_bars: Vec<Option<f64>>,
    pub backtracks: Vec<usize>,
    /// Model decrease contributed by each colour, in sweep order.
    pub color_decreases: Vec<f64>,
    /// `m(x) − m(z)`.
    pub decrease: f64,
    pub active: ActiveSet,
}

impl CauchyResult {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn two_norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Model change `∇·d + ½ dᵀ B_ii d` from moving node `i` alone by `d`.
fn node_change(model: &QuadraticModel, partition: &Partition, i: usize, grad: &[f64], d: &[f64]) -> f64 {
    let blk = model.hessian.diagonal_block(i);
    let s = d.len();
    let mut quad = 0.0;
    for a in 0..s {
        for b in 0..s {
            quad += d[a] * blk[(a, b)] * d[b];
        }
    }
    debug_assert_eq!(partition.node_range(i).len(), s);
    dot(grad, d) + 0.5 * quad
}

fn accepts(change: f64, slope: f64, d: &[f64], delta: f64, p: &CauchyParams) -> bool {
    let round = 1e-14 * (change.abs() + slope.abs());
    change <= p.nu0 * slope + round && inf_norm(d) <= p.nu2 * delta
}

pub fn cauchy_sweep(
    model: &QuadraticModel,
    bounds: &BoxSet,
    partition: &Partition,
    delta: f64,
    params: &CauchyParams,
    mut ledger: Option<&mut CommLedger>,
) -> Result<CauchyResult> {
    params.validate()?;
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("trust-region radius {delta}")));
    }
    if partition.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: partition.dim(),
        });
    }
    let x = &model.x;
    bounds.check_feasible(x, DEFAULT_ACTIVE_TOL)?;
    let nn = partition.num_nodes();
    let mut z = x.clone();
    let mut alphas = vec![params.nu4; nn];
    let mut alpha_bars = vec![None; nn];
    let mut backtracks = vec![0; nn];
    let mut color_decreases = Vec::with_capacity(partition.num_colors());

    for k in 0..partition.num_colors() {
        let group = partition.group(k);
        // Gradients at the mixed point: colours before k committed, k and
        // later still at x.
        let grads: Vec<Vec<f64>> = group
            .iter()
            .map(|&i| model.node_gradient(i, &z, partition))
            .collect();
        let mut color_change = 0.0;
        for (&i, grad) in group.iter().zip(&grads) {
            let r = partition.node_range(i);
            let xi = &x[r.clone()];
            let mut alpha = params.nu4;
            let mut count = 0;
            let (d, change) = loop {
                let d: Vec<f64> = xi
                    .iter()
                    .zip(grad)
                    .enumerate()
                    .map(|(a, (&xv, &g))| bounds.clamp(r.start + a, xv - alpha * g) - xv)
                    .collect();
                let change = node_change(model, partition, i, grad, &d);
                if accepts(change, dot(grad, &d), &d, delta, params) {
                    break (d, change);
                }
                count += 1;
                if count > params.max_backtracks {
                    return Err(Error::BacktrackingFailed {
                        node: i,
                        max_backtracks: params.max_backtracks,
                    });
                }
                alpha *= params.nu3;
            };
            for (a, dv) in d.iter().enumerate() {
                z[r.start + a] = bounds.clamp(r.start + a, xi[a] + dv);
            }
            alphas[i] = alpha;
            backtracks[i] = count;
            if count > 0 {
                alpha_bars[i] = Some(alpha / params.nu3);
            }
            color_change += change;
        }
        color_decreases.push(-color_change);
        if let Some(l) = ledger.as_deref_mut() {
            l.exchange_all(Phase::Cauchy, group, |i| partition.node_sizes()[i])?;
            l.account(CommEvent::Barrier, Phase::Cauchy)?;
        }
    }

    let decrease = model.decrease(&z)?;
    let active = active_set(&z, bounds, DEFAULT_ACTIVE_TOL);
    Ok(CauchyResult {
        z,
        alphas,
        alpha_bars,
        backtracks,
        color_decreases,
        decrease,
        active,
    })
}

/// Tests the sufficient-decrease and containment conditions for colour `k`.
///
/// `mixed` carries earlier colours at their swept values and colour `k`
/// onwards at the base point; `z_k` lists the trial values of colour `k` in
/// sweep order.
pub fn check_block_decrease(
    model: &QuadraticModel,
    partition: &Partition,
    k: usize,
    z_k: &[f64],
    mixed: &[f64],
    delta: f64,
    params: &CauchyParams,
) -> Result<bool> {
    let idx = partition.color_indices(k);
    if idx.len() != z_k.len() {
        return Err(Error::DimensionMismatch {
            expected: idx.len(),
            found: z_k.len(),
        });
    }
    let mut trial = mixed.to_vec();
    for (&j, &v) in idx.iter().zip(z_k) {
        trial[j] = v;
    }
    let grad: Vec<f64> = partition
        .group(k)
        .iter()
        .flat_map(|&i| model.node_gradient(i, mixed, partition))
        .collect();
    let d: Vec<f64> = idx.iter().zip(z_k).map(|(&j, &v)| v - mixed[j]).collect();
    let change = model.decrease(mixed)? - model.decrease(&trial)?;
    Ok(accepts(change, dot(&grad, &d), &d, delta, params))
}

/// Upper estimate of `‖B‖₂` used by the bounds below.
pub fn hessian_norm_estimate(model: &QuadraticModel) -> f64 {
    model.hessian.norm_bound()
}

/// Guaranteed lower bound on `m(x) − m(z)` for a completed sweep:
/// `χ Σ_i (‖d_i‖/α_i) min{Δ, (‖d_i‖/α_i) / (1 + ‖B‖)}` over nodes.
pub fn sufficient_decrease_bound(
    result: &CauchyResult,
    model: &QuadraticModel,
    partition: &Partition,
    delta: f64,
    params: &CauchyParams,
) -> f64 {
    let bnorm = hessian_norm_estimate(model);
    let mut sum = 0.0;
    for i in 0..partition.num_nodes() {
        let r = partition.node_range(i);
        let d: Vec<f64> = result.z[r.clone()]
            .iter()
            .zip(&model.x[r])
            .map(|(a, b)| a - b)
            .collect();
        let q = two_norm(&d) / result.alphas[i];
        sum += q * delta.min(q / (1.0 + bnorm));
    }
    params.chi() * sum
}

/// Bound on the projected gradient at `z`:
/// `Σ_k [‖B‖ ‖z − x‖ + ‖D_k‖ + ‖∇_k L(z) − ∇_k m(z)‖]`, where `D_k` stacks
/// `d_i / α_i` over the nodes of colour `k`.
pub fn relative_error_bound(
    result: &CauchyResult,
    model: &QuadraticModel,
    partition: &Partition,
    gradient_at_z: &[f64],
) -> Result<f64> {
    let bnorm = hessian_norm_estimate(model);
    let step: Vec<f64> = result.z.iter().zip(&model.x).map(|(a, b)| a - b).collect();
    let step_norm = two_norm(&step);
    let model_grad = model.gradient_at(&result.z)?;
    let mut total = 0.0;
    for k in 0..partition.num_colors() {
        let mut dk = 0.0;
        let mut ek = 0.0;
        for &i in partition.group(k) {
            for j in partition.node_range(i) {
                dk += (step[j] / result.alphas[i]).powi(2);
                ek += (gradient_at_z[j] - model_grad[j]).powi(2);
            }
        }
        total += bnorm * step_norm + dk.sqrt() + ek.sqrt();
    }
    Ok(total)
}

//! OPF problems as equality-constrained oracles.
//!
//! Every constraint row depends on a handful of variables. Rows are either
//! quadratic in their variables (balances, thermal limits, and everything in
//! rectangular coordinates) or the trigonometric flow definitions of the
//! polar form; both carry hand-derived gradients and Hessians.

use std::f64::consts::FRAC_PI_6;

use rand::Rng;
use trap_core::{BlockSparseMatrix, BoxSet, EqualityNlp, JacobianStructure, Result};

use crate::case::NetworkCase;
use crate::layout::{Formulation, OpfLayout};

#[derive(Debug, Clone)]
enum Kind {
    /// `c0 + lᵀu + ½ uᵀQu`, with `Q` dense row-major.
    Quad { c0: f64, lin: Vec<f64>, quad: Vec<f64> },
    /// `flow − (k a² + a c T(θf − θt))` on `[flow, a = v_f, c = v_t, θ_f, θ_t]`,
    /// where `T = G cos + B sin` (active) or `G sin − B cos` (reactive).
    PolarFlow { reactive: bool, k: f64, g: f64, b: f64 },
}

#[derive(Debug, Clone)]
struct Row {
    vars: Vec<usize>,
    kind: Kind,
}

fn quad_form(q: &[f64], u: &[f64]) -> Vec<f64> {
    let m = u.len();
    (0..m)
        .map(|a| (0..m).map(|b| q[a * m + b] * u[b]).sum())
        .collect()
}

impl Row {
    fn local(&self, x: &[f64]) -> Vec<f64> {
        self.vars.iter().map(|&i| x[i]).collect()
    }

    fn trig(reactive: bool, g: f64, b: f64, d: f64) -> (f64, f64) {
        let (s, c) = d.sin_cos();
        if reactive {
            (g * s - b * c, g * c + b * s)
        } else {
            (g * c + b * s, -g * s + b * c)
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        let u = self.local(x);
        match &self.kind {
            Kind::Quad { c0, lin, quad } => {
                let qu = quad_form(quad, &u);
                c0 + u.iter().zip(lin).map(|(a, l)| a * l).sum::<f64>()
                    + 0.5 * u.iter().zip(&qu).map(|(a, b)| a * b).sum::<f64>()
            }
            &Kind::PolarFlow { reactive, k, g, b } => {
                let (t, _) = Self::trig(reactive, g, b, u[3] - u[4]);
                u[0] - (k * u[1] * u[1] + u[1] * u[2] * t)
            }
        }
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let u = self.local(x);
        match &self.kind {
            Kind::Quad { lin, quad, .. } => {
                let qu = quad_form(quad, &u);
                lin.iter().zip(&qu).map(|(l, q)| l + q).collect()
            }
            &Kind::PolarFlow { reactive, k, g, b } => {
                let (a, c) = (u[1], u[2]);
                let (t, tp) = Self::trig(reactive, g, b, u[3] - u[4]);
                let hd = a * c * tp;
                vec![1.0, -(2.0 * k * a + c * t), -(a * t), -hd, hd]
            }
        }
    }

    fn hessian(&self, x: &[f64]) -> Vec<f64> {
        match &self.kind {
            Kind::Quad { quad, .. } => quad.clone(),
            &Kind::PolarFlow { reactive, k, g, b } => {
                let u = self.local(x);
                let (a, c) = (u[1], u[2]);
                let (t, tp) = Self::trig(reactive, g, b, u[3] - u[4]);
                let (haa, hac, had) = (2.0 * k, t, c * tp);
                let (hcd, hdd) = (a * tp, -a * c * t);
                // Local order: flow, v_f, v_t, θ_f, θ_t; the row is flow − h.
                let h = [
                    [0.0, 0.0, 0.0, 0.0, 0.0],
                    [0.0, haa, hac, had, -had],
                    [0.0, hac, 0.0, hcd, -hcd],
                    [0.0, had, hcd, hdd, -hdd],
                    [0.0, -had, -hcd, -hdd, hdd],
                ];
                h.iter().flatten().map(|v| -v).collect()
            }
        }
    }
}

/// Builder for a quadratic row over a growing list of variables.
struct QuadBuilder {
    vars: Vec<usize>,
    c0: f64,
    lin: Vec<f64>,
    entries: Vec<(usize, usize, f64)>,
}

impl QuadBuilder {
    fn new(c0: f64) -> Self {
        QuadBuilder {
            vars: Vec::new(),
            c0,
            lin: Vec::new(),
            entries: Vec::new(),
        }
    }

    fn slot(&mut self, var: usize) -> usize {
        match self.vars.iter().position(|&v| v == var) {
            Some(i) => i,
            None => {
                self.vars.push(var);
                self.lin.push(0.0);
                self.vars.len() - 1
            }
        }
    }

    fn linear(mut self, var: usize, coef: f64) -> Self {
        let i = self.slot(var);
        self.lin[i] += coef;
        self
    }

    /// Adds `coef · u_a · u_b` (or `coef · u_a²` when the variables match).
    fn product(mut self, a: usize, b: usize, coef: f64) -> Self {
        let (i, j) = (self.slot(a), self.slot(b));
        self.entries.push((i, j, coef));
        self
    }

    fn build(self) -> Row {
        let m = self.vars.len();
        let mut quad = vec![0.0; m * m];
        for (i, j, c) in self.entries {
            // ½ uᵀQu reproduces c·u_i·u_j.
            if i == j {
                quad[i * m + i] += 2.0 * c;
            } else {
                quad[i * m + j] += c;
                quad[j * m + i] += c;
            }
        }
        Row {
            vars: self.vars,
            kind: Kind::Quad {
                c0: self.c0,
                lin: self.lin,
                quad,
            },
        }
    }
}

/// An AC-OPF instance in either coordinate system.
#[derive(Debug, Clone)]
pub struct OpfProblem {
    pub case: NetworkCase,
    pub layout: OpfLayout,
    bounds: BoxSet,
    rows: Vec<Row>,
    structure: JacobianStructure,
    /// `(variable, c2·base², c1·base, c0)` per generator.
    costs: Vec<(usize, f64, f64, f64)>,
}

pub fn build_polar_opf(case: &NetworkCase) -> OpfProblem {
    build(case, Formulation::Polar)
}

pub fn build_rect_opf(case: &NetworkCase) -> OpfProblem {
    build(case, Formulation::Rect)
}

pub fn build_opf(case: &NetworkCase, formulation: Formulation) -> OpfProblem {
    build(case, formulation)
}

fn build(case: &NetworkCase, formulation: Formulation) -> OpfProblem {
    let layout = OpfLayout::new(case, formulation);
    let n = layout.dim();
    let mut lo = vec![f64::NEG_INFINITY; n];
    let mut hi = vec![f64::INFINITY; n];
    let reference = case.reference_bus();
    for (b, bus) in case.buses.iter().enumerate() {
        let [v0, v1] = layout.voltage[b];
        match formulation {
            Formulation::Polar => {
                lo[v0] = bus.vmin;
                hi[v0] = bus.vmax;
                if b == reference {
                    lo[v1] = 0.0;
                    hi[v1] = 0.0;
                }
            }
            Formulation::Rect => {
                lo[v0] = if b == reference { 0.0 } else { -bus.vmax };
                hi[v0] = bus.vmax;
                lo[v1] = -bus.vmax;
                hi[v1] = bus.vmax;
                if b == reference {
                    lo[v1] = 0.0;
                    hi[v1] = 0.0;
                }
                let span = bus.vmax * bus.vmax - bus.vmin * bus.vmin;
                for s in layout.voltage_slacks[b].unwrap() {
                    lo[s] = 0.0;
                    hi[s] = span;
                }
            }
        }
    }
    for (g, gen) in case.generators.iter().enumerate() {
        let [p, q] = layout.generator[g];
        lo[p] = gen.pmin;
        hi[p] = gen.pmax;
        lo[q] = gen.qmin;
        hi[q] = gen.qmax;
    }
    for e in &layout.element {
        lo[e[2]] = 0.0;
    }
    let bounds = BoxSet::new(lo, hi).expect("case bounds validated at parse time");

    let mut rows: Vec<Row> = Vec::with_capacity(layout.num_rows());
    for (b, bus) in case.buses.iter().enumerate() {
        let [v0, v1] = layout.voltage[b];
        let leaving: Vec<usize> = (0..layout.element.len())
            .filter(|&e| layout.element_ends(case, e).0 == b)
            .collect();
        let gens = case.generators_at(b);
        for reactive in [false, true] {
            let (demand, shunt) = if reactive {
                (bus.qd, bus.bs)
            } else {
                (bus.pd, -bus.gs)
            };
            let mut r = QuadBuilder::new(-demand);
            r = match formulation {
                Formulation::Polar => r.product(v0, v0, shunt),
                Formulation::Rect => r.product(v0, v0, shunt).product(v1, v1, shunt),
            };
            let k = usize::from(reactive);
            for &g in &gens {
                r = r.linear(layout.generator[g][k], 1.0);
            }
            for &e in &leaving {
                r = r.linear(layout.element[e][k], -1.0);
            }
            rows.push(r.build());
        }
        if let Some([slo, sup]) = layout.voltage_slacks[b] {
            rows.push(
                QuadBuilder::new(-bus.vmin * bus.vmin)
                    .product(v0, v0, 1.0)
                    .product(v1, v1, 1.0)
                    .linear(slo, -1.0)
                    .build(),
            );
            rows.push(
                QuadBuilder::new(-bus.vmax * bus.vmax)
                    .product(v0, v0, 1.0)
                    .product(v1, v1, 1.0)
                    .linear(sup, 1.0)
                    .build(),
            );
        }
    }
    for e in 0..layout.element.len() {
        let (f, t) = layout.element_ends(case, e);
        let br = &case.branches[e / 2];
        let (gff, bff) = br.self_terms();
        let (gft, bft) = br.mutual_terms();
        let [p, q, s] = layout.element[e];
        let [af, bf] = layout.voltage[f];
        let [at, bt] = layout.voltage[t];
        match formulation {
            Formulation::Polar => {
                for (reactive, flow, k) in [(false, p, gff), (true, q, -bff)] {
                    rows.push(Row {
                        vars: vec![flow, af, at, bf, bt],
                        kind: Kind::PolarFlow {
                            reactive,
                            k,
                            g: gft,
                            b: bft,
                        },
                    });
                }
            }
            Formulation::Rect => {
                // (ef, ff, et, ft) = (af, bf, at, bt).
                rows.push(
                    QuadBuilder::new(0.0)
                        .linear(p, 1.0)
                        .product(af, af, -gff)
                        .product(bf, bf, -gff)
                        .product(af, at, -gft)
                        .product(bf, bt, -gft)
                        .product(bf, at, -bft)
                        .product(af, bt, bft)
                        .build(),
                );
                rows.push(
                    QuadBuilder::new(0.0)
                        .linear(q, 1.0)
                        .product(af, af, bff)
                        .product(bf, bf, bff)
                        .product(bf, at, -gft)
                        .product(af, bt, gft)
                        .product(af, at, bft)
                        .product(bf, bt, bft)
                        .build(),
                );
            }
        }
        let rate = case.rate(e / 2);
        rows.push(
            QuadBuilder::new(-rate * rate)
                .product(p, p, 1.0)
                .product(q, q, 1.0)
                .linear(s, 1.0)
                .build(),
        );
    }
    debug_assert_eq!(rows.len(), layout.num_rows());

    let structure = JacobianStructure::from_rows(&rows.iter().map(|r| r.vars.clone()).collect::<Vec<_>>());
    let base = case.base_mva;
    let costs = case
        .generators
        .iter()
        .enumerate()
        .map(|(g, gen)| (layout.generator[g][0], gen.c2 * base * base, gen.c1 * base, gen.c0))
        .collect();
    OpfProblem {
        case: case.clone(),
        layout,
        bounds,
        rows,
        structure,
        costs,
    }
}

impl OpfProblem {
    pub fn formulation(&self) -> Formulation {
        self.layout.formulation
    }

    /// Line-flow and slack values implied by the voltages in `x`.
    pub fn complete_flows(&self, x: &mut [f64]) {
        for e in 0..self.layout.element.len() {
            let [p, q, s] = self.layout.element[e];
            let rows = self.layout.element_rows[e];
            x[p] = 0.0;
            x[q] = 0.0;
            // Definition rows are `flow − h`, so h = −row at flow 0.
            let hp = -self.rows[rows[0]].value(x);
            let hq = -self.rows[rows[1]].value(x);
            x[p] = hp;
            x[q] = hq;
            let rate = self.case.rate(e / 2);
            x[s] = (rate * rate - hp * hp - hq * hq).max(0.0);
        }
        if let Formulation::Rect = self.layout.formulation {
            for (b, bus) in self.case.buses.iter().enumerate() {
                let [e, f] = self.layout.voltage[b];
                let [slo, sup] = self.layout.voltage_slacks[b].unwrap();
                let m = x[e] * x[e] + x[f] * x[f];
                let span = bus.vmax * bus.vmax - bus.vmin * bus.vmin;
                x[slo] = (m - bus.vmin * bus.vmin).clamp(0.0, span);
                x[sup] = (bus.vmax * bus.vmax - m).clamp(0.0, span);
            }
        }
    }

    fn from_voltages(&self, mag: &[f64], ang: &[f64], pg: &[f64], qg: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.layout.dim()];
        for b in 0..self.case.num_buses() {
            let [i, j] = self.layout.voltage[b];
            match self.layout.formulation {
                Formulation::Polar => {
                    x[i] = mag[b];
                    x[j] = ang[b];
                }
                Formulation::Rect => {
                    x[i] = mag[b] * ang[b].cos();
                    x[j] = mag[b] * ang[b].sin();
                }
            }
        }
        for (g, gv) in self.layout.generator.iter().enumerate() {
            x[gv[0]] = pg[g];
            x[gv[1]] = qg[g];
        }
        self.complete_flows(&mut x);
        self.bounds.project_in_place(&mut x).expect("layout dimension");
        x
    }

    /// Unit voltages, zero angles, generators at mid-range active power and
    /// zero reactive power, flows consistent with the voltages.
    pub fn flat_start(&self) -> Vec<f64> {
        let nb = self.case.num_buses();
        let mag: Vec<f64> = self
            .case
            .buses
            .iter()
            .map(|b| 1.0f64.clamp(b.vmin, b.vmax))
            .collect();
        let pg: Vec<f64> = self
            .case
            .generators
            .iter()
            .map(|g| 0.5 * (g.pmin + g.pmax))
            .collect();
        let qg: Vec<f64> = self
            .case
            .generators
            .iter()
            .map(|g| 0.0f64.clamp(g.qmin, g.qmax))
            .collect();
        self.from_voltages(&mag, &vec![0.0; nb], &pg, &qg)
    }

    /// Voltages and generator outputs uniform in their bounds, angles
    /// uniform in ±π/6 (reference bus at 0), flows from their definitions.
    pub fn random_start<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let reference = self.case.reference_bus();
        let mut uni = |l: f64, u: f64| if l < u { rng.gen_range(l..=u) } else { l };
        let mag: Vec<f64> = self.case.buses.iter().map(|b| uni(b.vmin, b.vmax)).collect();
        let ang: Vec<f64> = (0..self.case.num_buses())
            .map(|b| if b == reference { 0.0 } else { uni(-FRAC_PI_6, FRAC_PI_6) })
            .collect();
        let pg: Vec<f64> = self.case.generators.iter().map(|g| uni(g.pmin, g.pmax)).collect();
        let qg: Vec<f64> = self.case.generators.iter().map(|g| uni(g.qmin, g.qmax)).collect();
        self.from_voltages(&mag, &ang, &pg, &qg)
    }

    /// Maps a point of a polar problem onto this problem's variables.
    /// Generator and flow values are copied; voltages are converted.
    pub fn from_polar_point(&self, polar: &OpfProblem, xp: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.layout.dim()];
        for b in 0..self.case.num_buses() {
            let [v, t] = polar.layout.voltage[b];
            let [i, j] = self.layout.voltage[b];
            match self.layout.formulation {
                Formulation::Polar => {
                    x[i] = xp[v];
                    x[j] = xp[t];
                }
                Formulation::Rect => {
                    x[i] = xp[v] * xp[t].cos();
                    x[j] = xp[v] * xp[t].sin();
                    let [slo, sup] = self.layout.voltage_slacks[b].unwrap();
                    let bus = &self.case.buses[b];
                    x[slo] = xp[v] * xp[v] - bus.vmin * bus.vmin;
                    x[sup] = bus.vmax * bus.vmax - xp[v] * xp[v];
                }
            }
        }
        for (g, gv) in self.layout.generator.iter().enumerate() {
            x[gv[0]] = xp[polar.layout.generator[g][0]];
            x[gv[1]] = xp[polar.layout.generator[g][1]];
        }
        for (e, ev) in self.layout.element.iter().enumerate() {
            for k in 0..3 {
                x[ev[k]] = xp[polar.layout.element[e][k]];
            }
        }
        x
    }

    /// Rows shared by both formulations: balances, flow definitions and
    /// thermal limits, in a fixed order.
    pub fn common_rows(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.layout.balance_rows.iter().flatten().copied().collect();
        out.extend(self.layout.element_rows.iter().flatten());
        out
    }

    /// Generation cost of `x` in the case's currency.
    pub fn cost(&self, x: &[f64]) -> f64 {
        self.objective(x)
    }
}

impl EqualityNlp for OpfProblem {
    fn node_sizes(&self) -> &[usize] {
        &self.layout.node_sizes
    }

    fn bounds(&self) -> &BoxSet {
        &self.bounds
    }

    fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    fn objective(&self, x: &[f64]) -> f64 {
        self.costs
            .iter()
            .map(|&(v, a, b, c)| a * x[v] * x[v] + b * x[v] + c)
            .sum()
    }

    fn objective_gradient(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for &(v, a, b, _) in &self.costs {
            out[v] = 2.0 * a * x[v] + b;
        }
    }

    fn add_objective_hessian(&self, _x: &[f64], h: &mut BlockSparseMatrix) -> Result<()> {
        for &(v, a, _, _) in &self.costs {
            h.add(v, v, 2.0 * a)?;
        }
        Ok(())
    }

    fn objective_coupling(&self) -> Vec<(usize, usize)> {
        Vec::new()
    }

    fn constraints(&self, x: &[f64], out: &mut [f64]) {
        for (o, r) in out.iter_mut().zip(&self.rows) {
            *o = r.value(x);
        }
    }

    fn jacobian_structure(&self) -> &JacobianStructure {
        &self.structure
    }

    fn jacobian_values(&self, x: &[f64], out: &mut [f64]) {
        let mut k = 0;
        for r in &self.rows {
            for v in r.gradient(x) {
                out[k] = v;
                k += 1;
            }
        }
    }

    fn add_constraint_hessians(&self, x: &[f64], weights: &[f64], h: &mut BlockSparseMatrix) -> Result<()> {
        for (r, &w) in self.rows.iter().zip(weights) {
            if w == 0.0 {
                continue;
            }
            let hl: Vec<f64> = r.hessian(x).into_iter().map(|v| w * v).collect();
            h.add_dense(&r.vars, &hl)?;
        }
        Ok(())
    }
}

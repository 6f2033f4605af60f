//! Synthetic problems for tests, examples and benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::auglag::{EqualityNlp, JacobianStructure};
use crate::blockspace::{BoxSet, CouplingGraph, Partition};
use crate::error::Result;
use crate::model::{BlockSparseMatrix, NlpProblem};

/// `½ xᵀHx + cᵀx + Σ_i a_i exp(b_i x_i)` over a box.
///
/// With all `a_i = 0` this is a quadratic and the model is exact.
#[derive(Debug, Clone)]
pub struct BoxQp {
    node_sizes: Vec<usize>,
    graph: CouplingGraph,
    bounds: BoxSet,
    pub hessian: BlockSparseMatrix,
    pub linear: Vec<f64>,
    pub exp_scale: Vec<f64>,
    pub exp_rate: Vec<f64>,
}

/// Shape of a random [`BoxQp`].
#[derive(Debug, Clone, Copy)]
pub struct QpSpec {
    pub num_nodes: usize,
    pub max_node_size: usize,
    /// Number of colours the generated coupling admits.
    pub colors: usize,
    pub edge_prob: f64,
    pub convex: bool,
    /// Fraction of coordinates with finite bounds.
    pub bounded_frac: f64,
}

impl Default for QpSpec {
    fn default() -> Self {
        QpSpec {
            num_nodes: 8,
            max_node_size: 3,
            colors: 2,
            edge_prob: 0.4,
            convex: true,
            bounded_frac: 0.8,
        }
    }
}

impl BoxQp {
    pub fn new(
        node_sizes: Vec<usize>,
        graph: CouplingGraph,
        bounds: BoxSet,
        hessian: BlockSparseMatrix,
        linear: Vec<f64>,
    ) -> Self {
        let n = linear.len();
        BoxQp {
            node_sizes,
            graph,
            bounds,
            hessian,
            linear,
            exp_scale: vec![0.0; n],
            exp_rate: vec![0.0; n],
        }
    }

    /// Random instance plus a partition whose colours match the coupling.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, spec: &QpSpec) -> Result<(BoxQp, Partition)> {
        let nn = spec.num_nodes.max(spec.colors);
        let node_sizes: Vec<usize> = (0..nn).map(|_| rng.gen_range(1..=spec.max_node_size)).collect();
        let mut colors: Vec<usize> = (0..nn).map(|i| i % spec.colors).collect();
        colors.shuffle(rng);
        let mut edges = Vec::new();
        for i in 0..nn {
            for j in i + 1..nn {
                if colors[i] != colors[j] && rng.gen_bool(spec.edge_prob) {
                    edges.push((i, j));
                }
            }
        }
        let graph = CouplingGraph::new(nn, edges)?;
        let partition = Partition::new(node_sizes.clone(), colors)?;
        let mut h = BlockSparseMatrix::new(&node_sizes, &graph)?;
        let off = partition.offsets().to_vec();
        let n = partition.dim();
        let mut row_abs = vec![0.0; n];
        for i in 0..nn {
            let ri = off[i]..off[i + 1];
            for a in ri.clone() {
                for b in a + 1..ri.end {
                    let v = rng.gen_range(-1.0..1.0);
                    h.add(a, b, v)?;
                    row_abs[a] += f64::abs(v);
                    row_abs[b] += f64::abs(v);
                }
            }
            for &j in graph.neighbors(i).iter().filter(|&&j| j > i) {
                for a in ri.clone() {
                    for b in off[j]..off[j + 1] {
                        let v = rng.gen_range(-1.0..1.0);
                        h.add(a, b, v)?;
                        row_abs[a] += f64::abs(v);
                        row_abs[b] += f64::abs(v);
                    }
                }
            }
        }
        for (a, s) in row_abs.iter().enumerate() {
            let diag = if spec.convex {
                s + rng.gen_range(0.1..2.0)
            } else {
                rng.gen_range(-2.0..2.0)
            };
            h.add(a, a, diag)?;
        }
        let linear: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let mut lo = vec![f64::NEG_INFINITY; n];
        let mut hi = vec![f64::INFINITY; n];
        for a in 0..n {
            if rng.gen_bool(spec.bounded_frac) {
                let l = rng.gen_range(-2.0..0.0);
                lo[a] = l;
                hi[a] = l + rng.gen_range(0.5..3.0);
            } else if rng.gen_bool(0.5) {
                lo[a] = rng.gen_range(-2.0..0.0);
            }
        }
        let bounds = BoxSet::new(lo, hi)?;
        Ok((BoxQp::new(node_sizes, graph, bounds, h, linear), partition))
    }

    /// Adds `a_i exp(b_i x_i)` terms, making the objective non-quadratic.
    pub fn with_exp_terms(mut self, scale: Vec<f64>, rate: Vec<f64>) -> Self {
        self.exp_scale = scale;
        self.exp_rate = rate;
        self
    }

    pub fn is_quadratic(&self) -> bool {
        self.exp_scale.iter().all(|&a| a == 0.0)
    }

    /// Uniform point in the box; unbounded sides are truncated at ±3.
    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.bounds
            .lower()
            .iter()
            .zip(self.bounds.upper())
            .map(|(&l, &u)| {
                let (l, u) = (l.max(-3.0), u.min(3.0));
                if l < u {
                    rng.gen_range(l..=u)
                } else {
                    l
                }
            })
            .collect()
    }
}

impl NlpProblem for BoxQp {
    fn node_sizes(&self) -> &[usize] {
        &self.node_sizes
    }

    fn bounds(&self) -> &BoxSet {
        &self.bounds
    }

    fn coupling(&self) -> &CouplingGraph {
        &self.graph
    }

    fn value(&self, x: &[f64]) -> f64 {
        let hx = self.hessian.hess_vec(x).expect("dimension");
        let mut v = 0.0;
        for i in 0..x.len() {
            v += 0.5 * x[i] * hx[i] + self.linear[i] * x[i];
            if self.exp_scale[i] != 0.0 {
                v += self.exp_scale[i] * (self.exp_rate[i] * x[i]).exp();
            }
        }
        v
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        self.hessian.hess_vec_into(x, out);
        for i in 0..x.len() {
            out[i] += self.linear[i];
            if self.exp_scale[i] != 0.0 {
                out[i] += self.exp_scale[i] * self.exp_rate[i] * (self.exp_rate[i] * x[i]).exp();
            }
        }
    }

    fn hessian(&self, x: &[f64], h: &mut BlockSparseMatrix) -> Result<()> {
        *h = self.hessian.clone();
        for i in 0..x.len() {
            if self.exp_scale[i] != 0.0 {
                let b = self.exp_rate[i];
                h.add(i, i, self.exp_scale[i] * b * b * (b * x[i]).exp())?;
            }
        }
        Ok(())
    }
}

/// `min ½‖x‖² + qᵀx` subject to `A x = b`, one variable per node.
#[derive(Debug, Clone)]
pub struct LinearEqualityQp {
    node_sizes: Vec<usize>,
    bounds: BoxSet,
    pub q: Vec<f64>,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub rhs: Vec<f64>,
    structure: JacobianStructure,
}

impl LinearEqualityQp {
    pub fn new(bounds: BoxSet, q: Vec<f64>, rows: Vec<Vec<(usize, f64)>>, rhs: Vec<f64>) -> Self {
        let structure = JacobianStructure::from_rows(
            &rows
                .iter()
                .map(|r| r.iter().map(|&(c, _)| c).collect())
                .collect::<Vec<_>>(),
        );
        LinearEqualityQp {
            node_sizes: vec![1; bounds.dim()],
            bounds,
            q,
            rows,
            rhs,
            structure,
        }
    }

    /// `min ½‖x‖²` subject to `Σ x_i = 1`; the solution is `x_i = 1/n` with
    /// multiplier `−1/n`.
    pub fn sum_to_one(n: usize) -> Self {
        LinearEqualityQp::new(
            BoxSet::unbounded(n),
            vec![0.0; n],
            vec![(0..n).map(|i| (i, 1.0)).collect()],
            vec![1.0],
        )
    }
}

impl EqualityNlp for LinearEqualityQp {
    fn node_sizes(&self) -> &[usize] {
        &self.node_sizes
    }

    fn bounds(&self) -> &BoxSet {
        &self.bounds
    }

    fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    fn objective(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.q).map(|(a, q)| 0.5 * a * a + q * a).sum()
    }

    fn objective_gradient(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..x.len() {
            out[i] = x[i] + self.q[i];
        }
    }

    fn add_objective_hessian(&self, x: &[f64], h: &mut BlockSparseMatrix) -> Result<()> {
        for i in 0..x.len() {
            h.add(i, i, 1.0)?;
        }
        Ok(())
    }

    fn objective_coupling(&self) -> Vec<(usize, usize)> {
        Vec::new()
    }

    fn constraints(&self, x: &[f64], out: &mut [f64]) {
        for (j, row) in self.rows.iter().enumerate() {
            out[j] = row.iter().map(|&(c, a)| a * x[c]).sum::<f64>() - self.rhs[j];
        }
    }

    fn jacobian_structure(&self) -> &JacobianStructure {
        &self.structure
    }

    fn jacobian_values(&self, _x: &[f64], out: &mut [f64]) {
        let mut k = 0;
        for row in &self.rows {
            for &(_, a) in row {
                out[k] = a;
                k += 1;
            }
        }
    }

    fn add_constraint_hessians(&self, _x: &[f64], _w: &[f64], _h: &mut BlockSparseMatrix) -> Result<()> {
        Ok(())
    }
}

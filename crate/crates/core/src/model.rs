//! Objective oracles, block-sparse Hessians and the quadratic model.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::blockspace::{BoxSet, CouplingGraph, Partition};
use crate::error::{Error, Result};

/// Symmetric matrix stored as dense node blocks.
///
/// Diagonal blocks are kept in full; for an off-diagonal pair only the block
/// `(i, j)` with `i < j` is stored. Blocks exist for every edge of the
/// coupling graph and for every node.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSparseMatrix {
    node_sizes: Vec<usize>,
    offsets: Vec<usize>,
    node_of: Vec<usize>,
    keys: Vec<(usize, usize)>,
    blocks: Vec<Vec<f64>>,
    index: HashMap<(usize, usize), usize>,
    // For each node, the stored blocks in its block row: (other node, block).
    rows: Vec<Vec<(usize, usize)>>,
}

impl BlockSparseMatrix {
    pub fn new(node_sizes: &[usize], graph: &CouplingGraph) -> Result<Self> {
        if node_sizes.len() != graph.num_nodes() {
            return Err(Error::DimensionMismatch {
                expected: graph.num_nodes(),
                found: node_sizes.len(),
            });
        }
        let mut offsets = vec![0];
        let mut node_of = Vec::new();
        for (i, &s) in node_sizes.iter().enumerate() {
            offsets.push(offsets[i] + s);
            node_of.extend(std::iter::repeat(i).take(s));
        }
        let mut keys: Vec<(usize, usize)> = (0..node_sizes.len()).map(|i| (i, i)).collect();
        keys.extend(graph.edges());
        keys.sort_unstable();
        let mut index = HashMap::with_capacity(keys.len());
        let mut rows = vec![Vec::new(); node_sizes.len()];
        let mut blocks = Vec::with_capacity(keys.len());
        for (b, &(i, j)) in keys.iter().enumerate() {
            index.insert((i, j), b);
            blocks.push(vec![0.0; node_sizes[i] * node_sizes[j]]);
            rows[i].push((j, b));
            if i != j {
                rows[j].push((i, b));
            }
        }
        for row in &mut rows {
            row.sort_unstable();
        }
        Ok(BlockSparseMatrix {
            node_sizes: node_sizes.to_vec(),
            offsets,
            node_of,
            keys,
            blocks,
            index,
            rows,
        })
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn node_sizes(&self) -> &[usize] {
        &self.node_sizes
    }

    pub fn set_zero(&mut self) {
        for b in &mut self.blocks {
            b.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    fn locate(&self, r: usize, c: usize) -> Result<(usize, usize, usize, usize, usize)> {
        let n = self.dim();
        if r >= n || c >= n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: r.max(c) + 1,
            });
        }
        let (nr, nc) = (self.node_of[r], self.node_of[c]);
        let b = *self
            .index
            .get(&(nr.min(nc), nr.max(nc)))
            .ok_or(Error::PatternViolation(nr, nc))?;
        Ok((b, nr, nc, r - self.offsets[nr], c - self.offsets[nc]))
    }

    /// Adds `v` to entries `(r, c)` and `(c, r)`; to the single entry when `r == c`.
    pub fn add(&mut self, r: usize, c: usize, v: f64) -> Result<()> {
        let (b, nr, nc, lr, lc) = self.locate(r, c)?;
        if nr == nc {
            let s = self.node_sizes[nr];
            self.blocks[b][lr * s + lc] += v;
            if lr != lc {
                self.blocks[b][lc * s + lr] += v;
            }
        } else if nr < nc {
            self.blocks[b][lr * self.node_sizes[nc] + lc] += v;
        } else {
            self.blocks[b][lc * self.node_sizes[nr] + lr] += v;
        }
        Ok(())
    }

    /// Adds a dense symmetric matrix `h` on the variables `vars`.
    pub fn add_dense(&mut self, vars: &[usize], h: &[f64]) -> Result<()> {
        let m = vars.len();
        for a in 0..m {
            for b in a..m {
                let v = h[a * m + b];
                if v != 0.0 {
                    if vars[a] == vars[b] {
                        self.add(vars[a], vars[a], v)?;
                    } else {
                        self.add(vars[a], vars[b], v)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Adds `other` into `self`. Each stored nonzero of `other` must fall
    /// inside our pattern; the node layouts may differ if the dimension agrees.
    pub fn add_matrix(&mut self, other: &BlockSparseMatrix) -> Result<()> {
        if other.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        if other.node_sizes == self.node_sizes {
            for (key, blk) in other.keys.iter().zip(&other.blocks) {
                let b = *self.index.get(key).ok_or(Error::PatternViolation(key.0, key.1))?;
                for (a, v) in self.blocks[b].iter_mut().zip(blk) {
                    *a += v;
                }
            }
            return Ok(());
        }
        for (&(i, j), blk) in other.keys.iter().zip(&other.blocks) {
            let sj = other.node_sizes[j];
            for (k, &v) in blk.iter().enumerate() {
                let (r, c) = (other.offsets[i] + k / sj, other.offsets[j] + k % sj);
                if v != 0.0 && (i != j || r <= c) {
                    self.add(r, c, v)?;
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, r: usize, c: usize) -> Result<f64> {
        let (b, nr, nc, lr, lc) = match self.locate(r, c) {
            Ok(t) => t,
            Err(Error::PatternViolation(..)) => return Ok(0.0),
            Err(e) => return Err(e),
        };
        Ok(if nr <= nc {
            self.blocks[b][lr * self.node_sizes[nc] + lc]
        } else {
            self.blocks[b][lc * self.node_sizes[nr] + lr]
        })
    }

    /// Block row of node `i` applied to `v`, accumulated into `out` (length `n_i`).
    pub fn row_product_into(&self, i: usize, v: &[f64], out: &mut [f64]) {
        let si = self.node_sizes[i];
        for &(j, b) in &self.rows[i] {
            let sj = self.node_sizes[j];
            let vj = &v[self.offsets[j]..self.offsets[j] + sj];
            let blk = &self.blocks[b];
            if i <= j {
                for a in 0..si {
                    let row = &blk[a * sj..(a + 1) * sj];
                    out[a] += row.iter().zip(vj).map(|(m, x)| m * x).sum::<f64>();
                }
            } else {
                // Stored as (j, i); use its transpose.
                for (c, &x) in vj.iter().enumerate() {
                    if x != 0.0 {
                        let row = &blk[c * si..(c + 1) * si];
                        for a in 0..si {
                            out[a] += row[a] * x;
                        }
                    }
                }
            }
        }
    }

    pub fn row_product(&self, i: usize, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.node_sizes[i]];
        self.row_product_into(i, v, &mut out);
        out
    }

    pub fn hess_vec_into(&self, v: &[f64], out: &mut [f64]) {
        for i in 0..self.node_sizes.len() {
            let r = self.offsets[i]..self.offsets[i + 1];
            let seg = &mut out[r];
            seg.iter_mut().for_each(|x| *x = 0.0);
            self.row_product_into(i, v, seg);
        }
    }

    pub fn hess_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: v.len(),
            });
        }
        let mut out = vec![0.0; v.len()];
        self.hess_vec_into(v, &mut out);
        Ok(out)
    }

    pub fn diagonal_block(&self, i: usize) -> DMatrix<f64> {
        let s = self.node_sizes[i];
        DMatrix::from_row_slice(s, s, &self.blocks[self.index[&(i, i)]])
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (b, &(i, j)) in self.keys.iter().enumerate() {
            let (si, sj) = (self.node_sizes[i], self.node_sizes[j]);
            for a in 0..si {
                for c in 0..sj {
                    let v = self.blocks[b][a * sj + c];
                    m[(self.offsets[i] + a, self.offsets[j] + c)] = v;
                    m[(self.offsets[j] + c, self.offsets[i] + a)] = v;
                }
            }
        }
        m
    }

    /// Largest absolute row sum, an upper bound on the spectral norm.
    pub fn norm_bound(&self) -> f64 {
        let mut sums = vec![0.0; self.dim()];
        for (b, &(i, j)) in self.keys.iter().enumerate() {
            let (si, sj) = (self.node_sizes[i], self.node_sizes[j]);
            for a in 0..si {
                for c in 0..sj {
                    let v = self.blocks[b][a * sj + c].abs();
                    sums[self.offsets[i] + a] += v;
                    if i != j {
                        sums[self.offsets[j] + c] += v;
                    }
                }
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    /// Off-diagonal node pairs whose stored block has a nonzero entry.
    pub fn nonzero_coupling(&self) -> Result<CouplingGraph> {
        let edges = self
            .keys
            .iter()
            .zip(&self.blocks)
            .filter(|(&(i, j), b)| i != j && b.iter().any(|&v| v != 0.0))
            .map(|(&k, _)| k);
        CouplingGraph::new(self.node_sizes.len(), edges)
    }
}

/// Bound-constrained objective with block structure.
pub trait NlpProblem {
    fn node_sizes(&self) -> &[usize];
    fn bounds(&self) -> &BoxSet;
    fn coupling(&self) -> &CouplingGraph;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
    /// Accumulates the Hessian into `h`, which the caller zeroes first.
    fn hessian(&self, x: &[f64], h: &mut BlockSparseMatrix) -> Result<()>;

    fn dim(&self) -> usize {
        self.node_sizes().iter().sum()
    }

    fn gradient_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.gradient(x, &mut g);
        g
    }

    fn hessian_matrix(&self, x: &[f64]) -> Result<BlockSparseMatrix> {
        let mut h = BlockSparseMatrix::new(self.node_sizes(), self.coupling())?;
        self.hessian(x, &mut h)?;
        Ok(h)
    }
}

/// `m(x') = L(x) + g·(x' − x) + ½ (x' − x)ᵀ B (x' − x)`.
#[derive(Debug, Clone)]
pub struct QuadraticModel {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: BlockSparseMatrix,
}

impl QuadraticModel {
    pub fn new(x: Vec<f64>, value: f64, gradient: Vec<f64>, hessian: BlockSparseMatrix) -> Result<Self> {
        if gradient.len() != x.len() || hessian.dim() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: if gradient.len() != x.len() {
                    gradient.len()
                } else {
                    hessian.dim()
                },
            });
        }
        Ok(QuadraticModel {
            x,
            value,
            gradient,
            hessian,
        })
    }

    pub fn from_problem<P: NlpProblem + ?Sized>(problem: &P, x: &[f64]) -> Result<Self> {
        QuadraticModel::new(
            x.to_vec(),
            problem.value(x),
            problem.gradient_vec(x),
            problem.hessian_matrix(x)?,
        )
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    fn step(&self, xp: &[f64]) -> Result<Vec<f64>> {
        if xp.len() != self.x.len() {
            return Err(Error::DimensionMismatch {
                expected: self.x.len(),
                found: xp.len(),
            });
        }
        Ok(xp.iter().zip(&self.x).map(|(a, b)| a - b).collect())
    }

    pub fn eval(&self, xp: &[f64]) -> Result<f64> {
        Ok(self.value - self.decrease(xp)?)
    }

    /// `m(x) − m(xp)`, computed from the step to avoid cancellation.
    pub fn decrease(&self, xp: &[f64]) -> Result<f64> {
        let d = self.step(xp)?;
        let bd = self.hessian.hess_vec(&d)?;
        let gd: f64 = self.gradient.iter().zip(&d).map(|(a, b)| a * b).sum();
        let dbd: f64 = d.iter().zip(&bd).map(|(a, b)| a * b).sum();
        Ok(-(gd + 0.5 * dbd))
    }

    /// `∇m(xp) = g + B (xp − x)`.
    pub fn gradient_at(&self, xp: &[f64]) -> Result<Vec<f64>> {
        let d = self.step(xp)?;
        let mut out = self.hessian.hess_vec(&d)?;
        for (o, g) in out.iter_mut().zip(&self.gradient) {
            *o += g;
        }
        Ok(out)
    }

    /// Model gradient of node `i` at `current`.
    pub fn node_gradient(&self, i: usize, current: &[f64], partition: &Partition) -> Vec<f64> {
        let d: Vec<f64> = current.iter().zip(&self.x).map(|(a, b)| a - b).collect();
        let mut out = self.gradient[partition.node_range(i)].to_vec();
        self.hessian.row_product_into(i, &d, &mut out);
        out
    }

    /// Gradient of colour `k` at the point whose colours before `k` come
    /// from `z` and whose remaining colours sit at the base point.
    pub fn partial_model_gradient(&self, partition: &Partition, k: usize, z: &[f64]) -> Result<Vec<f64>> {
        if k >= partition.num_colors() {
            return Err(Error::InvalidParameter(format!(
                "colour {k} out of range 0..{}",
                partition.num_colors()
            )));
        }
        let mut mixed = self.x.clone();
        for c in 0..k {
            for &i in partition.group(c) {
                let r = partition.node_range(i);
                mixed[r.clone()].copy_from_slice(&z[r]);
            }
        }
        Ok(partition
            .group(k)
            .iter()
            .flat_map(|&i| self.node_gradient(i, &mixed, partition))
            .collect())
    }
}

/// Central-difference gradient check.
///
/// Returns `‖g_fd − g‖∞ / max(1, ‖g‖∞)` with step `1e-6 (1 + |x_i|)`.
pub fn fd_gradient_error(f: impl Fn(&[f64]) -> f64, grad: &[f64], x: &[f64]) -> f64 {
    let mut xp = x.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let h = 1e-6 * (1.0 + x[i].abs());
        xp[i] = x[i] + h;
        let fp = f(&xp);
        xp[i] = x[i] - h;
        let fm = f(&xp);
        xp[i] = x[i];
        worst = worst.max(((fp - fm) / (2.0 * h) - grad[i]).abs());
    }
    let scale = grad.iter().fold(1.0f64, |m, g| m.max(g.abs()));
    worst / scale
}

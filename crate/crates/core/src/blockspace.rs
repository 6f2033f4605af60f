//! Variable partitioning, colouring, box geometry and criticality measures.
//!
//! Variables live in one flat vector in node order: node `i` owns the
//! contiguous range `offsets[i]..offsets[i + 1]`. A [`Partition`] groups nodes
//! into colours; nodes sharing a colour must not be coupled in the objective,
//! so a Gauss-Seidel sweep can update a whole colour at once. Colours are
//! numbered from zero and the sweep visits them in increasing order.

use std::collections::{BTreeSet, VecDeque};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute distance to a bound under which a coordinate counts as active.
pub const DEFAULT_ACTIVE_TOL: f64 = 1e-10;

/// Undirected coupling between nodes, without self-loops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphDoc", into = "GraphDoc")]
pub struct CouplingGraph {
    num_nodes: usize,
    edges: BTreeSet<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
}

impl TryFrom<GraphDoc> for CouplingGraph {
    type Error = Error;

    fn try_from(doc: GraphDoc) -> Result<Self> {
        CouplingGraph::new(doc.num_nodes, doc.edges)
    }
}

impl From<CouplingGraph> for GraphDoc {
    fn from(g: CouplingGraph) -> Self {
        GraphDoc {
            num_nodes: g.num_nodes,
            edges: g.edges.into_iter().collect(),
        }
    }
}

impl CouplingGraph {
    /// Builds a graph; edges may be given in either orientation and repeated.
    pub fn new(num_nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at node {a}")));
            }
            if a >= num_nodes || b >= num_nodes {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a}, {b}) references a node outside 0..{num_nodes}"
                )));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let mut adjacency = vec![Vec::new(); num_nodes];
        for &(a, b) in &set {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for row in &mut adjacency {
            row.sort_unstable();
        }
        Ok(CouplingGraph {
            num_nodes,
            edges: set,
            adjacency,
        })
    }

    pub fn edgeless(num_nodes: usize) -> Self {
        CouplingGraph {
            num_nodes,
            edges: BTreeSet::new(),
            adjacency: vec![Vec::new(); num_nodes],
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(min, max)` pairs in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    /// Sorted neighbours of `node`.
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    /// True when the graph has no cycles.
    pub fn is_forest(&self) -> bool {
        // A forest has exactly `nodes - components` edges.
        let components = connected_components(self).len();
        self.edges.len() + components == self.num_nodes
    }
}

fn connected_components(graph: &CouplingGraph) -> Vec<Vec<usize>> {
    let mut seen = vec![false; graph.num_nodes];
    let mut out = Vec::new();
    for start in 0..graph.num_nodes {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut order = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &w in graph.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    order.push(w);
                    queue.push_back(w);
                }
            }
        }
        out.push(order);
    }
    out
}

/// Node sizes together with a colouring of the nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PartitionDoc", into = "PartitionDoc")]
pub struct Partition {
    node_sizes: Vec<usize>,
    offsets: Vec<usize>,
    color_of_node: Vec<usize>,
    groups: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct PartitionDoc {
    node_sizes: Vec<usize>,
    colors: Vec<usize>,
}

impl TryFrom<PartitionDoc> for Partition {
    type Error = Error;

    fn try_from(doc: PartitionDoc) -> Result<Self> {
        Partition::new(doc.node_sizes, doc.colors)
    }
}

impl From<Partition> for PartitionDoc {
    fn from(p: Partition) -> Self {
        PartitionDoc {
            node_sizes: p.node_sizes,
            colors: p.color_of_node,
        }
    }
}

impl Partition {
    /// Colours must cover `0..K` with no empty colour; node sizes must be positive.
    pub fn new(node_sizes: Vec<usize>, color_of_node: Vec<usize>) -> Result<Self> {
        if node_sizes.len() != color_of_node.len() {
            return Err(Error::InvalidPartition(format!(
                "{} node sizes but {} colours",
                node_sizes.len(),
                color_of_node.len()
            )));
        }
        if let Some(i) = node_sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidPartition(format!("node {i} has size zero")));
        }
        let num_colors = color_of_node.iter().map(|&c| c + 1).max().unwrap_or(0);
        let mut groups = vec![Vec::new(); num_colors];
        for (node, &c) in color_of_node.iter().enumerate() {
            groups[c].push(node);
        }
        if let Some(c) = groups.iter().position(|g| g.is_empty()) {
            return Err(Error::InvalidPartition(format!("colour {c} is empty")));
        }
        let mut offsets = Vec::with_capacity(node_sizes.len() + 1);
        offsets.push(0);
        for &s in &node_sizes {
            offsets.push(offsets.last().unwrap() + s);
        }
        Ok(Partition {
            node_sizes,
            offsets,
            color_of_node,
            groups,
        })
    }

    /// Every node in one colour: the sweep degenerates into a single
    /// projected-gradient step over all variables.
    pub fn single_color(node_sizes: Vec<usize>) -> Result<Self> {
        let n = node_sizes.len();
        Partition::new(node_sizes, vec![0; n])
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn num_nodes(&self) -> usize {
        self.node_sizes.len()
    }

    pub fn num_colors(&self) -> usize {
        self.groups.len()
    }

    pub fn node_sizes(&self) -> &[usize] {
        &self.node_sizes
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn node_range(&self, node: usize) -> Range<usize> {
        self.offsets[node]..self.offsets[node + 1]
    }

    pub fn color_of(&self, node: usize) -> usize {
        self.color_of_node[node]
    }

    pub fn colors(&self) -> &[usize] {
        &self.color_of_node
    }

    /// Nodes of colour `k` in ascending order.
    pub fn group(&self, k: usize) -> &[usize] {
        &self.groups[k]
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// Nodes listed colour by colour: the permutation taking node order to
    /// sweep order.
    pub fn node_order(&self) -> Vec<usize> {
        self.groups.iter().flatten().copied().collect()
    }

    /// Coordinates of colour `k`, in sweep order.
    pub fn color_indices(&self, k: usize) -> Vec<usize> {
        self.groups[k]
            .iter()
            .flat_map(|&i| self.node_range(i))
            .collect()
    }

    /// Checks that no coupling edge joins two nodes of the same colour.
    pub fn validate_against(&self, graph: &CouplingGraph) -> Result<()> {
        if graph.num_nodes() != self.num_nodes() {
            return Err(Error::DimensionMismatch {
                expected: self.num_nodes(),
                found: graph.num_nodes(),
            });
        }
        for (a, b) in graph.edges() {
            if self.color_of_node[a] == self.color_of_node[b] {
                return Err(Error::ColourConflict(a, b));
            }
        }
        Ok(())
    }

    pub fn view<'a>(&'a self, data: &'a [f64]) -> Result<BlockVector<'a>> {
        BlockVector::new(data, self)
    }

    /// JSON document with node sizes, colours and the coupling edges.
    pub fn to_json(&self, graph: &CouplingGraph) -> serde_json::Value {
        serde_json::json!({
            "node_sizes": self.node_sizes,
            "colors": self.color_of_node,
            "edges": graph.edges().collect::<Vec<_>>(),
        })
    }
}

/// A flat vector viewed through a partition.
#[derive(Debug, Clone, Copy)]
pub struct BlockVector<'a> {
    data: &'a [f64],
    partition: &'a Partition,
}

impl<'a> BlockVector<'a> {
    pub fn new(data: &'a [f64], partition: &'a Partition) -> Result<Self> {
        if data.len() != partition.dim() {
            return Err(Error::DimensionMismatch {
                expected: partition.dim(),
                found: data.len(),
            });
        }
        Ok(BlockVector { data, partition })
    }

    pub fn data(&self) -> &'a [f64] {
        self.data
    }

    pub fn partition(&self) -> &'a Partition {
        self.partition
    }

    pub fn node(&self, i: usize) -> &'a [f64] {
        &self.data[self.partition.node_range(i)]
    }

    /// Entries of colour `k`, concatenated in sweep order.
    pub fn color_block(&self, k: usize) -> Vec<f64> {
        self.partition
            .group(k)
            .iter()
            .flat_map(|&i| self.node(i).iter().copied())
            .collect()
    }
}

/// Per-coordinate bounds; infinite entries are allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSet {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        for (i, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(Error::InvalidBounds {
                    index: i,
                    lower: l,
                    upper: u,
                });
            }
        }
        Ok(BoxSet { lower, upper })
    }

    pub fn unbounded(n: usize) -> Self {
        BoxSet {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn uniform(n: usize, lower: f64, upper: f64) -> Result<Self> {
        BoxSet::new(vec![lower; n], vec![upper; n])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: n,
            });
        }
        Ok(())
    }

    pub fn clamp(&self, i: usize, v: f64) -> f64 {
        v.max(self.lower[i]).min(self.upper[i])
    }

    pub fn project_in_place(&self, x: &mut [f64]) -> Result<()> {
        self.check_dim(x.len())?;
        for (i, v) in x.iter_mut().enumerate() {
            *v = self.clamp(i, *v);
        }
        Ok(())
    }

    /// First coordinate lying more than `tol` outside the box.
    pub fn check_feasible(&self, x: &[f64], tol: f64) -> Result<()> {
        self.check_dim(x.len())?;
        for (i, &v) in x.iter().enumerate() {
            if !(v >= self.lower[i] - tol && v <= self.upper[i] + tol) {
                return Err(Error::Infeasible {
                    index: i,
                    value: v,
                    lower: self.lower[i],
                    upper: self.upper[i],
                });
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.check_feasible(x, tol).is_ok()
    }
}

/// Coordinates sitting at their lower or upper bound.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveSet {
    pub at_lower: Vec<usize>,
    pub at_upper: Vec<usize>,
}

impl ActiveSet {
    /// Number of active coordinates; a fixed coordinate counts once.
    pub fn len(&self) -> usize {
        let mut all: Vec<usize> = self.at_lower.iter().chain(&self.at_upper).copied().collect();
        all.sort_unstable();
        all.dedup();
        all.len()
    }

    pub fn is_empty(&self) -> bool {
        self.at_lower.is_empty() && self.at_upper.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.at_lower.binary_search(&i).is_ok() || self.at_upper.binary_search(&i).is_ok()
    }

    /// True when every constraint active here is active in `other` too.
    pub fn is_subset_of(&self, other: &ActiveSet) -> bool {
        self.at_lower
            .iter()
            .all(|i| other.at_lower.binary_search(i).is_ok())
            && self
                .at_upper
                .iter()
                .all(|i| other.at_upper.binary_search(i).is_ok())
    }

    /// Boolean mask of length `n`, true on active coordinates.
    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &i in self.at_lower.iter().chain(&self.at_upper) {
            m[i] = true;
        }
        m
    }
}

/// Componentwise clamp of `x` into the box.
pub fn project_box(x: &[f64], bounds: &BoxSet) -> Result<Vec<f64>> {
    let mut out = x.to_vec();
    bounds.project_in_place(&mut out)?;
    Ok(out)
}

/// `‖P(x − g) − x‖₂`, zero exactly at first-order critical points.
pub fn criticality(x: &[f64], g: &[f64], bounds: &BoxSet) -> Result<f64> {
    bounds.check_feasible(x, DEFAULT_ACTIVE_TOL)?;
    if g.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: g.len(),
        });
    }
    let sq: f64 = x
        .iter()
        .zip(g)
        .enumerate()
        .map(|(i, (&xi, &gi))| {
            let d = bounds.clamp(i, xi - gi) - xi;
            d * d
        })
        .sum();
    Ok(sq.sqrt())
}

/// Projection of `−g` onto the tangent cone of the box at `x`.
pub fn projected_gradient(x: &[f64], g: &[f64], bounds: &BoxSet) -> Result<Vec<f64>> {
    projected_gradient_with_tol(x, g, bounds, DEFAULT_ACTIVE_TOL)
}

pub fn projected_gradient_with_tol(
    x: &[f64],
    g: &[f64],
    bounds: &BoxSet,
    tol: f64,
) -> Result<Vec<f64>> {
    bounds.check_feasible(x, tol)?;
    if g.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: g.len(),
        });
    }
    Ok(x.iter()
        .zip(g)
        .enumerate()
        .map(|(i, (&xi, &gi))| {
            let at_lower = xi - bounds.lower[i] <= tol;
            let at_upper = bounds.upper[i] - xi <= tol;
            let mut d = -gi;
            if at_lower {
                d = d.max(0.0);
            }
            if at_upper {
                d = d.min(0.0);
            }
            d
        })
        .collect())
}

/// Coordinates within `tol` of a bound. Infinite bounds are never active.
pub fn active_set(x: &[f64], bounds: &BoxSet, tol: f64) -> ActiveSet {
    let mut out = ActiveSet::default();
    for (i, &xi) in x.iter().enumerate() {
        if xi - bounds.lower[i] <= tol {
            out.at_lower.push(i);
        }
        if bounds.upper[i] - xi <= tol {
            out.at_upper.push(i);
        }
    }
    out
}

/// Greedy smallest-available colouring.
///
/// Components are handled in order of their smallest node; inside a
/// component nodes are visited breadth-first from that node with neighbours
/// in ascending order. Breadth-first order makes trees two-colourable.
pub fn greedy_colors(graph: &CouplingGraph) -> Vec<usize> {
    let n = graph.num_nodes();
    let mut colors = vec![usize::MAX; n];
    let mut taken: Vec<bool> = Vec::new();
    for component in connected_components(graph) {
        for v in component {
            taken.clear();
            taken.resize(graph.neighbors(v).len() + 1, false);
            for &w in graph.neighbors(v) {
                let c = colors[w];
                if c < taken.len() {
                    taken[c] = true;
                }
            }
            colors[v] = taken.iter().position(|&t| !t).unwrap();
        }
    }
    colors
}

/// Colours `graph` with [`greedy_colors`] and attaches node sizes.
pub fn greedy_coloring(graph: &CouplingGraph, node_sizes: Vec<usize>) -> Result<Partition> {
    if node_sizes.len() != graph.num_nodes() {
        return Err(Error::DimensionMismatch {
            expected: graph.num_nodes(),
            found: node_sizes.len(),
        });
    }
    Partition::new(node_sizes, greedy_colors(graph))
}

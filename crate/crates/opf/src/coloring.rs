//! Colourings of the OPF node graph.
//!
//! Lines sharing a bus are coupled through that bus's balance rows, and
//! adjacent buses through the flow rows of the line between them. Lines and
//! buses never share a colour.

use std::collections::BTreeSet;

use trap_core::auglag::auglag_coupling;
use trap_core::blockspace::greedy_colors;
use trap_core::{CouplingGraph, Partition, Result};

use crate::case::NetworkCase;
use crate::problem::OpfProblem;

/// Line colours first, then bus colours offset past them.
pub fn opf_coloring(problem: &OpfProblem) -> Result<Partition> {
    let case = &problem.case;
    let layout = &problem.layout;
    let line_colors = greedy_colors(&line_graph(case)?);
    let bus_colors = greedy_colors(&bus_graph(case)?);
    let kl = line_colors.iter().max().map_or(0, |m| m + 1);
    let mut colors = vec![0; layout.node_sizes.len()];
    for (b, c) in bus_colors.into_iter().enumerate() {
        colors[layout.bus_node(b)] = kl + c;
    }
    for (l, c) in line_colors.into_iter().enumerate() {
        colors[layout.line_node(l)] = c;
    }
    let partition = Partition::new(layout.node_sizes.clone(), colors)?;
    partition.validate_against(&auglag_coupling(problem)?)?;
    Ok(partition)
}

/// Everything in one colour: the sweep degenerates to a single block step.
pub fn centralized_partition(problem: &OpfProblem) -> Result<Partition> {
    Partition::single_color(problem.layout.node_sizes.clone())
}

/// Lines adjacent when they share an endpoint.
pub fn line_graph(case: &NetworkCase) -> Result<CouplingGraph> {
    let mut edges = BTreeSet::new();
    for (a, ba) in case.branches.iter().enumerate() {
        for (b, bb) in case.branches.iter().enumerate().skip(a + 1) {
            if ba.from == bb.from || ba.from == bb.to || ba.to == bb.from || ba.to == bb.to {
                edges.insert((a, b));
            }
        }
    }
    CouplingGraph::new(case.num_lines(), edges)
}

pub fn bus_graph(case: &NetworkCase) -> Result<CouplingGraph> {
    let edges: BTreeSet<(usize, usize)> = case
        .branches
        .iter()
        .map(|b| (b.from.min(b.to), b.from.max(b.to)))
        .collect();
    CouplingGraph::new(case.num_buses(), edges)
}

//! Bookkeeping for the messages a distributed run would exchange.
//!
//! Nothing is transported. Solver stages report the exchanges their data
//! dependencies imply and the ledger tallies them per outer iteration and
//! phase. Neighbour exchanges are checked against the coupling graph so a
//! stage that silently reads non-local data shows up as an error.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::blockspace::CouplingGraph;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    Cauchy,
    Scg,
    RatioTest,
    Termination,
    DualUpdate,
}

impl Phase {
    pub const ALL: [Phase; 5] = [
        Phase::Cauchy,
        Phase::Scg,
        Phase::RatioTest,
        Phase::Termination,
        Phase::DualUpdate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Phase::Cauchy => "cauchy",
            Phase::Scg => "scg",
            Phase::RatioTest => "ratio_test",
            Phase::Termination => "termination",
            Phase::DualUpdate => "dual_update",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommEvent {
    /// A vector of `floats` entries sent from one node to a coupled node.
    NeighbourExchange { from: usize, to: usize, floats: usize },
    /// A global sum of one scalar per node; `scalars` values travel together.
    Reduction { scalars: usize },
    Broadcast { scalars: usize },
    Barrier,
    /// Global minimum over per-node step bounds, carried with a broadcast.
    MinSearch,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseCounts {
    pub local_msgs: usize,
    pub local_floats: usize,
    pub reductions: usize,
    pub reduced_scalars: usize,
    pub broadcasts: usize,
    pub barriers: usize,
    pub min_searches: usize,
}

impl PhaseCounts {
    fn merge(&mut self, o: &PhaseCounts) {
        self.local_msgs += o.local_msgs;
        self.local_floats += o.local_floats;
        self.reductions += o.reductions;
        self.reduced_scalars += o.reduced_scalars;
        self.broadcasts += o.broadcasts;
        self.barriers += o.barriers;
        self.min_searches += o.min_searches;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommLedger {
    graph: CouplingGraph,
    outer: usize,
    iteration: usize,
    counts: BTreeMap<(usize, usize, Phase), PhaseCounts>,
}

impl CommLedger {
    pub fn new(graph: CouplingGraph) -> Self {
        CommLedger {
            graph,
            outer: 0,
            iteration: 0,
            counts: BTreeMap::new(),
        }
    }

    pub fn graph(&self) -> &CouplingGraph {
        &self.graph
    }

    /// Sets the outer (dual) iteration that subsequent events belong to.
    pub fn set_outer(&mut self, outer: usize) {
        self.outer = outer;
    }

    /// Sets the inner iteration that subsequent events belong to.
    pub fn set_iteration(&mut self, iteration: usize) {
        self.iteration = iteration;
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn account(&mut self, event: CommEvent, phase: Phase) -> Result<()> {
        if let CommEvent::NeighbourExchange { from, to, .. } = event {
            if !self.graph.contains(from, to) {
                return Err(Error::NonLocalExchange(from, to));
            }
        }
        let c = self
            .counts
            .entry((self.outer, self.iteration, phase))
            .or_default();
        match event {
            CommEvent::NeighbourExchange { floats, .. } => {
                c.local_msgs += 1;
                c.local_floats += floats;
            }
            CommEvent::Reduction { scalars } => {
                c.reductions += 1;
                c.reduced_scalars += scalars;
            }
            CommEvent::Broadcast { .. } => c.broadcasts += 1,
            CommEvent::Barrier => c.barriers += 1,
            CommEvent::MinSearch => c.min_searches += 1,
        }
        Ok(())
    }

    /// Every node sends `floats(node)` values to each neighbour.
    pub fn exchange_all(&mut self, phase: Phase, nodes: &[usize], floats: impl Fn(usize) -> usize) -> Result<()> {
        for &i in nodes {
            for j in self.graph.neighbors(i).to_vec() {
                self.account(
                    CommEvent::NeighbourExchange {
                        from: i,
                        to: j,
                        floats: floats(i),
                    },
                    phase,
                )?;
            }
        }
        Ok(())
    }

    pub fn phase_totals(&self, phase: Phase) -> PhaseCounts {
        let mut out = PhaseCounts::default();
        for (_, c) in self.counts.iter().filter(|((_, _, p), _)| *p == phase) {
            out.merge(c);
        }
        out
    }

    pub fn totals(&self) -> PhaseCounts {
        let mut out = PhaseCounts::default();
        for c in self.counts.values() {
            out.merge(c);
        }
        out
    }

    pub fn iteration_counts(&self, outer: usize, iteration: usize, phase: Phase) -> PhaseCounts {
        self.counts
            .get(&(outer, iteration, phase))
            .copied()
            .unwrap_or_default()
    }

    /// Rows of `(outer, iteration, phase, counts)` in order.
    pub fn rows(&self) -> impl Iterator<Item = (usize, usize, Phase, &PhaseCounts)> {
        self.counts.iter().map(|(&(o, i, p), c)| (o, i, p, c))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "outer,iter,phase,local_msgs,local_floats,reductions,reduced_scalars,broadcasts,barriers,min_searches\n",
        );
        for (o, i, p, c) in self.rows() {
            let _ = writeln!(
                s,
                "{o},{i},{},{},{},{},{},{},{},{}",
                p.name(),
                c.local_msgs,
                c.local_floats,
                c.reductions,
                c.reduced_scalars,
                c.broadcasts,
                c.barriers,
                c.min_searches
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path() -> CouplingGraph {
        CouplingGraph::new(3, [(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn non_edge_exchange_rejected() {
        let mut l = CommLedger::new(path());
        let e = l.account(
            CommEvent::NeighbourExchange {
                from: 0,
                to: 2,
                floats: 1,
            },
            Phase::Cauchy,
        );
        assert!(matches!(e, Err(Error::NonLocalExchange(0, 2))));
        assert!(l.is_empty());
    }

    #[test]
    fn totals_sum_phases() {
        let mut l = CommLedger::new(path());
        l.account(CommEvent::Reduction { scalars: 1 }, Phase::Scg).unwrap();
        l.set_iteration(1);
        l.account(CommEvent::Reduction { scalars: 2 }, Phase::RatioTest).unwrap();
        l.account(CommEvent::Broadcast { scalars: 1 }, Phase::RatioTest).unwrap();
        l.exchange_all(Phase::Cauchy, &[1], |_| 3).unwrap();
        let t = l.totals();
        assert_eq!(t.reductions, 2);
        assert_eq!(t.local_msgs, 2);
        assert_eq!(t.local_floats, 6);
        let per: usize = Phase::ALL.iter().map(|&p| l.phase_totals(p).reductions).sum();
        assert_eq!(per, 2);
        assert_eq!(l.iteration_counts(0, 1, Phase::RatioTest).broadcasts, 1);
        assert_eq!(l.to_csv().lines().count(), 4);
    }
}

//! Augmented Lagrangian and LANCELOT loops on a small equality-constrained QP.

use trap_core::auglag::auglag_coupling;
use trap_core::fixtures::LinearEqualityQp;
use trap_core::{
    auglag_outer, greedy_coloring, lancelot_outer, BoxSet, EqualityNlp, LancelotParams, OuterParams,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // min ½‖x‖² + qᵀx  s.t.  x0 + x1 + x2 = 1,  x2 − x3 = 0.5,  0 ≤ x ≤ 2
    let p = LinearEqualityQp::new(
        BoxSet::uniform(4, 0.0, 2.0)?,
        vec![1.0, -1.0, 0.5, 0.0],
        vec![vec![(0, 1.0), (1, 1.0), (2, 1.0)], vec![(2, 1.0), (3, -1.0)]],
        vec![1.0, 0.5],
    );
    let graph = auglag_coupling(&p)?;
    let part = greedy_coloring(&graph, p.node_sizes().to_vec())?;
    let x0 = vec![0.0; 4];
    let params = OuterParams::default();
    let al = auglag_outer(&p, &x0, &part, &params, None)?;
    let la = lancelot_outer(&p, &x0, &part, &params, &LancelotParams::default(), None)?;
    for (name, r) in [("al", &al), ("lancelot", &la)] {
        println!("{name}:");
        print!("{}", r.table_csv());
        println!("  x = {:.6?}, mu = {:.6?}, |c| = {:.2e}", r.x, r.mu, r.constraint_norm);
    }
    Ok(())
}

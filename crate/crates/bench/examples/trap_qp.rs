//! Full trust-region solve of a nonconvex box QP.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trap_core::fixtures::{BoxQp, QpSpec};
use trap_core::{trap_solve, TrapParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let spec = QpSpec {
        num_nodes: 20,
        colors: 3,
        convex: false,
        bounded_frac: 1.0,
        ..QpSpec::default()
    };
    let (qp, part) = BoxQp::random(&mut rng, &spec)?;
    let x0 = qp.random_point(&mut rng);
    let params = TrapParams {
        epsilon: 1e-8,
        ..TrapParams::default()
    };
    let rep = trap_solve(&qp, &x0, &part, &params, None)?;
    println!("iter  delta      rho       kkt        active");
    for r in &rep.records {
        println!(
            "{:>4}  {:<9.3e}  {:<8.3}  {:<9.3e}  {}",
            r.iter, r.delta, r.rho, r.kkt, r.active_size
        );
    }
    println!(
        "{:?} after {} iterations, f = {:.6}, {} sCG passes",
        rep.termination, rep.iterations, rep.value, rep.cum_scg
    );
    Ok(())
}

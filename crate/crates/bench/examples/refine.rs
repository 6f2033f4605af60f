//! Cauchy point followed by the safeguarded CG refinement, with and without
//! the block preconditioner.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trap_core::fixtures::{BoxQp, QpSpec};
use trap_core::{cauchy_sweep, scg_refine, CauchyParams, Forcing, NlpProblem, QuadraticModel, RefineParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let spec = QpSpec {
        num_nodes: 16,
        max_node_size: 4,
        colors: 2,
        bounded_frac: 0.3,
        ..QpSpec::default()
    };
    let (qp, part) = BoxQp::random(&mut rng, &spec)?;
    let x = qp.random_point(&mut rng);
    let model = QuadraticModel::from_problem(&qp, &x)?;
    let delta = 50.0;
    let c = cauchy_sweep(&model, qp.bounds(), &part, delta, &CauchyParams::default(), None)?;
    println!("n {}, Cauchy decrease {:.4e}", qp.dim(), c.decrease);
    for (forcing, precondition) in [
        (Forcing::Adaptive, false),
        (Forcing::Fixed(1e-8), false),
        (Forcing::Fixed(1e-8), true),
    ] {
        let prm = RefineParams {
            forcing,
            precondition,
            ..RefineParams::default()
        };
        let r = scg_refine(&model, qp.bounds(), &part, &c, delta, &prm, None)?;
        println!(
            "{forcing:?}, precondition {precondition}: {:?} after {} passes, extra decrease {:.4e}, residuals {:.2e} -> {:.2e}",
            r.termination,
            r.cg_iterations,
            r.model_decrease_from_cauchy,
            r.residuals.first().copied().unwrap_or(0.0),
            r.residuals.last().copied().unwrap_or(0.0)
        );
    }
    Ok(())
}

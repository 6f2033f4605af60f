//! One alternating projected-gradient sweep on a random box QP.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trap_core::fixtures::{BoxQp, QpSpec};
use trap_core::{cauchy_sweep, CauchyParams, NlpProblem, QuadraticModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let spec = QpSpec {
        num_nodes: 10,
        colors: 3,
        ..QpSpec::default()
    };
    let (qp, part) = BoxQp::random(&mut rng, &spec)?;
    let x = qp.random_point(&mut rng);
    let model = QuadraticModel::from_problem(&qp, &x)?;
    for delta in [0.1, 1.0, 10.0] {
        let r = cauchy_sweep(&model, qp.bounds(), &part, delta, &CauchyParams::default(), None)?;
        let backtracks: usize = r.backtracks.iter().sum();
        println!(
            "delta {delta:>5}: decrease {:.4e}, per colour {:?}, {} active, {backtracks} backtracks",
            r.decrease,
            r.color_decreases.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>(),
            r.active.len()
        );
    }
    Ok(())
}

//! Augmented-Lagrangian solve of the bundled 9-bus case.
//!
//! `cargo run --release -p trap-opf --example opf_case9 -- [polar|rect] [al|lancelot]`

use trap_core::{auglag_outer, lancelot_outer, LancelotParams, OuterParams, TrapParams};
use trap_opf::{build_opf, opf_coloring, parse_case, Formulation, CASE9};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let formulation: Formulation = args.next().as_deref().unwrap_or("polar").parse()?;
    let lancelot = args.next().as_deref() == Some("lancelot");
    let case = parse_case(CASE9)?;
    let problem = build_opf(&case, formulation);
    let partition = opf_coloring(&problem)?;
    let x0 = problem.flat_start();
    let report = if lancelot {
        let params = OuterParams {
            factor: 100.0,
            inner: TrapParams {
                max_iters: 100,
                ..TrapParams::default()
            },
            ..OuterParams::default()
        };
        lancelot_outer(&problem, &x0, &partition, &params, &LancelotParams::default(), None)?
    } else {
        let params = OuterParams {
            inner: TrapParams {
                max_iters: 300,
                ..TrapParams::default()
            },
            ..OuterParams::default()
        };
        auglag_outer(&problem, &x0, &partition, &params, None)?
    };
    print!("{}", report.table_csv());
    println!(
        "objective {:.4}  |c| {:.3e}  {:?}  inner {}  scg {}",
        report.objective,
        report.constraint_norm,
        report.termination,
        report.total_inner(),
        report.total_scg()
    );
    Ok(())
}

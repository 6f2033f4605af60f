//! Communication a distributed 9-bus solve would need, by phase.

use trap_core::auglag::auglag_coupling;
use trap_core::{auglag_outer, CommLedger, OuterParams, Phase, RefineParams, TrapParams};
use trap_opf::{build_opf, opf_coloring, parse_case, Formulation, CASE9};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let problem = build_opf(&parse_case(CASE9)?, Formulation::Polar);
    let part = opf_coloring(&problem)?;
    let mut ledger = CommLedger::new(auglag_coupling(&problem)?);
    let params = OuterParams {
        inner: TrapParams {
            max_iters: 300,
            refine: RefineParams {
                precondition: true,
                ..RefineParams::default()
            },
            ..TrapParams::default()
        },
        ..OuterParams::default()
    };
    let rep = auglag_outer(&problem, &problem.flat_start(), &part, &params, Some(&mut ledger))?;
    println!(
        "{} outer, {} inner, {} sCG passes",
        rep.rows.len(),
        rep.total_inner(),
        rep.total_scg()
    );
    println!("phase        local msgs   floats      reductions  broadcasts  barriers");
    for phase in [Phase::Cauchy, Phase::Scg, Phase::RatioTest, Phase::Termination, Phase::DualUpdate] {
        let c = ledger.phase_totals(phase);
        println!(
            "{:<12} {:<12} {:<11} {:<11} {:<11} {}",
            phase.name(),
            c.local_msgs,
            c.local_floats,
            c.reductions,
            c.broadcasts,
            c.barriers
        );
    }
    Ok(())
}

//! Colour the 9-bus network and print the update schedule.
//!
//! `cargo run -p trap-bench --example coloring [case]`

use trap_opf::{build_opf, opf_coloring, Formulation};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "case9".into());
    let case = trap_bench::load_case(&name)?;
    let problem = build_opf(&case, Formulation::Polar);
    let part = opf_coloring(&problem)?;
    println!(
        "{} nodes, {} variables, {} colours",
        part.num_nodes(),
        part.dim(),
        part.num_colors()
    );
    let nb = case.num_buses();
    for (k, group) in part.groups().iter().enumerate() {
        let names: Vec<String> = group
            .iter()
            .map(|&n| {
                if n < nb {
                    format!("bus {}", case.buses[n].id)
                } else {
                    let br = &case.branches[n - nb];
                    format!("line {}-{}", case.buses[br.from].id, case.buses[br.to].id)
                }
            })
            .collect();
        println!("phase {}: {}", k + 1, names.join(", "));
    }
    Ok(())
}

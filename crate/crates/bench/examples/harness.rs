//! Run two configs through the harness, write their bundles and align the
//! traces. Defaults to the preconditioned run against the centralised one.
//!
//! `cargo run --release -p trap-bench --example harness [a.toml b.toml]`

use std::path::PathBuf;

use trap_bench::{compare_runs, run_experiment, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let configs = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs");
    let args: Vec<PathBuf> = std::env::args().skip(1).map(PathBuf::from).collect();
    let paths = if args.len() == 2 {
        args
    } else {
        vec![configs.join("case9_al.toml"), configs.join("case9_centralized.toml")]
    };
    let out = std::env::temp_dir().join("trap-bench-example");
    let mut dirs = Vec::new();
    for (i, p) in paths.iter().enumerate() {
        let cfg = ExperimentConfig::load(p)?;
        let bundle = run_experiment(&cfg)?;
        let s = &bundle.summary;
        println!(
            "{}: {:?}/{:?}, {} colours, {} outer, {} inner, {} sCG, |c| {:.2e}",
            s.name.as_deref().unwrap_or("?"),
            s.method,
            s.partition,
            s.colors,
            s.outer_iterations,
            s.total_inner,
            s.total_scg,
            s.constraint_norm.unwrap_or(f64::NAN)
        );
        print!("{}", bundle.table_csv);
        let dir = out.join(format!("run{i}"));
        bundle.write(&dir)?;
        dirs.push(dir);
    }
    let csv = compare_runs(&dirs[0], &dirs[1])?;
    let path = out.join("compare.csv");
    std::fs::write(&path, &csv)?;
    println!("{} aligned steps written to {}", csv.lines().count() - 1, path.display());
    Ok(())
}

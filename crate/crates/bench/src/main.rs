use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use trap_bench::{compare_runs, run_experiment, validate_case, BenchError, ExperimentConfig};

/// Runs solver experiments and compares their traces.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment described by a TOML or JSON config.
    Run {
        config: PathBuf,
        /// Bundle directory; overrides `run.output`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Align the traces of two bundles.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse a case file (or bundled case name) and report its shape.
    ValidateCase { case: String },
}

fn run(cmd: Cmd) -> Result<(), BenchError> {
    match cmd {
        Cmd::Run { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let bundle = run_experiment(&cfg)?;
            match out.or_else(|| cfg.output_dir()) {
                Some(dir) => {
                    bundle.write(&dir)?;
                    eprintln!("wrote {}", dir.display());
                }
                None => print!("{}", bundle.table_csv),
            }
            print!("{}", bundle.summary_json());
            if bundle.all_succeeded() {
                Ok(())
            } else {
                Err(BenchError::Solver(format!(
                    "{} of {} runs missed the feasibility target",
                    bundle.summary.repeat - bundle.summary.successes,
                    bundle.summary.repeat
                )))
            }
        }
        Cmd::Compare { a, b, out } => {
            let csv = compare_runs(&a, &b)?;
            match out {
                Some(p) => std::fs::write(p, csv)?,
                None => print!("{csv}"),
            }
            Ok(())
        }
        Cmd::ValidateCase { case } => {
            print!("{}", validate_case(&case)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::process::ExitCode;

use clap::Parser;

use bufrelay::cli::{parse_config, run_experiment, Cli, Command, Experiment};
use bufrelay::verify::run_checks;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate(args) => sweep(args, false),
        Command::Analyze(args) => sweep(args, true),
        Command::Verify { only } => {
            let outcomes = run_checks(&only);
            for o in &outcomes {
                println!("{o}");
            }
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            println!("{} passed, {failed} failed", outcomes.len() - failed);
            if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn sweep(args: bufrelay::cli::SweepArgs, analytical: bool) -> ExitCode {
    let mut spec = match parse_config(args.config.as_deref(), &args) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("bufrelay: {e}");
            return ExitCode::from(2);
        }
    };
    if analytical {
        spec.experiment = Experiment::AnalyticalOnly;
    }
    match run_experiment(&spec, args.jobs) {
        Ok(out) => {
            eprintln!(
                "wrote {} rows to {} ({} with errors); manifest {}",
                out.rows.len(),
                out.data_path.display(),
                out.error_rows,
                out.manifest_path.display()
            );
            for row in out.rows.iter().filter(|r| r.is_error()) {
                eprintln!("  snr {} dB, M={}, {}: {}", row.snr_db, row.m, row.protocol, row.error);
            }
            ExitCode::from(out.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("bufrelay: {e}");
            ExitCode::from(2)
        }
    }
}

use std::process::ExitCode;

use bayes_mhd_cli::config::{Command, RunArgs, RunConfig};
use bayes_mhd_cli::run::{emit, run};
use bayes_mhd_cli::{configure_threads, CliError};
use clap::{Parser, Subcommand};

/// Minimum Hellinger distance estimation from random-histogram posteriors.
#[derive(Parser)]
#[command(name = "bayes-mhd", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// MHB and/or BMH estimates on a dataset.
    Fit(RunArgs),
    /// Gross-error contamination sweep.
    Robustness(RunArgs),
    /// Variance of sqrt(n)(theta_hat - theta0) over simulated replicates.
    Efficiency(RunArgs),
    /// BMH posterior against its normal limit.
    Bvm(RunArgs),
    /// BMH parameter draws as CSV.
    PosteriorDump(RunArgs),
    /// Print the JSON schema of the run configuration.
    Schema,
}

fn main() -> ExitCode {
    // Usage errors are validation errors (exit 1); exit 2 is reserved for
    // numerical failures.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let (command, args) = match cli.command {
        Sub::Schema => {
            println!("{}", RunConfig::schema());
            return ExitCode::SUCCESS;
        }
        Sub::Fit(a) => (Command::Fit, a),
        Sub::Robustness(a) => (Command::Robustness, a),
        Sub::Efficiency(a) => (Command::Efficiency, a),
        Sub::Bvm(a) => (Command::Bvm, a),
        Sub::PosteriorDump(a) => (Command::PosteriorDump, a),
    };
    match execute(command, &args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(command: Command, args: &RunArgs) -> Result<i32, CliError> {
    let config = args.to_config(command)?;
    if args.print_config {
        println!("{}", config.to_json());
        return Ok(0);
    }
    let threads = configure_threads()?;
    let out = run(&config)?;
    for p in emit(&out, &config.output)? {
        eprintln!("wrote {}", p.display());
    }
    for w in &out.report.warnings {
        eprintln!("warning: {w}");
    }
    for e in &out.report.errors {
        eprintln!("error: {e}");
    }
    eprintln!("{} finished in {:.1}s on {threads} thread(s)", command.name(), out.wall_time_secs);
    Ok(out.exit_code())
}

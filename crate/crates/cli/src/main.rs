mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Failure;
use config::{Command, Flags, RunConfig};

/// Lemma checks, certified lifespan bounds and blow-up measurements for
/// u_tt − Δu = |u|^p in two space dimensions.
#[derive(Parser)]
#[command(name = "lifespan", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand)]
enum Sub {
    /// Run the identity and lemma checks and report pass/fail
    Verify,
    /// Estimate constants and emit the certified lower bound as JSON
    Certify,
    /// Solve with finite differences and export the field
    Simulate,
    /// Measure blow-up times over an eps ladder and fit the scaling law
    Sweep,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => return fail(Failure::Usage(e.to_string().trim_end().to_string())),
    };
    let command = match cli.command {
        Sub::Verify => Command::Verify,
        Sub::Certify => Command::Certify,
        Sub::Simulate => Command::Simulate,
        Sub::Sweep => Command::Sweep,
    };
    let cfg = match RunConfig::resolve(command, &cli.flags) {
        Ok(c) => c,
        Err(msg) => return fail(Failure::Usage(msg)),
    };
    // The only pool; core routines that parallelize run inside it.
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build_global() {
        return fail(Failure::Usage(format!("workers: {e}")));
    }
    match commands::run(&cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => fail(f),
    }
}

fn fail(f: Failure) -> ExitCode {
    eprintln!("{}", f.to_json());
    ExitCode::from(f.exit_code())
}

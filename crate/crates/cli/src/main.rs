//! Command-line driver for the electroseismic toolkit.
//!
//! Exit codes: 0 success or pass, 1 invalid input or a failed check,
//! 2 numerical failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "electroseis", version, about = "Maxwell-Biot forward runs, inversion and stability probes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Admissibility margins and pseudoconvexity report.
    CheckParams(Args),
    /// Coupled forward runs of both experiments with snapshots.
    Forward(Args),
    /// Galerkin reference against the finite-difference Biot solver.
    Oracle(Args),
    /// Numerical probes of the weighted estimates.
    CarlemanProbe(Args),
    /// Twin-experiment reconstruction of (α, β, γ, ξ).
    Reconstruct(Args),
    /// Hölder sweep over scaled perturbations.
    StabilitySweep(Args),
}

#[derive(clap::Args, Debug)]
struct Args {
    config: PathBuf,
    /// Output directory; defaults to `output.dir` relative to the config file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("ELECTROSEIS_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("ELECTROSEIS_THREADS must be a positive integer, got `{v}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let (cmd, args): (fn(&commands::Context) -> electroseis::Result<bool>, &Args) = match &cli.command {
        Command::CheckParams(a) => (commands::check_params, a),
        Command::Forward(a) => (commands::forward, a),
        Command::Oracle(a) => (commands::oracle, a),
        Command::CarlemanProbe(a) => (commands::carleman_probe, a),
        Command::Reconstruct(a) => (commands::reconstruct, a),
        Command::StabilitySweep(a) => (commands::stability_sweep, a),
    };
    let result = commands::Context::load(&args.config, args.out.as_deref()).and_then(|ctx| cmd(&ctx));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

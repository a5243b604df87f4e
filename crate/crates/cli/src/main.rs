use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dsrn_cli::commands::{run_forward, run_invert, run_reconstruct_kappa, run_verify, Run};
use dsrn_cli::output::{emit, Format};
use dsrn_cli::{config, CliError};

/// Fixed-energy scattering and inverse problems for Dirac fields on
/// de Sitter-Reissner-Nordstrom black holes.
#[derive(Parser)]
#[command(name = "dsrn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Worker threads for sweeps; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    /// Recorded in every output header.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Table of T, R, L over the configured energies and n.
    Forward,
    /// Fit (M, Q^2, Lambda, c) to a data file.
    Invert,
    /// Surface gravity from reflection ratios.
    ReconstructKappa,
    /// Invariant and cross-oracle checks against tolerances.
    Verify,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let loaded = config::load(path)?;
    let format = cli.format.unwrap_or(match cli.command {
        Command::Forward => Format::Csv,
        _ => Format::Json,
    });
    let ctx = Run { loaded, format, seed: cli.seed, out: cli.out.clone() };
    let workers = (cli.workers > 0).then_some(cli.workers);
    dsrn_core::par::with_workers(workers, || match cli.command {
        Command::Forward => emit(&run_forward(&ctx)?, ctx.out.as_deref()),
        Command::Invert => emit(&run_invert(&ctx)?, ctx.out.as_deref()),
        Command::ReconstructKappa => emit(&run_reconstruct_kappa(&ctx)?, ctx.out.as_deref()),
        Command::Verify => {
            let v = run_verify(&ctx)?;
            emit(&v.bytes, ctx.out.as_deref())?;
            if v.failures.is_empty() {
                Ok(())
            } else {
                Err(CliError::Verification(format!("verification failed: {}", v.failures.join("; "))))
            }
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("DSRN_LOG")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dsrn: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

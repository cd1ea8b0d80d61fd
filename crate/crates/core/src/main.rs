use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use wedge_credit::cli::commands::parse_grid;
use wedge_credit::cli::{parse_config, run_command, Command, Format, Method, Overrides};
use wedge_credit::Error;

/// Two-bank default model with mutual obligations.
#[derive(Debug, Parser)]
#[command(name = "wedge-credit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    method: Option<Method>,
    /// Finite-difference cells, for example 100x100.
    #[arg(long, global = true, value_parser = parse_grid)]
    grid: Option<[usize; 2]>,
    /// Time step in nondimensional time.
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Eigenmode cap of the wedge series.
    #[arg(long, global = true)]
    nmax: Option<usize>,
    /// Relative quadrature tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Remove the mutual obligations first, keeping each bank's net position.
    #[arg(long, global = true)]
    no_mutual: bool,
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

fn run(cli: Cli) -> Result<(), Error> {
    if let Ok(v) = std::env::var("WEDGE_CREDIT_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Schema(vec![format!("WEDGE_CREDIT_THREADS must be a positive integer, got {v:?}")]))?;
        // fails only if a pool already exists, which cannot happen this early
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let path = cli.config.ok_or_else(|| Error::Schema(vec!["--config <path> is required".into()]))?;
    let mut cfg = parse_config(&path)?;
    Overrides {
        method: cli.method,
        grid: cli.grid,
        dt: cli.dt,
        nmax: cli.nmax,
        tol: cli.tol,
        no_mutual: cli.no_mutual,
        output: cli.output,
        format: cli.format,
    }
    .apply(&mut cfg)?;
    let text = run_command(cli.command, &cfg)?.render(cfg.output.format)?;
    match &cfg.output.path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

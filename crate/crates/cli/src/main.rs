use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use irrtool::{run_command, Command, CommandRequest};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Balance,
    Trajectory,
    Irr,
    Approximate,
    ClassicalIrr,
}

/// Two-rate balances and internal rates of return of payment streams.
///
/// Streams and accumulation functions are read from JSON spec files.
#[derive(Debug, Parser)]
#[command(name = "irrtool", version)]
struct Cli {
    #[arg(value_enum)]
    command: Cmd,
    /// Payment stream spec.
    #[arg(long)]
    stream: Option<PathBuf>,
    /// Deposit accumulation spec, applied to positive balances.
    #[arg(long)]
    deposit: Option<PathBuf>,
    /// Investment accumulation spec, applied to negative balances.
    #[arg(long)]
    invest: Option<PathBuf>,
    /// Valuation time for `balance`.
    #[arg(long, allow_negative_numbers = true)]
    at: Option<f64>,
    /// Balance tolerance for piecewise (regulated) streams.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = irrtool::command::DEFAULT_ROOT_TOL)]
    root_tol: f64,
    /// Mesh tolerance for `approximate`.
    #[arg(long)]
    eps: Option<f64>,
    /// Largest rate scanned by `classical-irr`.
    #[arg(long, default_value_t = trm_core::irr::DEFAULT_IMAX)]
    imax: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn init_logging() -> Result<(), String> {
    let level = match std::env::var("IRRTOOL_LOG").as_deref() {
        Err(_) | Ok("off") => log::LevelFilter::Off,
        Ok("info") => log::LevelFilter::Info,
        Ok("debug") => log::LevelFilter::Debug,
        Ok(other) => {
            return Err(format!(
                "IRRTOOL_LOG must be off, info or debug, got {other:?}"
            ))
        }
    };
    env_logger::Builder::new().filter_level(level).init();
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_logging() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let command = match cli.command {
        Cmd::Balance => Command::Balance,
        Cmd::Trajectory => Command::Trajectory,
        Cmd::Irr => Command::Irr,
        Cmd::Approximate => Command::Approximate,
        Cmd::ClassicalIrr => Command::ClassicalIrr,
    };
    let req = CommandRequest {
        stream_path: cli.stream,
        deposit_path: cli.deposit,
        invest_path: cli.invest,
        at: cli.at,
        tol: cli.tol,
        root_tol: cli.root_tol,
        eps: cli.eps,
        imax: cli.imax,
        out_path: cli.out,
        ..CommandRequest::new(command)
    };
    match run_command(&req, &mut io::stdout().lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! Validated command requests and their execution.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;
use trm_core::balance::{balance_at, balance_regulated, trm_trajectory};
use trm_core::irr::{classical_irr, irr_with, DEFAULT_IMAX, DEFAULT_RELATIVE_BALANCE_TOL};
use trm_core::{AccumulationFunction, IrrOptions, PaymentStream};

use crate::output::{fmt_num, trajectory_csv, write_atomic};
use crate::spec::{parse_accumulation, parse_stream, ParseError, StreamSpec};

pub const DEFAULT_ROOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Balance,
    Trajectory,
    Irr,
    Approximate,
    ClassicalIrr,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Balance => "balance",
            Command::Trajectory => "trajectory",
            Command::Irr => "irr",
            Command::Approximate => "approximate",
            Command::ClassicalIrr => "classical-irr",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot parse {file}: {source}")]
    Parse {
        file: PathBuf,
        #[source]
        source: ParseError,
    },
    #[error("{command} requires {input}")]
    MissingInput {
        command: &'static str,
        input: &'static str,
    },
    #[error("{0}")]
    Domain(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 for parse errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } => 2,
            _ => 1,
        }
    }

    fn domain(e: impl std::fmt::Display) -> Self {
        CliError::Domain(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandRequest {
    pub command: Command,
    pub stream_path: Option<PathBuf>,
    pub deposit_path: Option<PathBuf>,
    pub invest_path: Option<PathBuf>,
    pub at: Option<f64>,
    /// Balance tolerance for regulated streams; relative default when absent.
    pub tol: Option<f64>,
    pub root_tol: f64,
    pub eps: Option<f64>,
    pub imax: f64,
    pub out_path: Option<PathBuf>,
}

impl CommandRequest {
    pub fn new(command: Command) -> Self {
        CommandRequest {
            command,
            stream_path: None,
            deposit_path: None,
            invest_path: None,
            at: None,
            tol: None,
            root_tol: DEFAULT_ROOT_TOL,
            eps: None,
            imax: DEFAULT_IMAX,
            out_path: None,
        }
    }

    /// Checks that every input the command needs is present.
    pub fn validate(&self) -> Result<(), CliError> {
        let command = self.command.name();
        let missing = |input| Err(CliError::MissingInput { command, input });
        if self.stream_path.is_none() {
            return missing("--stream");
        }
        match self.command {
            Command::Balance | Command::Trajectory | Command::Irr
                if self.deposit_path.is_none() =>
            {
                return missing("--deposit")
            }
            Command::Balance | Command::Trajectory if self.invest_path.is_none() => {
                return missing("--invest")
            }
            Command::Balance if self.at.is_none() => return missing("--at"),
            Command::Approximate if self.eps.is_none() => return missing("--eps"),
            Command::Approximate if self.out_path.is_none() => return missing("--out"),
            _ => {}
        }
        for (name, v) in [
            ("--root-tol", Some(self.root_tol)),
            ("--tol", self.tol),
            ("--eps", self.eps),
        ] {
            if let Some(v) = v {
                if !v.is_finite() || v <= 0.0 {
                    return Err(CliError::Domain(format!(
                        "{name} must be positive, got {v}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_stream(path: &Path) -> Result<PaymentStream, CliError> {
    parse_stream(&read(path)?).map_err(|source| CliError::Parse {
        file: path.to_path_buf(),
        source,
    })
}

fn load_accumulation(path: &Path) -> Result<AccumulationFunction, CliError> {
    parse_accumulation(&read(path)?).map_err(|source| CliError::Parse {
        file: path.to_path_buf(),
        source,
    })
}

fn default_tol(f: &PaymentStream) -> f64 {
    match f {
        PaymentStream::Step(_) => 0.0,
        PaymentStream::Regulated(r) => DEFAULT_RELATIVE_BALANCE_TOL * r.sup_norm().max(1.0),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|source| CliError::Io {
            path: PathBuf::from("<stdout>"),
            source,
        })
}

fn emit_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    write_atomic(path, bytes).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Validates and runs `req`, writing text results to `out`.
pub fn run_command(req: &CommandRequest, out: &mut dyn Write) -> Result<(), CliError> {
    req.validate()?;
    let stream = load_stream(req.stream_path.as_deref().expect("validated"))?;
    let deposit = req
        .deposit_path
        .as_deref()
        .map(load_accumulation)
        .transpose()?;
    let invest = req
        .invest_path
        .as_deref()
        .map(load_accumulation)
        .transpose()?;
    log::info!("running {}", req.command.name());

    match req.command {
        Command::Balance => {
            let (a, b) = (
                deposit.as_ref().expect("validated"),
                invest.as_ref().expect("validated"),
            );
            let t = req.at.expect("validated");
            match &stream {
                PaymentStream::Step(f) => {
                    let v = balance_at(f, a, b, t).map_err(CliError::domain)?;
                    emit(out, &format!("{}\n", fmt_num(v)))
                }
                PaymentStream::Regulated(f) => {
                    let tol = req.tol.unwrap_or_else(|| default_tol(&stream));
                    let cb = balance_regulated(f, a, b, t, tol).map_err(CliError::domain)?;
                    log::debug!("mesh tolerance {}", cb.mesh_eps);
                    emit(
                        out,
                        &format!(
                            "{}\nerror_bound={}\n",
                            fmt_num(cb.value),
                            fmt_num(cb.error_bound)
                        ),
                    )
                }
            }
        }
        Command::Trajectory => {
            let PaymentStream::Step(f) = &stream else {
                return Err(CliError::Domain(
                    "trajectory needs a step stream; run approximate first".into(),
                ));
            };
            let tr = trm_trajectory(
                f,
                deposit.as_ref().expect("validated"),
                invest.as_ref().expect("validated"),
            )
            .map_err(CliError::domain)?;
            let csv = trajectory_csv(&tr);
            match &req.out_path {
                Some(p) => emit_file(p, &csv),
                None => out.write_all(&csv).map_err(|source| CliError::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                }),
            }
        }
        Command::Irr => {
            let mut opts = IrrOptions::new(req.root_tol);
            if let Some(tol) = req.tol {
                opts = opts.with_balance_tol(tol);
            }
            let r = irr_with(&stream, deposit.as_ref().expect("validated"), &opts)
                .map_err(CliError::domain)?;
            emit(
                out,
                &format!(
                    "nu,irr,residual\n{},{},{}\nIRR={}\n",
                    fmt_num(r.nu),
                    fmt_num(r.irr),
                    fmt_num(r.residual),
                    fmt_num(r.irr)
                ),
            )
        }
        Command::Approximate => {
            let step = match &stream {
                PaymentStream::Step(f) => f.clone(),
                PaymentStream::Regulated(f) => f
                    .approximate(req.eps.expect("validated"))
                    .map_err(CliError::domain)?,
            };
            log::info!("approximant has {} flows", step.len());
            let mut json = serde_json::to_vec_pretty(&StreamSpec::from_step(&step))
                .expect("finite numbers serialize");
            json.push(b'\n');
            emit_file(req.out_path.as_deref().expect("validated"), &json)
        }
        Command::ClassicalIrr => {
            let PaymentStream::Step(f) = &stream else {
                return Err(CliError::Domain("classical-irr needs a step stream".into()));
            };
            let roots = classical_irr(f, req.root_tol, req.imax).map_err(CliError::domain)?;
            let text: String = roots.iter().map(|r| format!("{}\n", fmt_num(*r))).collect();
            emit(out, &text)
        }
    }
}

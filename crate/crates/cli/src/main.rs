//! `corrugate`: feasibility checks, runs, verification and CIGRID inspection.

mod inspect;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use corrugate::Error;

#[derive(Parser)]
#[command(
    name = "corrugate",
    version,
    about = "Convex integration runs for the 2-Hessian equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the schedule ledger of a config; exits 0 only when feasible.
    Feasible {
        config: PathBuf,
        /// Print the ledger as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run the initialisation and all stages, writing fields and provenance.
    Run {
        config: PathBuf,
        /// Output directory, overriding `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write `V_q`, `W_q` after every stage.
        #[arg(long)]
        dump_stages: bool,
        /// Write CSV transects and the per-stage norm table.
        #[arg(long)]
        emit_plot_data: bool,
    },
    /// Weak residual of a solution against a right-hand side.
    Verify {
        /// Scalar CIGRID file with `v`.
        v: PathBuf,
        /// Scalar CIGRID file with `f`, resampled onto the grid of `v` if needed.
        f: PathBuf,
        /// Takes the domain from this config when the headers have none.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Number of bump test functions.
        #[arg(long, default_value_t = 16)]
        tests: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Print the header and the values of a CIGRID file as text.
    Dump {
        file: PathBuf,
        /// Stop after this many points.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Print the header and per-component statistics of a CIGRID file.
    Info { file: PathBuf },
}

/// An error with its process exit code.
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::new(exit_code(&e), e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(4, e.to_string())
    }
}

/// 2 ledger, 3 stage assertion, 4 configuration and I/O, 1 anything else.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Infeasible(_) | Error::ScheduleOverflow(_) => 2,
        Error::StageAssertion(_) => 3,
        Error::Config { .. }
        | Error::Io(_)
        | Error::Format(_)
        | Error::Grid(_)
        | Error::FrequencyExceedsGrid { .. }
        | Error::MollifierExceedsPad { .. } => 4,
        _ => 1,
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("CORRUGATE_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        Failure::new(
            4,
            format!("CORRUGATE_THREADS must be a positive integer, got `{raw}`"),
        )
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::new(1, e.to_string()))
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Feasible { config, json } => run::feasible(&config, json),
        Command::Run {
            config,
            out,
            seed,
            dump_stages,
            emit_plot_data,
        } => run::run(
            &config,
            run::Overrides {
                out,
                seed,
                dump_stages,
                emit_plot_data,
            },
        ),
        Command::Verify {
            v,
            f,
            config,
            tests,
            seed,
            json,
        } => inspect::verify(&v, &f, config.as_deref(), tests, seed, json),
        Command::Dump { file, limit } => inspect::dump(&file, limit),
        Command::Info { file } => inspect::info(&file),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors share the configuration exit code
            return ExitCode::from(if e.use_stderr() { 4 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

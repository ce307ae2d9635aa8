use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use covfuse_cli::commands::{self, solution};
use covfuse_cli::scenario::SEED_ENV;
use covfuse_cli::{
    cmd_deconflict, cmd_fuse, cmd_union, exit, plot, random_scenario, verify, CliError, CliResult, FuseMethod,
    Input, RunRecord, Scenario, Suite, UnionMethod, VerifyOptions,
};

/// Covariance fusion and covariance union of mean-and-covariance estimates.
#[derive(Debug, Parser)]
#[command(name = "covfuse", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Io {
    /// Scenario JSON file, `-` for stdin.
    #[arg(long = "in", value_name = "FILE", default_value = "-")]
    input: PathBuf,
    /// Also write the record to this file.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Overrides the configured seed and COVFUSE_SEED.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fuse the estimates (Kalman or Covariance Intersection).
    Fuse {
        #[arg(long, value_enum, default_value = "ci")]
        method: FuseMethod,
        #[command(flatten)]
        io: Io,
    },
    /// Union of the estimates (CU, or GCU solved directly or as an enclosing ellipsoid).
    Union {
        #[arg(long, value_enum, default_value = "cu")]
        method: UnionMethod,
        /// Solve GCU both ways and compare.
        #[arg(long)]
        cross_check: bool,
        #[command(flatten)]
        io: Io,
    },
    /// Union if any pair is farther apart than the gate, fusion otherwise.
    Deconflict {
        /// Squared Mahalanobis threshold; defaults to the scenario's `gate` (9.0).
        #[arg(long)]
        gate: Option<f64>,
        #[arg(long, value_enum, default_value = "cu")]
        method: UnionMethod,
        #[command(flatten)]
        io: Io,
    },
    /// SVG of the input and solution 1σ contours from a record or a scenario.
    Plot {
        /// Run record or scenario JSON.
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Union used when the input is a scenario.
        #[arg(long, value_enum, default_value = "gcu-mee")]
        method: UnionMethod,
    },
    /// Randomized verification sweep.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Include every case in the report.
        #[arg(long)]
        trace: bool,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Write a random scenario.
    Sample {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 5)]
        count: usize,
        #[arg(long, default_value_t = 3.0)]
        radius: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

fn read_input(path: &Path) -> CliResult<Vec<u8>> {
    if path == Path::new("-") {
        let mut buf = Vec::new();
        std::io::stdin().read_to_end(&mut buf)?;
        Ok(buf)
    } else {
        std::fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }
}

fn emit(text: &str, out: Option<&Path>) -> CliResult<()> {
    if let Some(path) = out {
        std::fs::write(path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    }
    let mut stdout = std::io::stdout().lock();
    match writeln!(stdout, "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn env_seed() -> Option<String> {
    std::env::var(SEED_ENV).ok()
}

fn load(io: &Io) -> CliResult<Input> {
    let bytes = read_input(&io.input)?;
    Input::parse(&bytes, env_seed().as_deref(), io.seed)
}

fn finish_record(rec: &RunRecord, out: Option<&Path>) -> CliResult<()> {
    emit(&rec.to_json(), out)?;
    match rec.diagnostics.check_failures.first() {
        Some(msg) => Err(CliError::Check(msg.clone())),
        None => Ok(()),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fuse { method, io } => finish_record(&cmd_fuse(&load(&io)?, method)?, io.out.as_deref()),
        Command::Union { method, cross_check, io } => {
            finish_record(&cmd_union(&load(&io)?, method, cross_check)?, io.out.as_deref())
        }
        Command::Deconflict { gate, method, io } => {
            finish_record(&cmd_deconflict(&load(&io)?, gate, method)?, io.out.as_deref())
        }
        Command::Plot { input, out, method } => {
            let bytes = read_input(&input)?;
            let (inputs, sol, labels) = match RunRecord::from_json(&bytes) {
                Ok(rec) => {
                    let sol = solution(&rec)?.clone();
                    (rec.inputs, sol, None)
                }
                Err(_) => {
                    let input = Input::parse(&bytes, env_seed().as_deref(), None)?;
                    let rec = commands::cmd_union(&input, method, false)?;
                    let sol = solution(&rec)?.clone();
                    (rec.inputs, sol, input.scenario.labels)
                }
            };
            let svg = plot::render_svg(&inputs, &sol, labels.as_deref())?;
            std::fs::write(&out, svg).map_err(|e| CliError::Input(format!("{}: {e}", out.display())))?;
            Ok(())
        }
        Command::Verify { suite, n, seed, trace, out } => {
            let seed = covfuse_cli::scenario::resolve_seed(0, env_seed().as_deref(), seed)?;
            let opts = VerifyOptions { count: n, seed, trace, tol: Default::default() };
            let report = verify::run(suite, &opts)?;
            emit(&serde_json::to_string_pretty(&report).expect("report serializes"), out.as_deref())?;
            if report.ok() {
                Ok(())
            } else {
                Err(CliError::Check(format!(
                    "{} of {} {} cases failed",
                    report.failed,
                    report.checked,
                    suite.name()
                )))
            }
        }
        Command::Sample { dim, count, radius, seed, out } => {
            let seed = covfuse_cli::scenario::resolve_seed(0, env_seed().as_deref(), seed)?;
            let s: Scenario = random_scenario(dim, count, radius, seed)?;
            emit(&s.to_json(), out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let err = CliError::Input(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(exit::INPUT as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! `ribbon-klein` command-line driver.
//!
//! ```text
//! ribbon-klein run --config run.cfg --sweep angle --out results/
//! ribbon-klein validate --config run.cfg
//! ```
//!
//! Exit codes: 0 success, 1 parse or validation error, 2 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ribbon_klein::config::{parse_config, RunConfig};
use ribbon_klein::sweep::{run_sweep, SweepKind};
use ribbon_klein::Error;

#[derive(Parser)]
#[command(name = "ribbon-klein", version, about = "Klein tunneling in armchair graphene nanoribbons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write CSV files.
    Run {
        /// Configuration file (`key = value` lines).
        #[arg(long)]
        config: PathBuf,
        /// Which parameter to scan.
        #[arg(long, value_enum)]
        sweep: Sweep,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated values for list sweeps (degrees, multiples of a0
        /// or eV); defaults to the values of the reference study.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// Parse a configuration and check its invariants.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Sweep {
    Energy,
    Angle,
    Length,
    Broadening,
    Ldos,
}

impl Sweep {
    fn name(self) -> &'static str {
        match self {
            Sweep::Energy => "energy",
            Sweep::Angle => "angle",
            Sweep::Length => "length",
            Sweep::Broadening => "broadening",
            Sweep::Ldos => "ldos",
        }
    }
}

const EXIT_INPUT: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::NumericalFailure(_) => EXIT_NUMERICAL,
        _ => EXIT_INPUT,
    }
}

fn load(path: &Path) -> Result<RunConfig, Error> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let config = parse_config(&text)?;
    config.validate()?;
    Ok(config)
}

fn run(command: Command) -> Result<u8, Error> {
    match command {
        Command::Validate { config } => {
            let resolved = load(&config)?;
            print!("{}", resolved.echo(""));
            println!("ok");
            Ok(0)
        }
        Command::Run {
            config,
            sweep,
            out,
            values,
        } => {
            let resolved = load(&config)?;
            let kind = SweepKind::from_name(sweep.name(), values)?;
            let report = run_sweep(&resolved, &kind, &out)?;
            for (i, file) in report.files.iter().enumerate() {
                match report.conductance.get(i) {
                    Some(Some(sigma)) => println!("{}\tsigma = {sigma:.9} (2e^2/h)", file.display()),
                    _ => println!("{}", file.display()),
                }
            }
            if let Some(manifest) = &report.manifest {
                println!("{}", manifest.display());
            }
            if report.failures > 0 {
                eprintln!("error: {} energy point(s) failed; see rows marked `error`", report.failures);
                return Ok(EXIT_NUMERICAL);
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

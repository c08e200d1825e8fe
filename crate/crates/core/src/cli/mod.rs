//! Command-line interface.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INTERNAL: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_VIOLATION: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "sufnec",
    version,
    about = "Sufficient, necessary and unified feature-subset explanations"
)]
struct Cli {
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set solver.tau=4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (falls back to the configuration, then $SUFNEC_OUT_DIR, then `out`).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Plotting {
    #[command(flatten)]
    common: Common,
    /// Also write SVG plots.
    #[arg(long)]
    svg: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic regression data set and fit a linear model.
    GenData(Common),
    /// Explain one input with a chosen solver.
    Explain(Common),
    /// Run the theory sweep; exits with 3 on any violation.
    Verify(Common),
    /// Hamming stability of unified explanations across α.
    Stability(Plotting),
    /// Thresholded attribution comparison.
    Compare(Plotting),
}

/// Failure of a command, carrying its exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_)
            | Error::Budget(_)
            | Error::Domain(_)
            | Error::Shape { .. }
            | Error::Parse { .. }
            | Error::Capability(_) => EXIT_USAGE,
            _ => EXIT_INTERNAL,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INTERNAL);
        }
    }
    let outcome = match cli.command {
        Command::GenData(c) => commands::gen_data(&c),
        Command::Explain(c) => commands::explain(&c),
        Command::Verify(c) => commands::verify(&c),
        Command::Stability(p) => commands::stability(&p),
        Command::Compare(p) => commands::compare(&p),
    };
    match outcome {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

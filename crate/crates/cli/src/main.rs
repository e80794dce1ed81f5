mod commands;
mod config;
mod error;
mod report;

use clap::{Args, Parser, Subcommand};
use commands::ArchKind;
use config::Config;
use error::CliError;
use fhedse::checks::{NttCheckConfig, TransposeCheckConfig, DEFAULT_NTT_SIZES, DEFAULT_TILE_SIZES};
use report::{Format, Report};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "fhedse",
    version,
    about = "FHE accelerator models, sweeps, self-checks and scheduling runs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Output {
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Report file; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct Overrides {
    /// Override a config key, e.g. `group.R=128` or `l=4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the cycle models for one configuration.
    Model {
        #[arg(long, short)]
        config: Option<PathBuf>,
        /// Architectures to report; group and grid by default.
        #[arg(long, value_enum)]
        arch: Vec<ArchKind>,
        #[command(flatten)]
        overrides: Overrides,
        #[command(flatten)]
        output: Output,
    },
    /// Compare Grid and Group key-switching over a parameter grid.
    Sweep {
        #[arg(long, short)]
        config: Option<PathBuf>,
        /// `KEY=a..b` (inclusive) or `KEY=v1,v2,...`; repeat for a product.
        #[arg(long = "range", value_name = "KEY=VALUES")]
        ranges: Vec<String>,
        #[command(flatten)]
        overrides: Overrides,
        #[command(flatten)]
        output: Output,
    },
    /// NTT, pipeline-window and BConv oracle suites.
    NttCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 50)]
        vectors: usize,
        #[arg(long, default_value_t = 10_000)]
        bconv_inputs: usize,
        /// Corrupt one result per size to exercise failure reporting.
        #[arg(long)]
        inject_fault: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Transpose network oracle suites.
    TransposeCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',')]
        tiles: Vec<usize>,
        #[arg(long)]
        inject_fault: bool,
        /// Write a per-cycle JSON-lines trace of one L1 run.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Schedule a job scenario on the heterogeneous cluster model.
    Schedule {
        #[arg(long, short)]
        scenario: PathBuf,
        /// `fifo` or `priority-preemptive`; overrides the scenario's `policy`.
        #[arg(long)]
        policy: Option<String>,
        /// Write the event trace as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        #[command(flatten)]
        output: Output,
    },
}

fn load(path: Option<&PathBuf>, overrides: &Overrides) -> Result<Config, CliError> {
    let mut cfg = Config::load(path.map(PathBuf::as_path))?;
    for s in &overrides.set {
        cfg.apply_override(s)?;
    }
    Ok(cfg)
}

fn emit(report: Report, output: &Output) -> Result<(), CliError> {
    report.emit(output.output.as_deref(), output.format)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Model {
            config,
            arch,
            overrides,
            output,
        } => {
            let cfg = load(config.as_ref(), &overrides)?;
            emit(commands::run_model(&cfg, &arch)?, &output)
        }
        Command::Sweep {
            config,
            ranges,
            overrides,
            output,
        } => {
            let cfg = load(config.as_ref(), &overrides)?;
            emit(commands::run_sweep(&cfg, &ranges)?, &output)
        }
        Command::NttCheck {
            seed,
            sizes,
            vectors,
            bconv_inputs,
            inject_fault,
            output,
        } => {
            let cfg = NttCheckConfig {
                seed,
                sizes: if sizes.is_empty() {
                    DEFAULT_NTT_SIZES.to_vec()
                } else {
                    sizes
                },
                vectors,
                bconv_inputs,
                inject_fault,
            };
            let (report, failure) = commands::run_ntt_check(&cfg)?;
            emit(report, &output)?;
            failure.map_or(Ok(()), Err)
        }
        Command::TransposeCheck {
            seed,
            tiles,
            inject_fault,
            trace,
            output,
        } => {
            let cfg = TransposeCheckConfig {
                seed,
                tile_sizes: if tiles.is_empty() {
                    DEFAULT_TILE_SIZES.to_vec()
                } else {
                    tiles
                },
                inject_fault,
                ..Default::default()
            };
            let (report, failure) = commands::run_transpose_check(&cfg, trace.as_deref())?;
            emit(report, &output)?;
            failure.map_or(Ok(()), Err)
        }
        Command::Schedule {
            scenario,
            policy,
            trace,
            overrides,
            output,
        } => {
            let cfg = load(Some(&scenario), &overrides)?;
            emit(
                commands::run_schedule(&cfg, policy.as_deref(), trace.as_deref())?,
                &output,
            )
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

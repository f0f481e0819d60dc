//! `ddsense`: spectra, robustness maps and phase statistics for randomized
//! dynamical-decoupling sequences.
//!
//! Exit status: 0 success, 1 usage error or failed validation, 2 config or
//! sequence parse error, 3 simulation error, 4 I/O error.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{Globals, ModfuncArgs};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "ddsense", version, about = "Dynamical-decoupling sensing with randomized pulse phases")]
struct Cli {
    /// Seed for the phase generator (overrides `rng.seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Output directory.
    #[arg(long, short, global = true, env = "DDSENSE_OUTPUT_DIR", default_value = ".")]
    output: PathBuf,

    /// Set a config key, e.g. `--override sequence.repetitions=50`.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Frequency sweep: writes spectrum.csv.
    Spectrum { config: PathBuf },
    /// Fidelity map over two error axes: writes map_standard.csv and map_randomized.csv.
    Robustness { config: PathBuf },
    /// Monte-Carlo moments of |Z|^2: writes zstats.csv.
    Zstats {
        /// Repetition counts, comma separated.
        #[arg(short, long = "m", value_delimiter = ',', required = true)]
        m: Vec<usize>,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Balance and structure check of a unit.
    Validate {
        /// `.ddseq` file or family name.
        target: String,
        #[arg(long)]
        tau: Option<String>,
        #[arg(long)]
        tpi: Option<String>,
    },
    /// Modulation functions on a time grid: writes modfunc.csv and phases.csv.
    Modfunc {
        /// `.ddseq` file or family name.
        target: String,
        #[arg(long)]
        tau: Option<String>,
        #[arg(long)]
        tpi: Option<String>,
        #[arg(long, default_value_t = 1)]
        repetitions: usize,
        /// Samples per unit (raised to resolve the shortest pulse).
        #[arg(long, default_value_t = 800)]
        samples: usize,
        /// Draw per-unit phases from realization 0 of the seed.
        #[arg(long)]
        randomized: bool,
    },
}

fn run(cli: Cli) -> CliResult<bool> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot size the worker pool: {e}")))?;
    }
    let g = Globals {
        seed: cli.seed,
        output: cli.output,
        overrides: cli.overrides,
    };
    match cli.command {
        Command::Spectrum { config } => commands::spectrum(&g, &config)?,
        Command::Robustness { config } => commands::robustness(&g, &config)?,
        Command::Zstats { m, samples } => commands::zstats(&g, &m, samples)?,
        Command::Validate { target, tau, tpi } => return commands::validate(&target, tau.as_deref(), tpi.as_deref()),
        Command::Modfunc {
            target,
            tau,
            tpi,
            repetitions,
            samples,
            randomized,
        } => commands::modfunc(
            &g,
            &ModfuncArgs {
                target: &target,
                tau: tau.as_deref(),
                tpi: tpi.as_deref(),
                repetitions,
                samples,
                randomized,
            },
        )?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nlsdecay::commands::{self, RunDir};
use nlsdecay::{config, verify, CliError};

#[derive(Parser)]
#[command(name = "nlsdecay", version, about = "Simulate and measure decay for the defocusing cubic NLS")]
struct Cli {
    /// Worker threads for sweeps and suites.
    #[arg(long, global = true, env = "NLSDECAY_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the configured initial data and write snapshots and logs.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Run directory (defaults to the config's `output`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute observables, the scattering report and the Duhamel split.
    Measure {
        run_dir: PathBuf,
        /// Observation settings to use instead of the stored config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Proceed despite config hash mismatches.
        #[arg(long)]
        force: bool,
    },
    /// Fit decay rates from the measured series.
    Fit {
        run_dir: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Run a verification suite and print its JSON report.
    Verify {
        suite: String,
        #[arg(long, default_value_t = verify::DEFAULT_SEED)]
        seed: u64,
    },
    /// Simulate, measure and fit several configs in parallel.
    Sweep {
        #[arg(long = "config", required = true)]
        configs: Vec<PathBuf>,
        /// Parent directory; each run goes to `<out>/<run_id>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Prints a line; a closed stdout (e.g. piped into `head`) is not an error.
fn emit(line: impl std::fmt::Display) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    match cli.command {
        Command::Simulate { config, out } => {
            let prepared = config::load(&config)?;
            let dir = commands::resolve_output(&prepared, out.as_deref())?;
            commands::simulate(&prepared, &dir)?;
            emit(dir.display());
        }
        Command::Measure { run_dir, config, force } => {
            let run = RunDir::open(&run_dir, config.as_deref(), force)?;
            for file in commands::measure(&run)? {
                emit(run_dir.join(file).display());
            }
        }
        Command::Fit { run_dir, config, force } => {
            let run = RunDir::open(&run_dir, config.as_deref(), force)?;
            let report = commands::fit(&run, force)?;
            for e in &report.entries {
                let exponent = e.fit.map_or("-".to_owned(), |f| format!("{:.4}", f.exponent));
                emit(format_args!(
                    "{:<12} {:>9} target {} ± {} {:?}",
                    e.target.series, exponent, e.target.target, e.target.tolerance, e.status
                ));
            }
        }
        Command::Verify { suite, seed } => {
            let report = verify::run_suite(&suite, seed)?;
            emit(report.to_json());
            if !report.passed {
                return Err(CliError::VerifyFailed(suite));
            }
        }
        Command::Sweep { configs, out } => {
            let mut first_error = None;
            for (config, result) in commands::sweep(&configs, out.as_deref()) {
                match result {
                    Ok(dir) => emit(format_args!("ok   {} -> {}", config.display(), dir.display())),
                    Err(e) => {
                        emit(format_args!("fail {}: {e}", config.display()));
                        first_error.get_or_insert(e);
                    }
                }
            }
            if let Some(e) = first_error {
                return Err(e);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! Command-line front end for the `catcon` binary.
//!
//! Exit codes: 0 success, 1 invalid input (usage, config, grid, missing
//! metadata), 2 I/O failure, 3 verification failure. Every failure prints a
//! single line starting with `error:` on stderr.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use crate::catalogue::CatalogueDecision;
use crate::config::{LoadError, SimConfig};
use crate::io::{self, OutputError, VerifyError};
use crate::policy::PolicyMode;
use crate::sim::{run_simulation, SimError};
use crate::stats::median;
use crate::sweep::{default_grid, parse_grid, sweep_staking_rate, SweepError};

pub const EXIT_INVALID: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

const DEFAULT_GRID_POINTS: usize = 10;

#[derive(Parser, Debug)]
#[command(name = "catcon", version, about = "Staked credit-point voting simulator")]
struct Cli {
    /// Worker threads (default: available cores). Output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the Monte Carlo simulation and write trace, ledger, metadata and catalogue.
    Run {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        out: PathBuf,
        /// Catalogue inclusion threshold on the mean score.
        #[arg(long, default_value_t = 0.0)]
        threshold: f64,
    },
    /// Sweep the action staking rate and write sweep.csv.
    Sweep {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated rates in [0,1]; defaults to 10 points across the configured bounds.
        #[arg(long)]
        grid: Option<String>,
    },
    /// Recompute the catalogue of an existing run directory.
    Catalogue {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        threshold: f64,
    },
    /// Replay a run directory and check it end to end.
    Verify {
        /// Run directory written by `run`.
        dir: PathBuf,
    },
    /// Check a config file without running anything.
    ValidateConfig {
        #[command(flatten)]
        sim: SimArgs,
    },
}

#[derive(Args, Debug)]
struct SimArgs {
    /// JSON config; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config policy mode.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Learning,
    Nonlearning,
}

impl From<ModeArg> for PolicyMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Learning => PolicyMode::Learning,
            ModeArg::Nonlearning => PolicyMode::NonLearning,
        }
    }
}

/// A failure with its exit code and one-line message.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into().replace('\n', " "),
        }
    }
}

impl From<LoadError> for CliError {
    fn from(e: LoadError) -> Self {
        let code = match e {
            LoadError::Io { .. } => EXIT_IO,
            _ => EXIT_INVALID,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<OutputError> for CliError {
    fn from(e: OutputError) -> Self {
        CliError::new(EXIT_IO, e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::new(EXIT_INVALID, e.to_string())
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        let code = match e {
            VerifyError::Metadata(_) => EXIT_INVALID,
            VerifyError::Inconsistent(_) => EXIT_VERIFY,
        };
        CliError::new(code, e.to_string())
    }
}

impl SimArgs {
    fn load(&self) -> Result<SimConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => SimConfig::load(path)?,
            None => SimConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(mode) = self.mode {
            config.policy.mode = mode.into();
        }
        config
            .validate()
            .map_err(|e| CliError::new(EXIT_INVALID, e.to_string()))?;
        Ok(config)
    }
}

fn print_catalogue(decisions: &[CatalogueDecision]) {
    for d in decisions {
        println!(
            "treatment {}: score {:.3} sd {:.3} acceptance {:.2} {}",
            d.treatment,
            d.score,
            d.dispersion,
            d.acceptance_rate,
            if d.included { "included" } else { "excluded" }
        );
    }
}

fn cmd_run(sim: &SimArgs, out: &Path, threshold: f64) -> Result<(), CliError> {
    let config = sim.load()?;
    info!(
        "running {} replicates of {} stages",
        config.n_replicates, config.n_rounds
    );
    let trace = run_simulation(&config)?;
    let decisions = io::write_run(out, &trace, threshold)?;
    print_catalogue(&decisions);
    Ok(())
}

fn cmd_sweep(sim: &SimArgs, out: &Path, grid: Option<&str>) -> Result<(), CliError> {
    let config = sim.load()?;
    let grid = match grid {
        Some(spec) => parse_grid(spec).map_err(|e| CliError::new(EXIT_INVALID, e))?,
        None => default_grid(&config, DEFAULT_GRID_POINTS),
    };
    let table = sweep_staking_rate(&config, &grid).map_err(|e| match e {
        SweepError::Sim(e) => CliError::from(e),
        e => CliError::new(EXIT_INVALID, e.to_string()),
    })?;
    io::write_sweep(out, &table)?;
    for (r, rho) in table.spearman.iter().enumerate() {
        println!("replicate {r}: spearman {rho:.4}");
    }
    println!("median spearman {:.4}", median(&table.spearman));
    Ok(())
}

fn cmd_catalogue(out: &Path, threshold: f64) -> Result<(), CliError> {
    let decisions = io::catalogue_from_dir(out, threshold)?;
    let path = out.join(io::CATALOGUE_FILE);
    let file = std::fs::File::create(&path).map_err(|e| CliError::new(EXIT_IO, format!("{}: {e}", path.display())))?;
    io::write_catalogue_csv(&decisions, file)
        .map_err(|e| CliError::new(EXIT_IO, format!("{}: {e}", path.display())))?;
    print_catalogue(&decisions);
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::new(EXIT_INVALID, "--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::new(EXIT_INVALID, e.to_string()))?;
    }
    match cli.command {
        Command::Run { sim, out, threshold } => cmd_run(&sim, &out, threshold),
        Command::Sweep { sim, out, grid } => cmd_sweep(&sim, &out, grid.as_deref()),
        Command::Catalogue { out, threshold } => cmd_catalogue(&out, threshold),
        Command::Verify { dir } => {
            io::verify_dir(&dir)?;
            println!("ok");
            Ok(())
        }
        Command::ValidateConfig { sim } => {
            sim.load()?;
            println!("ok");
            Ok(())
        }
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid usage");
            eprintln!("error: {}", first.trim_start_matches("error: "));
            return EXIT_INVALID;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

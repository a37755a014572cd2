use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use spenkf_core::mc::Execution;
use spenkf_lab::config::ExperimentConfig;
use spenkf_lab::{describe, run, Command};

#[derive(Parser, Debug)]
#[command(name = "spenkf-lab", version, about = "Scalar ensemble filter laboratory")]
struct Cli {
    /// Worker threads for the Monte Carlo pool (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Run Monte Carlo blocks on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Sub,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON experiment configuration; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Master seed. Overrides the config and is required by the
    /// Monte Carlo subcommands.
    #[arg(long)]
    seed: Option<u64>,

    /// CSV destination (defaults to `output_path` in the config, then stdout).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Print the output columns and their formulas, then exit.
    #[arg(long)]
    describe: bool,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Exact scalar Kalman filter, recursion against closed form.
    Skf(Common),
    /// One square-root ensemble run against the exact filter.
    Spenkf(Common),
    /// Analytic discrepancy moments against Monte Carlo.
    McVerify(Common),
    /// Inflation factors θ, φ, ψ per step.
    InflationTable(Common),
    /// Extra analysis variance from perturbed observations.
    PoPenalty(Common),
    /// Diagonalizable multivariate filter.
    Mv(Common),
    /// Quick invariant sweep.
    Selftest,
}

impl Sub {
    fn split(&self) -> (Command, Option<&Common>) {
        match self {
            Sub::Skf(c) => (Command::Skf, Some(c)),
            Sub::Spenkf(c) => (Command::Spenkf, Some(c)),
            Sub::McVerify(c) => (Command::McVerify, Some(c)),
            Sub::InflationTable(c) => (Command::InflationTable, Some(c)),
            Sub::PoPenalty(c) => (Command::PoPenalty, Some(c)),
            Sub::Mv(c) => (Command::Mv, Some(c)),
            Sub::Selftest => (Command::Selftest, None),
        }
    }
}

fn execute(cli: &Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        #[cfg(feature = "parallel")]
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
        #[cfg(not(feature = "parallel"))]
        eprintln!("note: built without the `parallel` feature; --threads {n} has no effect");
    }
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    let (cmd, common) = cli.command.split();
    if common.is_some_and(|c| c.describe) {
        print!("{}", describe::render(cmd));
        return Ok(true);
    }
    let mut cfg = match common.and_then(|c| c.config.as_deref()) {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.and_then(|c| c.seed) {
        cfg.seed = Some(seed);
    } else if cmd.needs_seed() {
        bail!("{} draws random numbers; pass --seed", cmd.name());
    }
    let output = run(cmd, &cfg, exec).with_context(|| format!("{} failed", cmd.name()))?;
    if let Some(table) = &output.table {
        match common.and_then(|c| c.out.clone()).or(cfg.output_path.clone()) {
            Some(path) => {
                let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                table.write_csv(std::io::BufWriter::new(file))?;
            }
            None => table.write_csv(std::io::stdout().lock())?,
        }
    }
    // With a table on stdout the checks go to stderr so stdout stays pure CSV.
    let mut sink: Box<dyn Write> = if output.table.is_some() { Box::new(std::io::stderr().lock()) } else { Box::new(std::io::stdout().lock()) };
    for c in &output.checks {
        writeln!(sink, "{}", c.line())?;
    }
    Ok(output.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Corruption, RunConfig};

/// A configuration or usage problem; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(name = "bbgky", version, about = "Cumulant-expansion solvers for hard-sphere hierarchies")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for the CSV results and the run manifest.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    samples: Option<u64>,
    /// Sequence truncation N_max.
    #[arg(long, global = true)]
    nmax: Option<usize>,
    #[arg(long, global = true, value_delimiter = ',')]
    times: Option<Vec<f64>>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone)]
enum Command {
    /// Check the symbolic cluster-expansion identities exactly.
    VerifyAlgebra {
        /// Perturb the coefficient of partitions with BLOCKS blocks by DELTA (negative control).
        #[arg(long, value_name = "BLOCKS:DELTA")]
        corrupt_coefficient: Option<String>,
    },
    /// Evaluate the observable hierarchy solution at the evaluation points.
    EvolveDual,
    /// Evaluate the state hierarchy solution at the evaluation points.
    EvolveState,
    /// Compare both sides of the duality pairing.
    Duality,
    /// Compare the first iteration term with the reduced cumulant term.
    CompareSeries,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::VerifyAlgebra { .. } => "verify-algebra",
            Command::EvolveDual => "evolve-dual",
            Command::EvolveState => "evolve-state",
            Command::Duality => "duality",
            Command::CompareSeries => "compare-series",
        }
    }
}

fn parse_corruption(raw: &str) -> Result<Corruption, UsageError> {
    let bad = || UsageError(format!("--corrupt-coefficient expects BLOCKS:DELTA, got {raw:?}"));
    let (b, d) = raw.split_once(':').ok_or_else(bad)?;
    Ok(Corruption {
        blocks: b.trim().parse().map_err(|_| bad())?,
        delta: d.trim().parse().map_err(|_| bad())?,
    })
}

fn build_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(n) = cli.samples {
        cfg.n_samples = n;
    }
    if let Some(n) = cli.nmax {
        cfg.big_n_max = n;
    }
    if let Some(t) = &cli.times {
        cfg.times = t.clone();
    }
    if let Command::VerifyAlgebra {
        corrupt_coefficient: Some(raw),
    } = &cli.command
    {
        cfg.corrupt_coefficient = Some(parse_corruption(raw)?);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    let threads = bbgky_core::rng::init_thread_pool_from_env().map_err(UsageError)?;
    let cfg = build_config(cli)?;
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    let start = std::time::Instant::now();
    let outcome = match &cli.command {
        Command::VerifyAlgebra { .. } => commands::verify_algebra(&cfg)?,
        Command::EvolveDual => commands::evolve_dual(&cfg)?,
        Command::EvolveState => commands::evolve_state(&cfg)?,
        Command::Duality => commands::duality(&cfg)?,
        Command::CompareSeries => commands::compare_series(&cfg)?,
    };
    let elapsed = start.elapsed().as_secs_f64();
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(dir) = &cli.out {
        output::write_outputs(dir, cli.command.name(), &cfg, &outcome, elapsed, threads)?;
    } else if !outcome.rows.is_empty() {
        bbgky_core::solver::write_rows(std::io::stdout().lock(), &outcome.rows)?;
    }
    eprintln!(
        "{}: {} in {elapsed:.2} s",
        cli.command.name(),
        if outcome.passed { "pass" } else { "FAIL" }
    );
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

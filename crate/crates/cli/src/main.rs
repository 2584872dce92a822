use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dipcoal_cli::commands::{self, RunError};
use dipcoal_cli::config::{ConfigError, ExperimentConfig, MeasureSpec};
use dipcoal_cli::output::Outcome;
use dipcoal_cli::recipes::{self, RecipeContext};

/// Diploid population genealogies and their coalescent limits.
#[derive(Debug, Parser)]
#[command(name = "dipcoal", version)]
struct Cli {
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Replicate count; overrides the config and recipe defaults.
    #[arg(long, global = true)]
    reps: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads.
    #[arg(long, global = true, env = "DIPCOAL_THREADS")]
    threads: Option<usize>,
    /// Test level.
    #[arg(long, global = true)]
    level: Option<f64>,
    /// Xi measure in inline syntax; overrides the config.
    #[arg(long, global = true)]
    measure: Option<String>,
    /// Sample size; overrides the config.
    #[arg(long, short = 'n', global = true)]
    n: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rate table of a measure.
    Rates {
        /// Add quadrature values and relative errors.
        #[arg(long)]
        quadrature: bool,
    },
    /// Genealogies of the Xi-coalescent.
    SimulateCoalescent,
    /// Discrete genealogies of a population model.
    SimulateForward,
    /// Monte Carlo pair coalescence probability.
    EstimateCn,
    /// Transition matrix and its Mohle decomposition.
    Mohle,
    /// Rescaled discrete genealogies against the Xi-coalescent.
    Compare,
    /// Named experiment.
    Recipe {
        /// Recipe name; omit with --list.
        name: Option<String>,
        #[arg(long)]
        list: bool,
    },
}

fn load(cli: &Cli) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.reps.is_some() {
        cfg.replicates = cli.reps;
    }
    if cli.level.is_some() {
        cfg.level = cli.level;
    }
    if let Some(m) = &cli.measure {
        cfg.measure = Some(MeasureSpec::Inline(m.clone()));
    }
    if cli.n.is_some() {
        cfg.n = cli.n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli, cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    match &cli.command {
        Command::Rates { quadrature } => commands::rates(cfg, *quadrature),
        Command::SimulateCoalescent => commands::simulate_coalescent(cfg),
        Command::SimulateForward => commands::simulate_forward(cfg),
        Command::EstimateCn => commands::estimate_cn_table(cfg),
        Command::Mohle => commands::mohle(cfg),
        Command::Compare => commands::compare(cfg),
        Command::Recipe { name, .. } => {
            let name = name.as_deref().ok_or_else(|| ConfigError::new("recipe", "missing name"))?;
            let f = recipes::find(name)
                .ok_or_else(|| ConfigError::new("recipe", format!("unknown recipe `{name}`; known: {}", recipes::names().join(", "))))?;
            let ctx = RecipeContext {
                seed: cfg.require_seed()?,
                reps: cfg.replicates,
                level: cfg.level.unwrap_or(commands::DEFAULT_LEVEL),
            };
            f(&ctx)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::Recipe { list: true, .. } = cli.command {
        for n in recipes::names() {
            println!("{n}");
        }
        return ExitCode::SUCCESS;
    }
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let seed = match cfg.require_seed() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        pool = pool.num_threads(t);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("config error: threads: {e}");
            return ExitCode::from(2);
        }
    };
    let outcome = match pool.install(|| run(&cli, &cfg)) {
        Ok(o) => o,
        Err(RunError::Config(e)) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
        Err(RunError::Failed(e)) => {
            eprintln!("error (seed {seed}): {e:#}");
            return ExitCode::from(1);
        }
    };
    match outcome.write(&cli.out, seed) {
        Ok(paths) => {
            for p in paths {
                eprintln!("wrote {}", p.display());
            }
        }
        Err(e) => {
            eprintln!("error: writing {}: {e}", cli.out.display());
            return ExitCode::from(1);
        }
    }
    for v in &outcome.verdicts {
        println!("{} {} statistic={} threshold={}", if v.pass { "PASS" } else { "FAIL" }, v.test, v.statistic, v.threshold);
    }
    if outcome.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

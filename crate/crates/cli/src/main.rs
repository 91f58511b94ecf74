//! Command-line front end for the experiment harness.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cornergap::harness::{
    run_experiment, ChainConfig, ExperimentConfig, ExperimentKind, ExperimentOutput, Grid, TensionConfig,
};
use cornergap::spectral::StartState;
use cornergap::RateFamily;

#[derive(Parser)]
#[command(name = "cornergap", version, about = "Corner-strip Glauber gaps, bounds and surface tension")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact spectral gaps by enumeration.
    ExactGap(BoxArgs),
    /// Exact gap next to the indicator bound of the crossing event D.
    Bound(BoxArgs),
    /// Swendsen–Wang estimates of registry events and the sampled bound.
    Sw(SampleArgs),
    /// Directional surface tensions from dual connectivities.
    Tension(TensionArgs),
    /// Sampled μ(D) against k next to the tension-predicted crossover.
    Crossover(CrossoverArgs),
    /// Run a TOML experiment file.
    Scan {
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    HeatBath,
    Metropolis,
}

impl From<Family> for RateFamily {
    fn from(f: Family) -> Self {
        match f {
            Family::HeatBath => RateFamily::HeatBath,
            Family::Metropolis => RateFamily::Metropolis,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Start {
    Plus,
    Minus,
    Boundary,
}

impl From<Start> for StartState {
    fn from(s: Start) -> Self {
        match s {
            Start::Plus => StartState::Plus,
            Start::Minus => StartState::Minus,
            Start::Boundary => StartState::Boundary,
        }
    }
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, required = true)]
    seed: u64,
    /// Inverse temperatures.
    #[arg(long, value_delimiter = ',', required_unless_present = "beta_over_beta_c")]
    beta: Option<Vec<f64>>,
    /// Inverse temperatures in units of β_c.
    #[arg(long, value_delimiter = ',', conflicts_with = "beta")]
    beta_over_beta_c: Option<Vec<f64>>,
    /// Directory for results.csv and results.json; CSV goes to stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct BoxGrid {
    #[arg(long = "n", value_delimiter = ',', required = true)]
    n: Vec<i64>,
    #[arg(long, value_delimiter = ',', required = true)]
    k: Vec<i64>,
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    eps: Vec<i8>,
    #[arg(long, value_enum, default_value = "heat-bath")]
    family: Family,
    /// Rate bound used in the indicator bound.
    #[arg(long)]
    c0: Option<f64>,
}

#[derive(Args, Clone)]
struct Chain {
    #[arg(long, required = true)]
    sweeps: u64,
    #[arg(long, required = true)]
    burn_in: u64,
    #[arg(long, default_value_t = 1)]
    thin: u64,
    #[arg(long, default_value_t = 20)]
    batches: usize,
    /// Initial spin configuration of each chain.
    #[arg(long, value_enum, default_value = "plus")]
    start: Start,
}

#[derive(Args, Clone)]
struct Ladders {
    /// Half-width of the wired box.
    #[arg(long, required = true)]
    m: i64,
    #[arg(long, value_delimiter = ',', default_value = "4,8,12,16")]
    ladder_e1: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "2,4,6,8")]
    ladder_diag: Vec<u32>,
}

#[derive(Args)]
struct BoxArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    grid: BoxGrid,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    grid: BoxGrid,
    #[command(flatten)]
    chain: Chain,
    /// Registry events to sample.
    #[arg(long, value_delimiter = ',')]
    events: Option<Vec<String>>,
}

#[derive(Args)]
struct TensionArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    chain: Chain,
    #[command(flatten)]
    ladders: Ladders,
}

#[derive(Args)]
struct CrossoverArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    grid: BoxGrid,
    #[command(flatten)]
    chain: Chain,
    #[command(flatten)]
    ladders: Ladders,
}

fn config(
    kind: ExperimentKind,
    common: &Common,
    grid: Option<&BoxGrid>,
    chain: Option<&Chain>,
    ladders: Option<&Ladders>,
    events: Option<Vec<String>>,
) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig {
        kind,
        seed: common.seed,
        output: common.output.clone(),
        grid: Grid {
            n: grid.map(|g| g.n.clone()),
            k: grid.map(|g| g.k.clone()),
            eps: grid.map(|g| g.eps.clone()),
            beta: common.beta.clone(),
            beta_over_beta_c: common.beta_over_beta_c.clone(),
        },
        family: grid.map_or(RateFamily::HeatBath, |g| g.family.into()),
        chain: chain.map(|c| ChainConfig {
            sweeps: c.sweeps,
            burn_in: c.burn_in,
            thin: c.thin,
            batches: c.batches,
            start: c.start.into(),
        }),
        tension: ladders.map(|l| TensionConfig {
            m: l.m,
            ladder_e1: l.ladder_e1.clone(),
            ladder_diag: l.ladder_diag.clone(),
        }),
        events,
        c0: grid.and_then(|g| g.c0),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn emit(out: &ExperimentOutput, dir: Option<&PathBuf>) -> Result<()> {
    match dir {
        Some(d) => {
            for p in out.write_to_dir(d)? {
                eprintln!("wrote {}", p.display());
            }
        }
        None => out.write_csv(std::io::stdout().lock())?,
    }
    for s in &out.summaries {
        eprintln!("{s}");
    }
    eprintln!(
        "{} rows, {} skipped, {} errors",
        out.rows.len(),
        out.n_skipped(),
        out.n_errors()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = match &cli.command {
        Command::ExactGap(a) => config(ExperimentKind::ExactGapScan, &a.common, Some(&a.grid), None, None, None)?,
        Command::Bound(a) => config(ExperimentKind::BoundScan, &a.common, Some(&a.grid), None, None, None)?,
        Command::Sw(a) => config(
            ExperimentKind::SwSample,
            &a.common,
            Some(&a.grid),
            Some(&a.chain),
            None,
            a.events.clone(),
        )?,
        Command::Tension(a) => config(ExperimentKind::Tension, &a.common, None, Some(&a.chain), Some(&a.ladders), None)?,
        Command::Crossover(a) => config(
            ExperimentKind::CrossoverDemo,
            &a.common,
            Some(&a.grid),
            Some(&a.chain),
            Some(&a.ladders),
            None,
        )?,
        Command::Scan { config, output } => {
            let mut cfg = ExperimentConfig::from_path(config)
                .with_context(|| format!("reading {}", config.display()))?;
            if output.is_some() {
                cfg.output = output.clone();
            }
            cfg
        }
    };
    let out = run_experiment(&cfg)?;
    emit(&out, cfg.output.as_ref())?;
    Ok(out.n_errors() == 0)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

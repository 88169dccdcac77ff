use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use slimfair_core::allocator::{self, WidthProfile, DEFAULT_EPSILON};
use slimfair_core::pipeline::{self, spaced_widths};
use slimfair_core::{Error, ExperimentConfig};

#[derive(Parser)]
#[command(name = "slimfair", version, about = "Federated slimmable-network training with contribution-fair rewards")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its run directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config and list every problem found.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Allocate rewards from a contribution table and an accuracy menu.
    Allocate {
        /// CSV with a `contribution` column (one row per client).
        #[arg(long)]
        contributions: PathBuf,
        /// CSV with an `accuracy` column and an optional `width` column.
        #[arg(long)]
        menu: PathBuf,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the allocation table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Infeasible(_)) => EXIT_INFEASIBLE,
        Some(Error::Config(_) | Error::Partition(_) | Error::WidthRange { .. }) => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

fn load(path: &Path) -> anyhow::Result<ExperimentConfig> {
    ExperimentConfig::load(path).with_context(|| format!("reading config {}", path.display()))
}

fn run(config: &Path, seed: Option<u64>, out: Option<PathBuf>) -> anyhow::Result<()> {
    let mut cfg = load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.out_dir = o;
    }
    let summary = pipeline::run(&cfg, &cfg.out_dir)?;
    println!("wrote {}", cfg.out_dir.display());
    if let Some(r) = summary.report {
        let rho = r.metrics.pearson.map_or("undefined".to_string(), |p| format!("{p:.4}"));
        println!(
            "pearson {rho}  mcg {:.4}  cgs {:.4}  ir_rate {:.2}",
            r.metrics.mcg, r.metrics.cgs, r.metrics.ir_rate
        );
        if let Some(w) = r.feasibility_warning {
            println!("warning: {w}");
        }
    }
    Ok(())
}

fn validate(config: &Path) -> anyhow::Result<bool> {
    let diagnostics = load(config)?.validate();
    for d in &diagnostics {
        println!("{d}");
    }
    if diagnostics.is_empty() {
        println!("ok");
    }
    Ok(diagnostics.is_empty())
}

/// Reads the named numeric column of a headed CSV file.
fn column(path: &Path, name: &str) -> anyhow::Result<Option<Vec<f64>>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let Some(at) = rdr.headers()?.iter().position(|h| h.trim() == name) else {
        return Ok(None);
    };
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = rec.get(at).unwrap_or("").trim();
        let v: f64 = field
            .parse()
            .with_context(|| format!("{}: row {}: `{field}` is not a number", path.display(), line + 1))?;
        out.push(v);
    }
    Ok(Some(out))
}

fn allocate(
    contributions: &Path,
    menu: &Path,
    epsilon: f64,
    seed: u64,
    out: Option<PathBuf>,
) -> anyhow::Result<()> {
    let Some(c) = column(contributions, "contribution")? else {
        bail!(Error::Config(format!("{} has no `contribution` column", contributions.display())));
    };
    let Some(acc) = column(menu, "accuracy")? else {
        bail!(Error::Config(format!("{} has no `accuracy` column", menu.display())));
    };
    let widths = column(menu, "width")?.unwrap_or_else(|| spaced_widths(0.25, acc.len()));
    let mut pairs: Vec<(f64, f64)> = widths.into_iter().zip(acc).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let profile = WidthProfile::new(pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect())?;
    let outcome = allocator::allocate(&c, &profile, epsilon, seed)?;
    if let Some(w) = &outcome.warning {
        eprintln!("warning: {w}");
    }
    match out {
        Some(path) => allocator::write_csv(&outcome.rows, std::fs::File::create(path)?)?,
        None => allocator::write_csv(&outcome.rows, io::stdout().lock())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, out } => run(&config, seed, out),
        Command::Validate { config } => match validate(&config) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(EXIT_CONFIG),
            Err(e) => Err(e),
        },
        Command::Allocate { contributions, menu, epsilon, seed, out } => {
            allocate(&contributions, &menu, epsilon, seed, out)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

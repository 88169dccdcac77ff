//! End-to-end runs: data, federated training, contribution, allocation and
//! the run directory.
//!
//! Every random choice draws from a stream derived from the master seed and a
//! fixed path (see [`crate::seed`]), e.g. client `i`'s training stream is
//! `[CLIENT, i]`. Adding a client therefore leaves the other streams alone.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocator::{self, AllocationRow, WidthProfile};
use crate::config::{ContributionConfig, DataSource, ExperimentConfig, RunMode};
use crate::contribution::{participation_rates, standalone_accuracy, ContributionMethod};
use crate::error::{Error, Result};
use crate::fedcore::{self, ClientState, EngineConfig, RewardLoop, RoundRecord};
use crate::metrics::MetricReport;
use crate::partition::{self, idx, make_synthetic_with, Dataset};
use crate::seed::{self, stream};
use crate::slimnet::SlimmableModel;

pub const CONFIG_FILE: &str = "config.toml";
pub const ROUNDS_FILE: &str = "rounds.jsonl";
pub const ALLOCATION_FILE: &str = "allocation.csv";
pub const METRICS_FILE: &str = "metrics.json";

/// Train/test split plus one training shard per client.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Dataset,
    pub test: Dataset,
    pub shards: Vec<Dataset>,
}

pub fn prepare_data(cfg: &ExperimentConfig) -> Result<Prepared> {
    let s = cfg.seed;
    let full = match &cfg.data {
        DataSource::Synthetic { .. } => {
            make_synthetic_with(&cfg.synthetic_spec().expect("synthetic source"), seed::derive(s, &[stream::DATA]))?
        }
        DataSource::Idx { images, labels, limit } => idx::load(images, labels, *limit)?,
    };
    let (train, test) = full.train_test_split(cfg.test_fraction, &mut seed::rng(s, &[stream::DATA, 1]))?;
    let split = partition::split(&train, &cfg.partition_spec(), &mut seed::rng(s, &[stream::PARTITION]))?;
    let mut shards: Vec<Dataset> = split.iter().map(|sh| train.subset(&sh.indices)).collect();
    for &i in &cfg.noisy_clients {
        let shard = shards.get_mut(i).ok_or_else(|| Error::Config(format!("noisy client {i} does not exist")))?;
        partition::scramble_labels(shard, &mut seed::rng(s, &[stream::NOISE, i as u64]));
    }
    Ok(Prepared { train, test, shards })
}

/// Metrics file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: RunMode,
    pub seed: u64,
    #[serde(flatten)]
    pub metrics: MetricReport,
    pub contributions: Vec<f64>,
    pub accuracies: Vec<f64>,
    pub widths: Vec<f64>,
    pub profile: Option<WidthProfile>,
    pub feasibility_warning: Option<String>,
}

/// Everything a run produces, in memory.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub records: Vec<RoundRecord>,
    pub rows: Vec<AllocationRow>,
    pub report: Option<RunReport>,
}

fn engine(cfg: &ExperimentConfig) -> Result<EngineConfig> {
    Ok(EngineConfig {
        rounds: cfg.rounds,
        local_iterations: cfg.local_iterations,
        train: cfg.train_params(),
        lr: cfg.lr_schedule()?,
        seed: cfg.seed,
        participation: None,
    })
}

fn clients(cfg: &ExperimentConfig, shards: &[Dataset]) -> Vec<ClientState> {
    shards
        .iter()
        .enumerate()
        .map(|(i, d)| ClientState::new(i, d.clone(), seed::rng(cfg.seed, &[stream::CLIENT, i as u64])))
        .collect()
}

fn initial_model(cfg: &ExperimentConfig, data: &Prepared) -> Result<SlimmableModel> {
    let spec = cfg.model_spec(data.train.dim(), data.train.classes);
    SlimmableModel::init(&spec, cfg.grid()?, &mut seed::rng(cfg.seed, &[stream::MODEL_INIT]))
}

/// Standalone accuracy of every client, one independent stream each.
pub fn standalone_accuracies(cfg: &ExperimentConfig, data: &Prepared) -> Result<Vec<f64>> {
    let spec = cfg.model_spec(data.train.dim(), data.train.classes);
    let grid = cfg.grid()?;
    let train = cfg.train_params();
    data.shards
        .par_iter()
        .enumerate()
        .map(|(i, shard)| {
            let mut rng = seed::rng(cfg.seed, &[stream::STANDALONE, i as u64]);
            standalone_accuracy(shard, &data.test, &spec, &grid, cfg.standalone_epochs, &train, &mut rng)
        })
        .collect()
}

fn profile_of(record: &RoundRecord) -> Result<WidthProfile> {
    WidthProfile::new(
        record.bucket_accuracy.iter().map(|b| b.width).collect(),
        record.bucket_accuracy.iter().map(|b| b.accuracy).collect(),
    )
}

fn report(cfg: &ExperimentConfig, rows: &[AllocationRow], profile: Option<WidthProfile>, warning: Option<String>) -> Result<RunReport> {
    let contributions: Vec<f64> = rows.iter().map(|r| r.contribution).collect();
    let accuracies: Vec<f64> = rows.iter().map(|r| r.accuracy).collect();
    Ok(RunReport {
        mode: cfg.mode,
        seed: cfg.seed,
        metrics: MetricReport::new(&accuracies, &contributions)?,
        contributions,
        accuracies,
        widths: rows.iter().map(|r| r.width).collect(),
        profile,
        feasibility_warning: warning,
    })
}

fn post_training(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let data = prepare_data(cfg)?;
    let method = cfg.contribution_method();
    let mut engine = engine(cfg)?;
    let contributions = match method {
        ContributionConfig::Participation => {
            let rates = participation_rates(cfg.clients);
            engine.participation = Some(rates.clone());
            rates
        }
        _ => standalone_accuracies(cfg, &data)?,
    };
    let out = fedcore::run_sampled_widths(&mut clients(cfg, &data.shards), initial_model(cfg, &data)?, &data.test, &engine)?;
    let last = out.records.last().expect("at least one round");
    let profile = profile_of(last)?;
    let anneal_seed = seed::derive(cfg.seed, &[stream::ANNEAL]);
    let (rows, warning) = match method {
        ContributionConfig::Participation => {
            // rates are not accuracies, so the reward is the width itself
            let widths = allocator::width_as_reward(&contributions, &profile.widths, cfg.epsilon, anneal_seed)?;
            let rows = contributions
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (&c, &w))| {
                    let accuracy = last.accuracy_at(w).unwrap_or(f64::NAN);
                    AllocationRow { client_id: i, contribution: c, accuracy, width: w, gain: accuracy - c }
                })
                .collect();
            (rows, None)
        }
        _ => {
            let outcome = allocator::allocate(&contributions, &profile, cfg.epsilon, anneal_seed)?;
            (outcome.rows, outcome.warning)
        }
    };
    let report = report(cfg, &rows, Some(profile), warning)?;
    Ok(RunSummary { records: out.records, rows, report: Some(report) })
}

fn training_time(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let data = prepare_data(cfg)?;
    let assess = match cfg.contribution_method() {
        ContributionConfig::ShapfedLite { m } => ContributionMethod::ShapfedLite { m },
        ContributionConfig::Cgsv => ContributionMethod::Cgsv,
        other => return Err(Error::Config(format!("{other:?} is not a training-time contribution method"))),
    };
    let mut cs = clients(cfg, &data.shards);
    let out = fedcore::run_with_rewards(
        &mut cs,
        initial_model(cfg, &data)?,
        &data.test,
        &engine(cfg)?,
        &RewardLoop { gamma: cfg.gamma, assess: &assess },
    )?;
    let last = out.records.last().expect("at least one round");
    let rows: Vec<AllocationRow> = cs
        .iter()
        .map(|c| {
            let accuracy = last.accuracy_at(c.max_width).unwrap_or(f64::NAN);
            AllocationRow {
                client_id: c.id,
                contribution: c.contribution,
                accuracy,
                width: c.max_width,
                gain: accuracy - c.contribution,
            }
        })
        .collect();
    let report = report(cfg, &rows, Some(profile_of(last)?), None)?;
    Ok(RunSummary { records: out.records, rows, report: Some(report) })
}

fn allocate_only(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let input = cfg.allocate.as_ref().ok_or_else(|| Error::Config("allocate_only mode needs an [allocate] table".into()))?;
    let widths = match &input.widths {
        Some(w) => w.clone(),
        None => spaced_widths(cfg.p_min, input.menu.len()),
    };
    let mut pairs: Vec<(f64, f64)> = widths.into_iter().zip(input.menu.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let profile = WidthProfile::new(pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect())?;
    let outcome =
        allocator::allocate(&input.contributions, &profile, cfg.epsilon, seed::derive(cfg.seed, &[stream::ANNEAL]))?;
    Ok(RunSummary { records: Vec::new(), rows: outcome.rows, report: None })
}

/// `n` evenly spaced widths from `p_min` to 1, ascending.
pub fn spaced_widths(p_min: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => (0..n).map(|k| p_min + (1.0 - p_min) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Runs the configured experiment without touching the filesystem.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let diagnostics = cfg.validate();
    if !diagnostics.is_empty() {
        return Err(Error::Config(diagnostics.join("; ")));
    }
    match cfg.mode {
        RunMode::PostTraining => post_training(cfg),
        RunMode::TrainingTime => training_time(cfg),
        RunMode::AllocateOnly => allocate_only(cfg),
    }
}

/// Runs the experiment and writes its run directory.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunSummary> {
    let summary = execute(cfg)?;
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join(CONFIG_FILE), cfg.to_toml()?)?;
    if cfg.mode != RunMode::AllocateOnly {
        fedcore::write_jsonl(&summary.records, BufWriter::new(File::create(out_dir.join(ROUNDS_FILE))?))?;
    }
    allocator::write_csv(&summary.rows, BufWriter::new(File::create(out_dir.join(ALLOCATION_FILE))?))?;
    if let Some(report) = &summary.report {
        let mut f = BufWriter::new(File::create(out_dir.join(METRICS_FILE))?);
        serde_json::to_writer_pretty(&mut f, report)?;
        f.write_all(b"\n")?;
        f.flush()?;
    }
    Ok(summary)
}

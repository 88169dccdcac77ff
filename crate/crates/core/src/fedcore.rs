//! Federated round engine.
//!
//! Two modes share the same machinery:
//!
//! * post-training rewards: every client trains the full model, sampling a
//!   second width per local iteration, and the server takes the plain mean;
//! * training-time rewards: each client only receives (and trains) the
//!   prefix subnetwork of its current maximum width, the server scores
//!   client updates on the smallest common subnetwork, folds the scores into
//!   momentum contributions, maps them to new widths and merges updates with
//!   masked averaging.
//!
//! Client work within a round is independent and runs in parallel; results
//! are combined in client-id order so runs are reproducible.

use std::io::Write;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contribution::{reward_widths, Assess, ContributionVector};
use crate::error::{Error, Result};
use crate::metrics::balanced_accuracy;
use crate::partition::Dataset;
use crate::seed::{self, Rng};
use crate::slimnet::{Sgd, SlimmableModel, SwitchableNorm};
use crate::train::{sample_batch, LrSchedule, TrainParams};

/// A participant: its local shard, current contribution and width cap.
#[derive(Debug, Clone)]
pub struct ClientState {
    pub id: usize,
    pub data: Dataset,
    pub contribution: f64,
    pub max_width: f64,
    pub rng: Rng,
}

impl ClientState {
    pub fn new(id: usize, data: Dataset, rng: Rng) -> Self {
        Self { id, data, contribution: 0.0, max_width: 1.0, rng }
    }
}

/// Outcome of one client's local training.
#[derive(Debug, Clone)]
pub struct LocalUpdate {
    pub model: SlimmableModel,
    /// The sampled (second) width of every local iteration.
    pub sampled_widths: Vec<f64>,
    pub last_loss: f64,
}

/// Runs `iterations` local iterations starting from `snapshot`. Each iteration
/// draws one minibatch and a width `p ~ U[p_min, max_width]`, then takes an
/// SGD step at `max_width` followed by one at `p` on the same batch.
pub fn local_train(
    client: &mut ClientState,
    snapshot: &SlimmableModel,
    iterations: usize,
    train: &TrainParams,
) -> Result<LocalUpdate> {
    if client.data.is_empty() {
        return Err(Error::Config(format!("client {} has an empty shard", client.id)));
    }
    let grid = snapshot.grid();
    grid.check(client.max_width)?;
    let cap = client.max_width.min(grid.p_max());
    let p_min = grid.p_min().min(cap);
    let mut model = snapshot.clone();
    let mut opt = Sgd::new(model.num_params(), train.lr, train.momentum)?;
    let mut sampled_widths = Vec::with_capacity(iterations);
    let mut last_loss = f64::NAN;
    for _ in 0..iterations {
        let idx = sample_batch(client.data.len(), train.batch_size, &mut client.rng);
        let p = client.rng.random_range(p_min..=cap);
        sampled_widths.push(p);
        let batch = client.data.subset(&idx);
        let (g, loss) = model.backward(&batch.features, &batch.labels, cap)?;
        opt.step(&mut model, &g)?;
        let (g, _) = model.backward(&batch.features, &batch.labels, p)?;
        opt.step(&mut model, &g)?;
        last_loss = loss;
    }
    Ok(LocalUpdate { model, sampled_widths, last_loss })
}

/// Post-training-mode local training: the client holds the full model.
pub fn local_train_uncapped(
    client: &mut ClientState,
    snapshot: &SlimmableModel,
    iterations: usize,
    train: &TrainParams,
) -> Result<LocalUpdate> {
    client.max_width = snapshot.grid().p_max();
    local_train(client, snapshot, iterations, train)
}

/// Recursive pairwise sum; stable and independent of how the caller batches work.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        2 => v[0] + v[1],
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

/// Coordinate-wise mean of full parameter vectors.
pub fn aggregate_mean(updates: &[&[f64]]) -> Result<Vec<f64>> {
    let Some(first) = updates.first() else {
        return Err(Error::Argument("no updates to aggregate".into()));
    };
    let dim = first.len();
    if updates.iter().any(|u| u.len() != dim) {
        return Err(Error::Shape("updates differ in length".into()));
    }
    let n = updates.len() as f64;
    let mut column = Vec::with_capacity(updates.len());
    Ok((0..dim)
        .map(|j| {
            column.clear();
            column.extend(updates.iter().map(|u| u[j]));
            pairwise_sum(&column) / n
        })
        .collect())
}

/// Per-coordinate mean over the clients whose width covers the coordinate;
/// uncovered coordinates keep their value in `previous`.
pub fn masked_average(previous: &SlimmableModel, updates: &[(&[f64], f64)]) -> Result<Vec<f64>> {
    let dim = previous.num_params();
    let mut masks = Vec::with_capacity(updates.len());
    for (params, width) in updates {
        if params.len() != dim {
            return Err(Error::Shape(format!("update has {} parameters, model has {dim}", params.len())));
        }
        masks.push(previous.slice_view(*width)?.mask(dim));
    }
    let mut column = Vec::with_capacity(updates.len());
    Ok((0..dim)
        .map(|j| {
            column.clear();
            column.extend(updates.iter().zip(&masks).filter(|(_, m)| m[j]).map(|((u, _), _)| u[j]));
            if column.is_empty() {
                previous.params()[j]
            } else {
                pairwise_sum(&column) / column.len() as f64
            }
        })
        .collect())
}

/// Averages normalization statistics. Bucket `b` of the result is the mean
/// over clients whose width reaches that bucket, or the previous value if none do.
fn merge_norms(previous: &SlimmableModel, updates: &[(&SlimmableModel, f64)]) -> Vec<Option<SwitchableNorm>> {
    let buckets = previous.grid().buckets().to_vec();
    previous
        .norms()
        .iter()
        .enumerate()
        .map(|(l, norm)| {
            let mut merged = norm.clone()?;
            for (b, &bw) in buckets.iter().enumerate() {
                let covering: Vec<&SwitchableNorm> = updates
                    .iter()
                    .filter(|(_, w)| *w >= bw - 1e-9)
                    .filter_map(|(m, _)| m.norms()[l].as_ref())
                    .collect();
                if covering.is_empty() {
                    continue;
                }
                let k = covering.len() as f64;
                let mut col = Vec::with_capacity(covering.len());
                for u in 0..merged.mean[b].len() {
                    col.clear();
                    col.extend(covering.iter().map(|s| s.mean[b][u]));
                    merged.mean[b][u] = pairwise_sum(&col) / k;
                    col.clear();
                    col.extend(covering.iter().map(|s| s.var[b][u]));
                    merged.var[b][u] = pairwise_sum(&col) / k;
                }
            }
            Some(merged)
        })
        .collect()
}

fn merge(previous: &SlimmableModel, updates: &[(&SlimmableModel, f64)], masked: bool) -> Result<SlimmableModel> {
    let params = if masked {
        let pairs: Vec<(&[f64], f64)> = updates.iter().map(|(m, w)| (m.params(), *w)).collect();
        masked_average(previous, &pairs)?
    } else {
        let all: Vec<&[f64]> = updates.iter().map(|(m, _)| m.params()).collect();
        aggregate_mean(&all)?
    };
    let mut next = previous.clone();
    next.set_params(&params)?;
    let norms = merge_norms(previous, updates);
    next.norms_mut().clone_from_slice(&norms);
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketAccuracy {
    pub width: f64,
    pub accuracy: f64,
}

/// Per-round metrics, one JSON line each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Full-width eval-mode cross-entropy on the test split.
    pub global_loss: f64,
    pub bucket_accuracy: Vec<BucketAccuracy>,
    pub contributions: Vec<f64>,
    pub widths: Vec<f64>,
    pub participants: Vec<usize>,
    pub seed: u64,
}

impl RoundRecord {
    pub fn accuracy_at(&self, width: f64) -> Option<f64> {
        self.bucket_accuracy.iter().find(|b| (b.width - width).abs() < 1e-9).map(|b| b.accuracy)
    }
}

pub fn write_jsonl<W: Write>(records: &[RoundRecord], mut out: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Full-width test loss and balanced accuracy at every width bucket.
pub fn evaluate(model: &SlimmableModel, test: &Dataset) -> Result<(f64, Vec<BucketAccuracy>)> {
    let loss = model.eval_loss(&test.features, &test.labels, 1.0)?;
    let acc = model
        .grid()
        .buckets()
        .iter()
        .map(|&w| {
            let preds = model.predict(&test.features, w)?;
            Ok(BucketAccuracy { width: w, accuracy: balanced_accuracy(&preds, &test.labels, test.classes)? })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((loss, acc))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub rounds: usize,
    pub local_iterations: usize,
    pub train: TrainParams,
    pub lr: LrSchedule,
    pub seed: u64,
    /// Per-client probability of joining a round (post-training mode only).
    pub participation: Option<Vec<f64>>,
}

impl EngineConfig {
    pub fn new(rounds: usize, local_iterations: usize, train: TrainParams, seed: u64) -> Self {
        Self { rounds, local_iterations, lr: LrSchedule::constant(train.lr), train, seed, participation: None }
    }

    fn params_at(&self, round: usize) -> TrainParams {
        self.train.with_lr(self.lr.at(round))
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub model: SlimmableModel,
    pub records: Vec<RoundRecord>,
}

fn train_clients(
    clients: &mut [ClientState],
    selected: &[usize],
    snapshot: &SlimmableModel,
    iterations: usize,
    params: &TrainParams,
) -> Result<Vec<LocalUpdate>> {
    let mut chosen: Vec<&mut ClientState> = clients.iter_mut().filter(|c| selected.contains(&c.id)).collect();
    chosen.par_iter_mut().map(|c| local_train(c, snapshot, iterations, params)).collect()
}

/// Post-training-reward training: full model broadcast, dual-width local
/// updates, plain averaging.
pub fn run_sampled_widths(
    clients: &mut [ClientState],
    model: SlimmableModel,
    test: &Dataset,
    cfg: &EngineConfig,
) -> Result<RunOutput> {
    if cfg.rounds == 0 {
        return Err(Error::Config("at least one round is required".into()));
    }
    if let Some(rates) = &cfg.participation {
        if rates.len() != clients.len() {
            return Err(Error::Config("one participation rate per client required".into()));
        }
    }
    let mut model = model;
    let mut records = Vec::with_capacity(cfg.rounds);
    for t in 0..cfg.rounds {
        let participants: Vec<usize> = match &cfg.participation {
            None => clients.iter().map(|c| c.id).collect(),
            Some(rates) => {
                let mut rng = seed::rng(cfg.seed, &[seed::stream::PARTICIPATION, t as u64]);
                clients.iter().zip(rates).filter(|(_, &r)| rng.random::<f64>() < r).map(|(c, _)| c.id).collect()
            }
        };
        for c in clients.iter_mut() {
            c.max_width = 1.0;
        }
        if !participants.is_empty() {
            let updates = train_clients(clients, &participants, &model, cfg.local_iterations, &cfg.params_at(t))?;
            let pairs: Vec<(&SlimmableModel, f64)> = updates.iter().map(|u| (&u.model, 1.0)).collect();
            model = merge(&model, &pairs, false)?;
        }
        let (global_loss, bucket_accuracy) = evaluate(&model, test)?;
        records.push(RoundRecord {
            round: t,
            global_loss,
            bucket_accuracy,
            contributions: clients.iter().map(|c| c.contribution).collect(),
            widths: clients.iter().map(|c| c.max_width).collect(),
            participants,
            seed: cfg.seed,
        });
    }
    Ok(RunOutput { model, records })
}

/// Training-time-reward settings.
pub struct RewardLoop<'a> {
    /// Contribution momentum.
    pub gamma: f64,
    pub assess: &'a dyn Assess,
}

/// Training-time-reward training: width-capped broadcasts, contribution
/// assessment on the smallest subnetwork, momentum update, width map,
/// masked averaging.
pub fn run_with_rewards(
    clients: &mut [ClientState],
    model: SlimmableModel,
    test: &Dataset,
    cfg: &EngineConfig,
    rewards: &RewardLoop<'_>,
) -> Result<RunOutput> {
    if cfg.rounds == 0 {
        return Err(Error::Config("at least one round is required".into()));
    }
    let grid = model.grid().clone();
    let view = model.slice_view(grid.p_min())?;
    let ids: Vec<usize> = clients.iter().map(|c| c.id).collect();
    let mut contributions = ContributionVector::new(clients.len(), rewards.gamma)?;
    for c in clients.iter_mut() {
        c.max_width = grid.p_max();
    }
    let mut model = model;
    let mut records = Vec::with_capacity(cfg.rounds);
    for t in 0..cfg.rounds {
        let widths: Vec<f64> = clients.iter().map(|c| c.max_width).collect();
        let updates = train_clients(clients, &ids, &model, cfg.local_iterations, &cfg.params_at(t))?;

        let deltas: Vec<Vec<f64>> = updates
            .iter()
            .map(|u| model.params().iter().zip(u.model.params()).map(|(b, a)| b - a).collect())
            .collect();
        let fresh = rewards.assess.assess(&deltas, &view)?;
        contributions.update(&fresh, t)?;
        match reward_widths(&contributions.scores, grid.p_min(), grid.p_max()) {
            Ok(next) => {
                for (c, (&w, &score)) in clients.iter_mut().zip(next.iter().zip(&contributions.scores)) {
                    c.max_width = grid.snap(w);
                    c.contribution = score;
                }
            }
            Err(Error::Degenerate(msg)) => {
                log::warn!("round {t}: {msg}; keeping previous widths");
                for (c, &score) in clients.iter_mut().zip(&contributions.scores) {
                    c.contribution = score;
                }
            }
            Err(e) => return Err(e),
        }

        let pairs: Vec<(&SlimmableModel, f64)> = updates.iter().map(|u| &u.model).zip(widths.iter().copied()).collect();
        model = merge(&model, &pairs, true)?;

        let (global_loss, bucket_accuracy) = evaluate(&model, test)?;
        records.push(RoundRecord {
            round: t,
            global_loss,
            bucket_accuracy,
            contributions: contributions.scores.clone(),
            widths: clients.iter().map(|c| c.max_width).collect(),
            participants: ids.clone(),
            seed: cfg.seed,
        });
    }
    Ok(RunOutput { model, records })
}

//! Contribution assessment and the training-time reward maps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::balanced_accuracy;
use crate::partition::Dataset;
use crate::seed::Rng;
use crate::slimnet::{ModelSpec, ParamIndexSet, Sgd, SlimmableModel, WidthGrid};
use crate::train::{minibatches, TrainParams};

/// Scores client updates; higher means more useful.
pub trait Assess: Send + Sync {
    /// `deltas[i]` is client `i`'s full-length parameter delta; `view` is the
    /// common subnetwork on which contributions are compared.
    fn assess(&self, deltas: &[Vec<f64>], view: &ParamIndexSet) -> Result<Vec<f64>>;
}

/// Built-in contribution assessment methods.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ContributionMethod {
    /// Cosine between each client's delta and the aggregate direction.
    #[default]
    Cgsv,
    /// [`cgsv`] restricted to the last `m` layers.
    ShapfedLite { m: usize },
}

impl Assess for ContributionMethod {
    fn assess(&self, deltas: &[Vec<f64>], view: &ParamIndexSet) -> Result<Vec<f64>> {
        let coords = match *self {
            ContributionMethod::Cgsv => view.indices(),
            ContributionMethod::ShapfedLite { m } => {
                let layers = view.layer_count();
                if m == 0 || m > layers {
                    return Err(Error::Config(format!("shapfed_lite m = {m} outside [1, {layers}]")));
                }
                view.layers_from(layers - m)
            }
        };
        let restricted: Vec<Vec<f64>> = deltas.iter().map(|d| coords.iter().map(|&i| d[i]).collect()).collect();
        cgsv(&restricted)
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

/// Cosine similarity of every delta with the aggregate direction, the mean of
/// the unit-normalized deltas. Normalizing first keeps one large update from
/// dominating the aggregate, and makes every score invariant to rescaling any
/// single delta. Zero deltas score 0 and do not enter the aggregate.
pub fn cgsv(deltas: &[Vec<f64>]) -> Result<Vec<f64>> {
    let Some(first) = deltas.first() else {
        return Err(Error::Argument("no client deltas to assess".into()));
    };
    let dim = first.len();
    if deltas.iter().any(|d| d.len() != dim) {
        return Err(Error::Shape("client deltas differ in length".into()));
    }
    let mut aggregate = vec![0.0; dim];
    for d in deltas {
        let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (a, v) in aggregate.iter_mut().zip(d) {
                *a += v / norm;
            }
        }
    }
    let n = deltas.len() as f64;
    aggregate.iter_mut().for_each(|a| *a /= n);
    Ok(deltas.iter().map(|d| cosine(d, &aggregate)).collect())
}

/// Client participation rates `r_i = 0.5 (1 + i / N)` for `i = 1..=N`.
pub fn participation_rates(n: usize) -> Vec<f64> {
    (1..=n).map(|i| 0.5 * (1.0 + i as f64 / n as f64)).collect()
}

/// Momentum update: the fresh score at `t = 0`, otherwise `γ·prev + (1 − γ)·fresh`.
pub fn update_contribution(prev: f64, fresh: f64, gamma: f64, t: usize) -> f64 {
    if t == 0 {
        fresh
    } else {
        gamma * prev + (1.0 - gamma) * fresh
    }
}

/// Per-client contribution scores with their momentum parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContributionVector {
    pub scores: Vec<f64>,
    pub gamma: f64,
}

impl ContributionVector {
    pub fn new(clients: usize, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::Config(format!("momentum γ must lie in [0, 1], got {gamma}")));
        }
        Ok(Self { scores: vec![0.0; clients], gamma })
    }

    /// Folds in fresh raw scores for round `t`. Raw scores are clamped to
    /// `[0, 1]` first, so negative alignment counts as no contribution.
    pub fn update(&mut self, fresh: &[f64], t: usize) -> Result<()> {
        if fresh.len() != self.scores.len() {
            return Err(Error::Shape(format!("{} fresh scores for {} clients", fresh.len(), self.scores.len())));
        }
        if fresh.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("contribution scores".into()));
        }
        for (c, &f) in self.scores.iter_mut().zip(fresh) {
            *c = update_contribution(*c, f.clamp(0.0, 1.0), self.gamma, t);
        }
        Ok(())
    }
}

/// The default width utility `ν(x) = max(p_min, x · p_max)`.
pub fn default_nu(p_min: f64, p_max: f64) -> impl Fn(f64) -> f64 {
    move |x| (x * p_max).max(p_min)
}

/// Maps contributions to widths through `ν(c_i / max c)`. Negative scores
/// count as zero.
pub fn reward_widths_with(c: &[f64], nu: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    let max = c.iter().map(|v| v.max(0.0)).fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(Error::Degenerate("all contributions are zero".into()));
    }
    Ok(c.iter().map(|v| nu(v.max(0.0) / max)).collect())
}

pub fn reward_widths(c: &[f64], p_min: f64, p_max: f64) -> Result<Vec<f64>> {
    reward_widths_with(c, default_nu(p_min, p_max))
}

/// Balanced test accuracy of a fresh full-width model trained only on `shard`.
pub fn standalone_accuracy(
    shard: &Dataset,
    test: &Dataset,
    spec: &ModelSpec,
    grid: &WidthGrid,
    epochs: usize,
    train: &TrainParams,
    rng: &mut Rng,
) -> Result<f64> {
    if shard.is_empty() {
        return Err(Error::Config("standalone training on an empty shard".into()));
    }
    let mut model = SlimmableModel::init(spec, grid.clone(), rng)?;
    let mut opt = Sgd::new(model.num_params(), train.lr, train.momentum)?;
    for _ in 0..epochs {
        for batch in minibatches(shard.len(), train.batch_size, rng) {
            let sub = shard.subset(&batch);
            let (g, _) = model.backward(&sub.features, &sub.labels, 1.0)?;
            opt.step(&mut model, &g)?;
        }
    }
    let preds = model.predict(&test.features, 1.0)?;
    balanced_accuracy(&preds, &test.labels, test.classes)
}

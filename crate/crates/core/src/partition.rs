//! Desk-scale datasets and client partitioning.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::Rng;
use crate::tensor::Tensor2;

pub mod idx;

/// Labelled feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Tensor2,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl Dataset {
    pub fn new(features: Tensor2, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Argument("dataset must contain at least one sample".into()));
        }
        if features.rows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} feature rows for {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if let Some(&label) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::Label { label, classes });
        }
        Ok(Self { features, labels, classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
        }
    }

    /// Sample indices grouped by class.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut by_class = vec![Vec::new(); self.classes];
        for (i, &y) in self.labels.iter().enumerate() {
            by_class[y].push(i);
        }
        by_class
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Stratified split into `(train, test)`; `round(fraction · count)` of every
    /// class goes to the test side.
    pub fn train_test_split(&self, test_fraction: f64, rng: &mut Rng) -> Result<(Dataset, Dataset)> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(Error::Config(format!("test fraction must lie in [0, 1), got {test_fraction}")));
        }
        let mut train = Vec::new();
        let mut test = Vec::new();
        for mut idx in self.class_indices() {
            idx.shuffle(rng);
            let k = (test_fraction * idx.len() as f64).round() as usize;
            test.extend_from_slice(&idx[..k]);
            train.extend_from_slice(&idx[k..]);
        }
        train.sort_unstable();
        test.sort_unstable();
        if train.is_empty() || test.is_empty() {
            return Err(Error::Config("train/test split leaves one side empty".into()));
        }
        Ok((self.subset(&train), self.subset(&test)))
    }
}

/// Gaussian class clusters around seeded random unit vectors.
///
/// Sample `i` has label `i mod C`. With `modes > 1` each class owns several
/// cluster centres and sample `i` uses centre `(i / C) mod modes`, which
/// makes the task non-linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub samples: usize,
    pub dim: usize,
    pub classes: usize,
    pub spread: f64,
    #[serde(default = "one")]
    pub modes: usize,
}

fn one() -> usize {
    1
}

pub fn make_synthetic(n: usize, dim: usize, classes: usize, spread: f64, seed: u64) -> Result<Dataset> {
    make_synthetic_with(&SyntheticSpec { samples: n, dim, classes, spread, modes: 1 }, seed)
}

pub fn make_synthetic_with(spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    let SyntheticSpec { samples: n, dim, classes, spread, modes } = *spec;
    if classes == 0 || dim == 0 || modes == 0 {
        return Err(Error::Config("synthetic data needs positive dim, classes and modes".into()));
    }
    if n < classes {
        return Err(Error::Config(format!("{n} samples cannot cover {classes} classes")));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::Config(format!("spread must be non-negative, got {spread}")));
    }
    let mut rng = <Rng as rand::SeedableRng>::seed_from_u64(seed);
    let centres: Vec<Vec<f64>> = (0..classes * modes)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect();
    let mut data = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = i % classes;
        let mode = (i / classes) % modes;
        let centre = &centres[y * modes + mode];
        for &c in centre {
            data.push(c + spread * rng.sample::<f64, _>(StandardNormal));
        }
        labels.push(y);
    }
    Dataset::new(Tensor2::from_vec(n, dim, data)?, labels, classes)
}

/// How samples are spread over clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PartitionKind {
    /// Equal number of samples per class for every client.
    Homogeneous,
    /// Per-class client proportions drawn from `Dirichlet(alpha)`.
    Dirichlet { alpha: f64 },
    /// `m` chosen clients receive `kappa · n` samples each; the rest split the remainder.
    QuantitySkew { kappa: f64, m: usize },
    /// Every client draws `m` classes and shares those classes' samples.
    LabelSkew { m: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    #[serde(flatten)]
    pub kind: PartitionKind,
    pub clients: usize,
}

impl PartitionSpec {
    /// Every violated precondition, as human-readable diagnostics.
    pub fn diagnostics(&self, classes: Option<usize>) -> Vec<String> {
        let mut out = Vec::new();
        if self.clients == 0 {
            out.push("partition needs at least one client".to_string());
        }
        match self.kind {
            PartitionKind::Homogeneous => {}
            PartitionKind::Dirichlet { alpha } => {
                if !(alpha > 0.0 && alpha.is_finite()) {
                    out.push(format!("dirichlet alpha must be positive, got {alpha}"));
                }
            }
            PartitionKind::QuantitySkew { kappa, m } => {
                if !(kappa > 0.0 && kappa < 1.0) {
                    out.push(format!("quantity-skew kappa must lie in (0, 1), got {kappa}"));
                }
                if kappa * m as f64 >= 1.0 {
                    out.push(format!("quantity-skew kappa·m = {} must be below 1", kappa * m as f64));
                }
                if m == 0 || m >= self.clients {
                    out.push(format!("quantity-skew m must lie in [1, {}), got {m}", self.clients));
                }
            }
            PartitionKind::LabelSkew { m } => {
                if m == 0 {
                    out.push("label-skew m must be at least 1".to_string());
                }
                if let Some(c) = classes {
                    if m > c {
                        out.push(format!("label-skew m = {m} exceeds the {c} available classes"));
                    }
                }
            }
        }
        out
    }
}

/// Indices of one client's samples in the source dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shard {
    pub indices: Vec<usize>,
}

impl Shard {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Splits `data` into `spec.clients` disjoint, non-empty shards.
pub fn split(data: &Dataset, spec: &PartitionSpec, rng: &mut Rng) -> Result<Vec<Shard>> {
    let diags = spec.diagnostics(Some(data.classes));
    if !diags.is_empty() {
        return Err(Error::Partition(diags.join("; ")));
    }
    let n_clients = spec.clients;
    let mut shards = match spec.kind {
        PartitionKind::Homogeneous => homogeneous(data, n_clients, rng),
        PartitionKind::Dirichlet { alpha } => dirichlet(data, n_clients, alpha, rng)?,
        PartitionKind::QuantitySkew { kappa, m } => quantity_skew(data.len(), n_clients, kappa, m, rng),
        PartitionKind::LabelSkew { m } => label_skew(data, n_clients, m, rng),
    };
    for s in &mut shards {
        s.sort_unstable();
    }
    if let Some(i) = shards.iter().position(Vec::is_empty) {
        return Err(Error::Partition(format!("client {i} received no samples")));
    }
    Ok(shards.into_iter().map(|indices| Shard { indices }).collect())
}

/// `total` split into `parts` near-equal counts; remainder to the lowest indices.
fn equal_counts(total: usize, parts: usize) -> Vec<usize> {
    let base = total / parts;
    let extra = total % parts;
    (0..parts).map(|i| base + usize::from(i < extra)).collect()
}

fn deal(items: &[usize], counts: &[usize], shards: &mut [Vec<usize>], owners: &[usize]) {
    let mut start = 0;
    for (&c, &o) in counts.iter().zip(owners) {
        shards[o].extend_from_slice(&items[start..start + c]);
        start += c;
    }
}

fn homogeneous(data: &Dataset, n_clients: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let mut shards = vec![Vec::new(); n_clients];
    let owners: Vec<usize> = (0..n_clients).collect();
    for mut idx in data.class_indices() {
        idx.shuffle(rng);
        deal(&idx, &equal_counts(idx.len(), n_clients), &mut shards, &owners);
    }
    shards
}

/// Normalized Gamma draws; retries when every draw underflows.
fn sample_dirichlet(alpha: f64, k: usize, rng: &mut Rng) -> Result<Vec<f64>> {
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::Partition(format!("gamma({alpha}): {e}")))?;
    for _ in 0..1000 {
        let draws: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
        let sum: f64 = draws.iter().sum();
        if sum > 0.0 && sum.is_finite() {
            return Ok(draws.into_iter().map(|g| g / sum).collect());
        }
    }
    Err(Error::Partition(format!("dirichlet({alpha}) draws kept underflowing")))
}

/// Largest-remainder rounding of `total · proportions`; ties to the lower index.
fn apportion(total: usize, proportions: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = proportions.iter().map(|q| q * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..proportions.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

fn dirichlet(data: &Dataset, n_clients: usize, alpha: f64, rng: &mut Rng) -> Result<Vec<Vec<usize>>> {
    let owners: Vec<usize> = (0..n_clients).collect();
    let by_class = data.class_indices();
    let mut shards = Vec::new();
    for _attempt in 0..100 {
        shards = vec![Vec::new(); n_clients];
        for idx in &by_class {
            let mut idx = idx.clone();
            idx.shuffle(rng);
            let q = sample_dirichlet(alpha, n_clients, rng)?;
            deal(&idx, &apportion(idx.len(), &q), &mut shards, &owners);
        }
        if shards.iter().all(|s| !s.is_empty()) {
            return Ok(shards);
        }
    }
    // repair: move one sample from the currently largest shard
    while let Some(empty) = shards.iter().position(Vec::is_empty) {
        let largest = (0..n_clients).max_by_key(|&i| (shards[i].len(), std::cmp::Reverse(i))).unwrap();
        if shards[largest].len() < 2 {
            return Err(Error::Partition("not enough samples to give every client one".into()));
        }
        let moved = shards[largest].pop().unwrap();
        shards[empty].push(moved);
    }
    Ok(shards)
}

fn quantity_skew(n: usize, n_clients: usize, kappa: f64, m: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let mut all: Vec<usize> = (0..n).collect();
    all.shuffle(rng);
    let mut chosen: Vec<usize> = (0..n_clients).collect::<Vec<_>>().choose_multiple(rng, m).copied().collect();
    chosen.sort_unstable();
    let rest: Vec<usize> = (0..n_clients).filter(|i| !chosen.contains(i)).collect();
    let big = (kappa * n as f64 + 1e-9).floor() as usize;
    let mut counts = vec![big; m];
    counts.extend(equal_counts(n - big * m, rest.len()));
    let owners: Vec<usize> = chosen.iter().chain(&rest).copied().collect();
    let mut shards = vec![Vec::new(); n_clients];
    deal(&all, &counts, &mut shards, &owners);
    shards
}

fn label_skew(data: &Dataset, n_clients: usize, m: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let classes: Vec<usize> = (0..data.classes).collect();
    let mut selectors = vec![Vec::new(); data.classes];
    for client in 0..n_clients {
        for &c in classes.choose_multiple(rng, m) {
            selectors[c].push(client);
        }
    }
    let mut shards = vec![Vec::new(); n_clients];
    for (c, mut idx) in data.class_indices().into_iter().enumerate() {
        let owners = &mut selectors[c];
        if owners.is_empty() {
            continue;
        }
        owners.sort_unstable();
        idx.shuffle(rng);
        deal(&idx, &equal_counts(idx.len(), owners.len()), &mut shards, owners);
    }
    shards
}

/// Replaces every label with a uniformly random class (a planted low-quality client).
pub fn scramble_labels(data: &mut Dataset, rng: &mut Rng) {
    let c = data.classes;
    for y in &mut data.labels {
        *y = rng.random_range(0..c);
    }
}

//! Width-sliceable multilayer perceptron.
//!
//! All parameters live in one flat vector laid out layer by layer
//! (weights row-major `out × in`, then biases). A width `p` selects the
//! first `⌈p·n⌉` units of every hidden dimension, so the subnetworks are
//! nested prefixes of one another and the full model is the `p = 1.0` case.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::Rng;
use crate::tensor::Tensor2;

/// Tolerance used when converting a width fraction into a unit count, so
/// that e.g. `0.3 * 10` (which is `3.0000000000000004`) keeps 3 units.
const UNIT_EPS: f64 = 1e-9;

const NORM_EPS: f64 = 1e-5;

/// Number of active units of an `n`-unit dimension at width `p`.
#[inline]
pub fn active_units(n: usize, p: f64) -> usize {
    let k = (p * n as f64 - UNIT_EPS).ceil();
    (k.max(1.0) as usize).min(n)
}

/// The discrete widths at which normalization statistics are kept and
/// at which the model is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthGrid {
    buckets: Vec<f64>,
}

impl WidthGrid {
    /// Buckets `p_min, p_min + step, …` up to and including `1.0`.
    pub fn with_step(p_min: f64, step: f64) -> Result<Self> {
        if !(p_min > 0.0 && p_min <= 1.0) {
            return Err(Error::Config(format!("p_min must lie in (0, 1], got {p_min}")));
        }
        if !(step > 0.0) {
            return Err(Error::Config(format!("bucket step must be positive, got {step}")));
        }
        let mut buckets = Vec::new();
        let mut k = 0usize;
        loop {
            let w = round10(p_min + k as f64 * step);
            if w >= 1.0 - UNIT_EPS {
                break;
            }
            buckets.push(w);
            k += 1;
        }
        buckets.push(1.0);
        Self::from_buckets(buckets)
    }

    pub fn from_buckets(buckets: Vec<f64>) -> Result<Self> {
        let Some(&first) = buckets.first() else {
            return Err(Error::Config("width grid needs at least one bucket".into()));
        };
        if !(first > 0.0) {
            return Err(Error::Config("smallest width bucket must be positive".into()));
        }
        if buckets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("width buckets must be strictly ascending".into()));
        }
        if *buckets.last().unwrap() != 1.0 {
            return Err(Error::Config("largest width bucket must be 1.0".into()));
        }
        Ok(Self { buckets })
    }

    #[inline]
    pub fn p_min(&self) -> f64 {
        self.buckets[0]
    }

    #[inline]
    pub fn p_max(&self) -> f64 {
        1.0
    }

    #[inline]
    pub fn buckets(&self) -> &[f64] {
        &self.buckets
    }

    pub fn len(&self) -> usize {
        self.buckets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    pub fn check(&self, p: f64) -> Result<()> {
        if p.is_finite() && p >= self.p_min() - UNIT_EPS && p <= 1.0 + UNIT_EPS {
            Ok(())
        } else {
            Err(Error::WidthRange { width: p, min: self.p_min(), max: 1.0 })
        }
    }

    /// Index of the bucket nearest to `p`; ties go to the smaller bucket.
    pub fn nearest(&self, p: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, &b) in self.buckets.iter().enumerate() {
            let d = (b - p).abs();
            if d < best_d - 1e-12 {
                best = i;
                best_d = d;
            }
        }
        best
    }

    /// Nearest bucket value, never below `p_min`.
    pub fn snap(&self, p: f64) -> f64 {
        self.buckets[self.nearest(p)]
    }
}

fn round10(x: f64) -> f64 {
    (x * 1e10).round() / 1e10
}

/// Position of a dense layer in the stack; decides which axes slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerRole {
    Input,
    Hidden,
    Output,
    /// A single-layer model: neither axis slices.
    Sole,
}

impl LayerRole {
    fn slices_rows(self) -> bool {
        matches!(self, LayerRole::Input | LayerRole::Hidden)
    }

    fn slices_cols(self) -> bool {
        matches!(self, LayerRole::Hidden | LayerRole::Output)
    }
}

/// Layout of one width-sliceable dense layer inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlimmableDense {
    pub in_full: usize,
    pub out_full: usize,
    pub role: LayerRole,
    offset: usize,
}

impl SlimmableDense {
    #[inline]
    pub fn weight_offset(&self) -> usize {
        self.offset
    }

    #[inline]
    pub fn bias_offset(&self) -> usize {
        self.offset + self.in_full * self.out_full
    }

    #[inline]
    pub fn param_count(&self) -> usize {
        self.out_full * (self.in_full + 1)
    }

    /// `(active rows, active cols)` at width `p`.
    pub fn active_dims(&self, p: f64) -> (usize, usize) {
        let rows = if self.role.slices_rows() { active_units(self.out_full, p) } else { self.out_full };
        let cols = if self.role.slices_cols() { active_units(self.in_full, p) } else { self.in_full };
        (rows, cols)
    }
}

/// Running normalization statistics, one (mean, variance) pair per width
/// bucket. Vectors are full-length; only the active prefix is ever touched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchableNorm {
    pub mean: Vec<Vec<f64>>,
    pub var: Vec<Vec<f64>>,
    pub momentum: f64,
}

impl SwitchableNorm {
    pub fn new(units: usize, buckets: usize, momentum: f64) -> Self {
        Self {
            mean: vec![vec![0.0; units]; buckets],
            var: vec![vec![1.0; units]; buckets],
            momentum,
        }
    }
}

/// Architecture of the desk-scale MLP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub classes: usize,
    #[serde(default)]
    pub norm: bool,
}

/// Forward mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics; the running statistics of the nearest bucket are updated.
    Train,
    /// Running statistics of the nearest bucket; nothing is mutated.
    Eval,
}

/// Sorted set of parameter coordinates, grouped by layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamIndexSet {
    indices: Vec<usize>,
    /// `indices[layer_starts[l]..layer_starts[l + 1]]` belong to layer `l`.
    layer_starts: Vec<usize>,
}

impl ParamIndexSet {
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn layer_count(&self) -> usize {
        self.layer_starts.len() - 1
    }

    /// Coordinates belonging to layers `from..` (used to restrict to the last layers).
    pub fn layers_from(&self, from: usize) -> &[usize] {
        &self.indices[self.layer_starts[from]..]
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn is_subset_of(&self, other: &ParamIndexSet) -> bool {
        // both sorted
        let mut it = other.indices.iter().peekable();
        'outer: for &i in &self.indices {
            while let Some(&&j) = it.peek() {
                if j == i {
                    it.next();
                    continue 'outer;
                }
                if j > i {
                    return false;
                }
                it.next();
            }
            return false;
        }
        true
    }

    /// Dense boolean mask over `n` coordinates.
    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &i in &self.indices {
            m[i] = true;
        }
        m
    }

    /// Gathers `values[i]` for every coordinate in the set.
    pub fn gather(&self, values: &[f64]) -> Vec<f64> {
        self.indices.iter().map(|&i| values[i]).collect()
    }
}

/// Gradient of the loss at one width. Values are stored densely and are
/// exactly zero outside `support`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub width: f64,
    pub values: Vec<f64>,
    pub support: ParamIndexSet,
}

/// Width-nested MLP: dense layers with optional switchable normalization
/// after every non-output layer, followed by ReLU.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlimmableModel {
    layers: Vec<SlimmableDense>,
    params: Vec<f64>,
    norms: Vec<Option<SwitchableNorm>>,
    grid: WidthGrid,
}

impl SlimmableModel {
    /// Zero-initialized model.
    pub fn zeros(spec: &ModelSpec, grid: WidthGrid) -> Result<Self> {
        if spec.input == 0 || spec.classes == 0 || spec.hidden.contains(&0) {
            return Err(Error::Config("layer dimensions must be positive".into()));
        }
        let mut dims = vec![spec.input];
        dims.extend(&spec.hidden);
        dims.push(spec.classes);
        let n_layers = dims.len() - 1;
        let mut layers = Vec::with_capacity(n_layers);
        let mut offset = 0;
        for l in 0..n_layers {
            let role = match (l == 0, l + 1 == n_layers) {
                (true, true) => LayerRole::Sole,
                (true, false) => LayerRole::Input,
                (false, true) => LayerRole::Output,
                (false, false) => LayerRole::Hidden,
            };
            let layer = SlimmableDense { in_full: dims[l], out_full: dims[l + 1], role, offset };
            offset += layer.param_count();
            layers.push(layer);
        }
        let norms = (0..n_layers - 1)
            .map(|l| spec.norm.then(|| SwitchableNorm::new(dims[l + 1], grid.len(), 0.1)))
            .collect();
        Ok(Self { layers, params: vec![0.0; offset], norms, grid })
    }

    /// Weights and biases drawn from `U(-1/√fan_in, 1/√fan_in)`.
    pub fn init(spec: &ModelSpec, grid: WidthGrid, rng: &mut Rng) -> Result<Self> {
        let mut model = Self::zeros(spec, grid)?;
        for layer in &model.layers {
            let bound = 1.0 / (layer.in_full as f64).sqrt();
            let range = layer.offset..layer.offset + layer.param_count();
            for v in &mut model.params[range] {
                *v = rng.random_range(-bound..bound);
            }
        }
        Ok(model)
    }

    pub fn layers(&self) -> &[SlimmableDense] {
        &self.layers
    }

    pub fn norms(&self) -> &[Option<SwitchableNorm>] {
        &self.norms
    }

    pub fn norms_mut(&mut self) -> &mut [Option<SwitchableNorm>] {
        &mut self.norms
    }

    pub fn grid(&self) -> &WidthGrid {
        &self.grid
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_full
    }

    pub fn classes(&self) -> usize {
        self.layers.last().unwrap().out_full
    }

    #[inline]
    pub fn weight(&self, layer: usize, r: usize, c: usize) -> f64 {
        let l = &self.layers[layer];
        self.params[l.offset + r * l.in_full + c]
    }

    #[inline]
    pub fn bias(&self, layer: usize, r: usize) -> f64 {
        let l = &self.layers[layer];
        self.params[l.bias_offset() + r]
    }

    /// Coordinates of the width-`p` subnetwork.
    pub fn slice_view(&self, p: f64) -> Result<ParamIndexSet> {
        self.grid.check(p)?;
        let mut indices = Vec::new();
        let mut layer_starts = Vec::with_capacity(self.layers.len() + 1);
        for layer in &self.layers {
            layer_starts.push(indices.len());
            let (rows, cols) = layer.active_dims(p);
            for r in 0..rows {
                let base = layer.offset + r * layer.in_full;
                indices.extend(base..base + cols);
            }
            let b = layer.bias_offset();
            indices.extend(b..b + rows);
        }
        layer_starts.push(indices.len());
        Ok(ParamIndexSet { indices, layer_starts })
    }

    /// Logits at width `p`. Train mode updates the running statistics of
    /// the bucket nearest `p`.
    pub fn forward(&mut self, batch: &Tensor2, p: f64, mode: Mode) -> Result<Tensor2> {
        match mode {
            Mode::Eval => self.forward_eval(batch, p),
            Mode::Train => {
                let cache = self.run_forward(batch, p, NormSource::Batch)?;
                self.record_batch_stats(p, &cache);
                Ok(cache.logits)
            }
        }
    }

    /// Eval-mode logits; never mutates the model.
    pub fn forward_eval(&self, batch: &Tensor2, p: f64) -> Result<Tensor2> {
        Ok(self.run_forward(batch, p, NormSource::Running)?.logits)
    }

    /// Arg-max class per row, eval mode.
    pub fn predict(&self, batch: &Tensor2, p: f64) -> Result<Vec<usize>> {
        let logits = self.forward_eval(batch, p)?;
        Ok((0..logits.rows()).map(|r| argmax(logits.row(r))).collect())
    }

    /// Mean softmax cross-entropy at width `p` using batch statistics,
    /// without touching the running statistics.
    pub fn loss(&self, batch: &Tensor2, labels: &[usize], p: f64) -> Result<f64> {
        self.check_labels(batch, labels)?;
        let cache = self.run_forward(batch, p, NormSource::Batch)?;
        Ok(cross_entropy(&cache.logits, labels).0)
    }

    /// Eval-mode mean cross-entropy.
    pub fn eval_loss(&self, batch: &Tensor2, labels: &[usize], p: f64) -> Result<f64> {
        self.check_labels(batch, labels)?;
        let logits = self.forward_eval(batch, p)?;
        Ok(cross_entropy(&logits, labels).0)
    }

    /// Loss and gradient at width `p` (train-mode forward), also folding
    /// the batch statistics into the running statistics.
    pub fn backward(&mut self, batch: &Tensor2, labels: &[usize], p: f64) -> Result<(Gradient, f64)> {
        self.check_labels(batch, labels)?;
        let cache = self.run_forward(batch, p, NormSource::Batch)?;
        let out = self.backprop(&cache, labels, p)?;
        self.record_batch_stats(p, &cache);
        Ok(out)
    }

    /// Same as [`backward`](Self::backward) but leaves running statistics untouched.
    pub fn loss_and_gradient(&self, batch: &Tensor2, labels: &[usize], p: f64) -> Result<(Gradient, f64)> {
        self.check_labels(batch, labels)?;
        let cache = self.run_forward(batch, p, NormSource::Batch)?;
        self.backprop(&cache, labels, p)
    }

    fn check_labels(&self, batch: &Tensor2, labels: &[usize]) -> Result<()> {
        if labels.len() != batch.rows() {
            return Err(Error::Shape(format!("{} labels for {} rows", labels.len(), batch.rows())));
        }
        let classes = self.classes();
        if let Some(&label) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::Label { label, classes });
        }
        Ok(())
    }

    fn run_forward(&self, batch: &Tensor2, p: f64, source: NormSource) -> Result<ForwardCache> {
        self.grid.check(p)?;
        if batch.cols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "batch has {} features, model expects {}",
                batch.cols(),
                self.input_dim()
            )));
        }
        if batch.rows() == 0 {
            return Err(Error::Shape("empty batch".into()));
        }
        let n = batch.rows();
        let bucket = self.grid.nearest(p);
        let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut norm_caches: Vec<Option<NormCache>> = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut x = batch.data().to_vec();
        let mut logits = Tensor2::zeros(0, 0);
        for (l, layer) in self.layers.iter().enumerate() {
            let (rows, cols) = layer.active_dims(p);
            let mut z = vec![0.0; n * rows];
            let w = &self.params[layer.offset..layer.bias_offset()];
            let b = &self.params[layer.bias_offset()..layer.bias_offset() + layer.out_full];
            for s in 0..n {
                let xs = &x[s * cols..(s + 1) * cols];
                for r in 0..rows {
                    let wr = &w[r * layer.in_full..r * layer.in_full + cols];
                    let mut acc = b[r];
                    for (wi, xi) in wr.iter().zip(xs) {
                        acc += wi * xi;
                    }
                    z[s * rows + r] = acc;
                }
            }
            let last = l + 1 == self.layers.len();
            if last {
                if z.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Numeric("logits".into()));
                }
                logits = Tensor2::from_vec(n, rows, z)?;
                inputs.push(x);
                norm_caches.push(None);
                post.push(Vec::new());
                break;
            }
            let nc = self.norms[l].as_ref().map(|norm| normalize(&mut z, n, rows, norm, bucket, source));
            for v in &mut z {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            inputs.push(std::mem::replace(&mut x, z.clone()));
            norm_caches.push(nc);
            post.push(z);
        }
        Ok(ForwardCache { n, inputs, norm_caches, post, logits, bucket })
    }

    fn record_batch_stats(&mut self, p: f64, cache: &ForwardCache) {
        for (l, (nc, norm)) in cache.norm_caches.iter().zip(self.norms.iter_mut()).enumerate() {
            let (Some(nc), Some(norm)) = (nc, norm.as_mut()) else { continue };
            let m = norm.momentum;
            let unbias = if cache.n > 1 { cache.n as f64 / (cache.n as f64 - 1.0) } else { 1.0 };
            let rows = self.layers[l].active_dims(p).0;
            let mean = &mut norm.mean[cache.bucket];
            let var = &mut norm.var[cache.bucket];
            for u in 0..rows {
                mean[u] = (1.0 - m) * mean[u] + m * nc.mean[u];
                var[u] = (1.0 - m) * var[u] + m * nc.var[u] * unbias;
            }
        }
    }

    fn backprop(&self, cache: &ForwardCache, labels: &[usize], p: f64) -> Result<(Gradient, f64)> {
        let n = cache.n;
        let (loss, mut delta) = cross_entropy(&cache.logits, labels);
        let mut grad = vec![0.0; self.params.len()];
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let (rows, cols) = layer.active_dims(p);
            let x = &cache.inputs[l];
            let wo = layer.offset;
            let bo = layer.bias_offset();
            for s in 0..n {
                let ds = &delta[s * rows..(s + 1) * rows];
                let xs = &x[s * cols..(s + 1) * cols];
                for r in 0..rows {
                    let d = ds[r];
                    if d == 0.0 {
                        continue;
                    }
                    grad[bo + r] += d;
                    let gw = &mut grad[wo + r * layer.in_full..wo + r * layer.in_full + cols];
                    for (g, xi) in gw.iter_mut().zip(xs) {
                        *g += d * xi;
                    }
                }
            }
            if l == 0 {
                break;
            }
            // propagate to the previous layer's post-activation
            let mut dx = vec![0.0; n * cols];
            for s in 0..n {
                let ds = &delta[s * rows..(s + 1) * rows];
                let dxs = &mut dx[s * cols..(s + 1) * cols];
                for r in 0..rows {
                    let d = ds[r];
                    if d == 0.0 {
                        continue;
                    }
                    let wr = &self.params[wo + r * layer.in_full..wo + r * layer.in_full + cols];
                    for (g, wi) in dxs.iter_mut().zip(wr) {
                        *g += d * wi;
                    }
                }
            }
            let prev_post = &cache.post[l - 1];
            for (g, &a) in dx.iter_mut().zip(prev_post) {
                if a <= 0.0 {
                    *g = 0.0;
                }
            }
            if let Some(nc) = &cache.norm_caches[l - 1] {
                normalize_backward(&mut dx, n, cols, nc);
            }
            delta = dx;
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric("gradient".into()));
        }
        let support = self.slice_view(p)?;
        Ok((Gradient { width: p, values: grad, support }, loss))
    }
}

#[derive(Clone, Copy)]
enum NormSource {
    Batch,
    Running,
}

struct NormCache {
    mean: Vec<f64>,
    var: Vec<f64>,
    /// normalized pre-activations, `n × units`
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
}

struct ForwardCache {
    n: usize,
    inputs: Vec<Vec<f64>>,
    norm_caches: Vec<Option<NormCache>>,
    post: Vec<Vec<f64>>,
    logits: Tensor2,
    bucket: usize,
}

fn normalize(z: &mut [f64], n: usize, units: usize, norm: &SwitchableNorm, bucket: usize, source: NormSource) -> NormCache {
    let (mean, var) = match source {
        NormSource::Running => (norm.mean[bucket][..units].to_vec(), norm.var[bucket][..units].to_vec()),
        NormSource::Batch => {
            let mut mean = vec![0.0; units];
            let mut var = vec![0.0; units];
            for s in 0..n {
                for u in 0..units {
                    mean[u] += z[s * units + u];
                }
            }
            mean.iter_mut().for_each(|m| *m /= n as f64);
            for s in 0..n {
                for u in 0..units {
                    let d = z[s * units + u] - mean[u];
                    var[u] += d * d;
                }
            }
            var.iter_mut().for_each(|v| *v /= n as f64);
            (mean, var)
        }
    };
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + NORM_EPS).sqrt()).collect();
    for s in 0..n {
        for u in 0..units {
            let i = s * units + u;
            z[i] = (z[i] - mean[u]) * inv_std[u];
        }
    }
    NormCache { mean, var, xhat: z.to_vec(), inv_std }
}

/// Gradient through batch normalization without affine parameters.
fn normalize_backward(dy: &mut [f64], n: usize, units: usize, nc: &NormCache) {
    let nf = n as f64;
    for u in 0..units {
        let mut sum_dy = 0.0;
        let mut sum_dy_xhat = 0.0;
        for s in 0..n {
            let i = s * units + u;
            sum_dy += dy[i];
            sum_dy_xhat += dy[i] * nc.xhat[i];
        }
        for s in 0..n {
            let i = s * units + u;
            dy[i] = nc.inv_std[u] / nf * (nf * dy[i] - sum_dy - nc.xhat[i] * sum_dy_xhat);
        }
    }
}

/// Mean cross-entropy and its gradient w.r.t. the logits.
fn cross_entropy(logits: &Tensor2, labels: &[usize]) -> (f64, Vec<f64>) {
    let n = logits.rows();
    let c = logits.cols();
    let mut loss = 0.0;
    let mut grad = vec![0.0; n * c];
    for s in 0..n {
        let row = logits.row(s);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let lse = max + sum.ln();
        loss += lse - row[labels[s]];
        for k in 0..c {
            let prob = (row[k] - lse).exp();
            let target = if k == labels[s] { 1.0 } else { 0.0 };
            grad[s * c + k] = (prob - target) / n as f64;
        }
    }
    (loss / n as f64, grad)
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// SGD with heavy-ball momentum. Velocity buffers are kept per coordinate
/// and only coordinates in a gradient's support are touched.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub lr: f64,
    pub momentum: f64,
    velocity: Vec<f64>,
}

impl Sgd {
    pub fn new(num_params: usize, lr: f64, momentum: f64) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::Config(format!("momentum must lie in [0, 1), got {momentum}")));
        }
        Ok(Self { lr, momentum, velocity: vec![0.0; num_params] })
    }

    pub fn step(&mut self, model: &mut SlimmableModel, grad: &Gradient) -> Result<()> {
        if grad.values.len() != model.params.len() {
            return Err(Error::Shape("gradient length differs from parameter count".into()));
        }
        if grad.support.indices.iter().any(|&i| !grad.values[i].is_finite()) {
            return Err(Error::Numeric("gradient".into()));
        }
        for &i in &grad.support.indices {
            let v = self.momentum * self.velocity[i] + grad.values[i];
            self.velocity[i] = v;
            model.params[i] -= self.lr * v;
        }
        Ok(())
    }
}

//! Shared fixtures for the benchmarks.

use slimfair_core::partition::make_synthetic;
use slimfair_core::seed;
use slimfair_core::{AllocationProblem, Dataset, ModelSpec, SlimmableModel, WidthGrid};

pub fn model(input: usize, hidden: usize, classes: usize) -> SlimmableModel {
    let spec = ModelSpec { input, hidden: vec![hidden, hidden], classes, norm: false };
    let grid = WidthGrid::with_step(0.25, 0.05).expect("valid grid");
    SlimmableModel::init(&spec, grid, &mut seed::rng(0, &[seed::stream::MODEL_INIT])).expect("valid model")
}

pub fn batch(samples: usize, dim: usize, classes: usize) -> Dataset {
    make_synthetic(samples, dim, classes, 0.5, 1).expect("valid data")
}

/// `n` clients with evenly spread contributions and a `levels`-entry menu.
pub fn problem(n: usize, levels: usize) -> AllocationProblem {
    let c: Vec<f64> = (0..n).map(|i| 0.3 + 0.4 * i as f64 / n as f64).collect();
    let menu: Vec<f64> = (0..levels).map(|k| 0.4 + 0.6 * k as f64 / (levels - 1) as f64).collect();
    AllocationProblem::new(c, menu, 1e-3).expect("feasible")
}

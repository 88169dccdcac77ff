//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one `PASS`/`FAIL` line; exits non-zero if any fails.

use std::panic;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::index;
use rand::{Rng as _, SeedableRng};
use slimfair_core::allocator::{anneal, brute_force, cost, is_ir, Allocation, AllocationProblem, AnnealSchedule};
use slimfair_core::config::{DataSource, ExperimentConfig, RunMode};
use slimfair_core::contribution::{participation_rates, reward_widths, update_contribution};
use slimfair_core::fedcore::{aggregate_mean, masked_average, run_sampled_widths, ClientState, EngineConfig};
use slimfair_core::metrics::{pearson, spearman};
use slimfair_core::pipeline::{self, ALLOCATION_FILE, METRICS_FILE, ROUNDS_FILE};
use slimfair_core::seed::Rng;
use slimfair_core::slimnet::{ModelSpec, SlimmableModel, WidthGrid};
use slimfair_core::train::{LrSchedule, TrainParams};
use slimfair_core::{PartitionKind, Tensor2};

/// Outcome of one criterion: pass flag and a one-line measurement summary.
type Outcome = (bool, String);

/// Desk-scale task shared by the end-to-end criteria: 4 classes, each a
/// mixture of 16 clusters in 8 dimensions, so accuracy keeps improving with width.
fn task(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        seed,
        clients: 5,
        rounds: 30,
        local_iterations: 5,
        lr: 0.2,
        standalone_epochs: 30,
        data: DataSource::Synthetic { samples: 2000, dim: 8, classes: 4, spread: 0.2, modes: 16 },
        ..Default::default()
    }
}

fn dirichlet_pipeline(seed: u64) -> ExperimentConfig {
    ExperimentConfig { partition: PartitionKind::Dirichlet { alpha: 0.5 }, ..task(seed) }
}

fn within_ulps(x: f64, y: f64, ulps: f64) -> bool {
    (x - y).abs() <= ulps * f64::EPSILON * y.abs().max(f64::MIN_POSITIVE)
}

fn criterion_1_gradient_matches_finite_differences() -> Outcome {
    let start = Instant::now();
    let spec = ModelSpec { input: 6, hidden: vec![12, 12], classes: 4, norm: false };
    let grid = WidthGrid::with_step(0.25, 0.05).unwrap();
    let mut rng = Rng::seed_from_u64(1);
    let model = SlimmableModel::init(&spec, grid, &mut rng).unwrap();
    let x: Vec<f64> = (0..10 * 6).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x = Tensor2::from_vec(10, 6, x).unwrap();
    let y: Vec<usize> = (0..10).map(|i| i % 4).collect();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for p in [0.25, 0.5, 1.0] {
        let (g, _) = model.loss_and_gradient(&x, &y, p).unwrap();
        let support = g.support.indices();
        let take = 200.min(support.len());
        for k in index::sample(&mut rng, support.len(), take) {
            let i = support[k];
            let mut plus = model.clone();
            plus.params_mut()[i] += h;
            let mut minus = model.clone();
            minus.params_mut()[i] -= h;
            let fd = (plus.loss(&x, &y, p).unwrap() - minus.loss(&x, &y, p).unwrap()) / (2.0 * h);
            let denom = g.values[i].abs().max(fd.abs()).max(1e-8);
            worst = worst.max((g.values[i] - fd).abs() / denom);
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = worst < 1e-4 && elapsed < Duration::from_secs(10);
    (pass, format!("{checked} coords, max rel err {worst:.2e}, {elapsed:.2?}"))
}

/// Random contributions in `[0.2, 0.8)` and six evenly spaced menu levels
/// with random endpoints, the top one at least the largest contribution.
fn random_problem(rng: &mut Rng, n: usize, levels: usize) -> AllocationProblem {
    let mut c: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..0.8)).collect();
    c.sort_by(f64::total_cmp);
    let top = rng.random_range(c[n - 1]..1.0);
    let bottom = rng.random_range(0.1..c[0]);
    let menu = (0..levels).map(|k| bottom + (top - bottom) * k as f64 / (levels - 1) as f64).collect();
    AllocationProblem::new(c, menu, 1e-3).unwrap()
}

fn top_gets_max(a: &Allocation, problem: &AllocationProblem) -> bool {
    a.accuracies.last() == problem.menu().last()
}

fn criterion_2_annealer_matches_brute_force() -> Outcome {
    let start = Instant::now();
    let mut rng = Rng::seed_from_u64(2024);
    let mut exact = 0;
    let mut all_ir = true;
    let mut all_top = true;
    for seed in 0..20 {
        let problem = random_problem(&mut rng, 4, 6);
        let best = brute_force(&problem).unwrap();
        let found = anneal(&problem, &AnnealSchedule::for_problem(&problem, seed)).unwrap();
        if cost(&found, &problem) == cost(&best, &problem) {
            exact += 1;
        }
        all_ir &= is_ir(&found) && is_ir(&best);
        all_top &= top_gets_max(&found, &problem) && top_gets_max(&best, &problem);
    }
    let elapsed = start.elapsed();
    let pass = exact >= 19 && all_ir && all_top && elapsed < Duration::from_secs(30);
    (pass, format!("{exact}/20 exact, IR {all_ir}, top gets max {all_top}, {elapsed:.2?}"))
}

/// Exact optimum's correlation is discretization-limited only when
/// `epsilon` is well below the squared menu step; at the default `1e-3` the
/// optimum lifts lower clients a few levels, which is reported alongside.
fn criterion_3_fine_menu_gives_perfect_correlation() -> Outcome {
    let mut rng = Rng::seed_from_u64(3);
    let mut worst: f64 = 1.0;
    let mut worst_default_eps: f64 = 1.0;
    for seed in 0..10 {
        let mut c: Vec<f64> = (0..5).map(|_| rng.random_range(0.3..0.7)).collect();
        c.sort_by(f64::total_cmp);
        let u = 0.9;
        let lo = c[0] + (u - c[4]);
        let menu: Vec<f64> = (0..101).map(|k| lo + (u - lo) * k as f64 / 100.0).collect();
        for (eps, slot) in [(1e-6, &mut worst), (1e-3, &mut worst_default_eps)] {
            let problem = AllocationProblem::new(c.clone(), menu.clone(), eps).unwrap();
            let a = anneal(&problem, &AnnealSchedule::for_problem(&problem, seed)).unwrap();
            let rho = pearson(&a.accuracies, &c).unwrap().expect("distinct contributions");
            *slot = slot.min(rho);
        }
    }
    let pass = worst >= 0.999;
    (pass, format!("min rho over 10 instances {worst:.5} at epsilon 1e-6 ({worst_default_eps:.5} at 1e-3)"))
}

fn criterion_4_accuracy_rises_with_width() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig { partition: PartitionKind::Homogeneous, ..task(1) };
    let data = pipeline::prepare_data(&cfg).unwrap();
    let mut clients: Vec<ClientState> = data
        .shards
        .iter()
        .enumerate()
        .map(|(i, d)| ClientState::new(i, d.clone(), Rng::seed_from_u64(100 + i as u64)))
        .collect();
    let spec = cfg.model_spec(data.train.dim(), data.train.classes);
    let model = SlimmableModel::init(&spec, cfg.grid().unwrap(), &mut Rng::seed_from_u64(7)).unwrap();
    let engine = EngineConfig {
        rounds: 30,
        local_iterations: 5,
        train: TrainParams { lr: cfg.lr, momentum: cfg.momentum, batch_size: 128 },
        lr: LrSchedule::from_fractions(cfg.lr, &cfg.lr_milestones, cfg.lr_decay, 30).unwrap(),
        seed: cfg.seed,
        participation: None,
    };
    let out = run_sampled_widths(&mut clients, model, &data.test, &engine).unwrap();
    let last = out.records.last().unwrap();
    let widths: Vec<f64> = last.bucket_accuracy.iter().map(|b| b.width).collect();
    let acc: Vec<f64> = last.bucket_accuracy.iter().map(|b| b.accuracy).collect();
    let rho = spearman(&widths, &acc).unwrap().unwrap_or(f64::NAN);
    let gap = acc[acc.len() - 1] - acc[0];
    let elapsed = start.elapsed();
    let pass = rho >= 0.9 && gap >= 0.05 && elapsed < Duration::from_secs(120);
    (pass, format!("spearman {rho:.3}, acc gap {gap:.3}, {elapsed:.2?}"))
}

fn criterion_5_end_to_end_incentivization() -> Outcome {
    let start = Instant::now();
    let mut rhos = Vec::new();
    let mut per_seed_ok = true;
    let mut lines = Vec::new();
    for seed in 1..=5 {
        let s = pipeline::execute(&dirichlet_pipeline(seed)).unwrap();
        let m = s.report.unwrap().metrics;
        let rho = m.pearson.unwrap_or(f64::NAN);
        rhos.push(rho);
        per_seed_ok &= m.ir_rate == 1.0 && m.cgs <= 0.05 && m.mcg > 0.0;
        lines.push(format!("seed {seed}: rho {rho:.3} ir {} cgs {:.3} mcg {:.3}", m.ir_rate, m.cgs, m.mcg));
    }
    let mean = rhos.iter().sum::<f64>() / rhos.len() as f64;
    let elapsed = start.elapsed();
    let pass = mean >= 0.9 && per_seed_ok && elapsed < Duration::from_secs(600);
    (pass, format!("mean rho {mean:.3}; {}; {elapsed:.2?}", lines.join("; ")))
}

fn criterion_6_training_time_rewards_penalize_noise() -> Outcome {
    let noisy = 2;
    let mut hits = 0;
    let mut rhos = Vec::new();
    for seed in 1..=5 {
        let cfg = ExperimentConfig {
            mode: RunMode::TrainingTime,
            partition: PartitionKind::Homogeneous,
            local_iterations: 10,
            noisy_clients: vec![noisy],
            ..task(seed)
        };
        let s = pipeline::execute(&cfg).unwrap();
        let r = s.report.unwrap();
        let others = (0..cfg.clients).filter(|&i| i != noisy);
        let smallest = others.clone().all(|i| r.widths[noisy] < r.widths[i] && r.accuracies[noisy] < r.accuracies[i]);
        if smallest {
            hits += 1;
        }
        rhos.push(r.metrics.pearson.unwrap_or(f64::NAN));
    }
    let min_rho = rhos.iter().copied().fold(f64::INFINITY, f64::min);
    let pass = hits >= 4 && min_rho >= 0.8;
    (pass, format!("noisy client strictly smallest in {hits}/5 seeds, min rho {min_rho:.3}"))
}

fn criterion_7_masked_average_reduces_to_mean() -> Outcome {
    let spec = ModelSpec { input: 5, hidden: vec![9, 7], classes: 3, norm: true };
    let grid = WidthGrid::with_step(0.25, 0.05).unwrap();
    let mut rng = Rng::seed_from_u64(7);
    let mut equal = 0;
    for _ in 0..100 {
        let prev = SlimmableModel::init(&spec, grid.clone(), &mut rng).unwrap();
        let n = rng.random_range(1..=8);
        let updates: Vec<SlimmableModel> =
            (0..n).map(|_| SlimmableModel::init(&spec, grid.clone(), &mut rng).unwrap()).collect();
        let pairs: Vec<(&[f64], f64)> = updates.iter().map(|m| (m.params(), 1.0)).collect();
        let plain: Vec<&[f64]> = updates.iter().map(|m| m.params()).collect();
        let masked = masked_average(&prev, &pairs).unwrap();
        let mean = aggregate_mean(&plain).unwrap();
        if masked.iter().zip(&mean).all(|(a, b)| a.to_bits() == b.to_bits()) {
            equal += 1;
        }
    }
    let pass = equal == 100;
    (pass, format!("{equal}/100 bitwise equal"))
}

fn criterion_8_formula_checks() -> Outcome {
    let mut failures = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_string());
        }
    };
    check("momentum update", within_ulps(update_contribution(0.4, 0.8, 0.5, 1), 0.6, 1.0));
    check("momentum update at t = 0", update_contribution(0.4, 0.8, 0.5, 0) == 0.8);
    check("width map proportional", reward_widths(&[0.2, 0.4], 0.25, 1.0).unwrap() == vec![0.5, 1.0]);
    check("width map floor", reward_widths(&[0.1, 1.0], 0.25, 1.0).unwrap() == vec![0.25, 1.0]);
    check("width map ceiling", reward_widths(&[0.3, 0.3, 0.3], 0.25, 1.0).unwrap() == vec![1.0; 3]);
    let p = AllocationProblem::new(vec![0.2, 0.4], vec![0.5, 0.7], 0.01).unwrap();
    check("cost with equal gains", within_ulps(cost(&p.allocation(vec![0, 1]), &p), -30.0, 2.0));
    let p = AllocationProblem::new(vec![0.0, 0.0], vec![0.0, 1.0], 1.0).unwrap();
    check("cost with unequal gains", within_ulps(p.cost_of(&[1, 0]), -0.4, 2.0));
    let r = participation_rates(50);
    check("participation r_1", r[0] == 0.51);
    check("participation r_N", r[49] == 1.0);
    let pass = failures.is_empty();
    let detail = if pass { "all exact to within 2 ulp".to_string() } else { format!("failed: {}", failures.join(", ")) };
    (pass, detail)
}

fn criterion_9_runs_are_byte_identical() -> Outcome {
    let cfg = dirichlet_pipeline(1);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline::run(&cfg, a.path()).unwrap();
    pipeline::run(&cfg, b.path()).unwrap();
    let same = |f: &str| std::fs::read(a.path().join(f)).unwrap() == std::fs::read(b.path().join(f)).unwrap();
    let (jsonl, csv, metrics) = (same(ROUNDS_FILE), same(ALLOCATION_FILE), same(METRICS_FILE));
    let pass = jsonl && csv && metrics;
    (pass, format!("jsonl identical {jsonl}, csv identical {csv}, metrics identical {metrics}"))
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Outcome); 9] = [
        (1, "backprop vs finite differences", criterion_1_gradient_matches_finite_differences),
        (2, "annealer vs brute-force oracle", criterion_2_annealer_matches_brute_force),
        (3, "perfect-correlation limit on a 101-level menu", criterion_3_fine_menu_gives_perfect_correlation),
        (4, "width-accuracy monotonicity", criterion_4_accuracy_rises_with_width),
        (5, "end-to-end incentivization", criterion_5_end_to_end_incentivization),
        (6, "training-time rewards with a noisy client", criterion_6_training_time_rewards_penalize_noise),
        (7, "masked averaging at full width equals the mean", criterion_7_masked_average_reduces_to_mean),
        (8, "formula checks", criterion_8_formula_checks),
        (9, "determinism", criterion_9_runs_are_byte_identical),
    ];
    // `cargo test -- <filter>` runs the criteria whose name contains the filter
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, name, check) in criteria {
        let label = format!("criterion {id}: {name}");
        if !filters.is_empty() && !filters.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        let (pass, detail) = panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            (false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        println!("{} {label} ({detail})", if pass { "PASS" } else { "FAIL" });
        failed += usize::from(!pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}

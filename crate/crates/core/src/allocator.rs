//! Post-training reward allocation.
//!
//! Each client (sorted by contribution `c`) is assigned one accuracy level
//! from a discrete menu. The objective trades mean gain against gain
//! variance, `f(a) = -mean(a - c) / (var(a - c) + ε)`, subject to individual
//! rationality (`a_i ≥ c_i` for all `i`). It is minimized by simulated
//! annealing with the logarithmic schedule `T_k = 1 / ln(k + k0)`; an
//! exhaustive search serves as the exact reference on small instances.

use std::io::Write;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::Rng;

pub const DEFAULT_EPSILON: f64 = 1e-3;

/// Largest state space [`brute_force`] will enumerate.
pub const BRUTE_FORCE_LIMIT: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationProblem {
    contributions: Vec<f64>,
    menu: Vec<f64>,
    epsilon: f64,
    /// Smallest menu index satisfying IR for each client.
    floor: Vec<usize>,
}

impl AllocationProblem {
    /// `contributions` must be ascending and `menu` strictly ascending.
    pub fn new(contributions: Vec<f64>, menu: Vec<f64>, epsilon: f64) -> Result<Self> {
        if contributions.is_empty() {
            return Err(Error::Argument("allocation needs at least one client".into()));
        }
        if menu.is_empty() {
            return Err(Error::Argument("allocation menu is empty".into()));
        }
        if contributions.iter().chain(&menu).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("allocation inputs".into()));
        }
        if contributions.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Argument("contributions must be sorted ascending".into()));
        }
        if menu.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Argument("menu must be strictly ascending".into()));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Argument(format!("epsilon must be positive, got {epsilon}")));
        }
        let top = *menu.last().unwrap();
        let c_max = *contributions.last().unwrap();
        if top < c_max {
            return Err(Error::Infeasible(format!(
                "highest menu accuracy {top} is below the top contribution {c_max}"
            )));
        }
        let floor = contributions.iter().map(|&c| menu.partition_point(|&a| a < c)).collect();
        Ok(Self { contributions, menu, epsilon, floor })
    }

    pub fn contributions(&self) -> &[f64] {
        &self.contributions
    }

    pub fn menu(&self) -> &[f64] {
        &self.menu
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn clients(&self) -> usize {
        self.contributions.len()
    }

    /// Reported when the lowest menu entry is too high for gains to be equalized:
    /// `ℓ ≤ c_1 + (u − c_N)` fails.
    pub fn feasibility_warning(&self) -> Option<String> {
        let (l, u) = (self.menu[0], *self.menu.last().unwrap());
        let (c1, cn) = (self.contributions[0], *self.contributions.last().unwrap());
        let bound = c1 + (u - cn);
        (l > bound + 1e-12).then(|| {
            format!("lowest menu accuracy {l} exceeds c_1 + (u - c_N) = {bound}; gains cannot be fully equalized")
        })
    }

    /// Whether assigning menu index `k` to client `i` keeps its gain non-negative.
    #[inline]
    pub fn admissible(&self, i: usize, k: usize) -> bool {
        k >= self.floor[i]
    }

    /// Cost of an index vector; see [`cost`].
    pub fn cost_of(&self, indices: &[usize]) -> f64 {
        let n = indices.len() as f64;
        let gain = |(i, &k): (usize, &usize)| self.menu[k] - self.contributions[i];
        let mean = indices.iter().enumerate().map(gain).sum::<f64>() / n;
        let var = indices.iter().enumerate().map(|x| (gain(x) - mean).powi(2)).sum::<f64>() / n;
        -mean / (var + self.epsilon)
    }

    pub fn allocation(&self, indices: Vec<usize>) -> Allocation {
        let accuracies: Vec<f64> = indices.iter().map(|&k| self.menu[k]).collect();
        let gains = accuracies.iter().zip(&self.contributions).map(|(a, c)| a - c).collect();
        Allocation { indices, accuracies, gains }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub indices: Vec<usize>,
    pub accuracies: Vec<f64>,
    pub gains: Vec<f64>,
}

/// `-mean(u) / (var(u) + ε)` over gains `u_i = a_i - c_i`, population variance.
pub fn cost(allocation: &Allocation, problem: &AllocationProblem) -> f64 {
    problem.cost_of(&allocation.indices)
}

/// Individual rationality: no client ends below its contribution.
pub fn is_ir(allocation: &Allocation) -> bool {
    allocation.gains.iter().all(|&g| g >= 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub k0: f64,
    pub steps: usize,
    pub seed: u64,
}

impl AnnealSchedule {
    /// `k0 = 2` and `50 · N · |menu|` steps.
    pub fn for_problem(problem: &AllocationProblem, seed: u64) -> Self {
        Self { k0: 2.0, steps: 50 * problem.clients() * problem.menu().len(), seed }
    }

    #[inline]
    pub fn temperature(&self, k: usize) -> f64 {
        1.0 / (k as f64 + self.k0).ln()
    }
}

/// Share of proposals that shift a random group of clients by one menu level together.
const SHIFT_PROBABILITY: f64 = 0.2;

#[inline]
fn metropolis(f: f64, f_new: f64, t: f64, rng: &mut Rng) -> bool {
    f_new <= f || rng.random::<f64>() < (-(f_new - f) / t).exp()
}

/// Simulated annealing over menu-index vectors. Returns the best
/// IR-feasible allocation visited.
pub fn anneal(problem: &AllocationProblem, schedule: &AnnealSchedule) -> Result<Allocation> {
    if !(schedule.k0 > 1.0) {
        return Err(Error::Argument(format!("k0 must exceed 1, got {}", schedule.k0)));
    }
    if schedule.steps == 0 {
        return Err(Error::Argument("annealing needs at least one step".into()));
    }
    let mut rng = <Rng as rand::SeedableRng>::seed_from_u64(schedule.seed);
    let n = problem.clients();
    let m = problem.menu().len();
    let top = m - 1;

    let mut state = vec![top; n];
    let mut f = problem.cost_of(&state);
    let mut best = state.clone();
    let mut best_f = f;

    for k in 1..=schedule.steps {
        let t = schedule.temperature(k);
        if rng.random::<f64>() < SHIFT_PROBABILITY {
            // group move: a random subset of clients shifts one menu level together
            let up = rng.random::<bool>();
            let members: Vec<usize> = (0..n).filter(|_| rng.random::<bool>()).collect();
            let feasible = !members.is_empty() && members.iter().all(|&i| {
                if up { state[i] < top } else { state[i] > 0 && problem.admissible(i, state[i] - 1) }
            });
            if !feasible {
                continue;
            }
            let prev = state.clone();
            for &i in &members {
                if up { state[i] += 1 } else { state[i] -= 1 }
            }
            let f_new = problem.cost_of(&state);
            if metropolis(f, f_new, t, &mut rng) {
                f = f_new;
                if f < best_f {
                    best_f = f;
                    best.copy_from_slice(&state);
                }
            } else {
                state = prev;
            }
            continue;
        }
        let i = rng.random_range(0..n);
        let current = state[i];
        let proposed = if rng.random::<f64>() < 0.8 {
            if m == 1 {
                current
            } else {
                let up = rng.random::<bool>();
                match (up, current) {
                    (true, c) if c == top => c - 1,
                    (true, c) => c + 1,
                    (false, 0) => 1,
                    (false, c) => c - 1,
                }
            }
        } else {
            rng.random_range(0..m)
        };
        if proposed == current || !problem.admissible(i, proposed) {
            continue;
        }
        state[i] = proposed;
        let f_new = problem.cost_of(&state);
        if metropolis(f, f_new, t, &mut rng) {
            f = f_new;
            if f < best_f {
                best_f = f;
                best.copy_from_slice(&state);
            }
        } else {
            state[i] = current;
        }
    }
    Ok(problem.allocation(best))
}

/// Exact minimizer by enumeration. Ties go to the lexicographically
/// smallest index vector.
pub fn brute_force(problem: &AllocationProblem) -> Result<Allocation> {
    let n = problem.clients();
    let m = problem.menu().len();
    let states = (m as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if states > BRUTE_FORCE_LIMIT {
        return Err(Error::Capacity { states, limit: BRUTE_FORCE_LIMIT });
    }
    // enumerate only the IR-admissible box, odometer with the last client fastest
    let mut state: Vec<usize> = problem.floor.clone();
    let mut best = state.clone();
    let mut best_f = problem.cost_of(&state);
    'enumerate: loop {
        let mut pos = n;
        loop {
            if pos == 0 {
                break 'enumerate;
            }
            pos -= 1;
            if state[pos] + 1 < m {
                state[pos] += 1;
                break;
            }
            state[pos] = problem.floor[pos];
        }
        let f = problem.cost_of(&state);
        if f < best_f {
            best_f = f;
            best.copy_from_slice(&state);
        }
    }
    Ok(problem.allocation(best))
}

/// Measured accuracy of the global model at each width bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthProfile {
    pub widths: Vec<f64>,
    pub accuracies: Vec<f64>,
}

impl WidthProfile {
    pub fn new(widths: Vec<f64>, accuracies: Vec<f64>) -> Result<Self> {
        if widths.is_empty() {
            return Err(Error::Config("width profile is empty".into()));
        }
        if widths.len() != accuracies.len() {
            return Err(Error::Config(format!(
                "{} widths but {} accuracies in profile",
                widths.len(),
                accuracies.len()
            )));
        }
        if widths.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("profile widths must be strictly ascending".into()));
        }
        Ok(Self { widths, accuracies })
    }

    /// Accuracies of the buckets that beat every narrower bucket. A bucket
    /// that does not is never the smallest bucket reaching its own accuracy,
    /// so leaving it out keeps [`accuracy_to_width`] exact on menu entries.
    pub fn menu(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for &a in &self.accuracies {
            if out.last().is_none_or(|&last| a > last) {
                out.push(a);
            }
        }
        out
    }

    pub fn p_max(&self) -> f64 {
        *self.widths.last().unwrap()
    }
}

/// Smallest bucket whose measured accuracy reaches each target, else `p_max`.
pub fn accuracy_to_width(targets: &[f64], profile: &WidthProfile) -> Result<Vec<f64>> {
    if profile.widths.is_empty() {
        return Err(Error::Config("width profile is empty".into()));
    }
    Ok(targets
        .iter()
        .map(|&t| {
            profile
                .widths
                .iter()
                .zip(&profile.accuracies)
                .find(|(_, &a)| a >= t)
                .map_or(profile.p_max(), |(&w, _)| w)
        })
        .collect())
}

/// Sorts contributions ascending (ties by client id) and returns the permutation.
fn sort_order(contributions: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..contributions.len()).collect();
    order.sort_by(|&a, &b| contributions[a].total_cmp(&contributions[b]).then(a.cmp(&b)));
    order
}

/// Rewards widths directly: anneals normalized contributions `c_i / max c`
/// against the width grid. Returns one width per client, in input order.
pub fn width_as_reward(contributions: &[f64], widths: &[f64], epsilon: f64, seed: u64) -> Result<Vec<f64>> {
    let max = contributions.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return Err(Error::Degenerate("width rewards need a positive contribution".into()));
    }
    let order = sort_order(contributions);
    let normalized: Vec<f64> = order.iter().map(|&i| (contributions[i] / max).max(0.0)).collect();
    let problem = AllocationProblem::new(normalized, widths.to_vec(), epsilon)?;
    let schedule = AnnealSchedule::for_problem(&problem, seed);
    let alloc = anneal(&problem, &schedule)?;
    let mut out = vec![0.0; contributions.len()];
    for (rank, &client) in order.iter().enumerate() {
        out[client] = alloc.accuracies[rank];
    }
    Ok(out)
}

/// One line of the allocation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationRow {
    pub client_id: usize,
    pub contribution: f64,
    pub accuracy: f64,
    pub width: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationOutcome {
    pub rows: Vec<AllocationRow>,
    pub warning: Option<String>,
}

/// Full post-training allocation for clients in arbitrary order: sort, anneal
/// over the profile's menu, map accuracies back to widths.
pub fn allocate(contributions: &[f64], profile: &WidthProfile, epsilon: f64, seed: u64) -> Result<AllocationOutcome> {
    let order = sort_order(contributions);
    let sorted: Vec<f64> = order.iter().map(|&i| contributions[i]).collect();
    let problem = AllocationProblem::new(sorted, profile.menu(), epsilon)?;
    let warning = problem.feasibility_warning();
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    let alloc = anneal(&problem, &AnnealSchedule::for_problem(&problem, seed))?;
    let widths = accuracy_to_width(&alloc.accuracies, profile)?;
    let mut rows: Vec<AllocationRow> = order
        .iter()
        .enumerate()
        .map(|(rank, &client)| AllocationRow {
            client_id: client,
            contribution: contributions[client],
            accuracy: alloc.accuracies[rank],
            width: widths[rank],
            gain: alloc.gains[rank],
        })
        .collect();
    rows.sort_by_key(|r| r.client_id);
    Ok(AllocationOutcome { rows, warning })
}

pub const CSV_HEADER: [&str; 5] = ["client_id", "contribution", "accuracy", "width", "gain"];

pub fn write_csv<W: Write>(rows: &[AllocationRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.client_id.to_string(),
            r.contribution.to_string(),
            r.accuracy.to_string(),
            r.width.to_string(),
            r.gain.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn problem(c: &[f64], menu: &[f64], eps: f64) -> AllocationProblem {
        AllocationProblem::new(c.to_vec(), menu.to_vec(), eps).unwrap()
    }

    #[test]
    fn cost_hand_values() {
        let p = problem(&[0.2, 0.4], &[0.5, 0.7], 0.01);
        let a = p.allocation(vec![0, 1]);
        assert!((cost(&a, &p) + 30.0).abs() < 1e-9);

        let p = problem(&[0.0, 0.0], &[0.0, 1.0], 1.0);
        let a = p.allocation(vec![1, 0]);
        assert!((cost(&a, &p) + 0.4).abs() < 1e-12);
    }

    #[test]
    fn uniform_shift_lowers_cost() {
        let p = problem(&[0.1, 0.3], &[0.2, 0.35, 0.4, 0.55], 1e-3);
        let base = p.cost_of(&[0, 1]);
        let shifted = p.cost_of(&[1, 3]);
        assert!(shifted < base);
    }

    #[test]
    fn ir_cases() {
        let p = problem(&[0.2, 0.4], &[0.2, 0.3, 0.4, 0.5], 1e-3);
        assert!(is_ir(&p.allocation(vec![0, 2])));
        assert!(!is_ir(&p.allocation(vec![0, 1])));
        assert!(is_ir(&p.allocation(vec![1, 3])));
    }

    #[test]
    fn infeasible_menu_is_rejected() {
        let err = AllocationProblem::new(vec![0.5, 0.9], vec![0.6, 0.8], 1e-3).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn feasibility_warning_fires_when_floor_too_high() {
        assert!(problem(&[0.2, 0.6], &[0.5, 0.7], 1e-3).feasibility_warning().is_some());
        assert!(problem(&[0.2, 0.6], &[0.3, 0.7], 1e-3).feasibility_warning().is_none());
    }

    #[test]
    fn singleton_menu() {
        let p = problem(&[0.1, 0.5, 0.6], &[0.8], 1e-3);
        let a = anneal(&p, &AnnealSchedule::for_problem(&p, 1)).unwrap();
        assert_eq!(a.indices, vec![0, 0, 0]);
        assert_eq!(brute_force(&p).unwrap().indices, vec![0, 0, 0]);
    }

    #[test]
    fn single_client_takes_the_top() {
        let p = problem(&[0.5], &[0.6, 0.9], 1e-3);
        assert_eq!(brute_force(&p).unwrap().accuracies, vec![0.9]);
    }

    /// Straight nested-loop enumeration, independent of the odometer.
    fn enumerate_two(p: &AllocationProblem) -> (usize, usize) {
        let mut best = (usize::MAX, usize::MAX);
        let mut best_f = f64::INFINITY;
        for a in 0..p.menu().len() {
            for b in 0..p.menu().len() {
                if p.menu()[a] < p.contributions()[0] || p.menu()[b] < p.contributions()[1] {
                    continue;
                }
                let f = p.cost_of(&[a, b]);
                if f < best_f {
                    best_f = f;
                    best = (a, b);
                }
            }
        }
        best
    }

    #[test]
    fn two_client_brute_force_matches_enumeration() {
        let p = problem(&[0.3, 0.6], &[0.6, 0.7, 1.0], DEFAULT_EPSILON);
        let (a, b) = enumerate_two(&p);
        // gains (0.4, 0.4) at (0.7, 1.0) equalize exactly
        assert_eq!((a, b), (1, 2));
        assert_eq!(brute_force(&p).unwrap().indices, vec![a, b]);
    }

    #[test]
    fn brute_force_capacity_limit() {
        let menu: Vec<f64> = (0..100).map(|k| 0.5 + k as f64 * 0.005).collect();
        let p = problem(&[0.1; 5], &menu, 1e-3);
        assert!(matches!(brute_force(&p), Err(Error::Capacity { .. })));
    }

    #[test]
    fn anneal_matches_oracle_on_four_clients() {
        let menu: Vec<f64> = (0..6).map(|k| 0.4 + 0.12 * k as f64).collect();
        let p = problem(&[0.1, 0.2, 0.3, 0.4], &menu, DEFAULT_EPSILON);
        let exact = brute_force(&p).unwrap();
        let sa = anneal(&p, &AnnealSchedule { k0: 2.0, steps: 20_000, seed: 3 }).unwrap();
        assert_eq!(cost(&sa, &p), cost(&exact, &p));
    }

    #[test]
    fn fine_menu_recovers_constant_shift() {
        let c = [0.31, 0.45, 0.52, 0.66, 0.7];
        let u = 0.9;
        let l = c[0] + (u - c[4]);
        let menu: Vec<f64> = (0..101).map(|k| l + (u - l) * k as f64 / 100.0).collect();
        let step = (u - l) / 100.0;
        // ε must be small next to step² or trading variance for mean pays off
        let p = problem(&c, &menu, 1e-6);
        let a = anneal(&p, &AnnealSchedule::for_problem(&p, 9)).unwrap();
        for (ai, ci) in a.accuracies.iter().zip(&c) {
            assert!((ai - (ci + u - c[4])).abs() <= step + 1e-12, "{ai} vs {}", ci + u - c[4]);
        }
    }

    #[test]
    fn anneal_is_deterministic_per_seed() {
        let menu: Vec<f64> = (0..8).map(|k| 0.5 + 0.05 * k as f64).collect();
        let p = problem(&[0.2, 0.3, 0.35, 0.5, 0.8], &menu, DEFAULT_EPSILON);
        let s = AnnealSchedule::for_problem(&p, 42);
        assert_eq!(anneal(&p, &s).unwrap(), anneal(&p, &s).unwrap());
    }

    #[test]
    fn profile_menu_drops_dominated_buckets() {
        let prof = WidthProfile::new(vec![0.25, 0.5, 0.75, 1.0], vec![0.7, 0.65, 0.8, 0.8]).unwrap();
        assert_eq!(prof.menu(), vec![0.7, 0.8]);
        assert_eq!(accuracy_to_width(&[0.7, 0.8], &prof).unwrap(), vec![0.25, 0.75]);
    }

    #[test]
    fn accuracy_to_width_cases() {
        let prof = WidthProfile::new(vec![0.25, 0.5, 1.0], vec![0.6, 0.7, 0.9]).unwrap();
        assert_eq!(accuracy_to_width(&[0.9], &prof).unwrap(), vec![1.0]);
        assert_eq!(accuracy_to_width(&[0.1], &prof).unwrap(), vec![0.25]);
        assert_eq!(accuracy_to_width(&[0.95], &prof).unwrap(), vec![1.0]);
        let menu = prof.menu();
        assert_eq!(accuracy_to_width(&menu, &prof).unwrap(), prof.widths);
        assert!(WidthProfile::new(vec![], vec![]).is_err());
    }

    #[test]
    fn width_rewards() {
        let grid: Vec<f64> = (0..=75).map(|k| 0.25 + 0.01 * k as f64).collect();
        assert_eq!(width_as_reward(&[0.4, 0.4, 0.4], &grid, DEFAULT_EPSILON, 1).unwrap(), vec![1.0; 3]);

        let c = [0.5, 0.9, 0.6, 0.7];
        let w = width_as_reward(&c, &grid, DEFAULT_EPSILON, 1).unwrap();
        assert_eq!(w[1], 1.0);
        assert!(w[0] < w[2] && w[2] < w[3] && w[3] < w[1], "{w:?}");
        assert!(matches!(width_as_reward(&[0.0, 0.0], &grid, 1e-3, 1), Err(Error::Degenerate(_))));
    }

    #[test]
    fn allocate_restores_client_order() {
        let prof = WidthProfile::new(vec![0.25, 0.5, 0.75, 1.0], vec![0.55, 0.65, 0.75, 0.85]).unwrap();
        let out = allocate(&[0.7, 0.5, 0.6], &prof, DEFAULT_EPSILON, 3).unwrap();
        let ids: Vec<usize> = out.rows.iter().map(|r| r.client_id).collect();
        assert_eq!(ids, vec![0, 1, 2]);
        assert_eq!(out.rows[0].width, 1.0);
        assert!(out.rows.iter().all(|r| r.gain >= 0.0));
        let mut buf = Vec::new();
        write_csv(&out.rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("client_id,contribution,accuracy,width,gain\n"));
        assert_eq!(text.lines().count(), 4);
    }

    fn dyadic() -> impl Strategy<Value = f64> {
        (0u32..=32).prop_map(|k| k as f64 / 64.0)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn optimum_is_shift_covariant(
            mut c in prop::collection::vec(dyadic(), 2..4),
            extra in prop::collection::btree_set(0u32..=32, 1..6),
            delta in (0u32..16).prop_map(|k| k as f64 / 64.0),
        ) {
            c.sort_by(f64::total_cmp);
            let top = *c.last().unwrap();
            let mut menu: Vec<f64> = extra.into_iter().map(|k| k as f64 / 64.0).collect();
            if *menu.last().unwrap() < top { menu.push(top); }
            let p1 = problem(&c, &menu, 1e-3);
            let c2: Vec<f64> = c.iter().map(|v| v + delta).collect();
            let m2: Vec<f64> = menu.iter().map(|v| v + delta).collect();
            let p2 = problem(&c2, &m2, 1e-3);
            prop_assert_eq!(brute_force(&p1).unwrap().indices, brute_force(&p2).unwrap().indices);
        }

        #[test]
        fn allocations_are_ir_and_top_gets_max(
            mut c in prop::collection::vec(0.05f64..0.8, 2..5),
            seed in 0u64..1000,
        ) {
            c.sort_by(f64::total_cmp);
            let menu: Vec<f64> = (0..6).map(|k| 0.3 + 0.1 * k as f64).collect();
            let p = problem(&c, &menu, 1e-3);
            let bf = brute_force(&p).unwrap();
            let sa = anneal(&p, &AnnealSchedule::for_problem(&p, seed)).unwrap();
            prop_assert!(is_ir(&bf) && is_ir(&sa));
            if c[c.len() - 1] > c[c.len() - 2] {
                prop_assert_eq!(*bf.indices.last().unwrap(), 5);
            }
        }
    }
}


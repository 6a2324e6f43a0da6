//! Allocation strategies: greedy marginal-gain, uniform, and the exact
//! dynamic-programming optimum used as a verification oracle.

use crate::allocator::plan::AllocationPlan;
use crate::error::{Error, Result};
use crate::grid::BudgetGrid;
use crate::profiles::EarlyStopProfile;

/// How the greedy allocator reads marginal gains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GreedyMode {
    /// Raw successive differences of the profile; stops at max gain <= 0
    /// even if later windows would help.
    #[default]
    Faithful,
    /// Gains from each profile's least concave majorant, so a later rise in
    /// a non-monotone profile is visible through the envelope. Heuristic;
    /// plans are still scored on the raw profiles.
    Lookahead,
}

/// Mean over queries of the true correctness probability at each query's
/// allocated budget.
pub fn expected_accuracy(
    true_profiles: &[EarlyStopProfile],
    plan: &AllocationPlan,
    grid: &BudgetGrid,
) -> Result<f64> {
    if true_profiles.len() != plan.len() {
        return Err(Error::ShapeMismatch(format!(
            "plan covers {} queries but batch has {}",
            plan.len(),
            true_profiles.len()
        )));
    }
    if plan.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut sum = 0.0;
    for (profile, &tokens) in true_profiles.iter().zip(plan.allocations()) {
        sum += profile.prob_at(grid.index_of(tokens)?);
    }
    Ok(sum / plan.len() as f64)
}

/// Marginal expected-accuracy gain of adding one more window to each query,
/// with `-inf` for queries already at the grid maximum.
pub fn compute_gains(
    profiles: &[EarlyStopProfile],
    allocations: &[u32],
    grid: &BudgetGrid,
) -> Result<Vec<f64>> {
    if profiles.len() != allocations.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} profiles vs {} allocations",
            profiles.len(),
            allocations.len()
        )));
    }
    profiles
        .iter()
        .zip(allocations)
        .map(|(profile, &tokens)| {
            let j = grid.index_of(tokens)?;
            Ok(if j + 1 == grid.num_windows() {
                f64::NEG_INFINITY
            } else {
                profile.prob_at(j + 1) - profile.prob_at(j)
            })
        })
        .collect()
}

fn gain_at(values: &[f64], windows: usize, k: usize) -> f64 {
    if windows == k {
        f64::NEG_INFINITY
    } else {
        values[windows] - values[windows - 1]
    }
}

/// Least concave majorant of the profile values over the window indices.
fn concave_envelope(probs: &[f64]) -> Vec<f64> {
    let n = probs.len();
    // Upper convex hull over points (j, p_j), then linear interpolation.
    let mut hull: Vec<usize> = Vec::with_capacity(n);
    for j in 0..n {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (b - a) as f64 * (probs[j] - probs[a]) - (j - a) as f64 * (probs[b] - probs[a]);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(j);
    }
    let mut env = vec![0.0; n];
    for pair in hull.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        for j in a..=b {
            let t = (j - a) as f64 / (b - a) as f64;
            env[j] = probs[a] + t * (probs[b] - probs[a]);
        }
    }
    if hull.len() == 1 {
        env[hull[0]] = probs[hull[0]];
    }
    env
}

/// Greedy token allocation: start every query at one window, then repeatedly
/// give one window to the query with the highest marginal gain until the
/// budget runs out or no positive gain remains. Ties break to the lowest
/// query index.
///
/// `avg_budget_b` must be a positive multiple of the window size; it may
/// exceed the grid maximum, in which case surplus budget is left unspent
/// once every query saturates.
pub fn greedy_allocate(
    profiles: &[EarlyStopProfile],
    avg_budget_b: u32,
    grid: &BudgetGrid,
    mode: GreedyMode,
) -> Result<AllocationPlan> {
    if profiles.is_empty() {
        return Err(Error::EmptyBatch);
    }
    grid.check_window_multiple(avg_budget_b)?;

    let n = profiles.len();
    let k = grid.num_windows();
    let values: Vec<Vec<f64>> = match mode {
        GreedyMode::Faithful => profiles.iter().map(|p| p.probs().to_vec()).collect(),
        GreedyMode::Lookahead => profiles.iter().map(|p| concave_envelope(p.probs())).collect(),
    };

    let mut windows = vec![1usize; n];
    let budget_windows = (avg_budget_b / grid.window_tokens()) as u64 * n as u64;
    let mut remaining = budget_windows - n as u64;
    let mut gains: Vec<f64> = values.iter().map(|v| gain_at(v, 1, k)).collect();

    while remaining >= 1 {
        let (best, &best_gain) = gains
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| a.partial_cmp(b).unwrap().then(ib.cmp(ia)))
            .expect("batch is non-empty");
        if best_gain <= 0.0 {
            break;
        }
        windows[best] += 1;
        remaining -= 1;
        gains[best] = gain_at(&values[best], windows[best], k);
    }

    let allocations = windows.iter().map(|&w| w as u32 * grid.window_tokens()).collect();
    AllocationPlan::new(allocations, avg_budget_b as u64 * n as u64, grid)
}

/// The non-adaptive baseline: every query gets exactly `avg_budget_b`.
pub fn uniform_allocate(n: usize, avg_budget_b: u32, grid: &BudgetGrid) -> Result<AllocationPlan> {
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    grid.index_of(avg_budget_b)?;
    AllocationPlan::new(vec![avg_budget_b; n], avg_budget_b as u64 * n as u64, grid)
}

const DP_CELL_LIMIT: u128 = 100_000_000;

/// Exact optimum of expected accuracy over grid allocations, by dynamic
/// programming over the total window count (a multiple-choice knapsack).
///
/// Deterministic tie-breaking: among optimal plans the smallest total is
/// preferred, and within it later queries take the smallest optimal budget.
pub fn optimal_allocate_dp(
    true_profiles: &[EarlyStopProfile],
    avg_budget_b: u32,
    grid: &BudgetGrid,
) -> Result<AllocationPlan> {
    if true_profiles.is_empty() {
        return Err(Error::EmptyBatch);
    }
    grid.check_window_multiple(avg_budget_b)?;

    let n = true_profiles.len();
    let k = grid.num_windows();
    let budget_windows = (avg_budget_b / grid.window_tokens()) as u128 * n as u128;
    let cells = n as u128 * k as u128 * budget_windows;
    if cells > DP_CELL_LIMIT {
        return Err(Error::GuardExceeded { cells, limit: DP_CELL_LIMIT });
    }
    let capacity = budget_windows.min((n * k) as u128) as usize;

    let width = capacity + 1;
    let mut value = vec![f64::NEG_INFINITY; (n + 1) * width];
    let mut choice = vec![0u16; (n + 1) * width];
    value[0] = 0.0;

    for i in 1..=n {
        let probs = true_profiles[i - 1].probs();
        for c in i..=capacity.min(i * k) {
            let mut best = f64::NEG_INFINITY;
            let mut best_j = 0u16;
            let max_j = k.min(c - (i - 1));
            for j in 1..=max_j {
                let prev = value[(i - 1) * width + (c - j)];
                if prev == f64::NEG_INFINITY {
                    continue;
                }
                let cand = prev + probs[j - 1];
                if cand > best {
                    best = cand;
                    best_j = j as u16;
                }
            }
            value[i * width + c] = best;
            choice[i * width + c] = best_j;
        }
    }

    let mut best_c = n;
    let mut best_value = f64::NEG_INFINITY;
    for c in n..=capacity {
        let v = value[n * width + c];
        if v > best_value {
            best_value = v;
            best_c = c;
        }
    }
    if best_value == f64::NEG_INFINITY {
        return Err(Error::Infeasible(format!(
            "{capacity} windows cannot give {n} queries one window each"
        )));
    }

    let mut allocations = vec![0u32; n];
    let mut c = best_c;
    for i in (1..=n).rev() {
        let j = choice[i * width + c] as usize;
        allocations[i - 1] = j as u32 * grid.window_tokens();
        c -= j;
    }
    AllocationPlan::new(allocations, avg_budget_b as u64 * n as u64, grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(probs: &[f64], grid: &BudgetGrid) -> EarlyStopProfile {
        EarlyStopProfile::new(probs.to_vec(), grid).unwrap()
    }

    fn paper_grid() -> BudgetGrid {
        BudgetGrid::default()
    }

    fn ramp(k: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..k).map(|j| lo + (hi - lo) * j as f64 / (k - 1) as f64).collect()
    }

    #[test]
    fn expected_accuracy_single_lookup() {
        let grid = paper_grid();
        let mut probs = ramp(16, 0.1, 0.8);
        probs[15] = 0.9;
        let profiles = vec![profile(&probs, &grid)];
        let plan = AllocationPlan::new(vec![256], 256, &grid).unwrap();
        assert_eq!(expected_accuracy(&profiles, &plan, &grid).unwrap(), 0.9);
    }

    #[test]
    fn expected_accuracy_zero_profiles() {
        let grid = paper_grid();
        let profiles = vec![profile(&[0.0; 16], &grid); 3];
        let plan = AllocationPlan::new(vec![16, 128, 256], 1024, &grid).unwrap();
        assert_eq!(expected_accuracy(&profiles, &plan, &grid).unwrap(), 0.0);
    }

    #[test]
    fn expected_accuracy_matches_per_index_oracle() {
        let grid = BudgetGrid::new(16, 4).unwrap();
        let batch =
            vec![profile(&[0.1, 0.2, 0.3, 0.4], &grid), profile(&[0.9, 0.8, 0.7, 0.6], &grid), profile(&[0.0, 1.0, 0.5, 0.25], &grid)];
        let plan = AllocationPlan::new(vec![16, 48, 32], 192, &grid).unwrap();
        // Oracle: look indices up by hand and average.
        let oracle = (0.1 + 0.7 + 1.0) / 3.0;
        assert!((expected_accuracy(&batch, &plan, &grid).unwrap() - oracle).abs() < 1e-15);
    }

    #[test]
    fn expected_accuracy_rejects_length_mismatch() {
        let grid = paper_grid();
        let profiles = vec![profile(&[0.0; 16], &grid)];
        let plan = AllocationPlan::new(vec![16, 16], 64, &grid).unwrap();
        assert!(matches!(
            expected_accuracy(&profiles, &plan, &grid),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn gains_direct_difference_and_sentinel() {
        let grid = paper_grid();
        let mut a = vec![0.2, 0.5];
        a.extend(ramp(14, 0.5, 0.9));
        let mut b = vec![0.4, 0.3];
        b.extend(ramp(14, 0.3, 0.6));
        let profiles = vec![profile(&a, &grid), profile(&b, &grid), profile(&ramp(16, 0.0, 1.0), &grid)];
        let gains = compute_gains(&profiles, &[16, 16, 256], &grid).unwrap();
        assert!((gains[0] - 0.3).abs() < 1e-15);
        assert!((gains[1] + 0.1).abs() < 1e-15, "negative gains are legal: {}", gains[1]);
        assert_eq!(gains[2], f64::NEG_INFINITY);
    }

    #[test]
    fn greedy_monotone_single_query_saturates() {
        let grid = paper_grid();
        let profiles = vec![profile(&ramp(16, 0.05, 0.95), &grid)];
        let plan = greedy_allocate(&profiles, 256, &grid, GreedyMode::Faithful).unwrap();
        assert_eq!(plan.allocations(), &[256]);
    }

    #[test]
    fn greedy_two_query_worked_example() {
        // A = [0.0, 0.9, 0.9, ...], C = [0.5, 0.6, 0.7, ...]; B = 32, W = 16.
        // Hand trace: allocations start [16, 16], remaining = 2B - 32 = 32.
        // Step 1 gains are (0.9, 0.1) -> A takes a window, remaining 16.
        // Step 2 gains are (0.0, 0.1) -> C takes a window, remaining 0.
        let grid = paper_grid();
        let mut a = vec![0.0];
        a.extend(vec![0.9; 15]);
        let mut c = Vec::new();
        for j in 0..16 {
            c.push((0.5 + 0.1 * j as f64).min(1.0));
        }
        let profiles = vec![profile(&a, &grid), profile(&c, &grid)];
        let plan = greedy_allocate(&profiles, 32, &grid, GreedyMode::Faithful).unwrap();
        assert_eq!(plan.allocations(), &[32, 32]);
        // Same trace by an independent simulation of the published loop.
        let oracle = simulate_greedy(&[&a, &c], 32, 16);
        assert_eq!(plan.allocations(), &oracle[..]);
    }

    /// Literal transcription of the greedy pseudocode, kept separate from
    /// the production implementation.
    fn simulate_greedy(profiles: &[&Vec<f64>], b: u32, w: u32) -> Vec<u32> {
        let n = profiles.len();
        let mut allocations = vec![w; n];
        let mut remaining = b as i64 * n as i64 - allocations.iter().map(|&a| a as i64).sum::<i64>();
        while remaining >= w as i64 {
            let gains: Vec<f64> = profiles
                .iter()
                .zip(&allocations)
                .map(|(p, &a)| {
                    let j = (a / w - 1) as usize;
                    if j + 1 >= p.len() {
                        f64::NEG_INFINITY
                    } else {
                        p[j + 1] - p[j]
                    }
                })
                .collect();
            let best = gains.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if best <= 0.0 {
                break;
            }
            let i = gains.iter().position(|&g| g == best).unwrap();
            allocations[i] += w;
            remaining -= w as i64;
        }
        allocations
    }

    #[test]
    fn greedy_flat_profiles_stay_at_minimum() {
        let grid = paper_grid();
        let profiles = vec![profile(&[0.4; 16], &grid); 5];
        let plan = greedy_allocate(&profiles, 128, &grid, GreedyMode::Faithful).unwrap();
        assert!(plan.allocations().iter().all(|&a| a == 16));
        assert_eq!(plan.total_allocated(), 5 * 16);
    }

    #[test]
    fn greedy_ties_break_to_lowest_index() {
        let grid = BudgetGrid::new(16, 3).unwrap();
        // Both steps tie at gain 0.4; the lowest index wins each time,
        // so query 0 climbs to 48 while query 1 stays at the minimum.
        let profiles = vec![profile(&[0.0, 0.4, 0.8], &grid), profile(&[0.0, 0.4, 0.4], &grid)];
        let plan = greedy_allocate(&profiles, 32, &grid, GreedyMode::Faithful).unwrap();
        assert_eq!(plan.allocations(), &[48, 16]);
    }

    #[test]
    fn greedy_rejects_off_window_budget() {
        let grid = BudgetGrid::new(16, 3).unwrap();
        let profiles = vec![profile(&[0.0, 0.4, 0.8], &grid)];
        assert!(matches!(
            greedy_allocate(&profiles, 24, &grid, GreedyMode::Faithful),
            Err(Error::BudgetOffGrid { .. })
        ));
    }

    #[test]
    fn greedy_rejects_budget_below_window() {
        let grid = paper_grid();
        let profiles = vec![profile(&ramp(16, 0.0, 1.0), &grid)];
        assert!(matches!(
            greedy_allocate(&profiles, 8, &grid, GreedyMode::Faithful),
            Err(Error::BudgetTooSmall { .. })
        ));
    }

    #[test]
    fn uniform_is_constant() {
        let grid = paper_grid();
        let plan = uniform_allocate(3, 64, &grid).unwrap();
        assert_eq!(plan.allocations(), &[64, 64, 64]);
        let plan = uniform_allocate(1, 16, &grid).unwrap();
        assert_eq!(plan.allocations(), &[16]);
        assert!(uniform_allocate(3, 24, &grid).is_err());
    }

    #[test]
    fn uniform_at_max_budget_scores_mean_of_final_entries() {
        let grid = BudgetGrid::new(16, 4).unwrap();
        let batch = vec![
            profile(&[0.0, 0.1, 0.2, 0.3], &grid),
            profile(&[0.5, 0.5, 0.5, 0.9], &grid),
        ];
        let plan = uniform_allocate(2, 64, &grid).unwrap();
        let acc = expected_accuracy(&batch, &plan, &grid).unwrap();
        assert!((acc - (0.3 + 0.9) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn dp_single_query_takes_profile_argmax_within_budget() {
        let grid = BudgetGrid::new(16, 6).unwrap();
        let batch = vec![profile(&[0.1, 0.8, 0.3, 0.8, 0.2, 0.4], &grid)];
        let plan = optimal_allocate_dp(&batch, 96, &grid).unwrap();
        // First argmax on ties: 32 tokens (index 1), not 64.
        assert_eq!(plan.allocations(), &[32]);
        let capped = optimal_allocate_dp(&batch, 16, &grid).unwrap();
        assert_eq!(capped.allocations(), &[16]);
    }

    /// Brute-force enumeration oracle over all grid plans.
    fn enumerate_best(profiles: &[EarlyStopProfile], b: u32, grid: &BudgetGrid) -> f64 {
        let n = profiles.len();
        let k = grid.num_windows();
        let budget_windows = (b / grid.window_tokens()) as usize * n;
        let mut best = f64::NEG_INFINITY;
        let mut stack = vec![1usize; n];
        loop {
            let total: usize = stack.iter().sum();
            if total <= budget_windows {
                let v: f64 =
                    stack.iter().zip(profiles).map(|(&w, p)| p.prob_at(w - 1)).sum();
                if v > best {
                    best = v;
                }
            }
            // odometer increment
            let mut idx = 0;
            loop {
                if idx == n {
                    return best / n as f64;
                }
                stack[idx] += 1;
                if stack[idx] <= k {
                    break;
                }
                stack[idx] = 1;
                idx += 1;
            }
        }
    }

    #[test]
    fn dp_matches_enumeration_on_small_instances() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for trial in 0..40 {
            let k = rng.gen_range(2..=6);
            let n = rng.gen_range(1..=4);
            let grid = BudgetGrid::new(16, k).unwrap();
            let profiles: Vec<EarlyStopProfile> = (0..n)
                .map(|_| {
                    let probs: Vec<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
                    EarlyStopProfile::new(probs, &grid).unwrap()
                })
                .collect();
            let b = 16 * rng.gen_range(1..=k);
            let plan = optimal_allocate_dp(&profiles, b, &grid).unwrap();
            let dp_acc = expected_accuracy(&profiles, &plan, &grid).unwrap();
            let brute = enumerate_best(&profiles, b, &grid);
            assert!(
                (dp_acc - brute).abs() < 1e-12,
                "trial {trial}: dp {dp_acc} vs enumeration {brute}"
            );
        }
    }

    #[test]
    fn dp_dominates_greedy_and_uniform() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let grid = paper_grid();
        for _ in 0..25 {
            let n = rng.gen_range(1..=6);
            let profiles: Vec<EarlyStopProfile> = (0..n)
                .map(|_| {
                    let probs: Vec<f64> = (0..16).map(|_| rng.gen::<f64>()).collect();
                    EarlyStopProfile::new(probs, &grid).unwrap()
                })
                .collect();
            for b in grid.budgets() {
                let dp = optimal_allocate_dp(&profiles, b, &grid).unwrap();
                let greedy = greedy_allocate(&profiles, b, &grid, GreedyMode::Faithful).unwrap();
                let uniform = uniform_allocate(n, b, &grid).unwrap();
                let dp_acc = expected_accuracy(&profiles, &dp, &grid).unwrap();
                let gr_acc = expected_accuracy(&profiles, &greedy, &grid).unwrap();
                let un_acc = expected_accuracy(&profiles, &uniform, &grid).unwrap();
                assert!(dp_acc >= gr_acc - 1e-12);
                assert!(dp_acc >= un_acc - 1e-12);
            }
        }
    }

    #[test]
    fn dp_guard_trips_on_huge_instances() {
        let grid = paper_grid();
        let profiles = vec![profile(&ramp(16, 0.0, 1.0), &grid); 2000];
        assert!(matches!(
            optimal_allocate_dp(&profiles, 256, &grid),
            Err(Error::GuardExceeded { .. })
        ));
    }

    #[test]
    fn lookahead_envelope_sees_later_rise() {
        let grid = BudgetGrid::new(16, 4).unwrap();
        // Dip then jump: faithful greedy stalls at one window, lookahead climbs.
        let batch = vec![profile(&[0.3, 0.2, 0.2, 0.9], &grid)];
        let faithful = greedy_allocate(&batch, 64, &grid, GreedyMode::Faithful).unwrap();
        assert_eq!(faithful.allocations(), &[16]);
        let look = greedy_allocate(&batch, 64, &grid, GreedyMode::Lookahead).unwrap();
        assert_eq!(look.allocations(), &[64]);
    }

    #[test]
    fn concave_envelope_majorizes_and_is_concave() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let k = rng.gen_range(1..=16);
            let probs: Vec<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
            let env = concave_envelope(&probs);
            for j in 0..k {
                assert!(env[j] >= probs[j] - 1e-12);
            }
            for j in 2..k {
                let d1 = env[j - 1] - env[j - 2];
                let d2 = env[j] - env[j - 1];
                assert!(d2 <= d1 + 1e-9, "marginals must be non-increasing");
            }
        }
    }
}

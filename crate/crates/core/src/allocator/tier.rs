//! Difficulty-tier allocation: exhaustive search for the best per-class
//! budget triple, and the per-query lookup that applies it.

use crate::allocator::plan::{AllocationPlan, TierBudgets};
use crate::error::{Error, Result};
use crate::grid::BudgetGrid;
use crate::profiles::{ClassAccuracyCurve, DifficultyLabel};

/// Slack allowed on the `p1*b1 + p2*b2 + p3*b3 <= B` constraint, covering
/// floating-point dot products of exact class fractions.
pub const TIER_FEASIBILITY_EPS: f64 = 1e-9;

/// Objective ties below this are broken by cost, then lexicographically.
const OBJECTIVE_TIE_EPS: f64 = 1e-12;

/// Exhaustively searches all budget triples on the grid for the feasible one
/// maximizing proportion-weighted class accuracy.
///
/// Ties break to the smallest expected cost `p·b`, then to the
/// lexicographically smallest `(b_easy, b_medium, b_hard)`.
pub fn get_optimal_budgets(
    avg_budget_b: u32,
    proportions: [f64; 3],
    curves: &ClassAccuracyCurve,
    grid: &BudgetGrid,
) -> Result<TierBudgets> {
    if proportions.iter().any(|&p| p < 0.0 || !p.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "proportions must be nonnegative, got {proportions:?}"
        )));
    }
    let sum: f64 = proportions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!("proportions must sum to 1, got {sum}")));
    }
    for label in DifficultyLabel::ALL {
        if proportions[label.class_index()] > 0.0 && curves.curve(label).is_none() {
            return Err(Error::MissingCurve(label.to_string()));
        }
    }

    let budgets: Vec<u32> = grid.budgets().collect();
    let class_value = |label: DifficultyLabel, index: usize| -> f64 {
        let p = proportions[label.class_index()];
        if p == 0.0 {
            0.0
        } else {
            p * curves.accuracy_at(label, index).expect("checked above")
        }
    };

    let mut best: Option<(f64, f64, [u32; 3])> = None;
    for (i1, &b1) in budgets.iter().enumerate() {
        let v1 = class_value(DifficultyLabel::Easy, i1);
        for (i2, &b2) in budgets.iter().enumerate() {
            let v2 = v1 + class_value(DifficultyLabel::Medium, i2);
            for (i3, &b3) in budgets.iter().enumerate() {
                let cost = proportions[0] * b1 as f64
                    + proportions[1] * b2 as f64
                    + proportions[2] * b3 as f64;
                if cost > avg_budget_b as f64 + TIER_FEASIBILITY_EPS {
                    continue;
                }
                let objective = v2 + class_value(DifficultyLabel::Hard, i3);
                let triple = [b1, b2, b3];
                let better = match &best {
                    None => true,
                    Some((obj, c, t)) => {
                        objective > obj + OBJECTIVE_TIE_EPS
                            || (objective >= obj - OBJECTIVE_TIE_EPS
                                && (cost < c - OBJECTIVE_TIE_EPS
                                    || ((cost - c).abs() <= OBJECTIVE_TIE_EPS && triple < *t)))
                    }
                };
                if better {
                    best = Some((objective, cost, triple));
                }
            }
        }
    }

    match best {
        Some((_, _, [b_easy, b_medium, b_hard])) => Ok(TierBudgets {
            b_easy,
            b_medium,
            b_hard,
            proportions,
            avg_budget: avg_budget_b,
        }),
        None => Err(Error::Infeasible(format!(
            "no budget triple fits an average budget of {avg_budget_b} tokens"
        ))),
    }
}

/// Assigns each query its class budget from a tier triple.
///
/// The tier is expected to have been computed with the empirical proportions
/// of `labels`; the total budget recorded on the plan is `B * |labels|`.
pub fn difficulty_allocate(
    labels: &[DifficultyLabel],
    tier: &TierBudgets,
    grid: &BudgetGrid,
) -> Result<AllocationPlan> {
    if labels.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let allocations: Vec<u32> = labels.iter().map(|l| tier.budget_for(l.class_index())).collect();
    AllocationPlan::new(allocations, tier.avg_budget as u64 * labels.len() as u64, grid)
}

/// Empirical class proportions (easy, medium, hard) of a label sequence.
pub fn empirical_proportions(labels: &[DifficultyLabel]) -> Result<[f64; 3]> {
    if labels.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut counts = [0usize; 3];
    for label in labels {
        counts[label.class_index()] += 1;
    }
    let n = labels.len() as f64;
    Ok(counts.map(|c| c as f64 / n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{class_accuracy_curves, EarlyStopProfile, QueryRecord};

    fn curves_from(
        entries: &[(DifficultyLabel, Vec<f64>)],
        grid: &BudgetGrid,
    ) -> ClassAccuracyCurve {
        let batch: Vec<QueryRecord> = entries
            .iter()
            .enumerate()
            .map(|(i, (label, probs))| {
                QueryRecord::new(format!("q{i}"))
                    .with_profile(EarlyStopProfile::new(probs.clone(), grid).unwrap())
                    .with_difficulty(*label)
            })
            .collect();
        class_accuracy_curves(&batch, grid).unwrap()
    }

    #[test]
    fn single_class_monotone_takes_max_budget() {
        let grid = BudgetGrid::new(16, 4).unwrap();
        let curves = curves_from(&[(DifficultyLabel::Easy, vec![0.1, 0.4, 0.6, 0.9])], &grid);
        let tier = get_optimal_budgets(64, [1.0, 0.0, 0.0], &curves, &grid).unwrap();
        assert_eq!(tier.b_easy, 64);
        // Zero-proportion classes fall back to the smallest budget.
        assert_eq!((tier.b_medium, tier.b_hard), (16, 16));
    }

    #[test]
    fn matches_triple_loop_enumeration_oracle() {
        let grid = BudgetGrid::new(16, 4).unwrap();
        let curves = curves_from(
            &[
                (DifficultyLabel::Easy, vec![0.5, 0.7, 0.75, 0.8]),
                (DifficultyLabel::Medium, vec![0.05, 0.3, 0.6, 0.7]),
            ],
            &grid,
        );
        let proportions = [0.5, 0.5, 0.0];
        let b = 48;
        let tier = get_optimal_budgets(b, proportions, &curves, &grid).unwrap();

        // Independent enumeration with explicit loops over the 4^3 triples.
        let easy = curves.curve(DifficultyLabel::Easy).unwrap();
        let med = curves.curve(DifficultyLabel::Medium).unwrap();
        let mut best_obj = f64::NEG_INFINITY;
        let mut best_triple = None;
        for b1 in [16u32, 32, 48, 64] {
            for b2 in [16u32, 32, 48, 64] {
                for b3 in [16u32, 32, 48, 64] {
                    let cost = 0.5 * b1 as f64 + 0.5 * b2 as f64;
                    if cost > b as f64 + 1e-9 {
                        continue;
                    }
                    let obj = 0.5 * easy[(b1 / 16 - 1) as usize] + 0.5 * med[(b2 / 16 - 1) as usize];
                    if obj > best_obj + 1e-12 {
                        best_obj = obj;
                        best_triple = Some((b1, b2, b3));
                    }
                }
            }
        }
        let (b1, b2, _) = best_triple.unwrap();
        assert!((tier.expected_cost() - (0.5 * b1 as f64 + 0.5 * b2 as f64)).abs() < 1e-9);
        let got_obj = 0.5 * easy[(tier.b_easy / 16 - 1) as usize]
            + 0.5 * med[(tier.b_medium / 16 - 1) as usize];
        assert!((got_obj - best_obj).abs() < 1e-12);
        assert_eq!((tier.b_easy, tier.b_medium), (b1, b2));
    }

    #[test]
    fn infeasible_when_budget_below_window() {
        let grid = BudgetGrid::new(16, 4).unwrap();
        let curves = curves_from(&[(DifficultyLabel::Easy, vec![0.1, 0.4, 0.6, 0.9])], &grid);
        assert!(matches!(
            get_optimal_budgets(8, [1.0, 0.0, 0.0], &curves, &grid),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn missing_curve_for_represented_class_rejected() {
        let grid = BudgetGrid::new(16, 4).unwrap();
        let curves = curves_from(&[(DifficultyLabel::Easy, vec![0.1, 0.4, 0.6, 0.9])], &grid);
        assert!(matches!(
            get_optimal_budgets(64, [0.5, 0.5, 0.0], &curves, &grid),
            Err(Error::MissingCurve(name)) if name == "medium"
        ));
    }

    #[test]
    fn difficulty_allocate_is_class_lookup() {
        let grid = BudgetGrid::default();
        let tier = TierBudgets {
            b_easy: 32,
            b_medium: 64,
            b_hard: 256,
            proportions: [0.5, 0.0, 0.5],
            avg_budget: 144,
        };
        let labels = [DifficultyLabel::Easy, DifficultyLabel::Hard];
        let plan = difficulty_allocate(&labels, &tier, &grid).unwrap();
        assert_eq!(plan.allocations(), &[32, 256]);

        let all_medium = [DifficultyLabel::Medium; 3];
        let tier = TierBudgets {
            b_easy: 16,
            b_medium: 64,
            b_hard: 16,
            proportions: [0.0, 1.0, 0.0],
            avg_budget: 64,
        };
        let plan = difficulty_allocate(&all_medium, &tier, &grid).unwrap();
        assert_eq!(plan.allocations(), &[64, 64, 64]);
    }

    #[test]
    fn empirical_proportion_tier_never_overspends() {
        // With proportions equal to exact class fractions the realized total
        // equals n * (p . b) <= n * B.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let grid = BudgetGrid::default();
        for _ in 0..50 {
            let n = rng.gen_range(1..=40);
            let labels: Vec<DifficultyLabel> = (0..n)
                .map(|_| DifficultyLabel::ALL[rng.gen_range(0..3)])
                .collect();
            let proportions = empirical_proportions(&labels).unwrap();
            let b = 16 * rng.gen_range(1..=16);
            let profiles: Vec<(DifficultyLabel, Vec<f64>)> = DifficultyLabel::ALL
                .iter()
                .map(|&l| (l, (0..16).map(|_| rng.gen::<f64>()).collect()))
                .collect();
            let curves = curves_from(&profiles, &grid);
            let tier = get_optimal_budgets(b, proportions, &curves, &grid).unwrap();
            assert!(tier.expected_cost() <= b as f64 + TIER_FEASIBILITY_EPS);
            let plan = difficulty_allocate(&labels, &tier, &grid).unwrap();
            assert!(plan.total_allocated() <= plan.total_budget_tokens());
        }
    }
}

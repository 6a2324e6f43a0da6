//! Accuracy-vs-budget evaluation across allocation strategies.
//!
//! Plans are built from whatever information the strategy is allowed to see
//! (predictions for `*-predicted`, ground truth for `*-oracle`) and are
//! always scored against the ground-truth profiles.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::allocator::plan::AllocationPlan;
use crate::allocator::strategies::{
    expected_accuracy, greedy_allocate, optimal_allocate_dp, uniform_allocate, GreedyMode,
};
use crate::allocator::tier::{difficulty_allocate, empirical_proportions, get_optimal_budgets};
use crate::error::{Error, Result};
use crate::grid::BudgetGrid;
use crate::profiles::{
    class_accuracy_curves, compute_percentile_thresholds, label_difficulty, ClassAccuracyCurve,
    DifficultyLabel, EarlyStopProfile, QueryRecord,
};

/// An allocation strategy selectable in evaluation reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Uniform,
    GreedyPredicted,
    GreedyOracle,
    DifficultyPredicted,
    DifficultyOracle,
    DpOracle,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Uniform,
        Strategy::GreedyPredicted,
        Strategy::GreedyOracle,
        Strategy::DifficultyPredicted,
        Strategy::DifficultyOracle,
        Strategy::DpOracle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Uniform => "uniform",
            Strategy::GreedyPredicted => "greedy-predicted",
            Strategy::GreedyOracle => "greedy-oracle",
            Strategy::DifficultyPredicted => "difficulty-predicted",
            Strategy::DifficultyOracle => "difficulty-oracle",
            Strategy::DpOracle => "dp-oracle",
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .iter()
            .copied()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown strategy `{s}`")))
    }
}

/// One line of the accuracy-vs-budget report.
#[derive(Debug, Clone, Serialize)]
pub struct CurveRow {
    pub budget: u32,
    pub strategy: Strategy,
    pub split: String,
    pub accuracy: f64,
    pub total_tokens_used: u64,
}

/// Per-query allocations for one (strategy, budget) pair.
#[derive(Debug, Clone)]
pub struct AllocationDump {
    pub strategy: Strategy,
    pub budget: u32,
    /// (query id, true difficulty, allocated tokens)
    pub rows: Vec<(String, DifficultyLabel, u32)>,
}

/// Mean allocated budget per true difficulty class.
#[derive(Debug, Clone, Serialize)]
pub struct ClassBudgetRow {
    pub budget: u32,
    pub strategy: Strategy,
    pub class: DifficultyLabel,
    pub mean_tokens: f64,
    pub count: usize,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub rows: Vec<CurveRow>,
    pub class_budgets: Vec<ClassBudgetRow>,
    pub dumps: Vec<AllocationDump>,
}

/// Evaluation inputs and knobs.
pub struct EvalSpec<'a> {
    /// Ground-truth records; every record needs a profile.
    pub truth: &'a [QueryRecord],
    /// Predicted records aligned to the truth by id. Required by the
    /// `*-predicted` strategies (profiles for greedy, labels for difficulty).
    pub predicted: Option<&'a [QueryRecord]>,
    /// Class accuracy curves for the difficulty strategies, typically from a
    /// training split. When absent they are derived from the truth batch.
    pub curves: Option<&'a ClassAccuracyCurve>,
    pub budgets: &'a [u32],
    pub grid: BudgetGrid,
    pub split: &'a str,
    pub greedy_mode: GreedyMode,
}

fn align_by_id<'a>(
    truth: &[QueryRecord],
    predicted: &'a [QueryRecord],
) -> Result<Vec<&'a QueryRecord>> {
    if predicted.len() != truth.len() {
        return Err(Error::IdMisalignment(format!(
            "{} predicted records vs {} truth records",
            predicted.len(),
            truth.len()
        )));
    }
    let index: HashMap<&str, &QueryRecord> =
        predicted.iter().map(|r| (r.id.as_str(), r)).collect();
    if index.len() != predicted.len() {
        return Err(Error::IdMisalignment("duplicate ids in predictions".to_string()));
    }
    truth
        .iter()
        .map(|t| {
            index
                .get(t.id.as_str())
                .copied()
                .ok_or_else(|| Error::IdMisalignment(format!("id `{}` missing from predictions", t.id)))
        })
        .collect()
}

/// Labels every truth record, deriving percentile thresholds from the batch
/// itself when any record is unlabeled.
fn truth_labels(truth: &[QueryRecord], grid: &BudgetGrid) -> Result<Vec<DifficultyLabel>> {
    if truth.iter().all(|r| r.difficulty.is_some()) {
        return Ok(truth.iter().map(|r| r.difficulty.unwrap()).collect());
    }
    let thresholds = compute_percentile_thresholds(truth, grid)?;
    truth.iter().map(|r| Ok(label_difficulty(r.profile()?, &thresholds))).collect()
}

fn tier_plan(
    labels: &[DifficultyLabel],
    curves: &ClassAccuracyCurve,
    budget: u32,
    grid: &BudgetGrid,
) -> Result<AllocationPlan> {
    let proportions = empirical_proportions(labels)?;
    let tier = get_optimal_budgets(budget, proportions, curves, grid)?;
    difficulty_allocate(labels, &tier, grid)
}

/// Runs every requested strategy at every budget and reports accuracy
/// against the ground truth. Rows come back sorted by (strategy, budget).
pub fn evaluate_strategy_curve(strategies: &[Strategy], spec: &EvalSpec) -> Result<EvalReport> {
    if spec.truth.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let grid = &spec.grid;
    let true_profiles: Vec<EarlyStopProfile> =
        spec.truth.iter().map(|r| r.profile().cloned()).collect::<Result<_>>()?;
    let n = true_profiles.len();

    let predicted = match spec.predicted {
        Some(batch) => Some(align_by_id(spec.truth, batch)?),
        None => None,
    };
    // Class grouping for the per-class mean-budget table and the oracle tier
    // strategy; thresholds are derived when the truth batch is unlabeled.
    let class_of: Vec<DifficultyLabel> = truth_labels(spec.truth, grid)?;

    let derived_curves;
    let curves: Option<&ClassAccuracyCurve> = match spec.curves {
        Some(c) => Some(c),
        None if strategies
            .iter()
            .any(|s| matches!(s, Strategy::DifficultyOracle | Strategy::DifficultyPredicted)) =>
        {
            let mut labeled = spec.truth.to_vec();
            for (record, &label) in labeled.iter_mut().zip(&class_of) {
                record.difficulty = Some(label);
            }
            derived_curves = class_accuracy_curves(&labeled, grid)?;
            Some(&derived_curves)
        }
        None => None,
    };

    let predicted_profiles: Option<Vec<EarlyStopProfile>> = match &predicted {
        Some(records) if strategies.contains(&Strategy::GreedyPredicted) => Some(
            records.iter().map(|r| r.profile().cloned()).collect::<Result<_>>()?,
        ),
        _ => None,
    };
    let predicted_labels: Option<Vec<DifficultyLabel>> = match &predicted {
        Some(records) if strategies.contains(&Strategy::DifficultyPredicted) => {
            Some(records.iter().map(|r| r.difficulty()).collect::<Result<_>>()?)
        }
        _ => None,
    };

    let mut rows = Vec::new();
    let mut class_budgets = Vec::new();
    let mut dumps = Vec::new();

    for &strategy in strategies {
        for &budget in spec.budgets {
            let plan = match strategy {
                Strategy::Uniform => uniform_allocate(n, budget, grid)?,
                Strategy::GreedyOracle => {
                    greedy_allocate(&true_profiles, budget, grid, spec.greedy_mode)?
                }
                Strategy::GreedyPredicted => {
                    let profiles = predicted_profiles.as_ref().ok_or_else(|| {
                        Error::InvalidConfig(
                            "greedy-predicted requires predicted profiles".to_string(),
                        )
                    })?;
                    greedy_allocate(profiles, budget, grid, spec.greedy_mode)?
                }
                Strategy::DpOracle => optimal_allocate_dp(&true_profiles, budget, grid)?,
                Strategy::DifficultyOracle => {
                    tier_plan(&class_of, curves.expect("curves derived above"), budget, grid)?
                }
                Strategy::DifficultyPredicted => {
                    let labels = predicted_labels.as_ref().ok_or_else(|| {
                        Error::InvalidConfig(
                            "difficulty-predicted requires predicted labels".to_string(),
                        )
                    })?;
                    tier_plan(labels, curves.expect("curves derived above"), budget, grid)?
                }
            };
            let accuracy = expected_accuracy(&true_profiles, &plan, grid)?;
            rows.push(CurveRow {
                budget,
                strategy,
                split: spec.split.to_string(),
                accuracy,
                total_tokens_used: plan.total_allocated(),
            });

            let mut sums = [0u64; 3];
            let mut counts = [0usize; 3];
            for (&label, &tokens) in class_of.iter().zip(plan.allocations()) {
                sums[label.class_index()] += tokens as u64;
                counts[label.class_index()] += 1;
            }
            for label in DifficultyLabel::ALL {
                let idx = label.class_index();
                if counts[idx] > 0 {
                    class_budgets.push(ClassBudgetRow {
                        budget,
                        strategy,
                        class: label,
                        mean_tokens: sums[idx] as f64 / counts[idx] as f64,
                        count: counts[idx],
                    });
                }
            }

            dumps.push(AllocationDump {
                strategy,
                budget,
                rows: spec
                    .truth
                    .iter()
                    .zip(&class_of)
                    .zip(plan.allocations())
                    .map(|((record, &label), &tokens)| (record.id.clone(), label, tokens))
                    .collect(),
            });
        }
    }

    rows.sort_by(|a, b| a.strategy.as_str().cmp(b.strategy.as_str()).then(a.budget.cmp(&b.budget)));
    class_budgets.sort_by(|a, b| {
        a.strategy
            .as_str()
            .cmp(b.strategy.as_str())
            .then(a.budget.cmp(&b.budget))
            .then(a.class.cmp(&b.class))
    });
    dumps.sort_by(|a, b| a.strategy.as_str().cmp(b.strategy.as_str()).then(a.budget.cmp(&b.budget)));
    Ok(EvalReport { rows, class_budgets, dumps })
}

//! Budget-allocation strategies and the accuracy-vs-budget evaluation
//! harness.

mod eval;
mod plan;
mod strategies;
mod tier;

pub use eval::{
    evaluate_strategy_curve, AllocationDump, ClassBudgetRow, CurveRow, EvalReport, EvalSpec,
    Strategy,
};
pub use plan::{AllocationPlan, TierBudgets};
pub use strategies::{
    compute_gains, expected_accuracy, greedy_allocate, optimal_allocate_dp, uniform_allocate,
    GreedyMode,
};
pub use tier::{
    difficulty_allocate, empirical_proportions, get_optimal_budgets, TIER_FEASIBILITY_EPS,
};

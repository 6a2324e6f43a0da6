//! Allocation plans and difficulty-tier budgets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::BudgetGrid;

/// Per-query token budgets computed under a total-budget constraint.
///
/// Every allocation is a positive multiple of the window size, at most the
/// grid maximum, and the sum never exceeds `total_budget_tokens`
/// (= average budget B times batch size).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationPlan {
    allocations: Vec<u32>,
    total_budget_tokens: u64,
}

impl AllocationPlan {
    pub fn new(allocations: Vec<u32>, total_budget_tokens: u64, grid: &BudgetGrid) -> Result<Self> {
        let plan = Self { allocations, total_budget_tokens };
        plan.validate(grid)?;
        Ok(plan)
    }

    pub fn validate(&self, grid: &BudgetGrid) -> Result<()> {
        for &tokens in &self.allocations {
            grid.index_of(tokens)?;
        }
        if self.total_allocated() > self.total_budget_tokens {
            return Err(Error::Infeasible(format!(
                "plan spends {} tokens but the budget is {}",
                self.total_allocated(),
                self.total_budget_tokens
            )));
        }
        Ok(())
    }

    pub fn allocations(&self) -> &[u32] {
        &self.allocations
    }

    pub fn len(&self) -> usize {
        self.allocations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.allocations.is_empty()
    }

    pub fn total_budget_tokens(&self) -> u64 {
        self.total_budget_tokens
    }

    /// Tokens actually assigned; can fall short of the budget when marginal
    /// gains run out or every query is saturated.
    pub fn total_allocated(&self) -> u64 {
        self.allocations.iter().map(|&a| a as u64).sum()
    }
}

/// Per-class token budgets for difficulty-tier allocation, together with
/// the class proportions and average budget they were optimized under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierBudgets {
    pub b_easy: u32,
    pub b_medium: u32,
    pub b_hard: u32,
    /// Class proportions (easy, medium, hard) used in the search.
    pub proportions: [f64; 3],
    /// The average per-query budget B the triple was constrained by.
    pub avg_budget: u32,
}

impl TierBudgets {
    pub fn budget_for(&self, class_index: usize) -> u32 {
        [self.b_easy, self.b_medium, self.b_hard][class_index]
    }

    /// The dot product `p1*b1 + p2*b2 + p3*b3` the constraint is stated on.
    pub fn expected_cost(&self) -> f64 {
        self.proportions[0] * self.b_easy as f64
            + self.proportions[1] * self.b_medium as f64
            + self.proportions[2] * self.b_hard as f64
    }
}

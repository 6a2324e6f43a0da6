//! The budget grid: admissible per-query token budgets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Window size and window count defining the admissible budgets
/// `{W, 2W, ..., KW}`.
///
/// Every allocation and every profile entry is indexed against this grid:
/// entry `j` of a profile corresponds to a budget of `(j + 1) * W` tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetGrid {
    window_tokens: u32,
    num_windows: u32,
}

impl BudgetGrid {
    pub fn new(window_tokens: u32, num_windows: u32) -> Result<Self> {
        if window_tokens == 0 || num_windows == 0 {
            return Err(Error::InvalidConfig(format!(
                "grid requires window_tokens >= 1 and num_windows >= 1, got {window_tokens} x {num_windows}"
            )));
        }
        Ok(Self { window_tokens, num_windows })
    }

    pub fn window_tokens(&self) -> u32 {
        self.window_tokens
    }

    pub fn num_windows(&self) -> usize {
        self.num_windows as usize
    }

    /// Token budget of grid index `j` (zero-based): `(j + 1) * W`.
    pub fn budget_at(&self, index: usize) -> u32 {
        debug_assert!(index < self.num_windows());
        (index as u32 + 1) * self.window_tokens
    }

    pub fn max_budget(&self) -> u32 {
        self.window_tokens * self.num_windows
    }

    /// All admissible budgets in ascending order.
    pub fn budgets(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.num_windows()).map(|j| self.budget_at(j))
    }

    /// Grid index of a token budget, or an error if the budget is off-grid.
    pub fn index_of(&self, budget: u32) -> Result<usize> {
        if budget < self.window_tokens {
            return Err(Error::BudgetTooSmall { budget, window: self.window_tokens });
        }
        if budget % self.window_tokens != 0 || budget > self.max_budget() {
            return Err(Error::BudgetOffGrid {
                budget,
                window: self.window_tokens,
                max: self.max_budget(),
            });
        }
        Ok((budget / self.window_tokens - 1) as usize)
    }

    /// Checks that a budget is a positive multiple of the window size.
    /// Unlike [`index_of`](Self::index_of) this allows budgets beyond the
    /// grid maximum, which the greedy allocator accepts (surplus stays unspent).
    pub fn check_window_multiple(&self, budget: u32) -> Result<()> {
        if budget < self.window_tokens {
            return Err(Error::BudgetTooSmall { budget, window: self.window_tokens });
        }
        if budget % self.window_tokens != 0 {
            return Err(Error::BudgetOffGrid {
                budget,
                window: self.window_tokens,
                max: self.max_budget(),
            });
        }
        Ok(())
    }
}

impl Default for BudgetGrid {
    /// 16 windows of 16 tokens: budgets 16, 32, ..., 256.
    fn default() -> Self {
        Self { window_tokens: 16, num_windows: 16 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_spans_16_to_256() {
        let g = BudgetGrid::default();
        assert_eq!(g.budget_at(0), 16);
        assert_eq!(g.budget_at(15), 256);
        assert_eq!(g.max_budget(), 256);
        assert_eq!(g.budgets().collect::<Vec<_>>(), (1..=16).map(|k| 16 * k).collect::<Vec<_>>());
    }

    #[test]
    fn index_roundtrip() {
        let g = BudgetGrid::new(16, 16).unwrap();
        for j in 0..g.num_windows() {
            assert_eq!(g.index_of(g.budget_at(j)).unwrap(), j);
        }
    }

    #[test]
    fn off_grid_budgets_rejected() {
        let g = BudgetGrid::new(16, 16).unwrap();
        assert!(matches!(g.index_of(0), Err(Error::BudgetTooSmall { .. })));
        assert!(matches!(g.index_of(24), Err(Error::BudgetOffGrid { .. })));
        assert!(matches!(g.index_of(272), Err(Error::BudgetOffGrid { .. })));
    }

    #[test]
    fn degenerate_dimensions_rejected() {
        assert!(BudgetGrid::new(0, 16).is_err());
        assert!(BudgetGrid::new(16, 0).is_err());
    }
}

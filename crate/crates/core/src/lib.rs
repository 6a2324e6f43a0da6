//! Allocate a fixed total reasoning-token budget across a batch of queries
//! to maximize expected accuracy.
//!
//! The library is organized around four pieces:
//!
//! - [`profiles`]: the data model — per-query early-stopping probability
//!   vectors on a [`grid::BudgetGrid`], difficulty labels from percentile
//!   thresholds, per-class accuracy curves, JSONL formats, and seeded
//!   synthetic batches.
//! - [`allocator`]: budget-allocation strategies — greedy marginal-gain
//!   allocation, a uniform baseline, an exact dynamic-programming optimum,
//!   difficulty-tier allocation, and the accuracy-vs-budget evaluation
//!   harness.
//! - [`predictor`]: from-scratch feed-forward networks mapping hidden-state
//!   features to probability profiles or difficulty classes, trained with
//!   Adam, plus sweeps, per-layer analysis, and evaluation metrics.
//! - [`probing`]: empirical profile estimation by forcing answers at probe
//!   points through a pluggable generation client, answer scoring, and the
//!   few-shot difficulty-classification exchange.

pub mod allocator;
pub mod error;
pub mod grid;
pub mod predictor;
pub mod probing;
pub mod profiles;

pub use error::{Error, Result};
pub use grid::BudgetGrid;

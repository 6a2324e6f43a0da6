//! Difficulty labeling from percentile thresholds and per-class mean curves.

use crate::error::{Error, Result};
use crate::grid::BudgetGrid;
use crate::profiles::types::{
    ClassAccuracyCurve, DifficultyLabel, DifficultyThresholds, EarlyStopProfile, QueryRecord,
};

/// Nearest-rank percentile: the `ceil(q * n)`-th order statistic (1-based).
fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    let rank = (q * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Computes the 20th and 80th nearest-rank percentiles of the max-budget
/// correctness probability over a training batch.
pub fn compute_percentile_thresholds(
    batch: &[QueryRecord],
    _grid: &BudgetGrid,
) -> Result<DifficultyThresholds> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut finals: Vec<f64> =
        batch.iter().map(|r| r.profile().map(|p| p.final_prob())).collect::<Result<_>>()?;
    finals.sort_by(|a, b| a.partial_cmp(b).expect("probabilities are finite"));
    DifficultyThresholds::new(nearest_rank(&finals, 0.2), nearest_rank(&finals, 0.8))
}

/// Labels a max-budget correctness probability: hard iff `x <= p20`,
/// easy iff `x >= p80`, medium otherwise. Total on [0, 1].
pub fn label_from_final_prob(x: f64, thresholds: &DifficultyThresholds) -> DifficultyLabel {
    if x <= thresholds.p20 {
        DifficultyLabel::Hard
    } else if x >= thresholds.p80 {
        DifficultyLabel::Easy
    } else {
        DifficultyLabel::Medium
    }
}

/// Labels a profile by its final (max-budget) entry.
pub fn label_difficulty(
    profile: &EarlyStopProfile,
    thresholds: &DifficultyThresholds,
) -> DifficultyLabel {
    label_from_final_prob(profile.final_prob(), thresholds)
}

/// Labels every record in place from its own profile.
pub fn label_batch(batch: &mut [QueryRecord], thresholds: &DifficultyThresholds) -> Result<()> {
    for record in batch.iter_mut() {
        let label = label_difficulty(record.profile()?, thresholds);
        record.difficulty = Some(label);
    }
    Ok(())
}

/// Element-wise mean profile per difficulty class, plus class counts.
/// Classes with no members get no curve.
pub fn class_accuracy_curves(batch: &[QueryRecord], grid: &BudgetGrid) -> Result<ClassAccuracyCurve> {
    let k = grid.num_windows();
    let mut sums: [Vec<f64>; 3] = [vec![0.0; k], vec![0.0; k], vec![0.0; k]];
    let mut counts = [0usize; 3];

    for record in batch {
        let label = record.difficulty()?;
        let profile = record.profile()?;
        if profile.len() != k {
            return Err(Error::ProfileLength {
                id: record.id.clone(),
                got: profile.len(),
                expected: k,
            });
        }
        let class = label.class_index();
        counts[class] += 1;
        for (sum, &p) in sums[class].iter_mut().zip(profile.probs()) {
            *sum += p;
        }
    }

    let curves = std::array::from_fn(|class| {
        if counts[class] == 0 {
            None
        } else {
            Some(sums[class].iter().map(|s| s / counts[class] as f64).collect())
        }
    });
    Ok(ClassAccuracyCurve::from_parts(curves, counts))
}

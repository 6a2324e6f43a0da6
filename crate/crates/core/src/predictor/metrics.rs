//! Evaluation metrics: Pearson correlation, MSE, and the 3-class
//! confusion-matrix family.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::profiles::DifficultyLabel;

/// Sample Pearson correlation between two equal-length value sets.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!("{} vs {} values", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::InvalidConfig("correlation needs at least 2 pairs".to_string()));
    }
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let dx = x - mean_a;
        let dy = y - mean_b;
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a == 0.0 {
        return Err(Error::ZeroVariance("first argument".to_string()));
    }
    if var_b == 0.0 {
        return Err(Error::ZeroVariance("second argument".to_string()));
    }
    Ok(cov / (var_a.sqrt() * var_b.sqrt()))
}

/// Pearson over the flattened (query, budget-entry) pairs of two stacked
/// prediction matrices. This is the per-layer scalar used in layer reports.
pub fn pearson_flat(pred: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<f64> {
    let a: Vec<f64> = pred.iter().flatten().copied().collect();
    let b: Vec<f64> = truth.iter().flatten().copied().collect();
    pearson(&a, &b)
}

/// Alternative aggregation: mean of per-query correlations, skipping queries
/// where either side has zero variance (count reported).
pub fn pearson_per_query_mean(pred: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<(f64, usize)> {
    if pred.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!("{} vs {} rows", pred.len(), truth.len())));
    }
    let mut sum = 0.0;
    let mut used = 0usize;
    for (p, t) in pred.iter().zip(truth) {
        match pearson(p, t) {
            Ok(r) => {
                sum += r;
                used += 1;
            }
            Err(Error::ZeroVariance(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    if used == 0 {
        return Err(Error::ZeroVariance("every row".to_string()));
    }
    Ok((sum / used as f64, pred.len() - used))
}

/// Mean squared error over all entries.
pub fn mse_flat(pred: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!("{} vs {} rows", pred.len(), truth.len())));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (p, t) in pred.iter().zip(truth) {
        if p.len() != t.len() {
            return Err(Error::ShapeMismatch("row lengths differ".to_string()));
        }
        for (&x, &y) in p.iter().zip(t) {
            let d = x - y;
            sum += d * d;
        }
        count += p.len();
    }
    if count == 0 {
        return Err(Error::EmptyBatch);
    }
    Ok(sum / count as f64)
}

/// Combined metrics record; regression and classification fill different
/// subsets of the fields.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pearson: Option<f64>,
    /// pearson / mse: predictive power per unit of error.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correlation_to_loss: Option<f64>,
    /// Rows = true class, columns = predicted class; easy, medium, hard.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confusion: Option<[[u64; 3]; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub macro_precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub macro_recall: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub macro_f1: Option<f64>,
    /// Classes with zero true support, which contribute 0 to the macro
    /// averages.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub zero_support: Vec<DifficultyLabel>,
}

impl MetricsReport {
    fn empty() -> Self {
        Self {
            mse: None,
            pearson: None,
            correlation_to_loss: None,
            confusion: None,
            accuracy: None,
            macro_precision: None,
            macro_recall: None,
            macro_f1: None,
            zero_support: Vec::new(),
        }
    }

    /// MSE, flattened Pearson, and their ratio.
    pub fn regression(pred: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<Self> {
        let mse = mse_flat(pred, truth)?;
        let pearson = pearson_flat(pred, truth)?;
        Ok(Self {
            mse: Some(mse),
            pearson: Some(pearson),
            correlation_to_loss: Some(pearson / mse),
            ..Self::empty()
        })
    }
}

/// Confusion matrix, accuracy, and macro precision/recall/F1 for 3-class
/// difficulty predictions. Rows are true labels, columns predictions.
pub fn classification_metrics(
    pred: &[DifficultyLabel],
    truth: &[DifficultyLabel],
) -> Result<MetricsReport> {
    if pred.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!("{} vs {} labels", pred.len(), truth.len())));
    }
    if pred.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut confusion = [[0u64; 3]; 3];
    for (&p, &t) in pred.iter().zip(truth) {
        confusion[t.class_index()][p.class_index()] += 1;
    }
    let total: u64 = confusion.iter().flatten().sum();
    let trace: u64 = (0..3).map(|k| confusion[k][k]).sum();

    let mut zero_support = Vec::new();
    let mut precision_sum = 0.0;
    let mut recall_sum = 0.0;
    let mut f1_sum = 0.0;
    for label in DifficultyLabel::ALL {
        let k = label.class_index();
        let row_sum: u64 = confusion[k].iter().sum();
        let col_sum: u64 = (0..3).map(|r| confusion[r][k]).sum();
        let tp = confusion[k][k] as f64;
        let precision = if col_sum > 0 { tp / col_sum as f64 } else { 0.0 };
        let recall = if row_sum > 0 { tp / row_sum as f64 } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        if row_sum == 0 {
            zero_support.push(label);
        }
        precision_sum += precision;
        recall_sum += recall;
        f1_sum += f1;
    }

    Ok(MetricsReport {
        confusion: Some(confusion),
        accuracy: Some(trace as f64 / total as f64),
        macro_precision: Some(precision_sum / 3.0),
        macro_recall: Some(recall_sum / 3.0),
        macro_f1: Some(f1_sum / 3.0),
        zero_support,
        ..MetricsReport::empty()
    })
}

/// Fraction of matching labels.
pub fn accuracy(pred: &[DifficultyLabel], truth: &[DifficultyLabel]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!("{} vs {} labels", pred.len(), truth.len())));
    }
    if pred.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

//! Core data model: profiles, query records, difficulty labels, features.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::BudgetGrid;

/// Per-query vector of correctness probabilities, one entry per grid budget.
///
/// Entry `j` is the probability of a correct answer when the query is forced
/// to answer after `grid.budget_at(j)` tokens. Entries need not be monotone;
/// empirically estimated vectors often are not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EarlyStopProfile {
    probs: Vec<f64>,
}

impl EarlyStopProfile {
    pub fn new(probs: Vec<f64>, grid: &BudgetGrid) -> Result<Self> {
        Self::validated(probs, grid, "<unnamed>")
    }

    pub(crate) fn validated(probs: Vec<f64>, grid: &BudgetGrid, id: &str) -> Result<Self> {
        if probs.len() != grid.num_windows() {
            return Err(Error::ProfileLength {
                id: id.to_string(),
                got: probs.len(),
                expected: grid.num_windows(),
            });
        }
        for (index, &value) in probs.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::ProbOutOfRange { id: id.to_string(), index, value });
            }
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Probability at grid index `j`.
    pub fn prob_at(&self, index: usize) -> f64 {
        self.probs[index]
    }

    /// Probability at the maximum budget (last grid entry).
    pub fn final_prob(&self) -> f64 {
        *self.probs.last().expect("profile is never empty")
    }
}

/// Discrete difficulty tier of a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DifficultyLabel {
    Easy,
    Medium,
    Hard,
}

impl DifficultyLabel {
    pub const ALL: [DifficultyLabel; 3] =
        [DifficultyLabel::Easy, DifficultyLabel::Medium, DifficultyLabel::Hard];

    /// Stable class index: easy = 0, medium = 1, hard = 2.
    pub fn class_index(self) -> usize {
        match self {
            DifficultyLabel::Easy => 0,
            DifficultyLabel::Medium => 1,
            DifficultyLabel::Hard => 2,
        }
    }

    pub fn from_class_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DifficultyLabel::Easy => "easy",
            DifficultyLabel::Medium => "medium",
            DifficultyLabel::Hard => "hard",
        }
    }
}

impl std::fmt::Display for DifficultyLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DifficultyLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "easy" => Ok(DifficultyLabel::Easy),
            "medium" => Ok(DifficultyLabel::Medium),
            "hard" => Ok(DifficultyLabel::Hard),
            other => Err(Error::InvalidConfig(format!(
                "unknown difficulty `{other}` (expected easy, medium, or hard)"
            ))),
        }
    }
}

/// One query with whatever is known about it so far. Only the id is
/// mandatory; operations that need a missing field fail explicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryRecord {
    pub id: String,
    pub profile: Option<EarlyStopProfile>,
    pub difficulty: Option<DifficultyLabel>,
    pub question_text: Option<String>,
    pub question_token_len: Option<u64>,
    pub ground_truth_answer: Option<String>,
}

impl QueryRecord {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            profile: None,
            difficulty: None,
            question_text: None,
            question_token_len: None,
            ground_truth_answer: None,
        }
    }

    pub fn with_profile(mut self, profile: EarlyStopProfile) -> Self {
        self.profile = Some(profile);
        self
    }

    pub fn with_difficulty(mut self, label: DifficultyLabel) -> Self {
        self.difficulty = Some(label);
        self
    }

    pub fn profile(&self) -> Result<&EarlyStopProfile> {
        self.profile.as_ref().ok_or_else(|| Error::MissingProfile(self.id.clone()))
    }

    pub fn difficulty(&self) -> Result<DifficultyLabel> {
        self.difficulty.ok_or_else(|| Error::MissingLabel(self.id.clone()))
    }
}

/// Collects the profile of every record, failing on the first record
/// without one.
pub fn profiles_of(batch: &[QueryRecord]) -> Result<Vec<&EarlyStopProfile>> {
    batch.iter().map(|r| r.profile()).collect()
}

/// Collects the label of every record, failing on the first unlabeled record.
pub fn labels_of(batch: &[QueryRecord]) -> Result<Vec<DifficultyLabel>> {
    batch.iter().map(|r| r.difficulty()).collect()
}

/// Percentile thresholds on the max-budget correctness probability that
/// separate the three difficulty tiers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifficultyThresholds {
    pub p20: f64,
    pub p80: f64,
}

impl DifficultyThresholds {
    pub fn new(p20: f64, p80: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p20) || !(0.0..=1.0).contains(&p80) || p20 > p80 {
            return Err(Error::InvalidConfig(format!(
                "thresholds must satisfy 0 <= p20 <= p80 <= 1, got ({p20}, {p80})"
            )));
        }
        Ok(Self { p20, p80 })
    }
}

/// Per-class element-wise mean profiles and class sizes. A class with no
/// members has no curve; tier search rejects absent classes that carry a
/// nonzero proportion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracyCurve {
    curves: [Option<Vec<f64>>; 3],
    counts: [usize; 3],
}

impl ClassAccuracyCurve {
    pub(crate) fn from_parts(curves: [Option<Vec<f64>>; 3], counts: [usize; 3]) -> Self {
        Self { curves, counts }
    }

    pub fn curve(&self, label: DifficultyLabel) -> Option<&[f64]> {
        self.curves[label.class_index()].as_deref()
    }

    pub fn count(&self, label: DifficultyLabel) -> usize {
        self.counts[label.class_index()]
    }

    /// Mean accuracy of class `label` at grid index `j`, if the class is
    /// represented.
    pub fn accuracy_at(&self, label: DifficultyLabel, index: usize) -> Option<f64> {
        self.curve(label).map(|c| c[index])
    }
}

/// One hidden-state feature vector for a query at a given model layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub id: String,
    pub layer: u32,
    pub vec: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_rejects_bad_lengths_and_ranges() {
        let grid = BudgetGrid::new(16, 4).unwrap();
        assert!(EarlyStopProfile::new(vec![0.0; 3], &grid).is_err());
        assert!(EarlyStopProfile::new(vec![0.0, 0.5, 1.0, 1.5], &grid).is_err());
        assert!(EarlyStopProfile::new(vec![0.0, 0.5, 1.0, -0.1], &grid).is_err());
        let p = EarlyStopProfile::new(vec![0.0, 0.5, 1.0, 0.25], &grid).unwrap();
        assert_eq!(p.final_prob(), 0.25);
    }

    #[test]
    fn label_string_roundtrip() {
        for label in DifficultyLabel::ALL {
            assert_eq!(label.as_str().parse::<DifficultyLabel>().unwrap(), label);
        }
        assert_eq!("HARD".parse::<DifficultyLabel>().unwrap(), DifficultyLabel::Hard);
        assert!("impossible".parse::<DifficultyLabel>().is_err());
    }

    #[test]
    fn missing_fields_error_with_id() {
        let rec = QueryRecord::new("q7");
        match rec.profile() {
            Err(Error::MissingProfile(id)) => assert_eq!(id, "q7"),
            other => panic!("unexpected: {other:?}"),
        }
        match rec.difficulty() {
            Err(Error::MissingLabel(id)) => assert_eq!(id, "q7"),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn thresholds_must_be_ordered() {
        assert!(DifficultyThresholds::new(0.9, 0.1).is_err());
        assert!(DifficultyThresholds::new(0.18, 0.84).is_ok());
    }
}

//! Data model, JSONL formats, difficulty labeling, per-class accuracy
//! curves, and synthetic batch generation.

mod io;
mod label;
mod synth;
mod types;

pub use io::{
    features_by_layer, load_features, load_profiles, peek_grid, resolve_grid, save_features,
    save_profiles,
};
pub use label::{
    class_accuracy_curves, compute_percentile_thresholds, label_batch, label_difficulty,
    label_from_final_prob,
};
pub use synth::{generate_synthetic_batch, SynthBatch, SynthSpec};
pub use types::{
    labels_of, profiles_of, ClassAccuracyCurve, DifficultyLabel, DifficultyThresholds,
    EarlyStopProfile, FeatureRecord, QueryRecord,
};

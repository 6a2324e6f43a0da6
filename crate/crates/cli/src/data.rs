//! Dataset assembly shared by the train/sweep/predict/layers commands:
//! feature-profile joins by id and seeded train/validation splits.

use std::collections::HashMap;
use std::path::Path;

use budgetsched_core::predictor::{Dataset, Head, Targets};
use budgetsched_core::profiles::{
    load_features, load_profiles, resolve_grid, FeatureRecord, QueryRecord,
};
use budgetsched_core::{BudgetGrid, Error as CoreError};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::errors::{CliError, CliResult};

/// Builds the effective grid from optional flags: explicit flags beat the
/// file header, which beats the 16x16 default.
pub fn effective_grid(
    profiles_path: &Path,
    window_tokens: Option<u32>,
    num_windows: Option<u32>,
) -> CliResult<BudgetGrid> {
    let explicit = if window_tokens.is_some() || num_windows.is_some() {
        Some(
            BudgetGrid::new(window_tokens.unwrap_or(16), num_windows.unwrap_or(16))
                .map_err(CliError::Core)?,
        )
    } else {
        None
    };
    resolve_grid(profiles_path, explicit).map_err(CliError::Core)
}

pub struct JoinedData {
    pub ids: Vec<String>,
    pub dataset: Dataset,
    pub grid: BudgetGrid,
    pub feature_dim: usize,
}

/// Joins one feature layer against a profiles file by id, producing
/// regression targets (profiles) or classification targets (labels).
/// Any id present on only one side fails the join, with counts.
pub fn join_features_profiles(
    features_path: &Path,
    profiles_path: &Path,
    layer: u32,
    head: Head,
    window_tokens: Option<u32>,
    num_windows: Option<u32>,
) -> CliResult<JoinedData> {
    let grid = effective_grid(profiles_path, window_tokens, num_windows)?;
    let records = load_profiles(profiles_path, &grid).map_err(CliError::Core)?;
    let features: Vec<FeatureRecord> = load_features(features_path)
        .map_err(CliError::Core)?
        .into_iter()
        .filter(|f| f.layer == layer)
        .collect();
    if features.is_empty() {
        return Err(CliError::Core(CoreError::ShapeMismatch(format!(
            "{} has no rows for layer {layer}",
            features_path.display()
        ))));
    }

    let by_id: HashMap<&str, &QueryRecord> = records.iter().map(|r| (r.id.as_str(), r)).collect();
    let feature_ids: std::collections::HashSet<&str> =
        features.iter().map(|f| f.id.as_str()).collect();
    let missing_profiles = features.iter().filter(|f| !by_id.contains_key(f.id.as_str())).count();
    let missing_features = records.iter().filter(|r| !feature_ids.contains(r.id.as_str())).count();
    if missing_profiles > 0 || missing_features > 0 {
        return Err(CliError::Core(CoreError::IdMisalignment(format!(
            "{missing_profiles} feature ids lack profiles; {missing_features} profile ids lack features"
        ))));
    }

    let mut ids = Vec::with_capacity(features.len());
    let mut xs = Vec::with_capacity(features.len());
    let dataset = match head {
        Head::SigmoidRegression => {
            let mut ys = Vec::with_capacity(features.len());
            for f in &features {
                let record = by_id[f.id.as_str()];
                ys.push(record.profile().map_err(CliError::Core)?.probs().to_vec());
                xs.push(f.vec.clone());
                ids.push(f.id.clone());
            }
            Dataset { x: xs, targets: Targets::Profiles(ys) }
        }
        Head::SoftmaxClassification => {
            let mut labels = Vec::with_capacity(features.len());
            for f in &features {
                let record = by_id[f.id.as_str()];
                labels.push(record.difficulty().map_err(CliError::Core)?);
                xs.push(f.vec.clone());
                ids.push(f.id.clone());
            }
            Dataset::classes(xs, labels)
        }
    };

    let feature_dim = dataset.x[0].len();
    Ok(JoinedData { ids, dataset, grid, feature_dim })
}

/// Seeded split into (train, validation) by fraction.
pub fn split_dataset(data: &Dataset, val_frac: f64, seed: u64) -> CliResult<(Dataset, Dataset)> {
    let n = data.len();
    if n < 2 {
        return Err(CliError::Usage(format!("cannot split {n} samples into train and validation")));
    }
    if !(0.0..1.0).contains(&val_frac) || val_frac == 0.0 {
        return Err(CliError::Usage(format!("--val-frac {val_frac} must be in (0, 1)")));
    }
    let n_val = ((n as f64 * val_frac).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let select = |indices: &[usize]| -> Dataset {
        let x = indices.iter().map(|&i| data.x[i].clone()).collect();
        let targets = match &data.targets {
            Targets::Profiles(rows) => {
                Targets::Profiles(indices.iter().map(|&i| rows[i].clone()).collect())
            }
            Targets::Classes(labels) => {
                Targets::Classes(indices.iter().map(|&i| labels[i]).collect())
            }
        };
        Dataset { x, targets }
    };
    Ok((select(&order[n_val..]), select(&order[..n_val])))
}

//! Per-layer analysis: train one predictor per feature layer and compare
//! train/test correlation, loss, and the correlation-to-loss ratio.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::predictor::metrics::{mse_flat, pearson_flat};
use crate::predictor::mlp::MlpConfig;
use crate::predictor::train::{train, Dataset};
use crate::profiles::FeatureRecord;

/// Metrics of one layer's predictor on the held-out split.
#[derive(Debug, Clone, Serialize)]
pub struct LayerReport {
    pub layer: u32,
    pub n_train: usize,
    pub n_test: usize,
    pub train_pearson: f64,
    pub test_pearson: f64,
    pub test_mse: f64,
    pub correlation_to_loss: f64,
}

/// Trains one predictor per layer on an identical target set and reports
/// per-layer metrics, sorted by layer index.
///
/// Every feature id must resolve in `targets`; each layer is split into
/// train/test with the same seeded shuffle fractions.
pub fn layer_analysis(
    features: &BTreeMap<u32, Vec<FeatureRecord>>,
    targets: &HashMap<String, Vec<f64>>,
    base: &MlpConfig,
    test_frac: f64,
    seed: u64,
) -> Result<Vec<LayerReport>> {
    if features.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if !(0.0..1.0).contains(&test_frac) || test_frac == 0.0 {
        return Err(Error::InvalidConfig(format!("test fraction {test_frac} not in (0, 1)")));
    }

    let mut reports = Vec::with_capacity(features.len());
    for (&layer, records) in features {
        if records.is_empty() {
            return Err(Error::ShapeMismatch(format!("layer {layer} has no feature rows")));
        }
        let mut xs = Vec::with_capacity(records.len());
        let mut ys = Vec::with_capacity(records.len());
        for record in records {
            let target = targets.get(&record.id).ok_or_else(|| {
                Error::IdMisalignment(format!("feature id `{}` has no target", record.id))
            })?;
            xs.push(record.vec.clone());
            ys.push(target.clone());
        }

        let n = xs.len();
        let n_test = ((n as f64 * test_frac).round() as usize).clamp(1, n - 1);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
            (
                idx.iter().map(|&i| xs[i].clone()).collect(),
                idx.iter().map(|&i| ys[i].clone()).collect(),
            )
        };
        let (test_x, test_y) = pick(&order[..n_test]);
        let (train_x, train_y) = pick(&order[n_test..]);

        let config = MlpConfig {
            input_dim: xs[0].len(),
            output_dim: ys[0].len(),
            ..base.clone()
        };
        let train_set = Dataset::profiles(train_x.clone(), train_y.clone());
        let val_set = Dataset::profiles(test_x.clone(), test_y.clone());
        let outcome = train(&config, &train_set, &val_set)?;

        let train_preds = outcome.model.forward(&train_x)?;
        let test_preds = outcome.model.forward(&test_x)?;
        // Uninformative layers can collapse to a constant prediction, which
        // has no defined correlation; report 0 predictive power there.
        let train_pearson = pearson_flat(&train_preds, &train_y).unwrap_or(0.0);
        let test_pearson = pearson_flat(&test_preds, &test_y).unwrap_or(0.0);
        let test_mse = mse_flat(&test_preds, &test_y)?;
        reports.push(LayerReport {
            layer,
            n_train: train_x.len(),
            n_test: test_x.len(),
            train_pearson,
            test_pearson,
            test_mse,
            correlation_to_loss: test_pearson / test_mse,
        });
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BudgetGrid;
    use crate::predictor::mlp::Head;
    use crate::profiles::{features_by_layer, generate_synthetic_batch, SynthSpec};

    fn quick_config() -> MlpConfig {
        MlpConfig {
            input_dim: 1, // overridden per layer
            hidden_layers: vec![32],
            output_dim: 1, // overridden per layer
            head: Head::SigmoidRegression,
            dropout: 0.0,
            learning_rate: 5e-3,
            batch_size: 16,
            max_epochs: 40,
            patience: 8,
            seed: 0,
        }
    }

    #[test]
    fn informative_layer_beats_noise_layer() {
        let spec = SynthSpec {
            count: 160,
            feature_dim: 12,
            noise_layer: Some(2),
            ..SynthSpec::new(160, [0.2, 0.6, 0.2], 0.0, BudgetGrid::new(16, 8).unwrap())
        };
        let batch = generate_synthetic_batch(&spec, 13).unwrap();
        let features = features_by_layer(batch.features);
        let targets: HashMap<String, Vec<f64>> = batch
            .records
            .iter()
            .map(|r| (r.id.clone(), r.profile().unwrap().probs().to_vec()))
            .collect();
        let reports = layer_analysis(&features, &targets, &quick_config(), 0.25, 3).unwrap();
        assert_eq!(reports.len(), 2);
        let informative = reports.iter().find(|r| r.layer == 1).unwrap();
        let noise = reports.iter().find(|r| r.layer == 2).unwrap();
        assert!(
            informative.test_pearson > noise.test_pearson + 0.3,
            "informative {} vs noise {}",
            informative.test_pearson,
            noise.test_pearson
        );
        for r in &reports {
            let expect = r.test_pearson / r.test_mse;
            assert!((r.correlation_to_loss - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_target_id_rejected() {
        let spec = SynthSpec {
            count: 10,
            feature_dim: 6,
            ..SynthSpec::new(10, [1.0, 0.0, 0.0], 0.0, BudgetGrid::new(16, 4).unwrap())
        };
        let batch = generate_synthetic_batch(&spec, 1).unwrap();
        let features = features_by_layer(batch.features);
        let targets = HashMap::new();
        assert!(matches!(
            layer_analysis(&features, &targets, &quick_config(), 0.2, 0),
            Err(Error::IdMisalignment(_))
        ));
    }
}

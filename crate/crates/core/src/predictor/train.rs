//! Mini-batch Adam training with seeded shuffling and early stopping on
//! validation performance.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::predictor::adam::{adam_step, AdamState};
use crate::predictor::metrics::{accuracy, pearson_flat};
use crate::predictor::mlp::{gradient, loss, DropoutMasks, Head, MlpConfig, MlpModel, Targets};
use crate::profiles::DifficultyLabel;

/// Feature rows with their targets.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub targets: Targets,
}

impl Dataset {
    pub fn profiles(x: Vec<Vec<f64>>, y: Vec<Vec<f64>>) -> Self {
        Self { x, targets: Targets::Profiles(y) }
    }

    pub fn classes(x: Vec<Vec<f64>>, labels: Vec<DifficultyLabel>) -> Self {
        Self { x, targets: Targets::Classes(labels.iter().map(|l| l.class_index()).collect()) }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    fn select(&self, indices: &[usize]) -> (Vec<Vec<f64>>, Targets) {
        let x = indices.iter().map(|&i| self.x[i].clone()).collect();
        let targets = match &self.targets {
            Targets::Profiles(rows) => {
                Targets::Profiles(indices.iter().map(|&i| rows[i].clone()).collect())
            }
            Targets::Classes(labels) => {
                Targets::Classes(indices.iter().map(|&i| labels[i]).collect())
            }
        };
        (x, targets)
    }
}

/// One epoch of the training log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Validation Pearson (regression) or accuracy (classification).
    pub val_metric: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the best validation epoch, not the last one.
    pub model: MlpModel,
    pub log: Vec<EpochLog>,
    /// 1-based epoch the returned parameters come from.
    pub best_epoch: usize,
    /// The selection value of that epoch: val_loss for regression (lower is
    /// better), val_metric for classification (higher is better).
    pub best_selection: f64,
}

fn eval_split(model: &MlpModel, data: &Dataset) -> Result<(f64, f64)> {
    let val_loss = loss(model, &data.x, &data.targets, None)?;
    let metric = match (&data.targets, model.config().head) {
        (Targets::Profiles(rows), Head::SigmoidRegression) => {
            let preds = model.forward(&data.x)?;
            // Degenerate validation sets have no defined correlation; the
            // log records NaN there while selection still uses the loss.
            pearson_flat(&preds, rows).unwrap_or(f64::NAN)
        }
        (Targets::Classes(labels), Head::SoftmaxClassification) => {
            let truth: Vec<DifficultyLabel> = labels
                .iter()
                .map(|&c| DifficultyLabel::from_class_index(c).expect("validated"))
                .collect();
            let preds = predict_labels(model, &data.x)?;
            accuracy(&preds, &truth)?
        }
        _ => return Err(Error::ShapeMismatch("dataset does not match model head".to_string())),
    };
    Ok((val_loss, metric))
}

/// Argmax class per row of a classification model.
pub fn predict_labels(model: &MlpModel, x: &[Vec<f64>]) -> Result<Vec<DifficultyLabel>> {
    let logits = model.forward(x)?;
    Ok(logits
        .iter()
        .map(|row| {
            let argmax = row
                .iter()
                .enumerate()
                .max_by(|(ia, a), (ib, b)| a.partial_cmp(b).unwrap().then(ib.cmp(ia)))
                .map(|(i, _)| i)
                .expect("non-empty logits");
            DifficultyLabel::from_class_index(argmax).expect("three classes")
        })
        .collect())
}

/// Trains a model from scratch under `config`, returning the best-validation
/// snapshot and the per-epoch log. Deterministic for fixed (config, data).
pub fn train(config: &MlpConfig, train_set: &Dataset, val_set: &Dataset) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::EmptyBatch);
    }
    train_set.targets.check(train_set.len(), config)?;
    val_set.targets.check(val_set.len(), config)?;

    let mut model = MlpModel::init(config.clone())?;
    let mut state = AdamState::new(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));

    let higher_is_better = config.head == Head::SoftmaxClassification;
    let mut best: Option<(f64, MlpModel, usize)> = None;
    let mut stale_epochs = 0usize;
    let mut log = Vec::new();
    let mut indices: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=config.max_epochs {
        indices.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in indices.chunks(config.batch_size) {
            let (x, targets) = train_set.select(chunk);
            let masks = DropoutMasks::sample(config, x.len(), &mut rng);
            let (batch_loss, grads) = gradient(&model, &x, &targets, masks.as_ref())?;
            if !batch_loss.is_finite() {
                return Err(Error::NonFinite(format!("training loss at epoch {epoch}")));
            }
            adam_step(&mut model, &grads, &mut state, config.learning_rate)?;
            epoch_loss += batch_loss;
            batches += 1;
        }

        let (val_loss, val_metric) = eval_split(&model, val_set)?;
        if !val_loss.is_finite() {
            return Err(Error::NonFinite(format!("validation loss at epoch {epoch}")));
        }
        log.push(EpochLog {
            epoch,
            train_loss: epoch_loss / batches as f64,
            val_loss,
            val_metric,
        });

        let selection = if higher_is_better { val_metric } else { val_loss };
        let improved = match &best {
            None => true,
            Some((prev, _, _)) => {
                if higher_is_better {
                    selection > *prev
                } else {
                    selection < *prev
                }
            }
        };
        if improved {
            best = Some((selection, model.clone(), epoch));
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs >= config.patience {
                break;
            }
        }
    }

    let (best_selection, model, best_epoch) = best.expect("at least one epoch ran");
    Ok(TrainOutcome { model, log, best_epoch, best_selection })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// A constructively learnable regression task: targets are sigmoids of
    /// linear functions of the features.
    fn learnable_regression(n: usize, seed: u64) -> (Dataset, Dataset) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input_dim = 4;
        let output_dim = 3;
        let w: Vec<f64> = (0..input_dim * output_dim).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let make = |rng: &mut ChaCha8Rng, count: usize| {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for _ in 0..count {
                let x: Vec<f64> = (0..input_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let y: Vec<f64> = (0..output_dim)
                    .map(|o| {
                        let z: f64 = (0..input_dim).map(|i| w[o * input_dim + i] * x[i]).sum();
                        1.0 / (1.0 + (-z).exp())
                    })
                    .collect();
                xs.push(x);
                ys.push(y);
            }
            Dataset::profiles(xs, ys)
        };
        (make(&mut rng, n), make(&mut rng, n / 4))
    }

    fn small_config() -> MlpConfig {
        MlpConfig {
            input_dim: 4,
            hidden_layers: vec![32],
            output_dim: 3,
            head: Head::SigmoidRegression,
            dropout: 0.0,
            learning_rate: 5e-3,
            batch_size: 16,
            max_epochs: 60,
            patience: 8,
            seed: 0,
        }
    }

    #[test]
    fn reaches_high_pearson_on_learnable_task() {
        let (train_set, val_set) = learnable_regression(256, 0);
        let outcome = train(&small_config(), &train_set, &val_set).unwrap();
        let last = outcome.log.last().unwrap();
        let best = &outcome.log[outcome.best_epoch - 1];
        assert!(
            best.val_metric > 0.99,
            "val pearson {} after {} epochs",
            best.val_metric,
            last.epoch
        );
    }

    #[test]
    fn rerun_is_bit_identical() {
        let (train_set, val_set) = learnable_regression(64, 3);
        let config = MlpConfig { max_epochs: 12, ..small_config() };
        let a = train(&config, &train_set, &val_set).unwrap();
        let b = train(&config, &train_set, &val_set).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn returned_model_reproduces_best_logged_epoch() {
        let (train_set, val_set) = learnable_regression(64, 5);
        let config = MlpConfig { max_epochs: 25, ..small_config() };
        let outcome = train(&config, &train_set, &val_set).unwrap();
        let (val_loss, _) = eval_split(&outcome.model, &val_set).unwrap();
        let logged = outcome.log[outcome.best_epoch - 1].val_loss;
        assert!((val_loss - logged).abs() < 1e-12);
        assert_eq!(outcome.best_selection, logged);
        // Best epoch is the minimum of the logged val losses.
        let min = outcome.log.iter().map(|e| e.val_loss).fold(f64::INFINITY, f64::min);
        assert_eq!(logged, min);
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let (train_set, val_set) = learnable_regression(32, 7);
        let config = MlpConfig { learning_rate: 0.0, max_epochs: 3, ..small_config() };
        let outcome = train(&config, &train_set, &val_set).unwrap();
        let fresh = MlpModel::init(config).unwrap();
        assert_eq!(outcome.model, fresh);
    }

    #[test]
    fn empty_sets_rejected() {
        let (train_set, val_set) = learnable_regression(16, 9);
        let empty = Dataset::profiles(Vec::new(), Vec::new());
        assert!(matches!(train(&small_config(), &empty, &val_set), Err(Error::EmptyBatch)));
        assert!(matches!(train(&small_config(), &train_set, &empty), Err(Error::EmptyBatch)));
    }

    #[test]
    fn classification_learns_separable_classes() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let make = |rng: &mut ChaCha8Rng, n: usize| {
            let mut xs = Vec::new();
            let mut labels = Vec::new();
            for _ in 0..n {
                let class = rng.gen_range(0usize..3);
                let center = [-2.0, 0.0, 2.0][class];
                xs.push(vec![
                    center + rng.gen_range(-0.4..0.4),
                    -center + rng.gen_range(-0.4..0.4),
                ]);
                labels.push(DifficultyLabel::from_class_index(class).unwrap());
            }
            Dataset::classes(xs, labels)
        };
        let train_set = make(&mut rng, 240);
        let val_set = make(&mut rng, 60);
        let config = MlpConfig {
            input_dim: 2,
            hidden_layers: vec![16],
            output_dim: 3,
            head: Head::SoftmaxClassification,
            dropout: 0.0,
            learning_rate: 5e-3,
            batch_size: 16,
            max_epochs: 60,
            patience: 10,
            seed: 1,
        };
        let outcome = train(&config, &train_set, &val_set).unwrap();
        assert!(outcome.best_selection >= 0.95, "accuracy {}", outcome.best_selection);
    }

    #[test]
    fn early_stopping_halts_before_max_epochs_when_stale() {
        // lr = 0 never improves after the first epoch; patience bounds the run.
        let (train_set, val_set) = learnable_regression(32, 11);
        let config =
            MlpConfig { learning_rate: 0.0, max_epochs: 50, patience: 3, ..small_config() };
        let outcome = train(&config, &train_set, &val_set).unwrap();
        assert_eq!(outcome.log.len(), 4); // epoch 1 improves, then 3 stale
        assert_eq!(outcome.best_epoch, 1);
    }
}

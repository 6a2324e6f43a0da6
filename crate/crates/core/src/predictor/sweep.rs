//! Hyperparameter sweeps: a discrete grid preset and a sampled-ranges
//! preset, trained in parallel with per-configuration seeds.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::predictor::mlp::MlpConfig;
use crate::predictor::train::{train, Dataset, TrainOutcome};

/// What a sweep ranks configurations by, always on the validation split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMetric {
    ValidationMse,
    ValidationPearson,
    ValidationAccuracy,
}

impl SelectionMetric {
    fn higher_is_better(self) -> bool {
        !matches!(self, SelectionMetric::ValidationMse)
    }
}

impl std::str::FromStr for SelectionMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" | "validation-mse" => Ok(SelectionMetric::ValidationMse),
            "pearson" | "validation-pearson" => Ok(SelectionMetric::ValidationPearson),
            "accuracy" | "validation-accuracy" => Ok(SelectionMetric::ValidationAccuracy),
            other => Err(Error::InvalidConfig(format!("unknown selection metric `{other}`"))),
        }
    }
}

/// A hyperparameter dimension: an explicit list or a sampled range.
#[derive(Debug, Clone)]
pub enum ParamRange {
    List(Vec<f64>),
    /// Log-uniform over [lo, hi]; only meaningful with `samples` set.
    LogUniform { lo: f64, hi: f64 },
    /// Uniform over [lo, hi]; only meaningful with `samples` set.
    Uniform { lo: f64, hi: f64 },
}

/// Grids (or ranges) over architecture and training hyperparameters.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub architectures: Vec<Vec<usize>>,
    pub learning_rates: ParamRange,
    pub dropouts: ParamRange,
    pub batch_sizes: Vec<usize>,
    /// When set, draw this many sampled configurations instead of taking
    /// the full cartesian product.
    pub samples: Option<usize>,
    pub selection: SelectionMetric,
    /// Template supplying dimensions, head, epochs, patience, and base seed.
    pub base: MlpConfig,
}

impl SweepSpec {
    /// Discrete default grid: 1-3 hidden layers of 128/256/512 units,
    /// lr in {1e-4, 5e-4, 1e-3}, dropout in {0, 0.1, 0.2}.
    pub fn main_grid(base: MlpConfig, selection: SelectionMetric) -> Self {
        let mut architectures = Vec::new();
        for depth in 1..=3 {
            for width in [128usize, 256, 512] {
                architectures.push(vec![width; depth]);
            }
        }
        Self {
            architectures,
            learning_rates: ParamRange::List(vec![1e-4, 5e-4, 1e-3]),
            dropouts: ParamRange::List(vec![0.0, 0.1, 0.2]),
            batch_sizes: vec![base.batch_size],
            samples: None,
            selection,
            base,
        }
    }

    /// Sampled alternative: one hidden layer of 128/256/512 or two of
    /// 128/256, lr log-uniform in [1e-3, 1e-2], dropout uniform in [0, 0.5],
    /// batch size in {8, 16, 32}.
    pub fn sampled_ranges(base: MlpConfig, selection: SelectionMetric, samples: usize) -> Self {
        Self {
            architectures: vec![vec![128], vec![256], vec![512], vec![128, 128], vec![256, 256]],
            learning_rates: ParamRange::LogUniform { lo: 1e-3, hi: 1e-2 },
            dropouts: ParamRange::Uniform { lo: 0.0, hi: 0.5 },
            batch_sizes: vec![8, 16, 32],
            samples: Some(samples),
            selection,
            base,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.architectures.is_empty() || self.batch_sizes.is_empty() {
            return Err(Error::InvalidConfig("sweep grids must be non-empty".to_string()));
        }
        match (&self.learning_rates, self.samples) {
            (ParamRange::List(v), _) if v.is_empty() => {
                return Err(Error::InvalidConfig("learning-rate list is empty".to_string()))
            }
            (ParamRange::LogUniform { .. }, None) => {
                return Err(Error::InvalidConfig(
                    "sampled learning-rate range needs a sample budget".to_string(),
                ))
            }
            _ => {}
        }
        match (&self.dropouts, self.samples) {
            (ParamRange::List(v), _) if v.is_empty() => {
                return Err(Error::InvalidConfig("dropout list is empty".to_string()))
            }
            (ParamRange::Uniform { .. }, None) => {
                return Err(Error::InvalidConfig(
                    "sampled dropout range needs a sample budget".to_string(),
                ))
            }
            _ => {}
        }
        Ok(())
    }

    /// Materializes the configurations in deterministic grid (or sample)
    /// order. Per-config seeds are `base.seed + index`.
    pub fn configurations(&self) -> Result<Vec<MlpConfig>> {
        self.validate()?;
        let mut configs = Vec::new();
        match self.samples {
            None => {
                let lrs = match &self.learning_rates {
                    ParamRange::List(v) => v.clone(),
                    _ => unreachable!("validated"),
                };
                let drops = match &self.dropouts {
                    ParamRange::List(v) => v.clone(),
                    _ => unreachable!("validated"),
                };
                for arch in &self.architectures {
                    for &lr in &lrs {
                        for &dropout in &drops {
                            for &batch_size in &self.batch_sizes {
                                configs.push(MlpConfig {
                                    hidden_layers: arch.clone(),
                                    learning_rate: lr,
                                    dropout,
                                    batch_size,
                                    ..self.base.clone()
                                });
                            }
                        }
                    }
                }
            }
            Some(samples) => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.base.seed.wrapping_mul(0x9e37).wrapping_add(71));
                for _ in 0..samples {
                    let arch = self.architectures[rng.gen_range(0..self.architectures.len())].clone();
                    let lr = match &self.learning_rates {
                        ParamRange::List(v) => v[rng.gen_range(0..v.len())],
                        ParamRange::LogUniform { lo, hi } => {
                            (rng.gen_range(lo.ln()..=hi.ln())).exp()
                        }
                        ParamRange::Uniform { lo, hi } => rng.gen_range(*lo..=*hi),
                    };
                    let dropout = match &self.dropouts {
                        ParamRange::List(v) => v[rng.gen_range(0..v.len())],
                        ParamRange::Uniform { lo, hi } => rng.gen_range(*lo..=*hi),
                        ParamRange::LogUniform { lo, hi } => {
                            (rng.gen_range(lo.ln()..=hi.ln())).exp()
                        }
                    };
                    let batch_size = self.batch_sizes[rng.gen_range(0..self.batch_sizes.len())];
                    configs.push(MlpConfig {
                        hidden_layers: arch,
                        learning_rate: lr,
                        dropout,
                        batch_size,
                        ..self.base.clone()
                    });
                }
            }
        }
        for (index, config) in configs.iter_mut().enumerate() {
            config.seed = self.base.seed.wrapping_add(index as u64);
        }
        Ok(configs)
    }
}

/// One attempted configuration in rank order.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    /// Position in the original grid/sample order.
    pub index: usize,
    pub hidden_layers: Vec<usize>,
    pub learning_rate: f64,
    pub dropout: f64,
    pub batch_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_metric: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub struct SweepOutcome {
    /// Rows sorted best-first by the selection metric; failed configurations
    /// sink to the bottom with their error recorded.
    pub rows: Vec<SweepRow>,
    /// Grid index of the winning configuration.
    pub best_index: usize,
    pub best: TrainOutcome,
}

/// Trains every configuration (in parallel) and ranks them. Training
/// failures are recorded per row, not fatal.
pub fn sweep(spec: &SweepSpec, train_set: &Dataset, val_set: &Dataset) -> Result<SweepOutcome> {
    let configs = spec.configurations()?;
    let outcomes: Vec<(MlpConfig, std::result::Result<TrainOutcome, String>)> = configs
        .into_par_iter()
        .map(|config| {
            let outcome = train(&config, train_set, val_set).map_err(|e| e.to_string());
            (config, outcome)
        })
        .collect();

    let selection_value = |outcome: &TrainOutcome| -> f64 {
        let best = &outcome.log[outcome.best_epoch - 1];
        match spec.selection {
            SelectionMetric::ValidationMse => best.val_loss,
            SelectionMetric::ValidationPearson | SelectionMetric::ValidationAccuracy => {
                best.val_metric
            }
        }
    };

    let mut rows: Vec<(Option<f64>, SweepRow)> = Vec::with_capacity(outcomes.len());
    let mut best: Option<(f64, usize)> = None;
    for (index, (config, result)) in outcomes.iter().enumerate() {
        let row = match result {
            Ok(outcome) => {
                let value = selection_value(outcome);
                let ranked = if spec.selection.higher_is_better() { -value } else { value };
                if best.map_or(true, |(b, _)| ranked < b) {
                    best = Some((ranked, index));
                }
                let epoch = &outcome.log[outcome.best_epoch - 1];
                (
                    Some(ranked),
                    SweepRow {
                        index,
                        hidden_layers: config.hidden_layers.clone(),
                        learning_rate: config.learning_rate,
                        dropout: config.dropout,
                        batch_size: config.batch_size,
                        val_loss: Some(epoch.val_loss),
                        val_metric: Some(epoch.val_metric),
                        error: None,
                    },
                )
            }
            Err(msg) => (
                None,
                SweepRow {
                    index,
                    hidden_layers: config.hidden_layers.clone(),
                    learning_rate: config.learning_rate,
                    dropout: config.dropout,
                    batch_size: config.batch_size,
                    val_loss: None,
                    val_metric: None,
                    error: Some(msg.clone()),
                },
            ),
        };
        rows.push(row);
    }

    let (_, best_index) = best.ok_or_else(|| {
        Error::InvalidConfig("every sweep configuration failed to train".to_string())
    })?;
    let best_outcome = outcomes
        .into_iter()
        .nth(best_index)
        .and_then(|(_, r)| r.ok())
        .expect("best index points at a successful run");

    // Failed rows sort last; ties keep grid order.
    rows.sort_by(|(a, ra), (b, rb)| match (a, b) {
        (Some(x), Some(y)) => x.partial_cmp(y).unwrap().then(ra.index.cmp(&rb.index)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => ra.index.cmp(&rb.index),
    });

    Ok(SweepOutcome { rows: rows.into_iter().map(|(_, r)| r).collect(), best_index, best: best_outcome })
}

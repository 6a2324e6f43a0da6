//! From-scratch feed-forward predictors: forward/backward passes, Adam
//! training with early stopping, hyperparameter sweeps, per-layer analysis,
//! and evaluation metrics.

mod adam;
mod checkpoint;
mod layers;
mod metrics;
mod mlp;
mod sweep;
mod train;

pub use adam::{adam_step, adam_step_with, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_FORMAT_VERSION};
pub use layers::{layer_analysis, LayerReport};
pub use metrics::{
    accuracy, classification_metrics, mse_flat, pearson, pearson_flat, pearson_per_query_mean,
    MetricsReport,
};
pub use mlp::{gradient, loss, DropoutMasks, Gradients, Head, LayerGrad, MlpConfig, MlpModel, Targets};
pub use sweep::{sweep, ParamRange, SelectionMetric, SweepOutcome, SweepRow, SweepSpec};
pub use train::{predict_labels, train, Dataset, EpochLog, TrainOutcome};

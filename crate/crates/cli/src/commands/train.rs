//! `train`, `sweep`, and `layers`: predictor training and analysis.

use std::collections::HashMap;
use std::path::PathBuf;

use budgetsched_core::predictor::{
    classification_metrics, layer_analysis, pearson_per_query_mean, predict_labels,
    save_checkpoint, sweep, Head, MetricsReport, MlpConfig, SelectionMetric, SweepSpec, Targets,
    TrainOutcome,
};
use budgetsched_core::profiles::{features_by_layer, load_features, load_profiles, DifficultyLabel};
use clap::Args;
use serde::Serialize;

use crate::data::{effective_grid, join_features_profiles, split_dataset};
use crate::errors::{CliError, CliResult};
use crate::report::{write_json, write_training_log};
use crate::settings::{parse_list, resolve, Ctx};

fn parse_head(raw: &str) -> CliResult<Head> {
    match raw {
        "regress" | "regression" => Ok(Head::SigmoidRegression),
        "classify" | "classification" => Ok(Head::SoftmaxClassification),
        other => Err(CliError::Usage(format!("unknown head `{other}` (regress|classify)"))),
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// features.jsonl with hidden-state vectors.
    #[arg(long)]
    features: PathBuf,
    /// profiles.jsonl with targets (probs for regress, difficulty for classify).
    #[arg(long)]
    profiles: PathBuf,
    /// Feature layer to train on.
    #[arg(long)]
    layer: Option<u32>,
    /// regress (profile vectors) or classify (difficulty tiers).
    #[arg(long)]
    head: Option<String>,
    /// Comma-separated hidden layer widths, e.g. 256,256.
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    /// Fraction of the joined data held out for validation.
    #[arg(long)]
    val_frac: Option<f64>,
    #[arg(long)]
    window_tokens: Option<u32>,
    #[arg(long)]
    num_windows: Option<u32>,
    /// Also report the mean per-query correlation (regression only).
    #[arg(long)]
    pearson_per_query: bool,
}

struct Resolved {
    head: Head,
    layer: u32,
    val_frac: f64,
    config: MlpConfig,
}

fn resolve_train(ctx: &Ctx, args: &TrainArgs, input_dim: usize, output_dim: usize) -> CliResult<Resolved> {
    let cfg = &ctx.config;
    let head = parse_head(&resolve(args.head.clone(), cfg, "head", "regress".to_string())?)?;
    let defaults = match head {
        Head::SigmoidRegression => MlpConfig::regression(input_dim, output_dim),
        Head::SoftmaxClassification => MlpConfig::classification(input_dim),
    };
    let hidden_raw = resolve(
        args.hidden.clone(),
        cfg,
        "hidden",
        defaults
            .hidden_layers
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(","),
    )?;
    let config = MlpConfig {
        input_dim,
        hidden_layers: parse_list(&hidden_raw, "hidden width")?,
        output_dim: defaults.output_dim,
        head,
        dropout: resolve(args.dropout, cfg, "dropout", defaults.dropout)?,
        learning_rate: resolve(args.lr, cfg, "lr", defaults.learning_rate)?,
        batch_size: resolve(args.batch_size, cfg, "batch_size", defaults.batch_size)?,
        max_epochs: resolve(args.max_epochs, cfg, "max_epochs", defaults.max_epochs)?,
        patience: resolve(args.patience, cfg, "patience", defaults.patience)?,
        seed: ctx.seed,
    };
    Ok(Resolved {
        head,
        layer: resolve(args.layer, cfg, "layer", 1)?,
        val_frac: resolve(args.val_frac, cfg, "val_frac", 0.2)?,
        config,
    })
}

#[derive(Serialize)]
struct TrainMetrics {
    best_epoch: usize,
    epochs_run: usize,
    val: MetricsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    val_pearson_per_query_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    per_query_rows_skipped: Option<usize>,
}

fn evaluate_outcome(
    outcome: &TrainOutcome,
    val: &budgetsched_core::predictor::Dataset,
    per_query: bool,
) -> CliResult<TrainMetrics> {
    let (report, per_query_stats) = match &val.targets {
        Targets::Profiles(rows) => {
            let preds = outcome.model.forward(&val.x)?;
            let report = MetricsReport::regression(&preds, rows)?;
            let pq = if per_query { Some(pearson_per_query_mean(&preds, rows)?) } else { None };
            (report, pq)
        }
        Targets::Classes(classes) => {
            let truth: Vec<DifficultyLabel> = classes
                .iter()
                .map(|&c| DifficultyLabel::from_class_index(c).expect("valid class"))
                .collect();
            let preds = predict_labels(&outcome.model, &val.x)?;
            (classification_metrics(&preds, &truth)?, None)
        }
    };
    Ok(TrainMetrics {
        best_epoch: outcome.best_epoch,
        epochs_run: outcome.log.len(),
        val: report,
        val_pearson_per_query_mean: per_query_stats.map(|(m, _)| m),
        per_query_rows_skipped: per_query_stats.map(|(_, s)| s),
    })
}

pub fn run_train(ctx: &Ctx, args: &TrainArgs) -> CliResult<()> {
    let cfg = &ctx.config;
    let head = parse_head(&resolve(args.head.clone(), cfg, "head", "regress".to_string())?)?;
    let layer = resolve(args.layer, cfg, "layer", 1)?;
    let joined = join_features_profiles(
        &args.features,
        &args.profiles,
        layer,
        head,
        args.window_tokens,
        args.num_windows,
    )?;
    let output_dim = match head {
        Head::SigmoidRegression => joined.grid.num_windows(),
        Head::SoftmaxClassification => 3,
    };
    let resolved = resolve_train(ctx, args, joined.feature_dim, output_dim)?;
    let (train_set, val_set) = split_dataset(&joined.dataset, resolved.val_frac, ctx.seed)?;

    let outcome =
        ctx.with_pool(|| budgetsched_core::predictor::train(&resolved.config, &train_set, &val_set))??;
    let metrics = evaluate_outcome(&outcome, &val_set, args.pearson_per_query)?;

    ctx.ensure_out_dir()?;
    save_checkpoint(&ctx.out_path("checkpoint.json"), &outcome.model)?;
    write_training_log(&ctx.out_path("training_log.csv"), &outcome.log)?;
    write_json(&ctx.out_path("metrics.json"), &metrics)?;
    println!(
        "train: layer={layer} epochs={} best_epoch={} val_metric={}",
        outcome.log.len(),
        outcome.best_epoch,
        outcome.log[outcome.best_epoch - 1].val_metric
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    train: TrainArgs,
    /// Sweep preset: main (discrete grid) or appendix-sampled (ranges).
    #[arg(long)]
    preset: Option<String>,
    /// Sample budget for the sampled preset.
    #[arg(long)]
    samples: Option<usize>,
    /// Ranking metric: mse, pearson, or accuracy.
    #[arg(long)]
    metric: Option<String>,
}

#[derive(Serialize)]
struct SweepReport<'a> {
    preset: &'a str,
    configurations: usize,
    best_index: usize,
    best: TrainMetrics,
}

pub fn run_sweep(ctx: &Ctx, args: &SweepArgs) -> CliResult<()> {
    let cfg = &ctx.config;
    let head = parse_head(&resolve(args.train.head.clone(), cfg, "head", "regress".to_string())?)?;
    let layer = resolve(args.train.layer, cfg, "layer", 1)?;
    let joined = join_features_profiles(
        &args.train.features,
        &args.train.profiles,
        layer,
        head,
        args.train.window_tokens,
        args.train.num_windows,
    )?;
    let output_dim = match head {
        Head::SigmoidRegression => joined.grid.num_windows(),
        Head::SoftmaxClassification => 3,
    };
    let resolved = resolve_train(ctx, &args.train, joined.feature_dim, output_dim)?;
    let (train_set, val_set) = split_dataset(&joined.dataset, resolved.val_frac, ctx.seed)?;

    let default_metric = match head {
        Head::SigmoidRegression => "mse",
        Head::SoftmaxClassification => "accuracy",
    };
    let selection: SelectionMetric =
        resolve(args.metric.clone(), cfg, "metric", default_metric.to_string())?.parse()?;
    let preset = resolve(args.preset.clone(), cfg, "preset", "main".to_string())?;
    let spec = match preset.as_str() {
        "main" => SweepSpec::main_grid(resolved.config.clone(), selection),
        "appendix-sampled" => {
            let samples = resolve(args.samples, cfg, "samples", 16)?;
            SweepSpec::sampled_ranges(resolved.config.clone(), selection, samples)
        }
        other => return Err(CliError::Usage(format!("unknown preset `{other}`"))),
    };

    let outcome = ctx.with_pool(|| sweep(&spec, &train_set, &val_set))??;
    let metrics = evaluate_outcome(&outcome.best, &val_set, args.train.pearson_per_query)?;

    ctx.ensure_out_dir()?;
    let sweep_csv = ctx.out_path("sweep.csv");
    let mut lines = vec!["rank,index,hidden,lr,dropout,batch_size,val_loss,val_metric,error".to_string()];
    for (rank, row) in outcome.rows.iter().enumerate() {
        lines.push(format!(
            "{},{},{},{},{},{},{},{},{}",
            rank,
            row.index,
            row.hidden_layers.iter().map(ToString::to_string).collect::<Vec<_>>().join("x"),
            row.learning_rate,
            row.dropout,
            row.batch_size,
            row.val_loss.map(|v| v.to_string()).unwrap_or_default(),
            row.val_metric.map(|v| v.to_string()).unwrap_or_default(),
            row.error.clone().unwrap_or_default().replace(',', ";"),
        ));
    }
    std::fs::write(&sweep_csv, lines.join("\n") + "\n")
        .map_err(|e| CliError::Write(sweep_csv.clone(), e))?;

    save_checkpoint(&ctx.out_path("best_checkpoint.json"), &outcome.best.model)?;
    write_training_log(&ctx.out_path("training_log.csv"), &outcome.best.log)?;
    write_json(
        &ctx.out_path("metrics.json"),
        &SweepReport {
            preset: &preset,
            configurations: outcome.rows.len(),
            best_index: outcome.best_index,
            best: metrics,
        },
    )?;
    println!(
        "sweep: preset={preset} configurations={} best_index={}",
        outcome.rows.len(),
        outcome.best_index
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct LayersArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    profiles: PathBuf,
    /// Restrict to these layers (comma-separated); default all in the file.
    #[arg(long)]
    layers: Option<String>,
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    val_frac: Option<f64>,
    #[arg(long)]
    window_tokens: Option<u32>,
    #[arg(long)]
    num_windows: Option<u32>,
}

pub fn run_layers(ctx: &Ctx, args: &LayersArgs) -> CliResult<()> {
    let cfg = &ctx.config;
    let grid = effective_grid(&args.profiles, args.window_tokens, args.num_windows)?;
    let records = load_profiles(&args.profiles, &grid)?;
    let targets: HashMap<String, Vec<f64>> = records
        .iter()
        .map(|r| Ok((r.id.clone(), r.profile()?.probs().to_vec())))
        .collect::<Result<_, budgetsched_core::Error>>()?;

    let mut features = features_by_layer(load_features(&args.features)?);
    if let Some(filter) = &args.layers {
        let keep: Vec<u32> = parse_list(filter, "layer")?;
        features.retain(|layer, _| keep.contains(layer));
        if features.is_empty() {
            return Err(CliError::Usage(format!("no feature rows for layers {filter}")));
        }
    }

    let hidden_raw = resolve(args.hidden.clone(), cfg, "hidden", "256,256".to_string())?;
    let base = MlpConfig {
        hidden_layers: parse_list(&hidden_raw, "hidden width")?,
        learning_rate: resolve(args.lr, cfg, "lr", 1e-3)?,
        batch_size: resolve(args.batch_size, cfg, "batch_size", 32)?,
        max_epochs: resolve(args.max_epochs, cfg, "max_epochs", 100)?,
        patience: resolve(args.patience, cfg, "patience", 10)?,
        seed: ctx.seed,
        ..MlpConfig::regression(1, grid.num_windows())
    };
    let val_frac = resolve(args.val_frac, cfg, "val_frac", 0.2)?;

    let reports =
        ctx.with_pool(|| layer_analysis(&features, &targets, &base, val_frac, ctx.seed))??;

    ctx.ensure_out_dir()?;
    let csv = ctx.out_path("layer_metrics.csv");
    let mut lines =
        vec!["layer,n_train,n_test,train_pearson,test_pearson,test_mse,correlation_to_loss".to_string()];
    for r in &reports {
        lines.push(format!(
            "{},{},{},{},{},{},{}",
            r.layer, r.n_train, r.n_test, r.train_pearson, r.test_pearson, r.test_mse, r.correlation_to_loss
        ));
    }
    std::fs::write(&csv, lines.join("\n") + "\n").map_err(|e| CliError::Write(csv.clone(), e))?;
    write_json(&ctx.out_path("layer_metrics.json"), &reports)?;

    let best = reports
        .iter()
        .max_by(|a, b| a.test_pearson.partial_cmp(&b.test_pearson).expect("finite"))
        .expect("at least one layer");
    println!("layers: analyzed={} best_layer={} test_pearson={}", reports.len(), best.layer, best.test_pearson);
    Ok(())
}

//! `predict`: run a checkpoint over a feature file and dump predictions in
//! the shared JSONL formats.

use std::path::PathBuf;

use budgetsched_core::predictor::{load_checkpoint, predict_labels, Head};
use budgetsched_core::profiles::{load_features, save_profiles, EarlyStopProfile, QueryRecord};
use budgetsched_core::BudgetGrid;
use clap::Args;

use crate::errors::{CliError, CliResult};
use crate::settings::{resolve, Ctx};

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    features: PathBuf,
    /// Feature layer to read.
    #[arg(long)]
    layer: Option<u32>,
    /// Window size for the predictions' grid header (regression).
    #[arg(long)]
    window_tokens: Option<u32>,
}

pub fn run(ctx: &Ctx, args: &PredictArgs) -> CliResult<()> {
    let cfg = &ctx.config;
    let layer = resolve(args.layer, cfg, "layer", 1)?;
    let model = load_checkpoint(&args.checkpoint)?;
    let features: Vec<_> = load_features(&args.features)?
        .into_iter()
        .filter(|f| f.layer == layer)
        .collect();
    if features.is_empty() {
        return Err(CliError::Core(budgetsched_core::Error::ShapeMismatch(format!(
            "{} has no rows for layer {layer}",
            args.features.display()
        ))));
    }
    let input_dim = model.config().input_dim;
    if features[0].vec.len() != input_dim {
        return Err(CliError::Core(budgetsched_core::Error::ShapeMismatch(format!(
            "checkpoint expects {input_dim} features, file has {}",
            features[0].vec.len()
        ))));
    }

    ctx.ensure_out_dir()?;
    match model.config().head {
        Head::SigmoidRegression => {
            let window_tokens = resolve(args.window_tokens, cfg, "window_tokens", 16)?;
            let grid = BudgetGrid::new(window_tokens, model.config().output_dim as u32)?;
            let mut records = Vec::with_capacity(features.len());
            for f in &features {
                let probs = model.predict(&f.vec)?;
                records.push(
                    QueryRecord::new(f.id.clone())
                        .with_profile(EarlyStopProfile::new(probs, &grid)?),
                );
            }
            save_profiles(&ctx.out_path("predictions.jsonl"), &grid, &records)?;
            println!("predict: wrote {} predicted profiles", records.len());
        }
        Head::SoftmaxClassification => {
            let xs: Vec<Vec<f64>> = features.iter().map(|f| f.vec.clone()).collect();
            let labels = predict_labels(&model, &xs)?;
            let records: Vec<QueryRecord> = features
                .iter()
                .zip(&labels)
                .map(|(f, &label)| QueryRecord::new(f.id.clone()).with_difficulty(label))
                .collect();
            // Labels ride the shared profiles.jsonl format (no probs).
            let grid = BudgetGrid::default();
            save_profiles(&ctx.out_path("labels.jsonl"), &grid, &records)?;

            let logits_path = ctx.out_path("logits.csv");
            let mut lines = vec!["id,logit_easy,logit_medium,logit_hard".to_string()];
            for f in &features {
                let logits = model.predict(&f.vec)?;
                lines.push(format!("{},{},{},{}", f.id, logits[0], logits[1], logits[2]));
            }
            std::fs::write(&logits_path, lines.join("\n") + "\n")
                .map_err(|e| CliError::Write(logits_path.clone(), e))?;
            println!("predict: wrote {} predicted labels", records.len());
        }
    }
    Ok(())
}

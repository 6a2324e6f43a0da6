//! `label`: assign difficulty tiers from computed or explicit thresholds.

use std::path::PathBuf;

use budgetsched_core::profiles::{
    compute_percentile_thresholds, label_batch, load_profiles, save_profiles, DifficultyThresholds,
};
use clap::Args;
use serde::Serialize;

use crate::data::effective_grid;
use crate::errors::{CliError, CliResult};
use crate::report::write_json;
use crate::settings::{resolve_opt, Ctx};

#[derive(Debug, Args)]
pub struct LabelArgs {
    /// Input profiles.jsonl.
    #[arg(long)]
    profiles: PathBuf,
    /// Explicit hard threshold; requires --p80.
    #[arg(long)]
    p20: Option<f64>,
    /// Explicit easy threshold; requires --p20.
    #[arg(long)]
    p80: Option<f64>,
    #[arg(long)]
    window_tokens: Option<u32>,
    #[arg(long)]
    num_windows: Option<u32>,
}

#[derive(Serialize)]
struct LabelSummary {
    total: usize,
    easy: usize,
    medium: usize,
    hard: usize,
    p20: f64,
    p80: f64,
    thresholds_source: &'static str,
}

pub fn run(ctx: &Ctx, args: &LabelArgs) -> CliResult<()> {
    let cfg = &ctx.config;
    let p20 = resolve_opt(args.p20, cfg, "p20")?;
    let p80 = resolve_opt(args.p80, cfg, "p80")?;
    let grid = effective_grid(&args.profiles, args.window_tokens, args.num_windows)?;
    let mut records = load_profiles(&args.profiles, &grid)?;

    let (thresholds, source) = match (p20, p80) {
        (Some(p20), Some(p80)) => (DifficultyThresholds::new(p20, p80)?, "explicit"),
        (None, None) => (compute_percentile_thresholds(&records, &grid)?, "computed"),
        _ => {
            return Err(CliError::Usage(
                "--p20 and --p80 must be given together (or neither)".to_string(),
            ))
        }
    };
    label_batch(&mut records, &thresholds)?;

    let mut counts = [0usize; 3];
    for record in &records {
        counts[record.difficulty.expect("just labeled").class_index()] += 1;
    }

    ctx.ensure_out_dir()?;
    save_profiles(&ctx.out_path("labeled.jsonl"), &grid, &records)?;
    write_json(
        &ctx.out_path("label_summary.json"),
        &LabelSummary {
            total: records.len(),
            easy: counts[0],
            medium: counts[1],
            hard: counts[2],
            p20: thresholds.p20,
            p80: thresholds.p80,
            thresholds_source: source,
        },
    )?;
    println!(
        "label: total={} easy={} medium={} hard={} p20={} p80={} ({source})",
        records.len(),
        counts[0],
        counts[1],
        counts[2],
        thresholds.p20,
        thresholds.p80
    );
    Ok(())
}

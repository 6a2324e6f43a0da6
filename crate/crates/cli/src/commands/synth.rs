//! `synth`: generate a synthetic labeled batch plus feature vectors.

use budgetsched_core::profiles::{generate_synthetic_batch, save_features, save_profiles, SynthSpec};
use budgetsched_core::BudgetGrid;
use clap::Args;
use serde::Serialize;

use crate::errors::{CliError, CliResult};
use crate::report::write_json;
use crate::settings::{parse_list, resolve, resolve_opt, Ctx};

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of queries to generate.
    #[arg(long)]
    n: Option<usize>,
    /// Class proportions easy,medium,hard (must sum to 1).
    #[arg(long)]
    proportions: Option<String>,
    /// Gaussian jitter applied to profiles and features.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    feature_dim: Option<usize>,
    #[arg(long)]
    window_tokens: Option<u32>,
    #[arg(long)]
    num_windows: Option<u32>,
    /// Layer index carrying the informative features.
    #[arg(long)]
    informative_layer: Option<u32>,
    /// Also emit a pure-noise feature layer with this index.
    #[arg(long)]
    noise_layer: Option<u32>,
}

#[derive(Serialize)]
struct SynthManifest<'a> {
    seed: u64,
    spec: &'a SynthSpec,
    class_counts: [usize; 3],
    profiles_file: String,
    features_file: String,
}

pub fn run(ctx: &Ctx, args: &SynthArgs) -> CliResult<()> {
    let cfg = &ctx.config;
    let proportions_raw =
        resolve(args.proportions.clone(), cfg, "proportions", "0.2,0.6,0.2".to_string())?;
    let proportions: Vec<f64> = parse_list(&proportions_raw, "proportion")?;
    let proportions: [f64; 3] = proportions
        .try_into()
        .map_err(|_| CliError::Usage("--proportions needs exactly three values".to_string()))?;

    let grid = BudgetGrid::new(
        resolve(args.window_tokens, cfg, "window_tokens", 16)?,
        resolve(args.num_windows, cfg, "num_windows", 16)?,
    )?;
    let spec = SynthSpec {
        count: resolve(args.n, cfg, "n", 100)?,
        proportions,
        noise: resolve(args.noise, cfg, "noise", 0.0)?,
        grid,
        feature_dim: resolve(args.feature_dim, cfg, "feature_dim", 32)?,
        informative_layer: resolve(args.informative_layer, cfg, "informative_layer", 1)?,
        noise_layer: resolve_opt(args.noise_layer, cfg, "noise_layer")?,
    };
    let batch = generate_synthetic_batch(&spec, ctx.seed)?;

    let mut class_counts = [0usize; 3];
    for record in &batch.records {
        class_counts[record.difficulty.expect("synth labels everything").class_index()] += 1;
    }

    ctx.ensure_out_dir()?;
    let profiles_path = ctx.out_path("profiles.jsonl");
    let features_path = ctx.out_path("features.jsonl");
    save_profiles(&profiles_path, &grid, &batch.records)?;
    save_features(&features_path, &batch.features)?;
    write_json(
        &ctx.out_path("synth_manifest.json"),
        &SynthManifest {
            seed: ctx.seed,
            spec: &spec,
            class_counts,
            profiles_file: "profiles.jsonl".to_string(),
            features_file: "features.jsonl".to_string(),
        },
    )?;
    log::info!(
        "wrote {} records ({} easy / {} medium / {} hard) to {}",
        batch.records.len(),
        class_counts[0],
        class_counts[1],
        class_counts[2],
        profiles_path.display()
    );
    println!(
        "synth: n={} easy={} medium={} hard={} seed={}",
        batch.records.len(),
        class_counts[0],
        class_counts[1],
        class_counts[2],
        ctx.seed
    );
    Ok(())
}

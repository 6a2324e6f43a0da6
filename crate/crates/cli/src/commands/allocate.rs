//! `allocate`: run allocation strategies across budgets and emit the
//! accuracy-vs-budget report.

use std::path::PathBuf;

use budgetsched_core::allocator::{evaluate_strategy_curve, EvalSpec, GreedyMode, Strategy};
use budgetsched_core::profiles::{class_accuracy_curves, load_profiles};
use clap::Args;

use crate::data::effective_grid;
use crate::errors::{CliError, CliResult};
use crate::report::{write_allocation_dump, write_class_budgets_csv, write_curve_csv, write_json};
use crate::settings::{parse_list, resolve, Ctx};

#[derive(Debug, Args)]
pub struct AllocateArgs {
    /// Ground-truth profiles.jsonl (scoring always uses these).
    #[arg(long)]
    truth: PathBuf,
    /// Predicted profiles and/or labels, aligned by id, for the
    /// *-predicted strategies.
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Labeled profiles to derive class accuracy curves from (e.g. a
    /// training split). Defaults to curves derived from the truth batch.
    #[arg(long)]
    curves_from: Option<PathBuf>,
    /// Comma-separated strategies; default "uniform,greedy-oracle".
    #[arg(long)]
    strategies: Option<String>,
    /// Comma-separated budgets; default: every grid budget.
    #[arg(long)]
    budgets: Option<String>,
    /// Split name stamped into the report rows.
    #[arg(long)]
    split: Option<String>,
    /// Compute greedy gains on each profile's concave envelope.
    #[arg(long)]
    lookahead: bool,
    /// Skip the per-(strategy, budget) allocation dump files.
    #[arg(long)]
    no_dumps: bool,
    #[arg(long)]
    window_tokens: Option<u32>,
    #[arg(long)]
    num_windows: Option<u32>,
}

pub fn run(ctx: &Ctx, args: &AllocateArgs) -> CliResult<()> {
    let cfg = &ctx.config;
    let grid = effective_grid(&args.truth, args.window_tokens, args.num_windows)?;
    let truth = load_profiles(&args.truth, &grid)?;
    let predicted = match &args.predictions {
        Some(path) => Some(load_profiles(path, &grid)?),
        None => None,
    };
    let external_curves = match &args.curves_from {
        Some(path) => {
            let source = load_profiles(path, &grid)?;
            Some(class_accuracy_curves(&source, &grid)?)
        }
        None => None,
    };

    let strategies_raw =
        resolve(args.strategies.clone(), cfg, "strategies", "uniform,greedy-oracle".to_string())?;
    let strategies: Vec<Strategy> = strategies_raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<Strategy>().map_err(CliError::Core))
        .collect::<CliResult<_>>()?;
    if strategies.is_empty() {
        return Err(CliError::Usage("no strategies requested".to_string()));
    }

    let budgets: Vec<u32> = match resolve(args.budgets.clone(), cfg, "budgets", String::new())? {
        raw if raw.is_empty() => grid.budgets().collect(),
        raw => parse_list(&raw, "budget")?,
    };
    for &b in &budgets {
        grid.index_of(b).map_err(CliError::Core)?;
    }
    let split = resolve(args.split.clone(), cfg, "split", "test".to_string())?;

    let spec = EvalSpec {
        truth: &truth,
        predicted: predicted.as_deref(),
        curves: external_curves.as_ref(),
        budgets: &budgets,
        grid,
        split: &split,
        greedy_mode: if args.lookahead { GreedyMode::Lookahead } else { GreedyMode::Faithful },
    };
    let report = evaluate_strategy_curve(&strategies, &spec)?;

    ctx.ensure_out_dir()?;
    write_curve_csv(&ctx.out_path("curve.csv"), &report.rows)?;
    write_json(&ctx.out_path("curve.json"), &report.rows)?;
    write_class_budgets_csv(&ctx.out_path("class_budgets.csv"), &report.class_budgets)?;
    if !args.no_dumps {
        for dump in &report.dumps {
            let name = format!("alloc_{}_{}.csv", dump.strategy, dump.budget);
            write_allocation_dump(&ctx.out_path(&name), dump)?;
        }
    }
    println!(
        "allocate: strategies={} budgets={} rows={}",
        strategies.len(),
        budgets.len(),
        report.rows.len()
    );
    Ok(())
}

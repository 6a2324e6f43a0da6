//! CSV and JSON report writers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use budgetsched_core::allocator::{AllocationDump, ClassBudgetRow, CurveRow};
use serde::Serialize;

use crate::errors::{CliError, CliResult};

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| CliError::Write(path.to_path_buf(), e))?,
    ))
}

fn wr(path: &Path, w: &mut impl Write, line: std::fmt::Arguments<'_>) -> CliResult<()> {
    writeln!(w, "{line}").map_err(|e| CliError::Write(path.to_path_buf(), e))
}

/// `curve.csv`: one row per (strategy, budget), pre-sorted by the evaluator.
pub fn write_curve_csv(path: &Path, rows: &[CurveRow]) -> CliResult<()> {
    let mut w = create(path)?;
    wr(path, &mut w, format_args!("budget,strategy,split,accuracy,total_tokens_used"))?;
    for r in rows {
        wr(
            path,
            &mut w,
            format_args!("{},{},{},{},{}", r.budget, r.strategy, r.split, r.accuracy, r.total_tokens_used),
        )?;
    }
    w.flush().map_err(|e| CliError::Write(path.to_path_buf(), e))
}

pub fn write_class_budgets_csv(path: &Path, rows: &[ClassBudgetRow]) -> CliResult<()> {
    let mut w = create(path)?;
    wr(path, &mut w, format_args!("budget,strategy,class,mean_tokens,count"))?;
    for r in rows {
        wr(
            path,
            &mut w,
            format_args!("{},{},{},{},{}", r.budget, r.strategy, r.class, r.mean_tokens, r.count),
        )?;
    }
    w.flush().map_err(|e| CliError::Write(path.to_path_buf(), e))
}

/// One allocation dump per (strategy, budget): `id,label,budget` rows.
pub fn write_allocation_dump(path: &Path, dump: &AllocationDump) -> CliResult<()> {
    let mut w = create(path)?;
    wr(path, &mut w, format_args!("id,label,budget"))?;
    for (id, label, tokens) in &dump.rows {
        wr(path, &mut w, format_args!("{id},{label},{tokens}"))?;
    }
    w.flush().map_err(|e| CliError::Write(path.to_path_buf(), e))
}

/// Pretty-printed JSON artifact (reports, manifests, metrics).
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| CliError::Write(path.to_path_buf(), std::io::Error::other(e)))?;
    wr(path, &mut w, format_args!(""))?;
    w.flush().map_err(|e| CliError::Write(path.to_path_buf(), e))
}

/// Training log CSV: `epoch,train_loss,val_loss,val_metric`.
pub fn write_training_log(path: &Path, log: &[budgetsched_core::predictor::EpochLog]) -> CliResult<()> {
    let mut w = create(path)?;
    wr(path, &mut w, format_args!("epoch,train_loss,val_loss,val_metric"))?;
    for e in log {
        wr(path, &mut w, format_args!("{},{},{},{}", e.epoch, e.train_loss, e.val_loss, e.val_metric))?;
    }
    w.flush().map_err(|e| CliError::Write(path.to_path_buf(), e))
}

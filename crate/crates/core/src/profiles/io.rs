//! JSONL readers and writers for profile batches and feature datasets.
//!
//! `profiles.jsonl` holds one query record per line. An optional first line
//! `{"_grid": {"window_tokens": W, "num_windows": K}}` declares the grid the
//! probability vectors were probed on; an explicitly supplied grid wins over
//! the header on conflict.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::BudgetGrid;
use crate::profiles::types::{DifficultyLabel, EarlyStopProfile, FeatureRecord, QueryRecord};

#[derive(Serialize, Deserialize)]
struct ProfileLine {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    difficulty: Option<DifficultyLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    question: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    question_token_len: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    answer: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct GridHeader {
    _grid: BudgetGrid,
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source }
}

/// Reads the grid header of a profiles file, if one is present.
pub fn peek_grid(path: &Path) -> Result<Option<BudgetGrid>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| io_err(path, e))?;
    Ok(serde_json::from_str::<GridHeader>(first.trim()).ok().map(|h| h._grid))
}

/// Decides the effective grid for a profiles file: an explicit grid wins,
/// then the file header, then the default 16x16 grid.
pub fn resolve_grid(path: &Path, explicit: Option<BudgetGrid>) -> Result<BudgetGrid> {
    let header = peek_grid(path)?;
    match (explicit, header) {
        (Some(flag), Some(hdr)) => {
            if flag != hdr {
                log::warn!(
                    "{}: grid header {:?} overridden by explicit grid {:?}",
                    path.display(),
                    hdr,
                    flag
                );
            }
            Ok(flag)
        }
        (Some(flag), None) => Ok(flag),
        (None, Some(hdr)) => Ok(hdr),
        (None, None) => Ok(BudgetGrid::default()),
    }
}

/// Loads a profile batch, validating every probability vector against `grid`.
///
/// Records come back in file order. Errors carry the 1-based line number of
/// the offending record.
pub fn load_profiles(path: &Path, grid: &BudgetGrid) -> Result<Vec<QueryRecord>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);

    let mut records = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (line_idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if line_idx == 0 && serde_json::from_str::<GridHeader>(trimmed).is_ok() {
            continue;
        }
        let parsed: ProfileLine = serde_json::from_str(trimmed).map_err(|e| Error::MalformedLine {
            path: path.to_path_buf(),
            line: line_idx + 1,
            msg: e.to_string(),
        })?;
        if !seen.insert(parsed.id.clone()) {
            return Err(Error::DuplicateId(parsed.id));
        }
        let profile = match parsed.probs {
            Some(probs) => Some(EarlyStopProfile::validated(probs, grid, &parsed.id)?),
            None => None,
        };
        records.push(QueryRecord {
            id: parsed.id,
            profile,
            difficulty: parsed.difficulty,
            question_text: parsed.question,
            question_token_len: parsed.question_token_len,
            ground_truth_answer: parsed.answer,
        });
    }
    Ok(records)
}

/// Writes a profile batch with a grid header line. LF line endings.
pub fn save_profiles(path: &Path, grid: &BudgetGrid, batch: &[QueryRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut writer = BufWriter::new(file);
    let write =
        |w: &mut BufWriter<File>, s: String| -> Result<()> { writeln!(w, "{s}").map_err(|e| io_err(path, e)) };

    write(&mut writer, serde_json::to_string(&GridHeader { _grid: *grid }).expect("grid serializes"))?;
    for record in batch {
        let line = ProfileLine {
            id: record.id.clone(),
            probs: record.profile.as_ref().map(|p| p.probs().to_vec()),
            difficulty: record.difficulty,
            question: record.question_text.clone(),
            question_token_len: record.question_token_len,
            answer: record.ground_truth_answer.clone(),
        };
        write(&mut writer, serde_json::to_string(&line).expect("record serializes"))?;
    }
    writer.flush().map_err(|e| io_err(path, e))
}

/// Loads feature records. All records of one layer must share a dimension.
pub fn load_features(path: &Path) -> Result<Vec<FeatureRecord>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);

    let mut records: Vec<FeatureRecord> = Vec::new();
    let mut dim_by_layer: HashMap<u32, usize> = HashMap::new();
    for (line_idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let record: FeatureRecord = serde_json::from_str(trimmed).map_err(|e| Error::MalformedLine {
            path: path.to_path_buf(),
            line: line_idx + 1,
            msg: e.to_string(),
        })?;
        if record.layer == 0 {
            return Err(Error::MalformedLine {
                path: path.to_path_buf(),
                line: line_idx + 1,
                msg: "layer index must be >= 1".to_string(),
            });
        }
        match dim_by_layer.get(&record.layer) {
            Some(&dim) if dim != record.vec.len() => {
                return Err(Error::MalformedLine {
                    path: path.to_path_buf(),
                    line: line_idx + 1,
                    msg: format!(
                        "feature dim {} disagrees with earlier dim {} for layer {}",
                        record.vec.len(),
                        dim,
                        record.layer
                    ),
                });
            }
            Some(_) => {}
            None => {
                dim_by_layer.insert(record.layer, record.vec.len());
            }
        }
        records.push(record);
    }
    Ok(records)
}

pub fn save_features(path: &Path, records: &[FeatureRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut writer = BufWriter::new(file);
    for record in records {
        writeln!(writer, "{}", serde_json::to_string(record).expect("record serializes"))
            .map_err(|e| io_err(path, e))?;
    }
    writer.flush().map_err(|e| io_err(path, e))
}

/// Groups feature records by layer, preserving file order within each layer.
pub fn features_by_layer(records: Vec<FeatureRecord>) -> BTreeMap<u32, Vec<FeatureRecord>> {
    let mut map: BTreeMap<u32, Vec<FeatureRecord>> = BTreeMap::new();
    for record in records {
        map.entry(record.layer).or_default().push(record);
    }
    map
}

//! Empirical profile estimation: force an answer at every probe point of
//! every trace and count the fraction of correct forks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::BudgetGrid;
use crate::probing::answer::{clean_numeric, score_answer};
use crate::probing::client::{GenerationClient, GenerationRequest};
use crate::profiles::{EarlyStopProfile, QueryRecord};

/// The fixed text that forces the model to emit a boxed final answer,
/// byte-for-byte as the generation pipeline prints it.
pub const PROBE_STRING: &str =
    "Oh, I suddenly got the answer to the whole problem, Final Answer\\n\\n\\[ \\boxed{";

/// How probes interact with the ongoing trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeInsertion {
    /// Fork at each checkpoint: the probe is appended to a copy of the
    /// prefix and the main trace never sees it.
    #[default]
    Fork,
    /// Append the probe and its completion into the trace itself, so later
    /// windows continue from the contaminated prefix. Probe positions still
    /// count only the model's own reasoning tokens.
    InPlace,
}

/// Probing parameters: probe grid, sampling settings, and the trace count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub probe_string: String,
    pub interval_tokens: u32,
    pub max_tokens: u32,
    pub traces_per_question: u32,
    pub temperature: f64,
    pub top_p: f64,
    /// Tokens the client may spend completing a probe's boxed answer.
    pub answer_completion_cap: u32,
    pub insertion: ProbeInsertion,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            probe_string: PROBE_STRING.to_string(),
            interval_tokens: 16,
            max_tokens: 256,
            traces_per_question: 100,
            temperature: 0.7,
            top_p: 0.95,
            answer_completion_cap: 32,
            insertion: ProbeInsertion::Fork,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.probe_string.is_empty() {
            return Err(Error::InvalidConfig("probe string is empty".to_string()));
        }
        if self.interval_tokens == 0 || self.max_tokens == 0 {
            return Err(Error::InvalidConfig("probe interval and max tokens must be >= 1".to_string()));
        }
        if self.max_tokens % self.interval_tokens != 0 {
            return Err(Error::InvalidConfig(format!(
                "max tokens {} is not a multiple of the probe interval {}",
                self.max_tokens, self.interval_tokens
            )));
        }
        if self.traces_per_question == 0 {
            return Err(Error::InvalidConfig("traces_per_question must be >= 1".to_string()));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(Error::InvalidConfig(format!("bad temperature {}", self.temperature)));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::InvalidConfig(format!("top_p {} not in (0, 1]", self.top_p)));
        }
        if self.answer_completion_cap == 0 {
            return Err(Error::InvalidConfig("answer_completion_cap must be >= 1".to_string()));
        }
        Ok(())
    }

    /// Token positions probed: interval, 2*interval, ..., max_tokens.
    pub fn probe_points(&self) -> Vec<u32> {
        (1..=self.max_tokens / self.interval_tokens).map(|k| k * self.interval_tokens).collect()
    }

    /// The grid this configuration estimates profiles on.
    pub fn grid(&self) -> Result<BudgetGrid> {
        BudgetGrid::new(self.interval_tokens, self.max_tokens / self.interval_tokens)
    }
}

/// Bookkeeping of one profile estimation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeStats {
    /// Traces dropped after a client failure; excluded from the denominator.
    pub failed_traces: u32,
    pub counted_traces: u32,
}

fn run_trace(
    question: &str,
    truth: &str,
    client: &dyn GenerationClient,
    config: &ProbeConfig,
    seed: u64,
) -> Result<Vec<bool>> {
    let points = config.probe_points();
    let mut trace = String::new();
    let mut flags = Vec::with_capacity(points.len());
    for _ in &points {
        let continuation = client.generate(&GenerationRequest {
            prompt: &format!("{question}\n{trace}"),
            temperature: config.temperature,
            top_p: config.top_p,
            max_tokens: config.interval_tokens,
            seed,
        })?;
        let chunk = continuation.text.trim();
        if !chunk.is_empty() {
            if !trace.is_empty() {
                trace.push(' ');
            }
            trace.push_str(chunk);
        }

        let forked_prefix = format!("{trace} {}", config.probe_string);
        let completion = client.generate(&GenerationRequest {
            prompt: &format!("{question}\n{forked_prefix}"),
            temperature: config.temperature,
            top_p: config.top_p,
            max_tokens: config.answer_completion_cap,
            seed,
        })?;
        let forked_text = format!("{forked_prefix}{}", completion.text);
        flags.push(score_answer(&forked_text, truth)?);
        if config.insertion == ProbeInsertion::InPlace {
            trace = format!("{trace} {}{}", config.probe_string, completion.text);
        }
    }
    Ok(flags)
}

/// Estimates one query's early-stopping profile by running
/// `traces_per_question` seeded traces and scoring a forked probe completion
/// at every probe point. Entry `j` is the fraction of counted traces whose
/// fork at probe point `j` was correct.
///
/// Traces failing on a client error are excluded from the denominator and
/// reported in the stats. Aggregation is a commutative count, so results do
/// not depend on trace completion order.
pub fn estimate_profile(
    question: &QueryRecord,
    client: &dyn GenerationClient,
    config: &ProbeConfig,
    grid: &BudgetGrid,
    seed: u64,
) -> Result<(EarlyStopProfile, ProbeStats)> {
    config.validate()?;
    let config_grid = config.grid()?;
    if config_grid != *grid {
        return Err(Error::InvalidConfig(format!(
            "probe grid {config_grid:?} does not match the requested grid {grid:?}"
        )));
    }
    let text = question
        .question_text
        .as_deref()
        .ok_or_else(|| Error::MissingField { id: question.id.clone(), field: "question" })?;
    let truth = question
        .ground_truth_answer
        .as_deref()
        .ok_or_else(|| Error::MissingField { id: question.id.clone(), field: "answer" })?;
    if clean_numeric(truth).is_none() {
        return Err(Error::ResponseParse(format!(
            "{}: ground-truth answer `{truth}` is not numeric",
            question.id
        )));
    }

    let trace_runs: Vec<Result<Vec<bool>>> = (0..config.traces_per_question)
        .into_par_iter()
        .map(|t| run_trace(text, truth, client, config, seed.wrapping_add(t as u64)))
        .collect();

    let k = grid.num_windows();
    let mut counts = vec![0u32; k];
    let mut failed = 0u32;
    let mut counted = 0u32;
    for run in trace_runs {
        match run {
            Ok(flags) => {
                counted += 1;
                for (count, hit) in counts.iter_mut().zip(flags) {
                    if hit {
                        *count += 1;
                    }
                }
            }
            Err(e) => {
                log::warn!("{}: trace failed: {e}", question.id);
                failed += 1;
            }
        }
    }
    if counted == 0 {
        return Err(Error::Client(format!("{}: every trace failed", question.id)));
    }

    let probs = counts.iter().map(|&c| c as f64 / counted as f64).collect();
    Ok((
        EarlyStopProfile::new(probs, grid)?,
        ProbeStats { failed_traces: failed, counted_traces: counted },
    ))
}

//! `fewshot-prompt` and `fewshot-parse`: build classification prompts and
//! parse model replies into difficulty labels.

use std::io::{BufRead, BufReader};
use std::path::PathBuf;

use budgetsched_core::probing::{build_fewshot_prompt, parse_fewshot_response_or_fallback};
use budgetsched_core::profiles::load_profiles;
use budgetsched_core::BudgetGrid;
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::errors::{CliError, CliResult};
use crate::settings::Ctx;

#[derive(Debug, Args)]
pub struct FewshotPromptArgs {
    /// Questions file (profiles.jsonl format with question fields).
    #[arg(long)]
    questions: PathBuf,
}

#[derive(Serialize)]
struct PromptLine<'a> {
    id: &'a str,
    prompt: String,
}

pub fn run_prompt(ctx: &Ctx, args: &FewshotPromptArgs) -> CliResult<()> {
    let grid = BudgetGrid::default();
    let questions = load_profiles(&args.questions, &grid)?;
    ctx.ensure_out_dir()?;
    let path = ctx.out_path("prompts.jsonl");
    let mut lines = Vec::with_capacity(questions.len());
    let mut skipped = 0usize;
    for record in &questions {
        match record.question_text.as_deref().map(build_fewshot_prompt) {
            Some(Ok(prompt)) => lines.push(
                serde_json::to_string(&PromptLine { id: &record.id, prompt })
                    .expect("prompt serializes"),
            ),
            Some(Err(e)) => return Err(CliError::Core(e)),
            None => {
                log::warn!("{}: no question text, skipped", record.id);
                skipped += 1;
            }
        }
    }
    std::fs::write(&path, lines.join("\n") + "\n").map_err(|e| CliError::Write(path.clone(), e))?;
    println!("fewshot-prompt: prompts={} skipped={}", lines.len(), skipped);
    Ok(())
}

#[derive(Debug, Args)]
pub struct FewshotParseArgs {
    /// Responses file: one {"id": ..., "response": ...} per line.
    #[arg(long)]
    responses: PathBuf,
}

#[derive(Deserialize)]
struct ResponseLine {
    id: String,
    response: String,
}

#[derive(Serialize)]
struct LabelLine<'a> {
    id: &'a str,
    difficulty: &'a str,
    parse_failed: bool,
    #[serde(skip_serializing_if = "str::is_empty")]
    reasoning: &'a str,
}

pub fn run_parse(ctx: &Ctx, args: &FewshotParseArgs) -> CliResult<()> {
    let file = std::fs::File::open(&args.responses)
        .map_err(|e| CliError::Core(budgetsched_core::Error::Io {
            path: args.responses.clone(),
            source: e,
        }))?;
    let reader = BufReader::new(file);

    let mut lines = Vec::new();
    let mut failures = 0usize;
    for (line_no, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| {
            CliError::Core(budgetsched_core::Error::Io { path: args.responses.clone(), source: e })
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: ResponseLine = serde_json::from_str(&line).map_err(|e| {
            CliError::Core(budgetsched_core::Error::MalformedLine {
                path: args.responses.clone(),
                line: line_no + 1,
                msg: e.to_string(),
            })
        })?;
        let (label, reasoning, flagged) = parse_fewshot_response_or_fallback(&parsed.response);
        if flagged {
            failures += 1;
            log::warn!("{}: unparseable response, falling back to medium", parsed.id);
        }
        lines.push(
            serde_json::to_string(&LabelLine {
                id: &parsed.id,
                difficulty: label.as_str(),
                parse_failed: flagged,
                reasoning: &reasoning,
            })
            .expect("label serializes"),
        );
    }

    ctx.ensure_out_dir()?;
    let path = ctx.out_path("labels.jsonl");
    std::fs::write(&path, lines.join("\n") + "\n").map_err(|e| CliError::Write(path.clone(), e))?;
    println!("fewshot-parse: labels={} parse_failures={}", lines.len(), failures);
    Ok(())
}

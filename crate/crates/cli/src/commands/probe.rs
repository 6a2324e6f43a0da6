//! `probe`: estimate early-stopping profiles through a generation client
//! (mock rules or an OpenAI-compatible endpoint).

use std::path::PathBuf;

use budgetsched_core::probing::{
    estimate_profile, GenerationClient, HttpClientConfig, HttpGenerationClient, MockClient,
    MockRule, ProbeConfig, ProbeInsertion, ProbeStats,
};
use budgetsched_core::profiles::{load_profiles, save_profiles, QueryRecord};
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use crate::errors::{CliError, CliResult};
use crate::report::write_json;
use crate::settings::{resolve, resolve_opt, Ctx};

#[derive(Debug, Args)]
pub struct ProbeArgs {
    /// Questions file (profiles.jsonl format with question + answer fields).
    #[arg(long)]
    questions: PathBuf,
    /// Use the deterministic mock client:
    /// always-correct | never-correct | correct-after:N.
    #[arg(long)]
    mock: Option<String>,
    /// Base URL of a completions endpoint; defaults to $BUDGETSCHED_LLM_URL.
    #[arg(long)]
    llm_url: Option<String>,
    #[arg(long)]
    traces: Option<u32>,
    #[arg(long)]
    interval_tokens: Option<u32>,
    #[arg(long)]
    max_tokens: Option<u32>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    top_p: Option<f64>,
    /// Tokens allowed for the boxed-answer completion after each probe.
    #[arg(long)]
    completion_cap: Option<u32>,
    /// Insert probes into the trace itself instead of forking.
    #[arg(long)]
    in_place: bool,
}

#[derive(Serialize)]
struct QuestionStats {
    id: String,
    failed_traces: u32,
    counted_traces: u32,
}

#[derive(Serialize)]
struct ProbeManifest<'a> {
    seed: u64,
    jobs: usize,
    client: String,
    config: &'a ProbeConfig,
    per_question: Vec<QuestionStats>,
}

pub fn run(ctx: &Ctx, args: &ProbeArgs) -> CliResult<()> {
    let cfg = &ctx.config;
    let defaults = ProbeConfig::default();
    let config = ProbeConfig {
        probe_string: defaults.probe_string.clone(),
        interval_tokens: resolve(args.interval_tokens, cfg, "interval_tokens", defaults.interval_tokens)?,
        max_tokens: resolve(args.max_tokens, cfg, "max_tokens", defaults.max_tokens)?,
        traces_per_question: resolve(args.traces, cfg, "traces", defaults.traces_per_question)?,
        temperature: resolve(args.temperature, cfg, "temperature", defaults.temperature)?,
        top_p: resolve(args.top_p, cfg, "top_p", defaults.top_p)?,
        answer_completion_cap: resolve(args.completion_cap, cfg, "completion_cap", defaults.answer_completion_cap)?,
        insertion: if args.in_place { ProbeInsertion::InPlace } else { ProbeInsertion::Fork },
    };
    config.validate()?;
    let grid = config.grid()?;

    // The questions file needs no probability vectors; any grid loads it.
    let questions = load_profiles(&args.questions, &grid)?;
    if questions.is_empty() {
        return Err(CliError::Core(budgetsched_core::Error::EmptyBatch));
    }

    let mock_rule = resolve_opt(args.mock.clone(), cfg, "mock")?;
    let (client, client_name): (Box<dyn GenerationClient>, String) = match mock_rule {
        Some(raw) => {
            let rule: MockRule = raw.parse()?;
            let answers = questions
                .iter()
                .filter_map(|q| {
                    q.question_text
                        .clone()
                        .zip(q.ground_truth_answer.clone())
                })
                .collect();
            (
                Box::new(MockClient::new(rule, config.probe_string.clone()).with_answers(answers)),
                format!("mock:{raw}"),
            )
        }
        None => {
            let mut http = match resolve_opt(args.llm_url.clone(), cfg, "llm_url")? {
                Some(url) => HttpClientConfig::new(url),
                None => HttpClientConfig::from_env()?,
            };
            http.api_key = http.api_key.or_else(|| std::env::var("BUDGETSCHED_LLM_KEY").ok());
            let name = format!("http:{}", http.base_url);
            (Box::new(HttpGenerationClient::new(http)), name)
        }
    };

    let seed = ctx.seed;
    let results: Vec<(QueryRecord, ProbeStats)> = ctx.with_pool(|| {
        questions
            .par_iter()
            .enumerate()
            .map(|(index, question)| {
                let question_seed = seed.wrapping_add((index as u64) << 20);
                let (profile, stats) =
                    estimate_profile(question, client.as_ref(), &config, &grid, question_seed)?;
                let mut record = question.clone();
                record.profile = Some(profile);
                Ok((record, stats))
            })
            .collect::<Result<_, budgetsched_core::Error>>()
    })??;

    let (records, per_question): (Vec<_>, Vec<_>) = results
        .into_iter()
        .map(|(record, stats)| {
            let stat = QuestionStats {
                id: record.id.clone(),
                failed_traces: stats.failed_traces,
                counted_traces: stats.counted_traces,
            };
            (record, stat)
        })
        .unzip();

    ctx.ensure_out_dir()?;
    save_profiles(&ctx.out_path("profiles.jsonl"), &grid, &records)?;
    write_json(
        &ctx.out_path("probe_manifest.json"),
        &ProbeManifest {
            seed: ctx.seed,
            jobs: ctx.jobs,
            client: client_name,
            config: &config,
            per_question,
        },
    )?;
    println!("probe: questions={} traces={} seed={}", records.len(), config.traces_per_question, ctx.seed);
    Ok(())
}

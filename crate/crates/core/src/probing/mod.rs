//! Empirical profile estimation through a pluggable generation client,
//! answer scoring, and the few-shot difficulty-classification exchange.

mod answer;
mod client;
mod fewshot;
mod probe;

pub use answer::{
    answers_match, clean_numeric, extract_boxed_answer, score_answer, ANSWER_ABS_FLOOR,
    ANSWER_REL_TOL,
};
pub use client::{
    GenerationClient, GenerationRequest, GenerationResponse, HttpClientConfig,
    HttpGenerationClient, MockClient, MockRule, ENV_LLM_KEY, ENV_LLM_URL,
};
pub use fewshot::{
    build_fewshot_prompt, parse_fewshot_response, parse_fewshot_response_or_fallback,
    FewShotExchange,
};
pub use probe::{
    estimate_profile, ProbeConfig, ProbeInsertion, ProbeStats, PROBE_STRING,
};

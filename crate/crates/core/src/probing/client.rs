//! Pluggable text-generation clients: an OpenAI-compatible completions
//! client with retry, and a deterministic rule-based mock for tests and
//! offline runs.

use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probing::answer::clean_numeric;

pub const ENV_LLM_URL: &str = "BUDGETSCHED_LLM_URL";
pub const ENV_LLM_KEY: &str = "BUDGETSCHED_LLM_KEY";

/// One generation request.
#[derive(Debug, Clone)]
pub struct GenerationRequest<'a> {
    pub prompt: &'a str,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub seed: u64,
}

/// Generated text plus the token count the backend reports for it.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationResponse {
    pub text: String,
    pub token_count: u32,
}

/// Anything that can complete a prompt. Implementations must be shareable
/// across worker threads.
pub trait GenerationClient: Sync + Send {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse>;
}

fn whitespace_tokens(text: &str) -> u32 {
    text.split_whitespace().count() as u32
}

// ---------------------------------------------------------------------------
// HTTP client
// ---------------------------------------------------------------------------

/// Connection settings for an OpenAI-compatible completions endpoint.
#[derive(Debug, Clone)]
pub struct HttpClientConfig {
    pub base_url: String,
    pub path: String,
    pub api_key: Option<String>,
    pub model: Option<String>,
    pub timeout: Duration,
    /// Total attempts per request (first try included).
    pub attempts: u32,
    pub backoff_base: Duration,
}

impl HttpClientConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            path: "/v1/completions".to_string(),
            api_key: None,
            model: None,
            timeout: Duration::from_secs(60),
            attempts: 3,
            backoff_base: Duration::from_millis(100),
        }
    }

    /// Reads `BUDGETSCHED_LLM_URL` and `BUDGETSCHED_LLM_KEY`.
    pub fn from_env() -> Result<Self> {
        let base_url = std::env::var(ENV_LLM_URL)
            .map_err(|_| Error::InvalidConfig(format!("{ENV_LLM_URL} is not set")))?;
        let mut config = Self::new(base_url);
        config.api_key = std::env::var(ENV_LLM_KEY).ok();
        Ok(config)
    }
}

#[derive(Serialize)]
struct CompletionRequestBody<'a> {
    prompt: &'a str,
    temperature: f64,
    top_p: f64,
    max_tokens: u32,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<&'a str>,
}

#[derive(Deserialize)]
struct CompletionChoice {
    text: String,
}

#[derive(Deserialize)]
struct CompletionUsage {
    completion_tokens: Option<u32>,
}

#[derive(Deserialize)]
struct CompletionResponseBody {
    choices: Vec<CompletionChoice>,
    usage: Option<CompletionUsage>,
}

/// Blocking completions client with exponential-backoff retry on transport
/// errors and 5xx responses.
pub struct HttpGenerationClient {
    config: HttpClientConfig,
    agent: ureq::Agent,
}

impl HttpGenerationClient {
    pub fn new(config: HttpClientConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .build()
            .into();
        Self { config, agent }
    }

    pub fn from_env() -> Result<Self> {
        Ok(Self::new(HttpClientConfig::from_env()?))
    }

    fn url(&self) -> String {
        format!("{}{}", self.config.base_url.trim_end_matches('/'), self.config.path)
    }

    fn attempt(&self, request: &GenerationRequest) -> std::result::Result<GenerationResponse, (bool, String)> {
        let body = CompletionRequestBody {
            prompt: request.prompt,
            temperature: request.temperature,
            top_p: request.top_p,
            max_tokens: request.max_tokens,
            seed: request.seed,
            model: self.config.model.as_deref(),
        };
        let mut builder = self.agent.post(self.url()).header("content-type", "application/json");
        if let Some(key) = &self.config.api_key {
            builder = builder.header("authorization", format!("Bearer {key}"));
        }
        let mut response = builder.send_json(&body).map_err(|e| {
            let retryable = match &e {
                ureq::Error::StatusCode(code) => *code >= 500,
                _ => true,
            };
            (retryable, e.to_string())
        })?;
        let parsed: CompletionResponseBody = response
            .body_mut()
            .read_json()
            .map_err(|e| (false, format!("malformed completion response: {e}")))?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| (false, "completion response has no choices".to_string()))?;
        let token_count = parsed
            .usage
            .and_then(|u| u.completion_tokens)
            .unwrap_or_else(|| whitespace_tokens(&choice.text));
        Ok(GenerationResponse { text: choice.text, token_count })
    }
}

impl GenerationClient for HttpGenerationClient {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse> {
        let mut last_error = String::new();
        for attempt in 0..self.config.attempts {
            if attempt > 0 {
                std::thread::sleep(self.config.backoff_base * 2u32.pow(attempt - 1));
            }
            match self.attempt(request) {
                Ok(response) => return Ok(response),
                Err((retryable, msg)) => {
                    log::warn!("generation attempt {} failed: {msg}", attempt + 1);
                    last_error = msg;
                    if !retryable {
                        break;
                    }
                }
            }
        }
        Err(Error::Client(last_error))
    }
}

// ---------------------------------------------------------------------------
// Mock client
// ---------------------------------------------------------------------------

/// Behavior of the deterministic mock client on probe requests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MockRule {
    /// Every probe completion closes the box with the ground-truth answer.
    AlwaysCorrect,
    /// Probe completions never produce a parseable boxed answer.
    NeverCorrect,
    /// Correct exactly when the reasoning prefix has at least this many
    /// (whitespace-delimited) tokens.
    CorrectAfter(u32),
    /// Canned responses consumed in request order, for transcript fixtures.
    Scripted(Vec<String>),
}

impl std::str::FromStr for MockRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "always-correct" {
            return Ok(MockRule::AlwaysCorrect);
        }
        if s == "never-correct" {
            return Ok(MockRule::NeverCorrect);
        }
        if let Some(rest) = s.strip_prefix("correct-after:").or_else(|| s.strip_prefix("correct-after=")) {
            let n = rest
                .parse::<u32>()
                .map_err(|_| Error::InvalidConfig(format!("bad token count in mock rule `{s}`")))?;
            return Ok(MockRule::CorrectAfter(n));
        }
        Err(Error::InvalidConfig(format!(
            "unknown mock rule `{s}` (expected always-correct, never-correct, or correct-after:N)"
        )))
    }
}

/// Rule-based mock generator. Main-trace requests produce filler tokens;
/// requests ending in the probe string produce an answer per the rule.
/// Deterministic: identical (prompt, params, seed) give identical output.
pub struct MockClient {
    rule: MockRule,
    probe_string: String,
    /// (question text, ground-truth answer) pairs for answer lookup.
    answers: Vec<(String, String)>,
    script_cursor: Mutex<usize>,
}

impl MockClient {
    pub fn new(rule: MockRule, probe_string: impl Into<String>) -> Self {
        Self { rule, probe_string: probe_string.into(), answers: Vec::new(), script_cursor: Mutex::new(0) }
    }

    pub fn with_answers(mut self, pairs: Vec<(String, String)>) -> Self {
        self.answers = pairs;
        self
    }

    fn lookup(&self, prompt: &str) -> Option<(&str, &str)> {
        self.answers
            .iter()
            .find(|(q, _)| prompt.starts_with(q.as_str()))
            .map(|(q, a)| (q.as_str(), a.as_str()))
    }

    fn wrong_answer(truth: &str) -> String {
        match clean_numeric(truth) {
            Some(v) => format!("{}", v + 1.0),
            None => "0".to_string(),
        }
    }
}

impl GenerationClient for MockClient {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse> {
        if let MockRule::Scripted(lines) = &self.rule {
            let mut cursor = self.script_cursor.lock().expect("mock cursor lock");
            let text = lines
                .get(*cursor)
                .ok_or_else(|| Error::Client("scripted transcript exhausted".to_string()))?
                .clone();
            *cursor += 1;
            let token_count = whitespace_tokens(&text);
            return Ok(GenerationResponse { text, token_count });
        }

        let is_probe = request.prompt.ends_with(&self.probe_string);
        if !is_probe {
            // Continue the reasoning trace with filler tokens.
            let text = vec!["w"; request.max_tokens as usize].join(" ");
            return Ok(GenerationResponse { token_count: whitespace_tokens(&text), text });
        }

        let correct = |truth: &str| GenerationResponse {
            text: format!("{truth}}} \\]"),
            token_count: 2,
        };
        let response = match &self.rule {
            MockRule::AlwaysCorrect => {
                let truth = self.lookup(request.prompt).map(|(_, a)| a).unwrap_or("0");
                correct(truth)
            }
            MockRule::NeverCorrect => {
                // No closing brace, so no balanced box exists in the fork.
                GenerationResponse { text: "hmm, still thinking".to_string(), token_count: 3 }
            }
            MockRule::CorrectAfter(threshold) => {
                let (question, truth) = self
                    .lookup(request.prompt)
                    .ok_or_else(|| Error::Client("mock has no answer for this prompt".to_string()))?;
                let body = &request.prompt[question.len()..request.prompt.len() - self.probe_string.len()];
                let prefix_tokens = whitespace_tokens(body);
                if prefix_tokens >= *threshold {
                    correct(truth)
                } else {
                    GenerationResponse {
                        text: format!("{}}} \\]", Self::wrong_answer(truth)),
                        token_count: 2,
                    }
                }
            }
            MockRule::Scripted(_) => unreachable!("handled above"),
        };
        Ok(response)
    }
}

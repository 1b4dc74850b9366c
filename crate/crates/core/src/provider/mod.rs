//! Asking a chat model for candidate fragments, live or from recordings.

mod live;
mod parse;
mod prompt;
mod replay;

use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use live::LiveProvider;
pub use parse::{parse_completion, ParsedCompletion, RawSuggestion};
pub use prompt::{build_prompt, ChatMessage, FewShotExample, PromptError, PromptSpec, PromptTemplate};
pub use replay::{Fixture, RecordingProvider, ReplayProvider};

/// Sampling settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    /// Base URL of an OpenAI-compatible API; `/chat/completions` is appended.
    pub endpoint: String,
    pub model_name: String,
    pub temperature: f64,
    pub iterations: u32,
    pub max_parallel: usize,
    pub timeout_secs: u64,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            endpoint: "https://api.openai.com/v1".into(),
            model_name: "gpt-3.5-turbo".into(),
            temperature: 1.0,
            iterations: 5,
            max_parallel: 5,
            timeout_secs: 30,
            api_key_env: "OPENAI_API_KEY".into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("iterations must be between 1 and 20, got {0}")]
    Iterations(u32),
    #[error("max_parallel must be at least 1")]
    Parallelism,
    #[error("temperature must be a finite number >= 0, got {0}")]
    Temperature(f64),
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(1..=20).contains(&self.iterations) {
            return Err(ConfigError::Iterations(self.iterations));
        }
        if self.max_parallel == 0 {
            return Err(ConfigError::Parallelism);
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(ConfigError::Temperature(self.temperature));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }
}

/// Everything a provider needs to answer one prompt.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletionRequest {
    pub digest: String,
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<ChatMessage>,
    pub prompt_text: String,
}

impl CompletionRequest {
    pub fn new(prompt: &PromptSpec, config: &ProviderConfig) -> Self {
        let messages = prompt.messages();
        CompletionRequest {
            digest: request_digest(&messages, &config.model_name, config.temperature),
            model: config.model_name.clone(),
            temperature: config.temperature,
            prompt_text: prompt.render(),
            messages,
        }
    }
}

/// Stable hash of the prompt and sampling parameters. Endpoint, key and
/// iteration count do not take part.
pub fn request_digest(messages: &[ChatMessage], model: &str, temperature: f64) -> String {
    #[derive(Serialize)]
    struct Canonical<'a> {
        messages: &'a [ChatMessage],
        model: &'a str,
        temperature: f64,
    }
    let json = serde_json::to_string(&Canonical { messages, model, temperature }).expect("serializable");
    hex::encode(Sha256::digest(json.as_bytes()))
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProviderError {
    #[error("request timed out")]
    Timeout,
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("environment variable {0} with the API key is not set")]
    MissingKey(String),
    #[error("malformed response: {0}")]
    BadResponse(String),
    #[error("no replay fixture for request {0}")]
    MissingFixture(String),
    #[error("replay fixture {digest} has no completion for iteration {iteration}")]
    FixtureExhausted { digest: String, iteration: u32 },
    #[error("fixture I/O: {0}")]
    Io(String),
}

/// Source of completions. Implementations must tolerate concurrent calls.
pub trait Provider: Send + Sync {
    fn id(&self) -> &str;
    fn complete(&self, request: &CompletionRequest, iteration: u32) -> Result<String, ProviderError>;
}

/// Outcome of one sampling iteration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub request_digest: String,
    pub iteration: u32,
    pub provider: String,
    pub raw_text: Option<String>,
    pub parsed: Vec<RawSuggestion>,
    pub diagnostics: Vec<String>,
}

impl CompletionRecord {
    pub fn failed(&self) -> bool {
        self.raw_text.is_none()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SampleError {
    #[error("provider unreachable: all {iterations} requests failed (last: {last})")]
    ProviderUnreachable { iterations: u32, last: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Send the same prompt `config.iterations` times with at most
/// `config.max_parallel` requests in flight.
///
/// Records come back in iteration order. A failed call becomes a record with
/// a diagnostic; only a run where every call fails is an error.
pub fn sample(
    provider: &dyn Provider,
    prompt: &PromptSpec,
    config: &ProviderConfig,
) -> Result<Vec<CompletionRecord>, SampleError> {
    config.validate()?;
    let request = CompletionRequest::new(prompt, config);
    let n = config.iterations;
    let next = AtomicU32::new(0);
    let slots: Mutex<Vec<Option<CompletionRecord>>> = Mutex::new(vec![None; n as usize]);
    let workers = config.max_parallel.min(n as usize);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let result = provider.complete(&request, i);
                let record = to_record(&request, provider.id(), i, result);
                slots.lock().unwrap()[i as usize] = Some(record);
            });
        }
    });

    let records: Vec<CompletionRecord> = slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every iteration ran"))
        .collect();
    if records.iter().all(CompletionRecord::failed) {
        let last = records.last().and_then(|r| r.diagnostics.last().cloned()).unwrap_or_default();
        return Err(SampleError::ProviderUnreachable { iterations: n, last });
    }
    Ok(records)
}

fn to_record(
    request: &CompletionRequest,
    provider: &str,
    iteration: u32,
    result: Result<String, ProviderError>,
) -> CompletionRecord {
    let mut record = CompletionRecord {
        request_digest: request.digest.clone(),
        iteration,
        provider: provider.to_owned(),
        raw_text: None,
        parsed: Vec::new(),
        diagnostics: Vec::new(),
    };
    match result {
        Ok(text) => {
            let parsed = parse_completion(&text);
            record.parsed = parsed.suggestions;
            record.diagnostics = parsed.diagnostics;
            record.raw_text = Some(text);
        }
        Err(e) => {
            log::warn!("iteration {iteration} failed: {e}");
            record.diagnostics.push(e.to_string());
        }
    }
    record
}

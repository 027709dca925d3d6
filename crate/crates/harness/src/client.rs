//! OpenAI-compatible chat-completions client.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use etrbench_core::judge::Translator;
use etrbench_core::record::Usage;

use crate::config::ModelSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub usage: Usage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exchange {
    pub result: Result<Completion, String>,
    pub attempts: u32,
    pub elapsed_ms: u64,
}

/// One request/response round trip. Implementations must be shareable
/// between worker threads.
pub trait ChatClient: Sync {
    fn complete(&self, spec: &ModelSpec, prompt: &str) -> Result<Completion, String>;
}

/// Calls `client` under the spec's retry policy.
pub fn complete_with_retries(client: &dyn ChatClient, spec: &ModelSpec, prompt: &str) -> Exchange {
    let start = Instant::now();
    let mut attempts = 0;
    let mut rng = rand::thread_rng();
    loop {
        attempts += 1;
        match client.complete(spec, prompt) {
            Ok(c) => {
                return Exchange {
                    result: Ok(c),
                    attempts,
                    elapsed_ms: start.elapsed().as_millis() as u64,
                }
            }
            Err(e) if attempts >= spec.retry.attempts => {
                return Exchange {
                    result: Err(e),
                    attempts,
                    elapsed_ms: start.elapsed().as_millis() as u64,
                }
            }
            Err(_) => std::thread::sleep(spec.retry.delay(attempts, rng.gen())),
        }
    }
}

pub struct OpenAiClient {
    base_url: String,
    api_key: String,
    http: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize, Serialize, Default)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
    #[serde(default)]
    completion_tokens_details: Option<CompletionDetails>,
}

#[derive(Deserialize, Serialize, Default)]
struct CompletionDetails {
    #[serde(default)]
    reasoning_tokens: Option<u64>,
}

impl OpenAiClient {
    pub fn new(base_url: &str, api_key: String) -> Result<OpenAiClient, String> {
        Self::build(base_url, api_key, reqwest::blocking::Client::builder())
    }

    /// A client that opens a fresh connection per request. Use this for the
    /// local stub server, which does not serve keep-alive reuse reliably.
    pub fn unpooled(base_url: &str, api_key: String) -> Result<OpenAiClient, String> {
        Self::build(
            base_url,
            api_key,
            reqwest::blocking::Client::builder().pool_max_idle_per_host(0),
        )
    }

    fn build(
        base_url: &str,
        api_key: String,
        builder: reqwest::blocking::ClientBuilder,
    ) -> Result<OpenAiClient, String> {
        let http = builder.build().map_err(|e| e.to_string())?;
        Ok(OpenAiClient {
            base_url: base_url.trim_end_matches('/').to_owned(),
            api_key,
            http,
        })
    }
}

/// The request body for one prompt.
pub fn request_body(spec: &ModelSpec, prompt: &str) -> serde_json::Value {
    let mut body = json!({
        "model": spec.model,
        "messages": [{"role": "user", "content": prompt}],
        "max_tokens": spec.max_tokens,
        "temperature": spec.temperature,
    });
    if let Some(budget) = spec.thinking() {
        body["reasoning"] = json!({ "max_tokens": budget });
    }
    if !spec.provider.is_empty() {
        body["provider"] = json!({ "order": [spec.provider] });
    }
    body
}

impl ChatClient for OpenAiClient {
    fn complete(&self, spec: &ModelSpec, prompt: &str) -> Result<Completion, String> {
        let resp = self
            .http
            .post(format!("{}/chat/completions", self.base_url))
            .bearer_auth(&self.api_key)
            .timeout(spec.timeout())
            .json(&request_body(spec, prompt))
            .send()
            .map_err(|e| format!("request failed: {e}"))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| format!("reading body: {e}"))?;
        if !status.is_success() {
            let snippet: String = text.chars().take(300).collect();
            return Err(format!("HTTP {status}: {snippet}"));
        }
        let parsed: ChatResponse =
            serde_json::from_str(&text).map_err(|e| format!("malformed response: {e}"))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| "response has no message content".to_owned())?;
        let u = parsed.usage.unwrap_or_default();
        Ok(Completion {
            text: content,
            usage: Usage {
                prompt_tokens: u.prompt_tokens,
                completion_tokens: u.completion_tokens,
                reasoning_tokens: u.completion_tokens_details.and_then(|d| d.reasoning_tokens),
            },
        })
    }
}

/// Uses a chat model as the answer translator.
pub struct ChatTranslator<'a> {
    pub client: &'a dyn ChatClient,
    pub spec: ModelSpec,
}

impl Translator for ChatTranslator<'_> {
    fn translate(&self, prompt: &str) -> Result<String, String> {
        complete_with_retries(self.client, &self.spec, prompt)
            .result
            .map(|c| c.text)
    }
}

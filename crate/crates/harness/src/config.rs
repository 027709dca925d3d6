use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use etrbench_core::judge::Mode;
use etrbench_core::render::PromptStyle;

use crate::HarnessError;

pub const DEFAULT_MAX_TOKENS: u32 = 3000;
pub const DEFAULT_THINKING_BUDGET: u32 = 2400;
pub const DEFAULT_API_KEY_ENV: &str = "ETRBENCH_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay_ms: 500,
            max_delay_ms: 8_000,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (1-based): exponential with full
    /// jitter in the upper half.
    pub fn delay(&self, retry: u32, jitter: f64) -> Duration {
        let exp = self
            .base_delay_ms
            .saturating_mul(1u64 << retry.saturating_sub(1).min(20))
            .min(self.max_delay_ms);
        let ms = exp as f64 * (0.5 + 0.5 * jitter.clamp(0.0, 1.0));
        Duration::from_millis(ms as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(default)]
    pub provider: String,
    pub model: String,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    /// Reasoning models get a thinking budget.
    #[serde(default)]
    pub reasoning: bool,
    #[serde(default)]
    pub thinking_budget: Option<u32>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default)]
    pub temperature: f64,
}

fn default_max_tokens() -> u32 {
    DEFAULT_MAX_TOKENS
}

fn default_timeout() -> u64 {
    120
}

impl ModelSpec {
    pub fn new(model: impl Into<String>) -> ModelSpec {
        ModelSpec {
            provider: String::new(),
            model: model.into(),
            max_tokens: DEFAULT_MAX_TOKENS,
            reasoning: false,
            thinking_budget: None,
            timeout_secs: default_timeout(),
            retry: RetryPolicy::default(),
            temperature: 0.0,
        }
    }

    /// The thinking budget actually requested, if any.
    pub fn thinking(&self) -> Option<u32> {
        self.reasoning
            .then(|| self.thinking_budget.unwrap_or(DEFAULT_THINKING_BUDGET))
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(format!("model {}: {msg}", self.model)));
        if self.model.trim().is_empty() {
            return Err(HarnessError::Config("model id is empty".into()));
        }
        if self.max_tokens == 0 {
            return bad("max_tokens must be positive".into());
        }
        if let Some(t) = self.thinking() {
            if t == 0 {
                return bad("thinking budget must be positive".into());
            }
            if t > self.max_tokens {
                return bad(format!(
                    "thinking budget {t} exceeds max_tokens {}",
                    self.max_tokens
                ));
            }
        }
        if self.timeout_secs == 0 {
            return bad("timeout must be positive".into());
        }
        if self.retry.attempts == 0 {
            return bad("retry attempts must be at least 1".into());
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return bad(format!("temperature {} outside [0, 2]", self.temperature));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslatorSpec {
    pub model: String,
    #[serde(default = "default_translator_retries")]
    pub retries: usize,
}

fn default_translator_retries() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarnessConfig {
    pub base_url: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub max_in_flight: usize,
    pub prompt_style: PromptStyle,
    pub mode: Mode,
    pub translator: Option<TranslatorSpec>,
    pub oracle_cap: usize,
    pub models: Vec<ModelSpec>,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            base_url: "https://openrouter.ai/api/v1".into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            max_in_flight: 8,
            prompt_style: PromptStyle::Standard,
            mode: Mode::Endorsement,
            translator: None,
            oracle_cap: etrbench_core::logic::DEFAULT_DOMAIN_CAP,
            models: Vec::new(),
        }
    }
}

impl HarnessConfig {
    pub fn from_toml(text: &str) -> Result<HarnessConfig, HarnessError> {
        let cfg: HarnessConfig =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<HarnessConfig, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        HarnessConfig::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.max_in_flight == 0 {
            return Err(HarnessError::Config("max_in_flight must be positive".into()));
        }
        if self.base_url.trim().is_empty() {
            return Err(HarnessError::Config("base_url is empty".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for m in &self.models {
            m.validate()?;
            if !seen.insert(&m.model) {
                return Err(HarnessError::Config(format!("model {} listed twice", m.model)));
            }
        }
        Ok(())
    }

    /// Reads the API key from the configured environment variable.
    pub fn api_key(&self) -> Result<String, HarnessError> {
        match std::env::var(&self.api_key_env) {
            Ok(k) if !k.trim().is_empty() => Ok(k),
            _ => Err(HarnessError::MissingKey(self.api_key_env.clone())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_defaults_and_validation() {
        let cfg = HarnessConfig::from_toml(
            r#"
            base_url = "http://localhost:9/v1"
            max_in_flight = 4

            [[models]]
            model = "vendor/plain"

            [[models]]
            model = "vendor/thinker"
            reasoning = true
            "#,
        )
        .unwrap();
        assert_eq!(cfg.api_key_env, DEFAULT_API_KEY_ENV);
        assert_eq!(cfg.models[0].max_tokens, 3000);
        assert_eq!(cfg.models[0].thinking(), None);
        assert_eq!(cfg.models[1].thinking(), Some(2400));
        assert_eq!(cfg.models[1].retry.attempts, 3);
        assert_eq!(cfg.models[0].temperature, 0.0);

        let too_much = r#"
            [[models]]
            model = "m"
            reasoning = true
            max_tokens = 1000
            thinking_budget = 2400
        "#;
        assert!(HarnessConfig::from_toml(too_much).is_err());
        assert!(HarnessConfig::from_toml("max_in_flight = 0").is_err());
        assert!(HarnessConfig::from_toml("[[models]]\nmodel = \"a\"\n[[models]]\nmodel = \"a\"").is_err());
    }

    #[test]
    fn backoff_grows_and_caps() {
        let r = RetryPolicy::default();
        assert_eq!(r.delay(1, 1.0), Duration::from_millis(500));
        assert_eq!(r.delay(2, 1.0), Duration::from_millis(1000));
        assert_eq!(r.delay(3, 0.0), Duration::from_millis(1000));
        assert_eq!(r.delay(30, 1.0), Duration::from_millis(8000));
    }
}

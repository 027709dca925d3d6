//! Runs etrbench problems against chat-completion endpoints and records
//! every exchange in an append-only store.

pub mod client;
pub mod config;
pub mod runner;
pub mod stub;

pub use client::{ChatClient, ChatTranslator, Completion, OpenAiClient};
pub use config::{HarnessConfig, ModelSpec, RetryPolicy, TranslatorSpec};
pub use runner::{exclusion_report, prepare, run_suite, theme_for, verify_prompt_hashes, RunSummary, SuiteOptions};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("API key missing: set the {0} environment variable")]
    MissingKey(String),
    #[error("render: {0}")]
    Render(String),
    #[error("client: {0}")]
    Client(String),
    #[error(transparent)]
    Store(#[from] etrbench_core::record::StoreError),
}

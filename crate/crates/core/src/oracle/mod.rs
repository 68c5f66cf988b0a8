//! Chat and embedding oracles.
//!
//! [`HttpChatClient`] speaks the common chat-completions JSON shape over a
//! pluggable [`Transport`]. [`CachedChat`] records every exchange under its
//! content hash and can replay a finished experiment without network access.
//! [`ScriptedOracle`] produces deterministic replies for offline runs.

mod cache;
mod embed;
mod http;
mod scripted;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{CacheMode, CachedChat, ExchangeCache, ExchangeRecord};
pub use embed::{
    text_hash, CachedEmbedder, EmbeddingProvider, EmbeddingResult, HashedEmbeddings, HttpEmbedder,
    PrecomputedEmbeddings,
};
pub use http::{HttpChatClient, HttpResponse, ReqwestTransport, RetryPolicy, Transport, TransportError};
pub use scripted::{ScriptedOracle, ScriptedPolicy};

pub const API_KEY_ENV: &str = "BANDIT_ORACLES_API_KEY";
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;
pub const CHAT_TIMEOUT: Duration = Duration::from_secs(60);
pub const EMBED_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("authentication failed (status {status}): {message}")]
    Auth { status: u16, message: String },
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("timed out after {attempts} attempts")]
    Timeout { attempts: u32 },
    #[error("server error (status {status}) after {attempts} attempts")]
    Server { status: u16, attempts: u32 },
    #[error("network error after {attempts} attempts: {message}")]
    Network { attempts: u32, message: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("request rejected (status {status}): {message}")]
    Rejected { status: u16, message: String },
    #[error("no cached exchange for {0} in replay-only mode")]
    CacheMiss(String),
    #[error("cache error: {0}")]
    Cache(String),
    #[error("scripted oracle exhausted: {0}")]
    ScriptExhausted(String),
    #[error("oracle not configured: {0}")]
    NotConfigured(String),
    #[error("integrity error: {0}")]
    Integrity(String),
}

impl OracleError {
    /// Short stable identifier used in result files.
    pub fn kind(&self) -> &'static str {
        match self {
            OracleError::Auth { .. } => "auth",
            OracleError::RateLimited { .. } => "rate_limit",
            OracleError::Timeout { .. } => "timeout",
            OracleError::Server { .. } => "server",
            OracleError::Network { .. } => "network",
            OracleError::Malformed(_) => "malformed",
            OracleError::Rejected { .. } => "rejected",
            OracleError::CacheMiss(_) => "cache_miss",
            OracleError::Cache(_) => "cache",
            OracleError::ScriptExhausted(_) => "script_exhausted",
            OracleError::NotConfigured(_) => "not_configured",
            OracleError::Integrity(_) => "integrity",
        }
    }

    /// Errors that stop a whole run rather than a single task.
    pub fn is_fatal(&self) -> bool {
        matches!(
            self,
            OracleError::Auth { .. } | OracleError::NotConfigured(_) | OracleError::Integrity(_) | OracleError::Cache(_)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    /// Distinguishes repeated samples of the same request at nonzero
    /// temperature. Part of the cache key, never sent over the wire.
    #[serde(default)]
    pub sample: u64,
}

impl ChatRequest {
    pub fn new(model: impl Into<String>, messages: Vec<ChatMessage>, temperature: f64) -> Self {
        ChatRequest {
            model: model.into(),
            messages,
            temperature,
            sample: 0,
        }
    }

    pub fn with_sample(mut self, sample: u64) -> Self {
        self.sample = sample;
        self
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(OracleError::NotConfigured(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.messages.is_empty() {
            return Err(OracleError::NotConfigured("request has no messages".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatReply {
    pub text: String,
    pub usage: Usage,
    pub latency_ms: u64,
    pub attempts: u32,
    pub cached: bool,
}

pub trait ChatOracle: Send + Sync {
    fn chat(&self, request: &ChatRequest) -> Result<ChatReply, OracleError>;
}

impl<T: ChatOracle + ?Sized> ChatOracle for std::sync::Arc<T> {
    fn chat(&self, request: &ChatRequest) -> Result<ChatReply, OracleError> {
        (**self).chat(request)
    }
}

/// Reads the API credential from [`API_KEY_ENV`].
pub fn api_key_from_env() -> Option<String> {
    std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty())
}

/// Either a scripted policy or a chat endpoint, asked through one interface.
#[derive(Clone)]
pub enum Responder {
    Scripted(ScriptedOracle),
    Chat { oracle: std::sync::Arc<dyn ChatOracle>, model: String },
}

impl Responder {
    /// Asks `prompt`, followed by earlier (reply, follow-up) turns when
    /// re-asking. Scripted replies report zero latency and one attempt.
    pub fn ask(
        &self,
        prompt: &crate::prompts::RenderedPrompt,
        followups: &[(String, String)],
        temperature: f64,
        sample: u64,
        correct: &[usize],
        rng: &mut crate::stochastics::RngStream,
    ) -> Result<ChatReply, OracleError> {
        match self {
            Responder::Scripted(s) => Ok(ChatReply {
                text: s.respond(prompt, correct, rng)?,
                usage: Usage::default(),
                latency_ms: 0,
                attempts: 1,
                cached: false,
            }),
            Responder::Chat { oracle, model } => {
                let mut messages = vec![ChatMessage::system(&prompt.system), ChatMessage::user(&prompt.user)];
                for (reply, followup) in followups {
                    messages.push(ChatMessage::assistant(reply));
                    messages.push(ChatMessage::user(followup));
                }
                let request = ChatRequest::new(model.clone(), messages, temperature).with_sample(sample);
                oracle.chat(&request)
            }
        }
    }

    pub fn tag(&self) -> String {
        match self {
            Responder::Scripted(s) => match &s.policy {
                ScriptedPolicy::PerfectArgmax => "scripted:perfect_argmax".into(),
                ScriptedPolicy::UniformRandom => "scripted:uniform_random".into(),
                ScriptedPolicy::FixedLabel { label } => format!("scripted:fixed_label:{label}"),
                ScriptedPolicy::CannedLines { .. } => "scripted:canned_lines".into(),
            },
            Responder::Chat { model, .. } => format!("chat:{model}"),
        }
    }
}

//! Sending prompts to a chat-completion provider.
//!
//! Every request is a single user message carrying the rendered prompt.
//! Responses are cached by `(model, taxonomy_version, prompt_hash)` so that
//! re-running a batch never repeats a provider call.

mod cache;
mod openai;
mod replay;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{LlmParameters, Proposal};
use crate::prompt::{render_prompt, text_hash, PromptError, RenderedPrompt};
use crate::retry::{with_retries, RetryPolicy, Sleeper};
use crate::taxonomy::Taxonomy;

pub use cache::{CacheEntry, CacheKey, ResponseCache};
pub use openai::{OpenAiProvider, API_KEY_ENV, DEFAULT_CHAT_ENDPOINT};
pub use replay::{load_replay_entries, RecordingProvider, ReplayEntry, ReplayProvider};

/// Context window assumed for the default model, in tokens.
pub const DEFAULT_CONTEXT_TOKENS: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProviderRequest {
    pub parameters: LlmParameters,
    pub messages: Vec<Message>,
}

impl ProviderRequest {
    pub fn single_user(parameters: LlmParameters, content: impl Into<String>) -> Self {
        Self {
            parameters,
            messages: vec![Message {
                role: Role::User,
                content: content.into(),
            }],
        }
    }

    /// Content of the (single) user message.
    pub fn user_content(&self) -> &str {
        self.messages
            .iter()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .unwrap_or("")
    }

    pub fn content_hash(&self) -> String {
        text_hash(self.user_content())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u32,
    pub completion_tokens: u32,
    pub total_tokens: u32,
}

/// Completion text exactly as received, with transport metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawResponse {
    pub text: String,
    pub model: String,
    pub received_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_usage: Option<TokenUsage>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProviderError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("server error (HTTP {status}): {message}")]
    Server { status: u16, message: String },
    #[error("request timed out: {0}")]
    Timeout(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("provider refused the request (HTTP {status}): {message}")]
    Refusal { status: u16, message: String },
    #[error("no recorded response for prompt hash {0}")]
    UnknownPrompt(String),
    #[error("prompt too large: ~{estimated_tokens} tokens exceeds the {limit}-token context")]
    PromptTooLarge {
        estimated_tokens: usize,
        limit: usize,
    },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted {
        attempts: u32,
        last: Box<ProviderError>,
    },
}

impl ProviderError {
    /// Timeouts, 429s, 5xx and connection failures are worth retrying.
    pub fn is_transient(&self) -> bool {
        matches!(
            self,
            ProviderError::RateLimited(_)
                | ProviderError::Server { .. }
                | ProviderError::Timeout(_)
                | ProviderError::Transport(_)
        )
    }

    /// Errors that make every further request pointless.
    pub fn is_fatal(&self) -> bool {
        matches!(self, ProviderError::Auth(_))
    }
}

/// A chat-completion backend. `complete_once` makes exactly one attempt.
pub trait Provider: Send + Sync {
    fn name(&self) -> &str;

    fn complete_once(&self, request: &ProviderRequest) -> Result<RawResponse, ProviderError>;
}

impl<P: Provider + ?Sized> Provider for &P {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn complete_once(&self, request: &ProviderRequest) -> Result<RawResponse, ProviderError> {
        (**self).complete_once(request)
    }
}

/// Rough token estimate: one token per four characters, rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

/// Provider plus retry and size policy.
pub struct Gateway<'a> {
    provider: &'a dyn Provider,
    sleeper: &'a dyn Sleeper,
    retry: RetryPolicy,
    context_tokens: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub response: RawResponse,
    pub cached: bool,
}

/// Outcome of sending one proposal's prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct Classified {
    pub prompt: RenderedPrompt,
    pub response: RawResponse,
    pub cached: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GatewayError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

impl<'a> Gateway<'a> {
    pub fn new(provider: &'a dyn Provider, sleeper: &'a dyn Sleeper) -> Self {
        Self {
            provider,
            sleeper,
            retry: RetryPolicy::default(),
            context_tokens: DEFAULT_CONTEXT_TOKENS,
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_context_tokens(mut self, tokens: usize) -> Self {
        self.context_tokens = tokens;
        self
    }

    pub fn provider_name(&self) -> &str {
        self.provider.name()
    }

    /// One completion with retries on transient failures. Makes at most
    /// `1 + max_retries` provider calls.
    pub fn complete(&self, request: &ProviderRequest) -> Result<RawResponse, ProviderError> {
        request
            .parameters
            .validate()
            .map_err(|e| ProviderError::InvalidRequest(e.to_string()))?;
        let user_messages = request
            .messages
            .iter()
            .filter(|m| m.role == Role::User)
            .count();
        if user_messages != 1 {
            return Err(ProviderError::InvalidRequest(format!(
                "expected exactly one user message, got {user_messages}"
            )));
        }
        let estimated_tokens = estimate_tokens(request.user_content());
        if estimated_tokens > self.context_tokens {
            return Err(ProviderError::PromptTooLarge {
                estimated_tokens,
                limit: self.context_tokens,
            });
        }
        let mut attempts = 0;
        with_retries(
            &self.retry,
            self.sleeper,
            ProviderError::is_transient,
            |_| {
                attempts += 1;
                self.provider.complete_once(request)
            },
        )
        .map_err(|e| {
            if e.is_transient() {
                ProviderError::RetriesExhausted {
                    attempts,
                    last: Box::new(e),
                }
            } else {
                e
            }
        })
    }

    /// [`Gateway::complete`] behind the response cache.
    pub fn complete_cached(
        &self,
        request: &ProviderRequest,
        taxonomy_version: u32,
        cache: &ResponseCache,
    ) -> Result<Completion, ProviderError> {
        let key = CacheKey {
            model: request.parameters.model.clone(),
            taxonomy_version,
            prompt_hash: request.content_hash(),
        };
        if let Some(response) = cache.get(&key) {
            return Ok(Completion {
                response,
                cached: true,
            });
        }
        let response = self.complete(request)?;
        cache.insert(key, response.clone());
        Ok(Completion {
            response,
            cached: false,
        })
    }

    /// Renders the prompt for `proposal` and fetches (or recalls) its answer.
    pub fn classify_proposal(
        &self,
        proposal: &Proposal,
        taxonomy: &Taxonomy,
        params: &LlmParameters,
        cache: &ResponseCache,
        body_budget: usize,
    ) -> Result<Classified, GatewayError> {
        let prompt = render_prompt(taxonomy, proposal, body_budget)?;
        let request = ProviderRequest::single_user(params.clone(), prompt.text.clone());
        let completion = self.complete_cached(&request, taxonomy.version, cache)?;
        Ok(Classified {
            prompt,
            response: completion.response,
            cached: completion.cached,
        })
    }
}

use std::sync::Arc;

use chrono::Utc;
use serde::Deserialize;
use serde_json::json;

use super::{Provider, ProviderError, ProviderRequest, RawResponse, TokenUsage};
use crate::http::{HttpClient, HttpError};

pub const DEFAULT_CHAT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";

/// Environment variable holding the API key. Keys are never read from files.
pub const API_KEY_ENV: &str = "OPENAI_API_KEY";

/// OpenAI-compatible chat-completion endpoint.
pub struct OpenAiProvider {
    endpoint: String,
    api_key: String,
    http: Arc<dyn HttpClient>,
}

impl std::fmt::Debug for OpenAiProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OpenAiProvider")
            .field("endpoint", &self.endpoint)
            .finish_non_exhaustive()
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    #[serde(default)]
    model: Option<String>,
    #[serde(default)]
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<TokenUsage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

impl OpenAiProvider {
    pub fn new(
        endpoint: impl Into<String>,
        api_key: impl Into<String>,
        http: Arc<dyn HttpClient>,
    ) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            http,
        }
    }

    /// Reads the key from [`API_KEY_ENV`]; fails with `Auth` when it is
    /// unset or blank, before any request is made.
    pub fn from_env(
        endpoint: impl Into<String>,
        http: Arc<dyn HttpClient>,
    ) -> Result<Self, ProviderError> {
        let key = std::env::var(API_KEY_ENV).unwrap_or_default();
        Self::with_key(endpoint, &key, http)
    }

    pub fn with_key(
        endpoint: impl Into<String>,
        key: &str,
        http: Arc<dyn HttpClient>,
    ) -> Result<Self, ProviderError> {
        if key.trim().is_empty() {
            return Err(ProviderError::Auth(format!("{API_KEY_ENV} is not set")));
        }
        Ok(Self::new(endpoint, key.trim(), http))
    }

    pub fn request_body(request: &ProviderRequest) -> serde_json::Value {
        let p = &request.parameters;
        json!({
            "model": p.model,
            "messages": request.messages,
            "max_tokens": p.max_tokens,
            "temperature": p.temperature,
            "frequency_penalty": p.frequency_penalty,
            "presence_penalty": p.presence_penalty,
        })
    }
}

fn error_message(body: &str) -> String {
    serde_json::from_str::<serde_json::Value>(body)
        .ok()
        .and_then(|v| v["error"]["message"].as_str().map(str::to_string))
        .unwrap_or_else(|| body.chars().take(300).collect())
}

impl Provider for OpenAiProvider {
    fn name(&self) -> &str {
        "live"
    }

    fn complete_once(&self, request: &ProviderRequest) -> Result<RawResponse, ProviderError> {
        let headers = [(
            "Authorization".to_string(),
            format!("Bearer {}", self.api_key),
        )];
        let response = self
            .http
            .post_json(&self.endpoint, &headers, &Self::request_body(request))
            .map_err(|e| match e {
                HttpError::Timeout(m) => ProviderError::Timeout(m),
                other => ProviderError::Transport(other.to_string()),
            })?;
        let status = response.status;
        match status {
            200..=299 => {}
            401 | 403 => return Err(ProviderError::Auth(error_message(&response.body))),
            429 => return Err(ProviderError::RateLimited(error_message(&response.body))),
            500..=599 => {
                return Err(ProviderError::Server {
                    status,
                    message: error_message(&response.body),
                })
            }
            _ => {
                return Err(ProviderError::Refusal {
                    status,
                    message: error_message(&response.body),
                })
            }
        }
        let parsed: ChatResponse = serde_json::from_str(&response.body)
            .map_err(|e| ProviderError::Transport(format!("unreadable completion: {e}")))?;
        let text = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ProviderError::Refusal {
                status,
                message: "completion has no message content".into(),
            })?;
        Ok(RawResponse {
            text,
            model: parsed
                .model
                .unwrap_or_else(|| request.parameters.model.clone()),
            received_at: Utc::now(),
            token_usage: parsed.usage,
        })
    }
}

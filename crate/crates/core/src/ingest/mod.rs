//! Loading proposals from Snapshot, Discourse, or local line-delimited files.

mod discourse;
mod file;
mod snapshot;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde_json::Value;
use thiserror::Error;

use crate::http::{HttpClient, HttpError, HttpResponse};
use crate::retry::{with_retries, Pacer, RetryPolicy, Sleeper};

pub use discourse::{discourse_listing_url, discourse_topic_url};
pub use file::{load_proposals_file, write_proposals_file};
pub use snapshot::{snapshot_request_body, SnapshotCursor, SNAPSHOT_PROPOSALS_QUERY};

pub const DEFAULT_SNAPSHOT_ENDPOINT: &str = "https://hub.snapshot.org/graphql";

/// The Snapshot spaces of the seven DeFi DAOs the taxonomy was built from.
pub const DEFAULT_SPACES: [&str; 7] = [
    "aave.eth",
    "arbitrumfoundation.eth",
    "balancer.eth",
    "comp-vote.eth",
    "lido-snapshot.eth",
    "safe.eth",
    "uniswap",
];

/// Governance forums for [`DEFAULT_SPACES`].
pub fn default_discourse_base_urls() -> BTreeMap<String, String> {
    [
        ("aave.eth", "https://governance.aave.com"),
        (
            "arbitrumfoundation.eth",
            "https://forum.arbitrum.foundation",
        ),
        ("balancer.eth", "https://forum.balancer.fi"),
        ("comp-vote.eth", "https://www.comp.xyz"),
        ("lido-snapshot.eth", "https://research.lido.fi"),
        ("safe.eth", "https://forum.safe.global"),
        ("uniswap", "https://gov.uniswap.org"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceConfig {
    pub snapshot_endpoint: String,
    pub discourse_base_urls: BTreeMap<String, String>,
    pub page_size: u32,
    pub request_timeout: Duration,
    pub max_retries: u32,
    /// Minimum gap between consecutive requests.
    pub min_request_delay: Duration,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            snapshot_endpoint: DEFAULT_SNAPSHOT_ENDPOINT.to_string(),
            discourse_base_urls: default_discourse_base_urls(),
            page_size: 100,
            request_timeout: Duration::from_secs(30),
            max_retries: 3,
            min_request_delay: Duration::from_millis(200),
        }
    }
}

impl SourceConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.page_size == 0 {
            return Err(IngestError::InvalidConfig("page_size must be >= 1".into()));
        }
        check_absolute(&self.snapshot_endpoint)?;
        for url in self.discourse_base_urls.values() {
            check_absolute(url)?;
        }
        Ok(())
    }
}

fn check_absolute(url: &str) -> Result<(), IngestError> {
    match reqwest::Url::parse(url) {
        Ok(u) if matches!(u.scheme(), "http" | "https") && u.has_host() => Ok(()),
        _ => Err(IngestError::InvalidConfig(format!(
            "not an absolute http(s) URL: {url}"
        ))),
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("unknown space {0:?}")]
    UnknownSpace(String),
    #[error("no discourse forum configured for space {0:?}")]
    UnconfiguredSpace(String),
    #[error("invalid source configuration: {0}")]
    InvalidConfig(String),
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("duplicate proposal id {0:?}")]
    DuplicateId(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Remote fetcher bound to a transport. Pages within one space must be
/// requested sequentially; different spaces may share one `Ingestor`
/// across threads.
pub struct Ingestor<'a> {
    config: SourceConfig,
    client: &'a dyn HttpClient,
    sleeper: &'a dyn Sleeper,
    pacer: Pacer,
    retry: RetryPolicy,
}

enum Attempt {
    Transient(String),
    Permanent(String),
}

impl<'a> Ingestor<'a> {
    pub fn new(
        config: SourceConfig,
        client: &'a dyn HttpClient,
        sleeper: &'a dyn Sleeper,
    ) -> Result<Self, IngestError> {
        config.validate()?;
        let retry = RetryPolicy {
            max_retries: config.max_retries,
            ..RetryPolicy::default()
        };
        Ok(Self {
            pacer: Pacer::new(config.min_request_delay),
            config,
            client,
            sleeper,
            retry,
        })
    }

    /// Overrides the backoff schedule; the retry count still comes from
    /// the source config.
    pub fn with_backoff(mut self, base_delay: Duration) -> Self {
        self.retry.base_delay = base_delay;
        self
    }

    pub fn config(&self) -> &SourceConfig {
        &self.config
    }

    fn send(
        &self,
        call: impl Fn() -> Result<HttpResponse, HttpError>,
    ) -> Result<HttpResponse, IngestError> {
        let result = with_retries(
            &self.retry,
            self.sleeper,
            |e: &Attempt| matches!(e, Attempt::Transient(_)),
            |_| {
                self.pacer.wait(self.sleeper);
                match call() {
                    Ok(r) if r.is_success() => Ok(r),
                    Ok(r) if r.status == 429 || r.status >= 500 => {
                        Err(Attempt::Transient(format!("HTTP {}", r.status)))
                    }
                    Ok(r) => Err(Attempt::Permanent(format!("HTTP {}", r.status))),
                    Err(e @ HttpError::NotRecorded { .. }) => {
                        Err(Attempt::Permanent(e.to_string()))
                    }
                    Err(e) => Err(Attempt::Transient(e.to_string())),
                }
            },
        );
        result.map_err(|e| match e {
            Attempt::Transient(m) | Attempt::Permanent(m) => IngestError::Transport(m),
        })
    }

    fn get_json<T: DeserializeOwned>(&self, url: &str) -> Result<T, IngestError> {
        let response = self.send(|| self.client.get(url))?;
        decode(&response.body)
    }

    fn post_json<T: DeserializeOwned>(&self, url: &str, body: &Value) -> Result<T, IngestError> {
        let response = self.send(|| self.client.post_json(url, &[], body))?;
        decode(&response.body)
    }
}

fn decode<T: DeserializeOwned>(body: &str) -> Result<T, IngestError> {
    serde_json::from_str(body).map_err(|e| IngestError::MalformedResponse(e.to_string()))
}

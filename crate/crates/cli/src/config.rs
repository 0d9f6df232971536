//! Optional TOML config. Flags override it; credentials never live here.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use anyhow::Context;
use daoclass_core::ingest::SourceConfig;
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub source: SourceSection,
    #[serde(default)]
    pub llm: LlmSection,
    #[serde(default)]
    pub classify: ClassifySection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub snapshot_endpoint: Option<String>,
    pub page_size: Option<u32>,
    pub request_timeout_secs: Option<u64>,
    pub max_retries: Option<u32>,
    pub min_request_delay_ms: Option<u64>,
    /// space → forum base URL, merged over the built-in list.
    #[serde(default)]
    pub discourse: BTreeMap<String, String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmSection {
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub max_tokens: Option<u32>,
    pub temperature: Option<f64>,
    pub frequency_penalty: Option<f64>,
    pub presence_penalty: Option<f64>,
    pub context_tokens: Option<usize>,
    pub max_retries: Option<u32>,
    pub request_timeout_secs: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifySection {
    pub body_budget: Option<usize>,
    pub concurrency: Option<usize>,
    pub corrective_retry: Option<bool>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn source_config(&self) -> SourceConfig {
        let mut c = SourceConfig::default();
        let s = &self.source;
        if let Some(v) = &s.snapshot_endpoint {
            c.snapshot_endpoint = v.clone();
        }
        if let Some(v) = s.page_size {
            c.page_size = v;
        }
        if let Some(v) = s.request_timeout_secs {
            c.request_timeout = Duration::from_secs(v);
        }
        if let Some(v) = s.max_retries {
            c.max_retries = v;
        }
        if let Some(v) = s.min_request_delay_ms {
            c.min_request_delay = Duration::from_millis(v);
        }
        c.discourse_base_urls
            .extend(s.discourse.iter().map(|(k, v)| (k.clone(), v.clone())));
        c
    }
}

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{Provider, ProviderError, ProviderRequest, RawResponse};

/// One line of a replay store: the answer recorded for a prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub prompt_hash: String,
    pub response_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub received_at: Option<DateTime<Utc>>,
}

pub fn load_replay_entries(path: &Path) -> std::io::Result<Vec<ReplayEntry>> {
    let reader = BufReader::new(File::open(path)?);
    let mut entries = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line).map_err(|e| {
            std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("{}:{}: {e}", path.display(), n + 1),
            )
        })?;
        entries.push(entry);
    }
    Ok(entries)
}

/// Answers from a recorded store keyed by the hash of the prompt text.
/// Unknown prompts are an error so that fixture drift is visible.
#[derive(Debug, Default)]
pub struct ReplayProvider {
    entries: HashMap<String, ReplayEntry>,
}

impl ReplayProvider {
    /// Later entries for the same hash replace earlier ones.
    pub fn new(entries: impl IntoIterator<Item = ReplayEntry>) -> Self {
        Self {
            entries: entries
                .into_iter()
                .map(|e| (e.prompt_hash.clone(), e))
                .collect(),
        }
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        Ok(Self::new(load_replay_entries(path)?))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Provider for ReplayProvider {
    fn name(&self) -> &str {
        "replay"
    }

    fn complete_once(&self, request: &ProviderRequest) -> Result<RawResponse, ProviderError> {
        let hash = request.content_hash();
        let entry = self
            .entries
            .get(&hash)
            .ok_or(ProviderError::UnknownPrompt(hash))?;
        Ok(RawResponse {
            text: entry.response_text.clone(),
            model: entry
                .model
                .clone()
                .unwrap_or_else(|| request.parameters.model.clone()),
            received_at: entry.received_at.unwrap_or(DateTime::UNIX_EPOCH),
            token_usage: None,
        })
    }
}

/// Appends every successful answer of the wrapped provider to a replay store.
pub struct RecordingProvider<P> {
    inner: P,
    path: PathBuf,
    lock: Mutex<()>,
}

impl<P: Provider> RecordingProvider<P> {
    pub fn new(inner: P, path: impl Into<PathBuf>) -> Self {
        Self {
            inner,
            path: path.into(),
            lock: Mutex::new(()),
        }
    }
}

impl<P: Provider> Provider for RecordingProvider<P> {
    fn name(&self) -> &str {
        "record"
    }

    fn complete_once(&self, request: &ProviderRequest) -> Result<RawResponse, ProviderError> {
        let response = self.inner.complete_once(request)?;
        let entry = ReplayEntry {
            prompt_hash: request.content_hash(),
            response_text: response.text.clone(),
            model: Some(response.model.clone()),
            received_at: Some(response.received_at),
        };
        let line = serde_json::to_string(&entry).expect("replay entry serializes");
        let _guard = self.lock.lock().expect("recorder lock poisoned");
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .and_then(|mut f| writeln!(f, "{line}"))
            .map_err(|e| ProviderError::Transport(format!("recording failed: {e}")))?;
        Ok(response)
    }
}

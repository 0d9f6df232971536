use std::collections::HashMap;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use super::RawResponse;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CacheKey {
    pub model: String,
    pub taxonomy_version: u32,
    pub prompt_hash: String,
}

/// Persisted form of one cache slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    #[serde(flatten)]
    pub key: CacheKey,
    pub response: RawResponse,
}

/// Thread-safe response cache. Hits return the stored response unchanged.
#[derive(Debug, Default)]
pub struct ResponseCache {
    entries: RwLock<HashMap<CacheKey, RawResponse>>,
}

impl ResponseCache {
    pub fn from_entries(entries: impl IntoIterator<Item = CacheEntry>) -> Self {
        Self {
            entries: RwLock::new(entries.into_iter().map(|e| (e.key, e.response)).collect()),
        }
    }

    pub fn get(&self, key: &CacheKey) -> Option<RawResponse> {
        self.entries
            .read()
            .expect("cache lock poisoned")
            .get(key)
            .cloned()
    }

    pub fn insert(&self, key: CacheKey, response: RawResponse) {
        self.entries
            .write()
            .expect("cache lock poisoned")
            .insert(key, response);
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All entries sorted by key.
    pub fn entries(&self) -> Vec<CacheEntry> {
        let mut out: Vec<CacheEntry> = self
            .entries
            .read()
            .expect("cache lock poisoned")
            .iter()
            .map(|(k, v)| CacheEntry {
                key: k.clone(),
                response: v.clone(),
            })
            .collect();
        out.sort_by(|a, b| a.key.cmp(&b.key));
        out
    }
}

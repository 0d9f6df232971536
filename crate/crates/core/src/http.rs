//! Minimal blocking HTTP surface shared by ingestion and the live LLM
//! provider, with record/replay implementations for offline runs.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

impl HttpResponse {
    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HttpError {
    #[error("request timed out: {0}")]
    Timeout(String),
    #[error("connection failed: {0}")]
    Connect(String),
    #[error("http error: {0}")]
    Other(String),
    #[error("no recorded exchange for {method} {url}")]
    NotRecorded { method: String, url: String },
}

pub trait HttpClient: Send + Sync {
    fn get(&self, url: &str) -> Result<HttpResponse, HttpError>;

    fn post_json(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &Value,
    ) -> Result<HttpResponse, HttpError>;
}

/// `reqwest`-backed client for live requests.
#[derive(Debug, Clone)]
pub struct ReqwestClient {
    client: reqwest::blocking::Client,
}

impl ReqwestClient {
    pub fn new(timeout: Duration) -> Result<Self, HttpError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .user_agent(concat!("daoclass/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| HttpError::Other(e.to_string()))?;
        Ok(Self { client })
    }

    fn finish(
        result: reqwest::Result<reqwest::blocking::Response>,
    ) -> Result<HttpResponse, HttpError> {
        let response = result.map_err(map_reqwest_error)?;
        let status = response.status().as_u16();
        let body = response.text().map_err(map_reqwest_error)?;
        Ok(HttpResponse { status, body })
    }
}

fn map_reqwest_error(e: reqwest::Error) -> HttpError {
    if e.is_timeout() {
        HttpError::Timeout(e.to_string())
    } else if e.is_connect() {
        HttpError::Connect(e.to_string())
    } else {
        HttpError::Other(e.to_string())
    }
}

impl HttpClient for ReqwestClient {
    fn get(&self, url: &str) -> Result<HttpResponse, HttpError> {
        Self::finish(self.client.get(url).send())
    }

    fn post_json(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &Value,
    ) -> Result<HttpResponse, HttpError> {
        let mut request = self.client.post(url).json(body);
        for (name, value) in headers {
            request = request.header(name.as_str(), value.as_str());
        }
        Self::finish(request.send())
    }
}

/// One recorded request/response pair. Headers are never recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub method: String,
    pub url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<Value>,
    pub status: u16,
    pub response: Value,
}

impl Exchange {
    fn matches(&self, method: &str, url: &str, body: Option<&Value>) -> bool {
        self.method == method && self.url == url && self.body.as_ref() == body
    }
}

/// Serves responses from recorded exchanges; unknown requests are errors.
#[derive(Debug, Clone, Default)]
pub struct ReplayClient {
    exchanges: Vec<Exchange>,
}

impl ReplayClient {
    pub fn new(exchanges: Vec<Exchange>) -> Self {
        Self { exchanges }
    }

    /// Reads a line-delimited file of [`Exchange`] records.
    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        let reader = BufReader::new(File::open(path)?);
        let mut exchanges = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let exchange = serde_json::from_str(&line).map_err(|e| {
                std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("line {}: {e}", n + 1),
                )
            })?;
            exchanges.push(exchange);
        }
        Ok(Self { exchanges })
    }

    fn lookup(
        &self,
        method: &str,
        url: &str,
        body: Option<&Value>,
    ) -> Result<HttpResponse, HttpError> {
        self.exchanges
            .iter()
            .find(|x| x.matches(method, url, body))
            .map(|x| HttpResponse {
                status: x.status,
                body: match &x.response {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                },
            })
            .ok_or_else(|| HttpError::NotRecorded {
                method: method.to_string(),
                url: url.to_string(),
            })
    }
}

impl HttpClient for ReplayClient {
    fn get(&self, url: &str) -> Result<HttpResponse, HttpError> {
        self.lookup("GET", url, None)
    }

    fn post_json(
        &self,
        url: &str,
        _headers: &[(String, String)],
        body: &Value,
    ) -> Result<HttpResponse, HttpError> {
        self.lookup("POST", url, Some(body))
    }
}

/// Wraps another client and appends every exchange to a file.
pub struct RecordingClient<C> {
    inner: C,
    path: PathBuf,
    lock: Mutex<()>,
}

impl<C: HttpClient> RecordingClient<C> {
    pub fn new(inner: C, path: impl Into<PathBuf>) -> Self {
        Self {
            inner,
            path: path.into(),
            lock: Mutex::new(()),
        }
    }

    fn append(&self, exchange: &Exchange) {
        let _guard = self.lock.lock().expect("recorder lock poisoned");
        let line = serde_json::to_string(exchange).expect("exchange serializes");
        let written = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .and_then(|mut f| writeln!(f, "{line}"));
        if let Err(e) = written {
            tracing::warn!(path = %self.path.display(), error = %e, "failed to record exchange");
        }
    }

    fn record(
        &self,
        method: &str,
        url: &str,
        body: Option<&Value>,
        result: Result<HttpResponse, HttpError>,
    ) -> Result<HttpResponse, HttpError> {
        if let Ok(response) = &result {
            let parsed = serde_json::from_str(&response.body)
                .unwrap_or_else(|_| Value::String(response.body.clone()));
            self.append(&Exchange {
                method: method.to_string(),
                url: url.to_string(),
                body: body.cloned(),
                status: response.status,
                response: parsed,
            });
        }
        result
    }
}

impl<C: HttpClient> HttpClient for RecordingClient<C> {
    fn get(&self, url: &str) -> Result<HttpResponse, HttpError> {
        let result = self.inner.get(url);
        self.record("GET", url, None, result)
    }

    fn post_json(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &Value,
    ) -> Result<HttpResponse, HttpError> {
        let result = self.inner.post_json(url, headers, body);
        self.record("POST", url, Some(body), result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn replay_matches_method_url_and_body() {
        let client = ReplayClient::new(vec![
            Exchange {
                method: "POST".into(),
                url: "https://hub/graphql".into(),
                body: Some(json!({"q": 1})),
                status: 200,
                response: json!({"ok": true}),
            },
            Exchange {
                method: "GET".into(),
                url: "https://forum/latest.json".into(),
                body: None,
                status: 200,
                response: json!("plain"),
            },
        ]);
        let r = client
            .post_json("https://hub/graphql", &[], &json!({"q": 1}))
            .unwrap();
        assert_eq!(r.body, r#"{"ok":true}"#);
        assert!(client
            .post_json("https://hub/graphql", &[], &json!({"q": 2}))
            .is_err());
        assert_eq!(
            client.get("https://forum/latest.json").unwrap().body,
            "plain"
        );
        assert!(matches!(
            client.get("https://forum/other.json"),
            Err(HttpError::NotRecorded { .. })
        ));
    }

    #[test]
    fn recording_then_replaying_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rec.jsonl");
        let source = ReplayClient::new(vec![Exchange {
            method: "GET".into(),
            url: "u".into(),
            body: None,
            status: 200,
            response: json!({"a": [1, 2]}),
        }]);
        let recorder = RecordingClient::new(source, &path);
        let live = recorder.get("u").unwrap();
        let replay = ReplayClient::from_file(&path).unwrap();
        assert_eq!(replay.get("u").unwrap(), live);
    }
}

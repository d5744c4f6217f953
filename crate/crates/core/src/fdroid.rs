//! Fetching an F-Droid index-v2 document.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::CoreError;

#[derive(Debug, thiserror::Error)]
pub enum FetchError {
    #[error("transport error fetching {url}: {message}")]
    Transport { url: String, message: String, retryable: bool },
    #[error("index format error: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl FetchError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, FetchError::Transport { retryable: true, .. })
    }
}

impl From<FetchError> for CoreError {
    fn from(e: FetchError) -> Self {
        match e {
            FetchError::Io { path, source } => CoreError::Io { path, source },
            other => CoreError::Data(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub package_name: String,
    pub source_code: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSummary {
    pub url: String,
    pub packages: Vec<IndexEntry>,
}

/// A localized field is either a plain string or a `{locale: string}` map; prefer en-US.
fn localized(v: &serde_json::Value) -> Option<String> {
    match v {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Object(m) => m
            .get("en-US")
            .or_else(|| m.values().next())
            .and_then(|x| x.as_str())
            .map(str::to_string),
        _ => None,
    }
}

/// Package names and source URLs from an index-v2 body.
pub fn summarize(url: &str, body: &str) -> Result<IndexSummary, FetchError> {
    let doc: serde_json::Value = serde_json::from_str(body).map_err(|e| FetchError::Format(e.to_string()))?;
    let packages = match doc.get("packages") {
        None | Some(serde_json::Value::Null) => return Err(FetchError::Format("no `packages` object".into())),
        Some(serde_json::Value::Object(m)) => m,
        Some(_) => return Err(FetchError::Format("`packages` is not an object".into())),
    };
    let mut out: Vec<IndexEntry> = packages
        .iter()
        .map(|(name, p)| IndexEntry {
            package_name: name.clone(),
            source_code: p.pointer("/metadata/sourceCode").and_then(localized),
        })
        .collect();
    out.sort_by(|a, b| a.package_name.cmp(&b.package_name));
    Ok(IndexSummary { url: url.to_string(), packages: out })
}

fn transport(url: &str, e: ureq::Error) -> FetchError {
    let retryable = match &e {
        ureq::Error::StatusCode(code) => *code == 429 || *code >= 500,
        ureq::Error::Io(_) | ureq::Error::Timeout(_) | ureq::Error::HostNotFound | ureq::Error::ConnectionFailed => true,
        _ => false,
    };
    FetchError::Transport { url: url.to_string(), message: e.to_string(), retryable }
}

/// Downloads the index at `url`, writes it verbatim to `out` and returns its summary.
/// Nothing is written unless the body is a well-formed index.
pub fn fetch_fdroid_index(url: &str, out: &Path) -> Result<IndexSummary, FetchError> {
    let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(Duration::from_secs(120))).build().into();
    let mut resp = agent.get(url).call().map_err(|e| transport(url, e))?;
    let body = resp
        .body_mut()
        .with_config()
        .limit(1 << 30)
        .read_to_string()
        .map_err(|e| transport(url, e))?;
    let summary = summarize(url, &body)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| FetchError::Io { path: dir.to_path_buf(), source })?;
    }
    std::fs::write(out, body.as_bytes()).map_err(|source| FetchError::Io { path: out.to_path_buf(), source })?;
    Ok(summary)
}

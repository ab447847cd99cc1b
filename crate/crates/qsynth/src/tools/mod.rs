//! The agent's tool suite: `search`, `browse`, `python`.
//!
//! [`ToolSuite`] is the interface the gateway executes tool calls against.
//! [`ToolStack`] layers the contamination blocklist and the response cache
//! over any inner implementation (mock world or live adapters).

pub mod blocklist;
pub mod cache;
#[cfg(feature = "live")]
pub mod live;
pub mod mock;
pub mod recording;
#[cfg(feature = "live")]
pub mod sandbox;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use blocklist::Blocklist;
pub use cache::ToolCache;
pub use recording::RecordingTools;

/// One ranked search hit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResult {
    pub title: String,
    pub url: String,
    pub snippet: String,
}

/// Result of executing code in the python tool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PythonOutcome {
    pub stdout: String,
    pub stderr: String,
    /// Process exit status; zero means success.
    pub status: i32,
}

#[derive(Debug, Error)]
pub enum ToolError {
    #[error("empty {0} input")]
    EmptyInput(&'static str),
    #[error("invalid url `{0}`")]
    InvalidUrl(String),
    /// Served both for genuinely missing pages and for blocklisted hosts,
    /// which must be indistinguishable from a dead link.
    #[error("404 Not Found: {0}")]
    NotFound(String),
    #[error("fetch failure for `{url}`: {message}")]
    FetchFailure { url: String, message: String },
    #[error("search backend unavailable: {0}")]
    UpstreamUnavailable(String),
    #[error("python execution timed out after {0} ms")]
    Timeout(u64),
    #[error("sandbox violation: {0}")]
    SandboxViolation(String),
}

/// The three basic tools. Implementations must be pure with respect to the
/// normalized argument within a run (the cache layer relies on it).
pub trait ToolSuite: Send + Sync {
    fn search(&self, query: &str) -> Result<Vec<SearchResult>, ToolError>;
    fn browse(&self, url: &str) -> Result<String, ToolError>;
    fn python(&self, code: &str) -> Result<PythonOutcome, ToolError>;
}

/// Normalize a search query for cache identity: case-fold, collapse spaces.
pub fn normalize_query(q: &str) -> String {
    crate::model::normalize_name(q)
}

/// Canonicalize a URL for cache identity: parse, lowercase host, drop the
/// fragment. Returns an error for syntactically invalid URLs.
pub fn canonicalize_url(raw: &str) -> Result<String, ToolError> {
    let mut url =
        url::Url::parse(raw.trim()).map_err(|_| ToolError::InvalidUrl(raw.to_string()))?;
    if !matches!(url.scheme(), "http" | "https") {
        return Err(ToolError::InvalidUrl(raw.to_string()));
    }
    if url.host_str().is_none() {
        return Err(ToolError::InvalidUrl(raw.to_string()));
    }
    url.set_fragment(None);
    Ok(url.to_string())
}

/// Blocklist + cache layered over an inner tool suite.
///
/// Order of operations for `browse`: validate, blocklist, cache, inner fetch.
/// Search results from blocked hosts are dropped before they are cached or
/// returned, so blocked content never leaves this layer in any form.
pub struct ToolStack<T> {
    inner: T,
    blocklist: Blocklist,
    cache: ToolCache,
    top_k: usize,
    page_char_cap: usize,
}

impl<T: ToolSuite> ToolStack<T> {
    pub fn new(inner: T, blocklist: Blocklist, cache: ToolCache) -> Self {
        ToolStack {
            inner,
            blocklist,
            cache,
            top_k: 10,
            page_char_cap: 40_000,
        }
    }

    pub fn with_limits(mut self, top_k: usize, page_char_cap: usize) -> Self {
        self.top_k = top_k;
        self.page_char_cap = page_char_cap;
        self
    }

    pub fn cache(&self) -> &ToolCache {
        &self.cache
    }

    pub fn blocklist(&self) -> &Blocklist {
        &self.blocklist
    }
}

impl<T: ToolSuite> ToolSuite for ToolStack<T> {
    fn search(&self, query: &str) -> Result<Vec<SearchResult>, ToolError> {
        if query.trim().is_empty() {
            return Err(ToolError::EmptyInput("search"));
        }
        let key = normalize_query(query);
        if let Some(hit) = self.cache.get_search(&key) {
            return Ok(hit);
        }
        let mut results = self.inner.search(query)?;
        results.retain(|r| !self.blocklist.is_blocked(&r.url));
        results.truncate(self.top_k);
        self.cache.put_search(&key, &results);
        Ok(results)
    }

    fn browse(&self, url: &str) -> Result<String, ToolError> {
        let canonical = canonicalize_url(url)?;
        if self.blocklist.is_blocked(&canonical) {
            return Err(ToolError::NotFound(canonical));
        }
        if let Some(hit) = self.cache.get_page(&canonical) {
            return Ok(hit);
        }
        let mut page = self.inner.browse(&canonical)?;
        if page.len() > self.page_char_cap {
            let mut cut = self.page_char_cap;
            while !page.is_char_boundary(cut) {
                cut -= 1;
            }
            page.truncate(cut);
        }
        self.cache.put_page(&canonical, &page);
        Ok(page)
    }

    fn python(&self, code: &str) -> Result<PythonOutcome, ToolError> {
        if code.trim().is_empty() {
            return Err(ToolError::EmptyInput("python"));
        }
        let key = code.trim().to_string();
        if let Some(hit) = self.cache.get_python(&key) {
            return Ok(hit);
        }
        let outcome = self.inner.python(code)?;
        self.cache.put_python(&key, &outcome);
        Ok(outcome)
    }
}

// Allow passing trait objects and references where a ToolSuite is expected.
impl<T: ToolSuite + ?Sized> ToolSuite for &T {
    fn search(&self, query: &str) -> Result<Vec<SearchResult>, ToolError> {
        (**self).search(query)
    }
    fn browse(&self, url: &str) -> Result<String, ToolError> {
        (**self).browse(url)
    }
    fn python(&self, code: &str) -> Result<PythonOutcome, ToolError> {
        (**self).python(code)
    }
}

impl<T: ToolSuite + ?Sized> ToolSuite for std::sync::Arc<T> {
    fn search(&self, query: &str) -> Result<Vec<SearchResult>, ToolError> {
        (**self).search(query)
    }
    fn browse(&self, url: &str) -> Result<String, ToolError> {
        (**self).browse(url)
    }
    fn python(&self, code: &str) -> Result<PythonOutcome, ToolError> {
        (**self).python(code)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonicalization() {
        assert_eq!(
            canonicalize_url("HTTPS://Example.ORG/Path#frag").unwrap(),
            "https://example.org/Path"
        );
        assert!(canonicalize_url("notaurl").is_err());
        assert!(canonicalize_url("ftp://example.org/x").is_err());
    }
}

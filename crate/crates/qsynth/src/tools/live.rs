//! Live tool adapters (feature `live`).
//!
//! Speak to a configurable search API and a fetch/reader service over HTTP.
//! The search endpoint is expected to answer
//! `GET {search_endpoint}?q={query}` with `{"results": [{"title", "url",
//! "snippet"}]}`; the fetch endpoint answers `GET {fetch_endpoint}?url={url}`
//! with the page text. Transient upstream failures retry with backoff before
//! surfacing an error.

use std::time::Duration;

use serde::Deserialize;

use super::sandbox::PythonSandbox;
use super::{PythonOutcome, SearchResult, ToolError, ToolSuite};

#[derive(Debug, Clone)]
pub struct LiveToolConfig {
    pub search_endpoint: String,
    /// Sent as `Authorization: Bearer ...` to the search endpoint when set.
    pub search_api_key: Option<String>,
    pub fetch_endpoint: String,
    pub retries: u32,
    pub backoff_ms: u64,
    pub timeout_ms: u64,
}

impl Default for LiveToolConfig {
    fn default() -> Self {
        LiveToolConfig {
            search_endpoint: String::new(),
            search_api_key: None,
            fetch_endpoint: String::new(),
            retries: 3,
            backoff_ms: 250,
            timeout_ms: 30_000,
        }
    }
}

pub struct LiveTools {
    config: LiveToolConfig,
    client: reqwest::blocking::Client,
    sandbox: PythonSandbox,
}

#[derive(Deserialize)]
struct SearchEnvelope {
    #[serde(default)]
    results: Vec<SearchResult>,
}

impl LiveTools {
    pub fn new(config: LiveToolConfig) -> Result<Self, ToolError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| ToolError::UpstreamUnavailable(e.to_string()))?;
        Ok(LiveTools {
            config,
            client,
            sandbox: PythonSandbox::default(),
        })
    }

    fn with_retry<T>(
        &self,
        mut call: impl FnMut() -> Result<T, String>,
    ) -> Result<T, String> {
        let mut last = String::new();
        for attempt in 0..self.config.retries.max(1) {
            match call() {
                Ok(v) => return Ok(v),
                Err(e) => {
                    last = e;
                    std::thread::sleep(Duration::from_millis(
                        self.config.backoff_ms * (attempt as u64 + 1),
                    ));
                }
            }
        }
        Err(last)
    }
}

impl ToolSuite for LiveTools {
    fn search(&self, query: &str) -> Result<Vec<SearchResult>, ToolError> {
        if query.trim().is_empty() {
            return Err(ToolError::EmptyInput("search"));
        }
        let envelope = self
            .with_retry(|| {
                let mut req = self
                    .client
                    .get(&self.config.search_endpoint)
                    .query(&[("q", query)]);
                if let Some(key) = &self.config.search_api_key {
                    req = req.bearer_auth(key);
                }
                let resp = req.send().map_err(|e| e.to_string())?;
                if !resp.status().is_success() {
                    return Err(format!("search endpoint returned {}", resp.status()));
                }
                resp.json::<SearchEnvelope>().map_err(|e| e.to_string())
            })
            .map_err(ToolError::UpstreamUnavailable)?;
        Ok(envelope.results)
    }

    fn browse(&self, url: &str) -> Result<String, ToolError> {
        let canonical = super::canonicalize_url(url)?;
        let fetch = |target: &str| -> Result<(u16, String), String> {
            let resp = self
                .client
                .get(&self.config.fetch_endpoint)
                .query(&[("url", target)])
                .send()
                .map_err(|e| e.to_string())?;
            let status = resp.status().as_u16();
            let text = resp.text().map_err(|e| e.to_string())?;
            Ok((status, text))
        };
        let (status, text) = self
            .with_retry(|| fetch(&canonical))
            .map_err(|message| ToolError::FetchFailure {
                url: canonical.clone(),
                message,
            })?;
        match status {
            200..=299 => Ok(text),
            404 => Err(ToolError::NotFound(canonical)),
            other => Err(ToolError::FetchFailure {
                url: canonical,
                message: format!("fetch service returned {other}"),
            }),
        }
    }

    fn python(&self, code: &str) -> Result<PythonOutcome, ToolError> {
        self.sandbox.run(code)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;

    /// Minimal one-shot HTTP server for adapter tests.
    fn serve_once(body: &'static str, status: &'static str) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            if let Ok((mut stream, _)) = listener.accept() {
                let mut buf = [0u8; 4096];
                let _ = stream.read(&mut buf);
                let response = format!(
                    "HTTP/1.1 {status}\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
                let _ = stream.write_all(response.as_bytes());
            }
        });
        format!("http://{addr}/")
    }

    #[test]
    fn search_parses_result_envelope() {
        let endpoint = serve_once(
            r#"{"results":[{"title":"T","url":"https://example.org/","snippet":"S"}]}"#,
            "200 OK",
        );
        let tools = LiveTools::new(LiveToolConfig {
            search_endpoint: endpoint,
            retries: 1,
            backoff_ms: 1,
            ..LiveToolConfig::default()
        })
        .unwrap();
        let hits = tools.search("anything").unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].url, "https://example.org/");
    }

    #[test]
    fn browse_maps_404() {
        let endpoint = serve_once("gone", "404 Not Found");
        let tools = LiveTools::new(LiveToolConfig {
            fetch_endpoint: endpoint,
            retries: 1,
            backoff_ms: 1,
            ..LiveToolConfig::default()
        })
        .unwrap();
        assert!(matches!(
            tools.browse("https://example.org/x"),
            Err(ToolError::NotFound(_))
        ));
    }
}

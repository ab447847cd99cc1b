//! Tool response cache.
//!
//! Within a run, two calls with identical normalized arguments must return
//! identical results, and factuality verification re-visits URLs seen during
//! synthesis: so results are cached in memory and, when a directory is
//! configured, appended to a per-run JSONL file that reloads on resume.
//! Entries from other runs are never loaded (the file is keyed by run id),
//! which is what makes stale data from earlier runs invisible.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{PythonOutcome, SearchResult};
use crate::model::ToolName;

/// Cached value per tool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum CachedValue {
    Search { results: Vec<SearchResult> },
    Page { text: String },
    Python { outcome: PythonOutcome },
}

/// One persisted cache line.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CacheLine {
    tool: ToolName,
    args: String,
    value: CachedValue,
    stored_at: DateTime<Utc>,
}

fn stamp() -> DateTime<Utc> {
    #[cfg(not(target_arch = "wasm32"))]
    {
        Utc::now()
    }
    #[cfg(target_arch = "wasm32")]
    {
        crate::clock::fixed_epoch()
    }
}

/// Thread-safe tool response cache, optionally persistent.
pub struct ToolCache {
    map: Mutex<HashMap<(ToolName, String), CachedValue>>,
    file: Option<Mutex<File>>,
    path: Option<PathBuf>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl ToolCache {
    /// In-memory cache only.
    pub fn in_memory() -> Self {
        ToolCache {
            map: Mutex::new(HashMap::new()),
            file: None,
            path: None,
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    /// Open (or create) the persistent cache for `run_id` under `dir`,
    /// loading any entries a previous invocation of the same run stored.
    pub fn persistent(dir: &Path, run_id: &str) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("tool-cache-{run_id}.jsonl"));
        let mut map = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            for line in reader.lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                // A torn trailing line from a killed run is skipped; the
                // entry is simply refetched.
                if let Ok(entry) = serde_json::from_str::<CacheLine>(&line) {
                    map.insert((entry.tool, entry.args), entry.value);
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(ToolCache {
            map: Mutex::new(map),
            file: Some(Mutex::new(file)),
            path: Some(path),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.map.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get(&self, tool: ToolName, args: &str) -> Option<CachedValue> {
        let found = self
            .map
            .lock()
            .unwrap()
            .get(&(tool, args.to_string()))
            .cloned();
        match found {
            Some(v) => {
                self.hits.fetch_add(1, Ordering::Relaxed);
                Some(v)
            }
            None => {
                self.misses.fetch_add(1, Ordering::Relaxed);
                None
            }
        }
    }

    fn put(&self, tool: ToolName, args: &str, value: CachedValue) {
        self.map
            .lock()
            .unwrap()
            .insert((tool, args.to_string()), value.clone());
        if let Some(file) = &self.file {
            let line = CacheLine {
                tool,
                args: args.to_string(),
                value,
                stored_at: stamp(),
            };
            let mut f = file.lock().unwrap();
            // Cache persistence is best-effort; a write failure only costs
            // a refetch on resume.
            let _ = serde_json::to_string(&line)
                .map(|s| writeln!(f, "{s}"))
                .map(|_| ());
        }
    }

    pub(super) fn get_search(&self, key: &str) -> Option<Vec<SearchResult>> {
        match self.get(ToolName::Search, key) {
            Some(CachedValue::Search { results }) => Some(results),
            _ => None,
        }
    }

    pub(super) fn put_search(&self, key: &str, results: &[SearchResult]) {
        self.put(
            ToolName::Search,
            key,
            CachedValue::Search {
                results: results.to_vec(),
            },
        );
    }

    pub(super) fn get_page(&self, key: &str) -> Option<String> {
        match self.get(ToolName::Browse, key) {
            Some(CachedValue::Page { text }) => Some(text),
            _ => None,
        }
    }

    pub(super) fn put_page(&self, key: &str, text: &str) {
        self.put(
            ToolName::Browse,
            key,
            CachedValue::Page {
                text: text.to_string(),
            },
        );
    }

    pub(super) fn get_python(&self, key: &str) -> Option<PythonOutcome> {
        match self.get(ToolName::Python, key) {
            Some(CachedValue::Python { outcome }) => Some(outcome),
            _ => None,
        }
    }

    pub(super) fn put_python(&self, key: &str, outcome: &PythonOutcome) {
        self.put(
            ToolName::Python,
            key,
            CachedValue::Python {
                outcome: outcome.clone(),
            },
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hit_and_miss_counters() {
        let cache = ToolCache::in_memory();
        assert!(cache.get_search("q").is_none());
        cache.put_search("q", &[]);
        assert!(cache.get_search("q").is_some());
        assert_eq!(cache.hits(), 1);
        assert_eq!(cache.misses(), 1);
    }

    #[test]
    fn persistent_cache_reloads_for_same_run() {
        let dir = tempfile::tempdir().unwrap();
        {
            let cache = ToolCache::persistent(dir.path(), "run-a").unwrap();
            cache.put_page("https://example.org/", "hello");
        }
        let reloaded = ToolCache::persistent(dir.path(), "run-a").unwrap();
        assert_eq!(reloaded.get_page("https://example.org/").unwrap(), "hello");
        // A different run id sees nothing.
        let other = ToolCache::persistent(dir.path(), "run-b").unwrap();
        assert!(other.get_page("https://example.org/").is_none());
    }
}

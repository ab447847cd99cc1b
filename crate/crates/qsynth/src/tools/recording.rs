//! Invocation-log wrapper.
//!
//! Wraps any tool suite and records every invocation. Tests use it to check
//! filter short-circuiting (no later-stage tool calls after a rejection) and
//! the recount identity between transcripts and the tool log.

use std::sync::{Arc, Mutex};

use super::{PythonOutcome, SearchResult, ToolError, ToolSuite};
use crate::model::ToolName;

/// One logged tool invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Invocation {
    pub tool: ToolName,
    pub args: String,
    pub is_error: bool,
}

/// Shared handle to the invocation log.
pub type InvocationLog = Arc<Mutex<Vec<Invocation>>>;

pub struct RecordingTools<T> {
    inner: T,
    log: InvocationLog,
}

impl<T: ToolSuite> RecordingTools<T> {
    pub fn new(inner: T) -> Self {
        RecordingTools {
            inner,
            log: Arc::new(Mutex::new(Vec::new())),
        }
    }

    pub fn log_handle(&self) -> InvocationLog {
        Arc::clone(&self.log)
    }

    fn record(&self, tool: ToolName, args: &str, is_error: bool) {
        self.log.lock().unwrap().push(Invocation {
            tool,
            args: args.to_string(),
            is_error,
        });
    }
}

impl<T: ToolSuite> ToolSuite for RecordingTools<T> {
    fn search(&self, query: &str) -> Result<Vec<SearchResult>, ToolError> {
        let out = self.inner.search(query);
        self.record(ToolName::Search, query, out.is_err());
        out
    }

    fn browse(&self, url: &str) -> Result<String, ToolError> {
        let out = self.inner.browse(url);
        self.record(ToolName::Browse, url, out.is_err());
        out
    }

    fn python(&self, code: &str) -> Result<PythonOutcome, ToolError> {
        let out = self.inner.python(code);
        self.record(ToolName::Python, code, out.is_err());
        out
    }
}

//! Live chat-completion backend (feature `live`).
//!
//! Speaks an OpenAI-style `/chat/completions` schema: messages in, one
//! assistant message out, tool invocations carried in `tool_calls` with JSON
//! argument objects (`{"query"}`, `{"url"}`, `{"code"}`). Thinking text may
//! arrive either in a `reasoning_content` field or inside `<think>` tags in
//! the content.

use serde::Deserialize;
use serde_json::json;

use super::backend::{
    AgentAction, AssistantTurn, BackendError, ChatMessage, ChatRole, CompletionBackend,
    ToolRequest,
};
use crate::model::ToolName;

/// Declared signatures for the three tools, sent with every request and
/// embedded in exported SFT records.
pub fn tool_schemas() -> serde_json::Value {
    json!([
        {
            "type": "function",
            "function": {
                "name": "search",
                "description": "Search the web and return ranked results.",
                "parameters": {
                    "type": "object",
                    "properties": {"query": {"type": "string"}},
                    "required": ["query"]
                }
            }
        },
        {
            "type": "function",
            "function": {
                "name": "browse",
                "description": "Fetch a web page and return its text.",
                "parameters": {
                    "type": "object",
                    "properties": {"url": {"type": "string"}},
                    "required": ["url"]
                }
            }
        },
        {
            "type": "function",
            "function": {
                "name": "python",
                "description": "Run python code in a sandbox and return its output.",
                "parameters": {
                    "type": "object",
                    "properties": {"code": {"type": "string"}},
                    "required": ["code"]
                }
            }
        }
    ])
}

#[derive(Debug, Clone)]
pub struct LiveBackendConfig {
    pub url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub temperature: f64,
    pub timeout_ms: u64,
}

impl Default for LiveBackendConfig {
    fn default() -> Self {
        LiveBackendConfig {
            url: String::new(),
            model: String::new(),
            api_key: None,
            temperature: 0.7,
            timeout_ms: 120_000,
        }
    }
}

pub struct LiveBackend {
    config: LiveBackendConfig,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
    #[serde(default)]
    reasoning_content: Option<String>,
    #[serde(default)]
    tool_calls: Vec<WireToolCall>,
}

#[derive(Deserialize)]
struct WireToolCall {
    function: WireFunction,
}

#[derive(Deserialize)]
struct WireFunction {
    name: String,
    arguments: String,
}

impl LiveBackend {
    pub fn new(config: LiveBackendConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| BackendError::Unreachable(e.to_string()))?;
        Ok(LiveBackend { config, client })
    }

    fn wire_messages(conversation: &[ChatMessage]) -> Vec<serde_json::Value> {
        conversation
            .iter()
            .map(|m| {
                let role = match m.role {
                    ChatRole::System => "system",
                    ChatRole::User => "user",
                    ChatRole::Assistant => "assistant",
                    ChatRole::Tool => "tool",
                };
                let mut value = json!({"role": role, "content": m.content});
                if let Some(call) = &m.tool_call {
                    let args = match call.tool {
                        ToolName::Search => json!({"query": call.args}),
                        ToolName::Browse => json!({"url": call.args}),
                        ToolName::Python => json!({"code": call.args}),
                    };
                    value["tool_calls"] = json!([{
                        "id": "call_0",
                        "type": "function",
                        "function": {"name": call.tool.as_str(), "arguments": args.to_string()}
                    }]);
                }
                value
            })
            .collect()
    }
}

impl CompletionBackend for LiveBackend {
    fn complete(
        &self,
        conversation: &[ChatMessage],
        seed: u64,
    ) -> Result<AssistantTurn, BackendError> {
        let body = json!({
            "model": self.config.model,
            "messages": Self::wire_messages(conversation),
            "tools": tool_schemas(),
            "temperature": self.config.temperature,
            "seed": (seed & 0x7fff_ffff) as i64,
        });
        let mut req = self.client.post(&self.config.url).json(&body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .map_err(|e| BackendError::Unreachable(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(BackendError::Unreachable(format!(
                "completion endpoint returned {}",
                resp.status()
            )));
        }
        let completion: Completion = resp
            .json()
            .map_err(|e| BackendError::Malformed(e.to_string()))?;
        let message = completion
            .choices
            .into_iter()
            .next()
            .map(|c| c.message)
            .ok_or_else(|| BackendError::Malformed("no choices in completion".into()))?;

        let (think, content) = split_think(
            message.reasoning_content,
            message.content.unwrap_or_default(),
        );

        if let Some(call) = message.tool_calls.into_iter().next() {
            let tool: ToolName = call
                .function
                .name
                .parse()
                .map_err(|e: String| BackendError::Malformed(e))?;
            let args = parse_tool_args(tool, &call.function.arguments)
                .ok_or_else(|| BackendError::Malformed("bad tool arguments".into()))?;
            return Ok(AssistantTurn {
                think,
                action: AgentAction::Call(ToolRequest { tool, args }),
            });
        }
        if content.trim().is_empty() {
            return Err(BackendError::Malformed(
                "assistant message had neither content nor tool call".into(),
            ));
        }
        Ok(AssistantTurn {
            think,
            action: AgentAction::Finish(content),
        })
    }
}

/// Pull thinking text out of a `<think>...</think>` prefix when the provider
/// does not use a dedicated field.
fn split_think(reasoning: Option<String>, content: String) -> (Option<String>, String) {
    if let Some(r) = reasoning {
        if !r.trim().is_empty() {
            return (Some(r), content);
        }
    }
    let trimmed = content.trim_start();
    if let Some(rest) = trimmed.strip_prefix("<think>") {
        if let Some(end) = rest.find("</think>") {
            let think = rest[..end].trim().to_string();
            let remainder = rest[end + "</think>".len()..].trim().to_string();
            let think = if think.is_empty() { None } else { Some(think) };
            return (think, remainder);
        }
    }
    (None, content)
}

fn parse_tool_args(tool: ToolName, raw: &str) -> Option<String> {
    let value: serde_json::Value = serde_json::from_str(raw).ok()?;
    let key = match tool {
        ToolName::Search => "query",
        ToolName::Browse => "url",
        ToolName::Python => "code",
    };
    value.get(key)?.as_str().map(|s| s.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn think_extraction() {
        let (think, rest) = split_think(None, "<think>plan</think>Answer: x".into());
        assert_eq!(think.as_deref(), Some("plan"));
        assert_eq!(rest, "Answer: x");
        let (think, rest) = split_think(Some("explicit".into()), "body".into());
        assert_eq!(think.as_deref(), Some("explicit"));
        assert_eq!(rest, "body");
    }

    #[test]
    fn tool_args() {
        assert_eq!(
            parse_tool_args(ToolName::Search, r#"{"query":"foam"}"#).as_deref(),
            Some("foam")
        );
        assert!(parse_tool_args(ToolName::Browse, r#"{"query":"x"}"#).is_none());
    }
}

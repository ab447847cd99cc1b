//! Completion backend protocol.
//!
//! The gateway drives any chat-completion implementation through
//! [`CompletionBackend`]: the backend receives the conversation so far and
//! answers with optional thinking text plus exactly one action: a single
//! tool invocation or a final answer. Seeded backends must be deterministic
//! for identical (conversation, seed).

use thiserror::Error;

use crate::model::ToolName;

/// Message roles in a gateway conversation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChatRole {
    System,
    User,
    Assistant,
    Tool,
}

/// One conversation message. Assistant messages that invoked a tool carry
/// the structured request alongside any text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
    pub tool_call: Option<ToolRequest>,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: ChatRole::System,
            content: content.into(),
            tool_call: None,
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: ChatRole::User,
            content: content.into(),
            tool_call: None,
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: ChatRole::Assistant,
            content: content.into(),
            tool_call: None,
        }
    }

    pub fn tool_result(content: impl Into<String>) -> Self {
        ChatMessage {
            role: ChatRole::Tool,
            content: content.into(),
            tool_call: None,
        }
    }
}

/// A structured tool invocation request: one per assistant message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolRequest {
    pub tool: ToolName,
    pub args: String,
}

/// What the backend decided to do this turn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AgentAction {
    Call(ToolRequest),
    Finish(String),
}

/// One assistant turn: optional thinking plus exactly one action.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssistantTurn {
    pub think: Option<String>,
    pub action: AgentAction,
}

impl AssistantTurn {
    pub fn finish(text: impl Into<String>) -> Self {
        AssistantTurn {
            think: None,
            action: AgentAction::Finish(text.into()),
        }
    }

    pub fn call(tool: ToolName, args: impl Into<String>) -> Self {
        AssistantTurn {
            think: None,
            action: AgentAction::Call(ToolRequest {
                tool,
                args: args.into(),
            }),
        }
    }

    pub fn with_think(mut self, think: impl Into<String>) -> Self {
        self.think = Some(think.into());
        self
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend unreachable: {0}")]
    Unreachable(String),
    #[error("backend returned malformed output: {0}")]
    Malformed(String),
}

/// A multi-turn reasoning model (or a deterministic stand-in for one).
pub trait CompletionBackend: Send + Sync {
    /// Produce the next assistant turn for the conversation. `seed` selects
    /// among samples for stochastic backends and must fully determine the
    /// output of deterministic ones.
    fn complete(&self, conversation: &[ChatMessage], seed: u64)
        -> Result<AssistantTurn, BackendError>;
}

impl<T: CompletionBackend + ?Sized> CompletionBackend for std::sync::Arc<T> {
    fn complete(
        &self,
        conversation: &[ChatMessage],
        seed: u64,
    ) -> Result<AssistantTurn, BackendError> {
        (**self).complete(conversation, seed)
    }
}

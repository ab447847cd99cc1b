//! Scripted backends for oracle tests.
//!
//! Where the mock world's rule engine is too coupled to the thing under
//! test, these let a test pin agent behavior outcome-by-outcome.

use std::sync::Mutex;

use super::backend::{
    AgentAction, AssistantTurn, BackendError, ChatMessage, ChatRole, CompletionBackend,
};
use super::prompts::sentinel;
use crate::model::ToolName;

/// What a scripted solver does with one (question, seed) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptedOutcome {
    /// Answer with this text (callers decide whether it matches the truth).
    Answer(String),
    /// Emit a reply without the required sections, forcing the no-answer
    /// path.
    NoAnswer,
}

type ScriptFn = dyn Fn(&str, u64) -> ScriptedOutcome + Send + Sync;

/// Solver whose outcome is a pure function of (question, seed). Performs one
/// search call before answering so transcripts look like real attempts.
pub struct ScriptedSolver {
    script: Box<ScriptFn>,
}

impl ScriptedSolver {
    pub fn new(script: impl Fn(&str, u64) -> ScriptedOutcome + Send + Sync + 'static) -> Self {
        ScriptedSolver {
            script: Box::new(script),
        }
    }

    /// Always answers with exactly this text.
    pub fn always(answer: &str) -> Self {
        let answer = answer.to_string();
        ScriptedSolver::new(move |_, _| ScriptedOutcome::Answer(answer.clone()))
    }
}

impl CompletionBackend for ScriptedSolver {
    fn complete(
        &self,
        conversation: &[ChatMessage],
        seed: u64,
    ) -> Result<AssistantTurn, BackendError> {
        let system = conversation
            .iter()
            .find(|m| m.role == ChatRole::System)
            .map(|m| m.content.as_str())
            .unwrap_or("");
        if !system.starts_with(sentinel::SOLVER) {
            return Err(BackendError::Malformed(
                "scripted solver only plays the solver role".into(),
            ));
        }
        let question = conversation
            .iter()
            .find(|m| m.role == ChatRole::User)
            .map(|m| m.content.clone())
            .unwrap_or_default();
        let assistant_turns = conversation
            .iter()
            .filter(|m| m.role == ChatRole::Assistant)
            .count();
        if assistant_turns == 0 {
            return Ok(AssistantTurn::call(
                ToolName::Search,
                question.chars().take(64).collect::<String>(),
            ));
        }
        Ok(match (self.script)(&question, seed) {
            ScriptedOutcome::Answer(answer) => AssistantTurn::finish(format!(
                "Answer: {answer}\n\nReasoning: scripted attempt over the available sources."
            )),
            ScriptedOutcome::NoAnswer => {
                AssistantTurn::finish("I was unable to reach a conclusion either way.")
            }
        })
    }
}

/// Judge that replays a fixed vote sequence, cycling when exhausted.
pub struct ScriptedJudge {
    votes: Vec<bool>,
    cursor: Mutex<usize>,
}

impl ScriptedJudge {
    pub fn new(votes: Vec<bool>) -> Self {
        ScriptedJudge {
            votes,
            cursor: Mutex::new(0),
        }
    }
}

impl CompletionBackend for ScriptedJudge {
    fn complete(
        &self,
        _conversation: &[ChatMessage],
        _seed: u64,
    ) -> Result<AssistantTurn, BackendError> {
        let mut cursor = self.cursor.lock().unwrap();
        let vote = self.votes[*cursor % self.votes.len()];
        *cursor += 1;
        Ok(AssistantTurn {
            think: None,
            action: AgentAction::Finish(if vote { "yes".into() } else { "no".into() }),
        })
    }
}

/// Backend that always fails, for unreachable-endpoint paths.
pub struct UnreachableBackend;

impl CompletionBackend for UnreachableBackend {
    fn complete(
        &self,
        _conversation: &[ChatMessage],
        _seed: u64,
    ) -> Result<AssistantTurn, BackendError> {
        Err(BackendError::Unreachable("scripted outage".into()))
    }
}

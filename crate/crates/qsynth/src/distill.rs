//! Rejection-sampling distillation and SFT export.
//!
//! Roll the solver out over a filtered QA pair several times, retain only
//! trajectories whose final answers are judged equivalent to the ground
//! truth, and export retained trajectories as tagged SFT message records
//! that parse back into the exact turn sequence.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{solve, Agent};
use crate::clock::Clock;
use crate::equivalence::AnswerEquivalence;
use crate::model::{InvariantError, QaPair, ToolCall, ToolName, Transcript, Turn};
use crate::seeding::derive_seed;
use crate::tools::ToolSuite;

/// All rollouts for one QA pair with the retained subset.
#[derive(Debug, Clone)]
pub struct RolloutBatch {
    pub qa_id: String,
    pub transcripts: Vec<Transcript>,
    pub retained: Vec<usize>,
}

impl RolloutBatch {
    pub fn retained_transcripts(&self) -> impl Iterator<Item = &Transcript> {
        self.retained.iter().map(|&i| &self.transcripts[i])
    }
}

/// Persisted form of one rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutRecord {
    pub qa_id: String,
    pub rollout_index: u32,
    pub retained: bool,
    pub transcript: Transcript,
}

/// Per-run distillation statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillManifest {
    pub attempted: u64,
    pub rollouts: u64,
    pub retained: u64,
    pub exported: u64,
    pub retention_rate: f64,
}

#[derive(Debug, Error)]
pub enum DistillError {
    #[error("n_rollouts must be >= 1")]
    InvalidRolloutCount,
    #[error(transparent)]
    Gateway(#[from] crate::agent::GatewayError),
}

/// Roll the solver `n_rollouts` times with independent per-rollout seeds;
/// retain trajectories whose final answers match the ground truth. Agent
/// failures become non-retained rollouts, never errors.
pub fn rejection_sample(
    qa: &QaPair,
    solver: &Agent,
    tools: &dyn ToolSuite,
    clock: &dyn Clock,
    equivalence: &dyn AnswerEquivalence,
    n_rollouts: u32,
    seed: u64,
) -> Result<RolloutBatch, DistillError> {
    if n_rollouts == 0 {
        return Err(DistillError::InvalidRolloutCount);
    }
    let mut transcripts = Vec::with_capacity(n_rollouts as usize);
    let mut retained = Vec::new();
    for i in 0..n_rollouts {
        let rollout_seed = rollout_seed(seed, &qa.id, i);
        match solve(solver, &qa.question, tools, clock, rollout_seed) {
            Ok(outcome) => {
                let keep = outcome
                    .answer
                    .as_ref()
                    .map(|a| equivalence.equivalent(&qa.question, &qa.answer, &a.answer))
                    .unwrap_or(false);
                if keep {
                    retained.push(transcripts.len());
                }
                transcripts.push(outcome.transcript);
            }
            Err(e) => {
                // A failed rollout still occupies its slot.
                transcripts.push(
                    Transcript::from_turns(vec![Turn::System {
                        text: format!("rollout failed: {e}"),
                    }])
                    .expect("single system turn is well-formed"),
                );
            }
        }
    }
    Ok(RolloutBatch {
        qa_id: qa.id.clone(),
        transcripts,
        retained,
    })
}

/// The per-rollout seed derivation, exposed so oracle tests can enumerate
/// scripted outcomes ahead of time.
pub fn rollout_seed(seed: u64, qa_id: &str, rollout_index: u32) -> u64 {
    derive_seed(seed, &[qa_id, "rollout", &rollout_index.to_string()])
}

// ---------------------------------------------------------------------------
// SFT export

/// Tag names are model-specific; this profile selects them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagConvention {
    pub think_tag: String,
    pub tool_tag: String,
}

impl Default for TagConvention {
    fn default() -> Self {
        TagConvention {
            think_tag: "think".into(),
            tool_tag: "tool_call".into(),
        }
    }
}

/// Which retained trajectories to export.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExportPolicy {
    /// One record per QA: the shortest retained trajectory, ties by first.
    #[default]
    ShortestPerQa,
    /// One record per retained trajectory.
    All,
}

/// One SFT chat message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftMessage {
    pub role: String,
    pub content: String,
}

/// One exported training record: tagged messages plus the declared tool
/// signatures and the final answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftRecord {
    pub qa_id: String,
    pub convention: TagConvention,
    pub messages: Vec<SftMessage>,
    pub tools_schema: serde_json::Value,
    pub answer: String,
}

/// The wire form of a tool invocation inside a tool-call span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct SftToolCall {
    tool: ToolName,
    args: String,
    #[serde(default)]
    is_error: bool,
}

impl SftRecord {
    /// Balanced tag pairs and parseable tool-call spans.
    pub fn validate(&self) -> Result<(), InvariantError> {
        let fail = |message: String| InvariantError {
            type_name: "SftRecord",
            message,
        };
        for m in &self.messages {
            for tag in [&self.convention.think_tag, &self.convention.tool_tag] {
                let opens = m.content.matches(&format!("<{tag}>")).count();
                let closes = m.content.matches(&format!("</{tag}>")).count();
                if opens != closes {
                    return Err(fail(format!("unbalanced <{tag}> tags")));
                }
            }
            let open = format!("<{}>", self.convention.tool_tag);
            let close = format!("</{}>", self.convention.tool_tag);
            let mut rest = m.content.as_str();
            while let Some(at) = rest.find(&open) {
                let after = &rest[at + open.len()..];
                let Some(end) = after.find(&close) else {
                    return Err(fail("dangling tool-call span".into()));
                };
                serde_json::from_str::<SftToolCall>(&after[..end])
                    .map_err(|e| fail(format!("tool-call span does not parse: {e}")))?;
                rest = &after[end + close.len()..];
            }
        }
        Ok(())
    }
}

/// Tool signature declaration embedded in every SFT record.
pub fn declared_tools_schema() -> serde_json::Value {
    serde_json::json!([
        {"name": "search", "description": "Search the web and return ranked results.",
         "parameters": {"query": "string"}},
        {"name": "browse", "description": "Fetch a web page and return its text.",
         "parameters": {"url": "string"}},
        {"name": "python", "description": "Run python code in a sandbox and return its output.",
         "parameters": {"code": "string"}}
    ])
}

/// A skipped transcript with the reason (malformed for export).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportSkip {
    pub qa_id: String,
    pub reason: String,
}

/// Render retained trajectories as SFT records. Malformed transcripts are
/// skipped with a reason rather than failing the batch.
pub fn export_sft(
    batches: &[(QaPair, RolloutBatch)],
    convention: &TagConvention,
    policy: ExportPolicy,
) -> (Vec<SftRecord>, Vec<ExportSkip>) {
    let mut records = Vec::new();
    let mut skips = Vec::new();
    for (qa, batch) in batches {
        let mut chosen: Vec<&Transcript> = batch.retained_transcripts().collect();
        if let ExportPolicy::ShortestPerQa = policy {
            chosen = chosen
                .into_iter()
                .min_by_key(|t| t.turns.len())
                .into_iter()
                .collect();
        }
        for transcript in chosen {
            match render_sft(qa, transcript, convention) {
                Ok(record) => records.push(record),
                Err(reason) => skips.push(ExportSkip {
                    qa_id: qa.id.clone(),
                    reason,
                }),
            }
        }
    }
    (records, skips)
}

fn render_sft(
    qa: &QaPair,
    transcript: &Transcript,
    convention: &TagConvention,
) -> Result<SftRecord, String> {
    transcript.validate().map_err(|e| e.to_string())?;
    let think_open = format!("<{}>", convention.think_tag);
    let think_close = format!("</{}>", convention.think_tag);
    let tool_open = format!("<{}>", convention.tool_tag);
    let tool_close = format!("</{}>", convention.tool_tag);

    let mut messages = Vec::new();
    let mut pending_think: Option<&str> = None;
    let mut answer = String::new();
    for turn in &transcript.turns {
        match turn {
            Turn::System { text } => {
                if text.contains(&think_close) || text.contains(&tool_close) {
                    return Err("system text collides with tag convention".into());
                }
                messages.push(SftMessage {
                    role: "system".into(),
                    content: text.clone(),
                });
            }
            Turn::Think { text } => {
                if text.contains(&think_close) {
                    return Err("think span collides with its own close tag".into());
                }
                pending_think = Some(text);
            }
            Turn::ToolCall { call } => {
                let body = serde_json::to_string(&SftToolCall {
                    tool: call.tool,
                    args: call.args.clone(),
                    is_error: call.is_error,
                })
                .map_err(|e| e.to_string())?;
                let mut content = String::new();
                if let Some(think) = pending_think.take() {
                    content.push_str(&format!("{think_open}{think}{think_close}\n"));
                }
                content.push_str(&format!("{tool_open}{body}{tool_close}"));
                messages.push(SftMessage {
                    role: "assistant".into(),
                    content,
                });
            }
            Turn::ToolResult { text } => {
                if text.contains(&think_close) || text.contains(&tool_close) {
                    return Err("tool result collides with tag convention".into());
                }
                messages.push(SftMessage {
                    role: "tool".into(),
                    content: text.clone(),
                });
            }
            Turn::FinalAnswer { text } => {
                if text.contains(&think_close) || text.contains(&tool_close) {
                    return Err("final answer collides with tag convention".into());
                }
                let mut content = String::new();
                if let Some(think) = pending_think.take() {
                    content.push_str(&format!("{think_open}{think}{think_close}\n"));
                }
                content.push_str(text);
                answer = text.clone();
                messages.push(SftMessage {
                    role: "assistant".into(),
                    content,
                });
            }
        }
    }
    if let Some(think) = pending_think {
        messages.push(SftMessage {
            role: "assistant".into(),
            content: format!("{think_open}{think}{think_close}"),
        });
    }
    let record = SftRecord {
        qa_id: qa.id.clone(),
        convention: convention.clone(),
        messages,
        tools_schema: declared_tools_schema(),
        answer,
    };
    record.validate().map_err(|e| e.to_string())?;
    Ok(record)
}

/// Reconstruct the exact turn sequence from an exported record.
pub fn parse_sft_record(record: &SftRecord) -> Result<Vec<Turn>, String> {
    record.validate().map_err(|e| e.to_string())?;
    let think_open = format!("<{}>", record.convention.think_tag);
    let think_close = format!("</{}>", record.convention.think_tag);
    let tool_open = format!("<{}>", record.convention.tool_tag);
    let tool_close = format!("</{}>", record.convention.tool_tag);

    let mut turns: Vec<Turn> = Vec::new();
    let mut pending_call: Option<(ToolName, String, bool)> = None;
    for m in &record.messages {
        match m.role.as_str() {
            "system" => turns.push(Turn::System {
                text: m.content.clone(),
            }),
            "tool" => {
                let (tool, args, is_error) =
                    pending_call.take().ok_or("tool message without a call")?;
                turns.push(Turn::ToolCall {
                    call: ToolCall {
                        tool,
                        args,
                        result: m.content.clone(),
                        is_error,
                    },
                });
                turns.push(Turn::ToolResult {
                    text: m.content.clone(),
                });
            }
            "assistant" => {
                if pending_call.is_some() {
                    return Err("two calls without an interleaved result".into());
                }
                let mut rest = m.content.as_str();
                if let Some(r) = rest.strip_prefix(think_open.as_str()) {
                    let end = r.find(&think_close).ok_or("unterminated think span")?;
                    turns.push(Turn::Think {
                        text: r[..end].to_string(),
                    });
                    rest = r[end + think_close.len()..].trim_start_matches('\n');
                }
                if let Some(r) = rest.strip_prefix(tool_open.as_str()) {
                    let end = r.find(&tool_close).ok_or("unterminated tool span")?;
                    let call: SftToolCall =
                        serde_json::from_str(&r[..end]).map_err(|e| e.to_string())?;
                    pending_call = Some((call.tool, call.args, call.is_error));
                } else if !rest.is_empty() {
                    turns.push(Turn::FinalAnswer {
                        text: rest.to_string(),
                    });
                }
            }
            other => return Err(format!("unknown role `{other}`")),
        }
    }
    if pending_call.is_some() {
        return Err("trailing call without a result".into());
    }
    Ok(turns)
}


#[cfg(test)]
mod sampling_tests {
    use super::*;
    use crate::agent::scripted::{ScriptedOutcome, ScriptedSolver};
    use crate::agent::{Agent, AgentRole};
    use crate::clock::FixedClock;
    use crate::equivalence::RuleEquivalence;
    use crate::model::{SeedId, SynthMethod};
    use crate::tools::mock::{MockTools, MockWorld, WorldSpec};
    use crate::tools::{Blocklist, ToolCache, ToolStack};
    use std::sync::Arc;

    fn fixture_qa(tag: &str) -> QaPair {
        QaPair {
            id: format!("qa-td-{tag}"),
            seed_id: SeedId(tag.into()),
            question: format!("Which entity is referenced by {tag}?"),
            answer: "Fel Archive".into(),
            supporting_fact_ids: vec![],
            citations: vec![],
            method: SynthMethod::Topdown,
            iterations: 1,
            solver_attempts: vec![],
            explanation: String::new(),
        }
    }

    fn tools() -> ToolStack<MockTools> {
        let world = Arc::new(MockWorld::generate(&WorldSpec {
            seed: 81,
            roots: 1,
            depth: 1,
            fanout: 1,
            ..WorldSpec::default()
        }));
        ToolStack::new(
            MockTools::new(world),
            Blocklist::default_hosts(),
            ToolCache::in_memory(),
        )
    }

    #[test]
    fn always_correct_retains_everything() {
        let qa = fixture_qa("s1");
        let solver = Agent::new(Arc::new(ScriptedSolver::always("Fel Archive")), AgentRole::solver());
        let batch =
            rejection_sample(&qa, &solver, &tools(), &FixedClock, &RuleEquivalence, 4, 1).unwrap();
        assert_eq!(batch.retained, vec![0, 1, 2, 3]);
        for t in &batch.transcripts {
            t.validate().unwrap();
        }
    }

    #[test]
    fn always_wrong_retains_nothing() {
        let qa = fixture_qa("s2");
        let solver = Agent::new(Arc::new(ScriptedSolver::always("Tor Harbor")), AgentRole::solver());
        let batch =
            rejection_sample(&qa, &solver, &tools(), &FixedClock, &RuleEquivalence, 4, 1).unwrap();
        assert!(batch.retained.is_empty());
        assert_eq!(batch.transcripts.len(), 4);
    }

    #[test]
    fn retained_set_matches_the_per_seed_oracle() {
        // The script decides success from the rollout seed alone, so the
        // retained set is enumerable ahead of time.
        let rule = |seed: u64| seed % 8 < 3;
        let solver = Agent::new(
            Arc::new(ScriptedSolver::new(move |_q, seed| {
                if rule(seed) {
                    ScriptedOutcome::Answer("Fel Archive".into())
                } else {
                    ScriptedOutcome::Answer("Wrong Turn".into())
                }
            })),
            AgentRole::solver(),
        );
        let qa = fixture_qa("s3");
        let base_seed = 99;
        let expected: Vec<usize> = (0..8)
            .filter(|&i| rule(rollout_seed(base_seed, &qa.id, i as u32)))
            .collect();
        let batch = rejection_sample(
            &qa,
            &solver,
            &tools(),
            &FixedClock,
            &RuleEquivalence,
            8,
            base_seed,
        )
        .unwrap();
        assert_eq!(batch.retained, expected);
        assert!(!expected.is_empty() && expected.len() < 8, "oracle mixes outcomes");
    }

    #[test]
    fn refusals_and_failures_are_dropped() {
        let solver = Agent::new(
            Arc::new(ScriptedSolver::new(|_q, seed| {
                if seed % 2 == 0 {
                    ScriptedOutcome::NoAnswer
                } else {
                    ScriptedOutcome::Answer("Fel Archive".into())
                }
            })),
            AgentRole::solver(),
        );
        let qa = fixture_qa("s4");
        let batch =
            rejection_sample(&qa, &solver, &tools(), &FixedClock, &RuleEquivalence, 6, 5).unwrap();
        // Retention soundness: every retained answer is equivalent, every
        // dropped one with an answer is not.
        for (i, t) in batch.transcripts.iter().enumerate() {
            let answer = t
                .final_answer()
                .and_then(crate::agent::parse::answer_reasoning);
            match answer {
                Some((a, _)) => assert_eq!(
                    batch.retained.contains(&i),
                    RuleEquivalence.equivalent(&qa.question, &qa.answer, &a)
                ),
                None => assert!(!batch.retained.contains(&i)),
            }
        }
    }

    #[test]
    fn zero_rollouts_is_an_error() {
        let qa = fixture_qa("s5");
        let solver = Agent::new(Arc::new(ScriptedSolver::always("x")), AgentRole::solver());
        assert!(matches!(
            rejection_sample(&qa, &solver, &tools(), &FixedClock, &RuleEquivalence, 0, 1),
            Err(DistillError::InvalidRolloutCount)
        ));
    }
    #[test]
    fn export_round_trip_property() {
        use proptest::prelude::*;
        let arb_turns = (
            "[a-z ]{1,24}",
            proptest::collection::vec(
                (
                    prop_oneof![
                        Just(ToolName::Search),
                        Just(ToolName::Browse),
                        Just(ToolName::Python)
                    ],
                    "[a-z0-9 ]{0,16}",
                    "[a-z0-9 ]{0,16}",
                    any::<bool>(),
                    proptest::option::of("[a-z ]{1,12}"),
                ),
                0..5,
            ),
            proptest::option::of("[a-z ]{1,16}"),
            proptest::option::of("[a-z ]{1,16}"),
        );
        proptest!(|((system, blocks, final_think, final_answer) in arb_turns)| {
            let mut turns = vec![Turn::System { text: system }];
            for (tool, args, result, is_error, think) in blocks {
                if let Some(t) = think {
                    turns.push(Turn::Think { text: t });
                }
                turns.push(Turn::ToolCall {
                    call: ToolCall { tool, args, result: result.clone(), is_error },
                });
                turns.push(Turn::ToolResult { text: result });
            }
            if let Some(t) = final_think {
                turns.push(Turn::Think { text: t });
            }
            if let Some(answer) = final_answer {
                turns.push(Turn::FinalAnswer { text: answer });
            }
            let transcript = Transcript::from_turns(turns).unwrap();
            let qa = fixture_qa("prop");
            let batch = RolloutBatch {
                qa_id: qa.id.clone(),
                transcripts: vec![transcript.clone()],
                retained: vec![0],
            };
            let (records, skips) =
                export_sft(&[(qa, batch)], &TagConvention::default(), ExportPolicy::All);
            prop_assert!(skips.is_empty());
            let turns = parse_sft_record(&records[0]).unwrap();
            prop_assert_eq!(turns, transcript.turns);
        });
    }
}

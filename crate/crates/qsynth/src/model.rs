//! Core domain types shared by every pipeline stage.
//!
//! All types are immutable after construction and safe to share across
//! concurrent workers. Identity rules: entities are identified by their
//! normalized name within a run; facts and seeds mint content-derived ids.

use std::collections::BTreeSet;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeding::short_hex;

/// Violation of a domain-type invariant.
#[derive(Debug, Error)]
#[error("{type_name}: {message}")]
pub struct InvariantError {
    pub type_name: &'static str,
    pub message: String,
}

fn invariant(type_name: &'static str, message: impl Into<String>) -> InvariantError {
    InvariantError {
        type_name,
        message: message.into(),
    }
}

/// Case-fold and collapse whitespace. This is the entity identity function:
/// two names that normalize equal denote the same entity within a run.
pub fn normalize_name(name: &str) -> String {
    name.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Opaque entity identifier (the normalized name).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub String);

impl EntityId {
    pub fn from_name(name: &str) -> Self {
        EntityId(normalize_name(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A named thing a fact can be about: person, place, organization, work,
/// number, date: any nonempty text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub name: String,
    #[serde(default)]
    pub domain_tags: BTreeSet<String>,
}

impl Entity {
    pub fn new(name: &str) -> Self {
        Entity {
            id: EntityId::from_name(name),
            name: name.trim().to_string(),
            domain_tags: BTreeSet::new(),
        }
    }

    pub fn with_tag(name: &str, tag: &str) -> Self {
        let mut e = Entity::new(name);
        e.domain_tags.insert(tag.to_string());
        e
    }

    pub fn validate(&self) -> Result<(), InvariantError> {
        if self.name.trim().is_empty() {
            return Err(invariant("Entity", "name must be nonempty"));
        }
        if self.id != EntityId::from_name(&self.name) {
            return Err(invariant(
                "Entity",
                format!("id `{}` is not the normalized name", self.id),
            ));
        }
        Ok(())
    }
}

/// URL source backing a fact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Citation {
    pub url: String,
    #[serde(default)]
    pub snippet: String,
    pub retrieved_at: DateTime<Utc>,
}

impl Citation {
    pub fn validate(&self) -> Result<(), InvariantError> {
        if self.url.trim().is_empty() {
            return Err(invariant("Citation", "url must be nonempty"));
        }
        if url::Url::parse(&self.url).is_err() {
            return Err(invariant(
                "Citation",
                format!("url `{}` is not a valid URL", self.url),
            ));
        }
        if self
            .url
            .ends_with(|c: char| matches!(c, '.' | ',' | ';' | ':' | '!' | '?'))
        {
            return Err(invariant(
                "Citation",
                format!("url `{}` has trailing punctuation", self.url),
            ));
        }
        Ok(())
    }
}

/// Stable fact identifier derived from statement content.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FactId(pub String);

impl FactId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FactId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A relational statement linking entities, one of which is novel relative
/// to the context the fact was researched in. The atom of the fact tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fact {
    pub id: FactId,
    pub statement: String,
    /// Entities the statement is about, connector first.
    pub subject_entities: Vec<EntityId>,
    /// The entity this fact introduces.
    pub novel_entity: EntityId,
    #[serde(default)]
    pub citations: Vec<Citation>,
}

impl Fact {
    /// Mint the content-derived fact id.
    pub fn make_id(statement: &str, novel: &EntityId) -> FactId {
        FactId(format!(
            "f{}",
            short_hex(format!("{statement}\u{1f}{novel}").as_bytes())
        ))
    }

    pub fn validate(&self) -> Result<(), InvariantError> {
        if self.statement.trim().is_empty() {
            return Err(invariant("Fact", "statement must be nonempty"));
        }
        if !self.subject_entities.contains(&self.novel_entity) {
            return Err(invariant(
                "Fact",
                format!(
                    "novel entity `{}` missing from subject entities",
                    self.novel_entity
                ),
            ));
        }
        for c in &self.citations {
            c.validate()?;
        }
        Ok(())
    }

    /// Validate as a researched fact, which must carry at least one source.
    pub fn validate_researched(&self) -> Result<(), InvariantError> {
        self.validate()?;
        if self.citations.is_empty() {
            return Err(invariant("Fact", "researched fact carries no citation"));
        }
        Ok(())
    }
}

/// Stable seed identifier derived from normalized text.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SeedId(pub String);

impl fmt::Display for SeedId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// An ingested seed question/statement that drives synthesis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seed {
    pub id: SeedId,
    pub text: String,
    #[serde(default)]
    pub domain: String,
    #[serde(default)]
    pub source: String,
}

impl Seed {
    pub fn new(text: &str, source: &str) -> Self {
        Seed {
            id: SeedId(format!("s{}", short_hex(normalize_name(text).as_bytes()))),
            text: text.trim().to_string(),
            domain: String::new(),
            source: source.to_string(),
        }
    }

    pub fn validate(&self) -> Result<(), InvariantError> {
        if self.text.trim().is_empty() {
            return Err(invariant("Seed", "text must be nonempty"));
        }
        Ok(())
    }
}

/// Which synthesis prong produced a QA pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthMethod {
    Topdown,
    Bottomup,
}

/// One solver attempt recorded in a QA pair's lineage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverAttempt {
    pub answer: String,
    pub equivalent: bool,
}

/// A synthesized question with its short-form ground truth and lineage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPair {
    pub id: String,
    pub seed_id: SeedId,
    pub question: String,
    pub answer: String,
    #[serde(default)]
    pub supporting_fact_ids: Vec<FactId>,
    #[serde(default)]
    pub citations: Vec<Citation>,
    pub method: SynthMethod,
    pub iterations: u32,
    #[serde(default)]
    pub solver_attempts: Vec<SolverAttempt>,
    #[serde(default)]
    pub explanation: String,
}

impl QaPair {
    pub fn make_id(seed_id: &SeedId, method: SynthMethod) -> String {
        let tag = match method {
            SynthMethod::Topdown => "td",
            SynthMethod::Bottomup => "bu",
        };
        format!("qa-{tag}-{seed_id}")
    }

    pub fn validate(&self) -> Result<(), InvariantError> {
        if !self.question.trim().ends_with('?') {
            return Err(invariant("QaPair", "question must end in interrogative form"));
        }
        let answer = self.answer.trim();
        if answer.is_empty() {
            return Err(invariant("QaPair", "answer must be nonempty"));
        }
        if answer.ends_with(['.', '!', '?']) {
            return Err(invariant(
                "QaPair",
                "answer must not carry sentence-ending punctuation",
            ));
        }
        if self.iterations < 1 {
            return Err(invariant("QaPair", "iterations must be >= 1"));
        }
        for c in &self.citations {
            c.validate()?;
        }
        Ok(())
    }
}

/// The three tools available to the baseline web agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolName {
    Search,
    Browse,
    Python,
}

impl ToolName {
    pub const ALL: [ToolName; 3] = [ToolName::Search, ToolName::Browse, ToolName::Python];

    pub fn as_str(&self) -> &'static str {
        match self {
            ToolName::Search => "search",
            ToolName::Browse => "browse",
            ToolName::Python => "python",
        }
    }
}

impl std::str::FromStr for ToolName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "search" => Ok(ToolName::Search),
            "browse" => Ok(ToolName::Browse),
            "python" => Ok(ToolName::Python),
            other => Err(format!("unknown tool `{other}`")),
        }
    }
}

impl fmt::Display for ToolName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One executed tool invocation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolCall {
    pub tool: ToolName,
    pub args: String,
    pub result: String,
    #[serde(default)]
    pub is_error: bool,
}

/// One turn of a multi-turn agent transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "turn", rename_all = "snake_case")]
pub enum Turn {
    System { text: String },
    Think { text: String },
    ToolCall { call: ToolCall },
    ToolResult { text: String },
    FinalAnswer { text: String },
}

/// Per-tool invocation totals for a transcript.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolCounts {
    #[serde(default)]
    pub search: u32,
    #[serde(default)]
    pub browse: u32,
    #[serde(default)]
    pub python: u32,
}

impl ToolCounts {
    pub fn total(&self) -> u32 {
        self.search + self.browse + self.python
    }

    pub fn get(&self, tool: ToolName) -> u32 {
        match tool {
            ToolName::Search => self.search,
            ToolName::Browse => self.browse,
            ToolName::Python => self.python,
        }
    }

    fn bump(&mut self, tool: ToolName) {
        match tool {
            ToolName::Search => self.search += 1,
            ToolName::Browse => self.browse += 1,
            ToolName::Python => self.python += 1,
        }
    }
}

/// Ordered multi-turn agent record: thinking, tool calls, tool results and
/// at most one trailing final answer, plus per-tool counters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub turns: Vec<Turn>,
    pub counts: ToolCounts,
}

impl Transcript {
    /// Build from turns, computing counts; fails if the turn sequence is
    /// malformed.
    pub fn from_turns(turns: Vec<Turn>) -> Result<Self, InvariantError> {
        let counts = recount(&turns)?;
        Ok(Transcript { turns, counts })
    }

    /// Single linear scan checking well-formedness and that stored counts
    /// match a recount.
    pub fn validate(&self) -> Result<(), InvariantError> {
        let counts = recount(&self.turns)?;
        if counts != self.counts {
            return Err(invariant(
                "Transcript",
                format!(
                    "stored counts {:?} disagree with recount {:?}",
                    self.counts, counts
                ),
            ));
        }
        Ok(())
    }

    pub fn final_answer(&self) -> Option<&str> {
        match self.turns.last() {
            Some(Turn::FinalAnswer { text }) => Some(text),
            _ => None,
        }
    }

    /// Concatenated tool result texts, in order.
    pub fn tool_outputs(&self) -> Vec<&str> {
        self.turns
            .iter()
            .filter_map(|t| match t {
                Turn::ToolResult { text } => Some(text.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn tool_calls(&self) -> impl Iterator<Item = &ToolCall> {
        self.turns.iter().filter_map(|t| match t {
            Turn::ToolCall { call } => Some(call),
            _ => None,
        })
    }
}

fn recount(turns: &[Turn]) -> Result<ToolCounts, InvariantError> {
    let mut counts = ToolCounts::default();
    let mut pending_call = false;
    for (i, turn) in turns.iter().enumerate() {
        match turn {
            Turn::ToolCall { call } => {
                if pending_call {
                    return Err(invariant(
                        "Transcript",
                        format!("tool_call at turn {i} while a result is pending"),
                    ));
                }
                counts.bump(call.tool);
                pending_call = true;
            }
            Turn::ToolResult { .. } => {
                if !pending_call {
                    return Err(invariant(
                        "Transcript",
                        format!("tool_result at turn {i} without a preceding tool_call"),
                    ));
                }
                pending_call = false;
            }
            Turn::FinalAnswer { .. } => {
                if pending_call {
                    return Err(invariant(
                        "Transcript",
                        format!("final_answer at turn {i} while a result is pending"),
                    ));
                }
                if i + 1 != turns.len() {
                    return Err(invariant(
                        "Transcript",
                        format!("final_answer at turn {i} is not the last turn"),
                    ));
                }
            }
            Turn::System { .. } | Turn::Think { .. } => {
                if pending_call {
                    return Err(invariant(
                        "Transcript",
                        format!("turn {i} interposed between tool_call and tool_result"),
                    ));
                }
            }
        }
    }
    if pending_call {
        return Err(invariant("Transcript", "trailing tool_call without result"));
    }
    Ok(counts)
}

/// Boolean judgment with its vote tally.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub accepted: bool,
    pub votes_for: u32,
    pub votes_total: u32,
    #[serde(default)]
    pub rationale: String,
}

impl Verdict {
    /// Construct from a tally; `accepted` follows the majority rule.
    pub fn from_votes(votes_for: u32, votes_total: u32, rationale: String) -> Self {
        Verdict {
            accepted: 2 * votes_for > votes_total,
            votes_for,
            votes_total,
            rationale,
        }
    }

    pub fn validate(&self) -> Result<(), InvariantError> {
        if self.votes_for > self.votes_total {
            return Err(invariant("Verdict", "votes_for exceeds votes_total"));
        }
        if self.accepted != (2 * self.votes_for > self.votes_total) {
            return Err(invariant("Verdict", "accepted flag violates majority rule"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::fixed_epoch;

    fn citation(url: &str) -> Citation {
        Citation {
            url: url.to_string(),
            snippet: String::new(),
            retrieved_at: fixed_epoch(),
        }
    }

    #[test]
    fn entity_identity_is_normalized_name() {
        assert_eq!(
            EntityId::from_name("  Palo   Alto "),
            EntityId::from_name("palo alto")
        );
        assert!(Entity::new("Stanford").validate().is_ok());
        assert!(Entity::new("  ").validate().is_err());
    }

    #[test]
    fn citation_rejects_junk() {
        assert!(citation("https://example.org/a").validate().is_ok());
        assert!(citation("").validate().is_err());
        assert!(citation("notaurl").validate().is_err());
        assert!(citation("https://example.org/a.").validate().is_err());
    }

    #[test]
    fn fact_requires_novel_among_subjects() {
        let f = Fact {
            id: Fact::make_id("Stanford is in Palo Alto", &EntityId::from_name("Palo Alto")),
            statement: "Stanford is in Palo Alto".into(),
            subject_entities: vec![EntityId::from_name("Stanford")],
            novel_entity: EntityId::from_name("Palo Alto"),
            citations: vec![citation("https://example.org/p")],
        };
        assert!(f.validate().is_err());
        let mut ok = f.clone();
        ok.subject_entities.push(EntityId::from_name("Palo Alto"));
        assert!(ok.validate().is_ok());
        assert!(ok.validate_researched().is_ok());
        ok.citations.clear();
        assert!(ok.validate_researched().is_err());
    }

    #[test]
    fn qa_pair_form_rules() {
        let mut qa = QaPair {
            id: "qa-td-s1".into(),
            seed_id: SeedId("s1".into()),
            question: "Which company makes the foam?".into(),
            answer: "Zotefoams".into(),
            supporting_fact_ids: vec![],
            citations: vec![],
            method: SynthMethod::Topdown,
            iterations: 1,
            solver_attempts: vec![],
            explanation: String::new(),
        };
        assert!(qa.validate().is_ok());
        qa.answer = "Zotefoams.".into();
        assert!(qa.validate().is_err());
        qa.answer = "Zotefoams".into();
        qa.question = "Name the company".into();
        assert!(qa.validate().is_err());
        qa.question = "Which company?".into();
        qa.iterations = 0;
        assert!(qa.validate().is_err());
    }

    #[test]
    fn transcript_wellformedness() {
        let call = ToolCall {
            tool: ToolName::Search,
            args: "stanford".into(),
            result: "r".into(),
            is_error: false,
        };
        let good = Transcript::from_turns(vec![
            Turn::System { text: "s".into() },
            Turn::Think { text: "t".into() },
            Turn::ToolCall { call: call.clone() },
            Turn::ToolResult { text: "r".into() },
            Turn::FinalAnswer { text: "a".into() },
        ])
        .unwrap();
        assert_eq!(good.counts.search, 1);
        assert_eq!(good.final_answer(), Some("a"));
        good.validate().unwrap();

        // call without result
        assert!(Transcript::from_turns(vec![Turn::ToolCall { call: call.clone() }]).is_err());
        // result without call
        assert!(Transcript::from_turns(vec![Turn::ToolResult { text: "r".into() }]).is_err());
        // final answer not last
        assert!(Transcript::from_turns(vec![
            Turn::FinalAnswer { text: "a".into() },
            Turn::Think { text: "t".into() },
        ])
        .is_err());
        // doctored counts
        let mut bad = good.clone();
        bad.counts.browse = 9;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn verdict_majority_rule() {
        assert!(Verdict::from_votes(2, 3, String::new()).accepted);
        assert!(!Verdict::from_votes(0, 3, String::new()).accepted);
        // even split is not a majority
        assert!(!Verdict::from_votes(1, 2, String::new()).accepted);
        let bad = Verdict {
            accepted: true,
            votes_for: 1,
            votes_total: 3,
            rationale: String::new(),
        };
        assert!(bad.validate().is_err());
    }
    #[test]
    fn verdict_majority_rule_property() {
        use proptest::prelude::*;
        proptest!(|(yes in 0u32..50, extra in 0u32..50)| {
            let total = yes + extra;
            let v = Verdict::from_votes(yes, total, String::new());
            prop_assert_eq!(v.accepted, 2 * yes > total);
            prop_assert!(v.validate().is_ok());
        });
    }
}

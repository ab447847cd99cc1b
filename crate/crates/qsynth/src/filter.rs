//! Consolidated post-hoc filter.
//!
//! Three stages in fixed order, each a majority-voted judgment: question
//! standards, factuality verification against the recorded citations, and
//! alternative-answer adjudication against a fresh solver attempt. The
//! first rejection short-circuits (later stages make no tool calls), and
//! every error path rejects, never accepts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::prompts::Rubric;
use crate::agent::{judge, solve, Agent, Agents, GatewayError};
use crate::clock::Clock;
use crate::equivalence::AnswerEquivalence;
use crate::model::{Fact, InvariantError, QaPair, Transcript, Verdict};
use crate::seeding::derive_seed;
use crate::tools::{ToolError, ToolSuite};

/// Which stage a pair stopped at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterStage {
    Standards,
    Factuality,
    Alternative,
    Passed,
}

/// Outcome of filtering one QA pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub qa_id: String,
    pub accepted: bool,
    pub stage: FilterStage,
    pub verdicts: Vec<Verdict>,
}

impl FilterOutcome {
    pub fn validate(&self) -> Result<(), InvariantError> {
        if self.accepted != (self.stage == FilterStage::Passed) {
            return Err(InvariantError {
                type_name: "FilterOutcome",
                message: "accepted flag must mirror stage == passed".into(),
            });
        }
        for v in &self.verdicts {
            v.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("n_votes must be odd and >= 1")]
    InvalidPanel,
    #[error("judge failure: {0}")]
    JudgeFailure(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// A majority-voting judge panel: an odd number of independent judgments
/// under one rubric.
#[derive(Clone)]
pub struct JudgePanel {
    pub n_votes: u32,
    pub rubric: Rubric,
    pub agent: Agent,
}

impl JudgePanel {
    pub fn new(agent: Agent, rubric: Rubric, n_votes: u32) -> Result<Self, FilterError> {
        if n_votes == 0 || n_votes % 2 == 0 {
            return Err(FilterError::InvalidPanel);
        }
        Ok(JudgePanel {
            n_votes,
            rubric,
            agent,
        })
    }
}

/// The three stage panels (usually one validator backend, three rubrics).
#[derive(Clone)]
pub struct FilterPanels {
    pub standards: JudgePanel,
    pub factuality: JudgePanel,
    pub alternative: JudgePanel,
}

impl FilterPanels {
    pub fn new(validator: Agent, n_votes: u32) -> Result<Self, FilterError> {
        Ok(FilterPanels {
            standards: JudgePanel::new(validator.clone(), Rubric::Standards, n_votes)?,
            factuality: JudgePanel::new(validator.clone(), Rubric::Factuality, n_votes)?,
            alternative: JudgePanel::new(validator, Rubric::AlternativeSupport, n_votes)?,
        })
    }
}

/// Collect the panel's independent judgments and apply the majority rule.
/// Unparseable judgments count against acceptance; when they are themselves
/// the majority the whole vote is a judge failure.
pub fn majority_vote(panel: &JudgePanel, payload: &str, seed: u64) -> Result<Verdict, FilterError> {
    if panel.n_votes == 0 || panel.n_votes % 2 == 0 {
        return Err(FilterError::InvalidPanel);
    }
    let mut yes = 0u32;
    let mut failures = 0u32;
    let mut notes = Vec::new();
    for i in 0..panel.n_votes {
        let vote_seed = derive_seed(seed, &["vote", &i.to_string()]);
        match judge(&panel.agent, payload, panel.rubric, vote_seed) {
            Ok((true, rationale)) => {
                yes += 1;
                notes.push(format!("vote {}: yes{}", i + 1, note_suffix(&rationale)));
            }
            Ok((false, rationale)) => {
                notes.push(format!("vote {}: no{}", i + 1, note_suffix(&rationale)));
            }
            Err(GatewayError::UnparseableVerdict(t)) => {
                failures += 1;
                notes.push(format!("vote {}: unparseable ({t})", i + 1));
            }
            Err(e) => return Err(e.into()),
        }
    }
    if failures > panel.n_votes / 2 {
        return Err(FilterError::JudgeFailure(notes.join("; ")));
    }
    Ok(Verdict::from_votes(yes, panel.n_votes, notes.join("; ")))
}

fn note_suffix(rationale: &str) -> String {
    if rationale.trim().is_empty() {
        String::new()
    } else {
        format!(" ({})", rationale.trim().replace('\n', " "))
    }
}

/// Stage 1: question standards. Judge failure rejects.
pub fn check_standards(qa: &QaPair, panel: &JudgePanel, seed: u64) -> Verdict {
    let payload = format!("Question: {}\nAnswer: {}", qa.question, qa.answer);
    match majority_vote(panel, &payload, seed) {
        Ok(v) => v,
        Err(e) => rejection_verdict(panel.n_votes, &format!("standards judge failure: {e}")),
    }
}

fn rejection_verdict(n_votes: u32, rationale: &str) -> Verdict {
    Verdict::from_votes(0, n_votes, rationale.to_string())
}

/// Stage 2: factuality. Re-fetch every citation through the (cached) browse
/// tool and let the panel judge whether the sources fully support the pair.
/// All sources unreachable rejects outright.
pub fn verify_factuality(
    qa: &QaPair,
    facts: &[Fact],
    tools: &dyn ToolSuite,
    panel: &JudgePanel,
    seed: u64,
) -> Verdict {
    let mut payload = format!("Question: {}\nGround truth: {}\n", qa.question, qa.answer);
    let mut any_reachable = false;
    let mut fetch = |url: &str| -> String {
        match tools.browse(url) {
            Ok(page) => {
                any_reachable = true;
                flatten(&page)
            }
            Err(ToolError::NotFound(_)) => format!("[unreachable] {url}"),
            Err(_) => format!("[unreachable] {url}"),
        }
    };

    if facts.is_empty() && qa.citations.is_empty() {
        return rejection_verdict(panel.n_votes, "no citations to verify");
    }
    if facts.is_empty() {
        for c in &qa.citations {
            let excerpt = fetch(&c.url);
            payload.push_str(&format!("\nExcerpt: {excerpt}\n"));
        }
    } else {
        for fact in facts {
            if fact.citations.is_empty() {
                return rejection_verdict(
                    panel.n_votes,
                    &format!("fact {} carries no citation", fact.id),
                );
            }
            payload.push_str(&format!("\nFact: {}\n", fact.statement));
            for c in &fact.citations {
                let excerpt = fetch(&c.url);
                payload.push_str(&format!("Excerpt: {excerpt}\n"));
            }
        }
    }
    if !any_reachable {
        return rejection_verdict(panel.n_votes, "every cited source was unreachable");
    }
    match majority_vote(panel, &payload, seed) {
        Ok(v) => v,
        Err(e) => rejection_verdict(panel.n_votes, &format!("factuality judge failure: {e}")),
    }
}

fn flatten(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Stage 3: alternative answers. A solver answer equivalent to the truth
/// accepts trivially; otherwise the panel decides whether the solver's own
/// tool outputs support its alternative: and support means the question is
/// ambiguous, so the pair is rejected.
pub fn check_alternative_answer(
    qa: &QaPair,
    solver_transcript: &Transcript,
    panel: &JudgePanel,
    equivalence: &dyn AnswerEquivalence,
    seed: u64,
) -> Verdict {
    let Some(final_text) = solver_transcript.final_answer() else {
        return Verdict::from_votes(1, 1, "solver produced no alternative answer".into());
    };
    let alternative = crate::agent::parse::answer_reasoning(final_text)
        .map(|(a, _)| a)
        .unwrap_or_else(|| final_text.to_string());
    if equivalence.equivalent(&qa.question, &qa.answer, &alternative) {
        return Verdict::from_votes(1, 1, "solver agreed with the ground truth".into());
    }
    let outputs = solver_transcript
        .tool_outputs()
        .iter()
        .map(|t| flatten(t))
        .collect::<Vec<_>>()
        .join("\n");
    let payload = format!(
        "Question: {}\nGround truth: {}\nAlternative answer: {}\nTool outputs:\n{}",
        qa.question, qa.answer, alternative, outputs
    );
    match majority_vote(panel, &payload, seed) {
        Ok(support) => {
            // Panel said the outputs back the alternative: ambiguous pair.
            let stage_accepts = !support.accepted;
            let votes_for = support.votes_total - support.votes_for;
            Verdict {
                accepted: stage_accepts,
                votes_for,
                votes_total: support.votes_total,
                rationale: format!(
                    "alternative `{alternative}` {}: {}",
                    if support.accepted {
                        "is supported by the solver's tool outputs"
                    } else {
                        "is not supported by the solver's tool outputs"
                    },
                    support.rationale
                ),
            }
        }
        Err(e) => rejection_verdict(panel.n_votes, &format!("alternative judge failure: {e}")),
    }
}

/// Run the full filter: standards → factuality → alternative, first
/// rejection short-circuits.
#[allow(clippy::too_many_arguments)]
pub fn run_filter(
    qa: &QaPair,
    facts: &[Fact],
    agents: &Agents,
    panels: &FilterPanels,
    tools: &dyn ToolSuite,
    clock: &dyn Clock,
    equivalence: &dyn AnswerEquivalence,
    seed: u64,
) -> Result<FilterOutcome, FilterError> {
    let mut verdicts = Vec::new();

    let standards = check_standards(qa, &panels.standards, derive_seed(seed, &["standards"]));
    let rejected = !standards.accepted;
    verdicts.push(standards);
    if rejected {
        return Ok(FilterOutcome {
            qa_id: qa.id.clone(),
            accepted: false,
            stage: FilterStage::Standards,
            verdicts,
        });
    }

    let factuality = verify_factuality(
        qa,
        facts,
        tools,
        &panels.factuality,
        derive_seed(seed, &["factuality"]),
    );
    let rejected = !factuality.accepted;
    verdicts.push(factuality);
    if rejected {
        return Ok(FilterOutcome {
            qa_id: qa.id.clone(),
            accepted: false,
            stage: FilterStage::Factuality,
            verdicts,
        });
    }

    // Fresh solver attempt for the alternative-answer stage.
    let attempt = solve(
        &agents.solver,
        &qa.question,
        tools,
        clock,
        derive_seed(seed, &["alt-solve", &qa.id]),
    )?;
    let alternative = check_alternative_answer(
        qa,
        &attempt.transcript,
        &panels.alternative,
        equivalence,
        derive_seed(seed, &["alternative"]),
    );
    let rejected = !alternative.accepted;
    verdicts.push(alternative);
    if rejected {
        return Ok(FilterOutcome {
            qa_id: qa.id.clone(),
            accepted: false,
            stage: FilterStage::Alternative,
            verdicts,
        });
    }

    Ok(FilterOutcome {
        qa_id: qa.id.clone(),
        accepted: true,
        stage: FilterStage::Passed,
        verdicts,
    })
}

/// Answer equivalence judged by an LLM panel (live mode); interchangeable
/// with the rule engine behind the same trait. Errors answer "not
/// equivalent".
pub struct PanelEquivalence {
    pub panel: JudgePanel,
    pub seed: u64,
}

impl AnswerEquivalence for PanelEquivalence {
    fn equivalent(&self, question: &str, ground_truth: &str, candidate: &str) -> bool {
        if ground_truth.trim().is_empty() {
            return false;
        }
        let payload = format!(
            "Question: {question}\nGround truth: {ground_truth}\nAgent answer: {candidate}"
        );
        let seed = derive_seed(self.seed, &["equiv", &payload]);
        matches!(
            majority_vote(&self.panel, &payload, seed),
            Ok(Verdict { accepted: true, .. })
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::mock::{Capability, MockBackend};
    use crate::agent::scripted::ScriptedJudge;
    use crate::agent::{Agent, AgentRole, Agents};
    use crate::clock::{fixed_epoch, FixedClock};
    use crate::equivalence::RuleEquivalence;
    use crate::model::{Citation, QaPair, SeedId, SynthMethod, ToolCall, ToolName, Turn};
    use crate::tools::mock::{MockTools, MockWorld, WorldSpec};
    use crate::tools::{Blocklist, RecordingTools, ToolCache, ToolStack};
    use std::sync::Arc;

    fn world() -> Arc<MockWorld> {
        Arc::new(MockWorld::generate(&WorldSpec {
            seed: 51,
            roots: 2,
            depth: 2,
            fanout: 2,
            ..WorldSpec::default()
        }))
    }

    fn validator(world: &Arc<MockWorld>) -> Agent {
        Agent::new(Arc::new(MockBackend::new(world.clone())), AgentRole::validator())
    }

    fn qa(question: &str, answer: &str) -> QaPair {
        QaPair {
            id: "qa-td-s1".into(),
            seed_id: SeedId("s1".into()),
            question: question.into(),
            answer: answer.into(),
            supporting_fact_ids: vec![],
            citations: vec![],
            method: SynthMethod::Topdown,
            iterations: 1,
            solver_attempts: vec![],
            explanation: String::new(),
        }
    }

    #[test]
    fn majority_arithmetic() {
        let two_one = JudgePanel::new(
            Agent::new(Arc::new(ScriptedJudge::new(vec![true, true, false])), AgentRole::validator()),
            Rubric::Standards,
            3,
        )
        .unwrap();
        let verdict = majority_vote(&two_one, "payload", 1).unwrap();
        assert!(verdict.accepted);
        assert_eq!((verdict.votes_for, verdict.votes_total), (2, 3));

        let zero_three = JudgePanel::new(
            Agent::new(Arc::new(ScriptedJudge::new(vec![false])), AgentRole::validator()),
            Rubric::Standards,
            3,
        )
        .unwrap();
        let verdict = majority_vote(&zero_three, "payload", 1).unwrap();
        assert!(!verdict.accepted);
        assert_eq!((verdict.votes_for, verdict.votes_total), (0, 3));
    }

    #[test]
    fn panels_must_be_odd() {
        let agent = validator(&world());
        assert!(matches!(
            JudgePanel::new(agent, Rubric::Standards, 2),
            Err(FilterError::InvalidPanel)
        ));
    }

    #[test]
    fn deterministic_mock_panel() {
        let world = world();
        let panel = JudgePanel::new(validator(&world), Rubric::Standards, 3).unwrap();
        let payload = "Question: Is Zotefoams the company Zotefoams?\nAnswer: Zotefoams";
        let a = majority_vote(&panel, payload, 9).unwrap();
        let b = majority_vote(&panel, payload, 9).unwrap();
        assert_eq!(a, b);
        assert!(!a.accepted);
    }

    #[test]
    fn standards_rejects_leaky_and_longform() {
        let world = world();
        let panel = JudgePanel::new(validator(&world), Rubric::Standards, 3).unwrap();
        let leaky = qa("Is the answer Zotefoams or not?", "Zotefoams");
        assert!(!check_standards(&leaky, &panel, 1).accepted);
        let listy = qa("List all the companies involved?", "Many companies");
        assert!(!check_standards(&listy, &panel, 1).accepted);
        let fine = qa("Which company makes the foam?", "Zotefoams");
        assert!(check_standards(&fine, &panel, 1).accepted);
    }

    #[test]
    fn factuality_accepts_supported_and_rejects_contradicted() {
        let world = world();
        let tools = ToolStack::new(
            MockTools::new(world.clone()),
            Blocklist::default_hosts(),
            ToolCache::in_memory(),
        );
        let panel = JudgePanel::new(validator(&world), Rubric::Factuality, 3).unwrap();
        let fact = {
            let wf = &world.facts()[0];
            crate::model::Fact {
                id: crate::model::FactId(wf.id.clone()),
                statement: wf.statement.clone(),
                subject_entities: vec![wf.subject.clone(), wf.novel.clone()],
                novel_entity: wf.novel.clone(),
                citations: vec![Citation {
                    url: wf.page_url.clone(),
                    snippet: String::new(),
                    retrieved_at: fixed_epoch(),
                }],
            }
        };
        let pair = qa("Which entity does the link introduce?", "Whatever");
        let supported = verify_factuality(&pair, std::slice::from_ref(&fact), &tools, &panel, 1);
        assert!(supported.accepted, "{}", supported.rationale);

        // Stage a contradicting page for the same fact.
        let mut contradicted_world = MockWorld::generate(&WorldSpec {
            seed: 51,
            roots: 2,
            depth: 2,
            fanout: 2,
            ..WorldSpec::default()
        });
        let fact_id = world.facts()[0].id.clone();
        let statement = world.facts()[0].statement.clone();
        contradicted_world
            .override_fact_page(&fact_id, &format!("It is not true that {statement}."));
        let contradicted_world = Arc::new(contradicted_world);
        let tools2 = ToolStack::new(
            MockTools::new(contradicted_world.clone()),
            Blocklist::default_hosts(),
            ToolCache::in_memory(),
        );
        let panel2 =
            JudgePanel::new(validator(&contradicted_world), Rubric::Factuality, 3).unwrap();
        let rejected = verify_factuality(&pair, std::slice::from_ref(&fact), &tools2, &panel2, 1);
        assert!(!rejected.accepted);
    }

    #[test]
    fn factuality_rejects_unreachable_sources_and_missing_citations() {
        let world = world();
        let tools = ToolStack::new(
            MockTools::new(world.clone()),
            Blocklist::default_hosts(),
            ToolCache::in_memory(),
        );
        let panel = JudgePanel::new(validator(&world), Rubric::Factuality, 3).unwrap();
        let mut fact = {
            let wf = &world.facts()[0];
            crate::model::Fact {
                id: crate::model::FactId(wf.id.clone()),
                statement: wf.statement.clone(),
                subject_entities: vec![wf.subject.clone(), wf.novel.clone()],
                novel_entity: wf.novel.clone(),
                citations: vec![Citation {
                    url: "https://mockipedia.test/facts/gone".into(),
                    snippet: String::new(),
                    retrieved_at: fixed_epoch(),
                }],
            }
        };
        let pair = qa("Which entity?", "Whatever");
        let unreachable = verify_factuality(&pair, std::slice::from_ref(&fact), &tools, &panel, 1);
        assert!(!unreachable.accepted);
        fact.citations.clear();
        let uncited = verify_factuality(&pair, std::slice::from_ref(&fact), &tools, &panel, 1);
        assert!(!uncited.accepted);
        let no_citations_at_all = verify_factuality(&pair, &[], &tools, &panel, 1);
        assert!(!no_citations_at_all.accepted);
    }

    fn transcript_with_outputs(answer: &str, output: &str) -> crate::model::Transcript {
        crate::model::Transcript::from_turns(vec![
            Turn::ToolCall {
                call: ToolCall {
                    tool: ToolName::Search,
                    args: "weighing unit".into(),
                    result: output.into(),
                    is_error: false,
                },
            },
            Turn::ToolResult {
                text: output.into(),
            },
            Turn::FinalAnswer {
                text: format!("Answer: {answer}\n\nReasoning: from the search results"),
            },
        ])
        .unwrap()
    }

    #[test]
    fn alternative_supported_rejects_ambiguous_question() {
        let world = world();
        let panel = JudgePanel::new(validator(&world), Rubric::AlternativeSupport, 3).unwrap();
        let pair = qa("Which is a popular weighing unit?", "kilogram");
        let transcript = transcript_with_outputs(
            "pound",
            "The pound is a popular weighing unit in several countries.",
        );
        let verdict =
            check_alternative_answer(&pair, &transcript, &panel, &RuleEquivalence, 1);
        assert!(!verdict.accepted, "{}", verdict.rationale);
    }

    #[test]
    fn alternative_unsupported_accepts() {
        let world = world();
        let panel = JudgePanel::new(validator(&world), Rubric::AlternativeSupport, 3).unwrap();
        let pair = qa("Which is a popular weighing unit?", "kilogram");
        let transcript = transcript_with_outputs(
            "stone",
            "Only metric units appear in the registry of measures.",
        );
        let verdict =
            check_alternative_answer(&pair, &transcript, &panel, &RuleEquivalence, 1);
        assert!(verdict.accepted);
    }

    #[test]
    fn alternative_equivalent_answer_accepts_without_panel() {
        let world = world();
        let panel = JudgePanel::new(validator(&world), Rubric::AlternativeSupport, 3).unwrap();
        let pair = qa("Which is the unit?", "kilogram");
        let transcript = transcript_with_outputs("the kilogram", "whatever output");
        let verdict =
            check_alternative_answer(&pair, &transcript, &panel, &RuleEquivalence, 1);
        assert!(verdict.accepted);
        assert!(verdict.rationale.contains("agreed"));
    }

    #[test]
    fn run_filter_short_circuits_before_tool_calls() {
        let world = world();
        let recorder = RecordingTools::new(MockTools::new(world.clone()));
        let log = recorder.log_handle();
        let tools = ToolStack::new(recorder, Blocklist::default_hosts(), ToolCache::in_memory());
        let backend = Arc::new(
            MockBackend::new(world.clone()).with_trail_capability(Capability::Finite(1)),
        );
        let agents = Agents::homogeneous(backend);
        let panels = FilterPanels::new(agents.validator.clone(), 3).unwrap();
        // Leaky pair dies at standards; factuality would have browsed.
        let leaky = qa("Is the answer Zotefoams or something else?", "Zotefoams");
        let outcome = run_filter(
            &leaky,
            &[],
            &agents,
            &panels,
            &tools,
            &FixedClock,
            &RuleEquivalence,
            1,
        )
        .unwrap();
        outcome.validate().unwrap();
        assert!(!outcome.accepted);
        assert_eq!(outcome.stage, FilterStage::Standards);
        assert_eq!(outcome.verdicts.len(), 1);
        assert!(log.lock().unwrap().is_empty(), "no tool calls after rejection");
    }

    #[test]
    fn run_filter_passes_a_fully_valid_mock_pair() {
        let world = world();
        let tools = ToolStack::new(
            MockTools::new(world.clone()),
            Blocklist::default_hosts(),
            ToolCache::in_memory(),
        );
        // Gauge solver too weak to re-solve: its wrong answer is unsupported.
        let agents = Agents::homogeneous(Arc::new(
            MockBackend::new(world.clone()).with_trail_capability(Capability::Finite(0)),
        ));
        let panels = FilterPanels::new(agents.validator.clone(), 3).unwrap();
        let wf = &world.facts()[0];
        let fact = crate::model::Fact {
            id: crate::model::FactId(wf.id.clone()),
            statement: wf.statement.clone(),
            subject_entities: vec![wf.subject.clone(), wf.novel.clone()],
            novel_entity: wf.novel.clone(),
            citations: vec![Citation {
                url: wf.page_url.clone(),
                snippet: String::new(),
                retrieved_at: fixed_epoch(),
            }],
        };
        let root_name = world.entity(&wf.subject).unwrap().name.clone();
        let answer = world.entity(&wf.novel).unwrap().name.clone();
        let mut pair = qa(
            &format!(
                "Following the documented trail {} across 1 branch from {root_name}, which \
                 entity does the final link introduce?",
                wf.id
            ),
            &answer,
        );
        pair.supporting_fact_ids = vec![fact.id.clone()];
        let outcome = run_filter(
            &pair,
            std::slice::from_ref(&fact),
            &agents,
            &panels,
            &tools,
            &FixedClock,
            &RuleEquivalence,
            1,
        )
        .unwrap();
        assert!(outcome.accepted, "{:?}", outcome);
        assert_eq!(outcome.stage, FilterStage::Passed);
        assert_eq!(outcome.verdicts.len(), 3);
    }

    #[test]
    fn judge_failure_is_conservative_rejection() {
        struct Unparseable;
        impl crate::agent::backend::CompletionBackend for Unparseable {
            fn complete(
                &self,
                _c: &[crate::agent::backend::ChatMessage],
                _s: u64,
            ) -> Result<crate::agent::backend::AssistantTurn, crate::agent::backend::BackendError>
            {
                Ok(crate::agent::backend::AssistantTurn::finish("perhaps"))
            }
        }
        let panel = JudgePanel::new(
            Agent::new(Arc::new(Unparseable), AgentRole::validator()),
            Rubric::Standards,
            3,
        )
        .unwrap();
        assert!(matches!(
            majority_vote(&panel, "payload", 1),
            Err(FilterError::JudgeFailure(_))
        ));
        let pair = qa("Which company makes the foam?", "Zotefoams");
        let verdict = check_standards(&pair, &panel, 1);
        assert!(!verdict.accepted);
    }

    #[test]
    fn panel_equivalence_agrees_with_rules_on_examples() {
        let world = world();
        let panel = JudgePanel::new(validator(&world), Rubric::Equivalence, 3).unwrap();
        let judged = PanelEquivalence { panel, seed: 3 };
        for (truth, cand, expected) in [
            ("0.5", "\\boxed{1/2}", true),
            ("123456", "123457", false),
            ("14 March 1995", "1995", false),
            ("Zotefoams", "Zotefoams, a UK firm", true),
        ] {
            assert_eq!(judged.equivalent("", truth, cand), expected, "{truth} vs {cand}");
            assert_eq!(
                RuleEquivalence.equivalent("", truth, cand),
                expected,
                "rules: {truth} vs {cand}"
            );
        }
    }
}

//! Bottom-up synthesis: acquire a rare-entity anchor, then harden an
//! initially vague question: removing the clues the solver used, until
//! the solver loses it.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::prompts::{self, Rubric};
use crate::agent::{judge, solve, Agent, AgentLoop, AgentRole, Agents, GatewayError, LoopEnd, RoleKind};
use crate::clock::Clock;
use crate::equivalence::AnswerEquivalence;
use crate::model::{Citation, Entity, QaPair, Seed, SeedId, SolverAttempt, SynthMethod};
use crate::seeding::derive_seed;
use crate::tools::ToolSuite;

/// A proposed anchor with its rarity score (lower means rarer).
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorCandidate {
    pub entity: Entity,
    pub popularity: f64,
}

/// Web-scale popularity stand-in.
pub trait PopularitySignal: Send + Sync {
    fn score(&self, entity: &Entity) -> f64;
}

/// Seeded-hash signal: deterministic, uniform over [0, 100).
#[derive(Debug, Clone)]
pub struct HashPopularity {
    pub seed: u64,
}

impl PopularitySignal for HashPopularity {
    fn score(&self, entity: &Entity) -> f64 {
        let h = crate::seeding::splitmix(
            crate::seeding::fnv1a(entity.id.as_str().as_bytes()) ^ self.seed,
        );
        (h % 10_000) as f64 / 100.0
    }
}

/// Mock-world signal: reads the popularity stored on the world entity.
pub struct WorldPopularity {
    pub world: std::sync::Arc<crate::tools::mock::MockWorld>,
}

impl PopularitySignal for WorldPopularity {
    fn score(&self, entity: &Entity) -> f64 {
        self.world
            .entity(&entity.id)
            .map(|e| e.popularity)
            .unwrap_or(f64::MAX / 2.0)
    }
}

/// Live proxy: the search tool's result count estimates web presence.
pub struct SearchCountPopularity<T> {
    pub tools: T,
}

impl<T: ToolSuite> PopularitySignal for SearchCountPopularity<T> {
    fn score(&self, entity: &Entity) -> f64 {
        match self.tools.search(&entity.name) {
            Ok(results) => results.len() as f64,
            Err(_) => f64::MAX / 2.0,
        }
    }
}

/// Loop state of one hardening run; the anchor never changes.
#[derive(Debug, Clone)]
pub struct HardeningState {
    pub question: String,
    pub last_answer: Option<String>,
    pub last_reasoning: String,
    pub iteration: u32,
    pub anchor: Entity,
}

#[derive(Debug, Error)]
pub enum BottomupError {
    #[error("need at least two anchor candidates")]
    TooFewCandidates,
    #[error("researcher proposed no candidates")]
    NoCandidates,
    #[error("every candidate failed the anchor standards rubric")]
    AllCandidatesRejected,
    #[error("generated question violates constraints: {0}")]
    ConstraintViolation(String),
    #[error("hardener failure: {0}")]
    HardenerFailure(String),
    #[error("harden called while the solver had not matched the anchor")]
    HardenPrecondition,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Propose candidates from the seed's domain, keep those passing the anchor
/// rubric, and return the rarest (argmin score, ties by lexicographic
/// normalized name).
#[allow(clippy::too_many_arguments)]
pub fn acquire_anchor(
    seed: &Seed,
    researcher: &Agent,
    validator: &Agent,
    signal: &dyn PopularitySignal,
    n_candidates: usize,
    tools: &dyn ToolSuite,
    clock: &dyn Clock,
    run_seed: u64,
) -> Result<Entity, BottomupError> {
    if n_candidates < 2 {
        return Err(BottomupError::TooFewCandidates);
    }
    let role = AgentRole {
        kind: RoleKind::Researcher,
        prompt_template: prompts::candidates_prompt(),
    };
    let task = prompts::candidates_task(n_candidates, &seed.domain, &seed.text);
    let mut driver = AgentLoop::new(
        &role,
        &task,
        &researcher.backend,
        tools,
        clock,
        researcher.budget,
        derive_seed(run_seed, &["anchor-cand", seed.id.0.as_str()]),
    )?;
    let names = match driver.run()? {
        LoopEnd::Final(text) => crate::agent::parse::candidates(&text),
        LoopEnd::Exhausted(_) => Vec::new(),
    };
    if names.is_empty() {
        return Err(BottomupError::NoCandidates);
    }

    let mut candidates = Vec::new();
    for (i, name) in names.iter().enumerate() {
        let payload = format!("Candidate: {name}");
        let vote_seed = derive_seed(run_seed, &["anchor-rubric", seed.id.0.as_str(), &i.to_string()]);
        // A candidate the rubric cannot pass (or judge) is dropped.
        let keep = matches!(
            judge(validator, &payload, Rubric::AnchorQuality, vote_seed),
            Ok((true, _))
        );
        if keep {
            let entity = Entity::with_tag(name, &seed.domain);
            let popularity = signal.score(&entity);
            candidates.push(AnchorCandidate { entity, popularity });
        }
    }
    if candidates.is_empty() {
        return Err(BottomupError::AllCandidatesRejected);
    }
    candidates.sort_by(|a, b| {
        a.popularity
            .total_cmp(&b.popularity)
            .then_with(|| a.entity.id.as_str().cmp(b.entity.id.as_str()))
    });
    Ok(candidates.remove(0).entity)
}

fn year_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b(1[5-9]\d{2}|20\d{2})s?\b").unwrap())
}

fn number_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b\d+(\.\d+)?\b").unwrap())
}

/// Mechanical slice of the forbidden-specifics list: exact years, bare
/// numbers, and the anchor's own name leaking into the question.
pub fn constraint_violations(question: &str, anchor: &Entity) -> Vec<String> {
    let mut violations = Vec::new();
    if let Some(m) = year_re().find(question) {
        violations.push(format!("contains an exact year `{}`", m.as_str()));
    }
    if let Some(m) = number_re().find(question) {
        violations.push(format!("contains an exact number `{}`", m.as_str()));
    }
    if crate::model::normalize_name(question).contains(anchor.id.as_str()) {
        violations.push("mentions the anchor by name".to_string());
    }
    if !question.trim_end().ends_with('?') {
        violations.push("is not interrogative".to_string());
    }
    violations
}

/// Ask the questioner for the initial deliberately vague question whose
/// unique answer is the anchor. Lexically scannable constraint violations
/// get one re-ask, then fail.
pub fn initial_question(
    anchor: &Entity,
    questioner: &Agent,
    tools: &dyn ToolSuite,
    clock: &dyn Clock,
    run_seed: u64,
) -> Result<String, BottomupError> {
    let role = AgentRole {
        kind: RoleKind::Questioner,
        prompt_template: prompts::vague_question_prompt(),
    };
    let task = prompts::vague_question_task(&anchor.name);
    let mut driver = AgentLoop::new(
        &role,
        &task,
        &questioner.backend,
        tools,
        clock,
        questioner.budget,
        derive_seed(run_seed, &["q0", anchor.id.as_str()]),
    )?;
    let mut last_violations = Vec::new();
    for _attempt in 0..2 {
        let text = match driver.run()? {
            LoopEnd::Final(text) => text,
            LoopEnd::Exhausted(_) => {
                return Err(BottomupError::ConstraintViolation(
                    "questioner produced no output".into(),
                ))
            }
        };
        let Some((question, answer_line)) = crate::agent::parse::question_with_answer_line(&text)
        else {
            driver.push_user("Reply again using exactly:\n[question]\n\nAnswer: [entity name]");
            continue;
        };
        let mut violations = constraint_violations(&question, anchor);
        if crate::model::normalize_name(&answer_line) != anchor.id.as_str().to_string() {
            violations.push(format!(
                "answer line `{answer_line}` is not the anchor `{}`",
                anchor.name
            ));
        }
        if violations.is_empty() {
            return Ok(question);
        }
        last_violations = violations.clone();
        driver.push_user(&format!(
            "The question violates the rules: {}. Rewrite it without those elements, same \
             format.",
            violations.join("; ")
        ));
    }
    Err(BottomupError::ConstraintViolation(last_violations.join("; ")))
}

/// Rewrite the question harder: the clues the solver cited must disappear
/// while the intended answer stays the anchor.
pub fn harden(
    state: &HardeningState,
    researcher: &Agent,
    tools: &dyn ToolSuite,
    clock: &dyn Clock,
    equivalence: &dyn AnswerEquivalence,
    run_seed: u64,
) -> Result<String, BottomupError> {
    let solved = state
        .last_answer
        .as_deref()
        .map(|a| equivalence.equivalent(&state.question, &state.anchor.name, a))
        .unwrap_or(false);
    if !solved {
        return Err(BottomupError::HardenPrecondition);
    }
    let role = AgentRole {
        kind: RoleKind::Researcher,
        prompt_template: prompts::hardener_prompt(),
    };
    let task = prompts::hardener_task(&state.question, &state.anchor.name, &state.last_reasoning);
    let mut driver = AgentLoop::new(
        &role,
        &task,
        &researcher.backend,
        tools,
        clock,
        researcher.budget,
        derive_seed(run_seed, &["harden", state.anchor.id.as_str(), &state.iteration.to_string()]),
    )?;
    let cited = cited_markers(&state.last_reasoning);
    for _attempt in 0..2 {
        let text = match driver.run()? {
            LoopEnd::Final(text) => text,
            LoopEnd::Exhausted(_) => {
                return Err(BottomupError::HardenerFailure("no output".into()))
            }
        };
        let Some((question, answer_line)) = crate::agent::parse::question_with_answer_line(&text)
        else {
            driver.push_user("Reply again using exactly:\n[the harder question]\n\nAnswer: [same answer]");
            continue;
        };
        if crate::model::normalize_name(&answer_line) != state.anchor.id.as_str().to_string() {
            return Err(BottomupError::HardenerFailure(format!(
                "answer drifted to `{answer_line}`"
            )));
        }
        // Cited opaque markers must be gone from the rewritten question.
        let leftover: Vec<&String> = cited
            .iter()
            .filter(|m| question.contains(m.as_str()))
            .collect();
        if leftover.is_empty() {
            return Ok(question);
        }
        driver.push_user(&format!(
            "The rewritten question still contains clues the solver cited: {}. Remove or \
             replace them, same format.",
            leftover
                .iter()
                .map(|s| s.as_str())
                .collect::<Vec<_>>()
                .join(", ")
        ));
    }
    Err(BottomupError::HardenerFailure(
        "cited clues survived the rewrite".into(),
    ))
}

/// Opaque registry/clue markers cited in a reasoning text.
fn cited_markers(reasoning: &str) -> Vec<String> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"\bx[pmc][0-9a-f]{10}\b").unwrap());
    let mut out: Vec<String> = re
        .find_iter(reasoning)
        .map(|m| m.as_str().to_string())
        .collect();
    out.dedup();
    out
}

/// One step of the hardening audit log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardeningStep {
    pub question: String,
    pub solver_answer: Option<String>,
    pub equivalent: bool,
    /// Markers the solver cited which the next rewrite had to remove.
    pub cited_markers: Vec<String>,
}

/// Audit record of one bottom-up run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardeningLog {
    pub seed_id: SeedId,
    pub anchor: String,
    pub steps: Vec<HardeningStep>,
    pub outcome: String,
}

/// Result of one bottom-up synthesis attempt.
#[derive(Debug, Clone)]
pub struct BottomupResult {
    pub qa: Option<QaPair>,
    pub log: HardeningLog,
}

/// The hardening loop: solve, and while the solver keeps matching the
/// anchor, rewrite harder; emit the first question the solver loses.
/// Returns `qa: None` when the solver still succeeds at `max_iters`.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_bottomup(
    seed: &Seed,
    anchor: &Entity,
    agents: &Agents,
    tools: &dyn ToolSuite,
    clock: &dyn Clock,
    equivalence: &dyn AnswerEquivalence,
    max_iters: u32,
    anchor_citation: Option<Citation>,
    run_seed: u64,
) -> Result<BottomupResult, BottomupError> {
    assert!(max_iters >= 1, "max_iters must be >= 1");
    let mut steps: Vec<HardeningStep> = Vec::new();
    let finish = |steps: Vec<HardeningStep>, qa: Option<QaPair>, outcome: &str| BottomupResult {
        log: HardeningLog {
            seed_id: seed.id.clone(),
            anchor: anchor.name.clone(),
            steps,
            outcome: outcome.to_string(),
        },
        qa,
    };

    let question = match initial_question(anchor, &agents.questioner, tools, clock, run_seed) {
        Ok(q) => q,
        Err(BottomupError::Gateway(e)) => return Err(e.into()),
        Err(e) => {
            return Ok(finish(steps, None, &format!("abandoned: {e}")));
        }
    };

    let mut state = HardeningState {
        question,
        last_answer: None,
        last_reasoning: String::new(),
        iteration: 1,
        anchor: anchor.clone(),
    };

    loop {
        let solve_seed = derive_seed(
            run_seed,
            &["bu-solve", seed.id.0.as_str(), &state.iteration.to_string()],
        );
        let outcome = solve(&agents.solver, &state.question, tools, clock, solve_seed)?;
        let (answer, reasoning) = match &outcome.answer {
            Some(s) => (Some(s.answer.clone()), s.reasoning.clone()),
            None => (None, String::new()),
        };
        let equivalent = answer
            .as_deref()
            .map(|a| equivalence.equivalent(&state.question, &anchor.name, a))
            .unwrap_or(false);
        state.last_answer = answer.clone();
        state.last_reasoning = reasoning.clone();
        steps.push(HardeningStep {
            question: state.question.clone(),
            solver_answer: answer,
            equivalent,
            cited_markers: cited_markers(&reasoning),
        });

        if !equivalent {
            // Solver failure is the emission condition.
            let qa = QaPair {
                id: QaPair::make_id(&seed.id, SynthMethod::Bottomup),
                seed_id: seed.id.clone(),
                question: state.question.clone(),
                answer: anchor.name.clone(),
                supporting_fact_ids: Vec::new(),
                citations: anchor_citation.clone().into_iter().collect(),
                method: SynthMethod::Bottomup,
                iterations: state.iteration,
                solver_attempts: steps
                    .iter()
                    .map(|s| SolverAttempt {
                        answer: s.solver_answer.clone().unwrap_or_default(),
                        equivalent: s.equivalent,
                    })
                    .collect(),
                explanation: format!(
                    "The anchor `{}` uniquely satisfies every remaining clue.",
                    anchor.name
                ),
            };
            if qa.validate().is_err() {
                return Ok(finish(steps, None, "abandoned: emitted pair violates invariants"));
            }
            return Ok(finish(steps, Some(qa), "emitted"));
        }

        if state.iteration >= max_iters {
            // The solver never lost: question generation has failed.
            return Ok(finish(steps, None, "solver unbroken at max iterations"));
        }

        let harder = match harden(&state, &agents.researcher, tools, clock, equivalence, run_seed)
        {
            Ok(q) => q,
            Err(BottomupError::Gateway(e)) => return Err(e.into()),
            Err(e) => {
                return Ok(finish(steps, None, &format!("abandoned: {e}")));
            }
        };
        state.question = harder;
        state.iteration += 1;
    }
}

//! Top-down synthesis: a multi-turn questioner conversation over a growing
//! fact pool, escalating difficulty one branch at a time until the solver
//! fails.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::backend::ChatMessage;
use crate::agent::prompts::{self, Rubric};
use crate::agent::{generate_qa, judge, solve, Agents, GatewayError};
use crate::clock::Clock;
use crate::equivalence::AnswerEquivalence;
use crate::model::{Citation, Fact, QaPair, SeedId, SolverAttempt, SynthMethod, Verdict};
use crate::seeding::derive_seed;
use crate::tools::ToolSuite;
use crate::tree::{decompose_branches, FactTree};

/// The accumulated facts handed to the questioner; grows one branch per
/// escalation round and never shrinks.
#[derive(Debug, Clone, Default)]
pub struct FactPool {
    pub facts: Vec<Fact>,
    pub branches_consumed: Vec<usize>,
}

impl FactPool {
    /// Append a branch's facts (unique by id); returns how many were new.
    fn extend(&mut self, branch_index: usize, facts: Vec<Fact>) -> usize {
        let before = self.facts.len();
        for f in facts {
            if !self.facts.iter().any(|x| x.id == f.id) {
                self.facts.push(f);
            }
        }
        self.branches_consumed.push(branch_index);
        self.facts.len() - before
    }

    pub fn fact_lines(facts: &[Fact]) -> Vec<String> {
        facts
            .iter()
            .map(|f| format!("- [{}] {}", f.id, f.statement))
            .collect()
    }

    /// Pool citations, unique by URL, in fact order.
    pub fn citations(&self) -> Vec<Citation> {
        let mut out: Vec<Citation> = Vec::new();
        for f in &self.facts {
            for c in &f.citations {
                if !out.iter().any(|x| x.url == c.url) {
                    out.push(c.clone());
                }
            }
        }
        out
    }
}

/// Why a session step could not proceed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionEnd {
    /// No branches left to escalate with.
    Exhausted,
    /// The round bound would be exceeded.
    LimitReached,
}

#[derive(Debug, Error)]
pub enum TopdownError {
    #[error("handle_invalid called with an accepted verdict")]
    VerdictAccepted,
    #[error("session round limit reached")]
    LimitReached,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// One questioner conversation: the pool, the remaining branch queue and
/// the round counter (prompt/response pairs), bounded by `l_max`.
pub struct SynthesisSession {
    pub conversation: Vec<ChatMessage>,
    pub pool: FactPool,
    branch_queue: VecDeque<(usize, Vec<Fact>)>,
    pub round: u32,
    pub l_max: u32,
}

impl SynthesisSession {
    /// Start a session: the first branch seeds the pool and the opening
    /// prompt. `None` when the tree has no branches at all.
    pub fn new(tree: &FactTree, l_max: u32) -> Option<Self> {
        let mut queue: VecDeque<(usize, Vec<Fact>)> = decompose_branches(tree)
            .into_iter()
            .enumerate()
            .map(|(i, b)| (i, b.facts(tree).into_iter().cloned().collect()))
            .collect();
        let (first_index, first_facts) = queue.pop_front()?;
        let mut pool = FactPool::default();
        pool.extend(first_index, first_facts);
        let conversation = vec![
            ChatMessage::system(prompts::qa_writer_prompt()),
            ChatMessage::user(prompts::qa_initial_task(
                tree.seed_entity_name(),
                &FactPool::fact_lines(&pool.facts),
            )),
        ];
        Some(SynthesisSession {
            conversation,
            pool,
            branch_queue: queue,
            round: 1,
            l_max,
        })
    }

    pub fn branches_remaining(&self) -> usize {
        self.branch_queue.len()
    }

    /// Dequeue the next branch into the pool and prompt for a harder
    /// question.
    pub fn escalate(&mut self) -> Result<(), SessionEnd> {
        if self.round >= self.l_max {
            return Err(SessionEnd::LimitReached);
        }
        let (index, facts) = self.branch_queue.pop_front().ok_or(SessionEnd::Exhausted)?;
        let added = self.pool.extend(index, facts);
        let new_facts = &self.pool.facts[self.pool.facts.len() - added..];
        self.conversation
            .push(ChatMessage::user(prompts::qa_escalation_task(
                self.pool.branches_consumed.len(),
                &FactPool::fact_lines(new_facts),
            )));
        self.round += 1;
        Ok(())
    }

    /// Feed a failed validation back to the questioner; the pool is
    /// untouched.
    pub fn handle_invalid(&mut self, verdict: &Verdict) -> Result<(), TopdownError> {
        if verdict.accepted {
            return Err(TopdownError::VerdictAccepted);
        }
        if self.round >= self.l_max {
            // The round bound also caps feedback turns.
            return Err(TopdownError::LimitReached);
        }
        self.conversation
            .push(ChatMessage::user(prompts::qa_feedback_task(
                &verdict.rationale,
            )));
        self.round += 1;
        Ok(())
    }
}

/// Audit record of one top-down session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub seed_id: SeedId,
    pub rounds: u32,
    pub branches_consumed: u32,
    pub verdicts: Vec<Verdict>,
    pub emitted_qa: Option<String>,
    pub outcome: String,
}

/// Result of one top-down synthesis attempt.
#[derive(Debug, Clone)]
pub struct TopdownResult {
    pub qa: Option<QaPair>,
    pub log: SessionLog,
}

/// Run the escalation loop over a tree: generate, validate, solve, and
/// either emit (solver failed: the question is hard enough) or escalate
/// with the next branch. Returns `qa: None` on branch exhaustion, the round
/// bound, or an abandoned questioner exchange.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_topdown(
    tree: &FactTree,
    agents: &Agents,
    tools: &dyn ToolSuite,
    clock: &dyn Clock,
    equivalence: &dyn AnswerEquivalence,
    l_max: u32,
    run_seed: u64,
) -> Result<TopdownResult, TopdownError> {
    let seed_id = tree.seed_id.clone();
    let mut verdicts = Vec::new();
    let mut attempts: Vec<SolverAttempt> = Vec::new();

    let finish = |pool: &FactPool, round, verdicts: Vec<Verdict>, qa: Option<QaPair>, outcome: &str| {
        let log = SessionLog {
            seed_id: seed_id.clone(),
            rounds: round,
            branches_consumed: pool.branches_consumed.len() as u32,
            verdicts,
            emitted_qa: qa.as_ref().map(|q| q.id.clone()),
            outcome: outcome.to_string(),
        };
        TopdownResult { qa, log }
    };

    let Some(mut session) = SynthesisSession::new(tree, l_max) else {
        return Ok(finish(
            &FactPool::default(),
            0,
            verdicts,
            None,
            "no branches",
        ));
    };

    loop {
        let round_tag = session.round.to_string();
        let qa_seed = derive_seed(run_seed, &["td-gen", seed_id.0.as_str(), &round_tag]);
        let (question, answer, explanation) =
            match generate_qa(&agents.questioner, &mut session.conversation, qa_seed) {
                Ok(parsed) => parsed,
                Err(GatewayError::Malformed(_)) => {
                    // One re-ask already happened inside; abandon the seed.
                    return Ok(finish(
                        &session.pool,
                        session.round,
                        verdicts,
                        None,
                        "abandoned: malformed questioner output",
                    ));
                }
                Err(e) => return Err(e.into()),
            };

        // Validation runs before the solver; a single advisory vote here,
        // the consolidated filter holds the authoritative panel.
        let payload = format!("Question: {question}\nAnswer: {answer}");
        let judge_seed = derive_seed(run_seed, &["td-val", seed_id.0.as_str(), &round_tag]);
        let verdict = match judge(&agents.validator, &payload, Rubric::Standards, judge_seed) {
            Ok((ok, rationale)) => Verdict::from_votes(ok as u32, 1, rationale),
            Err(GatewayError::UnparseableVerdict(t)) => {
                Verdict::from_votes(0, 1, format!("unparseable verdict: {t}"))
            }
            Err(e) => return Err(e.into()),
        };
        verdicts.push(verdict.clone());

        if !verdict.accepted {
            match session.handle_invalid(&verdict) {
                Ok(()) => continue,
                Err(TopdownError::LimitReached) => {
                    return Ok(finish(
                        &session.pool,
                        session.round,
                        verdicts,
                        None,
                        "round limit",
                    ));
                }
                Err(e) => return Err(e),
            }
        }

        let solve_seed = derive_seed(run_seed, &["td-solve", seed_id.0.as_str(), &round_tag]);
        let outcome = solve(&agents.solver, &question, tools, clock, solve_seed)?;
        let (solver_text, equivalent) = match &outcome.answer {
            Some(solved) => (
                solved.answer.clone(),
                equivalence.equivalent(&question, &answer, &solved.answer),
            ),
            None => (String::new(), false),
        };
        attempts.push(SolverAttempt {
            answer: solver_text,
            equivalent,
        });

        if equivalent {
            // Too easy: grow the pool and go again.
            match session.escalate() {
                Ok(()) => continue,
                Err(SessionEnd::Exhausted) => {
                    return Ok(finish(
                        &session.pool,
                        session.round,
                        verdicts,
                        None,
                        "exhausted",
                    ));
                }
                Err(SessionEnd::LimitReached) => {
                    return Ok(finish(
                        &session.pool,
                        session.round,
                        verdicts,
                        None,
                        "round limit",
                    ));
                }
            }
        }

        let qa = QaPair {
            id: QaPair::make_id(&seed_id, SynthMethod::Topdown),
            seed_id: seed_id.clone(),
            question,
            answer,
            supporting_fact_ids: session.pool.facts.iter().map(|f| f.id.clone()).collect(),
            citations: session.pool.citations(),
            method: SynthMethod::Topdown,
            iterations: session.round,
            solver_attempts: attempts,
            explanation,
        };
        if qa.validate().is_err() {
            return Ok(finish(
                &session.pool,
                session.round,
                verdicts,
                None,
                "abandoned: emitted pair violates invariants",
            ));
        }
        let round = session.round;
        return Ok(finish(&session.pool, round, verdicts, Some(qa), "emitted"));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::mock::{Capability, MockBackend};
    use crate::agent::{Agent, AgentRole};
    use crate::clock::FixedClock;
    use crate::equivalence::RuleEquivalence;
    use crate::model::Entity;
    use crate::tools::mock::{MockTools, MockWorld, WorldSpec};
    use crate::tools::{Blocklist, ToolCache, ToolStack};
    use crate::tree::build_tree;
    use std::sync::Arc;

    fn world() -> Arc<MockWorld> {
        Arc::new(MockWorld::generate(&WorldSpec {
            seed: 31,
            roots: 1,
            depth: 3,
            fanout: 2,
            ..WorldSpec::default()
        }))
    }

    fn stack(world: &Arc<MockWorld>) -> ToolStack<MockTools> {
        ToolStack::new(
            MockTools::new(world.clone()),
            Blocklist::default_hosts(),
            ToolCache::in_memory(),
        )
    }

    fn agents(world: &Arc<MockWorld>, trail: Capability) -> Agents {
        let backend = Arc::new(MockBackend::new(world.clone()).with_trail_capability(trail));
        Agents::homogeneous(backend)
    }

    fn grown_tree(world: &Arc<MockWorld>, d_max: u32, k: u32) -> crate::tree::FactTree {
        let tools = stack(world);
        let researcher = Agent::new(Arc::new(MockBackend::new(world.clone())), AgentRole::researcher());
        let root = world.roots()[0].clone();
        let entity: Entity = world.as_entity(&root).unwrap();
        let seed = crate::model::Seed::new(&format!("About {}?", entity.name), "fx");
        build_tree(&seed, &entity, d_max, k, &researcher, &tools, &FixedClock, 7).unwrap()
    }

    #[test]
    fn escalate_moves_branch_facts_into_pool() {
        let world = world();
        let tree = grown_tree(&world, 2, 2);
        let mut session = SynthesisSession::new(&tree, 8).unwrap();
        let before_facts = session.pool.facts.len();
        let before_queue = session.branches_remaining();
        let before_round = session.round;
        session.escalate().unwrap();
        assert!(session.pool.facts.len() > before_facts);
        assert_eq!(session.branches_remaining(), before_queue - 1);
        assert_eq!(session.round, before_round + 1);
        assert_eq!(session.pool.branches_consumed.len(), 2);
    }

    #[test]
    fn escalate_on_empty_queue_signals_exhaustion() {
        let world = world();
        let tree = grown_tree(&world, 1, 1);
        // Depth-1, k-1 tree has exactly one branch, already consumed by new().
        let mut session = SynthesisSession::new(&tree, 8).unwrap();
        assert_eq!(session.branches_remaining(), 0);
        assert_eq!(session.escalate(), Err(SessionEnd::Exhausted));
    }

    #[test]
    fn handle_invalid_requires_rejected_verdict_and_respects_l_max() {
        let world = world();
        let tree = grown_tree(&world, 2, 2);
        let mut session = SynthesisSession::new(&tree, 2).unwrap();
        let accepted = Verdict::from_votes(1, 1, String::new());
        assert!(matches!(
            session.handle_invalid(&accepted),
            Err(TopdownError::VerdictAccepted)
        ));
        let rejected = Verdict::from_votes(0, 1, "answer leaked".into());
        session.handle_invalid(&rejected).unwrap();
        assert_eq!(session.round, 2);
        // Round bound caps feedback turns too.
        assert!(matches!(
            session.handle_invalid(&rejected),
            Err(TopdownError::LimitReached)
        ));
    }

    #[test]
    fn feedback_changes_the_next_question() {
        let world = world();
        let tree = grown_tree(&world, 2, 2);
        let mut session = SynthesisSession::new(&tree, 8).unwrap();
        let agents = agents(&world, Capability::Finite(1));
        let (q1, _, _) =
            crate::agent::generate_qa(&agents.questioner, &mut session.conversation, 1).unwrap();
        let rejected = Verdict::from_votes(0, 1, "answer leaked into the question".into());
        session.handle_invalid(&rejected).unwrap();
        let (q2, _, _) =
            crate::agent::generate_qa(&agents.questioner, &mut session.conversation, 2).unwrap();
        assert_ne!(q1, q2);
    }

    #[test]
    fn emitted_pair_consumes_more_branches_than_capability() {
        let world = world();
        let tree = grown_tree(&world, 3, 2);
        let tools = stack(&world);
        for c in [0u32, 1, 2] {
            let agents = agents(&world, Capability::Finite(c));
            let result = synthesize_topdown(
                &tree,
                &agents,
                &tools,
                &FixedClock,
                &RuleEquivalence,
                8,
                11,
            )
            .unwrap();
            let qa = result.qa.unwrap_or_else(|| panic!("emitted at capability {c}"));
            assert!(
                result.log.branches_consumed > c,
                "capability {c} consumed {}",
                result.log.branches_consumed
            );
            // The recorded final attempt failed at emission time.
            assert_eq!(qa.solver_attempts.last().map(|a| a.equivalent), Some(false));
            assert!(qa.validate().is_ok());
            assert_eq!(result.log.outcome, "emitted");
        }
    }

    #[test]
    fn unlimited_solver_exhausts_branches_and_emits_nothing() {
        let world = world();
        let tree = grown_tree(&world, 2, 2);
        let tools = stack(&world);
        let agents = agents(&world, Capability::Unlimited);
        let result =
            synthesize_topdown(&tree, &agents, &tools, &FixedClock, &RuleEquivalence, 50, 11)
                .unwrap();
        assert!(result.qa.is_none());
        assert_eq!(result.log.outcome, "exhausted");
    }

    #[test]
    fn round_limit_returns_none() {
        let world = world();
        let tree = grown_tree(&world, 3, 2);
        let tools = stack(&world);
        let agents = agents(&world, Capability::Unlimited);
        let result =
            synthesize_topdown(&tree, &agents, &tools, &FixedClock, &RuleEquivalence, 2, 11)
                .unwrap();
        assert!(result.qa.is_none());
        assert!(result.log.rounds <= 2);
    }

#[test]
    fn single_fact_pool_asks_about_its_novel_entity() {
        let world = world();
        let tree = grown_tree(&world, 1, 1);
        let mut session = SynthesisSession::new(&tree, 8).unwrap();
        assert_eq!(session.pool.facts.len(), 1);
        let agents = agents(&world, Capability::Finite(1));
        let (q, a, _) =
            crate::agent::generate_qa(&agents.questioner, &mut session.conversation, 1).unwrap();
        let novel = &session.pool.facts[0].novel_entity;
        assert_eq!(crate::model::EntityId::from_name(&a), *novel);
        assert!(q.contains(session.pool.facts[0].id.as_str()));
        // One-hop question answerable from the single fact.
        assert!(q.contains("1 branch"));
    }

    #[test]
    fn multi_branch_pool_references_every_fact() {
        let world = world();
        let tree = grown_tree(&world, 3, 2);
        let mut session = SynthesisSession::new(&tree, 20).unwrap();
        session.escalate().unwrap();
        session.escalate().unwrap();
        assert_eq!(session.pool.branches_consumed.len(), 3);
        let agents = agents(&world, Capability::Finite(1));
        let (q, _, _) =
            crate::agent::generate_qa(&agents.questioner, &mut session.conversation, 1).unwrap();
        let referenced = session
            .pool
            .facts
            .iter()
            .filter(|f| q.contains(f.id.as_str()))
            .count();
        assert!(referenced >= 3, "only {referenced} fact ids referenced");
        assert!(q.contains("3 branches"));
    }

    #[test]
    fn pool_growth_is_monotone_across_escalations() {
        let world = world();
        let tree = grown_tree(&world, 3, 2);
        let mut session = SynthesisSession::new(&tree, 20).unwrap();
        let mut last = session.pool.facts.len();
        while session.escalate().is_ok() {
            assert!(session.pool.facts.len() >= last);
            last = session.pool.facts.len();
        }
    }
}

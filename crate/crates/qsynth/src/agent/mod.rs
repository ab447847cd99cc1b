//! The baseline web agent in its four roles: solver, questioner,
//! researcher, validator: as a multi-turn loop over a pluggable completion
//! backend and tool suite.

pub mod backend;
#[cfg(feature = "live")]
pub mod live;
pub mod mock;
pub mod parse;
pub mod prompts;
pub mod scripted;

use std::sync::{Arc, Condvar, Mutex};

use thiserror::Error;

use crate::clock::Clock;
use crate::model::{Entity, EntityId, Fact, ToolCall, Transcript, Turn};
use crate::seeding::derive_seed;
use crate::tools::{ToolError, ToolSuite};
use backend::{
    AgentAction, AssistantTurn, BackendError, ChatMessage, CompletionBackend, ToolRequest,
};
use prompts::Rubric;

/// The four roles the baseline agent assumes, selected by prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoleKind {
    Solver,
    Questioner,
    Researcher,
    Validator,
}

/// A role with its instruction prompt.
#[derive(Debug, Clone)]
pub struct AgentRole {
    pub kind: RoleKind,
    pub prompt_template: String,
}

impl AgentRole {
    pub fn solver() -> Self {
        AgentRole {
            kind: RoleKind::Solver,
            prompt_template: prompts::solver_prompt(),
        }
    }

    pub fn questioner() -> Self {
        AgentRole {
            kind: RoleKind::Questioner,
            prompt_template: prompts::qa_writer_prompt(),
        }
    }

    pub fn researcher() -> Self {
        AgentRole {
            kind: RoleKind::Researcher,
            prompt_template: prompts::fact_seeker_prompt(3, true),
        }
    }

    pub fn validator() -> Self {
        AgentRole {
            kind: RoleKind::Validator,
            prompt_template: Rubric::Standards.template(),
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.prompt_template.trim().is_empty() {
            return Err(GatewayError::InvalidRole("empty prompt template"));
        }
        if self.kind == RoleKind::Solver
            && !(self.prompt_template.contains("Answer:")
                && self.prompt_template.contains("Reasoning:"))
        {
            return Err(GatewayError::InvalidRole(
                "solver template must demand Answer:/Reasoning: sections",
            ));
        }
        Ok(())
    }
}

/// Hard limits on one agent invocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentBudget {
    pub max_turns: u32,
    pub max_tool_calls: u32,
    pub max_wall_time_ms: u64,
}

impl Default for AgentBudget {
    fn default() -> Self {
        AgentBudget {
            max_turns: 60,
            max_tool_calls: 50,
            max_wall_time_ms: 10 * 60 * 1000,
        }
    }
}

impl AgentBudget {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.max_turns == 0 || self.max_tool_calls == 0 || self.max_wall_time_ms == 0 {
            return Err(GatewayError::InvalidBudget);
        }
        Ok(())
    }
}

/// A role bound to a backend and budget.
#[derive(Clone)]
pub struct Agent {
    pub backend: Arc<dyn CompletionBackend>,
    pub role: AgentRole,
    pub budget: AgentBudget,
}

impl Agent {
    pub fn new(backend: Arc<dyn CompletionBackend>, role: AgentRole) -> Self {
        Agent {
            backend,
            role,
            budget: AgentBudget::default(),
        }
    }

    pub fn with_budget(mut self, budget: AgentBudget) -> Self {
        self.budget = budget;
        self
    }
}

/// The four role slots the pipeline draws on. Separate slots because the
/// validating and questioning models need not be the same.
#[derive(Clone)]
pub struct Agents {
    pub solver: Agent,
    pub questioner: Agent,
    pub researcher: Agent,
    pub validator: Agent,
}

impl Agents {
    /// All four roles on one shared backend.
    pub fn homogeneous(backend: Arc<dyn CompletionBackend>) -> Self {
        Agents {
            solver: Agent::new(backend.clone(), AgentRole::solver()),
            questioner: Agent::new(backend.clone(), AgentRole::questioner()),
            researcher: Agent::new(backend.clone(), AgentRole::researcher()),
            validator: Agent::new(backend, AgentRole::validator()),
        }
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("task must be nonempty")]
    EmptyTask,
    #[error("invalid agent role: {0}")]
    InvalidRole(&'static str),
    #[error("agent budget limits must be strictly positive")]
    InvalidBudget,
    #[error("backend unreachable: {0}")]
    Backend(String),
    #[error("malformed agent output after re-ask: {0}")]
    Malformed(String),
    #[error("no facts found")]
    NoFactsFound,
    #[error("unparseable verdict after re-ask: {0}")]
    UnparseableVerdict(String),
}

/// Why a run stopped short of a final answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExhaustKind {
    Turns,
    ToolCalls,
    WallTime,
    /// The backend kept violating the output contract after the single
    /// permitted re-ask.
    Malformed,
}

/// Completed-or-partial status of one agent run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunStatus {
    Complete,
    Incomplete(ExhaustKind),
}

/// A finished agent invocation: the transcript plus how it ended.
#[derive(Debug, Clone)]
pub struct AgentRun {
    pub transcript: Transcript,
    pub status: RunStatus,
}

impl AgentRun {
    pub fn is_complete(&self) -> bool {
        matches!(self.status, RunStatus::Complete)
    }
}

/// Multi-turn loop driver. Keeps the conversation and the transcript under
/// construction in lockstep so transcripts are well-formed on every path.
pub struct AgentLoop<'a> {
    backend: &'a dyn CompletionBackend,
    tools: &'a dyn ToolSuite,
    clock: &'a dyn Clock,
    budget: AgentBudget,
    seed: u64,
    conversation: Vec<ChatMessage>,
    turns: Vec<Turn>,
    assistant_turns: u32,
    tool_calls: u32,
    start_ms: u64,
    reasked: bool,
}

/// How one drive of the loop ended.
pub enum LoopEnd {
    Final(String),
    Exhausted(ExhaustKind),
}

impl<'a> AgentLoop<'a> {
    pub fn new(
        role: &AgentRole,
        task: &str,
        backend: &'a dyn CompletionBackend,
        tools: &'a dyn ToolSuite,
        clock: &'a dyn Clock,
        budget: AgentBudget,
        seed: u64,
    ) -> Result<Self, GatewayError> {
        role.validate()?;
        budget.validate()?;
        if task.trim().is_empty() {
            return Err(GatewayError::EmptyTask);
        }
        let system_text = format!("{}\n\n[task]\n{}", role.prompt_template, task);
        Ok(AgentLoop {
            backend,
            tools,
            clock,
            budget,
            seed,
            conversation: vec![
                ChatMessage::system(role.prompt_template.clone()),
                ChatMessage::user(task.to_string()),
            ],
            turns: vec![Turn::System { text: system_text }],
            assistant_turns: 0,
            tool_calls: 0,
            start_ms: clock.monotonic_ms(),
            reasked: false,
        })
    }

    /// Append a user note (re-ask, feedback) before resuming.
    pub fn push_user(&mut self, text: &str) {
        self.retract_final();
        self.conversation.push(ChatMessage::user(text.to_string()));
    }

    /// A final answer the caller rejected (wrong format) was not final
    /// after all: keep the text on the record as a think turn so the
    /// transcript stays well-formed when the loop resumes.
    fn retract_final(&mut self) {
        if matches!(self.turns.last(), Some(Turn::FinalAnswer { .. })) {
            let Some(Turn::FinalAnswer { text }) = self.turns.pop() else {
                unreachable!("just matched");
            };
            self.turns.push(Turn::Think { text });
        }
    }

    /// Drive until the backend finishes or a budget runs out.
    pub fn run(&mut self) -> Result<LoopEnd, GatewayError> {
        loop {
            if self.assistant_turns >= self.budget.max_turns {
                return Ok(LoopEnd::Exhausted(ExhaustKind::Turns));
            }
            if self.clock.monotonic_ms().saturating_sub(self.start_ms)
                >= self.budget.max_wall_time_ms
            {
                return Ok(LoopEnd::Exhausted(ExhaustKind::WallTime));
            }
            let msg = match self.backend.complete(&self.conversation, self.seed) {
                Ok(msg) => msg,
                Err(BackendError::Unreachable(e)) => return Err(GatewayError::Backend(e)),
                Err(BackendError::Malformed(raw)) => {
                    self.assistant_turns += 1;
                    if self.reasked {
                        return Ok(LoopEnd::Exhausted(ExhaustKind::Malformed));
                    }
                    self.reasked = true;
                    self.conversation.push(ChatMessage::assistant(raw));
                    self.conversation.push(ChatMessage::user(
                        "Your last output did not follow the required format. Reply again, \
                         following the format exactly."
                            .to_string(),
                    ));
                    continue;
                }
            };
            self.assistant_turns += 1;
            self.apply(msg);
            match self.turns.last() {
                Some(Turn::FinalAnswer { text }) => return Ok(LoopEnd::Final(text.clone())),
                _ => {
                    if self.tool_calls >= self.budget.max_tool_calls
                        && !matches!(self.turns.last(), Some(Turn::FinalAnswer { .. }))
                    {
                        return Ok(LoopEnd::Exhausted(ExhaustKind::ToolCalls));
                    }
                }
            }
        }
    }

    fn apply(&mut self, msg: AssistantTurn) {
        if let Some(think) = &msg.think {
            self.turns.push(Turn::Think { text: think.clone() });
        }
        match msg.action {
            AgentAction::Call(req) => {
                let (result, is_error) = execute_tool(self.tools, &req);
                self.tool_calls += 1;
                self.turns.push(Turn::ToolCall {
                    call: ToolCall {
                        tool: req.tool,
                        args: req.args.clone(),
                        result: result.clone(),
                        is_error,
                    },
                });
                self.turns.push(Turn::ToolResult {
                    text: result.clone(),
                });
                self.conversation.push(ChatMessage {
                    role: backend::ChatRole::Assistant,
                    content: msg.think.unwrap_or_default(),
                    tool_call: Some(req),
                });
                self.conversation.push(ChatMessage::tool_result(result));
            }
            AgentAction::Finish(text) => {
                self.turns.push(Turn::FinalAnswer { text: text.clone() });
                self.conversation.push(ChatMessage::assistant(text));
            }
        }
    }

    pub fn into_run(self, status: RunStatus) -> AgentRun {
        let transcript = Transcript::from_turns(self.turns)
            .expect("loop-constructed transcripts are well-formed");
        AgentRun { transcript, status }
    }

    pub fn tool_calls(&self) -> u32 {
        self.tool_calls
    }
}

/// Render a tool outcome into the text handed back to the model.
fn execute_tool(tools: &dyn ToolSuite, req: &ToolRequest) -> (String, bool) {
    let outcome: Result<String, ToolError> = match req.tool {
        crate::model::ToolName::Search => tools.search(&req.args).map(|results| {
            if results.is_empty() {
                "No results.".to_string()
            } else {
                results
                    .iter()
                    .enumerate()
                    .map(|(i, r)| format!("{}. {}: {}\n   {}", i + 1, r.title, r.url, r.snippet))
                    .collect::<Vec<_>>()
                    .join("\n")
            }
        }),
        crate::model::ToolName::Browse => tools.browse(&req.args),
        crate::model::ToolName::Python => tools.python(&req.args).map(|out| {
            if out.status == 0 && out.stderr.is_empty() {
                out.stdout
            } else {
                format!(
                    "exit status {}\nstdout:\n{}\nstderr:\n{}",
                    out.status, out.stdout, out.stderr
                )
            }
        }),
    };
    match outcome {
        Ok(text) => (text, false),
        Err(e) => (format!("ERROR: {e}"), true),
    }
}

/// Run one role invocation to completion or budget exhaustion.
pub fn run_agent(
    agent: &Agent,
    task: &str,
    tools: &dyn ToolSuite,
    clock: &dyn Clock,
    seed: u64,
) -> Result<AgentRun, GatewayError> {
    let mut driver = AgentLoop::new(
        &agent.role,
        task,
        &agent.backend,
        tools,
        clock,
        agent.budget,
        seed,
    )?;
    let end = driver.run()?;
    Ok(match end {
        LoopEnd::Final(_) => driver.into_run(RunStatus::Complete),
        LoopEnd::Exhausted(kind) => driver.into_run(RunStatus::Incomplete(kind)),
    })
}

/// A solver's parsed answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolvedAnswer {
    pub answer: String,
    pub reasoning: String,
}

/// Outcome of a solve attempt. `answer` is `None` when the agent ran out of
/// budget or would not produce the required sections: the caller treats
/// both as solver failure.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub answer: Option<SolvedAnswer>,
    pub transcript: Transcript,
}

/// Ask the solver to answer a question with tools.
pub fn solve(
    solver: &Agent,
    question: &str,
    tools: &dyn ToolSuite,
    clock: &dyn Clock,
    seed: u64,
) -> Result<SolveOutcome, GatewayError> {
    if question.trim().is_empty() {
        return Err(GatewayError::EmptyTask);
    }
    let mut driver = AgentLoop::new(
        &solver.role,
        question,
        &solver.backend,
        tools,
        clock,
        solver.budget,
        seed,
    )?;
    let mut reasked = false;
    loop {
        match driver.run()? {
            LoopEnd::Final(text) => match parse::answer_reasoning(&text) {
                Some((answer, reasoning)) => {
                    return Ok(SolveOutcome {
                        answer: Some(SolvedAnswer { answer, reasoning }),
                        transcript: driver.into_run(RunStatus::Complete).transcript,
                    });
                }
                None if !reasked => {
                    reasked = true;
                    driver.push_user(
                        "Restate your final response in the exact format:\nAnswer: ...\n\nReasoning: ...",
                    );
                }
                None => {
                    return Ok(SolveOutcome {
                        answer: None,
                        transcript: driver.into_run(RunStatus::Incomplete(ExhaustKind::Malformed)).transcript,
                    });
                }
            },
            LoopEnd::Exhausted(kind) => {
                return Ok(SolveOutcome {
                    answer: None,
                    transcript: driver.into_run(RunStatus::Incomplete(kind)).transcript,
                });
            }
        }
    }
}

/// Facts researched for a focus, with the exclusion set honored.
pub fn research_facts(
    researcher: &Agent,
    focus: &str,
    focus_entities: &[Entity],
    exclusions: &[Fact],
    num_facts: usize,
    tools: &dyn ToolSuite,
    clock: &dyn Clock,
    seed: u64,
) -> Result<Vec<Fact>, GatewayError> {
    if num_facts == 0 {
        return Err(GatewayError::InvalidBudget);
    }
    let exclusion_texts: Vec<String> = exclusions.iter().map(|f| f.statement.clone()).collect();
    let role = AgentRole {
        kind: RoleKind::Researcher,
        prompt_template: prompts::fact_seeker_prompt(num_facts, !exclusions.is_empty()),
    };
    let task = prompts::fact_seeker_task(focus, &exclusion_texts);
    let mut driver = AgentLoop::new(
        &role,
        &task,
        &researcher.backend,
        tools,
        clock,
        researcher.budget,
        seed,
    )?;
    let mut reasked = false;
    let final_text = loop {
        match driver.run()? {
            LoopEnd::Final(text) => {
                if text.trim().eq_ignore_ascii_case(parse::NO_FACTS) {
                    return Err(GatewayError::NoFactsFound);
                }
                if parse::fact_blocks(&text).is_some() {
                    break text;
                }
                if reasked {
                    return Err(GatewayError::Malformed(text));
                }
                reasked = true;
                driver.push_user(
                    "Restate your findings in the exact block format:\nFact 1:\n- Fact: ...\n- New entity: ...\n- Sources:\nhttps://...",
                );
            }
            LoopEnd::Exhausted(_) => return Err(GatewayError::NoFactsFound),
        }
    };

    let blocks = parse::fact_blocks(&final_text).expect("checked above");
    let excluded_ids: Vec<EntityId> = exclusions
        .iter()
        .flat_map(|f| f.subject_entities.iter().cloned())
        .collect();
    let focus_names: Vec<String> = focus_entities.iter().map(|e| e.name.clone()).collect();
    let now = clock.now();
    let mut facts = Vec::new();
    for block in blocks {
        if block.urls.is_empty() {
            continue;
        }
        let novel_name = match &block.new_entity {
            Some(name) => name.clone(),
            None => match parse::guess_novel_entity(&block.statement, &focus_names) {
                Some(name) => name,
                None => continue,
            },
        };
        let novel = EntityId::from_name(&novel_name);
        // Honor the exclusion contract even against a misbehaving backend.
        if excluded_ids.contains(&novel) {
            continue;
        }
        let statement_norm = crate::model::normalize_name(&block.statement);
        let mut subjects: Vec<EntityId> = focus_entities
            .iter()
            .filter(|e| statement_norm.contains(e.id.as_str()))
            .map(|e| e.id.clone())
            .filter(|id| !excluded_ids.contains(id))
            .collect();
        if !subjects.contains(&novel) {
            subjects.push(novel.clone());
        }
        let citations: Vec<crate::model::Citation> = block
            .urls
            .iter()
            .map(|u| crate::model::Citation {
                url: u.clone(),
                snippet: String::new(),
                retrieved_at: now,
            })
            .collect();
        let fact = Fact {
            id: Fact::make_id(&block.statement, &novel),
            statement: block.statement,
            subject_entities: subjects,
            novel_entity: novel,
            citations,
        };
        if fact.validate_researched().is_ok() {
            facts.push(fact);
        }
        if facts.len() == num_facts {
            break;
        }
    }
    if facts.is_empty() {
        return Err(GatewayError::NoFactsFound);
    }
    Ok(facts)
}

/// Drive the questioner one turn over an ongoing conversation and parse the
/// `Question:/Answer:/Explanation:` reply. Appends both the reply and any
/// re-ask exchange to the conversation.
pub fn generate_qa(
    questioner: &Agent,
    conversation: &mut Vec<ChatMessage>,
    seed: u64,
) -> Result<(String, String, String), GatewayError> {
    for attempt in 0..2 {
        let call_seed = derive_seed(seed, &["qa", &attempt.to_string()]);
        let msg = questioner
            .backend
            .complete(conversation, call_seed)
            .map_err(|e| match e {
                BackendError::Unreachable(m) => GatewayError::Backend(m),
                BackendError::Malformed(m) => GatewayError::Malformed(m),
            })?;
        let text = match msg.action {
            AgentAction::Finish(text) => text,
            AgentAction::Call(_) => {
                return Err(GatewayError::Malformed(
                    "questioner attempted a tool call".into(),
                ))
            }
        };
        conversation.push(ChatMessage::assistant(text.clone()));
        match parse::question_answer_explanation(&text) {
            Some(parsed) => return Ok(parsed),
            None if attempt == 0 => {
                conversation.push(ChatMessage::user(
                    "Output malformed. Reply again using exactly:\nQuestion: ...?\nAnswer: ...\nExplanation: ..."
                        .to_string(),
                ));
            }
            None => return Err(GatewayError::Malformed(text)),
        }
    }
    unreachable!("two attempts covered above")
}

/// One validator judgment under a rubric: strict yes/no with any preamble
/// kept as the rationale.
pub fn judge(
    validator: &Agent,
    payload: &str,
    rubric: Rubric,
    seed: u64,
) -> Result<(bool, String), GatewayError> {
    if payload.trim().is_empty() {
        return Err(GatewayError::EmptyTask);
    }
    let mut conversation = vec![
        ChatMessage::system(rubric.template()),
        ChatMessage::user(payload.to_string()),
    ];
    for attempt in 0..2 {
        let call_seed = derive_seed(seed, &["judge", &attempt.to_string()]);
        let msg = validator
            .backend
            .complete(&conversation, call_seed)
            .map_err(|e| match e {
                BackendError::Unreachable(m) => GatewayError::Backend(m),
                BackendError::Malformed(m) => GatewayError::Malformed(m),
            })?;
        let text = match msg.action {
            AgentAction::Finish(text) => text,
            AgentAction::Call(_) => String::new(),
        };
        conversation.push(ChatMessage::assistant(text.clone()));
        match parse::yes_no(&text) {
            Some(verdict) => return Ok(verdict),
            None if attempt == 0 => {
                conversation.push(ChatMessage::user(
                    "Answer shortly yes or no only.".to_string(),
                ));
            }
            None => return Err(GatewayError::UnparseableVerdict(text)),
        }
    }
    unreachable!("two attempts covered above")
}

/// Classify a text into one of the taxonomy labels ("other" on failure).
pub fn categorize_text(
    backend: &dyn CompletionBackend,
    taxonomy: &[String],
    text: &str,
    seed: u64,
) -> String {
    let conversation = vec![
        ChatMessage::system(prompts::categorize_prompt(taxonomy)),
        ChatMessage::user(text.to_string()),
    ];
    match backend.complete(&conversation, seed) {
        Ok(AssistantTurn {
            action: AgentAction::Finish(label),
            ..
        }) => {
            let label = label.trim().to_lowercase();
            if taxonomy.iter().any(|l| l.eq_ignore_ascii_case(&label)) {
                label
            } else {
                "other".to_string()
            }
        }
        _ => "other".to_string(),
    }
}

/// Global concurrent-request ceiling plus a minimum spacing between
/// requests, shared by every live backend slot.
pub struct RequestLimiter {
    permits: Mutex<usize>,
    available: Condvar,
    min_interval_ms: u64,
    last_start: Mutex<std::time::Instant>,
}

impl RequestLimiter {
    pub fn new(max_concurrent: usize, min_interval_ms: u64) -> Arc<Self> {
        Arc::new(RequestLimiter {
            permits: Mutex::new(max_concurrent.max(1)),
            available: Condvar::new(),
            min_interval_ms,
            last_start: Mutex::new(std::time::Instant::now()),
        })
    }

    fn acquire(&self) {
        let mut permits = self.permits.lock().unwrap();
        while *permits == 0 {
            permits = self.available.wait(permits).unwrap();
        }
        *permits -= 1;
        drop(permits);
        if self.min_interval_ms > 0 {
            let mut last = self.last_start.lock().unwrap();
            let since = last.elapsed().as_millis() as u64;
            if since < self.min_interval_ms {
                std::thread::sleep(std::time::Duration::from_millis(
                    self.min_interval_ms - since,
                ));
            }
            *last = std::time::Instant::now();
        }
    }

    fn release(&self) {
        let mut permits = self.permits.lock().unwrap();
        *permits += 1;
        self.available.notify_one();
    }
}

/// Backend wrapper enforcing a shared [`RequestLimiter`].
pub struct LimitedBackend<B> {
    inner: B,
    limiter: Arc<RequestLimiter>,
}

impl<B: CompletionBackend> LimitedBackend<B> {
    pub fn new(inner: B, limiter: Arc<RequestLimiter>) -> Self {
        LimitedBackend { inner, limiter }
    }
}

impl<B: CompletionBackend> CompletionBackend for LimitedBackend<B> {
    fn complete(
        &self,
        conversation: &[ChatMessage],
        seed: u64,
    ) -> Result<AssistantTurn, BackendError> {
        self.limiter.acquire();
        let out = self.inner.complete(conversation, seed);
        self.limiter.release();
        out
    }
}

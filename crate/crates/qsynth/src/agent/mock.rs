//! Deterministic rule-engine backend over the mock world.
//!
//! Each role's behavior is a pure function of (conversation, seed, world):
//! the researcher walks the fact graph, the questioner emits template
//! questions that encode the fact ids and branch count they cover, the
//! solver succeeds exactly when the encoded difficulty is within its
//! configured capability, and the validator applies mechanical rubric
//! rules. That makes every pipeline path testable offline, byte-identically.

use std::sync::Arc;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use regex::Regex;

use super::backend::{
    AssistantTurn, BackendError, ChatMessage, ChatRole, CompletionBackend,
};
use super::prompts::sentinel;
use crate::equivalence::{AnswerEquivalence, RuleEquivalence};
use crate::model::{normalize_name, EntityId, ToolName};
use crate::seeding::{derive_seed, rng};
use crate::tools::mock::{clue_token, marker_token, MockWorld, MAX_OBFUSCATION_LEVEL};

/// How many units of difficulty the scripted solver can absorb: branches for
/// trail questions, obfuscation levels for registry questions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Capability {
    Finite(u32),
    Unlimited,
}

impl Capability {
    pub fn covers(&self, difficulty: u32) -> bool {
        match self {
            Capability::Finite(c) => difficulty <= *c,
            Capability::Unlimited => true,
        }
    }
}

/// Obfuscation tiers spelled as words so bottom-up questions stay free of
/// digit tokens (the initial-question lexical scans forbid numbers).
pub const TIER_WORDS: [&str; 17] = [
    "alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta", "iota", "kappa",
    "lambda", "mu", "nu", "xi", "omicron", "pi", "rho",
];

pub fn tier_word(level: u32) -> &'static str {
    TIER_WORDS[(level as usize).min(TIER_WORDS.len() - 1)]
}

pub fn tier_level(word: &str) -> Option<u32> {
    TIER_WORDS.iter().position(|w| *w == word).map(|i| i as u32)
}

const ABSTRACTIONS: [&str; 6] = [
    "remembered within its field for quiet contributions made several decades ago",
    "described only as an obscure registrant of a minor archive",
    "known merely as a seldom-cited name from a distant region",
    "recalled as a peripheral figure in an old survey",
    "traceable only through secondary registries of the past century",
    "identifiable solely by the faint trail it left in curated records",
];

const TRAIL_OPENERS: [&str; 3] = [
    "Following the documented trail",
    "Tracing the registry trail",
    "Working along the catalogued trail",
];

/// Rule-engine backend over a mock world.
pub struct MockBackend {
    world: Arc<MockWorld>,
    /// Branch depth the solver can trace on trail (top-down) questions.
    pub trail_capability: Capability,
    /// Obfuscation level the solver can crack on registry (bottom-up)
    /// questions.
    pub registry_capability: Capability,
    equivalence: RuleEquivalence,
}

impl MockBackend {
    pub fn new(world: Arc<MockWorld>) -> Self {
        MockBackend {
            world,
            trail_capability: Capability::Finite(1),
            registry_capability: Capability::Finite(1),
            equivalence: RuleEquivalence::default(),
        }
    }

    pub fn with_trail_capability(mut self, c: Capability) -> Self {
        self.trail_capability = c;
        self
    }

    pub fn with_registry_capability(mut self, c: Capability) -> Self {
        self.registry_capability = c;
        self
    }

    pub fn world(&self) -> &Arc<MockWorld> {
        &self.world
    }

    fn dispatch(&self, conv: &[ChatMessage], seed: u64) -> Result<AssistantTurn, BackendError> {
        let system = conv
            .iter()
            .find(|m| m.role == ChatRole::System)
            .map(|m| m.content.as_str())
            .unwrap_or("");
        let first_line = system.lines().next().unwrap_or("");
        match first_line {
            l if l == sentinel::SOLVER => Ok(self.solver(conv)),
            l if l == sentinel::FACT_SEEKER => Ok(self.researcher(conv, system)),
            l if l == sentinel::QA_WRITER => Ok(self.questioner(conv)),
            l if l == sentinel::VAGUE_QUESTION => self.vague_questioner(conv),
            l if l == sentinel::HARDENER => self.hardener(conv),
            l if l == sentinel::CANDIDATES => Ok(self.candidates(conv, seed)),
            l if l == sentinel::VALIDATOR => Ok(self.validator(conv, system)),
            l if l == sentinel::CATEGORIZER => Ok(self.categorizer(conv, system)),
            other => Err(BackendError::Malformed(format!(
                "mock backend has no rule for prompt `{other}`"
            ))),
        }
    }

    // -- solver ------------------------------------------------------------

    fn solver(&self, conv: &[ChatMessage]) -> AssistantTurn {
        let question = first_user(conv);
        let step = assistant_count(conv);

        if let Some((fact_ids, branches)) = parse_trail_question(&question) {
            if !self.trail_capability.covers(branches) {
                return match step {
                    0 => AssistantTurn::call(ToolName::Search, fact_ids[0].clone())
                        .with_think("The trail is long; let me at least look at the first link."),
                    _ => AssistantTurn::finish(
                        "Answer: Inconclusive\n\nReasoning: the trail spans more branches than I \
                         can trace, so I cannot pin the final entity.",
                    ),
                };
            }
            // One search + one browse per link of the trail, then the answer.
            let per_fact = 2 * fact_ids.len();
            if step < per_fact {
                let fact_id = &fact_ids[step / 2];
                if step % 2 == 0 {
                    return AssistantTurn::call(ToolName::Search, fact_id.clone()).with_think(
                        format!("Tracing link {} of {}.", step / 2 + 1, fact_ids.len()),
                    );
                }
                let url = self
                    .world
                    .fact(fact_id)
                    .map(|f| f.page_url.clone())
                    .unwrap_or_else(|| format!("https://mockipedia.test/facts/{fact_id}"));
                return AssistantTurn::call(ToolName::Browse, url);
            }
            let last = fact_ids.last().unwrap();
            let (answer, clues) = match self.world.fact(last) {
                Some(f) => {
                    let name = self
                        .world
                        .entity(&f.novel)
                        .map(|e| e.name.clone())
                        .unwrap_or_else(|| f.novel.to_string());
                    let clues = fact_ids
                        .iter()
                        .filter_map(|id| self.world.fact(id))
                        .map(|f| format!("- {}: {}", f.id, f.statement))
                        .collect::<Vec<_>>()
                        .join("\n");
                    (name, clues)
                }
                None => ("Inconclusive".to_string(), String::new()),
            };
            return AssistantTurn::finish(format!(
                "Answer: {answer}\n\nReasoning: I followed the documented trail end to end:\n{clues}"
            ));
        }

        if let Some((token, level, clue_marks)) = parse_registry_question(&question) {
            if !self.registry_capability.covers(level) {
                return match step {
                    0 => AssistantTurn::call(ToolName::Search, token)
                        .with_think("The profile is heavily obscured; trying the marker anyway."),
                    _ => AssistantTurn::finish(
                        "Answer: Undetermined\n\nReasoning: the registry profile is too obscured \
                         at this scrutiny tier for me to resolve.",
                    ),
                };
            }
            match step {
                0 => return AssistantTurn::call(ToolName::Search, token)
                    .with_think("Resolving the registry marker."),
                1 => {
                    let url = self
                        .world
                        .resolve_token(&token)
                        .map(|e| crate::tools::mock::profile_url(&e.profile_token))
                        .unwrap_or_else(|| format!("https://mockipedia.test/profiles/{token}"));
                    return AssistantTurn::call(ToolName::Browse, url);
                }
                _ => {
                    let answer = self
                        .world
                        .resolve_token(&token)
                        .map(|e| e.name.clone())
                        .unwrap_or_else(|| "Undetermined".to_string());
                    let cited = if clue_marks.is_empty() {
                        String::new()
                    } else {
                        format!(
                            "\nThe giveaways were the corroborating marks {}.",
                            clue_marks.join(" and ")
                        )
                    };
                    return AssistantTurn::finish(format!(
                        "Answer: {answer}\n\nReasoning: I resolved the registry marker {token} \
                         directly against the public profile registry.{cited}"
                    ));
                }
            }
        }

        // Unknown question shape: one honest search, then give up.
        match step {
            0 => AssistantTurn::call(ToolName::Search, question),
            _ => AssistantTurn::finish(
                "Answer: Undetermined\n\nReasoning: nothing in the index matches the question's \
                 clues well enough to commit to an answer.",
            ),
        }
    }

    // -- researcher ---------------------------------------------------------

    fn researcher(&self, conv: &[ChatMessage], system: &str) -> AssistantTurn {
        let task = first_user(conv);
        let num_facts = parse_collect_n(system).unwrap_or(3);
        let (focus_text, excluded_text) = split_focus_exclusions(&task);
        let focus_entities = self.world.entities_in_text(&focus_text);
        let excluded = self.world.entities_in_text(&excluded_text);

        let chosen: Vec<_> = self
            .world
            .expansion_facts(&focus_entities, &excluded)
            .into_iter()
            .take(num_facts)
            .map(|f| f.id.clone())
            .collect();

        if chosen.is_empty() {
            return AssistantTurn::finish(super::parse::NO_FACTS);
        }

        let step = assistant_count(conv);
        let planned_calls = 2 * chosen.len();
        if step < planned_calls {
            let fact = self.world.fact(&chosen[step / 2]).expect("chosen from world");
            if step % 2 == 0 {
                let subject_name = self
                    .world
                    .entity(&fact.subject)
                    .map(|e| e.name.clone())
                    .unwrap_or_else(|| fact.subject.to_string());
                return AssistantTurn::call(ToolName::Search, subject_name)
                    .with_think("Looking for a fresh, citable connection.");
            }
            return AssistantTurn::call(ToolName::Browse, fact.page_url.clone());
        }

        let blocks: Vec<String> = chosen
            .iter()
            .enumerate()
            .filter_map(|(i, id)| self.world.fact(id).map(|f| (i, f)))
            .map(|(i, f)| {
                let novel_name = self
                    .world
                    .entity(&f.novel)
                    .map(|e| e.name.clone())
                    .unwrap_or_else(|| f.novel.to_string());
                format!(
                    "Fact {ix}:\n- Fact: {statement}\n- New entity: {novel}\n- Sources:\n{url}",
                    ix = i + 1,
                    statement = f.statement,
                    novel = novel_name,
                    url = f.page_url
                )
            })
            .collect();
        AssistantTurn::finish(blocks.join("\n\n"))
    }

    // -- top-down questioner -------------------------------------------------

    fn questioner(&self, conv: &[ChatMessage]) -> AssistantTurn {
        let mut fact_ids: Vec<String> = Vec::new();
        let mut branches = 0usize;
        let mut seed_entity = String::new();
        let mut revisions = 0usize;
        for msg in conv.iter().filter(|m| m.role == ChatRole::User) {
            if msg.content.contains("QA invalid, feedback:") {
                revisions += 1;
            }
            for line in msg.content.lines() {
                if let Some(rest) = line.strip_prefix("Seed entity: ") {
                    seed_entity = rest.trim().to_string();
                }
                if line.starts_with("Facts (branch ") {
                    branches += 1;
                }
                if let Some(rest) = line.trim().strip_prefix("- [") {
                    if let Some(end) = rest.find(']') {
                        let id = rest[..end].trim().to_string();
                        if !fact_ids.contains(&id) {
                            fact_ids.push(id);
                        }
                    }
                }
            }
        }
        if fact_ids.is_empty() {
            return AssistantTurn::finish(
                "Question: Which entity stands at the end of an empty trail?\nAnswer: Unknown\nExplanation: no facts were supplied",
            );
        }
        let last = fact_ids.last().unwrap();
        let answer = self
            .world
            .fact(last)
            .and_then(|f| self.world.entity(&f.novel))
            .map(|e| e.name.clone())
            .unwrap_or_else(|| "Unknown".to_string());
        let opener = TRAIL_OPENERS[revisions % TRAIL_OPENERS.len()];
        let plural = if branches == 1 { "branch" } else { "branches" };
        let question = format!(
            "{opener} {ids} across {branches} {plural} from {seed_entity}, which entity does \
             the final link introduce?",
            ids = fact_ids.join(", "),
        );
        AssistantTurn::finish(format!(
            "Question: {question}\nAnswer: {answer}\nExplanation: the final link of the trail \
             introduces exactly this entity"
        ))
    }

    // -- bottom-up questioner ------------------------------------------------

    fn vague_questioner(&self, conv: &[ChatMessage]) -> Result<AssistantTurn, BackendError> {
        let task = first_user(conv);
        let anchor_name = task
            .lines()
            .find_map(|l| l.strip_prefix("Anchor entity: "))
            .unwrap_or("")
            .trim()
            .to_string();
        let entity = self
            .world
            .entity(&EntityId::from_name(&anchor_name))
            .ok_or_else(|| {
                BackendError::Malformed(format!("unknown anchor entity `{anchor_name}`"))
            })?;
        let question = registry_question(&entity.profile_token, 0);
        Ok(AssistantTurn::finish(format!(
            "{question}\n\nAnswer: {}",
            entity.name
        )))
    }

    fn hardener(&self, conv: &[ChatMessage]) -> Result<AssistantTurn, BackendError> {
        let task = first_user(conv);
        let question = section(&task, "Previous question:");
        let answer = section(&task, "Ground truth answer:");
        let level = question
            .split_whitespace()
            .find_map(tier_level_of_word)
            .unwrap_or(0);
        let next = (level + 1).min(MAX_OBFUSCATION_LEVEL);
        let entity = self
            .world
            .entity(&EntityId::from_name(&answer))
            .ok_or_else(|| BackendError::Malformed(format!("unknown anchor `{answer}`")))?;
        let step = assistant_count(conv);
        if step == 0 {
            // Research pass before rewriting, as the prompt encourages.
            return Ok(AssistantTurn::call(
                ToolName::Search,
                format!("profiles like {}", tier_word(next)),
            ));
        }
        let harder = registry_question(&entity.profile_token, next);
        Ok(AssistantTurn::finish(format!(
            "{harder}\n\nAnswer: {}",
            entity.name
        )))
    }

    // -- candidate proposer ---------------------------------------------------

    fn candidates(&self, conv: &[ChatMessage], seed: u64) -> AssistantTurn {
        let task = first_user(conv);
        let domain = task
            .lines()
            .find_map(|l| l.strip_prefix("Seed domain: "))
            .unwrap_or("")
            .trim()
            .to_string();
        let n = parse_propose_n(&task).unwrap_or(8);
        let step = assistant_count(conv);
        if step == 0 {
            return AssistantTurn::call(ToolName::Search, domain)
                .with_think("Scanning the domain for obscure names.");
        }
        let mut names: Vec<String> = self
            .world
            .entities_in_domain(&domain)
            .map(|e| e.name.clone())
            .collect();
        let mut shuffler = rng(derive_seed(seed, &["candidates", &task]));
        names.shuffle(&mut shuffler);
        names.truncate(n);
        if names.is_empty() {
            return AssistantTurn::finish("No candidates found.");
        }
        let lines: Vec<String> = names
            .iter()
            .enumerate()
            .map(|(i, name)| format!("Candidate {}: {}", i + 1, name))
            .collect();
        AssistantTurn::finish(lines.join("\n"))
    }

    // -- validator -------------------------------------------------------------

    fn validator(&self, conv: &[ChatMessage], system: &str) -> AssistantTurn {
        let payload = first_user(conv);
        let rubric = system
            .lines()
            .find_map(|l| l.strip_prefix("Rubric: "))
            .unwrap_or("standards");
        let (ok, why) = match rubric {
            "standards" => standards_rules(&payload),
            "factuality" => factuality_rules(&payload),
            "alternative" => alternative_rules(&payload),
            "anchor" => anchor_rules(&payload),
            "equivalence" => {
                let q = field(&payload, "Question: ");
                let truth = field(&payload, "Ground truth: ");
                let candidate = field(&payload, "Agent answer: ");
                let ok = self.equivalence.equivalent(&q, &truth, &candidate);
                (ok, String::new())
            }
            _ => (false, "unknown rubric".to_string()),
        };
        let verdict = if ok { "yes" } else { "no" };
        if why.is_empty() {
            AssistantTurn::finish(verdict)
        } else {
            AssistantTurn::finish(format!("{why}\n{verdict}"))
        }
    }

    // -- categorizer -------------------------------------------------------------

    fn categorizer(&self, conv: &[ChatMessage], system: &str) -> AssistantTurn {
        let text = normalize_name(&first_user(conv));
        let labels: Vec<String> = system
            .lines()
            .nth(2)
            .unwrap_or("")
            .split(',')
            .map(|l| l.trim().to_lowercase())
            .filter(|l| !l.is_empty())
            .collect();
        for label in &labels {
            if label == "other" {
                continue;
            }
            if keywords_for(label)
                .iter()
                .any(|kw| text.contains(&format!(" {kw}")) || text.starts_with(kw))
            {
                return AssistantTurn::finish(label.clone());
            }
        }
        AssistantTurn::finish("other")
    }
}

impl CompletionBackend for MockBackend {
    fn complete(
        &self,
        conversation: &[ChatMessage],
        seed: u64,
    ) -> Result<AssistantTurn, BackendError> {
        self.dispatch(conversation, seed)
    }
}

/// Render the mock registry question for an anchor token at a level. The
/// text must stay free of digits, years and proper names; difficulty is
/// carried by the tier word and the letter-prefixed markers.
pub fn registry_question(profile_token: &str, level: u32) -> String {
    let marker = marker_token(profile_token, level);
    let clue_a = clue_token(profile_token, level, 0);
    let clue_b = clue_token(profile_token, level, 1);
    let abstraction = ABSTRACTIONS[(level as usize) % ABSTRACTIONS.len()];
    format!(
        "Which entity, {abstraction}, matches the registry marker {marker} under scrutiny tier \
         {tier}, with corroborating trait {clue_a} and circumstance {clue_b}?",
        tier = tier_word(level)
    )
}

// ---------------------------------------------------------------------------
// conversation helpers

fn first_user(conv: &[ChatMessage]) -> String {
    conv.iter()
        .find(|m| m.role == ChatRole::User)
        .map(|m| m.content.clone())
        .unwrap_or_default()
}

fn assistant_count(conv: &[ChatMessage]) -> usize {
    conv.iter().filter(|m| m.role == ChatRole::Assistant).count()
}

fn section(text: &str, header: &str) -> String {
    let Some(at) = text.find(header) else {
        return String::new();
    };
    let rest = &text[at + header.len()..];
    let end = rest.find("\n\n").unwrap_or(rest.len());
    rest[..end].trim().to_string()
}

fn field(text: &str, label: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(label))
        .unwrap_or("")
        .trim()
        .to_string()
}

fn tier_level_of_word(word: &str) -> Option<u32> {
    let clean = word.trim_matches(|c: char| !c.is_alphabetic());
    tier_level(clean)
}

// ---------------------------------------------------------------------------
// question parsing

fn trail_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"across (\d+) branch(es)?").unwrap())
}

fn fact_id_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\bf[0-9a-f]{8}\b").unwrap())
}

fn token_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\bx[pm][0-9a-f]{10}\b").unwrap())
}

fn clue_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\bxc[0-9a-f]{10}\b").unwrap())
}

/// Fact-trail question: ids plus the encoded branch count.
pub fn parse_trail_question(question: &str) -> Option<(Vec<String>, u32)> {
    let branches: u32 = trail_re()
        .captures(question)?
        .get(1)?
        .as_str()
        .parse()
        .ok()?;
    let ids: Vec<String> = fact_id_re()
        .find_iter(question)
        .map(|m| m.as_str().to_string())
        .collect();
    if ids.is_empty() {
        return None;
    }
    Some((ids, branches))
}

/// Registry question: the profile/obfuscation marker, the tier level and
/// any clue marks present.
pub fn parse_registry_question(question: &str) -> Option<(String, u32, Vec<String>)> {
    let token = token_re().find(question)?.as_str().to_string();
    let level = question
        .split_whitespace()
        .find_map(tier_level_of_word)
        .unwrap_or(0);
    let clues = clue_re()
        .find_iter(question)
        .map(|m| m.as_str().to_string())
        .collect();
    Some((token, level, clues))
}

fn parse_collect_n(system: &str) -> Option<usize> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"Collect (\d+) new facts").unwrap());
    re.captures(system)?.get(1)?.as_str().parse().ok()
}

fn parse_propose_n(task: &str) -> Option<usize> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"Propose (\d+) candidates").unwrap());
    re.captures(task)?.get(1)?.as_str().parse().ok()
}

fn split_focus_exclusions(task: &str) -> (String, String) {
    match task.find("Excluded information:") {
        Some(at) => {
            let focus = task[..at]
                .replace("Main question or fact:", "")
                .trim()
                .to_string();
            let excluded = task[at + "Excluded information:".len()..].trim().to_string();
            (focus, excluded)
        }
        None => (
            task.replace("Main question or fact:", "").trim().to_string(),
            String::new(),
        ),
    }
}

// ---------------------------------------------------------------------------
// rubric rules

const REFUSAL_MARKS: [&str; 7] = [
    "unknown",
    "unanswerable",
    "not found",
    "cannot",
    "can't",
    "no answer",
    "not enough information",
];

fn is_refusal_text(text: &str) -> bool {
    let t = normalize_name(text);
    REFUSAL_MARKS.iter().any(|m| t.contains(m))
}

fn standards_rules(payload: &str) -> (bool, String) {
    let question = field(payload, "Question: ");
    let answer = field(payload, "Answer: ");
    if question.is_empty() || answer.is_empty() {
        return (false, "missing question or answer".into());
    }
    if !question.trim_end().ends_with('?') {
        return (false, "the question is not interrogative".into());
    }
    let qn = normalize_name(&question);
    let an = normalize_name(&answer);
    if qn.contains(&an) {
        return (false, "the answer is mentioned in the question".into());
    }
    if qn.starts_with("list ") || qn.contains("list all") || qn.contains("name all") {
        return (false, "the question seeks a long-form enumeration".into());
    }
    if answer.split_whitespace().count() > 8 {
        return (false, "the answer is not short-form".into());
    }
    if is_refusal_text(&answer) {
        return (false, "the answer is a refusal".into());
    }
    (true, String::new())
}

fn factuality_rules(payload: &str) -> (bool, String) {
    let mut saw_fact = false;
    let mut saw_reachable = false;
    let normalized_payload = normalize_name(payload);
    for block in payload.split("\nFact: ").skip(1) {
        saw_fact = true;
        let statement = block.lines().next().unwrap_or("").trim();
        let statement_norm = normalize_name(statement);
        let excerpts: Vec<String> = block
            .lines()
            .filter_map(|l| l.strip_prefix("Excerpt: "))
            .map(normalize_name)
            .collect();
        let reachable: Vec<&String> = excerpts
            .iter()
            .filter(|e| !e.contains("[unreachable]"))
            .collect();
        if !reachable.is_empty() {
            saw_reachable = true;
        }
        let negation = format!("it is not true that {statement_norm}");
        if reachable.iter().any(|e| e.contains(&negation)) {
            return (false, format!("a source contradicts: {statement}"));
        }
        if !reachable.iter().any(|e| e.contains(&statement_norm)) {
            return (false, format!("no source supports: {statement}"));
        }
    }
    if saw_fact {
        if !saw_reachable {
            return (false, "every source was unreachable".into());
        }
        return (true, String::new());
    }
    // No structured facts: require the ground truth itself to be attested.
    let truth = normalize_name(&field(payload, "Ground truth: "));
    if !truth.is_empty() && normalized_payload.matches(&truth).count() > 1 {
        (true, String::new())
    } else {
        (false, "the ground truth is not attested by any excerpt".into())
    }
}

fn alternative_rules(payload: &str) -> (bool, String) {
    let alternative = normalize_name(&field(payload, "Alternative answer: "));
    let at = payload.find("Tool outputs:").map(|i| i + "Tool outputs:".len());
    let outputs = at.map(|i| normalize_name(&payload[i..])).unwrap_or_default();
    if alternative.is_empty() || outputs.trim().is_empty() {
        return (false, "no outputs to support the alternative".into());
    }
    if outputs.contains(&alternative) {
        (true, "the tool outputs assert the alternative".into())
    } else {
        (false, "the tool outputs never assert the alternative".into())
    }
}

fn anchor_rules(payload: &str) -> (bool, String) {
    let candidate = field(payload, "Candidate: ");
    let words = candidate.split_whitespace().count();
    if candidate.is_empty() || words > 5 {
        return (false, "not a short-form concrete entity".into());
    }
    if is_refusal_text(&candidate) {
        return (false, "not a real entity".into());
    }
    (true, String::new())
}

fn keywords_for(label: &str) -> Vec<&'static str> {
    match label {
        "movies" => vec!["film", "movie", "actor", "actress", "director", "oscar"],
        "music" => vec!["song", "album", "band", "singer", "quartet", "symphony"],
        "history" => vec!["war", "king", "empire", "century", "ancient", "charter", "archive"],
        "science" => vec!["physics", "chemistry", "element", "species", "observatory", "institute"],
        "sports" => vec!["team", "olympic", "league", "match", "championship"],
        "geography" => vec!["river", "mountain", "city", "country", "valley", "harbor"],
        "art" => vec!["painting", "artist", "museum", "atelier", "sculpture"],
        "politics" => vec!["president", "election", "minister", "parliament", "society"],
        "literature" => vec!["novel", "poet", "author", "gazette"],
        _ => vec![],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tools::mock::{MockWorld, WorldSpec};

    fn world() -> Arc<MockWorld> {
        Arc::new(MockWorld::generate(&WorldSpec {
            seed: 3,
            roots: 2,
            depth: 3,
            fanout: 2,
            ..WorldSpec::default()
        }))
    }

    #[test]
    fn trail_question_round_trip() {
        let q = "Following the documented trail fdeadbeef, f01234567 across 2 branches from Fel Archive, which entity does the final link introduce?";
        let (ids, branches) = parse_trail_question(q).unwrap();
        assert_eq!(ids, vec!["fdeadbeef", "f01234567"]);
        assert_eq!(branches, 2);
    }

    #[test]
    fn registry_question_is_scannable() {
        let w = world();
        let token = &w.entities()[0].profile_token;
        for level in [0u32, 1, 3] {
            let q = registry_question(token, level);
            let (marker, parsed_level, clues) = parse_registry_question(&q).unwrap();
            assert_eq!(parsed_level, level);
            assert_eq!(marker, marker_token(token, level));
            assert_eq!(clues.len(), 2);
            // No bare digit runs and no year-like tokens.
            let year_re = Regex::new(r"\b(1[5-9]\d{2}|20\d{2})\b").unwrap();
            let digit_re = Regex::new(r"\b\d+\b").unwrap();
            assert!(!year_re.is_match(&q), "{q}");
            assert!(!digit_re.is_match(&q), "{q}");
        }
    }

    #[test]
    fn tier_words_cover_all_levels() {
        assert_eq!(tier_level(tier_word(0)), Some(0));
        assert_eq!(tier_level(tier_word(7)), Some(7));
        assert_eq!(tier_word(MAX_OBFUSCATION_LEVEL), "rho");
    }

    #[test]
    fn standards_rules_fire() {
        let leaky = "Question: Is Zotefoams the company called Zotefoams?\nAnswer: Zotefoams";
        assert!(!standards_rules(leaky).0);
        let listy = "Question: List all the kings?\nAnswer: Many";
        assert!(!standards_rules(listy).0);
        let fine = "Question: Which company makes the foam?\nAnswer: Zotefoams";
        assert!(standards_rules(fine).0);
    }

    #[test]
    fn alternative_rules_fire() {
        let supported = "Question: Which is a popular weighing unit?\nGround truth: kilogram\nAlternative answer: pound\nTool outputs:\nthe pound is widely used for weighing";
        assert!(alternative_rules(supported).0);
        let unsupported = "Question: q?\nGround truth: kilogram\nAlternative answer: pound\nTool outputs:\nonly metric units appear in the registry";
        assert!(!alternative_rules(unsupported).0);
    }
}

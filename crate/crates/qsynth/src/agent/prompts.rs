//! Role prompt templates and rubric texts.
//!
//! Each template opens with a stable sentinel line; the deterministic mock
//! backend keys its rule engine off those sentinels, and the parsers in
//! [`super::parse`] enforce the output formats the templates demand.

/// Sentinel first lines, shared between templates and the mock backend.
pub mod sentinel {
    pub const SOLVER: &str = "You are a research solver agent.";
    pub const FACT_SEEKER: &str = "You are a research agent collecting facts.";
    pub const QA_WRITER: &str = "You are a question writer working from a fact pool.";
    pub const VAGUE_QUESTION: &str =
        "You are a question writer creating a deliberately vague search question.";
    pub const HARDENER: &str = "You are a question hardener.";
    pub const CANDIDATES: &str = "You are a research agent proposing candidate entities.";
    pub const VALIDATOR: &str = "You are a strict validator.";
    pub const CATEGORIZER: &str = "You are a topic classifier.";
}

/// Solver role prompt: demands `Answer:` / `Reasoning:` sections.
pub fn solver_prompt() -> String {
    format!(
        "{}\nSolve the question below by searching the web, browsing pages and, when useful, \
         running python. Work step by step and keep going until you can name one concrete \
         answer.\n\nFormat your response exactly as:\nAnswer: [your answer]\n\nReasoning: \
         [how you found it: the searches you ran, the clues you followed, and which details \
         in the question gave the answer away]",
        sentinel::SOLVER
    )
}

/// Researcher fact-seeking prompt. `exclusions` switches in the
/// exclusion-aware variant used during tree construction.
pub fn fact_seeker_prompt(num_facts: usize, with_exclusions: bool) -> String {
    let exclusion_rules = if with_exclusions {
        "\nDo not research, search for, or state facts about entities or details that are \
         explicitly mentioned in the excluded information. If the main input references \"A \
         and B\" and the excluded information references \"A and C\", seek facts only about \
         \"B\".\n"
    } else {
        ""
    };
    format!(
        "{sentinel}\nCollect {num_facts} new facts about the entities and details mentioned or \
         implied in the main input below by searching the web and reading pages. Every fact \
         must be backed by at least one real URL you actually visited: never invent, guess \
         or decorate a URL, and never put punctuation after one. Prefer reputable sources.\
         {exclusion_rules}\nEach fact must be self-contained, specific and uncommon enough \
         that finding it takes real research; avoid pronouns, metadata, navigation text and \
         common knowledge. Name the single new entity each fact introduces. If nothing \
         qualifies, answer exactly: No facts found\n\nProduce the facts in this format:\n\n\
         Fact 1:\n- Fact: ...\n- New entity: ...\n- Sources:\nhttps://...\n\nFact 2:\n...",
        sentinel = sentinel::FACT_SEEKER,
    )
}

/// Render the fact-seeker task body.
pub fn fact_seeker_task(focus: &str, exclusions: &[String]) -> String {
    if exclusions.is_empty() {
        format!("Main question or fact:\n{focus}")
    } else {
        format!(
            "Main question or fact:\n{focus}\n\nExcluded information:\n{}",
            exclusions.join("\n")
        )
    }
}

/// Topdown questioner system prompt: multi-hop QA from a fact pool, strict
/// `Question:` / `Answer:` / `Explanation:` output.
pub fn qa_writer_prompt() -> String {
    format!(
        "{}\nFrom the facts supplied in this conversation, write one very difficult multi-hop \
         question and its answer. Hard rules:\n\
         - Base the question and answer solely on the supplied facts, never on your own \
         knowledge.\n\
         - Link all supplied entities and details together through their factual \
         relationships; reference entities indirectly, naming at most one entity outright.\n\
         - Ask about a single entity and require one concise, singular answer; no long-form \
         answers, no URLs, no markdown emphasis.\n\
         - The question must not state or hint at the answer.\n\
         - The question part ends with a question mark; the answer part carries no \
         sentence-ending punctuation.\n\n\
         Output exactly:\nQuestion: ...?\nAnswer: ...\nExplanation: ...",
        sentinel::QA_WRITER
    )
}

/// Initial user turn for a topdown session.
pub fn qa_initial_task(seed_entity: &str, facts: &[String]) -> String {
    format!(
        "Seed entity: {seed_entity}\nFacts (branch 1):\n{}",
        facts.join("\n")
    )
}

/// Escalation turn: new branch facts join the pool.
pub fn qa_escalation_task(branch_no: usize, facts: &[String]) -> String {
    format!(
        "Question too easy for the solver. Write a harder one that additionally incorporates \
         the new facts below, still linking everything supplied so far.\nFacts (branch \
         {branch_no}):\n{}",
        facts.join("\n")
    )
}

/// Feedback turn after a failed validation.
pub fn qa_feedback_task(rationale: &str) -> String {
    format!(
        "QA invalid, feedback: {rationale}\nProduce a corrected question-answer pair from the \
         same facts, in the same output format."
    )
}

/// Bottom-up initial-question prompt: forbidden-specifics list and strict
/// answer-line format.
pub fn vague_question_prompt() -> String {
    format!(
        "{}\nWrite one search-intensive question whose unique answer is the anchor entity \
         supplied below. Absolutely forbidden in the question: exact years or decades, named \
         locations, organization names, award names, exact numbers, and proper names of any \
         kind. Use only vague time references, general geography and abstract descriptions. \
         Each clue alone must fit many entities, but their intersection must fit exactly one \
        : the anchor. The question must not contain the anchor's name.\n\nFORMAT:\n\
         [your question]\n\nAnswer: [the anchor entity name]",
        sentinel::VAGUE_QUESTION
    )
}

pub fn vague_question_task(anchor_name: &str) -> String {
    format!("Anchor entity: {anchor_name}")
}

/// Hardening prompt: rewrite the question so the solver's cited clues vanish
/// while the answer stays fixed and unique.
pub fn hardener_prompt() -> String {
    format!(
        "{}\nYou receive a question that a solver answered correctly, the correct answer, and \
         the solver's account of how it found the answer. Rewrite the question to be much \
         harder: remove or obfuscate every detail the solver said it used, make descriptions \
         vaguer, require more inference steps: but keep the answer exactly the same. The \
         rewritten question must still have exactly one correct answer; if obfuscation opens \
         up alternatives, add one subtle clue that restores uniqueness. You may research the \
         web for material to weave in.\n\nFORMAT:\n[the harder question]\n\nAnswer: [same \
         answer]",
        sentinel::HARDENER
    )
}

pub fn hardener_task(question: &str, answer: &str, reasoning: &str) -> String {
    format!(
        "Previous question:\n{question}\n\nGround truth answer:\n{answer}\n\nSolver \
         reasoning:\n{reasoning}"
    )
}

/// Researcher prompt for proposing anchor candidates.
pub fn candidates_prompt() -> String {
    format!(
        "{}\nPropose candidate entities from the same topical domain as the seed below. Each \
         candidate must be a real, concrete, short-form entity (a name, not a description) \
         that is plausible yet obscure. Search the web as needed.\n\nOutput one per line:\n\
         Candidate 1: ...\nCandidate 2: ...",
        sentinel::CANDIDATES
    )
}

pub fn candidates_task(n: usize, domain: &str, seed_text: &str) -> String {
    format!("Seed domain: {domain}\nSeed: {seed_text}\nPropose {n} candidates.")
}

/// Which yes/no rubric a validator call applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rubric {
    /// Question-answer standards: single short-form answer, natural,
    /// complex, answer not leaked.
    Standards,
    /// Do the collected sources fully support the question and ground truth?
    Factuality,
    /// Do the solver's tool outputs reasonably support its alternative
    /// answer?
    AlternativeSupport,
    /// Is a candidate anchor rare, realistic, short-form and concrete?
    AnchorQuality,
    /// Is the agent answer semantically equivalent to the ground truth?
    Equivalence,
}

impl Rubric {
    pub fn name(&self) -> &'static str {
        match self {
            Rubric::Standards => "standards",
            Rubric::Factuality => "factuality",
            Rubric::AlternativeSupport => "alternative",
            Rubric::AnchorQuality => "anchor",
            Rubric::Equivalence => "equivalence",
        }
    }

    pub fn template(&self) -> String {
        let body = match self {
            Rubric::Standards => {
                "Decide whether the question-answer pair below is valid. Answer 'no' if the \
                 question is unreadable or unnatural; if it asks about multiple entities or \
                 wants a long-form answer; if it lacks complexity (it should need multi-hop, \
                 compositional, abductive, mathematical or temporal reasoning); if the answer \
                 is directly deducible from the question or mentioned in it, directly or \
                 indirectly; or if the answer is a refusal. Otherwise answer 'yes'. Do not \
                 use your own knowledge of the subject and do not use any tool."
            }
            Rubric::Factuality => {
                "Decide whether the source excerpts below fully support the question and its \
                 ground-truth answer. Answer 'no' if any supporting fact is contradicted, \
                 unsupported or ambiguous in the excerpts. Otherwise answer 'yes'. Judge only \
                 from the excerpts; do not use your own knowledge and do not use any tool."
            }
            Rubric::AlternativeSupport => {
                "A solver gave an answer that conflicts with the ground truth. Decide whether \
                 the solver's tool outputs below reasonably support its alternative answer to \
                 the question. Answer 'yes' only if the outputs genuinely back the \
                 alternative; otherwise answer 'no'. Judge only from the outputs; do not use \
                 your own knowledge and do not use any tool."
            }
            Rubric::AnchorQuality => {
                "Decide whether the candidate entity below would make a good ground-truth \
                 anchor: it must be a rare but real, concrete, short-form entity: a name, \
                 not a sentence or description. Answer 'yes' or 'no'. Do not use any tool."
            }
            Rubric::Equivalence => {
                "Given the question, the ground-truth answer and the agent answer, decide \
                 whether the agent answer is semantically equivalent to the ground truth in \
                 the context of the question. Numbers match only when identical to the 5th \
                 decimal digit, and large integers must match exactly. Mathematical \
                 expressions compare by value, whatever their format. Dates match across \
                 formats, but a year alone does not match a full date. For comparisons or \
                 binary choices, any phrasing that reflects the same choice matches. Extra \
                 content is fine unless it contradicts the ground truth. A refusal or \
                 don't-know matches only a ground truth that is itself a refusal. Do not use \
                 your own knowledge and do not use any tool."
            }
        };
        format!(
            "{}\nRubric: {}\n{}\nAnswer shortly yes or no only.",
            sentinel::VALIDATOR,
            self.name(),
            body
        )
    }
}

/// Categorizer prompt; the reply must be exactly one label.
pub fn categorize_prompt(taxonomy: &[String]) -> String {
    format!(
        "{}\nAssign the text below to exactly one of these domain labels:\n{}\nReply with the \
         single label, nothing else. Use 'other' if none fits.",
        sentinel::CATEGORIZER,
        taxonomy.join(", ")
    )
}

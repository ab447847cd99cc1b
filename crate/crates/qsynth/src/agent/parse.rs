//! Parsers for the structured output formats the role prompts demand.

use crate::model::normalize_name;

/// `Answer: ... Reasoning: ...` sections from a solver reply.
pub fn answer_reasoning(text: &str) -> Option<(String, String)> {
    let answer_at = find_label(text, "Answer:")?;
    let after_answer = &text[answer_at + "Answer:".len()..];
    match find_label(after_answer, "Reasoning:") {
        Some(reason_at) => {
            let answer = after_answer[..reason_at].trim();
            let reasoning = after_answer[reason_at + "Reasoning:".len()..].trim();
            if answer.is_empty() {
                None
            } else {
                Some((answer.to_string(), reasoning.to_string()))
            }
        }
        None => {
            let answer = after_answer.trim();
            if answer.is_empty() {
                None
            } else {
                Some((answer.to_string(), String::new()))
            }
        }
    }
}

/// `Question: ...? Answer: ... Explanation: ...` from a questioner reply.
pub fn question_answer_explanation(text: &str) -> Option<(String, String, String)> {
    let q_at = find_label(text, "Question:")?;
    let after_q = &text[q_at + "Question:".len()..];
    let a_at = find_label(after_q, "Answer:")?;
    let question = after_q[..a_at].trim().to_string();
    let after_a = &after_q[a_at + "Answer:".len()..];
    let (answer, explanation) = match find_label(after_a, "Explanation:") {
        Some(e_at) => (
            after_a[..e_at].trim().to_string(),
            after_a[e_at + "Explanation:".len()..].trim().to_string(),
        ),
        None => (after_a.trim().to_string(), String::new()),
    };
    if question.is_empty() || answer.is_empty() {
        None
    } else {
        Some((question, answer, explanation))
    }
}

/// `[question] Answer: [entity]` from the vague-question and hardener
/// formats. The question is everything before the final `Answer:` label.
pub fn question_with_answer_line(text: &str) -> Option<(String, String)> {
    let a_at = text.rfind("Answer:")?;
    let question = text[..a_at].trim().to_string();
    let answer = text[a_at + "Answer:".len()..].trim().to_string();
    if question.is_empty() || answer.is_empty() {
        None
    } else {
        Some((question, answer))
    }
}

/// One parsed fact block from the researcher's output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactBlock {
    pub statement: String,
    pub new_entity: Option<String>,
    pub urls: Vec<String>,
}

/// The sentinel reply for an exhausted focus.
pub const NO_FACTS: &str = "No facts found";

/// Parse `Fact N: / - Fact: / - New entity: / - Sources:` blocks.
/// Returns `None` when the text contains no recognizable block.
pub fn fact_blocks(text: &str) -> Option<Vec<FactBlock>> {
    let mut blocks = Vec::new();
    let mut current: Option<FactBlock> = None;
    let mut in_sources = false;
    for raw in text.lines() {
        let line = raw.trim();
        if is_fact_header(line) {
            if let Some(block) = current.take() {
                if !block.statement.is_empty() {
                    blocks.push(block);
                }
            }
            current = Some(FactBlock {
                statement: String::new(),
                new_entity: None,
                urls: Vec::new(),
            });
            in_sources = false;
        } else if let Some(rest) = line.strip_prefix("- Fact:") {
            if let Some(block) = current.as_mut() {
                block.statement = rest.trim().to_string();
                in_sources = false;
            }
        } else if let Some(rest) = line.strip_prefix("- New entity:") {
            if let Some(block) = current.as_mut() {
                let name = rest.trim();
                if !name.is_empty() {
                    block.new_entity = Some(name.to_string());
                }
                in_sources = false;
            }
        } else if line.strip_prefix("- Sources:").is_some() {
            in_sources = true;
        } else if in_sources && (line.starts_with("http://") || line.starts_with("https://")) {
            if let Some(block) = current.as_mut() {
                block.urls.push(strip_url_punctuation(line));
            }
        }
    }
    if let Some(block) = current.take() {
        if !block.statement.is_empty() {
            blocks.push(block);
        }
    }
    if blocks.is_empty() {
        None
    } else {
        Some(blocks)
    }
}

fn is_fact_header(line: &str) -> bool {
    let Some(rest) = line.strip_prefix("Fact ") else {
        return false;
    };
    let digits: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
    !digits.is_empty() && rest[digits.len()..].starts_with(':')
}

/// Models occasionally trail a period after a URL despite instructions.
fn strip_url_punctuation(url: &str) -> String {
    url.trim_end_matches(['.', ',', ';', ':', '!', '?']).to_string()
}

/// Strict yes/no verdict parse. The verdict must stand alone: the whole
/// reply, its first word, or its last non-empty line. Any preamble is kept
/// as the rationale.
pub fn yes_no(text: &str) -> Option<(bool, String)> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return None;
    }
    let clean = |s: &str| s.trim().trim_end_matches(['.', '!']).to_lowercase();
    let whole = clean(trimmed);
    if whole == "yes" || whole == "no" {
        return Some((whole == "yes", String::new()));
    }
    let lines: Vec<&str> = trimmed.lines().filter(|l| !l.trim().is_empty()).collect();
    if let Some(last) = lines.last() {
        let last_clean = clean(last);
        if last_clean == "yes" || last_clean == "no" {
            let rationale = lines[..lines.len() - 1].join("\n");
            return Some((last_clean == "yes", rationale));
        }
    }
    let first_word = trimmed
        .split(|c: char| c.is_whitespace() || c == ',' || c == '.' || c == ':')
        .next()
        .unwrap_or("");
    let first_clean = first_word.to_lowercase();
    if first_clean == "yes" || first_clean == "no" {
        let rationale = trimmed[first_word.len()..].trim().to_string();
        return Some((first_clean == "yes", rationale));
    }
    None
}

/// `Candidate N: name` lines from the candidate-proposal format.
pub fn candidates(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for raw in text.lines() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix("Candidate ") {
            if let Some(colon) = rest.find(':') {
                let name = rest[colon + 1..].trim();
                if !name.is_empty() {
                    out.push(name.to_string());
                }
            }
        }
    }
    out
}

/// Find a label at a line start (or text start), so prose containing the
/// word mid-sentence is not mistaken for a section.
fn find_label(text: &str, label: &str) -> Option<usize> {
    let mut from = 0;
    while let Some(rel) = text[from..].find(label) {
        let at = from + rel;
        if at == 0 || text.as_bytes()[at - 1] == b'\n' {
            return Some(at);
        }
        from = at + label.len();
    }
    None
}

/// Fallback novel-entity extraction when the researcher omitted the
/// `- New entity:` line: the longest capitalized word run that is not
/// excluded.
pub fn guess_novel_entity(statement: &str, excluded_names: &[String]) -> Option<String> {
    let excluded: Vec<String> = excluded_names.iter().map(|n| normalize_name(n)).collect();
    let words: Vec<&str> = statement.split_whitespace().collect();
    let mut best: Option<String> = None;
    let mut i = 0;
    while i < words.len() {
        if starts_capitalized(words[i]) {
            let mut j = i;
            while j < words.len() && starts_capitalized(words[j]) {
                j += 1;
            }
            let span = words[i..j]
                .join(" ")
                .trim_end_matches(['.', ',', ';', ':'])
                .to_string();
            let norm = normalize_name(&span);
            if !excluded.contains(&norm)
                && best.as_ref().map_or(true, |b| span.len() > b.len())
            {
                best = Some(span);
            }
            i = j;
        } else {
            i += 1;
        }
    }
    best
}

fn starts_capitalized(word: &str) -> bool {
    word.chars().next().is_some_and(|c| c.is_uppercase())
}

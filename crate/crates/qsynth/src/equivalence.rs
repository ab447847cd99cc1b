//! Judged answer equivalence.
//!
//! The pipeline-wide notion of "the solver's answer matches the ground
//! truth": numeric equality to the 5th decimal digit with exact matching for
//! integers, math expressions compared by value or canonical form, dates
//! equivalent across formats but never year-only against a full date,
//! binary-choice and comparison semantics resolved against the question,
//! refusals equivalent only to refusal ground truths, and extra
//! non-contradicting content tolerated.
//!
//! [`RuleEquivalence`] implements the rules mechanically and is the default
//! everywhere; live runs may swap in an LLM panel behind the same trait
//! (see `filter::PanelEquivalence`). Every error or unresolvable case
//! answers "not equivalent".

use std::sync::OnceLock;

use regex::Regex;

use crate::model::normalize_name;

/// Pipeline-wide answer equivalence judgment.
pub trait AnswerEquivalence: Send + Sync {
    fn equivalent(&self, question: &str, ground_truth: &str, candidate: &str) -> bool;
}

/// Mechanical rule engine implementing the equivalence contract.
#[derive(Debug, Clone, Default)]
pub struct RuleEquivalence;

impl AnswerEquivalence for RuleEquivalence {
    fn equivalent(&self, question: &str, ground_truth: &str, candidate: &str) -> bool {
        let truth = clean(ground_truth);
        let cand = clean(candidate);
        if truth.is_empty() {
            return false;
        }
        if norm(&truth) == norm(&cand) {
            return true;
        }

        // Refusals match refusals only.
        if is_refusal(&cand) {
            return is_refusal(&truth);
        }
        if is_refusal(&truth) {
            return false;
        }

        // Question-driven comparison / binary choice semantics.
        if let Some(result) = choice_equivalence(question, &truth, &cand) {
            return result;
        }

        // Numbers (digits, words, fractions, expressions reducing to one).
        match (parse_numeric(&truth), parse_numeric(&cand)) {
            (Some(a), Some(b)) => return numbers_match(&truth, &cand, a, b),
            (None, None) => {}
            // One side numeric, the other not: fall through to dates and
            // containment (a bare year is numeric but may be a date).
            _ => {}
        }

        // Symbolic math expressions by canonical form.
        if let (Some(a), Some(b)) = (canonical_expr(&truth), canonical_expr(&cand)) {
            if a == b {
                return true;
            }
        }

        // Dates across formats; candidate must carry every field the truth
        // specifies.
        if let (Some(t), Some(c)) = (parse_date(&truth), parse_date(&cand)) {
            return date_covers(&t, &c);
        }

        // Extra content: the candidate asserts the truth without negating it.
        contains_unnegated(&cand, &truth)
    }
}

// ---------------------------------------------------------------------------
// cleanup

/// Strip markdown, math delimiters and trailing punctuation.
fn clean(text: &str) -> String {
    let mut s = text.trim().to_string();
    s = s.replace("**", "").replace('*', "");
    // Unwrap \boxed{...} (possibly nested in surrounding prose).
    while let Some(at) = s.find("\\boxed{") {
        let open = at + "\\boxed{".len();
        let mut depth = 1usize;
        let mut end = None;
        for (i, c) in s[open..].char_indices() {
            match c {
                '{' => depth += 1,
                '}' => {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(open + i);
                        break;
                    }
                }
                _ => {}
            }
        }
        match end {
            Some(e) => {
                let inner = s[open..e].to_string();
                s.replace_range(at..e + 1, &inner);
            }
            None => break,
        }
    }
    s = s.replace('$', "");
    s.trim()
        .trim_end_matches(['.', '!'])
        .trim()
        .to_string()
}

fn norm(text: &str) -> String {
    normalize_name(text)
}

// ---------------------------------------------------------------------------
// refusals

const REFUSAL_PHRASES: [&str; 16] = [
    "i don't know",
    "i do not know",
    "don't have enough information",
    "do not have enough information",
    "not enough information",
    "insufficient information",
    "missing information",
    "cannot",
    "can't",
    "unable to",
    "no answer",
    "unanswerable",
    "refuse",
    "abstain",
    "not found",
    "unknown",
];

fn is_refusal(text: &str) -> bool {
    let t = norm(text);
    if t.is_empty() {
        return true;
    }
    REFUSAL_PHRASES.iter().any(|p| t.contains(p))
        || t == "undetermined"
        || t == "inconclusive"
        || t == "n/a"
}

// ---------------------------------------------------------------------------
// numbers

/// Parse decimals, thousands separators, simple fractions, small word
/// numbers, and arithmetic expressions that fold to a constant.
fn parse_numeric(text: &str) -> Option<f64> {
    let t = norm(text);
    let compact = t.replace(',', "");
    if let Ok(v) = compact.trim().parse::<f64>() {
        return Some(v);
    }
    if let Some(v) = parse_word_number(&t) {
        return Some(v);
    }
    // Expressions like 3/4, (1+2)/3, 2^3.
    if let Some(CanonExpr::Num(n)) = canonical_expr(text) {
        return Some(n.0);
    }
    None
}

fn integer_literal(text: &str) -> Option<i128> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"^[+-]?\d+$").unwrap());
    let compact = norm(text).replace(',', "");
    if re.is_match(compact.trim()) {
        compact.trim().parse().ok()
    } else {
        None
    }
}

/// Numbers are the same only when identical to the 5th decimal digit;
/// integer answers must match exactly at any magnitude.
fn numbers_match(truth_text: &str, cand_text: &str, a: f64, b: f64) -> bool {
    if let (Some(x), Some(y)) = (integer_literal(truth_text), integer_literal(cand_text)) {
        return x == y;
    }
    (a - b).abs() < 1e-5
}

fn parse_word_number(t: &str) -> Option<f64> {
    const UNITS: [(&str, f64); 21] = [
        ("zero", 0.0),
        ("one", 1.0),
        ("two", 2.0),
        ("three", 3.0),
        ("four", 4.0),
        ("five", 5.0),
        ("six", 6.0),
        ("seven", 7.0),
        ("eight", 8.0),
        ("nine", 9.0),
        ("ten", 10.0),
        ("eleven", 11.0),
        ("twelve", 12.0),
        ("thirteen", 13.0),
        ("fourteen", 14.0),
        ("fifteen", 15.0),
        ("sixteen", 16.0),
        ("seventeen", 17.0),
        ("eighteen", 18.0),
        ("nineteen", 19.0),
        ("twenty", 20.0),
    ];
    const TENS: [(&str, f64); 8] = [
        ("twenty", 20.0),
        ("thirty", 30.0),
        ("forty", 40.0),
        ("fifty", 50.0),
        ("sixty", 60.0),
        ("seventy", 70.0),
        ("eighty", 80.0),
        ("ninety", 90.0),
    ];
    let words: Vec<&str> = t.split(['-', ' ']).filter(|w| !w.is_empty()).collect();
    match words.as_slice() {
        [w] => UNITS
            .iter()
            .chain(TENS.iter())
            .find(|(name, _)| name == w)
            .map(|(_, v)| *v),
        [tens, unit] => {
            let t_val = TENS.iter().find(|(name, _)| name == tens)?.1;
            let u_val = UNITS.iter().take(10).find(|(name, _)| name == unit)?.1;
            Some(t_val + u_val)
        }
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// math expressions

/// Canonicalized expression: sums and products flattened and sorted,
/// constants folded, division as negative powers, subtraction as negative
/// coefficients. Structural equality then decides `similar`.
#[derive(Debug, Clone, PartialEq, PartialOrd)]
enum CanonExpr {
    Num(Ordered),
    Var(String),
    Sum(Vec<CanonExpr>),
    Prod(Vec<CanonExpr>),
    Pow(Box<CanonExpr>, Box<CanonExpr>),
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
struct Ordered(f64);

fn canonical_expr(text: &str) -> Option<CanonExpr> {
    let prepared = prepare_latex(text);
    // Reject anything that does not look like math to avoid canonicalizing
    // prose.
    if !prepared
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || " +-*/^(){}._".contains(c))
    {
        return None;
    }
    if prepared.trim().is_empty() {
        return None;
    }
    let mut p = ExprParser {
        chars: prepared.chars().collect(),
        pos: 0,
    };
    let e = p.parse_sum()?;
    p.skip_ws();
    if p.pos != p.chars.len() {
        return None;
    }
    Some(normalize_expr(e))
}

/// Translate the latex subset into plain operators.
fn prepare_latex(text: &str) -> String {
    let mut s = clean(text);
    s = s
        .replace("\\left", "")
        .replace("\\right", "")
        .replace("\\cdot", "*")
        .replace("\\times", "*")
        .replace("\\,", " ")
        .replace("\\;", " ");
    // \frac{A}{B} -> ((A)/(B)), innermost first.
    while let Some(at) = s.rfind("\\frac") {
        let rest = &s[at + "\\frac".len()..];
        let Some((a, after_a)) = read_group(rest) else {
            return String::from("\u{0}");
        };
        let Some((b, after_b)) = read_group(after_a) else {
            return String::from("\u{0}");
        };
        let consumed = rest.len() - after_b.len();
        let replacement = format!("(({a})/({b}))");
        s.replace_range(at..at + "\\frac".len() + consumed, &replacement);
    }
    s
}

/// Read one `{...}` group, returning its body and the remainder.
fn read_group(text: &str) -> Option<(String, &str)> {
    let rest = text.trim_start();
    let mut chars = rest.char_indices();
    let (_, first) = chars.next()?;
    if first != '{' {
        return None;
    }
    let mut depth = 1;
    for (i, c) in chars {
        match c {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some((rest[1..i].to_string(), &rest[i + 1..]));
                }
            }
            _ => {}
        }
    }
    None
}

struct ExprParser {
    chars: Vec<char>,
    pos: usize,
}

impl ExprParser {
    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn parse_sum(&mut self) -> Option<RawExpr> {
        let mut terms = vec![(1.0, self.parse_product()?)];
        while let Some(op) = self.peek() {
            match op {
                '+' => {
                    self.pos += 1;
                    terms.push((1.0, self.parse_product()?));
                }
                '-' => {
                    self.pos += 1;
                    terms.push((-1.0, self.parse_product()?));
                }
                _ => break,
            }
        }
        if terms.len() == 1 && terms[0].0 == 1.0 {
            return Some(terms.pop().unwrap().1);
        }
        Some(RawExpr::Sum(terms))
    }

    fn parse_product(&mut self) -> Option<RawExpr> {
        let mut factors = vec![(false, self.parse_unary()?)];
        loop {
            match self.peek() {
                Some('*') => {
                    self.pos += 1;
                    factors.push((false, self.parse_unary()?));
                }
                Some('/') => {
                    self.pos += 1;
                    factors.push((true, self.parse_unary()?));
                }
                // Implicit multiplication: `2x`, `a b`, `a(b+c)`, `a \frac..`.
                Some(c) if c.is_ascii_alphanumeric() || c == '(' => {
                    factors.push((false, self.parse_unary()?));
                }
                _ => break,
            }
        }
        if factors.len() == 1 && !factors[0].0 {
            return Some(factors.pop().unwrap().1);
        }
        Some(RawExpr::Prod(factors))
    }

    fn parse_unary(&mut self) -> Option<RawExpr> {
        match self.peek() {
            Some('-') => {
                self.pos += 1;
                Some(RawExpr::Neg(Box::new(self.parse_unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.parse_unary()
            }
            _ => self.parse_power(),
        }
    }

    fn parse_power(&mut self) -> Option<RawExpr> {
        let base = self.parse_atom()?;
        if self.peek() == Some('^') {
            self.pos += 1;
            // Allow ^{...} and ^n.
            let exp = if self.peek() == Some('{') {
                self.pos += 1;
                let inner = self.parse_sum()?;
                if self.peek() != Some('}') {
                    return None;
                }
                self.pos += 1;
                inner
            } else {
                self.parse_unary()?
            };
            return Some(RawExpr::Pow(Box::new(base), Box::new(exp)));
        }
        Some(base)
    }

    fn parse_atom(&mut self) -> Option<RawExpr> {
        match self.peek() {
            Some('(') | Some('{') => {
                let close = if self.peek() == Some('(') { ')' } else { '}' };
                self.pos += 1;
                let inner = self.parse_sum()?;
                if self.peek() != Some(close) {
                    return None;
                }
                self.pos += 1;
                Some(inner)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => {
                let start = self.pos;
                while self
                    .chars
                    .get(self.pos)
                    .is_some_and(|c| c.is_ascii_digit() || *c == '.')
                {
                    self.pos += 1;
                }
                let text: String = self.chars[start..self.pos].iter().collect();
                text.parse::<f64>().ok().map(RawExpr::Num)
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self
                    .chars
                    .get(self.pos)
                    .is_some_and(|c| c.is_ascii_alphabetic())
                {
                    self.pos += 1;
                }
                let name: String = self.chars[start..self.pos].iter().collect();
                Some(RawExpr::Var(name.to_lowercase()))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
enum RawExpr {
    Num(f64),
    Var(String),
    Sum(Vec<(f64, RawExpr)>),
    Prod(Vec<(bool, RawExpr)>),
    Pow(Box<RawExpr>, Box<RawExpr>),
    Neg(Box<RawExpr>),
}

fn normalize_expr(e: RawExpr) -> CanonExpr {
    match e {
        RawExpr::Num(n) => CanonExpr::Num(Ordered(n)),
        RawExpr::Var(v) => CanonExpr::Var(v),
        RawExpr::Neg(inner) => mul_canon(vec![
            CanonExpr::Num(Ordered(-1.0)),
            normalize_expr(*inner),
        ]),
        RawExpr::Pow(base, exp) => {
            let b = normalize_expr(*base);
            let x = normalize_expr(*exp);
            match (&b, &x) {
                (CanonExpr::Num(a), CanonExpr::Num(e)) => CanonExpr::Num(Ordered(a.0.powf(e.0))),
                _ => CanonExpr::Pow(Box::new(b), Box::new(x)),
            }
        }
        RawExpr::Prod(factors) => {
            let mut parts = Vec::new();
            for (is_div, f) in factors {
                let canon = normalize_expr(f);
                if is_div {
                    parts.push(invert(canon));
                } else {
                    parts.push(canon);
                }
            }
            mul_canon(parts)
        }
        RawExpr::Sum(terms) => {
            let mut parts = Vec::new();
            for (sign, t) in terms {
                let canon = normalize_expr(t);
                if sign < 0.0 {
                    parts.push(mul_canon(vec![CanonExpr::Num(Ordered(-1.0)), canon]));
                } else {
                    parts.push(canon);
                }
            }
            add_canon(parts)
        }
    }
}

fn invert(e: CanonExpr) -> CanonExpr {
    match e {
        CanonExpr::Num(n) if n.0 != 0.0 => CanonExpr::Num(Ordered(1.0 / n.0)),
        other => CanonExpr::Pow(Box::new(other), Box::new(CanonExpr::Num(Ordered(-1.0)))),
    }
}

fn mul_canon(parts: Vec<CanonExpr>) -> CanonExpr {
    let mut coeff = 1.0;
    let mut rest = Vec::new();
    for p in parts {
        match p {
            CanonExpr::Num(n) => coeff *= n.0,
            CanonExpr::Prod(inner) => {
                for q in inner {
                    match q {
                        CanonExpr::Num(n) => coeff *= n.0,
                        other => rest.push(other),
                    }
                }
            }
            other => rest.push(other),
        }
    }
    if rest.is_empty() {
        return CanonExpr::Num(Ordered(round_tiny(coeff)));
    }
    rest.sort_by(|a, b| render(a).cmp(&render(b)));
    if coeff != 1.0 {
        rest.insert(0, CanonExpr::Num(Ordered(round_tiny(coeff))));
    }
    if rest.len() == 1 {
        rest.pop().unwrap()
    } else {
        CanonExpr::Prod(rest)
    }
}

fn add_canon(parts: Vec<CanonExpr>) -> CanonExpr {
    let mut constant = 0.0;
    let mut rest = Vec::new();
    for p in parts {
        match p {
            CanonExpr::Num(n) => constant += n.0,
            CanonExpr::Sum(inner) => {
                for q in inner {
                    match q {
                        CanonExpr::Num(n) => constant += n.0,
                        other => rest.push(other),
                    }
                }
            }
            other => rest.push(other),
        }
    }
    if rest.is_empty() {
        return CanonExpr::Num(Ordered(round_tiny(constant)));
    }
    rest.sort_by(|a, b| render(a).cmp(&render(b)));
    if constant != 0.0 {
        rest.push(CanonExpr::Num(Ordered(round_tiny(constant))));
    }
    if rest.len() == 1 {
        rest.pop().unwrap()
    } else {
        CanonExpr::Sum(rest)
    }
}

fn round_tiny(v: f64) -> f64 {
    let r = (v * 1e9).round() / 1e9;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn render(e: &CanonExpr) -> String {
    match e {
        CanonExpr::Num(n) => format!("#{}", n.0),
        CanonExpr::Var(v) => format!("${v}"),
        CanonExpr::Sum(parts) => format!("S({})", parts.iter().map(render).collect::<Vec<_>>().join(",")),
        CanonExpr::Prod(parts) => format!("P({})", parts.iter().map(render).collect::<Vec<_>>().join(",")),
        CanonExpr::Pow(b, x) => format!("W({},{})", render(b), render(x)),
    }
}

impl Eq for CanonExpr {}

// ---------------------------------------------------------------------------
// dates

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct DateParts {
    year: i32,
    month: Option<u32>,
    day: Option<u32>,
}

const MONTHS: [&str; 12] = [
    "january", "february", "march", "april", "may", "june", "july", "august", "september",
    "october", "november", "december",
];

fn month_of(word: &str) -> Option<u32> {
    let w = word.trim_matches(|c: char| !c.is_alphabetic()).to_lowercase();
    if w.len() < 3 {
        return None;
    }
    MONTHS
        .iter()
        .position(|m| m.starts_with(&w) && w.len() >= 3)
        .map(|i| i as u32 + 1)
}

fn parse_date(text: &str) -> Option<DateParts> {
    let t = norm(text);
    static ISO: OnceLock<Regex> = OnceLock::new();
    let iso = ISO.get_or_init(|| Regex::new(r"^(\d{4})-(\d{1,2})(?:-(\d{1,2}))?$").unwrap());
    if let Some(c) = iso.captures(t.trim()) {
        return Some(DateParts {
            year: c.get(1)?.as_str().parse().ok()?,
            month: c.get(2).and_then(|m| m.as_str().parse().ok()),
            day: c.get(3).and_then(|d| d.as_str().parse().ok()),
        });
    }
    static DMY: OnceLock<Regex> = OnceLock::new();
    let dmy = DMY.get_or_init(|| Regex::new(r"^(\d{1,2})[-/](\d{1,2})[-/](\d{4})$").unwrap());
    if let Some(c) = dmy.captures(t.trim()) {
        // Day-first convention; month greater than 12 flips the reading.
        let a: u32 = c.get(1)?.as_str().parse().ok()?;
        let b: u32 = c.get(2)?.as_str().parse().ok()?;
        let (day, month) = if b > 12 { (b, a) } else { (a, b) };
        return Some(DateParts {
            year: c.get(3)?.as_str().parse().ok()?,
            month: Some(month),
            day: Some(day),
        });
    }

    // Word forms: "14 march 1995", "march 14 1995", "march 1995", "1995".
    let words: Vec<&str> = t.split_whitespace().collect();
    let mut year = None;
    let mut month = None;
    let mut day = None;
    for w in &words {
        let wordy = w.trim_matches(|c: char| !c.is_alphanumeric());
        if let Ok(n) = wordy.parse::<i32>() {
            if (1000..=2999).contains(&n) && year.is_none() {
                year = Some(n);
            } else if (1..=31).contains(&n) && day.is_none() {
                day = Some(n as u32);
            } else {
                return None;
            }
        } else if let Some(m) = month_of(wordy) {
            if month.is_some() {
                return None;
            }
            month = Some(m);
        } else {
            return None;
        }
    }
    let year = year?;
    if day.is_some() && month.is_none() {
        return None;
    }
    Some(DateParts { year, month, day })
}

/// Every field the truth specifies must be present and equal in the
/// candidate; the candidate may be more precise, never less.
fn date_covers(truth: &DateParts, cand: &DateParts) -> bool {
    if truth.year != cand.year {
        return false;
    }
    if let Some(tm) = truth.month {
        if cand.month != Some(tm) {
            return false;
        }
    }
    if let Some(td) = truth.day {
        if cand.day != Some(td) {
            return false;
        }
    }
    true
}

// ---------------------------------------------------------------------------
// comparisons and binary choices

/// Resolve comparison/binary-choice semantics against the question.
/// Returns `None` when the question provides no usable structure.
fn choice_equivalence(question: &str, truth: &str, cand: &str) -> Option<bool> {
    let truth_n = norm(truth);
    let cand_n = norm(cand);

    // Yes/no ground truths on comparative questions.
    if truth_n == "yes" || truth_n == "no" {
        let expected_yes = truth_n == "yes";
        if let Some(c) = explicit_yes_no(&cand_n) {
            return Some(c == expected_yes);
        }
        if let Some((a, cmp, b)) = comparative_question(question) {
            if let Some(asserted_yes) = comparative_assertion(&cand_n, &a, &cmp, &b) {
                return Some(asserted_yes == expected_yes);
            }
        }
        // A negation with no other signal reads as "no".
        if has_negation(&cand_n) {
            return Some(!expected_yes);
        }
        return Some(false);
    }

    // Option ground truths on "X or Y" questions.
    let (opt_a, opt_b) = options_of(question)?;
    let truth_opt = if option_matches(&truth_n, &opt_a) {
        opt_a.clone()
    } else if option_matches(&truth_n, &opt_b) {
        opt_b.clone()
    } else {
        return None;
    };
    let other = if truth_opt == opt_a {
        opt_b.clone()
    } else {
        opt_a.clone()
    };

    if cand_n.contains("both") || cand_n.contains("same time") || cand_n.contains("neither") {
        return Some(false);
    }
    // Ordering assertions decide the winner regardless of mention order.
    if let Some(winner) = ordering_winner(&cand_n, &opt_a, &opt_b) {
        return Some(winner == truth_opt);
    }
    let mentions_truth = cand_n.contains(&truth_opt);
    let mentions_other = cand_n.contains(&other);
    match (mentions_truth, mentions_other) {
        (true, false) => Some(!has_negation(&cand_n)),
        (false, true) => Some(false),
        (true, true) => {
            // "C is better than D" puts the asserted choice first.
            let t_at = cand_n.find(&truth_opt).unwrap();
            let o_at = cand_n.find(&other).unwrap();
            Some(t_at < o_at && !has_negation(&cand_n))
        }
        (false, false) => None,
    }
}

fn explicit_yes_no(cand: &str) -> Option<bool> {
    let first = cand.split([' ', ',', ':', ';']).next().unwrap_or("");
    match first {
        "yes" | "yeah" | "correct" | "indeed" => Some(true),
        "no" | "nope" | "incorrect" => Some(false),
        _ => None,
    }
}

fn has_negation(text: &str) -> bool {
    let padded = format!(" {text} ");
    [" not ", " no ", " never ", "n't ", " without "]
        .iter()
        .any(|n| padded.contains(n))
}

/// `is A <cmp> than B?`: subject, comparative, object.
fn comparative_question(question: &str) -> Option<(String, String, String)> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(
            r"(?i)\b(?:is|are|was|were|does|did)\s+(.+?)\s+(better|worse|bigger|smaller|larger|older|younger|faster|slower|higher|lower|greater|earlier|later)\s+than\s+(.+?)\s*\?",
        )
        .unwrap()
    });
    let c = re.captures(question)?;
    Some((
        norm(c.get(1)?.as_str()),
        norm(c.get(2)?.as_str()),
        norm(c.get(3)?.as_str()),
    ))
}

/// Did the candidate assert `A <cmp> B` (yes) or `B <cmp> A` / a negation
/// (no)?
fn comparative_assertion(cand: &str, a: &str, cmp: &str, b: &str) -> Option<bool> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(r"(.+?)\s+(?:is|are|was|were)\s+(not\s+)?(\w+)\s+than\s+(.+)").unwrap()
    });
    let c = re.captures(cand)?;
    let x = norm(c.get(1)?.as_str());
    let negated = c.get(2).is_some();
    let word = norm(c.get(3)?.as_str());
    let y = norm(c.get(4)?.as_str());
    if word != cmp {
        return None;
    }
    let forward = option_matches(&x, a) && option_matches(&y, b);
    let reversed = option_matches(&x, b) && option_matches(&y, a);
    if forward {
        Some(!negated)
    } else if reversed {
        Some(negated)
    } else {
        None
    }
}

/// Trailing `..., X or Y?` options of a choice question.
fn options_of(question: &str) -> Option<(String, String)> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"([^,?]+?)\s+or\s+([^,?]+?)\s*\?\s*$").unwrap());
    let c = re.captures(question)?;
    Some((norm(c.get(1)?.as_str()), norm(c.get(2)?.as_str())))
}

fn option_matches(text: &str, option: &str) -> bool {
    text == option || text.contains(option) || option.contains(text) && !text.is_empty()
}

/// `X comes before Y` / `X comes after Y` → the asserted first-comer.
fn ordering_winner(cand: &str, opt_a: &str, opt_b: &str) -> Option<String> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(r"(.+?)\s+(?:comes?|came)\s+(before|after|earlier than|later than|first|last)\b").unwrap()
    });
    let c = re.captures(cand)?;
    let subject = norm(c.get(1)?.as_str());
    let relation = c.get(2)?.as_str();
    let subject_opt = if option_matches(&subject, opt_a) {
        opt_a.to_string()
    } else if option_matches(&subject, opt_b) {
        opt_b.to_string()
    } else {
        return None;
    };
    let other = if subject_opt == opt_a {
        opt_b.to_string()
    } else {
        opt_a.to_string()
    };
    Some(match relation {
        "before" | "earlier than" | "first" => subject_opt,
        _ => other,
    })
}

// ---------------------------------------------------------------------------
// containment

/// The candidate contains the truth as a word-bounded phrase with no
/// negation in the three words leading up to it.
fn contains_unnegated(cand: &str, truth: &str) -> bool {
    let cand_n = norm(cand);
    let truth_n = norm(truth);
    if truth_n.is_empty() {
        return false;
    }
    let padded = format!(" {cand_n} ");
    let boundary = |c: Option<char>| c.map_or(true, |c| !c.is_alphanumeric());
    let mut from = 0;
    while let Some(rel) = padded[from..].find(truth_n.as_str()) {
        let at = from + rel;
        let after = at + truth_n.len();
        let before_ok = boundary(padded[..at].chars().next_back());
        let after_ok = boundary(padded[after..].chars().next());
        if before_ok && after_ok {
            let prefix = &padded[..at];
            let last_words: Vec<&str> = prefix
                .split(|c: char| !c.is_alphanumeric() && c != '\'')
                .filter(|w| !w.is_empty())
                .rev()
                .take(3)
                .collect();
            let negated = last_words.iter().any(|w| {
                matches!(*w, "not" | "no" | "never" | "without") || w.ends_with("n't")
            });
            if !negated {
                return true;
            }
        }
        from = at + 1;
        if from >= padded.len() {
            break;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eq(question: &str, truth: &str, cand: &str) -> bool {
        RuleEquivalence.equivalent(question, truth, cand)
    }

    #[test]
    fn identity_and_formatting() {
        assert!(eq("", "Zotefoams", "Zotefoams"));
        assert!(eq("", "Zotefoams", "  zotefoams."));
        assert!(eq("", "0.5", "\\boxed{1/2}"));
        assert!(eq("", "3/4", "\\boxed{\\frac{3}{4}}"));
        assert!(eq("", "0.75", "\\frac{3}{4}"));
    }

    #[test]
    fn numbers() {
        assert!(!eq("", "0.5", "1/3"));
        assert!(!eq("", "123456", "123457"));
        assert!(eq("", "1,234", "1234"));
        assert!(eq("", "five", "5"));
        assert!(eq("", "twenty-one", "21"));
        assert!(eq("", "0.300001", "0.300002")); // within the 5th decimal
        assert!(!eq("", "0.30002", "0.30004"));
    }

    #[test]
    fn symbolic_math() {
        assert!(eq("", "a/b", "\\frac{a}{b}"));
        assert!(eq("", "a/b", "a \\frac{1}{b}"));
        assert!(eq("", "\\frac{-a}{b} + \\frac{c}{d}", "\\frac{c}{d} - \\frac{a}{b}"));
        assert!(!eq("", "(a + b)(a - b)", "a^2 + b^2"));
    }

    #[test]
    fn dates() {
        assert!(eq("", "14 March 1995", "1995-03-14"));
        assert!(eq("", "14 March 1995", "March 14, 1995"));
        assert!(!eq("", "14 March 1995", "1995"));
        assert!(!eq("", "March 1995", "1995"));
        assert!(eq("", "1995", "14 March 1995")); // candidate more precise
        assert!(!eq("", "14 March 1995", "15 March 1995"));
    }

    #[test]
    fn refusals() {
        assert!(!eq("", "Paris", "I don't know"));
        assert!(eq("", "unanswerable", "I do not have enough information to answer"));
        assert!(!eq("", "I cannot answer this", "Paris"));
    }

    #[test]
    fn binary_choice() {
        let q = "Is A better than B?";
        assert!(eq(q, "no", "no"));
        assert!(eq(q, "no", "A is not better than B"));
        assert!(eq(q, "no", "B is better than A"));
        assert!(!eq(q, "no", "A is better than B"));
        assert!(!eq(q, "no", "yes"));

        let q2 = "Which one is better, C or D?";
        assert!(eq(q2, "C", "C"));
        assert!(eq(q2, "C", "C is better than D"));
        assert!(!eq(q2, "C", "D"));
        assert!(!eq(q2, "C", "D is better than C"));
        assert!(!eq(q2, "C", "I do not have information"));

        let q3 = "Which one comes first, D or E?";
        assert!(!eq(q3, "E", "D and E both come at the same time"));
        assert!(!eq(q3, "E", "D comes before E"));
        assert!(!eq(q3, "E", "E comes after D"));
        assert!(eq(q3, "E", "E comes before D"));
    }

    #[test]
    fn extra_content() {
        assert!(eq("", "Zotefoams", "The company is Zotefoams, based in the UK"));
        assert!(!eq("", "Zotefoams", "The company is not Zotefoams"));
        assert!(!eq("", "kilogram", "pound"));
    }

    #[test]
    fn reflexive_and_symmetric_numeric() {
        for v in ["42", "0.125", "a/b", "14 March 1995"] {
            assert!(eq("", v, v));
        }
        assert_eq!(eq("", "0.5", "1/2"), eq("", "1/2", "0.5"));
        assert_eq!(eq("", "123456", "123457"), eq("", "123457", "123456"));
    }
    #[test]
    fn reflexive_over_generated_answers() {
        use proptest::prelude::*;
        proptest!(|(s in "[a-zA-Z0-9][a-zA-Z0-9 ]{0,30}")| {
            prop_assert!(RuleEquivalence.equivalent("", &s, &s), "not reflexive for `{}`", s);
        });
    }

    #[test]
    fn numeric_rule_symmetric_over_generated_pairs() {
        use proptest::prelude::*;
        proptest!(|(a in -1000i64..1000, b in -1000i64..1000, frac in 0u32..99999)| {
            let x = format!("{a}.{frac:05}");
            let y = format!("{b}.{frac:05}");
            prop_assert_eq!(
                RuleEquivalence.equivalent("", &x, &y),
                RuleEquivalence.equivalent("", &y, &x)
            );
        });
    }
}

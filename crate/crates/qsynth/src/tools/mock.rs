//! Deterministic mock world.
//!
//! A self-contained fake web the whole pipeline can run against offline:
//! entities with popularity scores and profile pages, relational facts with
//! fact pages, a search index over all of it, and a whitelisted arithmetic
//! evaluator standing in for the python tool. Everything derives from the
//! generation seed, so identical seeds produce byte-identical worlds.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{PythonOutcome, SearchResult, ToolError, ToolSuite};
use crate::model::{Entity, EntityId};
use crate::seeding::{derive_seed, fnv1a, rng, splitmix};

/// Highest obfuscation level the token scheme supports.
pub const MAX_OBFUSCATION_LEVEL: u32 = 16;

const FACT_HOST: &str = "https://mockipedia.test/facts";
const PROFILE_HOST: &str = "https://mockipedia.test/profiles";

/// Mock-world entity record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldEntity {
    pub id: EntityId,
    pub name: String,
    pub domain: String,
    /// Web-scale popularity stand-in; lower means rarer.
    pub popularity: f64,
    /// Opaque registry marker that resolves to this entity's profile page.
    pub profile_token: String,
}

/// Mock-world relational fact record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldFact {
    pub id: String,
    pub subject: EntityId,
    pub novel: EntityId,
    pub statement: String,
    pub page_url: String,
    /// When set, served instead of the derived page text. Used to stage
    /// contradicting sources.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub page_override: Option<String>,
}

/// Parameters for [`MockWorld::generate`].
#[derive(Debug, Clone)]
pub struct WorldSpec {
    pub seed: u64,
    /// Number of root entities (one per synthesizable seed question).
    pub roots: usize,
    /// Fact-graph depth below each root.
    pub depth: usize,
    /// Facts generated per entity.
    pub fanout: usize,
    pub domains: Vec<String>,
}

impl Default for WorldSpec {
    fn default() -> Self {
        WorldSpec {
            seed: 0,
            roots: 4,
            depth: 4,
            fanout: 3,
            domains: vec![
                "history".into(),
                "science".into(),
                "geography".into(),
                "music".into(),
                "sports".into(),
            ],
        }
    }
}

/// The offline world: entity table, fact graph, page table, search index.
#[derive(Debug, Default)]
pub struct MockWorld {
    entities: Vec<WorldEntity>,
    facts: Vec<WorldFact>,
    roots: Vec<EntityId>,
    by_id: HashMap<EntityId, usize>,
    by_fact_id: HashMap<String, usize>,
    facts_by_subject: HashMap<EntityId, Vec<usize>>,
    pages: HashMap<String, PageRef>,
}

#[derive(Debug, Clone, Copy)]
enum PageRef {
    Fact(usize),
    Profile(usize),
}

impl MockWorld {
    pub fn from_parts(
        entities: Vec<WorldEntity>,
        facts: Vec<WorldFact>,
        roots: Vec<EntityId>,
    ) -> Self {
        let mut world = MockWorld {
            entities,
            facts,
            roots,
            ..MockWorld::default()
        };
        world.reindex();
        world
    }

    fn reindex(&mut self) {
        self.by_id = self
            .entities
            .iter()
            .enumerate()
            .map(|(i, e)| (e.id.clone(), i))
            .collect();
        self.by_fact_id = self
            .facts
            .iter()
            .enumerate()
            .map(|(i, f)| (f.id.clone(), i))
            .collect();
        self.facts_by_subject.clear();
        self.pages.clear();
        for (i, f) in self.facts.iter().enumerate() {
            self.facts_by_subject
                .entry(f.subject.clone())
                .or_default()
                .push(i);
            self.pages.insert(f.page_url.clone(), PageRef::Fact(i));
        }
        for (i, e) in self.entities.iter().enumerate() {
            self.pages
                .insert(profile_url(&e.profile_token), PageRef::Profile(i));
        }
    }

    /// Generate a world able to host full trees of the given depth/fanout
    /// under every root: each root gets its own disjoint fact subgraph, so
    /// ancestor exclusion can never starve an expansion prematurely.
    pub fn generate(spec: &WorldSpec) -> Self {
        let mut namer = NameGen::new(spec.seed);
        let mut entities = Vec::new();
        let mut facts = Vec::new();
        let mut roots = Vec::new();
        for r in 0..spec.roots {
            let domain = &spec.domains[r % spec.domains.len()];
            let root = namer.mint_entity(domain, spec.seed, &mut entities);
            roots.push(root.clone());
            let mut frontier = vec![root];
            for _ in 0..spec.depth {
                let mut next = Vec::new();
                for subject in frontier {
                    for _ in 0..spec.fanout {
                        let novel = namer.mint_entity(domain, spec.seed, &mut entities);
                        let fact = make_world_fact(&entities, &subject, &novel, &mut namer);
                        facts.push(fact);
                        next.push(novel);
                    }
                }
                frontier = next;
            }
        }
        MockWorld::from_parts(entities, facts, roots)
    }

    pub fn entities(&self) -> &[WorldEntity] {
        &self.entities
    }

    pub fn facts(&self) -> &[WorldFact] {
        &self.facts
    }

    pub fn roots(&self) -> &[EntityId] {
        &self.roots
    }

    pub fn entity(&self, id: &EntityId) -> Option<&WorldEntity> {
        self.by_id.get(id).map(|&i| &self.entities[i])
    }

    pub fn fact(&self, id: &str) -> Option<&WorldFact> {
        self.by_fact_id.get(id).map(|&i| &self.facts[i])
    }

    pub fn entities_in_domain<'a>(&'a self, domain: &'a str) -> impl Iterator<Item = &'a WorldEntity> {
        self.entities.iter().filter(move |e| e.domain == domain)
    }

    /// Entity names (normalized ids) that occur in `text`, by word-bounded
    /// containment of the normalized name. Insertion order.
    pub fn entities_in_text(&self, text: &str) -> Vec<EntityId> {
        let hay = crate::model::normalize_name(text);
        let boundary = |c: Option<char>| c.map_or(true, |c| !c.is_alphanumeric());
        self.entities
            .iter()
            .filter(|e| {
                let needle = e.id.as_str();
                let mut from = 0;
                while let Some(rel) = hay[from..].find(needle) {
                    let at = from + rel;
                    let after = at + needle.len();
                    if boundary(hay[..at].chars().next_back())
                        && boundary(hay[after..].chars().next())
                    {
                        return true;
                    }
                    from = at + 1;
                    if from >= hay.len() {
                        break;
                    }
                }
                false
            })
            .map(|e| e.id.clone())
            .collect()
    }

    /// Facts usable to expand from `focus` entities while honoring an
    /// exclusion set: the subject must be a non-excluded focus entity and
    /// the novel entity must be new relative to both sets.
    pub fn expansion_facts(&self, focus: &[EntityId], excluded: &[EntityId]) -> Vec<&WorldFact> {
        let mut out = Vec::new();
        for f in focus {
            if excluded.contains(f) {
                continue;
            }
            if let Some(idxs) = self.facts_by_subject.get(f) {
                for &i in idxs {
                    let fact = &self.facts[i];
                    if !excluded.contains(&fact.novel) && !focus.contains(&fact.novel) {
                        out.push(fact);
                    }
                }
            }
        }
        out
    }

    /// Resolve a profile or derived obfuscation marker to its entity.
    pub fn resolve_token(&self, token: &str) -> Option<&WorldEntity> {
        if let Some(e) = self
            .entities
            .iter()
            .find(|e| e.profile_token == token)
        {
            return Some(e);
        }
        for e in &self.entities {
            for level in 0..=MAX_OBFUSCATION_LEVEL {
                if marker_token(&e.profile_token, level) == token {
                    return Some(e);
                }
            }
        }
        None
    }

    pub fn page_text(&self, url: &str) -> Option<String> {
        match self.pages.get(url)? {
            PageRef::Fact(i) => {
                let f = &self.facts[*i];
                Some(f.page_override.clone().unwrap_or_else(|| fact_page_text(f)))
            }
            PageRef::Profile(i) => Some(profile_page_text(&self.entities[*i])),
        }
    }

    pub fn profile_url_of(&self, id: &EntityId) -> Option<String> {
        self.entity(id).map(|e| profile_url(&e.profile_token))
    }

    /// Stage a contradicting page for a fact (test/demo scaffolding).
    pub fn override_fact_page(&mut self, fact_id: &str, text: &str) {
        if let Some(&i) = self.by_fact_id.get(fact_id) {
            self.facts[i].page_override = Some(text.to_string());
        }
    }

    pub fn as_entity(&self, id: &EntityId) -> Option<Entity> {
        self.entity(id).map(|e| Entity::with_tag(&e.name, &e.domain))
    }

    /// Persist as line-delimited records.
    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        use crate::records::{serialize_record, Record};
        use std::io::Write;
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for e in &self.entities {
            writeln!(out, "{}", serialize_record(&Record::WorldEntity(e.clone())))?;
        }
        for f in &self.facts {
            writeln!(out, "{}", serialize_record(&Record::WorldFact(f.clone())))?;
        }
        // Roots are the entities that never appear as a novel entity.
        Ok(())
    }

    /// Load from line-delimited records written by [`MockWorld::save`].
    pub fn load(path: &Path) -> Result<Self, String> {
        use crate::records::{parse_record, Record};
        let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
        let mut entities = Vec::new();
        let mut facts: Vec<WorldFact> = Vec::new();
        for (no, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match parse_record(line).map_err(|e| format!("line {}: {e}", no + 1))? {
                Record::WorldEntity(e) => entities.push(e),
                Record::WorldFact(f) => facts.push(f),
                other => return Err(format!("line {}: unexpected record {other:?}", no + 1)),
            }
        }
        let novel: std::collections::HashSet<&EntityId> =
            facts.iter().map(|f| &f.novel).collect();
        let roots = entities
            .iter()
            .map(|e| e.id.clone())
            .filter(|id| !novel.contains(id))
            .collect();
        Ok(MockWorld::from_parts(entities, facts, roots))
    }
}

fn make_world_fact(
    entities: &[WorldEntity],
    subject: &EntityId,
    novel: &EntityId,
    namer: &mut NameGen,
) -> WorldFact {
    let subject_name = entities.iter().find(|e| &e.id == subject).unwrap().name.clone();
    let novel_name = entities.iter().find(|e| &e.id == novel).unwrap().name.clone();
    let relation = namer.pick_relation();
    let statement = format!("{subject_name} {relation} {novel_name}");
    let id = crate::model::Fact::make_id(&statement, novel);
    WorldFact {
        page_url: format!("{FACT_HOST}/{}", id.as_str()),
        id: id.0,
        subject: subject.clone(),
        novel: novel.clone(),
        statement,
        page_override: None,
    }
}

/// Derived obfuscation marker for an entity profile at a given level.
/// Letter-prefixed hex keeps digit runs unmatched by year/number scans.
pub fn marker_token(profile_token: &str, level: u32) -> String {
    if level == 0 {
        return profile_token.to_string();
    }
    format!(
        "xm{:010x}",
        splitmix(fnv1a(profile_token.as_bytes()) ^ level as u64) & 0xff_ffff_ffff
    )
}

/// Clue marker cited by the mock solver and rotated away by the hardener.
pub fn clue_token(profile_token: &str, level: u32, idx: u32) -> String {
    format!(
        "xc{:010x}",
        splitmix(fnv1a(profile_token.as_bytes()) ^ ((level as u64) << 32) ^ idx as u64)
            & 0xff_ffff_ffff
    )
}

pub fn profile_url(token: &str) -> String {
    format!("{PROFILE_HOST}/{token}")
}

fn fact_page_text(f: &WorldFact) -> String {
    format!(
        "Mockipedia reference {id}.\n{statement}.\nRecorded in the public registry.",
        id = f.id,
        statement = f.statement
    )
}

fn profile_page_text(e: &WorldEntity) -> String {
    format!(
        "Registry profile {token}.\nRegistered name: {name}.\nField: {domain}.",
        token = e.profile_token,
        name = e.name,
        domain = e.domain
    )
}

// ---------------------------------------------------------------------------
// Name generation

struct NameGen {
    rng: rand_chacha::ChaCha8Rng,
    used: std::collections::HashSet<String>,
    relation_cursor: usize,
}

const SYLLABLES: [&str; 20] = [
    "bar", "den", "fel", "gor", "hal", "ith", "jun", "kel", "lor", "mer", "nor", "oth", "pel",
    "quin", "rath", "sil", "tor", "ul", "ven", "wyn",
];

const SUFFIXES: [&str; 12] = [
    "Archive", "College", "Valley", "Society", "Works", "Observatory", "Quartet", "Foundry",
    "Gazette", "Atelier", "Institute", "Harbor",
];

const RELATIONS: [&str; 8] = [
    "shares a documented lineage with",
    "was established by the founder of",
    "preserves the earliest records of",
    "is catalogued alongside",
    "commissioned the first survey of",
    "holds the founding charter of",
    "appears in the registry entry for",
    "maintains the restored collection of",
];

impl NameGen {
    fn new(seed: u64) -> Self {
        NameGen {
            rng: rng(derive_seed(seed, &["world", "names"])),
            used: std::collections::HashSet::new(),
            relation_cursor: 0,
        }
    }

    fn mint_name(&mut self) -> String {
        use rand::Rng;
        loop {
            let a = SYLLABLES[self.rng.random_range(0..SYLLABLES.len())];
            let b = SYLLABLES[self.rng.random_range(0..SYLLABLES.len())];
            let suffix = SUFFIXES[self.rng.random_range(0..SUFFIXES.len())];
            let mut word = format!("{a}{b}");
            if let Some(first) = word.get_mut(0..1) {
                first.make_ascii_uppercase();
            }
            let name = format!("{word} {suffix}");
            if self.used.insert(name.clone()) {
                return name;
            }
        }
    }

    fn mint_entity(
        &mut self,
        domain: &str,
        world_seed: u64,
        entities: &mut Vec<WorldEntity>,
    ) -> EntityId {
        let name = self.mint_name();
        let id = EntityId::from_name(&name);
        let h = splitmix(fnv1a(id.as_str().as_bytes()) ^ world_seed);
        let entity = WorldEntity {
            profile_token: format!("xp{:010x}", h & 0xff_ffff_ffff),
            popularity: (h % 10_000) as f64 / 100.0,
            id: id.clone(),
            name,
            domain: domain.to_string(),
        };
        entities.push(entity);
        id
    }

    fn pick_relation(&mut self) -> &'static str {
        let r = RELATIONS[self.relation_cursor % RELATIONS.len()];
        self.relation_cursor += 1;
        r
    }
}

// ---------------------------------------------------------------------------
// Mock tool suite

/// Tool suite backed by a [`MockWorld`].
pub struct MockTools {
    world: Arc<MockWorld>,
}

impl MockTools {
    pub fn new(world: Arc<MockWorld>) -> Self {
        MockTools { world }
    }

    pub fn world(&self) -> &Arc<MockWorld> {
        &self.world
    }
}

impl ToolSuite for MockTools {
    fn search(&self, query: &str) -> Result<Vec<SearchResult>, ToolError> {
        if query.trim().is_empty() {
            return Err(ToolError::EmptyInput("search"));
        }
        let q = crate::model::normalize_name(query);
        let mut results = Vec::new();

        // Fact id lookup.
        if let Some(f) = self.world.fact(q.as_str()) {
            results.push(fact_hit(f));
        }
        // Profile or derived marker lookup.
        if q.starts_with("xp") || q.starts_with("xm") {
            if let Some(e) = self.world.resolve_token(&q) {
                results.push(profile_hit(e));
            }
        }
        // Entity name lookup: the entity's profile plus every fact page that
        // mentions it.
        let id = EntityId(q.clone());
        if let Some(e) = self.world.entity(&id) {
            results.push(profile_hit(e));
            for f in self.world.facts() {
                if f.subject == id || f.novel == id {
                    results.push(fact_hit(f));
                }
            }
        } else if results.is_empty() {
            // Substring fallback over statements.
            for f in self.world.facts() {
                if crate::model::normalize_name(&f.statement).contains(&q) {
                    results.push(fact_hit(f));
                }
            }
        }
        results.dedup_by(|a, b| a.url == b.url);
        Ok(results)
    }

    fn browse(&self, url: &str) -> Result<String, ToolError> {
        let canonical = super::canonicalize_url(url)?;
        self.world
            .page_text(&canonical)
            .ok_or(ToolError::NotFound(canonical))
    }

    fn python(&self, code: &str) -> Result<PythonOutcome, ToolError> {
        eval_arithmetic(code)
    }
}

fn fact_hit(f: &WorldFact) -> SearchResult {
    SearchResult {
        title: format!("Reference {}", f.id),
        url: f.page_url.clone(),
        snippet: f.statement.chars().take(160).collect(),
    }
}

fn profile_hit(e: &WorldEntity) -> SearchResult {
    SearchResult {
        title: format!("Registry profile {}", e.profile_token),
        url: profile_url(&e.profile_token),
        snippet: format!("Registered name: {}", e.name),
    }
}

// ---------------------------------------------------------------------------
// Whitelisted arithmetic evaluator (mock python)

/// Evaluate a whitelisted arithmetic expression, optionally wrapped in a
/// single `print(...)`. Anything else is a sandbox violation.
pub fn eval_arithmetic(code: &str) -> Result<PythonOutcome, ToolError> {
    let trimmed = code.trim();
    if trimmed.is_empty() {
        return Err(ToolError::EmptyInput("python"));
    }
    let expr = match trimmed.strip_prefix("print(") {
        Some(rest) => rest
            .strip_suffix(')')
            .ok_or_else(|| ToolError::SandboxViolation("unbalanced print call".into()))?,
        None => trimmed,
    };
    let mut parser = ArithParser {
        chars: expr.chars().collect(),
        pos: 0,
    };
    let value = parser.parse_expr()?;
    parser.skip_ws();
    if parser.pos != parser.chars.len() {
        return Err(ToolError::SandboxViolation(format!(
            "unexpected token at offset {}",
            parser.pos
        )));
    }
    match value {
        Some(v) => Ok(PythonOutcome {
            stdout: format_number(v),
            stderr: String::new(),
            status: 0,
        }),
        None => Ok(PythonOutcome {
            stdout: String::new(),
            stderr: "ZeroDivisionError: division by zero".into(),
            status: 1,
        }),
    }
}

fn format_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

struct ArithParser {
    chars: Vec<char>,
    pos: usize,
}

type ArithValue = Option<f64>; // None marks division by zero

impl ArithParser {
    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn parse_expr(&mut self) -> Result<ArithValue, ToolError> {
        let mut acc = self.parse_term()?;
        while let Some(op) = self.peek() {
            match op {
                '+' | '-' => {
                    self.pos += 1;
                    let rhs = self.parse_term()?;
                    acc = match (acc, rhs) {
                        (Some(a), Some(b)) => Some(if op == '+' { a + b } else { a - b }),
                        _ => None,
                    };
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn parse_term(&mut self) -> Result<ArithValue, ToolError> {
        let mut acc = self.parse_factor()?;
        while let Some(op) = self.peek() {
            match op {
                '*' if self.chars.get(self.pos + 1) == Some(&'*') => break,
                '*' | '/' | '%' => {
                    self.pos += 1;
                    let rhs = self.parse_factor()?;
                    acc = match (acc, rhs) {
                        (Some(a), Some(b)) => match op {
                            '*' => Some(a * b),
                            '/' if b == 0.0 => None,
                            '/' => Some(a / b),
                            _ if b == 0.0 => None,
                            _ => Some(a % b),
                        },
                        _ => None,
                    };
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn parse_factor(&mut self) -> Result<ArithValue, ToolError> {
        match self.peek() {
            Some('-') => {
                self.pos += 1;
                Ok(self.parse_factor()?.map(|v| -v))
            }
            Some('+') => {
                self.pos += 1;
                self.parse_factor()
            }
            _ => self.parse_power(),
        }
    }

    fn parse_power(&mut self) -> Result<ArithValue, ToolError> {
        let base = self.parse_atom()?;
        if self.peek() == Some('*') && self.chars.get(self.pos + 1) == Some(&'*') {
            self.pos += 2;
            let exp = self.parse_factor()?;
            return Ok(match (base, exp) {
                (Some(b), Some(e)) => Some(b.powf(e)),
                _ => None,
            });
        }
        Ok(base)
    }

    fn parse_atom(&mut self) -> Result<ArithValue, ToolError> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let inner = self.parse_expr()?;
                if self.peek() != Some(')') {
                    return Err(ToolError::SandboxViolation("unbalanced parenthesis".into()));
                }
                self.pos += 1;
                Ok(inner)
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
                text.parse::<f64>().map(Some).map_err(|_| {
                    ToolError::SandboxViolation(format!("bad numeric literal `{text}`"))
                })
            }
            _ => Err(ToolError::SandboxViolation(
                "only arithmetic expressions are supported".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tools::{Blocklist, ToolCache, ToolStack};

    fn small_world() -> Arc<MockWorld> {
        Arc::new(MockWorld::generate(&WorldSpec {
            seed: 11,
            roots: 2,
            depth: 2,
            fanout: 2,
            ..WorldSpec::default()
        }))
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = WorldSpec {
            seed: 5,
            roots: 2,
            depth: 2,
            fanout: 2,
            ..WorldSpec::default()
        };
        let a = MockWorld::generate(&spec);
        let b = MockWorld::generate(&spec);
        assert_eq!(a.entities(), b.entities());
        assert_eq!(a.facts(), b.facts());
        // 2 roots * (1 + 2 + 4) entities
        assert_eq!(a.entities().len(), 14);
        assert_eq!(a.facts().len(), 12);
    }

    #[test]
    fn search_finds_entity_fact_pages() {
        let world = small_world();
        let tools = MockTools::new(world.clone());
        let root = world.roots()[0].clone();
        let name = world.entity(&root).unwrap().name.clone();
        let hits = tools.search(&name).unwrap();
        assert!(!hits.is_empty());
        // Every subject-fact page of the root is listed.
        for f in world.facts().iter().filter(|f| f.subject == root) {
            assert!(hits.iter().any(|h| h.url == f.page_url));
        }
        // Unknown query yields an empty list.
        assert!(tools.search("zzz unthinkable").unwrap().is_empty());
    }

    #[test]
    fn browse_serves_fact_and_profile_pages() {
        let world = small_world();
        let tools = MockTools::new(world.clone());
        let f = &world.facts()[0];
        let page = tools.browse(&f.page_url).unwrap();
        assert!(page.contains(&f.statement));
        let e = &world.entities()[0];
        let profile = tools.browse(&profile_url(&e.profile_token)).unwrap();
        assert!(profile.contains(&e.name));
        assert!(matches!(
            tools.browse("https://mockipedia.test/facts/missing"),
            Err(ToolError::NotFound(_))
        ));
        assert!(matches!(tools.browse("notaurl"), Err(ToolError::InvalidUrl(_))));
    }

    #[test]
    fn marker_resolution_across_levels() {
        let world = small_world();
        let e = &world.entities()[3];
        for level in [0, 1, 5] {
            let marker = marker_token(&e.profile_token, level);
            let resolved = world.resolve_token(&marker).unwrap();
            assert_eq!(resolved.id, e.id);
        }
        assert!(world.resolve_token("xm0000000000").is_none());
    }

    #[test]
    fn expansion_respects_exclusions() {
        let world = small_world();
        let root = world.roots()[0].clone();
        let all = world.expansion_facts(std::slice::from_ref(&root), &[]);
        assert_eq!(all.len(), 2);
        let first_novel = all[0].novel.clone();
        let filtered = world.expansion_facts(std::slice::from_ref(&root), &[first_novel.clone()]);
        assert!(filtered.iter().all(|f| f.novel != first_novel));
    }

    #[test]
    fn save_load_round_trip() {
        let world = small_world();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("world.jsonl");
        world.save(&path).unwrap();
        let loaded = MockWorld::load(&path).unwrap();
        assert_eq!(loaded.entities(), world.entities());
        assert_eq!(loaded.facts(), world.facts());
        let mut roots = loaded.roots().to_vec();
        roots.sort();
        let mut expected = world.roots().to_vec();
        expected.sort();
        assert_eq!(roots, expected);
    }

    #[test]
    fn arithmetic_evaluator() {
        assert_eq!(eval_arithmetic("print(2+3)").unwrap().stdout, "5");
        assert_eq!(eval_arithmetic("2 * (3 + 4)").unwrap().stdout, "14");
        assert_eq!(eval_arithmetic("7 / 2").unwrap().stdout, "3.5");
        assert_eq!(eval_arithmetic("2 ** 10").unwrap().stdout, "1024");
        assert_eq!(eval_arithmetic("-3 + 1").unwrap().stdout, "-2");
        let div = eval_arithmetic("1/0").unwrap();
        assert_eq!(div.status, 1);
        assert!(div.stderr.contains("ZeroDivision"));
        assert!(matches!(
            eval_arithmetic("import os"),
            Err(ToolError::SandboxViolation(_))
        ));
        assert!(matches!(
            eval_arithmetic("while True: pass"),
            Err(ToolError::SandboxViolation(_))
        ));
    }

    #[test]
    fn cache_layer_serves_repeats_with_one_upstream_hit() {
        let world = small_world();
        let counted = crate::tools::RecordingTools::new(MockTools::new(world.clone()));
        let log = counted.log_handle();
        let stack = ToolStack::new(counted, Blocklist::default_hosts(), ToolCache::in_memory());
        let name = world.entity(&world.roots()[0]).unwrap().name.clone();
        let a = stack.search(&name).unwrap();
        let b = stack.search(&name).unwrap();
        let c = stack.search(&format!("  {} ", name.to_uppercase())).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(log.lock().unwrap().len(), 1);
    }

    #[test]
    fn blocked_hosts_never_reach_inner_tools() {
        let world = small_world();
        let stack = ToolStack::new(
            MockTools::new(world),
            Blocklist::default_hosts(),
            ToolCache::in_memory(),
        );
        match stack.browse("https://huggingface.co/datasets/x") {
            Err(ToolError::NotFound(url)) => assert!(url.contains("huggingface.co")),
            other => panic!("expected NotFound, got {other:?}"),
        }
    }
}

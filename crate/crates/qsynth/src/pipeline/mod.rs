//! Pipeline orchestration: configuration, stage wiring, checkpointed and
//! resumable execution.
//!
//! Stages form a barrier pipeline over line-delimited record files:
//! `seed → tree → synth-topdown → synth-bottomup → filter → distill →
//! stats`. Every stage reads only prior-stage outputs plus configuration,
//! and all randomness fans out from the single run seed, so identical
//! configurations produce byte-identical outputs: interrupted or not.

pub mod io;
pub mod parallel;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::backend::{AgentAction, ChatMessage, CompletionBackend};
use crate::agent::mock::{Capability, MockBackend};
use crate::agent::{Agent, AgentBudget, Agents};
use crate::bottomup::{
    acquire_anchor, synthesize_bottomup, BottomupError, HardeningLog, PopularitySignal,
    WorldPopularity,
};
#[cfg(feature = "live")]
use crate::bottomup::SearchCountPopularity;
use crate::clock::{Clock, FixedClock};
#[cfg(feature = "live")]
use crate::clock::SystemClock;
use crate::distill::{
    export_sft, rejection_sample, DistillManifest, ExportPolicy, RolloutRecord, TagConvention,
};
use crate::equivalence::{AnswerEquivalence, RuleEquivalence};
use crate::filter::{run_filter, FilterPanels, FilterStage};
use crate::model::{Citation, Entity, Fact, FactId, Seed, SeedId};
use crate::records::Record;
use crate::seeding::{derive_seed, rng};
use crate::seeds::{categorize, ingest, rebalance, seed_histogram};
use crate::tools::mock::{MockTools, MockWorld, WorldSpec};
use crate::tools::{Blocklist, ToolCache, ToolStack, ToolSuite};
use crate::topdown::synthesize_topdown;
use crate::tree::{build_tree, tree_from_records, tree_to_records, TreeNodeRecord};

use io::{read_records, write_records_atomic, write_text_atomic, CheckpointedStage};
use parallel::ordered_par_map;
use rand::seq::SliceRandom;

/// Processed-record marker persisted in a stage checkpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointMark {
    pub stage: String,
    pub id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    #[default]
    Mock,
    Live,
}

/// Numeric knobs for every stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Limits {
    pub d_max: u32,
    pub k: u32,
    pub l_max: u32,
    pub max_iters: u32,
    pub n_candidates: usize,
    pub n_votes: u32,
    pub n_rollouts: u32,
    pub cap_fraction: f64,
    pub top_k: usize,
    pub page_char_cap: usize,
    /// Export every retained trajectory instead of one per QA.
    pub export_all: bool,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            d_max: 4,
            k: 3,
            l_max: 8,
            max_iters: 6,
            n_candidates: 8,
            n_votes: 3,
            n_rollouts: 4,
            cap_fraction: 0.10,
            top_k: 10,
            page_char_cap: 40_000,
            export_all: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct BudgetSpec {
    pub max_turns: u32,
    pub max_tool_calls: u32,
    pub max_wall_time_ms: u64,
}

impl Default for BudgetSpec {
    fn default() -> Self {
        BudgetSpec {
            max_turns: 60,
            max_tool_calls: 50,
            max_wall_time_ms: 10 * 60 * 1000,
        }
    }
}

impl From<BudgetSpec> for AgentBudget {
    fn from(b: BudgetSpec) -> Self {
        AgentBudget {
            max_turns: b.max_turns,
            max_tool_calls: b.max_tool_calls,
            max_wall_time_ms: b.max_wall_time_ms,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Budgets {
    /// Per role invocation during synthesis and filtering.
    pub synthesis: BudgetSpec,
    /// Distillation rollouts admit the longest observed trajectories.
    pub distill: BudgetSpec,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            synthesis: BudgetSpec::default(),
            distill: BudgetSpec {
                max_turns: 220,
                max_tool_calls: 100,
                max_wall_time_ms: 20 * 60 * 1000,
            },
        }
    }
}

/// Mock-mode settings: the world file and the scripted capabilities.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MockSettings {
    /// Mock world record file; generated on the fly when absent.
    pub world_path: Option<PathBuf>,
    /// Generated-world shape when no file is given.
    pub world_roots: usize,
    pub world_depth: usize,
    pub world_fanout: usize,
    /// Difficulty gauge: branches the synthesis/filter solver can trace.
    pub trail_capability: Option<u32>,
    /// Obfuscation levels the synthesis/filter solver can crack.
    pub registry_capability: Option<u32>,
    /// The distillation agent is typically stronger than the gauge.
    pub distill_trail_capability: Option<u32>,
    pub distill_registry_capability: Option<u32>,
}

impl Default for MockSettings {
    fn default() -> Self {
        MockSettings {
            world_path: None,
            world_roots: 8,
            world_depth: 4,
            world_fanout: 3,
            trail_capability: Some(1),
            registry_capability: Some(1),
            distill_trail_capability: None,
            distill_registry_capability: None,
        }
    }
}

/// One live chat-completion endpoint slot.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointSettings {
    pub url: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub api_key_env: Option<String>,
    pub temperature: f64,
}

/// Live-mode settings (used only when `mode = "live"`).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct LiveSettings {
    pub solver: EndpointSettings,
    pub questioner: EndpointSettings,
    pub researcher: EndpointSettings,
    pub validator: EndpointSettings,
    pub search_endpoint: String,
    pub search_api_key_env: Option<String>,
    pub fetch_endpoint: String,
    pub max_concurrent_requests: usize,
    pub min_request_interval_ms: u64,
    /// "rules" or "panel" answer equivalence.
    pub equivalence: String,
}

/// Full run configuration; a TOML file maps onto this and CLI flags
/// override individual fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub run_seed: u64,
    pub mode: RunMode,
    pub out_dir: PathBuf,
    pub seeds_path: PathBuf,
    pub seed_source: String,
    pub workers: usize,
    /// Fraction of seeds routed to the top-down prong.
    pub split_ratio: f64,
    pub limits: Limits,
    pub budgets: Budgets,
    pub taxonomy: Vec<String>,
    pub blocklist: Vec<String>,
    pub mock: MockSettings,
    pub live: LiveSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            run_seed: 0,
            mode: RunMode::Mock,
            out_dir: PathBuf::from("run"),
            seeds_path: PathBuf::from("seeds.txt"),
            seed_source: "seeds".into(),
            workers: 1,
            split_ratio: 0.5,
            limits: Limits::default(),
            budgets: Budgets::default(),
            taxonomy: [
                "history",
                "science",
                "geography",
                "music",
                "sports",
                "movies",
                "art",
                "politics",
                "literature",
                "other",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            blocklist: vec!["huggingface.co".into(), "gr.inc".into()],
            mock: MockSettings::default(),
            live: LiveSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        if self.limits.k == 0
            || self.limits.l_max == 0
            || self.limits.max_iters == 0
            || self.limits.n_candidates < 2
            || self.limits.n_rollouts == 0
            || self.limits.top_k == 0
        {
            return bad("limits must be strictly positive (n_candidates >= 2)");
        }
        if self.limits.n_votes == 0 || self.limits.n_votes % 2 == 0 {
            return bad("n_votes must be odd and >= 1");
        }
        if !(0.0..=1.0).contains(&self.split_ratio) {
            return bad("split_ratio must lie in [0, 1]");
        }
        if !(self.limits.cap_fraction > 0.0 && self.limits.cap_fraction <= 1.0) {
            return bad("cap_fraction must lie in (0, 1]");
        }
        if self.workers == 0 {
            return bad("workers must be >= 1");
        }
        for spec in [&self.budgets.synthesis, &self.budgets.distill] {
            if spec.max_turns == 0 || spec.max_tool_calls == 0 || spec.max_wall_time_ms == 0 {
                return bad("budget limits must be strictly positive");
            }
        }
        if self.mode == RunMode::Live {
            #[cfg(not(feature = "live"))]
            return bad("live mode requires building with the `live` feature");
            #[cfg(feature = "live")]
            if self.live.solver.url.is_empty() {
                return bad("live mode requires endpoint settings");
            }
        }
        Ok(())
    }

    pub fn files(&self) -> RunFiles {
        RunFiles {
            out_dir: self.out_dir.clone(),
        }
    }
}

/// Canonical output file layout under the run directory.
#[derive(Debug, Clone)]
pub struct RunFiles {
    pub out_dir: PathBuf,
}

impl RunFiles {
    pub fn seeds(&self) -> PathBuf {
        self.out_dir.join("seeds.jsonl")
    }
    pub fn trees(&self) -> PathBuf {
        self.out_dir.join("trees.jsonl")
    }
    pub fn qa_topdown(&self) -> PathBuf {
        self.out_dir.join("qa_topdown.jsonl")
    }
    pub fn sessions_topdown(&self) -> PathBuf {
        self.out_dir.join("sessions_topdown.jsonl")
    }
    pub fn qa_bottomup(&self) -> PathBuf {
        self.out_dir.join("qa_bottomup.jsonl")
    }
    pub fn hardening_bottomup(&self) -> PathBuf {
        self.out_dir.join("hardening_bottomup.jsonl")
    }
    pub fn qa_filtered(&self) -> PathBuf {
        self.out_dir.join("qa_filtered.jsonl")
    }
    pub fn filter_outcomes(&self) -> PathBuf {
        self.out_dir.join("filter_outcomes.jsonl")
    }
    pub fn filter_report(&self) -> PathBuf {
        self.out_dir.join("filter_report.json")
    }
    pub fn rollouts(&self) -> PathBuf {
        self.out_dir.join("rollouts.jsonl")
    }
    pub fn sft(&self) -> PathBuf {
        self.out_dir.join("sft.jsonl")
    }
    pub fn manifest(&self) -> PathBuf {
        self.out_dir.join("distill_manifest.jsonl")
    }
    pub fn stats_txt(&self) -> PathBuf {
        self.out_dir.join("stats.txt")
    }
    pub fn stats_json(&self) -> PathBuf {
        self.out_dir.join("stats.json")
    }
    pub fn checkpoints(&self) -> PathBuf {
        self.out_dir.join("checkpoints")
    }
    pub fn cache_dir(&self) -> PathBuf {
        self.out_dir.join("cache")
    }

    /// The canonical pipeline outputs, used for byte-identity comparisons.
    pub fn outputs(&self) -> Vec<PathBuf> {
        vec![
            self.seeds(),
            self.trees(),
            self.qa_topdown(),
            self.sessions_topdown(),
            self.qa_bottomup(),
            self.hardening_bottomup(),
            self.qa_filtered(),
            self.filter_outcomes(),
            self.filter_report(),
            self.rollouts(),
            self.sft(),
            self.manifest(),
            self.stats_txt(),
            self.stats_json(),
        ]
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("missing prerequisite: {0}")]
    MissingPrerequisite(String),
    #[error("stage failure: {0}")]
    Stage(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Seed,
    Tree,
    SynthTopdown,
    SynthBottomup,
    Filter,
    Distill,
    Stats,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Seed,
        Stage::Tree,
        Stage::SynthTopdown,
        Stage::SynthBottomup,
        Stage::Filter,
        Stage::Distill,
        Stage::Stats,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Stage::Seed => "seed",
            Stage::Tree => "tree",
            Stage::SynthTopdown => "synth-topdown",
            Stage::SynthBottomup => "synth-bottomup",
            Stage::Filter => "filter",
            Stage::Distill => "distill",
            Stage::Stats => "stats",
        }
    }
}

impl std::str::FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .iter()
            .copied()
            .find(|stage| stage.name() == s)
            .ok_or_else(|| format!("unknown stage `{s}`"))
    }
}

/// Per-invocation options.
#[derive(Debug, Clone, Copy, Default)]
pub struct StageOptions {
    /// Process at most this many new records, then stop (the stage resumes
    /// from its checkpoint next invocation).
    pub limit: Option<usize>,
}

/// What a stage reports when it finishes.
#[derive(Debug, Clone, Serialize)]
pub struct StageSummary {
    pub stage: String,
    pub input: u64,
    pub emitted: u64,
    pub skipped: u64,
    pub details: BTreeMap<String, u64>,
}

/// Everything a stage needs at runtime, assembled from the configuration.
pub struct Runtime {
    pub tools: Arc<dyn ToolSuite>,
    pub agents: Agents,
    pub distill_solver: Agent,
    pub panels: FilterPanels,
    pub equivalence: Arc<dyn AnswerEquivalence>,
    pub clock: Arc<dyn Clock>,
    pub signal: Arc<dyn PopularitySignal>,
    pub world: Option<Arc<MockWorld>>,
}

impl Runtime {
    pub fn from_config(config: &RunConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        std::fs::create_dir_all(&config.out_dir)?;
        match config.mode {
            RunMode::Mock => Self::mock_runtime(config),
            RunMode::Live => Self::live_runtime(config),
        }
    }

    fn mock_runtime(config: &RunConfig) -> Result<Self, PipelineError> {
        let world = Arc::new(match &config.mock.world_path {
            Some(path) => MockWorld::load(path)
                .map_err(|e| PipelineError::Config(format!("mock world: {e}")))?,
            None => MockWorld::generate(&WorldSpec {
                seed: derive_seed(config.run_seed, &["world"]),
                roots: config.mock.world_roots,
                depth: config.mock.world_depth,
                fanout: config.mock.world_fanout,
                ..WorldSpec::default()
            }),
        });
        let cache = ToolCache::persistent(
            &config.files().cache_dir(),
            &format!("run-{}", config.run_seed),
        )?;
        let tools: Arc<dyn ToolSuite> = Arc::new(
            ToolStack::new(
                MockTools::new(world.clone()),
                Blocklist::new(config.blocklist.iter()),
                cache,
            )
            .with_limits(config.limits.top_k, config.limits.page_char_cap),
        );
        let capability = |c: Option<u32>| c.map(Capability::Finite).unwrap_or(Capability::Unlimited);
        let gauge: Arc<dyn CompletionBackend> = Arc::new(
            MockBackend::new(world.clone())
                .with_trail_capability(capability(config.mock.trail_capability))
                .with_registry_capability(capability(config.mock.registry_capability)),
        );
        let strong: Arc<dyn CompletionBackend> = Arc::new(
            MockBackend::new(world.clone())
                .with_trail_capability(capability(config.mock.distill_trail_capability))
                .with_registry_capability(capability(config.mock.distill_registry_capability)),
        );
        let budget: AgentBudget = config.budgets.synthesis.into();
        let mut agents = Agents::homogeneous(gauge);
        agents.solver.budget = budget;
        agents.questioner.budget = budget;
        agents.researcher.budget = budget;
        agents.validator.budget = budget;
        let distill_solver = Agent::new(strong, crate::agent::AgentRole::solver())
            .with_budget(config.budgets.distill.into());
        let panels = FilterPanels::new(agents.validator.clone(), config.limits.n_votes)
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(Runtime {
            tools,
            distill_solver,
            panels,
            equivalence: Arc::new(RuleEquivalence),
            clock: Arc::new(FixedClock),
            signal: Arc::new(WorldPopularity {
                world: world.clone(),
            }),
            world: Some(world),
            agents,
        })
    }

    #[cfg(feature = "live")]
    fn live_runtime(config: &RunConfig) -> Result<Self, PipelineError> {
        use crate::agent::live::{LiveBackend, LiveBackendConfig};
        use crate::agent::{LimitedBackend, RequestLimiter};
        use crate::filter::PanelEquivalence;
        use crate::tools::live::{LiveToolConfig, LiveTools};

        let key_of = |env: &Option<String>| env.as_ref().and_then(|k| std::env::var(k).ok());
        let limiter = RequestLimiter::new(
            config.live.max_concurrent_requests.max(1),
            config.live.min_request_interval_ms,
        );
        let backend = |slot: &EndpointSettings| -> Result<Arc<dyn CompletionBackend>, PipelineError> {
            let inner = LiveBackend::new(LiveBackendConfig {
                url: slot.url.clone(),
                model: slot.model.clone(),
                api_key: key_of(&slot.api_key_env),
                temperature: slot.temperature,
                ..LiveBackendConfig::default()
            })
            .map_err(|e| PipelineError::Config(e.to_string()))?;
            Ok(Arc::new(LimitedBackend::new(inner, limiter.clone())))
        };

        let live_tools = LiveTools::new(LiveToolConfig {
            search_endpoint: config.live.search_endpoint.clone(),
            search_api_key: key_of(&config.live.search_api_key_env),
            fetch_endpoint: config.live.fetch_endpoint.clone(),
            ..LiveToolConfig::default()
        })
        .map_err(|e| PipelineError::Config(e.to_string()))?;
        let cache = ToolCache::persistent(
            &config.files().cache_dir(),
            &format!("run-{}", config.run_seed),
        )?;
        let tools: Arc<dyn ToolSuite> = Arc::new(
            ToolStack::new(live_tools, Blocklist::new(config.blocklist.iter()), cache)
                .with_limits(config.limits.top_k, config.limits.page_char_cap),
        );

        let budget: AgentBudget = config.budgets.synthesis.into();
        let agents = Agents {
            solver: Agent::new(backend(&config.live.solver)?, crate::agent::AgentRole::solver())
                .with_budget(budget),
            questioner: Agent::new(
                backend(&config.live.questioner)?,
                crate::agent::AgentRole::questioner(),
            )
            .with_budget(budget),
            researcher: Agent::new(
                backend(&config.live.researcher)?,
                crate::agent::AgentRole::researcher(),
            )
            .with_budget(budget),
            validator: Agent::new(
                backend(&config.live.validator)?,
                crate::agent::AgentRole::validator(),
            )
            .with_budget(budget),
        };
        let distill_solver = Agent::new(
            backend(&config.live.solver)?,
            crate::agent::AgentRole::solver(),
        )
        .with_budget(config.budgets.distill.into());
        let panels = FilterPanels::new(agents.validator.clone(), config.limits.n_votes)
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        let equivalence: Arc<dyn AnswerEquivalence> = if config.live.equivalence == "panel" {
            Arc::new(PanelEquivalence {
                panel: crate::filter::JudgePanel::new(
                    agents.validator.clone(),
                    crate::agent::prompts::Rubric::Equivalence,
                    config.limits.n_votes,
                )
                .map_err(|e| PipelineError::Config(e.to_string()))?,
                seed: config.run_seed,
            })
        } else {
            Arc::new(RuleEquivalence)
        };
        let signal: Arc<dyn PopularitySignal> = Arc::new(SearchCountPopularity {
            tools: tools.clone(),
        });
        Ok(Runtime {
            tools,
            agents,
            distill_solver,
            panels,
            equivalence,
            clock: Arc::new(SystemClock),
            signal,
            world: None,
        })
    }

    #[cfg(not(feature = "live"))]
    fn live_runtime(_config: &RunConfig) -> Result<Self, PipelineError> {
        Err(PipelineError::Config(
            "live mode requires building with the `live` feature".into(),
        ))
    }
}

/// Deterministically split seeds between the two prongs: `round(ratio * n)`
/// go top-down, the rest bottom-up, relative order preserved on both sides.
pub fn split_seeds(seeds: &[Seed], ratio: f64, run_seed: u64) -> (Vec<Seed>, Vec<Seed>) {
    let n = seeds.len();
    let n_topdown = ((ratio * n as f64).round() as usize).min(n);
    let mut indices: Vec<usize> = (0..n).collect();
    let mut shuffler = rng(derive_seed(run_seed, &["split"]));
    indices.shuffle(&mut shuffler);
    let mut chosen: Vec<usize> = indices.into_iter().take(n_topdown).collect();
    chosen.sort_unstable();
    let mut topdown = Vec::with_capacity(n_topdown);
    let mut bottomup = Vec::with_capacity(n - n_topdown);
    let mut cursor = chosen.iter().peekable();
    for (i, s) in seeds.iter().enumerate() {
        if cursor.peek() == Some(&&i) {
            topdown.push(s.clone());
            cursor.next();
        } else {
            bottomup.push(s.clone());
        }
    }
    (topdown, bottomup)
}

/// Run one stage (after checking its prerequisites exist).
pub fn run_stage(
    stage: Stage,
    config: &RunConfig,
    options: &StageOptions,
) -> Result<StageSummary, PipelineError> {
    let runtime = Runtime::from_config(config)?;
    run_stage_with(stage, config, options, &runtime)
}

/// Run every stage in order.
pub fn run_all(config: &RunConfig, options: &StageOptions) -> Result<Vec<StageSummary>, PipelineError> {
    let runtime = Runtime::from_config(config)?;
    let mut summaries = Vec::new();
    for stage in Stage::ALL {
        summaries.push(run_stage_with(stage, config, options, &runtime)?);
    }
    Ok(summaries)
}

/// Stage dispatch against an existing runtime (tests reuse the runtime).
pub fn run_stage_with(
    stage: Stage,
    config: &RunConfig,
    options: &StageOptions,
    runtime: &Runtime,
) -> Result<StageSummary, PipelineError> {
    match stage {
        Stage::Seed => stage_seed(config, runtime),
        Stage::Tree => stage_tree(config, options, runtime),
        Stage::SynthTopdown => stage_synth_topdown(config, options, runtime),
        Stage::SynthBottomup => stage_synth_bottomup(config, options, runtime),
        Stage::Filter => stage_filter(config, options, runtime),
        Stage::Distill => stage_distill(config, options, runtime),
        Stage::Stats => stage_stats(config, runtime),
    }
}

fn require(path: &Path, what: &str) -> Result<(), PipelineError> {
    if path.exists() {
        Ok(())
    } else {
        Err(PipelineError::MissingPrerequisite(format!(
            "{what} not found at {}",
            path.display()
        )))
    }
}

fn count_lines(path: &Path) -> u64 {
    std::fs::read_to_string(path)
        .map(|t| t.lines().filter(|l| !l.trim().is_empty()).count() as u64)
        .unwrap_or(0)
}

// ---------------------------------------------------------------------------
// seed stage

fn stage_seed(config: &RunConfig, runtime: &Runtime) -> Result<StageSummary, PipelineError> {
    require(&config.seeds_path, "seed input file")?;
    let files = config.files();
    let text = std::fs::read_to_string(&config.seeds_path)?;
    let input_lines = text.lines().count() as u64;
    let seeds = ingest(
        text.lines().map(|l| Ok(l.to_string())),
        &config.seed_source,
    )
    .map_err(|e| PipelineError::Stage(e.to_string()))?;

    let labeled: Vec<Seed> = ordered_par_map(seeds, config.workers, |_, seed| {
        if !seed.domain.is_empty() {
            return seed.clone();
        }
        let mut labeled = seed.clone();
        labeled.domain = categorize(
            seed,
            &runtime.agents.validator.backend,
            &config.taxonomy,
            config.run_seed,
        )
        .unwrap_or_else(|_| "other".to_string());
        labeled
    });
    let balanced = rebalance(&labeled, config.limits.cap_fraction, config.run_seed);
    let histogram = seed_histogram(&balanced);
    let records: Vec<Record> = balanced.iter().map(|s| Record::Seed(s.clone())).collect();
    write_records_atomic(&files.seeds(), &records)?;
    let mut details: BTreeMap<String, u64> = histogram
        .counts
        .iter()
        .map(|(k, v)| (format!("domain:{k}"), *v))
        .collect();
    details.insert("deduplicated".into(), input_lines - records.len() as u64);
    Ok(StageSummary {
        stage: "seed".into(),
        input: input_lines,
        emitted: records.len() as u64,
        skipped: input_lines - records.len() as u64,
        details,
    })
}

fn load_seeds(files: &RunFiles) -> Result<Vec<Seed>, PipelineError> {
    require(&files.seeds(), "seeds stage output")?;
    let mut out = Vec::new();
    for r in read_records(&files.seeds())? {
        match r {
            Record::Seed(s) => out.push(s),
            other => {
                return Err(PipelineError::Stage(format!(
                    "unexpected record in seeds file: {other:?}"
                )))
            }
        }
    }
    Ok(out)
}

/// The seed's key entity; in mock mode the first world entity its text
/// mentions, in live mode a one-shot extraction query.
fn extract_seed_entity(runtime: &Runtime, seed: &Seed, run_seed: u64) -> Option<Entity> {
    if let Some(world) = &runtime.world {
        let found = world.entities_in_text(&seed.text);
        return found.first().and_then(|id| world.as_entity(id));
    }
    let conversation = vec![
        ChatMessage::system(
            "Name the single key entity (person, place, organization or work) the text \
             mentions. Reply with the name only.",
        ),
        ChatMessage::user(seed.text.clone()),
    ];
    let seed_val = derive_seed(run_seed, &["extract-entity", seed.id.0.as_str()]);
    match runtime.agents.researcher.backend.complete(&conversation, seed_val) {
        Ok(turn) => match turn.action {
            AgentAction::Finish(name) if !name.trim().is_empty() => {
                Some(Entity::with_tag(name.trim(), &seed.domain))
            }
            _ => None,
        },
        Err(_) => None,
    }
}

// ---------------------------------------------------------------------------
// tree stage

fn stage_tree(
    config: &RunConfig,
    options: &StageOptions,
    runtime: &Runtime,
) -> Result<StageSummary, PipelineError> {
    let files = config.files();
    let seeds = load_seeds(&files)?;
    let (topdown_seeds, _) = split_seeds(&seeds, config.split_ratio, config.run_seed);
    let trees_path = files.trees();
    let mut stage = CheckpointedStage::open(
        &files.checkpoints(),
        "tree",
        &[trees_path.as_path()],
        |r| match r {
            Record::TreeNode(n) => Some(n.seed_id.0.clone()),
            _ => None,
        },
    )?;

    let mut pending: Vec<Seed> = topdown_seeds
        .iter()
        .filter(|s| !stage.is_processed(&s.id.0))
        .cloned()
        .collect();
    if let Some(limit) = options.limit {
        pending.truncate(limit);
    }

    let results: Vec<Result<Vec<TreeNodeRecord>, String>> =
        ordered_par_map(pending.clone(), config.workers, |_, seed| {
            let Some(entity) = extract_seed_entity(runtime, seed, config.run_seed) else {
                return Ok(Vec::new());
            };
            let tree_seed = derive_seed(config.run_seed, &["tree", seed.id.0.as_str()]);
            build_tree(
                seed,
                &entity,
                config.limits.d_max,
                config.limits.k,
                &runtime.agents.researcher,
                &runtime.tools,
                runtime.clock.as_ref(),
                tree_seed,
            )
            .map(|tree| tree_to_records(&tree))
            .map_err(|e| e.to_string())
        });

    let mut skipped = 0u64;
    for (seed, result) in pending.iter().zip(results) {
        let records = result.map_err(PipelineError::Stage)?;
        if records.is_empty() {
            skipped += 1;
        }
        let writes: Vec<(usize, Record)> = records
            .into_iter()
            .map(|r| (0usize, Record::TreeNode(r)))
            .collect();
        stage.commit(&seed.id.0, &writes)?;
    }

    Ok(StageSummary {
        stage: "tree".into(),
        input: topdown_seeds.len() as u64,
        emitted: count_lines(&trees_path),
        skipped,
        details: BTreeMap::new(),
    })
}

fn load_trees(files: &RunFiles) -> Result<Vec<(SeedId, Vec<TreeNodeRecord>)>, PipelineError> {
    require(&files.trees(), "tree stage output")?;
    let mut grouped: Vec<(SeedId, Vec<TreeNodeRecord>)> = Vec::new();
    for r in read_records(&files.trees())? {
        let Record::TreeNode(node) = r else {
            return Err(PipelineError::Stage("non-tree record in trees file".into()));
        };
        match grouped.iter_mut().find(|(id, _)| *id == node.seed_id) {
            Some((_, nodes)) => nodes.push(node),
            None => grouped.push((node.seed_id.clone(), vec![node])),
        }
    }
    Ok(grouped)
}

// ---------------------------------------------------------------------------
// synthesis stages

fn stage_synth_topdown(
    config: &RunConfig,
    options: &StageOptions,
    runtime: &Runtime,
) -> Result<StageSummary, PipelineError> {
    let files = config.files();
    let trees = load_trees(&files)?;
    let qa_path = files.qa_topdown();
    let log_path = files.sessions_topdown();
    let mut stage = CheckpointedStage::open(
        &files.checkpoints(),
        "synth-topdown",
        &[qa_path.as_path(), log_path.as_path()],
        |r| match r {
            Record::QaPair(qa) => Some(qa.seed_id.0.clone()),
            Record::SessionLog(log) => Some(log.seed_id.0.clone()),
            _ => None,
        },
    )?;

    let mut pending: Vec<(SeedId, Vec<TreeNodeRecord>)> = trees
        .into_iter()
        .filter(|(id, _)| !stage.is_processed(&id.0))
        .collect();
    if let Some(limit) = options.limit {
        pending.truncate(limit);
    }
    let total_pending = pending.len() as u64;

    let results = ordered_par_map(pending, config.workers, |_, (seed_id, records)| {
        let tree = tree_from_records(records).map_err(PipelineError::Stage)?;
        synthesize_topdown(
            &tree,
            &runtime.agents,
            &runtime.tools,
            runtime.clock.as_ref(),
            runtime.equivalence.as_ref(),
            config.limits.l_max,
            derive_seed(config.run_seed, &["topdown", seed_id.0.as_str()]),
        )
        .map_err(|e| PipelineError::Stage(e.to_string()))
    });

    let mut emitted = 0u64;
    for result in results {
        let result = result?;
        let seed_key = result.log.seed_id.0.clone();
        let mut writes: Vec<(usize, Record)> = Vec::new();
        if let Some(qa) = result.qa {
            emitted += 1;
            writes.push((0, Record::QaPair(qa)));
        }
        writes.push((1, Record::SessionLog(result.log)));
        stage.commit(&seed_key, &writes)?;
    }

    Ok(StageSummary {
        stage: "synth-topdown".into(),
        input: total_pending,
        emitted: count_lines(&qa_path),
        skipped: total_pending - emitted.min(total_pending),
        details: BTreeMap::new(),
    })
}

fn stage_synth_bottomup(
    config: &RunConfig,
    options: &StageOptions,
    runtime: &Runtime,
) -> Result<StageSummary, PipelineError> {
    let files = config.files();
    let seeds = load_seeds(&files)?;
    let (_, bottomup_seeds) = split_seeds(&seeds, config.split_ratio, config.run_seed);
    let qa_path = files.qa_bottomup();
    let log_path = files.hardening_bottomup();
    let mut stage = CheckpointedStage::open(
        &files.checkpoints(),
        "synth-bottomup",
        &[qa_path.as_path(), log_path.as_path()],
        |r| match r {
            Record::QaPair(qa) => Some(qa.seed_id.0.clone()),
            Record::HardeningLog(log) => Some(log.seed_id.0.clone()),
            _ => None,
        },
    )?;

    let mut pending: Vec<Seed> = bottomup_seeds
        .iter()
        .filter(|s| !stage.is_processed(&s.id.0))
        .cloned()
        .collect();
    if let Some(limit) = options.limit {
        pending.truncate(limit);
    }
    let total_pending = pending.len() as u64;

    let results = ordered_par_map(pending, config.workers, |_, seed| {
        bottomup_one(config, runtime, seed).map_err(|e| PipelineError::Stage(e.to_string()))
    });

    let mut emitted = 0u64;
    for result in results {
        let (seed_key, qa, log) = result?;
        let mut writes: Vec<(usize, Record)> = Vec::new();
        if let Some(qa) = qa {
            emitted += 1;
            writes.push((0, Record::QaPair(qa)));
        }
        writes.push((1, Record::HardeningLog(log)));
        stage.commit(&seed_key, &writes)?;
    }

    Ok(StageSummary {
        stage: "synth-bottomup".into(),
        input: total_pending,
        emitted: count_lines(&qa_path),
        skipped: total_pending - emitted.min(total_pending),
        details: BTreeMap::new(),
    })
}

fn bottomup_one(
    config: &RunConfig,
    runtime: &Runtime,
    seed: &Seed,
) -> Result<(String, Option<crate::model::QaPair>, HardeningLog), BottomupError> {
    let run_seed = derive_seed(config.run_seed, &["bottomup", seed.id.0.as_str()]);
    let anchor = match acquire_anchor(
        seed,
        &runtime.agents.researcher,
        &runtime.agents.validator,
        runtime.signal.as_ref(),
        config.limits.n_candidates,
        &runtime.tools,
        runtime.clock.as_ref(),
        run_seed,
    ) {
        Ok(anchor) => anchor,
        Err(BottomupError::Gateway(e)) => return Err(BottomupError::Gateway(e)),
        Err(e) => {
            return Ok((
                seed.id.0.clone(),
                None,
                HardeningLog {
                    seed_id: seed.id.clone(),
                    anchor: String::new(),
                    steps: Vec::new(),
                    outcome: format!("abandoned: {e}"),
                },
            ));
        }
    };
    let anchor_citation = runtime.world.as_ref().and_then(|world| {
        world.profile_url_of(&anchor.id).map(|url| Citation {
            url,
            snippet: String::new(),
            retrieved_at: runtime.clock.now(),
        })
    });
    let result = synthesize_bottomup(
        seed,
        &anchor,
        &runtime.agents,
        &runtime.tools,
        runtime.clock.as_ref(),
        runtime.equivalence.as_ref(),
        config.limits.max_iters,
        anchor_citation,
        run_seed,
    )?;
    Ok((seed.id.0.clone(), result.qa, result.log))
}

// ---------------------------------------------------------------------------
// filter stage

fn stage_filter(
    config: &RunConfig,
    options: &StageOptions,
    runtime: &Runtime,
) -> Result<StageSummary, PipelineError> {
    let files = config.files();
    require(&files.qa_topdown(), "top-down synthesis output")?;
    require(&files.qa_bottomup(), "bottom-up synthesis output")?;
    let mut fact_index: BTreeMap<FactId, Fact> = BTreeMap::new();
    if files.trees().exists() {
        for (_, records) in load_trees(&files)? {
            for node in records {
                if node.depth > 0 {
                    fact_index.insert(node.fact.id.clone(), node.fact);
                }
            }
        }
    }

    let mut qas: Vec<crate::model::QaPair> = Vec::new();
    for path in [files.qa_topdown(), files.qa_bottomup()] {
        for r in read_records(&path)? {
            if let Record::QaPair(qa) = r {
                qas.push(qa);
            }
        }
    }

    let filtered_path = files.qa_filtered();
    let outcomes_path = files.filter_outcomes();
    let mut stage = CheckpointedStage::open(
        &files.checkpoints(),
        "filter",
        &[filtered_path.as_path(), outcomes_path.as_path()],
        |r| match r {
            Record::QaPair(qa) => Some(qa.id.clone()),
            Record::FilterOutcome(o) => Some(o.qa_id.clone()),
            _ => None,
        },
    )?;

    let mut pending: Vec<crate::model::QaPair> = qas
        .iter()
        .filter(|qa| !stage.is_processed(&qa.id))
        .cloned()
        .collect();
    if let Some(limit) = options.limit {
        pending.truncate(limit);
    }
    let total = qas.len() as u64;

    let results = ordered_par_map(pending, config.workers, |_, qa| {
        let facts: Vec<Fact> = qa
            .supporting_fact_ids
            .iter()
            .filter_map(|id| fact_index.get(id).cloned())
            .collect();
        run_filter(
            qa,
            &facts,
            &runtime.agents,
            &runtime.panels,
            &runtime.tools,
            runtime.clock.as_ref(),
            runtime.equivalence.as_ref(),
            derive_seed(config.run_seed, &["filter", &qa.id]),
        )
        .map(|outcome| (qa.clone(), outcome))
        .map_err(|e| PipelineError::Stage(e.to_string()))
    });

    for result in results {
        let (qa, outcome) = result?;
        let mut writes: Vec<(usize, Record)> = Vec::new();
        if outcome.accepted {
            writes.push((0, Record::QaPair(qa.clone())));
        }
        writes.push((1, Record::FilterOutcome(outcome)));
        stage.commit(&qa.id, &writes)?;
    }

    // Rejection-reason histogram, recomputed from the full outcome file so
    // resumed runs report identically.
    let mut details: BTreeMap<String, u64> = BTreeMap::new();
    for r in read_records(&outcomes_path)? {
        if let Record::FilterOutcome(outcome) = r {
            let key = match outcome.stage {
                FilterStage::Passed => "passed",
                FilterStage::Standards => "rejected:standards",
                FilterStage::Factuality => "rejected:factuality",
                FilterStage::Alternative => "rejected:alternative",
            };
            *details.entry(key.to_string()).or_default() += 1;
        }
    }
    let report = serde_json::json!({ "rejections": details });
    write_text_atomic(
        &files.filter_report(),
        &format!("{}\n", serde_json::to_string_pretty(&report).expect("report json")),
    )?;

    Ok(StageSummary {
        stage: "filter".into(),
        input: total,
        emitted: count_lines(&filtered_path),
        skipped: total - count_lines(&filtered_path).min(total),
        details,
    })
}

// ---------------------------------------------------------------------------
// distill stage

fn stage_distill(
    config: &RunConfig,
    options: &StageOptions,
    runtime: &Runtime,
) -> Result<StageSummary, PipelineError> {
    let files = config.files();
    require(&files.qa_filtered(), "filter stage output")?;
    let mut qas: Vec<crate::model::QaPair> = Vec::new();
    for r in read_records(&files.qa_filtered())? {
        if let Record::QaPair(qa) = r {
            qas.push(qa);
        }
    }

    let rollouts_path = files.rollouts();
    let sft_path = files.sft();
    let mut stage = CheckpointedStage::open(
        &files.checkpoints(),
        "distill",
        &[rollouts_path.as_path(), sft_path.as_path()],
        |r| match r {
            Record::Rollout(r) => Some(r.qa_id.clone()),
            Record::SftRecord(s) => Some(s.qa_id.clone()),
            _ => None,
        },
    )?;

    let mut pending: Vec<crate::model::QaPair> = qas
        .iter()
        .filter(|qa| !stage.is_processed(&qa.id))
        .cloned()
        .collect();
    if let Some(limit) = options.limit {
        pending.truncate(limit);
    }

    let policy = if config.limits.export_all {
        ExportPolicy::All
    } else {
        ExportPolicy::ShortestPerQa
    };
    let convention = TagConvention::default();

    let results = ordered_par_map(pending, config.workers, |_, qa| {
        rejection_sample(
            qa,
            &runtime.distill_solver,
            &runtime.tools,
            runtime.clock.as_ref(),
            runtime.equivalence.as_ref(),
            config.limits.n_rollouts,
            derive_seed(config.run_seed, &["distill"]),
        )
        .map(|batch| (qa.clone(), batch))
        .map_err(|e| PipelineError::Stage(e.to_string()))
    });

    for result in results {
        let (qa, batch) = result?;
        let mut writes: Vec<(usize, Record)> = Vec::new();
        for (i, transcript) in batch.transcripts.iter().enumerate() {
            writes.push((
                0,
                Record::Rollout(RolloutRecord {
                    qa_id: qa.id.clone(),
                    rollout_index: i as u32,
                    retained: batch.retained.contains(&i),
                    transcript: transcript.clone(),
                }),
            ));
        }
        let (records, _skips) = export_sft(&[(qa.clone(), batch)], &convention, policy);
        for record in records {
            writes.push((1, Record::SftRecord(record)));
        }
        stage.commit(&qa.id, &writes)?;
    }

    // The manifest is recomputed from the full rollout file every run.
    let mut attempted = std::collections::BTreeSet::new();
    let mut rollouts = 0u64;
    let mut retained = 0u64;
    for r in read_records(&rollouts_path)? {
        if let Record::Rollout(rec) = r {
            attempted.insert(rec.qa_id.clone());
            rollouts += 1;
            if rec.retained {
                retained += 1;
            }
        }
    }
    let exported = count_lines(&sft_path);
    let manifest = DistillManifest {
        attempted: attempted.len() as u64,
        rollouts,
        retained,
        exported,
        retention_rate: if rollouts == 0 {
            0.0
        } else {
            retained as f64 / rollouts as f64
        },
    };
    write_records_atomic(&files.manifest(), &[Record::DistillManifest(manifest.clone())])?;

    let mut details = BTreeMap::new();
    details.insert("rollouts".into(), manifest.rollouts);
    details.insert("retained".into(), manifest.retained);
    Ok(StageSummary {
        stage: "distill".into(),
        input: qas.len() as u64,
        emitted: exported,
        skipped: qas.len() as u64 - attempted.len().min(qas.len()) as u64,
        details,
    })
}

// ---------------------------------------------------------------------------
// stats stage

fn stage_stats(config: &RunConfig, _runtime: &Runtime) -> Result<StageSummary, PipelineError> {
    let files = config.files();
    require(&files.rollouts(), "distill stage output")?;
    let mut all = Vec::new();
    let mut retained = Vec::new();
    for r in read_records(&files.rollouts())? {
        if let Record::Rollout(rec) = r {
            if rec.retained {
                retained.push(rec.transcript.clone());
            }
            all.push(rec.transcript);
        }
    }

    let mut rows: Vec<(String, crate::analytics::ToolStats)> = Vec::new();
    if !all.is_empty() {
        rows.push((
            "rollouts".into(),
            crate::analytics::tool_call_stats(&all)
                .map_err(|e| PipelineError::Stage(e.to_string()))?,
        ));
    }
    if !retained.is_empty() {
        rows.push((
            "retained".into(),
            crate::analytics::tool_call_stats(&retained)
                .map_err(|e| PipelineError::Stage(e.to_string()))?,
        ));
    }

    // Domain distribution of filtered QA, joined to seed domains.
    let mut domain_of: BTreeMap<SeedId, String> = BTreeMap::new();
    if files.seeds().exists() {
        for s in load_seeds(&files)? {
            domain_of.insert(s.id.clone(), if s.domain.is_empty() { "other".into() } else { s.domain });
        }
    }
    let mut labels = Vec::new();
    if files.qa_filtered().exists() {
        for r in read_records(&files.qa_filtered())? {
            if let Record::QaPair(qa) = r {
                labels.push(
                    domain_of
                        .get(&qa.seed_id)
                        .cloned()
                        .unwrap_or_else(|| "other".to_string()),
                );
            }
        }
    }
    let histogram = crate::analytics::domain_distribution(labels);

    let mut text = crate::analytics::compare_reports(&rows);
    text.push('\n');
    text.push_str("domain distribution (filtered QA):\n");
    for (label, count) in &histogram.counts {
        text.push_str(&format!("  {label:<12} {count}\n"));
    }
    write_text_atomic(&files.stats_txt(), &text)?;

    let json = serde_json::json!({
        "tool_stats": rows
            .iter()
            .map(|(name, s)| serde_json::json!({"dataset": name, "stats": s}))
            .collect::<Vec<_>>(),
        "domains": histogram,
    });
    write_text_atomic(
        &files.stats_json(),
        &format!("{}\n", serde_json::to_string_pretty(&json).expect("stats json")),
    )?;

    Ok(StageSummary {
        stage: "stats".into(),
        input: all.len() as u64,
        emitted: rows.len() as u64,
        skipped: 0,
        details: histogram
            .counts
            .iter()
            .map(|(k, v)| (format!("domain:{k}"), *v))
            .collect(),
    })
}

/// Generate a mock world file plus a matching seed-question file (one
/// question per root, domains attached).
pub fn generate_world_fixture(
    world_path: &Path,
    seeds_path: &Path,
    spec: &WorldSpec,
) -> std::io::Result<()> {
    let world = MockWorld::generate(spec);
    world.save(world_path)?;
    let mut lines = String::new();
    for root in world.roots() {
        let entity = world.entity(root).expect("root exists");
        lines.push_str(&format!(
            "{}\n",
            serde_json::json!({
                "question": format!("What is notable about {}?", entity.name),
                "domain": entity.domain,
                "source": "mock-world",
            })
        ));
    }
    std::fs::write(seeds_path, lines)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let seeds: Vec<Seed> = (0..10).map(|i| Seed::new(&format!("q{i}?"), "fx")).collect();
        let (td1, bu1) = split_seeds(&seeds, 0.5, 99);
        let (td2, bu2) = split_seeds(&seeds, 0.5, 99);
        assert_eq!(td1, td2);
        assert_eq!(bu1, bu2);
        assert_eq!(td1.len(), 5);
        assert_eq!(bu1.len(), 5);
        let mut all: Vec<&Seed> = td1.iter().chain(bu1.iter()).collect();
        all.sort_by_key(|s| s.id.0.clone());
        let mut orig: Vec<&Seed> = seeds.iter().collect();
        orig.sort_by_key(|s| s.id.0.clone());
        assert_eq!(all, orig);
    }

    #[test]
    fn split_ratio_zero_sends_all_bottomup() {
        let seeds: Vec<Seed> = (0..4).map(|i| Seed::new(&format!("q{i}?"), "fx")).collect();
        let (td, bu) = split_seeds(&seeds, 0.0, 1);
        assert!(td.is_empty());
        assert_eq!(bu.len(), 4);
    }

    #[test]
    fn config_validation() {
        let mut config = RunConfig::default();
        assert!(config.validate().is_ok());
        config.limits.n_votes = 2;
        assert!(matches!(
            config.validate(),
            Err(PipelineError::Config(_))
        ));
        config.limits.n_votes = 3;
        config.split_ratio = 1.5;
        assert!(config.validate().is_err());
    }

    #[test]
    fn default_distill_budget_admits_hundred_call_trajectories() {
        let config = RunConfig::default();
        assert!(config.budgets.distill.max_tool_calls >= 100);
        assert!(config.budgets.distill.max_turns > config.budgets.distill.max_tool_calls);
    }

    #[test]
    fn stage_names_round_trip() {
        for stage in Stage::ALL {
            let parsed: Stage = stage.name().parse().unwrap();
            assert_eq!(parsed, stage);
        }
        assert!("bogus".parse::<Stage>().is_err());
    }
}

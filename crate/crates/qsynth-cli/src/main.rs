//! Command-line entry point: wires the pipeline stages into resumable runs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qsynth::pipeline::{
    generate_world_fixture, run_stage, PipelineError, RunConfig, RunMode, Stage, StageOptions,
    StageSummary,
};
use qsynth::tools::mock::WorldSpec;

#[derive(Parser)]
#[command(
    name = "qsynth",
    version,
    about = "Synthesize hard multi-hop QA pairs by escalating difficulty until a baseline web agent fails, then filter, distill and analyze"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Config-file settings overridden by any flag given here.
#[derive(Args, Debug, Default, Clone)]
struct Overrides {
    /// TOML run configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory for stage outputs, checkpoints and the tool cache.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Seed questions input (one per line, or JSON records with `question`).
    #[arg(long)]
    seeds: Option<PathBuf>,
    /// Run seed; all pipeline randomness derives from it.
    #[arg(long)]
    run_seed: Option<u64>,
    /// `mock` or `live`.
    #[arg(long)]
    mode: Option<String>,
    /// Mock world record file.
    #[arg(long)]
    world: Option<PathBuf>,
    /// Worker threads for record-level parallelism.
    #[arg(long)]
    workers: Option<usize>,
    /// Fraction of seeds routed to the top-down prong.
    #[arg(long)]
    split_ratio: Option<f64>,
    /// Tree depth limit.
    #[arg(long)]
    d_max: Option<u32>,
    /// Tree branching limit.
    #[arg(long)]
    k: Option<u32>,
    /// Top-down round limit.
    #[arg(long)]
    l_max: Option<u32>,
    /// Bottom-up hardening iteration limit.
    #[arg(long)]
    max_iters: Option<u32>,
    /// Anchor candidates proposed per seed.
    #[arg(long)]
    n_candidates: Option<usize>,
    /// Judge panel size (odd).
    #[arg(long)]
    n_votes: Option<u32>,
    /// Rejection-sampling rollouts per QA.
    #[arg(long)]
    n_rollouts: Option<u32>,
    /// Domain share cap for seed rebalancing.
    #[arg(long)]
    cap_fraction: Option<f64>,
    /// Export every retained trajectory instead of one per QA.
    #[arg(long)]
    export_all: bool,
    /// Process at most this many new records, then stop (resume later).
    #[arg(long)]
    limit: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest, categorize and rebalance the seed corpus.
    Seed(Overrides),
    /// Build fact trees for the top-down seeds.
    Tree(Overrides),
    /// Top-down synthesis: escalate over tree branches until the solver fails.
    SynthTopdown(Overrides),
    /// Bottom-up synthesis: rare-entity anchor plus hardening loop.
    SynthBottomup(Overrides),
    /// Consolidated filter: standards, factuality, alternative answers.
    Filter(Overrides),
    /// Rejection-sampling distillation and SFT export.
    Distill(Overrides),
    /// Tool-usage and domain statistics.
    Stats(Overrides),
    /// Every stage in order.
    RunAll(Overrides),
    /// Generate a mock world file plus a matching seed-question file.
    GenWorld {
        /// Output path for the world records.
        #[arg(long, default_value = "world.jsonl")]
        out: PathBuf,
        /// Output path for the seed questions.
        #[arg(long, default_value = "seeds.jsonl")]
        seeds_out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        roots: usize,
        #[arg(long, default_value_t = 4)]
        depth: usize,
        #[arg(long, default_value_t = 3)]
        fanout: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (stages, overrides): (Vec<Stage>, Overrides) = match cli.command {
        Command::Seed(o) => (vec![Stage::Seed], o),
        Command::Tree(o) => (vec![Stage::Tree], o),
        Command::SynthTopdown(o) => (vec![Stage::SynthTopdown], o),
        Command::SynthBottomup(o) => (vec![Stage::SynthBottomup], o),
        Command::Filter(o) => (vec![Stage::Filter], o),
        Command::Distill(o) => (vec![Stage::Distill], o),
        Command::Stats(o) => (vec![Stage::Stats], o),
        Command::RunAll(o) => (Stage::ALL.to_vec(), o),
        Command::GenWorld {
            out,
            seeds_out,
            seed,
            roots,
            depth,
            fanout,
        } => {
            let spec = WorldSpec {
                seed,
                roots,
                depth,
                fanout,
                ..WorldSpec::default()
            };
            return match generate_world_fixture(&out, &seeds_out, &spec) {
                Ok(()) => {
                    println!("world -> {}", out.display());
                    println!("seeds -> {}", seeds_out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("gen-world failed: {e}");
                    ExitCode::from(3)
                }
            };
        }
    };

    let config = match build_config(&overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let options = StageOptions {
        limit: overrides.limit,
    };

    for stage in stages {
        match run_stage(stage, &config, &options) {
            Ok(summary) => print_summary(&summary),
            Err(e @ PipelineError::Config(_)) => {
                eprintln!("{e}");
                return ExitCode::from(2);
            }
            Err(e) => {
                eprintln!("{e}");
                return ExitCode::from(3);
            }
        }
    }
    ExitCode::SUCCESS
}

fn build_config(overrides: &Overrides) -> anyhow::Result<RunConfig> {
    let mut config = match &overrides.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
            toml::from_str::<RunConfig>(&text)
                .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(v) = &overrides.out_dir {
        config.out_dir = v.clone();
    }
    if let Some(v) = &overrides.seeds {
        config.seeds_path = v.clone();
    }
    if let Some(v) = overrides.run_seed {
        config.run_seed = v;
    }
    if let Some(v) = &overrides.mode {
        config.mode = match v.as_str() {
            "mock" => RunMode::Mock,
            "live" => RunMode::Live,
            other => anyhow::bail!("unknown mode `{other}` (mock|live)"),
        };
    }
    if let Some(v) = &overrides.world {
        config.mock.world_path = Some(v.clone());
    }
    if let Some(v) = overrides.workers {
        config.workers = v;
    }
    if let Some(v) = overrides.split_ratio {
        config.split_ratio = v;
    }
    if let Some(v) = overrides.d_max {
        config.limits.d_max = v;
    }
    if let Some(v) = overrides.k {
        config.limits.k = v;
    }
    if let Some(v) = overrides.l_max {
        config.limits.l_max = v;
    }
    if let Some(v) = overrides.max_iters {
        config.limits.max_iters = v;
    }
    if let Some(v) = overrides.n_candidates {
        config.limits.n_candidates = v;
    }
    if let Some(v) = overrides.n_votes {
        config.limits.n_votes = v;
    }
    if let Some(v) = overrides.n_rollouts {
        config.limits.n_rollouts = v;
    }
    if let Some(v) = overrides.cap_fraction {
        config.limits.cap_fraction = v;
    }
    if overrides.export_all {
        config.limits.export_all = true;
    }
    Ok(config)
}

fn print_summary(summary: &StageSummary) {
    let details = if summary.details.is_empty() {
        String::new()
    } else {
        let parts: Vec<String> = summary
            .details
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        format!("  [{}]", parts.join(" "))
    };
    println!(
        "stage {:<14} in={:<6} out={:<6} skipped={:<6}{}",
        summary.stage, summary.input, summary.emitted, summary.skipped, details
    );
}

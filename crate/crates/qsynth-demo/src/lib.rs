//! Browser demo over the deterministic mock world.
//!
//! Exposes three interactive operations to the static page in `www/`:
//! fact-tree construction, top-down escalation and bottom-up hardening,
//! all pure computation over a seeded world, so every control change is
//! instant and reproducible.

use std::sync::Arc;

use serde::Serialize;
use wasm_bindgen::prelude::*;

use qsynth::agent::mock::{Capability, MockBackend};
use qsynth::agent::{AgentBudget, Agents};
use qsynth::bottomup::{acquire_anchor, synthesize_bottomup, WorldPopularity};
use qsynth::clock::FixedClock;
use qsynth::equivalence::RuleEquivalence;
use qsynth::model::{Citation, Entity, Seed};
use qsynth::seeding::derive_seed;
use qsynth::tools::mock::{MockTools, MockWorld, WorldSpec};
use qsynth::tools::{Blocklist, ToolCache, ToolStack};
use qsynth::topdown::synthesize_topdown;
use qsynth::tree::{build_tree, decompose_branches, FactTree};

#[derive(Serialize)]
struct RootInfo {
    index: usize,
    name: String,
    domain: String,
}

#[derive(Serialize)]
struct TreeNodeOut {
    id: usize,
    parent: Option<usize>,
    depth: u32,
    label: String,
    novel: String,
    branch: Option<usize>,
}

#[derive(Serialize)]
struct TreeOut {
    seed_entity: String,
    nodes: Vec<TreeNodeOut>,
    branches: Vec<Vec<usize>>,
}

#[derive(Serialize)]
struct AttemptOut {
    answer: String,
    equivalent: bool,
}

#[derive(Serialize)]
struct TopdownOut {
    emitted: bool,
    outcome: String,
    rounds: u32,
    branches_consumed: u32,
    question: Option<String>,
    answer: Option<String>,
    attempts: Vec<AttemptOut>,
    tree: TreeOut,
}

#[derive(Serialize)]
struct HardeningStepOut {
    iteration: u32,
    question: String,
    solver_answer: Option<String>,
    solved: bool,
}

#[derive(Serialize)]
struct BottomupOut {
    anchor: String,
    anchor_popularity: f64,
    emitted: bool,
    outcome: String,
    question: Option<String>,
    steps: Vec<HardeningStepOut>,
}

/// One deterministic mock world plus the machinery to synthesize against it.
#[wasm_bindgen]
pub struct Demo {
    world: Arc<MockWorld>,
}

fn capability_of(value: i32) -> Capability {
    if value < 0 {
        Capability::Unlimited
    } else {
        Capability::Finite(value as u32)
    }
}

impl Demo {
    fn tools(&self) -> ToolStack<MockTools> {
        ToolStack::new(
            MockTools::new(self.world.clone()),
            Blocklist::default_hosts(),
            ToolCache::in_memory(),
        )
    }

    fn agents(&self, trail: i32, registry: i32) -> Agents {
        let backend = Arc::new(
            MockBackend::new(self.world.clone())
                .with_trail_capability(capability_of(trail))
                .with_registry_capability(capability_of(registry)),
        );
        let mut agents = Agents::homogeneous(backend);
        let budget = AgentBudget {
            max_turns: 240,
            max_tool_calls: 120,
            max_wall_time_ms: 60_000,
        };
        agents.solver.budget = budget;
        agents.researcher.budget = budget;
        agents
    }

    fn root_entity(&self, index: usize) -> Option<Entity> {
        let roots = self.world.roots();
        let id = roots.get(index % roots.len().max(1))?;
        self.world.as_entity(id)
    }

    fn tree_out(&self, tree: &FactTree) -> TreeOut {
        let branches: Vec<Vec<usize>> = decompose_branches(tree)
            .into_iter()
            .map(|b| b.nodes)
            .collect();
        let branch_of = |node: usize| -> Option<usize> {
            branches.iter().position(|b| b.contains(&node))
        };
        TreeOut {
            seed_entity: tree.seed_entity_name().to_string(),
            nodes: tree
                .nodes
                .iter()
                .enumerate()
                .map(|(i, n)| TreeNodeOut {
                    id: i,
                    parent: n.parent,
                    depth: n.depth,
                    label: n.fact.statement.clone(),
                    novel: n.fact.novel_entity.to_string(),
                    branch: branch_of(i),
                })
                .collect(),
            branches,
        }
    }

    fn grow_tree(&self, root_index: usize, d_max: u32, k: u32, run_seed: u64) -> Option<FactTree> {
        let entity = self.root_entity(root_index)?;
        let seed = Seed::new(&format!("What is notable about {}?", entity.name), "demo");
        let agents = self.agents(-1, -1);
        let tools = self.tools();
        build_tree(
            &seed,
            &entity,
            d_max,
            k,
            &agents.researcher,
            &tools,
            &FixedClock,
            derive_seed(run_seed, &["demo-tree", entity.id.as_str()]),
        )
        .ok()
    }
}

#[wasm_bindgen]
impl Demo {
    /// Build the world from a generation seed.
    #[wasm_bindgen(constructor)]
    pub fn new(world_seed: u32, roots: usize, depth: usize, fanout: usize) -> Demo {
        let world = MockWorld::generate(&WorldSpec {
            seed: world_seed as u64,
            roots: roots.clamp(1, 24),
            depth: depth.clamp(1, 5),
            fanout: fanout.clamp(1, 4),
            ..WorldSpec::default()
        });
        Demo {
            world: Arc::new(world),
        }
    }

    /// Root entities available as seeds (JSON array).
    pub fn roots(&self) -> String {
        let out: Vec<RootInfo> = self
            .world
            .roots()
            .iter()
            .enumerate()
            .filter_map(|(i, id)| {
                self.world.entity(id).map(|e| RootInfo {
                    index: i,
                    name: e.name.clone(),
                    domain: e.domain.clone(),
                })
            })
            .collect();
        serde_json::to_string(&out).unwrap_or_else(|_| "[]".into())
    }

    /// Operation 1: build a fact tree under ancestor exclusion and decompose
    /// it into branches (JSON).
    pub fn tree(&self, root_index: usize, d_max: u32, k: u32, run_seed: u32) -> String {
        match self.grow_tree(root_index, d_max.min(5), k.clamp(1, 4), run_seed as u64) {
            Some(tree) => serde_json::to_string(&self.tree_out(&tree)).unwrap_or_default(),
            None => "null".into(),
        }
    }

    /// Operation 2: run top-down escalation against a solver of the given
    /// trail capability (-1 for unlimited). Returns the per-round attempts
    /// and the emitted pair, if any (JSON).
    pub fn topdown(
        &self,
        root_index: usize,
        d_max: u32,
        k: u32,
        l_max: u32,
        solver_capability: i32,
        run_seed: u32,
    ) -> String {
        let Some(tree) = self.grow_tree(root_index, d_max.min(5), k.clamp(1, 4), run_seed as u64)
        else {
            return "null".into();
        };
        let agents = self.agents(solver_capability, -1);
        let tools = self.tools();
        let result = synthesize_topdown(
            &tree,
            &agents,
            &tools,
            &FixedClock,
            &RuleEquivalence,
            l_max.max(1),
            derive_seed(run_seed as u64, &["demo-topdown", tree.seed_id.0.as_str()]),
        );
        let out = match result {
            Ok(r) => TopdownOut {
                emitted: r.qa.is_some(),
                outcome: r.log.outcome.clone(),
                rounds: r.log.rounds,
                branches_consumed: r.log.branches_consumed,
                question: r.qa.as_ref().map(|qa| qa.question.clone()),
                answer: r.qa.as_ref().map(|qa| qa.answer.clone()),
                attempts: r
                    .qa
                    .map(|qa| {
                        qa.solver_attempts
                            .into_iter()
                            .map(|a| AttemptOut {
                                answer: a.answer,
                                equivalent: a.equivalent,
                            })
                            .collect()
                    })
                    .unwrap_or_default(),
                tree: self.tree_out(&tree),
            },
            Err(e) => {
                return serde_json::json!({"error": e.to_string()}).to_string();
            }
        };
        serde_json::to_string(&out).unwrap_or_default()
    }

    /// Operation 3: bottom-up anchor acquisition plus the hardening loop
    /// against a solver of the given registry capability (JSON).
    pub fn bottomup(
        &self,
        root_index: usize,
        max_iters: u32,
        solver_capability: i32,
        n_candidates: usize,
        run_seed: u32,
    ) -> String {
        let Some(entity) = self.root_entity(root_index) else {
            return "null".into();
        };
        let mut seed = Seed::new(&format!("What is notable about {}?", entity.name), "demo");
        seed.domain = entity
            .domain_tags
            .iter()
            .next()
            .cloned()
            .unwrap_or_else(|| "history".into());
        let agents = self.agents(-1, solver_capability);
        let tools = self.tools();
        let signal = WorldPopularity {
            world: self.world.clone(),
        };
        let run_seed = derive_seed(run_seed as u64, &["demo-bottomup", entity.id.as_str()]);
        let anchor = match acquire_anchor(
            &seed,
            &agents.researcher,
            &agents.validator,
            &signal,
            n_candidates.clamp(2, 16),
            &tools,
            &FixedClock,
            run_seed,
        ) {
            Ok(a) => a,
            Err(e) => return serde_json::json!({"error": e.to_string()}).to_string(),
        };
        let citation = self.world.profile_url_of(&anchor.id).map(|url| Citation {
            url,
            snippet: String::new(),
            retrieved_at: qsynth::clock::fixed_epoch(),
        });
        let popularity = self
            .world
            .entity(&anchor.id)
            .map(|e| e.popularity)
            .unwrap_or_default();
        let result = synthesize_bottomup(
            &seed,
            &anchor,
            &agents,
            &tools,
            &FixedClock,
            &RuleEquivalence,
            max_iters.max(1),
            citation,
            run_seed,
        );
        let out = match result {
            Ok(r) => BottomupOut {
                anchor: anchor.name.clone(),
                anchor_popularity: popularity,
                emitted: r.qa.is_some(),
                outcome: r.log.outcome.clone(),
                question: r.qa.map(|qa| qa.question),
                steps: r
                    .log
                    .steps
                    .into_iter()
                    .enumerate()
                    .map(|(i, s)| HardeningStepOut {
                        iteration: i as u32 + 1,
                        question: s.question,
                        solver_answer: s.solver_answer,
                        solved: s.equivalent,
                    })
                    .collect(),
            },
            Err(e) => return serde_json::json!({"error": e.to_string()}).to_string(),
        };
        serde_json::to_string(&out).unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_operations_produce_json() {
        let demo = Demo::new(7, 4, 3, 2);
        let roots: serde_json::Value = serde_json::from_str(&demo.roots()).unwrap();
        assert!(roots.as_array().unwrap().len() >= 4);

        let tree: serde_json::Value = serde_json::from_str(&demo.tree(0, 2, 2, 1)).unwrap();
        assert!(tree["nodes"].as_array().unwrap().len() > 1);
        assert!(!tree["branches"].as_array().unwrap().is_empty());

        let td: serde_json::Value =
            serde_json::from_str(&demo.topdown(0, 2, 2, 8, 1, 1)).unwrap();
        assert_eq!(td["emitted"], true);
        assert!(td["branches_consumed"].as_u64().unwrap() >= 2);

        let bu: serde_json::Value = serde_json::from_str(&demo.bottomup(0, 6, 1, 4, 1)).unwrap();
        assert_eq!(bu["emitted"], true);
        assert!(!bu["steps"].as_array().unwrap().is_empty());
    }
}

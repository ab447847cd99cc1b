//! Tree of relational facts.
//!
//! The root hosts the bare seed entity; every other node hosts a fact that
//! introduces one novel entity, researched under ancestor exclusion so a
//! child is contextually connected to its parent but never circles back to
//! anything an ancestor already named. The tree then decomposes into a
//! queue of disjoint vertical branches: the unit of difficulty escalation.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{research_facts, Agent, GatewayError};
use crate::clock::Clock;
use crate::model::{Entity, EntityId, Fact, InvariantError, Seed, SeedId};
use crate::seeding::derive_seed;
use crate::tools::ToolSuite;

/// One node of the fact tree.
#[derive(Debug, Clone, PartialEq)]
pub struct FactNode {
    pub fact: Fact,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub depth: u32,
}

/// The tree, arena-allocated; index 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct FactTree {
    pub nodes: Vec<FactNode>,
    pub d_max: u32,
    pub k: u32,
    pub seed_id: SeedId,
    /// Research failed at the root: the tree carries no facts.
    pub sparse: bool,
}

/// A maximal vertical chain of node indices, each the parent of the next.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Branch {
    pub nodes: Vec<usize>,
}

impl Branch {
    pub fn facts<'t>(&self, tree: &'t FactTree) -> Vec<&'t Fact> {
        self.nodes.iter().map(|&i| &tree.nodes[i].fact).collect()
    }
}

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("k must be >= 1")]
    InvalidLimits,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// The root's pseudo-fact: it hosts the seed entity itself.
fn root_fact(seed_entity: &Entity) -> Fact {
    Fact {
        id: Fact::make_id(&seed_entity.name, &seed_entity.id),
        statement: seed_entity.name.clone(),
        subject_entities: vec![seed_entity.id.clone()],
        novel_entity: seed_entity.id.clone(),
        citations: Vec::new(),
    }
}

impl FactTree {
    pub fn root(&self) -> &FactNode {
        &self.nodes[0]
    }

    pub fn seed_entity_name(&self) -> &str {
        &self.nodes[0].fact.statement
    }

    /// Entities named by the facts of `node` and all its strict ancestors.
    fn ancestor_entities(&self, node: usize) -> Vec<EntityId> {
        let mut out = Vec::new();
        let mut cursor = Some(node);
        while let Some(i) = cursor {
            for e in &self.nodes[i].fact.subject_entities {
                if !out.contains(e) {
                    out.push(e.clone());
                }
            }
            cursor = self.nodes[i].parent;
        }
        out
    }

    /// Facts hosted by the strict ancestors of `node`, nearest first.
    fn ancestor_facts(&self, node: usize) -> Vec<Fact> {
        let mut out = Vec::new();
        let mut cursor = self.nodes[node].parent;
        while let Some(i) = cursor {
            out.push(self.nodes[i].fact.clone());
            cursor = self.nodes[i].parent;
        }
        out
    }
}

/// Build the tree by recursive depth-first researcher expansion with
/// ancestor exclusion. Research failure below the root prunes that node to
/// a leaf; failure at the root yields a root-only tree flagged sparse.
pub fn build_tree(
    seed: &Seed,
    seed_entity: &Entity,
    d_max: u32,
    k: u32,
    researcher: &Agent,
    tools: &dyn ToolSuite,
    clock: &dyn Clock,
    run_seed: u64,
) -> Result<FactTree, TreeError> {
    if k == 0 {
        return Err(TreeError::InvalidLimits);
    }
    let mut tree = FactTree {
        nodes: vec![FactNode {
            fact: root_fact(seed_entity),
            parent: None,
            children: Vec::new(),
            depth: 0,
        }],
        d_max,
        k,
        seed_id: seed.id.clone(),
        sparse: false,
    };
    expand(&mut tree, 0, researcher, tools, clock, run_seed);
    if tree.nodes.len() == 1 && d_max > 0 {
        tree.sparse = true;
    }
    Ok(tree)
}

fn expand(
    tree: &mut FactTree,
    node: usize,
    researcher: &Agent,
    tools: &dyn ToolSuite,
    clock: &dyn Clock,
    run_seed: u64,
) {
    if tree.nodes[node].depth >= tree.d_max {
        return;
    }
    let focus_fact = tree.nodes[node].fact.clone();
    let exclusions = tree.ancestor_facts(node);
    let focus_entities: Vec<Entity> = focus_fact
        .subject_entities
        .iter()
        .map(|id| Entity {
            id: id.clone(),
            name: id.as_str().to_string(),
            domain_tags: Default::default(),
        })
        .collect();
    let seed = derive_seed(run_seed, &["expand", tree.seed_id.0.as_str(), &node.to_string()]);
    let facts = match research_facts(
        researcher,
        &focus_fact.statement,
        &focus_entities,
        &exclusions,
        tree.k as usize,
        tools,
        clock,
        seed,
    ) {
        Ok(facts) => facts,
        // An exhausted or failing focus becomes a leaf.
        Err(_) => return,
    };

    let forbidden = tree.ancestor_entities(node);
    let mut children = Vec::new();
    for fact in facts {
        if children.len() as u32 >= tree.k {
            break;
        }
        // Ancestor exclusion, re-checked against the tree itself: the novel
        // entity must be new relative to this whole path.
        if forbidden.contains(&fact.novel_entity) {
            continue;
        }
        if children
            .iter()
            .any(|&c: &usize| tree.nodes[c].fact.novel_entity == fact.novel_entity)
        {
            continue;
        }
        let depth = tree.nodes[node].depth + 1;
        let idx = tree.nodes.len();
        tree.nodes.push(FactNode {
            fact,
            parent: Some(node),
            children: Vec::new(),
            depth,
        });
        tree.nodes[node].children.push(idx);
        children.push(idx);
    }
    for child in children {
        expand(tree, child, researcher, tools, clock, run_seed);
    }
}

/// Decompose into the queue of disjoint DFS branches: walking preorder, an
/// unclaimed node opens a branch that runs down first-unclaimed-child links
/// to a leaf. Every non-root node lands in exactly one branch and the queue
/// order is discovery order.
pub fn decompose_branches(tree: &FactTree) -> VecDeque<Branch> {
    let mut claimed = vec![false; tree.nodes.len()];
    let mut branches = VecDeque::new();
    let mut order = Vec::new();
    preorder(tree, 0, &mut order);
    for node in order {
        if node == 0 || claimed[node] {
            continue;
        }
        let mut chain = vec![node];
        claimed[node] = true;
        let mut cursor = node;
        loop {
            let next = tree.nodes[cursor]
                .children
                .iter()
                .copied()
                .find(|&c| !claimed[c]);
            match next {
                Some(c) => {
                    claimed[c] = true;
                    chain.push(c);
                    cursor = c;
                }
                None => break,
            }
        }
        branches.push_back(Branch { nodes: chain });
    }
    branches
}

fn preorder(tree: &FactTree, node: usize, out: &mut Vec<usize>) {
    out.push(node);
    for &c in &tree.nodes[node].children {
        preorder(tree, c, out);
    }
}

/// Persisted form: one record per node, parent by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNodeRecord {
    pub seed_id: SeedId,
    pub node_id: String,
    pub parent: Option<String>,
    pub depth: u32,
    pub d_max: u32,
    pub k: u32,
    pub sparse: bool,
    pub fact: Fact,
}

impl TreeNodeRecord {
    pub fn validate(&self) -> Result<(), InvariantError> {
        self.fact.validate()?;
        if (self.depth == 0) != self.parent.is_none() {
            return Err(InvariantError {
                type_name: "TreeNodeRecord",
                message: "depth zero iff no parent".into(),
            });
        }
        if self.depth > 0 {
            self.fact.validate_researched()?;
        }
        Ok(())
    }
}

fn node_id(seed_id: &SeedId, idx: usize) -> String {
    format!("{seed_id}-n{idx}")
}

pub fn tree_to_records(tree: &FactTree) -> Vec<TreeNodeRecord> {
    tree.nodes
        .iter()
        .enumerate()
        .map(|(i, n)| TreeNodeRecord {
            seed_id: tree.seed_id.clone(),
            node_id: node_id(&tree.seed_id, i),
            parent: n.parent.map(|p| node_id(&tree.seed_id, p)),
            depth: n.depth,
            d_max: tree.d_max,
            k: tree.k,
            sparse: tree.sparse,
            fact: n.fact.clone(),
        })
        .collect()
}

/// Rebuild a tree from its node records (any order).
pub fn tree_from_records(records: &[TreeNodeRecord]) -> Result<FactTree, String> {
    let root = records
        .iter()
        .find(|r| r.parent.is_none())
        .ok_or("no root record")?;
    let mut ordered: Vec<&TreeNodeRecord> = records.iter().collect();
    // Node ids encode the original arena order.
    ordered.sort_by_key(|r| {
        r.node_id
            .rsplit            ('n')
            .next()
            .and_then(|s| s.parse::<usize>().ok())
            .unwrap_or(usize::MAX)
    });
    let index_of = |id: &str| ordered.iter().position(|r| r.node_id == id);
    let mut nodes = Vec::with_capacity(ordered.len());
    for r in &ordered {
        let parent = match &r.parent {
            Some(pid) => Some(index_of(pid).ok_or_else(|| format!("missing parent {pid}"))?),
            None => None,
        };
        nodes.push(FactNode {
            fact: r.fact.clone(),
            parent,
            children: Vec::new(),
            depth: r.depth,
        });
    }
    for i in 0..nodes.len() {
        if let Some(p) = nodes[i].parent {
            nodes[p].children.push(i);
        }
    }
    Ok(FactTree {
        nodes,
        d_max: root.d_max,
        k: root.k,
        seed_id: root.seed_id.clone(),
        sparse: root.sparse,
    })
}

/// Structure and invariant checkers, independent of the construction path.
/// The brute-force partition checks here are the oracles the acceptance
/// suite runs against every generated tree.
pub mod verify {
    use super::*;

    /// Depth/branching bounds, parent-child consistency, citation rule and
    /// the ancestor-exclusion invariant.
    pub fn check_tree(tree: &FactTree) -> Result<(), String> {
        if tree.nodes.is_empty() {
            return Err("empty tree".into());
        }
        if tree.nodes[0].parent.is_some() || tree.nodes[0].depth != 0 {
            return Err("malformed root".into());
        }
        for (i, n) in tree.nodes.iter().enumerate() {
            if n.children.len() as u32 > tree.k {
                return Err(format!("node {i} exceeds branching limit"));
            }
            if n.depth > tree.d_max {
                return Err(format!("node {i} exceeds depth limit"));
            }
            for &c in &n.children {
                if tree.nodes[c].parent != Some(i) {
                    return Err(format!("child {c} does not point back to {i}"));
                }
                if tree.nodes[c].depth != n.depth + 1 {
                    return Err(format!("child {c} depth is not parent+1"));
                }
            }
            if i != 0 {
                if n.fact.citations.is_empty() {
                    return Err(format!("non-root node {i} carries no citation"));
                }
                n.fact
                    .validate_researched()
                    .map_err(|e| format!("node {i}: {e}"))?;
            }
        }
        check_exclusion(tree)
    }

    /// For every non-root node `n` with parent `p`: entities of `fact(n)`
    /// never intersect the entities of the facts of `p`'s strict ancestors,
    /// and the only permitted overlap with `p`'s own fact is one connecting
    /// entity; the novel entity is new along the whole path.
    pub fn check_exclusion(tree: &FactTree) -> Result<(), String> {
        for (i, n) in tree.nodes.iter().enumerate() {
            let Some(p) = n.parent else { continue };
            let mut above_parent: Vec<&EntityId> = Vec::new();
            let mut cursor = tree.nodes[p].parent;
            while let Some(a) = cursor {
                above_parent.extend(tree.nodes[a].fact.subject_entities.iter());
                cursor = tree.nodes[a].parent;
            }
            for e in &n.fact.subject_entities {
                if above_parent.contains(&e) {
                    return Err(format!(
                        "node {i}: entity `{e}` already named above its parent"
                    ));
                }
            }
            let mut path_entities: Vec<&EntityId> =
                tree.nodes[p].fact.subject_entities.iter().collect();
            path_entities.extend(above_parent.iter().copied());
            if path_entities.contains(&&n.fact.novel_entity) {
                return Err(format!(
                    "node {i}: novel entity `{}` is not novel on its path",
                    n.fact.novel_entity
                ));
            }
        }
        Ok(())
    }

    /// Brute-force partition check: branches must be vertical chains that
    /// disjointly cover exactly the non-root nodes, queued in DFS discovery
    /// order, and their count must equal the minimum possible for any
    /// disjoint chain cover (one per leaf).
    pub fn check_branch_partition(tree: &FactTree, branches: &VecDeque<Branch>) -> Result<(), String> {
        let mut seen = vec![false; tree.nodes.len()];
        for (bi, b) in branches.iter().enumerate() {
            if b.nodes.is_empty() {
                return Err(format!("branch {bi} is empty"));
            }
            for w in b.nodes.windows(2) {
                if tree.nodes[w[1]].parent != Some(w[0]) {
                    return Err(format!("branch {bi} is not a vertical chain"));
                }
            }
            for &n in &b.nodes {
                if n == 0 {
                    return Err(format!("branch {bi} contains the root"));
                }
                if seen[n] {
                    return Err(format!("node {n} claimed by two branches"));
                }
                seen[n] = true;
            }
        }
        for (i, covered) in seen.iter().enumerate().skip(1) {
            if !covered {
                return Err(format!("node {i} not covered by any branch"));
            }
        }
        let leaves = tree
            .nodes
            .iter()
            .enumerate()
            .filter(|(i, n)| *i != 0 && n.children.is_empty())
            .count();
        let expected = if tree.nodes.len() == 1 { 0 } else { leaves };
        if branches.len() != expected {
            return Err(format!(
                "{} branches but {} leaves: not a minimal chain cover",
                branches.len(),
                expected
            ));
        }
        // Queue order must be DFS discovery order of branch heads.
        let mut order = Vec::new();
        preorder(tree, 0, &mut order);
        let position: std::collections::HashMap<usize, usize> =
            order.iter().enumerate().map(|(p, &n)| (n, p)).collect();
        let mut last = 0usize;
        for b in branches {
            let head = position[&b.nodes[0]];
            if head < last {
                return Err("branches are not in DFS discovery order".into());
            }
            last = head;
        }
        Ok(())
    }

    /// Exhaustively enumerate every partition of the non-root nodes into
    /// vertical chains and return the minimum chain count. Exponential; for
    /// small oracle trees only.
    pub fn min_chain_cover_exhaustive(tree: &FactTree) -> usize {
        // In any chain partition, each node either starts a chain or extends
        // its parent's chain, and a parent can be extended by at most one
        // child. Enumerate those choices.
        fn go(tree: &FactTree, order: &[usize], at: usize, extended: &mut Vec<bool>, chains: usize, best: &mut usize) {
            if at == order.len() {
                *best = (*best).min(chains);
                return;
            }
            let node = order[at];
            // Start a new chain at this node.
            go(tree, order, at + 1, extended, chains + 1, best);
            // Or extend the parent's chain when it is still extendable.
            if let Some(p) = tree.nodes[node].parent {
                if p != 0 || true {
                    // Root never belongs to a chain, so only non-root
                    // parents can be extended.
                    if p != 0 && !extended[p] {
                        extended[p] = true;
                        go(tree, order, at + 1, extended, chains, best);
                        extended[p] = false;
                    }
                }
            }
        }
        let mut order = Vec::new();
        preorder(tree, 0, &mut order);
        let order: Vec<usize> = order.into_iter().filter(|&n| n != 0).collect();
        if order.is_empty() {
            return 0;
        }
        let mut best = usize::MAX;
        let mut extended = vec![false; tree.nodes.len()];
        go(tree, &order, 0, &mut extended, 0, &mut best);
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Citation;

    /// Hand-build a tree from (parent, name) pairs; index 0 is the root.
    pub(crate) fn toy_tree(edges: &[(usize, &str)], d_max: u32, k: u32) -> FactTree {
        let root_entity = Entity::new("Root");
        let mut tree = FactTree {
            nodes: vec![FactNode {
                fact: root_fact(&root_entity),
                parent: None,
                children: Vec::new(),
                depth: 0,
            }],
            d_max,
            k,
            seed_id: SeedId("s-test".into()),
            sparse: false,
        };
        for &(parent, name) in edges {
            let parent_novel = tree.nodes[parent].fact.novel_entity.clone();
            let novel = EntityId::from_name(name);
            let statement = format!("{} links to {}", parent_novel, name);
            let idx = tree.nodes.len();
            let depth = tree.nodes[parent].depth + 1;
            tree.nodes.push(FactNode {
                fact: Fact {
                    id: Fact::make_id(&statement, &novel),
                    statement,
                    subject_entities: vec![parent_novel, novel.clone()],
                    novel_entity: novel,
                    citations: vec![Citation {
                        url: format!("https://example.org/{idx}"),
                        snippet: String::new(),
                        retrieved_at: crate::clock::fixed_epoch(),
                    }],
                },
                parent: Some(parent),
                children: Vec::new(),
                depth,
            });
            tree.nodes[parent].children.push(idx);
        }
        tree
    }

    #[test]
    fn root_only_tree_has_no_branches() {
        let tree = toy_tree(&[], 0, 1);
        let branches = decompose_branches(&tree);
        assert!(branches.is_empty());
        verify::check_branch_partition(&tree, &branches).unwrap();
    }

    #[test]
    fn chain_of_three_yields_one_branch_of_two_nonroot_nodes() {
        // Root -> a -> b: the seed-hosting root stays out of branches.
        let tree = toy_tree(&[(0, "a"), (1, "b")], 2, 1);
        let branches = decompose_branches(&tree);
        assert_eq!(branches.len(), 1);
        assert_eq!(branches[0].nodes, vec![1, 2]);
        verify::check_branch_partition(&tree, &branches).unwrap();
    }

    #[test]
    fn full_binary_tree_depth_two_matches_exhaustive_minimum() {
        let tree = toy_tree(
            &[(0, "a"), (1, "aa"), (1, "ab"), (0, "b"), (4, "ba"), (4, "bb")],
            2,
            2,
        );
        let branches = decompose_branches(&tree);
        let minimum = verify::min_chain_cover_exhaustive(&tree);
        assert_eq!(branches.len(), minimum);
        // One branch per leaf (4 leaves in a full binary tree of depth 2).
        assert_eq!(minimum, 4);
        verify::check_branch_partition(&tree, &branches).unwrap();
    }

    #[test]
    fn three_branch_shape() {
        // Root with children a, b; a has children aa, ab. Three leaves.
        let tree = toy_tree(&[(0, "a"), (1, "aa"), (1, "ab"), (0, "b")], 2, 2);
        let branches = decompose_branches(&tree);
        assert_eq!(branches.len(), 3);
        assert_eq!(branches.len(), verify::min_chain_cover_exhaustive(&tree));
        // Discovery order: [a, aa], [ab], [b].
        assert_eq!(branches[0].nodes, vec![1, 2]);
        assert_eq!(branches[1].nodes, vec![3]);
        assert_eq!(branches[2].nodes, vec![4]);
        verify::check_branch_partition(&tree, &branches).unwrap();
    }

    #[test]
    fn exclusion_checker_catches_circular_entities() {
        let mut tree = toy_tree(&[(0, "a"), (1, "b")], 2, 1);
        // Doctor node 2's fact to re-mention the root entity.
        tree.nodes[2]
            .fact
            .subject_entities
            .push(EntityId::from_name("Root"));
        assert!(verify::check_exclusion(&tree).is_err());
    }

    #[test]
    fn record_round_trip() {
        let tree = toy_tree(&[(0, "a"), (1, "aa"), (0, "b")], 2, 2);
        let records = tree_to_records(&tree);
        for r in &records {
            r.validate().unwrap();
        }
        let rebuilt = tree_from_records(&records).unwrap();
        assert_eq!(rebuilt, tree);
    }
}

//! Scenario trees and the bundle structure non-anticipativity is defined over.
//!
//! Stages are numbered `1..=T` (root at stage 1). Node ids are dense and assigned
//! breadth-first; scenarios are the leaves in id order and are numbered from 0.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::jsonl;

/// Multiplicative realization levels (low, mid, high) drawn for each branch.
pub const DEFAULT_PAYLOAD_LEVELS: [f64; 3] = [0.8, 1.0, 1.2];

const PROB_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub id: usize,
    pub stage: usize,
    pub parent: Option<usize>,
    /// Probability of this node conditional on its parent (1 for the root).
    pub prob: f64,
    pub payload: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTree {
    horizon: usize,
    branching: Vec<usize>,
    seed: u64,
    payload_dim: usize,
    nodes: Vec<TreeNode>,
    /// First node id of every stage, plus one trailing entry equal to the node count.
    stage_start: Vec<usize>,
}

/// Scenarios sharing the same node at `stage`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioBundle {
    pub stage: usize,
    /// The node every member passes through at `stage`.
    pub node: usize,
    /// Member scenario ids, ascending. The first one is the representative.
    pub members: Vec<usize>,
}

impl ScenarioBundle {
    pub fn representative(&self) -> usize {
        self.members[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioPath {
    pub scenario: usize,
    /// Node id at stages `1..=T`.
    pub nodes: Vec<usize>,
    pub probability: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TreeHeader {
    #[serde(rename = "T")]
    horizon: usize,
    branching: Vec<usize>,
    seed: u64,
    payload_dim: usize,
}

/// Builds a full tree with uniform conditional probabilities and payloads drawn
/// from [`DEFAULT_PAYLOAD_LEVELS`].
pub fn build_tree(branching: &[usize], seed: u64, payload_dim: usize) -> Result<ScenarioTree> {
    build_tree_with_levels(branching, seed, payload_dim, &DEFAULT_PAYLOAD_LEVELS)
}

pub fn build_tree_with_levels(
    branching: &[usize],
    seed: u64,
    payload_dim: usize,
    levels: &[f64],
) -> Result<ScenarioTree> {
    if branching.is_empty() {
        return invalid("branching must list at least one factor");
    }
    if branching.contains(&0) {
        return invalid("branching factors must be positive");
    }
    if payload_dim == 0 {
        return invalid("payload dimension must be at least 1");
    }
    if levels.is_empty() {
        return invalid("payload levels must be non-empty");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = vec![TreeNode {
        id: 0,
        stage: 1,
        parent: None,
        prob: 1.0,
        payload: vec![1.0; payload_dim],
    }];
    let mut frontier = vec![0usize];
    for (k, &b) in branching.iter().enumerate() {
        let stage = k + 2;
        let mut next = Vec::with_capacity(frontier.len() * b);
        for &parent in &frontier {
            for _ in 0..b {
                let id = nodes.len();
                let payload = (0..payload_dim)
                    .map(|_| levels[rng.gen_range(0..levels.len())])
                    .collect();
                nodes.push(TreeNode {
                    id,
                    stage,
                    parent: Some(parent),
                    prob: 1.0 / b as f64,
                    payload,
                });
                next.push(id);
            }
        }
        frontier = next;
    }
    ScenarioTree::from_nodes(branching.to_vec(), seed, nodes)
}

impl ScenarioTree {
    /// Single-path tree with unit payloads: the deterministic special case.
    pub fn deterministic(horizon: usize, payload_dim: usize) -> Result<Self> {
        if horizon < 1 {
            return invalid("horizon must be at least 1");
        }
        if payload_dim == 0 {
            return invalid("payload dimension must be at least 1");
        }
        let nodes = (0..horizon)
            .map(|t| TreeNode {
                id: t,
                stage: t + 1,
                parent: t.checked_sub(1),
                prob: 1.0,
                payload: vec![1.0; payload_dim],
            })
            .collect();
        Self::from_nodes(vec![1; horizon - 1], 0, nodes)
    }

    /// Assembles a tree from explicit nodes and validates every structural invariant.
    pub fn from_nodes(branching: Vec<usize>, seed: u64, nodes: Vec<TreeNode>) -> Result<Self> {
        if branching.contains(&0) {
            return invalid("branching factors must be positive");
        }
        let horizon = branching.len() + 1;
        let mut stage_start = vec![0, 1];
        let mut width = 1usize;
        for &b in &branching {
            width *= b;
            stage_start.push(stage_start.last().unwrap() + width);
        }
        let expected = *stage_start.last().unwrap();
        if nodes.len() != expected {
            return invalid(format!(
                "full tree with branching {branching:?} needs {expected} nodes, got {}",
                nodes.len()
            ));
        }
        let payload_dim = nodes.first().map(|n| n.payload.len()).unwrap_or(0);
        if payload_dim == 0 {
            return invalid("payload dimension must be at least 1");
        }
        let mut child_prob = vec![0.0; nodes.len()];
        let mut child_count = vec![0usize; nodes.len()];
        for (i, node) in nodes.iter().enumerate() {
            if node.id != i {
                return invalid(format!("node ids must be dense, found {} at {i}", node.id));
            }
            if node.payload.len() != payload_dim {
                return invalid(format!("node {i} payload has wrong dimension"));
            }
            if node.payload.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("payload of node {i}")));
            }
            if !(node.prob > 0.0 && node.prob <= 1.0) {
                return invalid(format!("node {i} probability {} outside (0,1]", node.prob));
            }
            let stage_ok = (1..=horizon).contains(&node.stage)
                && (stage_start[node.stage - 1]..stage_start[node.stage]).contains(&i);
            if !stage_ok {
                return invalid(format!("node {i} is not in breadth-first stage order"));
            }
            match node.parent {
                None if i == 0 => {}
                None => return invalid(format!("node {i} has no parent but is not the root")),
                Some(p) => {
                    if p >= nodes.len() || nodes[p].stage + 1 != node.stage {
                        return invalid(format!("node {i} parent must be one stage earlier"));
                    }
                    child_prob[p] += node.prob;
                    child_count[p] += 1;
                }
            }
        }
        for (i, node) in nodes.iter().enumerate() {
            if node.stage < horizon {
                let b = branching[node.stage - 1];
                if child_count[i] != b {
                    return invalid(format!("node {i} has {} children, expected {b}", child_count[i]));
                }
                if (child_prob[i] - 1.0).abs() > PROB_TOL {
                    return invalid(format!(
                        "children of node {i} have probabilities summing to {}",
                        child_prob[i]
                    ));
                }
            }
        }
        Ok(Self {
            horizon,
            branching,
            seed,
            payload_dim,
            nodes,
            stage_start,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn branching(&self) -> &[usize] {
        &self.branching
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn payload_dim(&self) -> usize {
        self.payload_dim
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn scenario_count(&self) -> usize {
        self.stage_start[self.horizon] - self.stage_start[self.horizon - 1]
    }

    /// Node ids at `stage` (1-based), in id order.
    pub fn stage_nodes(&self, stage: usize) -> std::ops::Range<usize> {
        self.stage_start[stage - 1]..self.stage_start[stage]
    }

    pub fn leaf(&self, scenario: usize) -> usize {
        self.stage_start[self.horizon - 1] + scenario
    }

    /// Ancestor of `node` at `stage` (the node itself when stages agree).
    pub fn ancestor(&self, mut node: usize, stage: usize) -> usize {
        while self.nodes[node].stage > stage {
            node = self.nodes[node].parent.expect("non-root node has a parent");
        }
        node
    }

    /// Unconditional probability of reaching `node`.
    pub fn reach_probability(&self, node: usize) -> f64 {
        let mut p = 1.0;
        let mut cur = Some(node);
        while let Some(n) = cur {
            p *= self.nodes[n].prob;
            cur = self.nodes[n].parent;
        }
        p
    }

    pub fn path_nodes(&self, scenario: usize) -> Vec<usize> {
        let mut path = Vec::with_capacity(self.horizon);
        let mut cur = Some(self.leaf(scenario));
        while let Some(n) = cur {
            path.push(n);
            cur = self.nodes[n].parent;
        }
        path.reverse();
        path
    }

    /// Partition of the scenarios by their shared node at `stage`, ordered by
    /// smallest member.
    pub fn bundle_partition(&self, stage: usize) -> Result<Vec<ScenarioBundle>> {
        if stage < 1 || stage > self.horizon {
            return invalid(format!("stage {stage} outside 1..={}", self.horizon));
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for s in 0..self.scenario_count() {
            groups
                .entry(self.ancestor(self.leaf(s), stage))
                .or_default()
                .push(s);
        }
        let mut bundles: Vec<ScenarioBundle> = groups
            .into_iter()
            .map(|(node, members)| ScenarioBundle { stage, node, members })
            .collect();
        bundles.sort_by_key(|b| b.members[0]);
        Ok(bundles)
    }

    /// Bundle partitions for every stage, index `t - 1` holding stage `t`.
    pub fn all_bundles(&self) -> Vec<Vec<ScenarioBundle>> {
        (1..=self.horizon)
            .map(|t| self.bundle_partition(t).expect("stage in range"))
            .collect()
    }

    pub fn scenario_paths(&self) -> Vec<ScenarioPath> {
        (0..self.scenario_count())
            .map(|s| {
                let nodes = self.path_nodes(s);
                let probability = nodes.iter().map(|&n| self.nodes[n].prob).product();
                ScenarioPath {
                    scenario: s,
                    nodes,
                    probability,
                }
            })
            .collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = Vec::new();
        let header = TreeHeader {
            horizon: self.horizon,
            branching: self.branching.clone(),
            seed: self.seed,
            payload_dim: self.payload_dim,
        };
        jsonl::write_record(&mut out, &header).expect("in-memory write");
        for node in &self.nodes {
            jsonl::write_record(&mut out, node).expect("in-memory write");
        }
        String::from_utf8(out).expect("json is utf-8")
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut lines = jsonl::lines(text);
        let (_, first) = lines
            .next()
            .ok_or_else(|| Error::Format("empty tree document".into()))?;
        let header: TreeHeader = serde_json::from_str(first)?;
        let nodes = lines
            .map(|(no, l)| {
                serde_json::from_str::<TreeNode>(l)
                    .map_err(|e| Error::Format(format!("line {no}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let tree = Self::from_nodes(header.branching, header.seed, nodes)?;
        if tree.horizon != header.horizon || tree.payload_dim != header.payload_dim {
            return Err(Error::Format("tree header disagrees with node records".into()));
        }
        Ok(tree)
    }
}

// Trees are embedded in instance records as their JSONL text so both encodings agree.
impl Serialize for ScenarioTree {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            header: TreeHeader,
            nodes: &'a [TreeNode],
        }
        Repr {
            header: TreeHeader {
                horizon: self.horizon,
                branching: self.branching.clone(),
                seed: self.seed,
                payload_dim: self.payload_dim,
            },
            nodes: &self.nodes,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ScenarioTree {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            header: TreeHeader,
            nodes: Vec<TreeNode>,
        }
        let repr = Repr::deserialize(d)?;
        ScenarioTree::from_nodes(repr.header.branching, repr.header.seed, repr.nodes)
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(bundles: &[ScenarioBundle]) -> Vec<Vec<usize>> {
        bundles.iter().map(|b| b.members.clone()).collect()
    }

    #[test]
    fn counts_for_two_by_two() {
        let tree = build_tree(&[2, 2], 1, 1).unwrap();
        assert_eq!(tree.horizon(), 3);
        assert_eq!(tree.node_count(), 7);
        assert_eq!(tree.scenario_count(), 4);
    }

    #[test]
    fn degenerate_chain_has_singleton_bundles() {
        let tree = build_tree(&[1, 1], 3, 2).unwrap();
        assert_eq!(tree.node_count(), 3);
        assert_eq!(tree.scenario_count(), 1);
        for t in 1..=3 {
            assert_eq!(ids(&tree.bundle_partition(t).unwrap()), vec![vec![0]]);
        }
    }

    #[test]
    fn seeded_build_is_reproducible() {
        let a = build_tree(&[3], 7, 4).unwrap();
        let b = build_tree(&[3], 7, 4).unwrap();
        assert_eq!(a.to_jsonl(), b.to_jsonl());
        let c = build_tree(&[3], 8, 4).unwrap();
        assert_ne!(a.to_jsonl(), c.to_jsonl());
    }

    #[test]
    fn zero_branching_rejected() {
        assert!(matches!(build_tree(&[2, 0], 1, 1), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_tree(&[], 1, 1), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_tree(&[2], 1, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn bundles_of_two_by_two() {
        let tree = build_tree(&[2, 2], 1, 1).unwrap();
        assert_eq!(ids(&tree.bundle_partition(1).unwrap()), vec![vec![0, 1, 2, 3]]);
        assert_eq!(ids(&tree.bundle_partition(2).unwrap()), vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(
            ids(&tree.bundle_partition(3).unwrap()),
            vec![vec![0], vec![1], vec![2], vec![3]]
        );
        assert!(tree.bundle_partition(0).is_err());
        assert!(tree.bundle_partition(4).is_err());
    }

    #[test]
    fn uniform_path_probabilities() {
        let paths = build_tree(&[2], 0, 1).unwrap().scenario_paths();
        assert_eq!(paths.len(), 2);
        assert!(paths.iter().all(|p| p.probability == 0.5));
        let paths = build_tree(&[2, 2], 0, 1).unwrap().scenario_paths();
        assert!(paths.iter().all(|p| p.probability == 0.25));
        assert_eq!(paths[3].nodes, vec![0, 2, 6]);
    }

    #[test]
    fn product_rule_with_skewed_first_stage() {
        let mut tree = build_tree(&[2, 2], 0, 1).unwrap();
        let mut nodes = tree.nodes.clone();
        nodes[1].prob = 0.3;
        nodes[2].prob = 0.7;
        tree = ScenarioTree::from_nodes(vec![2, 2], 0, nodes).unwrap();
        let probs: Vec<f64> = tree.scenario_paths().iter().map(|p| p.probability).collect();
        let expected = [0.15, 0.15, 0.35, 0.35];
        for (p, e) in probs.iter().zip(expected) {
            assert!((p - e).abs() < 1e-15, "{p} vs {e}");
        }
    }

    #[test]
    fn rejects_bad_probabilities() {
        let tree = build_tree(&[2], 0, 1).unwrap();
        let mut nodes = tree.nodes.clone();
        nodes[1].prob = 0.4;
        assert!(ScenarioTree::from_nodes(vec![2], 0, nodes).is_err());
    }

    #[test]
    fn jsonl_round_trip_is_exact() {
        let mut nodes = build_tree(&[3, 2], 11, 3).unwrap().nodes.clone();
        nodes[1].prob = 0.1;
        nodes[2].prob = 0.2;
        nodes[3].prob = 0.7;
        nodes[4].payload[0] = std::f64::consts::PI / 7.0;
        let tree = ScenarioTree::from_nodes(vec![3, 2], 11, nodes).unwrap();
        let text = tree.to_jsonl();
        let back = ScenarioTree::from_jsonl(&text).unwrap();
        assert_eq!(back, tree);
        assert_eq!(back.to_jsonl(), text);
        assert!(text.lines().next().unwrap().contains("\"T\":3"));
    }
}

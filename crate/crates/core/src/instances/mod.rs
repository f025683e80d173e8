//! Problem instances: multi-item capacitated lot sizing (MCLSP) and the
//! multi-stage knapsack (MSMK), deterministic or bound to a scenario tree.
//!
//! Every instance can be viewed as a [`StochasticInstance`]; deterministic ones
//! become a single-path tree whose node `t - 1` is stage `t`. Downstream code
//! (extensive form, evaluation, features) works on that node-indexed view only.

mod evaluate;
mod generate;
pub mod io;
mod restrict;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scenario::ScenarioTree;

pub use evaluate::{evaluate_solution, Evaluation, FEASIBILITY_TOL};
pub use generate::{
    generate_mclsp, generate_msmk, generate_stochastic, MclspRanges, MsmkRanges,
};
pub use restrict::{restrict_to_items, restrict_to_subset, subset_share};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Mclsp,
    Msmk,
}

/// Arrays are indexed `[item][stage - 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MclspInstance {
    pub items: usize,
    pub horizon: usize,
    pub demand: Vec<Vec<f64>>,
    pub capacity: Vec<f64>,
    pub setup_cost: Vec<Vec<f64>>,
    pub production_cost: Vec<Vec<f64>>,
    pub holding_cost: Vec<Vec<f64>>,
    pub initial_inventory: Vec<f64>,
}

/// One knapsack per stage; an item can be selected at most once along any path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsmkInstance {
    pub items: usize,
    pub horizon: usize,
    pub value: Vec<Vec<f64>>,
    pub weight: Vec<Vec<f64>>,
    pub capacity: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "base", rename_all = "lowercase")]
pub enum BaseInstance {
    Mclsp(MclspInstance),
    Msmk(MsmkInstance),
}

/// A base instance whose uncertain parameter (MCLSP demand, MSMK value) is
/// realized per tree node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticInstance {
    pub base: BaseInstance,
    pub tree: ScenarioTree,
    /// Realized uncertain parameter, `[node][item]`.
    pub overrides: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Instance {
    Mclsp(MclspInstance),
    Msmk(MsmkInstance),
    #[serde(rename = "stoch")]
    Stochastic(StochasticInstance),
}

/// Decisions indexed by `[item][node]`. Production and inventory are empty for MSMK.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionVector {
    pub binary: Vec<Vec<f64>>,
    pub production: Vec<Vec<f64>>,
    pub inventory: Vec<Vec<f64>>,
    pub objective: f64,
}

fn check_matrix(name: &str, m: &[Vec<f64>], rows: usize, cols: usize) -> Result<()> {
    if m.len() != rows || m.iter().any(|r| r.len() != cols) {
        return invalid(format!("{name} must be {rows}x{cols}"));
    }
    if m.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
        return invalid(format!("{name} entries must be finite and non-negative"));
    }
    Ok(())
}

impl MclspInstance {
    pub fn validate(&self) -> Result<()> {
        let (d, t) = (self.items, self.horizon);
        if d == 0 || t == 0 {
            return invalid("MCLSP needs at least one item and one stage");
        }
        check_matrix("demand", &self.demand, d, t)?;
        check_matrix("setup cost", &self.setup_cost, d, t)?;
        check_matrix("production cost", &self.production_cost, d, t)?;
        check_matrix("holding cost", &self.holding_cost, d, t)?;
        check_matrix("capacity", std::slice::from_ref(&self.capacity), 1, t)?;
        check_matrix("initial inventory", std::slice::from_ref(&self.initial_inventory), 1, d)?;
        if self.capacity.iter().any(|&c| c <= 0.0) {
            return invalid("capacities must be positive");
        }
        Ok(())
    }

    pub fn stage_demand(&self, stage_idx: usize) -> f64 {
        self.demand.iter().map(|row| row[stage_idx]).sum()
    }

    /// Cumulative capacity covers cumulative net demand at every stage.
    pub fn is_capacity_feasible(&self) -> bool {
        let stock: f64 = self.initial_inventory.iter().sum();
        let (mut cap, mut dem) = (0.0, 0.0);
        (0..self.horizon).all(|t| {
            cap += self.capacity[t];
            dem += self.stage_demand(t);
            cap + stock >= dem - 1e-9
        })
    }
}

impl MsmkInstance {
    pub fn validate(&self) -> Result<()> {
        let (d, t) = (self.items, self.horizon);
        if d == 0 || t == 0 {
            return invalid("MSMK needs at least one item and one stage");
        }
        check_matrix("value", &self.value, d, t)?;
        check_matrix("weight", &self.weight, d, t)?;
        check_matrix("capacity", std::slice::from_ref(&self.capacity), 1, t)?;
        if self.capacity.iter().any(|&c| c <= 0.0) {
            return invalid("capacities must be positive");
        }
        Ok(())
    }

    pub fn stage_weight(&self, stage_idx: usize) -> f64 {
        self.weight.iter().map(|row| row[stage_idx]).sum()
    }
}

impl BaseInstance {
    pub fn kind(&self) -> ProblemKind {
        match self {
            BaseInstance::Mclsp(_) => ProblemKind::Mclsp,
            BaseInstance::Msmk(_) => ProblemKind::Msmk,
        }
    }

    pub fn items(&self) -> usize {
        match self {
            BaseInstance::Mclsp(m) => m.items,
            BaseInstance::Msmk(m) => m.items,
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            BaseInstance::Mclsp(m) => m.horizon,
            BaseInstance::Msmk(m) => m.horizon,
        }
    }

    pub fn capacity(&self) -> &[f64] {
        match self {
            BaseInstance::Mclsp(m) => &m.capacity,
            BaseInstance::Msmk(m) => &m.capacity,
        }
    }

    /// The parameter that scenario payloads multiply: demand or value.
    pub fn uncertain(&self) -> &[Vec<f64>] {
        match self {
            BaseInstance::Mclsp(m) => &m.demand,
            BaseInstance::Msmk(m) => &m.value,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BaseInstance::Mclsp(m) => m.validate(),
            BaseInstance::Msmk(m) => m.validate(),
        }
    }
}

impl StochasticInstance {
    /// Binds `base` to `tree`: node payloads multiply the base uncertain parameter.
    /// For MCLSP, stage capacities are raised where needed so that every scenario
    /// keeps cumulative capacity at or above its cumulative realized demand.
    pub fn new(base: BaseInstance, tree: ScenarioTree) -> Result<Self> {
        base.validate()?;
        if tree.horizon() != base.horizon() {
            return invalid(format!(
                "tree horizon {} differs from instance horizon {}",
                tree.horizon(),
                base.horizon()
            ));
        }
        if tree.payload_dim() != base.items() {
            return invalid("tree payload dimension must equal the item count");
        }
        let overrides = realize(&base, &tree);
        let mut inst = Self {
            base,
            tree,
            overrides,
        };
        if let BaseInstance::Mclsp(m) = &mut inst.base {
            let stock: f64 = m.initial_inventory.iter().sum();
            let mut need = vec![0.0f64; m.horizon];
            for path in inst.tree.scenario_paths() {
                let mut cum = 0.0;
                for (t, &n) in path.nodes.iter().enumerate() {
                    cum += inst.overrides[n].iter().sum::<f64>();
                    need[t] = need[t].max(cum - stock);
                }
            }
            let mut cap = 0.0;
            for t in 0..m.horizon {
                if cap + m.capacity[t] < need[t] {
                    m.capacity[t] = (need[t] - cap).ceil();
                }
                cap += m.capacity[t];
            }
        }
        Ok(inst)
    }

    /// Assembles an instance from parts without any capacity adjustment.
    pub fn from_parts(base: BaseInstance, tree: ScenarioTree, overrides: Vec<Vec<f64>>) -> Result<Self> {
        base.validate()?;
        if tree.horizon() != base.horizon() || tree.payload_dim() != base.items() {
            return invalid("tree does not match the instance dimensions");
        }
        check_matrix("overrides", &overrides, tree.node_count(), base.items())?;
        Ok(Self {
            base,
            tree,
            overrides,
        })
    }

    pub fn kind(&self) -> ProblemKind {
        self.base.kind()
    }

    pub fn items(&self) -> usize {
        self.base.items()
    }

    pub fn horizon(&self) -> usize {
        self.base.horizon()
    }

    pub fn node_count(&self) -> usize {
        self.tree.node_count()
    }

    /// Stage index (0-based) of a node.
    pub fn stage_of(&self, node: usize) -> usize {
        self.tree.node(node).stage - 1
    }

    /// Setup-linking bound per `[item][node]` for MCLSP: the smaller of the
    /// stage capacity and [`Self::remaining_demand_bound`].
    pub fn setup_bound(&self) -> Vec<Vec<f64>> {
        let mut bound = self.remaining_demand_bound();
        let cap = self.base.capacity();
        for row in bound.iter_mut() {
            for (node, b) in row.iter_mut().enumerate() {
                *b = b.min(cap[self.stage_of(node)]);
            }
        }
        bound
    }

    /// Largest demand remaining from this node to any leaf below it, per
    /// `[item][node]`.
    pub fn remaining_demand_bound(&self) -> Vec<Vec<f64>> {
        let n = self.node_count();
        let d = self.items();
        let mut rem = vec![vec![0.0; n]; d];
        for node in (0..n).rev() {
            for (j, rem_j) in rem.iter_mut().enumerate() {
                rem_j[node] += self.overrides[node][j];
            }
            if let Some(p) = self.tree.node(node).parent {
                for rem_j in rem.iter_mut() {
                    // children are visited before parents in reverse id order
                    let below = rem_j[node];
                    if below > rem_j[p] {
                        rem_j[p] = below;
                    }
                }
            }
        }
        rem
    }
}

fn realize(base: &BaseInstance, tree: &ScenarioTree) -> Vec<Vec<f64>> {
    let uncertain = base.uncertain();
    tree.nodes()
        .iter()
        .map(|node| {
            (0..base.items())
                .map(|j| uncertain[j][node.stage - 1] * node.payload[j])
                .collect()
        })
        .collect()
}

impl Instance {
    pub fn kind(&self) -> ProblemKind {
        match self {
            Instance::Mclsp(_) => ProblemKind::Mclsp,
            Instance::Msmk(_) => ProblemKind::Msmk,
            Instance::Stochastic(s) => s.kind(),
        }
    }

    pub fn items(&self) -> usize {
        match self {
            Instance::Mclsp(m) => m.items,
            Instance::Msmk(m) => m.items,
            Instance::Stochastic(s) => s.items(),
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            Instance::Mclsp(m) => m.horizon,
            Instance::Msmk(m) => m.horizon,
            Instance::Stochastic(s) => s.horizon(),
        }
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(self, Instance::Stochastic(_))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Instance::Mclsp(m) => m.validate(),
            Instance::Msmk(m) => m.validate(),
            Instance::Stochastic(s) => {
                s.base.validate()?;
                check_matrix("overrides", &s.overrides, s.node_count(), s.items())
            }
        }
    }

    /// Node-indexed view; deterministic instances become a single-path tree.
    pub fn node_view(&self) -> StochasticInstance {
        match self {
            Instance::Stochastic(s) => s.clone(),
            Instance::Mclsp(m) => chain(BaseInstance::Mclsp(m.clone())),
            Instance::Msmk(m) => chain(BaseInstance::Msmk(m.clone())),
        }
    }
}

fn chain(base: BaseInstance) -> StochasticInstance {
    let tree = ScenarioTree::deterministic(base.horizon(), base.items())
        .expect("validated instance has positive dimensions");
    let overrides = realize(&base, &tree);
    StochasticInstance {
        base,
        tree,
        overrides,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::build_tree;

    pub(crate) fn tiny_mclsp() -> MclspInstance {
        MclspInstance {
            items: 1,
            horizon: 2,
            demand: vec![vec![2.0, 3.0]],
            capacity: vec![5.0, 5.0],
            setup_cost: vec![vec![10.0, 10.0]],
            production_cost: vec![vec![1.0, 1.0]],
            holding_cost: vec![vec![1.0, 1.0]],
            initial_inventory: vec![0.0],
        }
    }

    #[test]
    fn deterministic_view_is_a_chain() {
        let view = Instance::Mclsp(tiny_mclsp()).node_view();
        assert_eq!(view.node_count(), 2);
        assert_eq!(view.overrides, vec![vec![2.0], vec![3.0]]);
        assert_eq!(view.tree.scenario_count(), 1);
    }

    #[test]
    fn remaining_demand_bound_takes_worst_branch() {
        let tree = build_tree(&[2], 5, 1).unwrap();
        let inst = StochasticInstance::new(BaseInstance::Mclsp(tiny_mclsp()), tree).unwrap();
        let bound = inst.remaining_demand_bound();
        let worst_leaf = inst.overrides[1][0].max(inst.overrides[2][0]);
        assert_eq!(bound[0][0], 2.0 + worst_leaf);
        assert_eq!(bound[0][1], inst.overrides[1][0]);
    }

    #[test]
    fn stochastic_capacity_covers_every_scenario() {
        let mut base = tiny_mclsp();
        base.capacity = vec![2.0, 3.0];
        let tree = crate::scenario::build_tree_with_levels(&[2], 1, 1, &[1.5]).unwrap();
        let inst = StochasticInstance::new(BaseInstance::Mclsp(base), tree).unwrap();
        let BaseInstance::Mclsp(m) = &inst.base else { unreachable!() };
        // realized stage-2 demand is 4.5 in both branches
        assert!(m.capacity[0] + m.capacity[1] >= 6.5);
    }

    #[test]
    fn kind_tag_round_trip() {
        let inst = Instance::Mclsp(tiny_mclsp());
        let text = serde_json::to_string(&inst).unwrap();
        assert!(text.starts_with("{\"kind\":\"mclsp\""));
        let back: Instance = serde_json::from_str(&text).unwrap();
        assert_eq!(back, inst);

        let tree = build_tree(&[2], 3, 1).unwrap();
        let s = Instance::Stochastic(
            StochasticInstance::new(BaseInstance::Mclsp(tiny_mclsp()), tree).unwrap(),
        );
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.starts_with("{\"kind\":\"stoch\""));
        assert_eq!(serde_json::from_str::<Instance>(&text).unwrap(), s);
    }
}

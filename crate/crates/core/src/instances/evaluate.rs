use std::collections::BTreeMap;

use super::{BaseInstance, Instance, SolutionVector, StochasticInstance};
use crate::error::{invalid, Result};

pub const FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Expected cost over scenario paths (a plain sum for deterministic instances).
    pub objective: f64,
    /// Largest violation per constraint family; zero when satisfied.
    pub residuals: BTreeMap<&'static str, f64>,
    pub feasible: bool,
}

impl Evaluation {
    pub fn max_residual(&self) -> f64 {
        self.residuals.values().copied().fold(0.0, f64::max)
    }
}

fn check_shape(name: &str, m: &[Vec<f64>], items: usize, nodes: usize) -> Result<()> {
    if m.len() != items || m.iter().any(|r| r.len() != nodes) {
        return invalid(format!("{name} must be indexed [{items} items][{nodes} nodes]"));
    }
    Ok(())
}

struct Residuals(BTreeMap<&'static str, f64>);

impl Residuals {
    fn record(&mut self, family: &'static str, violation: f64) {
        let slot = self.0.entry(family).or_insert(0.0);
        if violation > *slot {
            *slot = violation;
        }
    }
}

/// Node cost `c_t^T x_t` at every node, for the objective expectation.
pub(crate) fn node_costs(inst: &StochasticInstance, sol: &SolutionVector) -> Vec<f64> {
    (0..inst.node_count())
        .map(|n| {
            let t = inst.stage_of(n);
            match &inst.base {
                BaseInstance::Mclsp(m) => (0..m.items)
                    .map(|j| {
                        m.setup_cost[j][t] * sol.binary[j][n]
                            + m.production_cost[j][t] * sol.production[j][n]
                            + m.holding_cost[j][t] * sol.inventory[j][n]
                    })
                    .sum(),
                BaseInstance::Msmk(m) => (0..m.items)
                    .map(|j| -inst.overrides[n][j] * sol.binary[j][n])
                    .sum(),
            }
        })
        .collect()
}

pub(crate) fn expected_objective(inst: &StochasticInstance, costs: &[f64]) -> f64 {
    inst.tree
        .scenario_paths()
        .iter()
        .map(|p| p.probability * p.nodes.iter().map(|&n| costs[n]).sum::<f64>())
        .sum()
}

/// Objective, constraint residuals and feasibility of a node-indexed solution.
pub fn evaluate_solution(instance: &Instance, sol: &SolutionVector) -> Result<Evaluation> {
    let inst = instance.node_view();
    let (d, n) = (inst.items(), inst.node_count());
    check_shape("binary decisions", &sol.binary, d, n)?;
    if inst.kind() == super::ProblemKind::Mclsp {
        check_shape("production", &sol.production, d, n)?;
        check_shape("inventory", &sol.inventory, d, n)?;
    }
    let mut res = Residuals(BTreeMap::new());
    for &y in sol.binary.iter().flatten() {
        res.record("binary_bounds", (-y).max(y - 1.0).max(0.0));
        res.record("integrality", y.min(1.0 - y).max(0.0));
    }
    match &inst.base {
        BaseInstance::Mclsp(m) => {
            let bound = inst.setup_bound();
            for node in 0..n {
                let t = inst.stage_of(node);
                let parent = inst.tree.node(node).parent;
                let mut load = 0.0;
                for j in 0..d {
                    let x = sol.production[j][node];
                    let inv = sol.inventory[j][node];
                    let before = parent.map_or(m.initial_inventory[j], |p| sol.inventory[j][p]);
                    let balance = before + x - inst.overrides[node][j] - inv;
                    res.record("demand_balance", balance.abs());
                    res.record("nonnegativity", (-x).max(-inv).max(0.0));
                    res.record("setup_link", (x - bound[j][node] * sol.binary[j][node]).max(0.0));
                    load += x;
                }
                res.record("capacity", (load - m.capacity[t]).max(0.0));
            }
        }
        BaseInstance::Msmk(m) => {
            for node in 0..n {
                let t = inst.stage_of(node);
                let load: f64 = (0..d).map(|j| m.weight[j][t] * sol.binary[j][node]).sum();
                res.record("knapsack", (load - m.capacity[t]).max(0.0));
            }
            for path in inst.tree.scenario_paths() {
                for j in 0..d {
                    let picks: f64 = path.nodes.iter().map(|&node| sol.binary[j][node]).sum();
                    res.record("assignment", (picks - 1.0).max(0.0));
                }
            }
        }
    }
    let objective = expected_objective(&inst, &node_costs(&inst, sol));
    let feasible = res.0.values().all(|&v| v <= FEASIBILITY_TOL);
    Ok(Evaluation {
        objective,
        residuals: res.0,
        feasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{BaseInstance, MclspInstance, StochasticInstance};
    use crate::scenario::{build_tree_with_levels, ScenarioTree};

    fn tiny() -> MclspInstance {
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
    fn zero_plan_misses_demand() {
        let sol = SolutionVector {
            binary: vec![vec![0.0, 0.0]],
            production: vec![vec![0.0, 0.0]],
            inventory: vec![vec![0.0, 0.0]],
            objective: 0.0,
        };
        let ev = evaluate_solution(&Instance::Mclsp(tiny()), &sol).unwrap();
        assert!(!ev.feasible);
        assert!(ev.residuals["demand_balance"] > 0.0);
    }

    #[test]
    fn batch_plan_is_feasible_with_known_cost() {
        // one setup in stage 1 producing 5, holding 3 into stage 2: 10 + 5 + 3
        let sol = SolutionVector {
            binary: vec![vec![1.0, 0.0]],
            production: vec![vec![5.0, 0.0]],
            inventory: vec![vec![3.0, 0.0]],
            objective: 0.0,
        };
        let ev = evaluate_solution(&Instance::Mclsp(tiny()), &sol).unwrap();
        assert!(ev.feasible, "{:?}", ev.residuals);
        assert_eq!(ev.objective, 18.0);
    }

    #[test]
    fn dimension_mismatch_is_invalid() {
        let sol = SolutionVector {
            binary: vec![vec![1.0]],
            production: vec![],
            inventory: vec![],
            objective: 0.0,
        };
        assert!(evaluate_solution(&Instance::Mclsp(tiny()), &sol).is_err());
    }

    #[test]
    fn single_scenario_tree_matches_deterministic() {
        let tree = build_tree_with_levels(&[1], 0, 1, &[1.0]).unwrap();
        let stoch = StochasticInstance::new(BaseInstance::Mclsp(tiny()), tree).unwrap();
        let sol = SolutionVector {
            binary: vec![vec![1.0, 1.0]],
            production: vec![vec![2.0, 3.0]],
            inventory: vec![vec![0.0, 0.0]],
            objective: 0.0,
        };
        let a = evaluate_solution(&Instance::Mclsp(tiny()), &sol).unwrap();
        let b = evaluate_solution(&Instance::Stochastic(stoch), &sol).unwrap();
        assert_eq!(a.objective, b.objective);
        assert_eq!(a.feasible, b.feasible);
        assert!(ScenarioTree::deterministic(2, 1).is_ok());
    }
}

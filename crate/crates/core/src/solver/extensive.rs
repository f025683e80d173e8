use super::{FixSet, MipModel, Sense};
use crate::instances::{BaseInstance, Instance, ProblemKind, SolutionVector, StochasticInstance};

/// Deterministic-equivalent MIP with one variable per (item, tree node).
/// Non-anticipativity holds by construction: scenarios sharing a node share
/// its variables.
#[derive(Debug, Clone)]
pub struct ExtensiveForm {
    pub model: MipModel,
    pub kind: ProblemKind,
    pub view: StochasticInstance,
    /// Variable index per `[item][node]`.
    pub binary: Vec<Vec<usize>>,
    pub production: Vec<Vec<usize>>,
    pub inventory: Vec<Vec<usize>>,
}

pub fn build_extensive_form(instance: &Instance) -> ExtensiveForm {
    let view = instance.node_view();
    let d = view.items();
    let n = view.node_count();
    let reach: Vec<f64> = (0..n).map(|k| view.tree.reach_probability(k)).collect();
    let mut model = MipModel::default();
    let mut binary = vec![Vec::with_capacity(n); d];
    let mut production = Vec::new();
    let mut inventory = Vec::new();

    match &view.base {
        BaseInstance::Mclsp(m) => {
            production = vec![Vec::with_capacity(n); d];
            inventory = vec![Vec::with_capacity(n); d];
            for node in 0..n {
                let t = view.stage_of(node);
                for j in 0..d {
                    binary[j].push(model.add_binary(format!("y_{j}_{node}"), reach[node] * m.setup_cost[j][t]));
                    production[j].push(model.add_continuous(
                        format!("x_{j}_{node}"),
                        0.0,
                        f64::INFINITY,
                        reach[node] * m.production_cost[j][t],
                    ));
                    inventory[j].push(model.add_continuous(
                        format!("inv_{j}_{node}"),
                        0.0,
                        f64::INFINITY,
                        reach[node] * m.holding_cost[j][t],
                    ));
                }
            }
            let bound = view.setup_bound();
            for node in 0..n {
                let t = view.stage_of(node);
                let parent = view.tree.node(node).parent;
                for j in 0..d {
                    // inv[n] - inv[parent] - x[n] = -demand[n]
                    let mut coefs = vec![(inventory[j][node], 1.0), (production[j][node], -1.0)];
                    let mut rhs = -view.overrides[node][j];
                    match parent {
                        Some(p) => coefs.push((inventory[j][p], -1.0)),
                        None => rhs += m.initial_inventory[j],
                    }
                    model.add_row(format!("bal_{j}_{node}"), coefs, Sense::Eq, rhs);
                    model.add_row(
                        format!("link_{j}_{node}"),
                        vec![(production[j][node], 1.0), (binary[j][node], -bound[j][node])],
                        Sense::Le,
                        0.0,
                    );
                }
                model.add_row(
                    format!("cap_{node}"),
                    (0..d).map(|j| (production[j][node], 1.0)).collect(),
                    Sense::Le,
                    m.capacity[t],
                );
            }
        }
        BaseInstance::Msmk(m) => {
            for node in 0..n {
                for j in 0..d {
                    binary[j].push(model.add_binary(format!("y_{j}_{node}"), -reach[node] * view.overrides[node][j]));
                }
            }
            for node in 0..n {
                let t = view.stage_of(node);
                model.add_row(
                    format!("knap_{node}"),
                    (0..d).map(|j| (binary[j][node], m.weight[j][t])).collect(),
                    Sense::Le,
                    m.capacity[t],
                );
            }
            if view.horizon() > 1 {
                for path in view.tree.scenario_paths() {
                    for j in 0..d {
                        model.add_row(
                            format!("once_{j}_{}", path.scenario),
                            path.nodes.iter().map(|&k| (binary[j][k], 1.0)).collect(),
                            Sense::Le,
                            1.0,
                        );
                    }
                }
            }
        }
    }

    ExtensiveForm {
        model,
        kind: view.kind(),
        view,
        binary,
        production,
        inventory,
    }
}

impl ExtensiveForm {
    pub fn items(&self) -> usize {
        self.binary.len()
    }

    pub fn node_count(&self) -> usize {
        self.view.node_count()
    }

    /// Maps a model solution back to node-indexed decisions.
    pub fn solution(&self, values: &[f64], objective: f64) -> SolutionVector {
        let take = |idx: &Vec<Vec<usize>>| -> Vec<Vec<f64>> {
            idx.iter()
                .map(|row| row.iter().map(|&v| values[v]).collect())
                .collect()
        };
        SolutionVector {
            binary: take(&self.binary),
            production: take(&self.production),
            inventory: take(&self.inventory),
            objective,
        }
    }

    /// Fixes every binary to the 0/1 decisions given per `[item][node]`.
    pub fn fixset_from_decisions(&self, decisions: &[Vec<f64>]) -> FixSet {
        self.binary
            .iter()
            .zip(decisions)
            .flat_map(|(vars, vals)| vars.iter().zip(vals).map(|(&v, &x)| (v, x >= 0.5)))
            .collect()
    }

    /// `(item, node)` for a binary variable index.
    pub fn locate_binary(&self, var: usize) -> Option<(usize, usize)> {
        self.binary
            .iter()
            .enumerate()
            .find_map(|(j, row)| row.iter().position(|&v| v == var).map(|k| (j, k)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate_mclsp, generate_stochastic, MclspInstance, MclspRanges};

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
    fn deterministic_counts() {
        let ef = build_extensive_form(&Instance::Mclsp(tiny()));
        assert_eq!(ef.model.binary_count(), 2);
        assert_eq!(ef.model.vars.len() - ef.model.binary_count(), 4);
        ef.model.validate().unwrap();
    }

    #[test]
    fn one_binary_per_node() {
        let mut base = generate_mclsp(0, 1, 3, &MclspRanges::default()).unwrap();
        base.initial_inventory = vec![0.0];
        let s = generate_stochastic(BaseInstance::Mclsp(base), &[2, 2], 1).unwrap();
        let ef = build_extensive_form(&Instance::Stochastic(s));
        assert_eq!(ef.model.binary_count(), 7);
    }

    #[test]
    fn single_scenario_tree_equals_deterministic_model() {
        let det = build_extensive_form(&Instance::Mclsp(tiny()));
        let tree = crate::scenario::build_tree_with_levels(&[1], 2, 1, &[1.0]).unwrap();
        let s = StochasticInstance::new(BaseInstance::Mclsp(tiny()), tree).unwrap();
        let sto = build_extensive_form(&Instance::Stochastic(s));
        assert_eq!(det.model, sto.model);
    }

    #[test]
    fn locate_binary_inverts_index() {
        let ef = build_extensive_form(&Instance::Mclsp(tiny()));
        assert_eq!(ef.locate_binary(ef.binary[0][1]), Some((0, 1)));
        assert_eq!(ef.locate_binary(ef.production[0][0]), None);
    }
}

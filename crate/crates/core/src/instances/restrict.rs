use super::{BaseInstance, Instance, MclspInstance, MsmkInstance, StochasticInstance};
use crate::error::{invalid, Result};
use crate::scenario::{ScenarioTree, TreeNode};

fn pick<T: Clone>(rows: &[T], subset: &[usize]) -> Vec<T> {
    subset.iter().map(|&j| rows[j].clone()).collect()
}

/// Subset share of a per-stage total; falls back to the cardinality share
/// `|S| / d` when the stage total is zero.
pub fn subset_share(table: &[Vec<f64>], subset: &[usize], stage_idx: usize) -> f64 {
    let total: f64 = table.iter().map(|row| row[stage_idx]).sum();
    if total == 0.0 {
        return subset.len() as f64 / table.len() as f64;
    }
    let part: f64 = subset.iter().map(|&j| table[j][stage_idx]).sum();
    part / total
}

fn normalize_subset(subset: &[usize], items: usize) -> Result<Vec<usize>> {
    if subset.is_empty() {
        return invalid("item subset must be non-empty");
    }
    let mut s = subset.to_vec();
    s.sort_unstable();
    s.dedup();
    if *s.last().unwrap() >= items {
        return invalid(format!("item subset references items beyond {items}"));
    }
    Ok(s)
}

fn restrict_mclsp(m: &MclspInstance, s: &[usize]) -> MclspInstance {
    let capacity = (0..m.horizon)
        .map(|t| {
            if s.len() == m.items {
                m.capacity[t]
            } else {
                m.capacity[t] * subset_share(&m.demand, s, t)
            }
        })
        .collect();
    MclspInstance {
        items: s.len(),
        horizon: m.horizon,
        demand: pick(&m.demand, s),
        capacity,
        setup_cost: pick(&m.setup_cost, s),
        production_cost: pick(&m.production_cost, s),
        holding_cost: pick(&m.holding_cost, s),
        initial_inventory: pick(&m.initial_inventory, s),
    }
}

fn restrict_msmk(m: &MsmkInstance, s: &[usize]) -> MsmkInstance {
    let capacity = (0..m.horizon)
        .map(|t| {
            if s.len() == m.items {
                m.capacity[t]
            } else {
                m.capacity[t] * subset_share(&m.weight, s, t)
            }
        })
        .collect();
    MsmkInstance {
        items: s.len(),
        horizon: m.horizon,
        value: pick(&m.value, s),
        weight: pick(&m.weight, s),
        capacity,
    }
}

fn restrict_base(base: &BaseInstance, s: &[usize]) -> BaseInstance {
    match base {
        BaseInstance::Mclsp(m) => BaseInstance::Mclsp(restrict_mclsp(m, s)),
        BaseInstance::Msmk(m) => BaseInstance::Msmk(restrict_msmk(m, s)),
    }
}

fn restrict_stochastic(inst: &StochasticInstance, s: &[usize]) -> Result<StochasticInstance> {
    let nodes: Vec<TreeNode> = inst
        .tree
        .nodes()
        .iter()
        .map(|n| TreeNode {
            payload: pick(&n.payload, s),
            ..n.clone()
        })
        .collect();
    let tree = ScenarioTree::from_nodes(inst.tree.branching().to_vec(), inst.tree.seed(), nodes)?;
    let overrides = inst.overrides.iter().map(|row| pick(row, s)).collect();
    StochasticInstance::from_parts(restrict_base(&inst.base, s), tree, overrides)
}

/// Restricts an instance to the items in `subset`, rescaling each stage
/// capacity by the subset's share of that stage's demand (MCLSP) or weight
/// (MSMK). Stochastic instances are rescaled on their base data. Items keep
/// their original relative order.
pub fn restrict_to_subset(instance: &Instance, subset: &[usize]) -> Result<Instance> {
    let s = normalize_subset(subset, instance.items())?;
    restrict_ordered(instance, &s)
}

/// Like [`restrict_to_subset`], but item `k` of the result is `items[k]`.
pub fn restrict_to_items(instance: &Instance, items: &[usize]) -> Result<Instance> {
    let s = normalize_subset(items, instance.items())?;
    if s.len() != items.len() {
        return invalid("item list contains duplicates");
    }
    restrict_ordered(instance, items)
}

fn restrict_ordered(instance: &Instance, s: &[usize]) -> Result<Instance> {
    Ok(match instance {
        Instance::Mclsp(m) => Instance::Mclsp(restrict_mclsp(m, s)),
        Instance::Msmk(m) => Instance::Msmk(restrict_msmk(m, s)),
        Instance::Stochastic(st) => Instance::Stochastic(restrict_stochastic(st, s)?),
    })
}

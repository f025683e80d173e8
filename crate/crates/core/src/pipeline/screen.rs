use log::warn;

use super::PipelineConfig;
use crate::error::{invalid, Result};
use crate::instances::{BaseInstance, Instance, ProblemKind};
use crate::solver::{build_extensive_form, ExtensiveForm, FixSet};

const CHECK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ScreenOutcome {
    pub fixes: FixSet,
    /// Full binary assignment for the solver's incumbent, empty when its repair failed.
    pub warm_start: FixSet,
    /// Fixes proposed by the threshold before repair.
    pub candidates: usize,
    /// Fixes released by the repair loop.
    pub unfixed: usize,
    /// Warm-start entries flipped by the repair loop.
    pub flipped: usize,
    /// The repair budget ran out and fixing was abandoned.
    pub exhausted: bool,
}

/// Decision state per `[item][node]`: `Some` when assigned.
type Assign = Vec<Vec<Option<bool>>>;

/// Entries whose release could resolve a violation, as `(item, node)`.
fn violation(ef: &ExtensiveForm, assign: &Assign, bound: &[Vec<f64>]) -> Option<Vec<(usize, usize)>> {
    let view = &ef.view;
    let d = view.items();
    let paths = view.tree.scenario_paths();
    match &view.base {
        BaseInstance::Mclsp(m) => {
            // every open setup can produce up to its linking bound
            let open = |j: usize, n: usize| if assign[j][n] == Some(false) { 0.0 } else { bound[j][n] };
            for path in &paths {
                let mut supply = vec![0.0; d];
                let mut need = vec![0.0; d];
                let mut total_supply = 0.0;
                for (t, &n) in path.nodes.iter().enumerate() {
                    let mut stage_open = 0.0;
                    for j in 0..d {
                        supply[j] += open(j, n);
                        need[j] += view.overrides[n][j];
                        stage_open += open(j, n);
                        if supply[j] + CHECK_TOL < need[j] - m.initial_inventory[j] {
                            return Some(closed(assign, &path.nodes[..=t], j..j + 1));
                        }
                    }
                    total_supply += stage_open.min(m.capacity[t]);
                    let total_need: f64 = (0..d).map(|j| (need[j] - m.initial_inventory[j]).max(0.0)).sum();
                    if total_supply + CHECK_TOL < total_need {
                        return Some(closed(assign, &path.nodes[..=t], 0..d));
                    }
                }
            }
            None
        }
        BaseInstance::Msmk(m) => {
            for n in 0..view.node_count() {
                let t = view.stage_of(n);
                let load: f64 = (0..d)
                    .filter(|&j| assign[j][n] == Some(true))
                    .map(|j| m.weight[j][t])
                    .sum();
                if load > m.capacity[t] + CHECK_TOL {
                    return Some((0..d).filter(|&j| assign[j][n] == Some(true)).map(|j| (j, n)).collect());
                }
            }
            for path in &paths {
                for j in 0..d {
                    let picked: Vec<(usize, usize)> = path
                        .nodes
                        .iter()
                        .filter(|&&n| assign[j][n] == Some(true))
                        .map(|&n| (j, n))
                        .collect();
                    if picked.len() > 1 {
                        return Some(picked);
                    }
                }
            }
            None
        }
    }
}

fn closed(assign: &Assign, nodes: &[usize], items: std::ops::Range<usize>) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for j in items {
        for &n in nodes {
            if assign[j][n] == Some(false) {
                out.push((j, n));
            }
        }
    }
    out
}

/// Releases the least confident relevant entry until the aggregate checks
/// pass. Returns the number released, or `None` when the budget ran out.
/// When nothing relevant is left to release, the loop stops: the remaining
/// violation does not stem from the assignment.
fn repair(ef: &ExtensiveForm, assign: &mut Assign, probs: &[Vec<f64>], budget: usize) -> Option<usize> {
    let bound = if ef.kind == ProblemKind::Mclsp {
        ef.view.setup_bound()
    } else {
        Vec::new()
    };
    let mut released = 0;
    while let Some(cands) = violation(ef, assign, &bound) {
        let Some(&(j, n)) = cands.iter().min_by(|&&(a, b), &&(c, e)| {
            let conf = |j: usize, n: usize| {
                let p = probs[j][n];
                if assign[j][n] == Some(true) {
                    p
                } else {
                    1.0 - p
                }
            };
            conf(a, b).total_cmp(&conf(c, e)).then((a, b).cmp(&(c, e)))
        }) else {
            break;
        };
        if released == budget {
            return None;
        }
        assign[j][n] = None;
        released += 1;
    }
    Some(released)
}

fn to_fixset(ef: &ExtensiveForm, assign: &Assign) -> FixSet {
    let mut fs = FixSet::new();
    for (j, row) in assign.iter().enumerate() {
        for (n, a) in row.iter().enumerate() {
            if let Some(v) = a {
                fs.insert(ef.binary[j][n], *v);
            }
        }
    }
    fs
}

/// Thresholds predictions into a fix set and a warm start, then repairs both
/// against aggregate necessary conditions: cumulative open production versus
/// cumulative demand for lot sizing, knapsack load and single selection per
/// path for the knapsack.
pub fn screen_form(probs: &[Vec<f64>], ef: &ExtensiveForm, cfg: &PipelineConfig) -> Result<ScreenOutcome> {
    cfg.validate()?;
    let (d, n) = (ef.items(), ef.node_count());
    if probs.len() != d || probs.iter().any(|r| r.len() != n) {
        return invalid(format!("predictions must be indexed [{d} items][{n} nodes]"));
    }
    if probs.iter().flatten().any(|p| !(0.0..=1.0).contains(p)) {
        return invalid("predictions must lie in [0, 1]");
    }
    let mut fixed: Assign = probs
        .iter()
        .map(|row| {
            row.iter()
                .map(|&p| {
                    if p >= cfg.p_fix {
                        Some(true)
                    } else if p <= 1.0 - cfg.p_fix {
                        Some(false)
                    } else {
                        None
                    }
                })
                .collect()
        })
        .collect();
    let candidates = fixed.iter().flatten().filter(|a| a.is_some()).count();
    let (mut unfixed, mut exhausted) = (0, false);
    if cfg.screening {
        match repair(ef, &mut fixed, probs, cfg.unfix_budget) {
            Some(k) => unfixed = k,
            None => {
                warn!("screening budget of {} unfixes exhausted; no variables fixed", cfg.unfix_budget);
                exhausted = true;
                fixed.iter_mut().flatten().for_each(|a| *a = None);
            }
        }
    }

    let mut warm: Assign = probs
        .iter()
        .map(|row| row.iter().map(|&p| Some(p >= 0.5)).collect())
        .collect();
    let mut flipped = 0;
    let warm_start = match repair(ef, &mut warm, probs, cfg.unfix_budget) {
        Some(k) => {
            flipped = k;
            // a released setup opens; a released selection is dropped
            let fill = ef.kind == ProblemKind::Mclsp;
            warm.iter_mut().flatten().for_each(|a| {
                a.get_or_insert(fill);
            });
            to_fixset(ef, &warm)
        }
        None => FixSet::new(),
    };
    Ok(ScreenOutcome {
        fixes: to_fixset(ef, &fixed),
        warm_start,
        candidates,
        unfixed,
        flipped,
        exhausted,
    })
}

pub fn screen(probs: &[Vec<f64>], instance: &Instance, cfg: &PipelineConfig) -> Result<ScreenOutcome> {
    screen_form(probs, &build_extensive_form(instance), cfg)
}

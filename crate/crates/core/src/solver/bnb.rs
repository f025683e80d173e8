use std::time::Instant;

use log::{debug, info, warn};

use super::simplex::{solve_lp, LpStatus};
use super::{improves, FixSet, MipModel, MipResult, MipStatus, INTEGRALITY_TOL};
use crate::error::Result;

#[derive(Debug, Clone, Default)]
pub struct BnbOptions {
    /// Wall-clock limit in seconds.
    pub time_limit: Option<f64>,
    pub node_limit: Option<usize>,
}

impl BnbOptions {
    pub fn with_time_limit(seconds: f64) -> Self {
        Self {
            time_limit: Some(seconds),
            node_limit: None,
        }
    }
}

struct Node {
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Objective bound inherited from the parent relaxation.
    bound: f64,
    seq: usize,
}

struct Incumbent {
    objective: f64,
    values: Vec<f64>,
}

/// Re-solves with every binary pinned to its rounded value and snaps
/// near-integral continuous values, so equal assignments give equal objectives.
fn polish(model: &MipModel, lower: &[f64], upper: &[f64], values: &[f64]) -> Option<Incumbent> {
    let mut lo = lower.to_vec();
    let mut hi = upper.to_vec();
    for (i, v) in model.vars.iter().enumerate() {
        if v.binary {
            let r = values[i].round();
            lo[i] = r;
            hi[i] = r;
        }
    }
    let lp = solve_lp(model, &lo, &hi);
    if lp.status != LpStatus::Optimal {
        return None;
    }
    let values: Vec<f64> = lp
        .values
        .iter()
        .map(|&x| {
            let r = x.round();
            if (x - r).abs() <= 1e-9 {
                r
            } else {
                x
            }
        })
        .collect();
    Some(Incumbent {
        objective: model.objective_value(&values),
        values,
    })
}

fn most_fractional(model: &MipModel, values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in model.vars.iter().enumerate() {
        if !v.binary {
            continue;
        }
        let f = values[i] - values[i].floor();
        let dist = f.min(1.0 - f);
        if dist > INTEGRALITY_TOL && best.is_none_or(|(_, b)| dist > b) {
            best = Some((i, dist));
        }
    }
    best.map(|(i, _)| i)
}

/// Depth-first branch-and-bound on the most fractional binary (lowest index on
/// ties). After a node is pruned or closed, search resumes from the open node
/// with the best inherited bound.
///
/// `warm_start` assigns binaries; when it is consistent with `fixes` and its LP
/// completion is feasible, it seeds the incumbent. Otherwise it is ignored.
pub fn branch_and_bound(
    model: &MipModel,
    fixes: &FixSet,
    warm_start: Option<&FixSet>,
    options: &BnbOptions,
) -> Result<MipResult> {
    model.validate()?;
    fixes.validate(model)?;
    let start = Instant::now();
    let mut lower: Vec<f64> = model.vars.iter().map(|v| v.lower).collect();
    let mut upper: Vec<f64> = model.vars.iter().map(|v| v.upper).collect();
    for (var, val) in fixes.iter() {
        let v = f64::from(u8::from(val));
        lower[var] = v;
        upper[var] = v;
    }

    let mut incumbent: Option<Incumbent> = None;
    if let Some(ws) = warm_start {
        ws.validate(model)?;
        if ws.iter().any(|(var, val)| fixes.get(var).is_some_and(|f| f != val)) {
            info!("warm start contradicts the fix set; ignored");
        } else {
            let (mut lo, mut hi) = (lower.clone(), upper.clone());
            for (var, val) in ws.iter() {
                let v = f64::from(u8::from(val));
                lo[var] = v;
                hi[var] = v;
            }
            let lp = solve_lp(model, &lo, &hi);
            if lp.status == LpStatus::Optimal && most_fractional(model, &lp.values).is_none() {
                incumbent = polish(model, &lo, &hi, &lp.values);
            }
            if incumbent.is_none() {
                info!("warm start has no feasible completion; ignored");
            }
        }
    }

    let out_of_time = |start: &Instant| {
        options
            .time_limit
            .is_some_and(|limit| start.elapsed().as_secs_f64() >= limit)
    };

    let mut open: Vec<Node> = Vec::new();
    let mut next = Some(Node {
        lower,
        upper,
        bound: f64::NEG_INFINITY,
        seq: 0,
    });
    let mut seq = 1usize;
    let mut nodes = 0usize;
    let mut interrupted = false;

    loop {
        let node = match next.take() {
            Some(n) => n,
            None => {
                let Some(pos) = (0..open.len()).min_by(|&a, &b| {
                    open[a]
                        .bound
                        .total_cmp(&open[b].bound)
                        .then(open[a].seq.cmp(&open[b].seq))
                }) else {
                    break;
                };
                open.swap_remove(pos)
            }
        };
        if let Some(inc) = &incumbent {
            if !improves(node.bound, inc.objective) {
                continue;
            }
        }
        if out_of_time(&start) || options.node_limit.is_some_and(|l| nodes >= l) {
            open.push(node);
            interrupted = true;
            break;
        }
        nodes += 1;
        let lp = solve_lp(model, &node.lower, &node.upper);
        match lp.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                warn!("unbounded relaxation at node {}; the model is missing bounds", node.seq);
                continue;
            }
            LpStatus::IterationLimit => {
                warn!("simplex pivot limit at node {}; node dropped", node.seq);
                continue;
            }
        }
        if let Some(inc) = &incumbent {
            if !improves(lp.objective, inc.objective) {
                continue;
            }
        }
        match most_fractional(model, &lp.values) {
            None => {
                let cand = polish(model, &node.lower, &node.upper, &lp.values).unwrap_or_else(|| {
                    let values: Vec<f64> = lp
                        .values
                        .iter()
                        .zip(&model.vars)
                        .map(|(&x, v)| if v.binary { x.round() } else { x })
                        .collect();
                    Incumbent {
                        objective: model.objective_value(&values),
                        values,
                    }
                });
                if incumbent.as_ref().is_none_or(|inc| improves(cand.objective, inc.objective)) {
                    debug!("incumbent {} at node {}", cand.objective, nodes);
                    incumbent = Some(cand);
                }
            }
            Some(var) => {
                let frac = lp.values[var];
                let mut down = Node {
                    lower: node.lower.clone(),
                    upper: node.upper.clone(),
                    bound: lp.objective,
                    seq,
                };
                down.upper[var] = 0.0;
                let mut up = Node {
                    lower: node.lower,
                    upper: node.upper,
                    bound: lp.objective,
                    seq: seq + 1,
                };
                up.lower[var] = 1.0;
                seq += 2;
                let (dive, later) = if frac >= 0.5 { (up, down) } else { (down, up) };
                open.push(later);
                next = Some(dive);
            }
        }
    }

    let seconds = start.elapsed().as_secs_f64();
    let open_bound = open.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    Ok(match (incumbent, interrupted) {
        (Some(inc), false) => MipResult {
            status: MipStatus::Optimal,
            objective: inc.objective,
            best_bound: inc.objective,
            values: inc.values,
            nodes,
            seconds,
        },
        (Some(inc), true) => MipResult {
            status: MipStatus::Feasible,
            objective: inc.objective,
            best_bound: open_bound.min(inc.objective),
            values: inc.values,
            nodes,
            seconds,
        },
        (None, false) => MipResult {
            status: MipStatus::Infeasible,
            objective: f64::INFINITY,
            best_bound: f64::INFINITY,
            values: Vec::new(),
            nodes,
            seconds,
        },
        (None, true) => MipResult {
            status: MipStatus::TimeLimit,
            objective: f64::INFINITY,
            best_bound: open_bound,
            values: Vec::new(),
            nodes,
            seconds,
        },
    })
}

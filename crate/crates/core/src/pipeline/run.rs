use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::screen::screen_form;
use super::{OptimumRecord, PipelineConfig};
use crate::error::{invalid, Result};
use crate::expand::{expand_horizon, itemwise_expand, ExpandConfig};
use crate::instances::{evaluate_solution, Instance, SolutionVector};
use crate::seqmodel::{SeqModel, DECISION_THRESHOLD};
use crate::solver::{
    branch_and_bound, build_extensive_form, solve_lp, BnbOptions, ExtensiveForm, FixSet, LpStatus, MipStatus,
};

const MAX_HALVINGS: usize = 3;

/// Outcome of the plain solve the pipeline is compared against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub status: MipStatus,
    pub objective: f64,
    /// Binary decisions per `[item][node]`.
    pub binary: Vec<Vec<f64>>,
    pub seconds: f64,
}

impl Reference {
    pub fn from_optimum(opt: &OptimumRecord, seconds: f64) -> Self {
        Self {
            status: opt.status,
            objective: opt.objective,
            binary: opt.solution.binary.clone(),
            seconds,
        }
    }
}

/// Plain branch-and-bound with the pipeline's limits.
pub fn reference_solve(instance: &Instance, time_limit: Option<f64>) -> Result<Reference> {
    let ef = build_extensive_form(instance);
    let opts = BnbOptions {
        time_limit,
        node_limit: None,
    };
    let r = branch_and_bound(&ef.model, &FixSet::new(), None, &opts)?;
    let binary = if r.has_incumbent() {
        ef.solution(&r.values, r.objective).binary
    } else {
        Vec::new()
    };
    Ok(Reference {
        status: r.status,
        objective: r.objective,
        binary,
        seconds: r.seconds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Optimal,
    /// Stopped at the time limit with a feasible solution.
    Feasible,
    /// No feasible solution was found.
    Failed,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Optimal => "optimal",
            Self::Feasible => "feasible",
            Self::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub id: u64,
    /// Share of binaries whose thresholded prediction matches the reference.
    pub accuracy: f64,
    /// Share of fixed binaries that match the reference.
    pub fixed_accuracy: Option<f64>,
    pub gap: Option<f64>,
    /// The rounded prediction has no feasible continuous completion.
    pub infeasible_before_repair: bool,
    pub fixed: usize,
    /// Fixes released and warm-start entries flipped by screening.
    pub repairs: usize,
    /// Retries after an infeasible restricted problem.
    pub fallbacks: usize,
    pub objective: f64,
    pub status: RunStatus,
    pub reference_seconds: f64,
    pub pipeline_seconds: f64,
}

impl PipelineReport {
    pub fn time_factor(&self) -> f64 {
        self.reference_seconds / self.pipeline_seconds.max(1e-9)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub solution: Option<SolutionVector>,
    pub report: PipelineReport,
}

/// Probabilities per `[item][node]`, expanding over items when the instance
/// has more than the model.
pub fn predict(model: &SeqModel, instance: &Instance, expand: &ExpandConfig) -> Result<Vec<Vec<f64>>> {
    let (have, want) = (instance.items(), model.shape.items);
    if have == want {
        Ok(expand_horizon(model, instance)?.node_probs)
    } else if have > want {
        Ok(itemwise_expand(model, instance, expand)?.aggregate())
    } else {
        invalid(format!("instance has {have} items, fewer than the model's {want}"))
    }
}

/// `(z - z*) / |z*|`; when `z*` is zero the plain difference is used.
pub fn relative_gap(objective: f64, best: f64) -> f64 {
    if best == 0.0 {
        objective - best
    } else {
        (objective - best) / best.abs()
    }
}

/// Share of entries whose thresholded probability equals the 0/1 reference.
pub fn prediction_accuracy(probs: &[Vec<f64>], reference: &[Vec<f64>]) -> f64 {
    let (mut hits, mut total) = (0usize, 0usize);
    for (ps, ys) in probs.iter().zip(reference) {
        for (&p, &y) in ps.iter().zip(ys) {
            total += 1;
            hits += usize::from((p >= DECISION_THRESHOLD) == (y >= 0.5));
        }
    }
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

fn rounded_infeasible(ef: &ExtensiveForm, probs: &[Vec<f64>]) -> bool {
    let mut lo: Vec<f64> = ef.model.vars.iter().map(|v| v.lower).collect();
    let mut hi: Vec<f64> = ef.model.vars.iter().map(|v| v.upper).collect();
    for (vars, ps) in ef.binary.iter().zip(probs) {
        for (&v, &p) in vars.iter().zip(ps) {
            let x = f64::from(u8::from(p >= DECISION_THRESHOLD));
            lo[v] = x;
            hi[v] = x;
        }
    }
    solve_lp(&ef.model, &lo, &hi).status != LpStatus::Optimal
}

fn confidence(ef: &ExtensiveForm, probs: &[Vec<f64>], var: usize, value: bool) -> f64 {
    let (j, n) = ef.locate_binary(var).expect("fixes only touch binaries");
    if value {
        probs[j][n]
    } else {
        1.0 - probs[j][n]
    }
}

/// Keeps the more confident half of the fixes.
fn halve(ef: &ExtensiveForm, probs: &[Vec<f64>], fixes: &FixSet) -> FixSet {
    let mut ranked: Vec<(f64, usize, bool)> = fixes
        .iter()
        .map(|(v, x)| (confidence(ef, probs, v, x), v, x))
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    ranked.truncate(ranked.len() / 2);
    ranked.into_iter().map(|(_, v, x)| (v, x)).collect()
}

/// Predict, screen, fix or warm-start, and solve; the result is compared with
/// `reference`.
pub fn run_pipeline(
    id: u64,
    instance: &Instance,
    model: &SeqModel,
    cfg: &PipelineConfig,
    reference: &Reference,
) -> Result<PipelineOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let ef = build_extensive_form(instance);
    let probs = predict(model, instance, &cfg.expand)?;
    let screened = screen_form(&probs, &ef, cfg)?;
    let mut fixes = if cfg.mode.fixes() {
        screened.fixes.clone()
    } else {
        FixSet::new()
    };
    let warm = (cfg.mode.warm_starts() && !screened.warm_start.is_empty()).then(|| screened.warm_start.clone());
    let opts = BnbOptions {
        time_limit: cfg.time_limit,
        node_limit: None,
    };

    let mut fallbacks = 0;
    let final_fixes;
    let result = loop {
        let ws = warm.as_ref().map(|w| {
            let mut w = w.clone();
            for (v, x) in fixes.iter() {
                w.insert(v, x);
            }
            w
        });
        let r = branch_and_bound(&ef.model, &fixes, ws.as_ref(), &opts)?;
        if r.has_incumbent() || fixes.is_empty() {
            final_fixes = fixes;
            break r;
        }
        fallbacks += 1;
        fixes = if fallbacks <= MAX_HALVINGS {
            info!("instance {id}: restricted problem has no solution, halving {} fixes", fixes.len());
            halve(&ef, &probs, &fixes)
        } else {
            info!("instance {id}: falling back to a plain solve");
            FixSet::new()
        };
    };
    let pipeline_seconds = start.elapsed().as_secs_f64();

    let mut status = match result.status {
        MipStatus::Optimal => RunStatus::Optimal,
        MipStatus::Feasible => RunStatus::Feasible,
        MipStatus::Infeasible | MipStatus::TimeLimit => RunStatus::Failed,
    };
    let solution = result
        .has_incumbent()
        .then(|| ef.solution(&result.values, result.objective));
    if let Some(sol) = &solution {
        let ev = evaluate_solution(instance, sol)?;
        if !ev.feasible {
            warn!("instance {id}: solver output fails verification ({:e})", ev.max_residual());
            status = RunStatus::Failed;
        }
    }

    let has_ref = !reference.binary.is_empty();
    let fixed_accuracy = (has_ref && !final_fixes.is_empty()).then(|| {
        let ok = final_fixes
            .iter()
            .filter(|&(v, x)| {
                let (j, n) = ef.locate_binary(v).expect("binary");
                (reference.binary[j][n] >= 0.5) == x
            })
            .count();
        ok as f64 / final_fixes.len() as f64
    });
    let gap = (has_ref && status != RunStatus::Failed).then(|| relative_gap(result.objective, reference.objective));

    Ok(PipelineOutcome {
        solution,
        report: PipelineReport {
            id,
            accuracy: if has_ref { prediction_accuracy(&probs, &reference.binary) } else { 0.0 },
            fixed_accuracy,
            gap,
            infeasible_before_repair: rounded_infeasible(&ef, &probs),
            fixed: final_fixes.len(),
            repairs: screened.unfixed + screened.flipped,
            fallbacks,
            objective: result.objective,
            status,
            reference_seconds: reference.seconds,
            pipeline_seconds,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_arithmetic() {
        assert!((relative_gap(101.0, 100.0) - 0.01).abs() < 1e-15);
        assert!((relative_gap(-90.0, -100.0) - 0.1).abs() < 1e-15);
        assert_eq!(relative_gap(0.0, 0.0), 0.0);
    }

    #[test]
    fn accuracy_arithmetic() {
        let probs = vec![vec![0.9, 0.2, 0.7, 0.1, 0.6], vec![0.3, 0.8, 0.4, 0.95, 0.05]];
        let truth = vec![vec![1.0, 0.0, 1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0, 1.0, 1.0]];
        assert_eq!(prediction_accuracy(&probs, &truth), 0.9);
    }

    #[test]
    fn time_factor_arithmetic() {
        let r = PipelineReport {
            id: 0,
            accuracy: 0.9,
            fixed_accuracy: None,
            gap: Some(0.0),
            infeasible_before_repair: false,
            fixed: 0,
            repairs: 0,
            fallbacks: 0,
            objective: 0.0,
            status: RunStatus::Optimal,
            reference_seconds: 100.0,
            pipeline_seconds: 4.0,
        };
        assert_eq!(r.time_factor(), 25.0);
    }
}

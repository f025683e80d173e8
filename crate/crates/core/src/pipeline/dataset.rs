use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::instances::io::InstanceRecord;
use crate::instances::{
    evaluate_solution, generate_mclsp, generate_msmk, generate_stochastic, BaseInstance, Instance, MclspRanges,
    MsmkRanges, ProblemKind, SolutionVector,
};
use crate::seqmodel::TrainingSample;
use crate::solver::{branch_and_bound, build_extensive_form, BnbOptions, FixSet, MipStatus};

/// A family of generated instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FamilySpec {
    pub kind: ProblemKind,
    pub items: usize,
    pub horizon: usize,
    /// Children per node at stages `2..=T`; empty for deterministic instances.
    pub branching: Vec<usize>,
    pub count: usize,
    pub first_id: u64,
    pub seed: u64,
    pub mclsp: MclspRanges,
    pub msmk: MsmkRanges,
}

impl Default for FamilySpec {
    fn default() -> Self {
        Self {
            kind: ProblemKind::Mclsp,
            items: 3,
            horizon: 10,
            branching: Vec::new(),
            count: 10,
            first_id: 0,
            seed: 0,
            mclsp: MclspRanges::default(),
            msmk: MsmkRanges::default(),
        }
    }
}

/// Seed of instance `id` within a family (splitmix64 of the pair).
pub fn instance_seed(seed: u64, id: u64) -> u64 {
    let mut z = seed ^ id.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn generate_family(spec: &FamilySpec) -> Result<Vec<InstanceRecord>> {
    if !spec.branching.is_empty() && spec.branching.len() + 1 != spec.horizon {
        return invalid(format!(
            "branching lists {} factors but a horizon of {} needs {}",
            spec.branching.len(),
            spec.horizon,
            spec.horizon - 1
        ));
    }
    (0..spec.count as u64)
        .map(|k| {
            let id = spec.first_id + k;
            let seed = instance_seed(spec.seed, id);
            let base = match spec.kind {
                ProblemKind::Mclsp => BaseInstance::Mclsp(generate_mclsp(seed, spec.items, spec.horizon, &spec.mclsp)?),
                ProblemKind::Msmk => BaseInstance::Msmk(generate_msmk(seed, spec.items, spec.horizon, &spec.msmk)?),
            };
            let instance = if spec.branching.is_empty() {
                match base {
                    BaseInstance::Mclsp(m) => Instance::Mclsp(m),
                    BaseInstance::Msmk(m) => Instance::Msmk(m),
                }
            } else {
                Instance::Stochastic(generate_stochastic(base, &spec.branching, seed)?)
            };
            Ok(InstanceRecord { id, instance })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveBudget {
    pub time_limit: Option<f64>,
    pub node_limit: Option<usize>,
}

impl Default for SolveBudget {
    fn default() -> Self {
        Self {
            time_limit: None,
            node_limit: Some(2_000_000),
        }
    }
}

impl SolveBudget {
    pub fn options(&self) -> BnbOptions {
        BnbOptions {
            time_limit: self.time_limit,
            node_limit: self.node_limit,
        }
    }
}

/// Archived exact solution of one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimumRecord {
    pub id: u64,
    pub status: MipStatus,
    pub objective: f64,
    pub nodes: usize,
    pub solution: SolutionVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveTiming {
    pub id: u64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Excluded {
    pub id: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub samples: Vec<TrainingSample>,
    pub optima: Vec<OptimumRecord>,
    pub timings: Vec<SolveTiming>,
    pub excluded: Vec<Excluded>,
}

// Short-lived and collected in order; boxing buys nothing.
#[allow(clippy::large_enum_variant)]
enum Solved {
    Ok(TrainingSample, OptimumRecord, SolveTiming),
    Skip(Excluded),
}

fn solve_one(rec: &InstanceRecord, budget: &SolveBudget) -> Result<Solved> {
    let ef = build_extensive_form(&rec.instance);
    let r = branch_and_bound(&ef.model, &FixSet::new(), None, &budget.options())?;
    let timing = SolveTiming {
        id: rec.id,
        seconds: r.seconds,
    };
    if r.status != MipStatus::Optimal {
        return Ok(Solved::Skip(Excluded {
            id: rec.id,
            reason: format!("solver stopped with status {:?} after {} nodes", r.status, r.nodes),
        }));
    }
    let solution = ef.solution(&r.values, r.objective);
    let ev = evaluate_solution(&rec.instance, &solution)?;
    if !ev.feasible {
        return Ok(Solved::Skip(Excluded {
            id: rec.id,
            reason: format!("optimum fails verification, residual {:e}", ev.max_residual()),
        }));
    }
    let targets = solution
        .binary
        .iter()
        .map(|row| row.iter().map(|&y| y.round()).collect())
        .collect();
    Ok(Solved::Ok(
        TrainingSample {
            id: rec.id,
            instance: rec.instance.clone(),
            targets,
        },
        OptimumRecord {
            id: rec.id,
            status: r.status,
            objective: r.objective,
            nodes: r.nodes,
            solution,
        },
        timing,
    ))
}

/// Solves every record exactly. Instances the budget cannot close are excluded
/// and logged; outputs are ordered by id.
pub fn make_dataset(records: &[InstanceRecord], budget: &SolveBudget) -> Result<Dataset> {
    let mut solved: Vec<(u64, Solved)> = records
        .par_iter()
        .map(|rec| Ok((rec.id, solve_one(rec, budget)?)))
        .collect::<Result<_>>()?;
    solved.sort_by_key(|(id, _)| *id);
    let mut ds = Dataset::default();
    for (_, s) in solved {
        match s {
            Solved::Ok(sample, opt, timing) => {
                ds.samples.push(sample);
                ds.optima.push(opt);
                ds.timings.push(timing);
            }
            Solved::Skip(ex) => {
                warn!("instance {} excluded: {}", ex.id, ex.reason);
                ds.excluded.push(ex);
            }
        }
    }
    info!("solved {} of {} instances", ds.samples.len(), records.len());
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_family_solves_and_verifies() {
        let spec = FamilySpec {
            items: 2,
            horizon: 3,
            count: 5,
            seed: 4,
            ..FamilySpec::default()
        };
        let recs = generate_family(&spec).unwrap();
        let ds = make_dataset(&recs, &SolveBudget::default()).unwrap();
        assert_eq!(ds.samples.len(), 5);
        for (s, o) in ds.samples.iter().zip(&ds.optima) {
            assert!(evaluate_solution(&s.instance, &o.solution).unwrap().feasible);
            assert!(s.targets.iter().flatten().all(|&y| y == 0.0 || y == 1.0));
        }
    }

    #[test]
    fn stochastic_family_has_node_targets() {
        let spec = FamilySpec {
            kind: ProblemKind::Msmk,
            items: 2,
            horizon: 3,
            branching: vec![2, 2],
            count: 2,
            ..FamilySpec::default()
        };
        let recs = generate_family(&spec).unwrap();
        let ds = make_dataset(&recs, &SolveBudget::default()).unwrap();
        assert!(ds.samples.iter().all(|s| s.targets[0].len() == 7));
    }

    #[test]
    fn node_limit_excludes() {
        let spec = FamilySpec {
            items: 3,
            horizon: 6,
            count: 1,
            ..FamilySpec::default()
        };
        let recs = generate_family(&spec).unwrap();
        let budget = SolveBudget {
            time_limit: None,
            node_limit: Some(1),
        };
        let ds = make_dataset(&recs, &budget).unwrap();
        assert_eq!(ds.excluded.len() + ds.samples.len(), 1);
    }

    #[test]
    fn branching_must_match_horizon() {
        let spec = FamilySpec {
            horizon: 3,
            branching: vec![2],
            ..FamilySpec::default()
        };
        assert!(generate_family(&spec).is_err());
    }
}

use std::time::Instant;

use super::simplex::{solve_lp, LpStatus};
use super::{improves, MipModel, MipResult, MipStatus};
use crate::error::{Error, Result};

pub const ORACLE_MAX_BINARIES: usize = 20;

/// Enumerates every binary assignment and solves the continuous remainder of
/// each by simplex. Refuses models with more than [`ORACLE_MAX_BINARIES`] binaries.
pub fn exhaustive_oracle(model: &MipModel) -> Result<MipResult> {
    model.validate()?;
    let binaries = model.binaries();
    if binaries.len() > ORACLE_MAX_BINARIES {
        return Err(Error::TooManyBinaries {
            count: binaries.len(),
            limit: ORACLE_MAX_BINARIES,
        });
    }
    let start = Instant::now();
    let mut lower: Vec<f64> = model.vars.iter().map(|v| v.lower).collect();
    let mut upper: Vec<f64> = model.vars.iter().map(|v| v.upper).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let total = 1u64 << binaries.len();
    for mask in 0..total {
        for (k, &var) in binaries.iter().enumerate() {
            let v = (mask >> k & 1) as f64;
            lower[var] = v;
            upper[var] = v;
        }
        let lp = solve_lp(model, &lower, &upper);
        if lp.status == LpStatus::Optimal
            && best.as_ref().is_none_or(|(obj, _)| improves(lp.objective, *obj))
        {
            best = Some((lp.objective, lp.values));
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    Ok(match best {
        Some((objective, values)) => MipResult {
            status: MipStatus::Optimal,
            objective,
            values,
            best_bound: objective,
            nodes: total as usize,
            seconds,
        },
        None => MipResult {
            status: MipStatus::Infeasible,
            objective: f64::INFINITY,
            values: Vec::new(),
            best_bound: f64::INFINITY,
            nodes: total as usize,
            seconds,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::Sense;

    #[test]
    fn refuses_large_models() {
        let mut m = MipModel::default();
        for k in 0..21 {
            m.add_binary(format!("b{k}"), 1.0);
        }
        assert!(matches!(exhaustive_oracle(&m), Err(Error::TooManyBinaries { count: 21, .. })));
    }

    #[test]
    fn infeasible_model() {
        let mut m = MipModel::default();
        let a = m.add_binary("a", 1.0);
        m.add_row("r", vec![(a, 1.0)], Sense::Ge, 2.0);
        assert_eq!(exhaustive_oracle(&m).unwrap().status, MipStatus::Infeasible);
    }
}

//! Exact desk-scale MIP solving.
//!
//! Models are always minimizations. LP relaxations are solved with a dense
//! tableau simplex (Bland's rule); the MIP with a deterministic branch-and-bound
//! that accepts variable fixings and a warm start. [`exhaustive_oracle`]
//! enumerates binaries and exists purely to check the other two.

mod bnb;
mod extensive;
mod lp_format;
mod oracle;
mod simplex;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub use bnb::{branch_and_bound, BnbOptions};
pub use extensive::{build_extensive_form, ExtensiveForm};
pub use lp_format::to_lp_format;
pub use oracle::{exhaustive_oracle, ORACLE_MAX_BINARIES};
pub use simplex::{simplex_solve, solve_lp, LpResult, LpStatus};

pub const INTEGRALITY_TOL: f64 = 1e-6;
pub const FEASIBILITY_TOL: f64 = 1e-6;
pub const OBJECTIVE_TOL: f64 = 1e-6;

/// `true` when `a` is better than `b` by more than the relative objective tolerance.
pub(crate) fn improves(a: f64, b: f64) -> bool {
    a < b - OBJECTIVE_TOL * b.abs().max(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub binary: bool,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub coefs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A minimization MIP.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MipModel {
    pub vars: Vec<Variable>,
    pub rows: Vec<Row>,
}

impl MipModel {
    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64, objective: f64) -> usize {
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
            binary: false,
            objective,
        });
        self.vars.len() - 1
    }

    pub fn add_binary(&mut self, name: impl Into<String>, objective: f64) -> usize {
        self.vars.push(Variable {
            name: name.into(),
            lower: 0.0,
            upper: 1.0,
            binary: true,
            objective,
        });
        self.vars.len() - 1
    }

    pub fn add_row(&mut self, name: impl Into<String>, coefs: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.rows.push(Row {
            name: name.into(),
            coefs,
            sense,
            rhs,
        });
    }

    pub fn binaries(&self) -> Vec<usize> {
        (0..self.vars.len()).filter(|&i| self.vars[i].binary).collect()
    }

    pub fn binary_count(&self) -> usize {
        self.vars.iter().filter(|v| v.binary).count()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.vars.iter().zip(values).map(|(v, x)| v.objective * x).sum()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, v) in self.vars.iter().enumerate() {
            if v.binary && (v.lower != 0.0 || v.upper != 1.0) {
                return invalid(format!("binary variable {i} must have bounds [0, 1]"));
            }
            if !v.lower.is_finite() || v.upper < v.lower || !v.objective.is_finite() {
                return invalid(format!("variable {i} has invalid bounds or cost"));
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            if row.coefs.iter().any(|&(i, a)| i >= self.vars.len() || !a.is_finite()) {
                return invalid(format!("row {r} references an unknown variable"));
            }
            if !row.rhs.is_finite() {
                return invalid(format!("row {r} has a non-finite right-hand side"));
            }
        }
        Ok(())
    }

    /// Largest violation of any row or bound by `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (v, &x) in self.vars.iter().zip(values) {
            worst = worst.max(v.lower - x).max(x - v.upper);
        }
        for row in &self.rows {
            let lhs: f64 = row.coefs.iter().map(|&(i, a)| a * values[i]).sum();
            let viol = match row.sense {
                Sense::Le => lhs - row.rhs,
                Sense::Ge => row.rhs - lhs,
                Sense::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }
}

/// Binary variables pinned to 0 or 1.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixSet(BTreeMap<usize, bool>);

impl FixSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, var: usize, value: bool) -> Option<bool> {
        self.0.insert(var, value)
    }

    pub fn remove(&mut self, var: usize) -> Option<bool> {
        self.0.remove(&var)
    }

    pub fn get(&self, var: usize) -> Option<bool> {
        self.0.get(&var).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, bool)> + '_ {
        self.0.iter().map(|(&k, &v)| (k, v))
    }

    pub fn validate(&self, model: &MipModel) -> Result<()> {
        for (var, _) in self.iter() {
            if var >= model.vars.len() || !model.vars[var].binary {
                return invalid(format!("fix on variable {var}, which is not binary"));
            }
        }
        Ok(())
    }
}

impl FromIterator<(usize, bool)> for FixSet {
    fn from_iter<I: IntoIterator<Item = (usize, bool)>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MipStatus {
    Optimal,
    Feasible,
    Infeasible,
    TimeLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MipResult {
    pub status: MipStatus,
    /// Incumbent objective; `+inf` without an incumbent.
    pub objective: f64,
    /// Incumbent values for every variable; empty without an incumbent.
    pub values: Vec<f64>,
    pub best_bound: f64,
    pub nodes: usize,
    pub seconds: f64,
}

impl MipResult {
    pub fn has_incumbent(&self) -> bool {
        !self.values.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixset_rejects_continuous() {
        let mut m = MipModel::default();
        let x = m.add_continuous("x", 0.0, f64::INFINITY, 1.0);
        let y = m.add_binary("y", 1.0);
        let ok: FixSet = [(y, true)].into_iter().collect();
        assert!(ok.validate(&m).is_ok());
        let bad: FixSet = [(x, false)].into_iter().collect();
        assert!(bad.validate(&m).is_err());
    }

    #[test]
    fn validate_catches_bad_rows() {
        let mut m = MipModel::default();
        m.add_binary("y", 1.0);
        m.add_row("r", vec![(3, 1.0)], Sense::Le, 1.0);
        assert!(m.validate().is_err());
    }
}

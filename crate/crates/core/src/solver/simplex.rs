//! Two-phase dense tableau simplex with Bland's anti-cycling rule.
//!
//! Variables are shifted to their lower bounds; finite upper bounds become
//! explicit rows and fixed variables (`lower == upper`) are substituted out.

use super::{FixSet, MipModel, Sense};
use crate::error::Result;

const PIVOT_EPS: f64 = 1e-9;
const COST_EPS: f64 = 1e-9;
const PHASE1_TOL: f64 = 1e-7;
const ZERO_CLEAN: f64 = 1e-12;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Pivot cap reached; only possible through floating-point trouble.
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpResult {
    pub status: LpStatus,
    pub objective: f64,
    /// One value per model variable; empty unless optimal.
    pub values: Vec<f64>,
    pub pivots: usize,
}

impl LpResult {
    fn without_solution(status: LpStatus, pivots: usize) -> Self {
        Self {
            status,
            objective: f64::NAN,
            values: Vec::new(),
            pivots,
        }
    }
}

/// LP relaxation of `model` (binaries relaxed to `[0, 1]`) with optional fixings.
pub fn simplex_solve(model: &MipModel, fixes: Option<&FixSet>) -> Result<LpResult> {
    model.validate()?;
    let mut lower: Vec<f64> = model.vars.iter().map(|v| v.lower).collect();
    let mut upper: Vec<f64> = model.vars.iter().map(|v| v.upper).collect();
    if let Some(f) = fixes {
        f.validate(model)?;
        for (var, val) in f.iter() {
            let v = if val { 1.0 } else { 0.0 };
            lower[var] = v;
            upper[var] = v;
        }
    }
    Ok(solve_lp(model, &lower, &upper))
}

struct StdRow {
    coefs: Vec<(usize, f64)>,
    sense: Sense,
    rhs: f64,
}

struct Tableau {
    rows: usize,
    width: usize,
    data: Vec<f64>,
    /// Reduced costs; the last entry holds minus the objective value.
    z: Vec<f64>,
    basis: Vec<usize>,
    pivots: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

impl Tableau {
    fn rhs_col(&self) -> usize {
        self.width - 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    fn set_costs(&mut self, cost: &[f64]) {
        let w = self.width;
        self.z = vec![0.0; w];
        self.z[..cost.len()].copy_from_slice(cost);
        for i in 0..self.rows {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.data[i * w..(i + 1) * w];
                for (zj, &a) in self.z.iter_mut().zip(row) {
                    *zj -= cb * a;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.data[r * w + c];
        {
            let row = &mut self.data[r * w..(r + 1) * w];
            for v in row.iter_mut() {
                *v /= p;
            }
            row[c] = 1.0;
        }
        let (before, rest) = self.data.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        let eliminate = |row: &mut [f64]| {
            let f = row[c];
            if f != 0.0 {
                for (v, &a) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * a;
                    if v.abs() < ZERO_CLEAN {
                        *v = 0.0;
                    }
                }
                row[c] = 0.0;
            }
        };
        before.chunks_mut(w).for_each(eliminate);
        after.chunks_mut(w).for_each(eliminate);
        eliminate(&mut self.z);
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Bland's rule: lowest-index improving column, ratio ties broken by the
    /// lowest basic column index.
    fn run(&mut self, allowed: usize) -> Outcome {
        let rhs = self.rhs_col();
        loop {
            if self.pivots >= MAX_PIVOTS {
                return Outcome::IterationLimit;
            }
            let Some(enter) = (0..allowed).find(|&j| self.z[j] < -COST_EPS) else {
                return Outcome::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, enter);
                if a > PIVOT_EPS {
                    let ratio = self.at(i, rhs) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            let tie = (ratio - br).abs() <= 1e-12 * br.abs().max(1.0);
                            if ratio < br && !tie || tie && self.basis[i] < self.basis[bi] {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Outcome::Unbounded,
                Some((r, _)) => self.pivot(r, enter),
            }
        }
    }

    fn remove_row(&mut self, r: usize) {
        let w = self.width;
        self.data.drain(r * w..(r + 1) * w);
        self.basis.remove(r);
        self.rows -= 1;
    }
}

/// Solves `min c^T x` over the model rows with per-variable bounds.
/// Every lower bound must be finite.
pub fn solve_lp(model: &MipModel, lower: &[f64], upper: &[f64]) -> LpResult {
    let n = model.vars.len();
    let mut col_of = vec![usize::MAX; n];
    let mut free = Vec::new();
    for i in 0..n {
        if upper[i] < lower[i] - 1e-12 {
            return LpResult::without_solution(LpStatus::Infeasible, 0);
        }
        if upper[i] - lower[i] > 1e-12 {
            col_of[i] = free.len();
            free.push(i);
        }
    }
    let nf = free.len();

    let mut rows: Vec<StdRow> = Vec::with_capacity(model.rows.len() + nf);
    for row in &model.rows {
        let mut rhs = row.rhs;
        let mut coefs = Vec::with_capacity(row.coefs.len());
        for &(i, a) in &row.coefs {
            rhs -= a * lower[i];
            if col_of[i] != usize::MAX && a != 0.0 {
                coefs.push((col_of[i], a));
            }
        }
        if coefs.is_empty() {
            let ok = match row.sense {
                Sense::Le => rhs >= -1e-9,
                Sense::Ge => rhs <= 1e-9,
                Sense::Eq => rhs.abs() <= 1e-9,
            };
            if !ok {
                return LpResult::without_solution(LpStatus::Infeasible, 0);
            }
            continue;
        }
        rows.push(StdRow {
            coefs,
            sense: row.sense,
            rhs,
        });
    }
    for (c, &i) in free.iter().enumerate() {
        if upper[i].is_finite() {
            rows.push(StdRow {
                coefs: vec![(c, 1.0)],
                sense: Sense::Le,
                rhs: upper[i] - lower[i],
            });
        }
    }
    for r in rows.iter_mut() {
        if r.rhs < 0.0 {
            r.rhs = -r.rhs;
            for (_, a) in r.coefs.iter_mut() {
                *a = -*a;
            }
            r.sense = match r.sense {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
    }

    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.sense != Sense::Eq).count();
    let n_art = rows.iter().filter(|r| r.sense != Sense::Le).count();
    let art_start = nf + n_slack;
    let width = art_start + n_art + 1;
    let mut t = Tableau {
        rows: m,
        width,
        data: vec![0.0; m * width],
        z: Vec::new(),
        basis: vec![0; m],
        pivots: 0,
    };
    let (mut s, mut a) = (nf, art_start);
    for (i, r) in rows.iter().enumerate() {
        let base = i * width;
        for &(c, v) in &r.coefs {
            t.data[base + c] += v;
        }
        t.data[base + width - 1] = r.rhs;
        match r.sense {
            Sense::Le => {
                t.data[base + s] = 1.0;
                t.basis[i] = s;
                s += 1;
            }
            Sense::Ge => {
                t.data[base + s] = -1.0;
                s += 1;
                t.data[base + a] = 1.0;
                t.basis[i] = a;
                a += 1;
            }
            Sense::Eq => {
                t.data[base + a] = 1.0;
                t.basis[i] = a;
                a += 1;
            }
        }
    }

    if n_art > 0 {
        let mut phase1 = vec![0.0; width - 1];
        phase1[art_start..].iter_mut().for_each(|c| *c = 1.0);
        t.set_costs(&phase1);
        match t.run(width - 1) {
            Outcome::Optimal => {}
            Outcome::IterationLimit => {
                return LpResult::without_solution(LpStatus::IterationLimit, t.pivots)
            }
            Outcome::Unbounded => unreachable!("phase one objective is bounded below by zero"),
        }
        let scale = rows.iter().map(|r| r.rhs).fold(1.0, f64::max);
        if -t.z[width - 1] > PHASE1_TOL * scale {
            return LpResult::without_solution(LpStatus::Infeasible, t.pivots);
        }
        // drive remaining (zero-valued) artificials out of the basis
        let mut i = 0;
        while i < t.rows {
            if t.basis[i] >= art_start {
                match (0..art_start).find(|&j| t.at(i, j).abs() > PIVOT_EPS) {
                    Some(j) => {
                        t.pivot(i, j);
                        i += 1;
                    }
                    None => t.remove_row(i),
                }
            } else {
                i += 1;
            }
        }
    }

    let mut cost = vec![0.0; width - 1];
    for (c, &i) in free.iter().enumerate() {
        cost[c] = model.vars[i].objective;
    }
    t.set_costs(&cost);
    match t.run(art_start) {
        Outcome::Optimal => {}
        Outcome::Unbounded => return LpResult::without_solution(LpStatus::Unbounded, t.pivots),
        Outcome::IterationLimit => {
            return LpResult::without_solution(LpStatus::IterationLimit, t.pivots)
        }
    }

    let mut shifted = vec![0.0; nf];
    for i in 0..t.rows {
        if t.basis[i] < nf {
            shifted[t.basis[i]] = t.at(i, width - 1);
        }
    }
    let values: Vec<f64> = (0..n)
        .map(|i| match col_of[i] {
            usize::MAX => lower[i],
            c => lower[i] + shifted[c].max(0.0),
        })
        .collect();
    LpResult {
        status: LpStatus::Optimal,
        objective: model.objective_value(&values),
        values,
        pivots: t.pivots,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_variable_upper_bound() {
        let mut m = MipModel::default();
        let x = m.add_continuous("x", 0.0, f64::INFINITY, -1.0);
        m.add_row("cap", vec![(x, 1.0)], Sense::Le, 3.0);
        let r = simplex_solve(&m, None).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert_eq!(r.values, vec![3.0]);
        assert_eq!(r.objective, -3.0);
    }

    #[test]
    fn closed_setup_contradicts_demand() {
        let mut m = MipModel::default();
        let x = m.add_continuous("x", 0.0, f64::INFINITY, 1.0);
        let y = m.add_binary("y", 5.0);
        m.add_row("link", vec![(x, 1.0), (y, -10.0)], Sense::Le, 0.0);
        m.add_row("demand", vec![(x, 1.0)], Sense::Ge, 2.0);
        let open = simplex_solve(&m, None).unwrap();
        assert_eq!(open.status, LpStatus::Optimal);
        assert!((open.objective - 3.0).abs() < 1e-12);
        let fixes: FixSet = [(y, false)].into_iter().collect();
        assert_eq!(simplex_solve(&m, Some(&fixes)).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_is_reported() {
        let mut m = MipModel::default();
        let x = m.add_continuous("x", 0.0, f64::INFINITY, -1.0);
        let y = m.add_continuous("y", 0.0, f64::INFINITY, 0.0);
        m.add_row("r", vec![(x, 1.0), (y, -1.0)], Sense::Le, 1.0);
        assert_eq!(simplex_solve(&m, None).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_and_redundant_rows() {
        // x + y = 4 stated twice, x - y >= 2, min x + 2y  ->  x = 4, y = 0
        let mut m = MipModel::default();
        let x = m.add_continuous("x", 0.0, f64::INFINITY, 1.0);
        let y = m.add_continuous("y", 0.0, f64::INFINITY, 2.0);
        m.add_row("a", vec![(x, 1.0), (y, 1.0)], Sense::Eq, 4.0);
        m.add_row("b", vec![(x, 1.0), (y, 1.0)], Sense::Eq, 4.0);
        m.add_row("c", vec![(x, 1.0), (y, -1.0)], Sense::Ge, 2.0);
        let r = simplex_solve(&m, None).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.values[x] - 4.0).abs() < 1e-12 && r.values[y].abs() < 1e-12);
    }

    #[test]
    fn degenerate_problem_terminates() {
        // a classic cycling example for the largest-coefficient rule
        let mut m = MipModel::default();
        let v: Vec<usize> = [-0.75, 150.0, -0.02, 6.0]
            .iter()
            .enumerate()
            .map(|(k, &c)| m.add_continuous(format!("x{k}"), 0.0, f64::INFINITY, c))
            .collect();
        m.add_row("r1", vec![(v[0], 0.25), (v[1], -60.0), (v[2], -0.04), (v[3], 9.0)], Sense::Le, 0.0);
        m.add_row("r2", vec![(v[0], 0.5), (v[1], -90.0), (v[2], -0.02), (v[3], 3.0)], Sense::Le, 0.0);
        m.add_row("r3", vec![(v[2], 1.0)], Sense::Le, 1.0);
        let r = simplex_solve(&m, None).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective + 0.05).abs() < 1e-9, "{}", r.objective);
    }

    #[test]
    fn fully_fixed_model_checks_rows() {
        let mut m = MipModel::default();
        let a = m.add_binary("a", 1.0);
        let b = m.add_binary("b", 1.0);
        m.add_row("k", vec![(a, 2.0), (b, 2.0)], Sense::Le, 3.0);
        let both: FixSet = [(a, true), (b, true)].into_iter().collect();
        assert_eq!(simplex_solve(&m, Some(&both)).unwrap().status, LpStatus::Infeasible);
        let one: FixSet = [(a, true), (b, false)].into_iter().collect();
        let r = simplex_solve(&m, Some(&one)).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert_eq!(r.values, vec![1.0, 0.0]);
    }
}

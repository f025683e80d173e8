use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::instances::{BaseInstance, Instance, MclspRanges, MsmkRanges, ProblemKind, StochasticInstance};
use crate::scenario::DEFAULT_PAYLOAD_LEVELS;

/// Per-item MCLSP features: realized demand, setup, production and holding
/// cost, payload, average realized demand to date, setup-linking bound.
pub const MCLSP_ITEM_FEATURES: usize = 7;
/// Per-item MSMK features: realized value, weight, payload, average realized
/// value to date.
pub const MSMK_ITEM_FEATURES: usize = 4;

/// Min-max bounds for every feature slot of one problem family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaling {
    pub kind: ProblemKind,
    /// `(min, max)` per per-item slot.
    pub item: Vec<(f64, f64)>,
    /// `(min, max)` of stage capacity per item.
    pub capacity: (f64, f64),
}

fn span((lo, hi): (u32, u32)) -> (f64, f64) {
    (f64::from(lo), f64::from(hi))
}

fn payload_span() -> (f64, f64) {
    let lo = DEFAULT_PAYLOAD_LEVELS.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = DEFAULT_PAYLOAD_LEVELS.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

impl FeatureScaling {
    pub fn mclsp(r: &MclspRanges) -> Self {
        let demand = span(r.demand);
        let capacity = (demand.0, demand.1 / r.utilization);
        Self {
            kind: ProblemKind::Mclsp,
            item: vec![
                demand,
                span(r.setup_cost),
                span(r.production_cost),
                span(r.holding_cost),
                payload_span(),
                demand,
                capacity,
            ],
            capacity,
        }
    }

    pub fn msmk(r: &MsmkRanges) -> Self {
        let value = span(r.value);
        let weight = span(r.weight);
        Self {
            kind: ProblemKind::Msmk,
            item: vec![value, weight, payload_span(), value],
            capacity: (r.tightness * weight.0, r.tightness * weight.1),
        }
    }

    /// Scaling for the default generator ranges of `kind`.
    pub fn default_for(kind: ProblemKind) -> Self {
        match kind {
            ProblemKind::Mclsp => Self::mclsp(&MclspRanges::default()),
            ProblemKind::Msmk => Self::msmk(&MsmkRanges::default()),
        }
    }

    pub fn input_width(&self, items: usize) -> usize {
        self.item.len() * items + 1
    }
}

fn scale(x: f64, (lo, hi): (f64, f64)) -> f64 {
    let w = hi - lo;
    if w > 0.0 {
        (x - lo) / w
    } else {
        x - lo
    }
}

/// Stage input for every tree node, `[node][feature]`. Items are laid out in
/// blocks of per-item slots, followed by the capacity slot. Averages to date
/// follow the unique path from the root to the node.
pub fn node_features(instance: &Instance, scaling: &FeatureScaling) -> Result<Vec<Vec<f64>>> {
    let view = instance.node_view();
    if view.kind() != scaling.kind {
        return invalid(format!(
            "feature scaling is for {:?} but the instance is {:?}",
            scaling.kind,
            view.kind()
        ));
    }
    Ok(stochastic_features(&view, scaling))
}

fn stochastic_features(view: &StochasticInstance, scaling: &FeatureScaling) -> Vec<Vec<f64>> {
    let d = view.items();
    let n = view.node_count();
    let mut cum = vec![vec![0.0; d]; n];
    let bound = match view.base {
        BaseInstance::Mclsp(_) => view.setup_bound(),
        BaseInstance::Msmk(_) => Vec::new(),
    };
    let mut out = Vec::with_capacity(n);
    for node in 0..n {
        let t = view.stage_of(node);
        let tn = view.tree.node(node);
        for j in 0..d {
            cum[node][j] = view.overrides[node][j] + tn.parent.map_or(0.0, |p| cum[p][j]);
        }
        let stages = (t + 1) as f64;
        let mut z = Vec::with_capacity(scaling.input_width(d));
        let cap = match &view.base {
            BaseInstance::Mclsp(m) => {
                for j in 0..d {
                    let raw = [
                        view.overrides[node][j],
                        m.setup_cost[j][t],
                        m.production_cost[j][t],
                        m.holding_cost[j][t],
                        tn.payload[j],
                        cum[node][j] / stages,
                        bound[j][node],
                    ];
                    z.extend(raw.iter().zip(&scaling.item).map(|(&x, &r)| scale(x, r)));
                }
                m.capacity[t]
            }
            BaseInstance::Msmk(m) => {
                for j in 0..d {
                    let raw = [view.overrides[node][j], m.weight[j][t], tn.payload[j], cum[node][j] / stages];
                    z.extend(raw.iter().zip(&scaling.item).map(|(&x, &r)| scale(x, r)));
                }
                m.capacity[t]
            }
        };
        z.push(scale(cap / d as f64, scaling.capacity));
        out.push(z);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate_mclsp, generate_msmk, generate_stochastic};

    #[test]
    fn widths_match_family() {
        let m = generate_mclsp(0, 3, 4, &MclspRanges::default()).unwrap();
        let s = FeatureScaling::default_for(ProblemKind::Mclsp);
        let f = node_features(&Instance::Mclsp(m), &s).unwrap();
        assert_eq!(f.len(), 4);
        assert!(f.iter().all(|z| z.len() == 3 * MCLSP_ITEM_FEATURES + 1));
        let k = generate_msmk(0, 5, 2, &MsmkRanges::default()).unwrap();
        let s = FeatureScaling::default_for(ProblemKind::Msmk);
        let f = node_features(&Instance::Msmk(k), &s).unwrap();
        assert!(f.iter().all(|z| z.len() == s.input_width(5)));
    }

    #[test]
    fn deterministic_payload_sits_mid_range() {
        let m = generate_mclsp(1, 1, 2, &MclspRanges::default()).unwrap();
        let f = node_features(&Instance::Mclsp(m), &FeatureScaling::default_for(ProblemKind::Mclsp)).unwrap();
        assert!((f[0][4] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn kind_mismatch_rejected() {
        let m = generate_mclsp(1, 1, 2, &MclspRanges::default()).unwrap();
        assert!(node_features(&Instance::Mclsp(m), &FeatureScaling::default_for(ProblemKind::Msmk)).is_err());
    }

    #[test]
    fn average_to_date_follows_the_path() {
        let base = generate_mclsp(2, 2, 2, &MclspRanges::default()).unwrap();
        let s = generate_stochastic(BaseInstance::Mclsp(base), &[3], 4).unwrap();
        let ov = s.overrides.clone();
        let f = node_features(&Instance::Stochastic(s), &FeatureScaling::default_for(ProblemKind::Mclsp)).unwrap();
        assert_eq!(f.len(), 4);
        for child in 1..4 {
            let avg = (ov[0][1] + ov[child][1]) / 2.0;
            let slot = MCLSP_ITEM_FEATURES + 5;
            assert!((f[child][slot] - (avg - 1.0) / 19.0).abs() < 1e-12);
        }
    }
}

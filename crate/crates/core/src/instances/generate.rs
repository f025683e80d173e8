use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BaseInstance, MclspInstance, MsmkInstance, StochasticInstance};
use crate::error::{invalid, Error, Result};
use crate::scenario::build_tree;

const MAX_ATTEMPTS: usize = 16;

/// Inclusive integer ranges for MCLSP data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MclspRanges {
    pub demand: (u32, u32),
    pub setup_cost: (u32, u32),
    pub production_cost: (u32, u32),
    pub holding_cost: (u32, u32),
    /// Average share of a stage's capacity consumed by demand.
    pub utilization: f64,
    /// Hard ceiling on any stage capacity after the feasibility repair.
    pub max_capacity: Option<f64>,
}

impl Default for MclspRanges {
    fn default() -> Self {
        Self {
            demand: (1, 20),
            setup_cost: (20, 100),
            production_cost: (1, 5),
            holding_cost: (1, 3),
            utilization: 0.6,
            max_capacity: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MsmkRanges {
    pub value: (u32, u32),
    pub weight: (u32, u32),
    pub tightness: f64,
}

impl Default for MsmkRanges {
    fn default() -> Self {
        Self {
            value: (10, 100),
            weight: (1, 30),
            tightness: 0.25,
        }
    }
}

fn check_range(name: &str, (lo, hi): (u32, u32)) -> Result<()> {
    if lo > hi {
        return invalid(format!("{name} range [{lo}, {hi}] is empty"));
    }
    Ok(())
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (u32, u32)) -> f64 {
    rng.gen_range(lo..=hi) as f64
}

fn table(rng: &mut ChaCha8Rng, d: usize, t: usize, range: (u32, u32)) -> Vec<Vec<f64>> {
    (0..d)
        .map(|_| (0..t).map(|_| draw(rng, range)).collect())
        .collect()
}

/// Draws an MCLSP instance. Capacity is constant over the horizon, sized so
/// that average demand uses `utilization` of it, then raised stage by stage
/// until cumulative capacity covers cumulative demand.
pub fn generate_mclsp(seed: u64, items: usize, horizon: usize, ranges: &MclspRanges) -> Result<MclspInstance> {
    if items < 1 || horizon < 2 {
        return invalid("MCLSP generation needs d >= 1 and T >= 2");
    }
    check_range("demand", ranges.demand)?;
    check_range("setup cost", ranges.setup_cost)?;
    check_range("production cost", ranges.production_cost)?;
    check_range("holding cost", ranges.holding_cost)?;
    if !(ranges.utilization > 0.0 && ranges.utilization.is_finite()) {
        return invalid("utilization must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        let demand = table(&mut rng, items, horizon, ranges.demand);
        let setup_cost = table(&mut rng, items, horizon, ranges.setup_cost);
        let production_cost = table(&mut rng, items, horizon, ranges.production_cost);
        let holding_cost = table(&mut rng, items, horizon, ranges.holding_cost);
        let stage_demand: Vec<f64> = (0..horizon)
            .map(|t| demand.iter().map(|row| row[t]).sum())
            .collect();
        let mean = stage_demand.iter().sum::<f64>() / horizon as f64;
        let base = (mean / ranges.utilization).ceil().max(1.0);
        let mut capacity = vec![base; horizon];
        let (mut cum_cap, mut cum_dem) = (0.0, 0.0);
        for t in 0..horizon {
            cum_dem += stage_demand[t];
            if cum_cap + capacity[t] < cum_dem {
                capacity[t] = cum_dem - cum_cap;
            }
            cum_cap += capacity[t];
        }
        if let Some(limit) = ranges.max_capacity {
            if capacity.iter().any(|&c| c > limit) {
                continue;
            }
        }
        let inst = MclspInstance {
            items,
            horizon,
            demand,
            capacity,
            setup_cost,
            production_cost,
            holding_cost,
            initial_inventory: vec![0.0; items],
        };
        debug_assert!(inst.is_capacity_feasible());
        return Ok(inst);
    }
    Err(Error::GenerationFailed(format!(
        "no feasible MCLSP within capacity limit after {MAX_ATTEMPTS} draws"
    )))
}

/// Draws an MSMK instance with `capacity[t] = tightness * sum_j weight[j][t]`.
pub fn generate_msmk(seed: u64, items: usize, horizon: usize, ranges: &MsmkRanges) -> Result<MsmkInstance> {
    if items < 1 || horizon < 1 {
        return invalid("MSMK generation needs d >= 1 and T >= 1");
    }
    if !(ranges.tightness > 0.0 && ranges.tightness < 1.0) {
        return invalid(format!("tightness {} outside (0, 1)", ranges.tightness));
    }
    check_range("value", ranges.value)?;
    check_range("weight", ranges.weight)?;
    if ranges.weight.1 == 0 {
        return invalid("weights cannot all be zero");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        let value = table(&mut rng, items, horizon, ranges.value);
        let weight = table(&mut rng, items, horizon, ranges.weight);
        let capacity: Vec<f64> = (0..horizon)
            .map(|t| ranges.tightness * weight.iter().map(|row| row[t]).sum::<f64>())
            .collect();
        if capacity.iter().any(|&c| c <= 0.0) {
            continue;
        }
        return Ok(MsmkInstance {
            items,
            horizon,
            value,
            weight,
            capacity,
        });
    }
    Err(Error::GenerationFailed(
        "every draw produced a stage with zero total weight".into(),
    ))
}

/// Binds a base instance to a full tree with the given branching; the tree is
/// seeded from `seed` so instance and tree are reproducible together.
pub fn generate_stochastic(base: BaseInstance, branching: &[usize], seed: u64) -> Result<StochasticInstance> {
    if branching.len() + 1 != base.horizon() {
        return invalid(format!(
            "branching of length {} does not fit horizon {}",
            branching.len(),
            base.horizon()
        ));
    }
    let tree = build_tree(branching, seed ^ 0x5eed_7eee, base.items())?;
    StochasticInstance::new(base, tree)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mclsp_is_deterministic() {
        let r = MclspRanges::default();
        assert_eq!(generate_mclsp(1, 1, 2, &r).unwrap(), generate_mclsp(1, 1, 2, &r).unwrap());
        assert_ne!(generate_mclsp(1, 3, 5, &r).unwrap(), generate_mclsp(2, 3, 5, &r).unwrap());
    }

    #[test]
    fn mclsp_respects_ranges_and_feasibility() {
        let r = MclspRanges::default();
        for seed in 0..50 {
            let inst = generate_mclsp(seed, 3, 10, &r).unwrap();
            inst.validate().unwrap();
            assert!(inst.is_capacity_feasible());
            let within = |m: &Vec<Vec<f64>>, (lo, hi): (u32, u32)| {
                m.iter().flatten().all(|&v| v >= lo as f64 && v <= hi as f64 && v.fract() == 0.0)
            };
            assert!(within(&inst.demand, r.demand));
            assert!(within(&inst.setup_cost, r.setup_cost));
            assert!(within(&inst.production_cost, r.production_cost));
            assert!(within(&inst.holding_cost, r.holding_cost));
        }
    }

    #[test]
    fn mclsp_capacity_limit_fails_after_retries() {
        let r = MclspRanges {
            max_capacity: Some(1.0),
            ..MclspRanges::default()
        };
        assert!(matches!(generate_mclsp(3, 2, 4, &r), Err(Error::GenerationFailed(_))));
        assert!(matches!(
            generate_mclsp(3, 2, 1, &MclspRanges::default()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn msmk_capacity_follows_tightness() {
        let r = MsmkRanges {
            tightness: 0.5,
            ..MsmkRanges::default()
        };
        let inst = generate_msmk(4, 10, 4, &r).unwrap();
        assert_eq!(inst.value.len(), 10);
        assert!(inst.value.iter().all(|row| row.len() == 4));
        assert_eq!(inst.weight.len(), 10);
        for t in 0..4 {
            assert_eq!(inst.capacity[t], 0.5 * inst.stage_weight(t));
            assert!(inst.capacity[t] < inst.stage_weight(t));
        }
        assert_eq!(inst, generate_msmk(4, 10, 4, &r).unwrap());
    }

    #[test]
    fn msmk_tightness_outside_unit_interval_rejected() {
        for r in [0.0, 1.0, -0.2, 1.5] {
            let ranges = MsmkRanges {
                tightness: r,
                ..MsmkRanges::default()
            };
            assert!(matches!(generate_msmk(0, 3, 2, &ranges), Err(Error::InvalidArgument(_))));
        }
    }

    #[test]
    fn stochastic_binding_checks_horizon() {
        let base = BaseInstance::Mclsp(generate_mclsp(0, 2, 3, &MclspRanges::default()).unwrap());
        assert!(generate_stochastic(base.clone(), &[2], 0).is_err());
        let s = generate_stochastic(base, &[2, 2], 0).unwrap();
        assert_eq!(s.overrides.len(), 7);
        assert_eq!(s.overrides[0], s.base.uncertain().iter().map(|r| r[0]).collect::<Vec<_>>());
    }
}

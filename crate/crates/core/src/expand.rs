//! Applying a trained model beyond its training size: longer horizons and
//! more items than the model was built for.
//!
//! Item-wise expansion repeatedly samples `d^M`-item subsets, predicts on the
//! restricted instance and accumulates per-item predictions until every item
//! has been covered more than `delta` times.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::instances::{restrict_to_items, Instance};
use crate::seqmodel::{forward, ForwardMode, Prediction, SeqModel, DECISION_THRESHOLD};

/// How accumulated per-subset predictions become one value per item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Mean of the raw probabilities.
    #[default]
    Mean,
    /// Share of subsets whose prediction clears the decision threshold.
    Vote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpandConfig {
    pub delta: usize,
    pub seed: u64,
    pub aggregation: Aggregation,
}

impl Default for ExpandConfig {
    fn default() -> Self {
        Self {
            delta: 2,
            seed: 0,
            aggregation: Aggregation::Mean,
        }
    }
}

/// Chooses the next subset of `size` items given how often each was covered.
/// The restricted instance lists the items in the order returned.
pub trait SubsetSampler {
    fn sample(&mut self, counts: &[usize], size: usize) -> Vec<usize>;
}

/// Takes the `size` least-covered items, breaking ties at random.
#[derive(Debug, Clone)]
pub struct LeastCoveredSampler {
    rng: ChaCha8Rng,
}

impl LeastCoveredSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl SubsetSampler for LeastCoveredSampler {
    fn sample(&mut self, counts: &[usize], size: usize) -> Vec<usize> {
        let mut keyed: Vec<(usize, u64, usize)> = counts
            .iter()
            .enumerate()
            .map(|(j, &c)| (c, self.rng.gen::<u64>(), j))
            .collect();
        keyed.sort_unstable();
        let mut pick: Vec<usize> = keyed[..size].iter().map(|k| k.2).collect();
        pick.sort_unstable();
        pick
    }
}

/// Accumulators of the coverage loop, `sums` indexed `[item][node]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionState {
    pub sums: Vec<Vec<f64>>,
    pub counts: Vec<usize>,
    pub delta: usize,
    pub model_items: usize,
    pub aggregation: Aggregation,
    pub subsets: Vec<Vec<usize>>,
}

impl ExpansionState {
    pub fn covered(&self) -> bool {
        self.counts.iter().all(|&c| c > self.delta)
    }

    /// Aggregated prediction per `[item][node]`.
    pub fn aggregate(&self) -> Vec<Vec<f64>> {
        self.sums
            .iter()
            .zip(&self.counts)
            .map(|(row, &c)| row.iter().map(|&s| s / c as f64).collect())
            .collect()
    }
}

/// Runs the model over a longer (or equal) horizon; the recurrence is simply
/// applied for every stage of `instance`.
pub fn expand_horizon(model: &SeqModel, instance: &Instance) -> Result<Prediction> {
    forward(model, instance, ForwardMode::Stochastic)
}

pub fn iteration_cap(items: usize, model_items: usize, delta: usize) -> usize {
    50 * items.div_ceil(model_items) * (delta + 1)
}

/// Item-wise expansion with the default least-covered sampler.
pub fn itemwise_expand(model: &SeqModel, instance: &Instance, cfg: &ExpandConfig) -> Result<ExpansionState> {
    itemwise_expand_with(model, instance, cfg, &mut LeastCoveredSampler::new(cfg.seed))
}

/// Item-wise expansion. The subset schedule depends only on coverage counts,
/// so it is drawn first; forward passes then run in parallel and are merged in
/// schedule order.
pub fn itemwise_expand_with(
    model: &SeqModel,
    instance: &Instance,
    cfg: &ExpandConfig,
    sampler: &mut dyn SubsetSampler,
) -> Result<ExpansionState> {
    let (items, dm) = (instance.items(), model.shape.items);
    if dm == 0 || dm > items {
        return invalid(format!("model covers {dm} items but the instance has {items}"));
    }
    let cap = iteration_cap(items, dm, cfg.delta);
    let mut counts = vec![0usize; items];
    let mut subsets = Vec::new();
    while counts.iter().any(|&c| c <= cfg.delta) {
        if subsets.len() >= cap {
            return Err(Error::CoverageNotReached(cap));
        }
        let s = sampler.sample(&counts, dm);
        let mut check = s.clone();
        check.sort_unstable();
        check.dedup();
        if check.len() != dm || check.iter().any(|&j| j >= items) {
            return invalid(format!("sampler returned {s:?}, expected {dm} distinct items below {items}"));
        }
        for &j in &s {
            counts[j] += 1;
        }
        subsets.push(s);
    }

    let preds: Vec<Vec<Vec<f64>>> = subsets
        .par_iter()
        .map(|s| {
            let sub = restrict_to_items(instance, s)?;
            Ok(forward(model, &sub, ForwardMode::Stochastic)?.node_probs)
        })
        .collect::<Result<_>>()?;

    let nodes = preds[0][0].len();
    let mut sums = vec![vec![0.0; nodes]; items];
    for (s, p) in subsets.iter().zip(&preds) {
        for (local, &j) in s.iter().enumerate() {
            for (acc, &x) in sums[j].iter_mut().zip(&p[local]) {
                *acc += match cfg.aggregation {
                    Aggregation::Mean => x,
                    Aggregation::Vote => f64::from(u8::from(x >= DECISION_THRESHOLD)),
                };
            }
        }
    }
    Ok(ExpansionState {
        sums,
        counts,
        delta: cfg.delta,
        model_items: dm,
        aggregation: cfg.aggregation,
        subsets,
    })
}

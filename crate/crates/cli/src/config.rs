//! Flat run configuration. Values come from command-line flags, then a JSON
//! file, then `SCENOPT_SEED` for the seed; anything still unset takes the
//! library default.

use std::path::Path;

use scenopt::expand::{Aggregation, ExpandConfig};
use scenopt::instances::{MclspRanges, MsmkRanges, ProblemKind};
use scenopt::pipeline::{FamilySpec, PipelineConfig, PipelineMode, SolveBudget};
use scenopt::seqmodel::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SEED_ENV: &str = "SCENOPT_SEED";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,

    pub kind: Option<ProblemKind>,
    pub n: Option<usize>,
    pub items: Option<usize>,
    pub horizon: Option<usize>,
    pub branching: Option<Vec<usize>>,
    pub first_id: Option<u64>,
    pub demand_range: Option<(u32, u32)>,
    pub setup_cost_range: Option<(u32, u32)>,
    pub production_cost_range: Option<(u32, u32)>,
    pub holding_cost_range: Option<(u32, u32)>,
    pub utilization: Option<f64>,
    pub max_capacity: Option<f64>,
    pub value_range: Option<(u32, u32)>,
    pub weight_range: Option<(u32, u32)>,
    pub tightness: Option<f64>,

    pub time_limit: Option<f64>,
    pub node_limit: Option<usize>,

    pub epochs: Option<usize>,
    pub hidden: Option<usize>,
    pub learning_rate: Option<f64>,

    pub p_fix: Option<f64>,
    pub mode: Option<PipelineMode>,
    pub screening: Option<bool>,
    pub unfix_budget: Option<usize>,
    pub delta: Option<usize>,
    pub aggregation: Option<Aggregation>,

    pub instances: Option<String>,
    pub dataset: Option<String>,
    pub optima: Option<String>,
    pub model: Option<String>,
    pub metrics: Option<String>,
    pub out: Option<String>,
}

macro_rules! layer {
    ($hi:ident, $lo:ident, $($f:ident),* $(,)?) => {
        RunConfig { $($f: $hi.$f.or($lo.$f)),* }
    };
}

impl RunConfig {
    /// Fields set in `self` win over those in `lower`.
    pub fn over(self, lower: RunConfig) -> RunConfig {
        let (hi, lo) = (self, lower);
        layer!(
            hi, lo, seed, kind, n, items, horizon, branching, first_id, demand_range, setup_cost_range,
            production_cost_range, holding_cost_range, utilization, max_capacity, value_range, weight_range,
            tightness, time_limit, node_limit, epochs, hidden, learning_rate, p_fix, mode, screening,
            unfix_budget, delta, aggregation, instances, dataset, optima, model, metrics, out,
        )
    }

    pub fn from_file(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::validation(format!("config {}: {e}", path.display())))
    }

    pub fn from_env() -> Result<RunConfig, CliError> {
        let seed = match std::env::var(SEED_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse()
                    .map_err(|_| CliError::validation(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?,
            ),
            Err(_) => None,
        };
        Ok(RunConfig { seed, ..RunConfig::default() })
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn family(&self) -> FamilySpec {
        let d = FamilySpec::default();
        let (m, k) = (MclspRanges::default(), MsmkRanges::default());
        FamilySpec {
            kind: self.kind.unwrap_or(d.kind),
            items: self.items.unwrap_or(d.items),
            horizon: self.horizon.unwrap_or(d.horizon),
            branching: self.branching.clone().unwrap_or(d.branching),
            count: self.n.unwrap_or(d.count),
            first_id: self.first_id.unwrap_or(d.first_id),
            seed: self.seed(),
            mclsp: MclspRanges {
                demand: self.demand_range.unwrap_or(m.demand),
                setup_cost: self.setup_cost_range.unwrap_or(m.setup_cost),
                production_cost: self.production_cost_range.unwrap_or(m.production_cost),
                holding_cost: self.holding_cost_range.unwrap_or(m.holding_cost),
                utilization: self.utilization.unwrap_or(m.utilization),
                max_capacity: self.max_capacity.or(m.max_capacity),
            },
            msmk: MsmkRanges {
                value: self.value_range.unwrap_or(k.value),
                weight: self.weight_range.unwrap_or(k.weight),
                tightness: self.tightness.unwrap_or(k.tightness),
            },
        }
    }

    pub fn budget(&self) -> SolveBudget {
        let d = SolveBudget::default();
        SolveBudget {
            time_limit: self.time_limit.or(d.time_limit),
            node_limit: self.node_limit.or(d.node_limit),
        }
    }

    pub fn train(&self) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            epochs: self.epochs.unwrap_or(d.epochs),
            hidden: self.hidden.unwrap_or(d.hidden),
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            seed: self.seed(),
            ..d
        }
    }

    pub fn expand(&self) -> ExpandConfig {
        let d = ExpandConfig::default();
        ExpandConfig {
            delta: self.delta.unwrap_or(d.delta),
            seed: self.seed(),
            aggregation: self.aggregation.unwrap_or(d.aggregation),
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        let d = PipelineConfig::default();
        PipelineConfig {
            p_fix: self.p_fix.unwrap_or(d.p_fix),
            mode: self.mode.unwrap_or(d.mode),
            screening: self.screening.unwrap_or(d.screening),
            time_limit: self.time_limit.or(d.time_limit),
            unfix_budget: self.unfix_budget.unwrap_or(d.unfix_budget),
            expand: self.expand(),
        }
    }
}

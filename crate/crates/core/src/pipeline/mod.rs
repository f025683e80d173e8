//! Learn-then-solve flow: predict binary decisions, screen them against
//! aggregate feasibility conditions, fix or warm-start the exact solver, and
//! report accuracy, gap and speed against a plain solve. Also produces
//! training data by solving generated instances.

mod dataset;
mod metrics;
mod run;
mod screen;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::expand::ExpandConfig;

pub use dataset::{
    generate_family, instance_seed, make_dataset, Dataset, Excluded, FamilySpec, OptimumRecord, SolveBudget,
    SolveTiming,
};
pub use metrics::{
    median, metrics_from_csv, metrics_to_csv, strip_timing, summarize, MetricsRow, Summary, METRICS_HEADER,
    TIMING_COLUMNS,
};
pub use run::{predict, prediction_accuracy, reference_solve, relative_gap, run_pipeline, PipelineOutcome, PipelineReport, Reference, RunStatus};
pub use screen::{screen, screen_form, ScreenOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineMode {
    /// Confident predictions are fixed in the solver.
    Fix,
    /// Predictions only seed the incumbent.
    WarmStart,
    #[default]
    FixThenWarmStart,
}

impl PipelineMode {
    pub fn fixes(self) -> bool {
        matches!(self, Self::Fix | Self::FixThenWarmStart)
    }

    pub fn warm_starts(self) -> bool {
        matches!(self, Self::WarmStart | Self::FixThenWarmStart)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// A binary is fixed to 1 when `p >= p_fix` and to 0 when `p <= 1 - p_fix`.
    pub p_fix: f64,
    pub mode: PipelineMode,
    pub screening: bool,
    /// Seconds per solver call; `None` runs to optimality.
    pub time_limit: Option<f64>,
    /// Unfix actions allowed per repair round before screening gives up.
    pub unfix_budget: usize,
    /// Used when the instance has more items than the model.
    pub expand: ExpandConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            p_fix: 0.9,
            mode: PipelineMode::FixThenWarmStart,
            screening: true,
            time_limit: None,
            unfix_budget: 1000,
            expand: ExpandConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_fix > 0.5 && self.p_fix <= 1.0) {
            return invalid(format!("p_fix must lie in (0.5, 1], got {}", self.p_fix));
        }
        if self.time_limit.is_some_and(|t| !(t > 0.0)) {
            return invalid("time limit must be positive");
        }
        Ok(())
    }
}

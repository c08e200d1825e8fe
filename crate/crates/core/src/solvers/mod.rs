//! Exact, greedy and relaxed solvers for the cardinality-constrained
//! sufficiency, necessity and unified problems.

mod exhaustive;
mod greedy;
mod mask;
mod relaxed;

pub use exhaustive::{exhaustive, solve_exhaustive, MAX_EXHAUSTIVE_DIM};
pub use greedy::{greedy, solve_greedy, IMPROVEMENT_TOLERANCE};
pub use mask::{binarize, binarize_top_k, tv_norm, SoftMask};
pub use relaxed::{optimize_mask, relaxed, solve_relaxed_mask, DataTerms, MaskRun, RelaxedConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{deviations, DeviationReport, Evaluator, Metric, DEFAULT_SAMPLES};
use crate::subset::Subset;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    #[default]
    Exhaustive,
    GreedyForward,
    RelaxedMask,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tau: usize,
    pub alpha: f64,
    pub samples: usize,
    pub seed: u64,
    pub strategy: Strategy,
    pub metric: Metric,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tau: 3,
            alpha: 0.5,
            samples: DEFAULT_SAMPLES,
            seed: 0,
            strategy: Strategy::Exhaustive,
            metric: Metric::AbsoluteDifference,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Domain(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if self.tau > dim {
            return Err(Error::Config(format!("tau = {} exceeds the dimension {dim}", self.tau)));
        }
        if self.samples == 0 {
            return Err(Error::Config("samples must be at least 1".into()));
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        crate::digest::config_hash(self)
    }
}

/// Output of any solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationResult {
    pub strategy: Strategy,
    pub subset: Subset,
    /// 1-based indices of `subset`, for display.
    pub features: Vec<usize>,
    pub objective: f64,
    pub report: DeviationReport,
    pub trace: Vec<f64>,
    pub config_hash: String,
    #[serde(skip)]
    pub wall_time: std::time::Duration,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn finish<E: Evaluator + ?Sized>(
    eval: &E,
    strategy: Strategy,
    subset: Subset,
    objective: f64,
    trace: Vec<f64>,
    metric: Metric,
    alpha: f64,
    config_hash: String,
    started: std::time::Instant,
) -> Result<ExplanationResult> {
    let mut report = deviations(eval, &subset, metric, alpha)?;
    report.config_hash = Some(config_hash.clone());
    Ok(ExplanationResult {
        strategy,
        features: subset.one_based(),
        subset,
        objective,
        report,
        trace,
        config_hash,
        wall_time: started.elapsed(),
    })
}

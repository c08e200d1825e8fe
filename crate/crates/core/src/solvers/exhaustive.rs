use std::time::Instant;

use rayon::prelude::*;

use super::{finish, ExplanationResult, SolverConfig, Strategy};
use crate::error::{Error, Result};
use crate::measures::{unified_objective, Cached, Evaluator, MonteCarlo};
use crate::model::Predictor;
use crate::reference::ReferenceSpec;
use crate::subset::{subsets_up_to, Subset};

pub const MAX_EXHAUSTIVE_DIM: usize = 22;

/// Candidates are scored in parallel in fixed-size blocks so that memory
/// stays bounded at large `d`.
const BLOCK: usize = 1 << 14;

/// Minimizes the unified objective over every `|S| <= tau`. Ties go to the
/// smaller set, then the lexicographically smaller index list.
pub fn exhaustive<E: Evaluator + ?Sized>(eval: &E, cfg: &SolverConfig) -> Result<ExplanationResult> {
    let started = Instant::now();
    let d = eval.dimension();
    if d > MAX_EXHAUSTIVE_DIM {
        return Err(Error::Budget(format!(
            "exhaustive search supports d <= {MAX_EXHAUSTIVE_DIM}, got d = {d}"
        )));
    }
    cfg.validate(d)?;

    let mut best: Option<(Subset, f64)> = None;
    let mut trace = Vec::new();
    let mut size = 0;
    let mut candidates = subsets_up_to(d, cfg.tau).peekable();
    while candidates.peek().is_some() {
        let block: Vec<Subset> = candidates.by_ref().take(BLOCK).collect();
        let scores = block
            .par_iter()
            .map(|s| unified_objective(eval, s, cfg.metric, cfg.alpha).map(|(v, _)| v))
            .collect::<Result<Vec<f64>>>()?;
        for (s, v) in block.into_iter().zip(scores) {
            if s.len() > size {
                trace.push(best.as_ref().map_or(f64::INFINITY, |b| b.1));
                size = s.len();
            }
            if best.as_ref().is_none_or(|b| v < b.1) {
                best = Some((s, v));
            }
        }
    }
    let (subset, objective) = best.expect("the empty set is always a candidate");
    trace.push(objective);
    finish(
        eval,
        Strategy::Exhaustive,
        subset,
        objective,
        trace,
        cfg.metric,
        cfg.alpha,
        cfg.hash(),
        started,
    )
}

/// Exhaustive search with Monte-Carlo restricted predictions.
pub fn solve_exhaustive(
    model: &dyn Predictor,
    x: &[f64],
    reference: &ReferenceSpec,
    cfg: &SolverConfig,
) -> Result<ExplanationResult> {
    let eval = Cached::new(MonteCarlo::new(model, reference, x, cfg.samples, cfg.seed)?);
    exhaustive(&eval, cfg)
}

use std::time::Instant;

use rayon::prelude::*;

use super::{finish, ExplanationResult, SolverConfig, Strategy};
use crate::error::Result;
use crate::measures::{unified_objective, Cached, Evaluator, MonteCarlo};
use crate::model::Predictor;
use crate::reference::ReferenceSpec;
use crate::subset::Subset;

/// A later prefix must beat the best one so far by more than this.
pub const IMPROVEMENT_TOLERANCE: f64 = 1e-12;

/// Forward selection from the empty set for `tau` rounds, adding the best
/// feature each round even when it does not help; returns the best prefix.
pub fn greedy<E: Evaluator + ?Sized>(eval: &E, cfg: &SolverConfig) -> Result<ExplanationResult> {
    let started = Instant::now();
    let d = eval.dimension();
    cfg.validate(d)?;
    let score = |s: &Subset| unified_objective(eval, s, cfg.metric, cfg.alpha).map(|(v, _)| v);

    let mut current = Subset::empty(d);
    let mut value = score(&current)?;
    let mut best = (current.clone(), value);
    let mut trace = vec![value];
    for _ in 0..cfg.tau {
        let candidates: Vec<Subset> = current
            .complement()
            .indices()
            .iter()
            .map(|&j| current.with(j))
            .collect();
        let scores = candidates.par_iter().map(score).collect::<Result<Vec<f64>>>()?;
        let Some((pick, &next)) = scores
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        else {
            break;
        };
        current = candidates[pick].clone();
        value = next;
        trace.push(value);
        if best.1 - value > IMPROVEMENT_TOLERANCE {
            best = (current.clone(), value);
        }
    }
    let (subset, objective) = best;
    finish(
        eval,
        Strategy::GreedyForward,
        subset,
        objective,
        trace,
        cfg.metric,
        cfg.alpha,
        cfg.hash(),
        started,
    )
}

/// Greedy forward selection with Monte-Carlo restricted predictions.
pub fn solve_greedy(
    model: &dyn Predictor,
    x: &[f64],
    reference: &ReferenceSpec,
    cfg: &SolverConfig,
) -> Result<ExplanationResult> {
    let eval = Cached::new(MonteCarlo::new(model, reference, x, cfg.samples, cfg.seed)?);
    greedy(&eval, cfg)
}

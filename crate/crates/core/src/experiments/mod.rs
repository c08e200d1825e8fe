//! Stability of unified explanations on synthetic regression data, and the
//! thresholded-attribution comparison protocol.

mod planted;
pub mod plot;
mod protocol;

pub use planted::{planted_task, random_mask, PlantedSpec, PlantedTask};
pub use protocol::{
    comparison_protocol, grad_input_scores, normalize_scores, occlusion_scores, write_comparison_csv,
    AttributionScores, ComparisonConfig, ComparisonRow, ScoreMethod, LOG_FLOOR,
};

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{Cached, Evaluator, LinearGaussian, Metric, MonteCarlo};
use crate::model::{fit_least_squares, LinearModel, Model, Predictor};
use crate::reference::{GaussianJoint, ReferenceSpec};
use crate::rng::{derive_seed, rng_from_seed, task_seed};
use crate::solvers::{exhaustive, SolverConfig};
use crate::subset::Subset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticRegressionSpec {
    pub dim: usize,
    pub n_train: usize,
    pub n_eval: usize,
    pub seed: u64,
}

impl Default for SyntheticRegressionSpec {
    fn default() -> Self {
        Self {
            dim: 10,
            n_train: 10_000,
            n_eval: 100,
            seed: 0,
        }
    }
}

/// Feature means `2^i`, `i = 1..=d`.
pub fn synthetic_mean(dim: usize) -> DVector<f64> {
    DVector::from_fn(dim, |i, _| 2f64.powi(i as i32 + 1))
}

/// Response weights `32 · 2^{-i}`, `i = 1..=d`.
pub fn synthetic_weights(dim: usize) -> Vec<f64> {
    (1..=dim).map(|i| 32.0 * 2f64.powi(-(i as i32))).collect()
}

/// The mixing matrix `A` with i.i.d. `U(0, 1)` entries.
pub fn synthetic_mixing(dim: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng_from_seed(derive_seed(seed, 0xA));
    DMatrix::from_fn(dim, dim, |_, _| rng.random::<f64>())
}

/// `N(μ, AAᵀ)` for the synthetic generator.
pub fn synthetic_joint(dim: usize, seed: u64) -> Result<GaussianJoint> {
    let a = synthetic_mixing(dim, seed);
    GaussianJoint::new(synthetic_mean(dim), &a * a.transpose())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub train_x: DMatrix<f64>,
    pub train_y: Vec<f64>,
    pub eval_x: DMatrix<f64>,
    pub eval_y: Vec<f64>,
    pub beta: Vec<f64>,
    pub joint: GaussianJoint,
}

impl SyntheticData {
    /// Least-squares fit on the training split, without intercept.
    pub fn fit(&self) -> Result<LinearModel> {
        fit_least_squares(&self.train_x, &self.train_y, false)
    }
}

/// `X = μ + A z` with standard-normal `z`, and `Y = β·X + N(0, 1)`.
pub fn generate_synthetic(spec: &SyntheticRegressionSpec) -> Result<SyntheticData> {
    let d = spec.dim;
    if d < 2 {
        return Err(Error::Config(format!("synthetic data needs d >= 2, got {d}")));
    }
    let a = synthetic_mixing(d, spec.seed);
    let mean = synthetic_mean(d);
    let beta = synthetic_weights(d);
    let joint = GaussianJoint::new(mean.clone(), &a * a.transpose())?;
    let mut rng = rng_from_seed(derive_seed(spec.seed, 0xDA7A));
    let mut draw = |n: usize| {
        let mut x = DMatrix::zeros(n, d);
        let mut y = Vec::with_capacity(n);
        for r in 0..n {
            let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let row = &mean + &a * z;
            let noise: f64 = rng.sample(StandardNormal);
            y.push(row.iter().zip(&beta).map(|(v, b)| v * b).sum::<f64>() + noise);
            x.set_row(r, &row.transpose());
        }
        (x, y)
    };
    let (train_x, train_y) = draw(spec.n_train);
    let (eval_x, eval_y) = draw(spec.n_eval);
    Ok(SyntheticData {
        train_x,
        train_y,
        eval_x,
        eval_y,
        beta,
        joint,
    })
}

/// `|S1 Δ S2| / normalizer`, the normalizer defaulting to the dimension.
pub fn hamming_normalized(a: &Subset, b: &Subset, normalizer: Option<usize>) -> Result<f64> {
    let diff = a.symmetric_difference_len(b)?;
    let n = normalizer.unwrap_or(a.dim());
    if n == 0 {
        return Err(Error::Domain("Hamming normalizer must be positive".into()));
    }
    Ok(diff as f64 / n as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvaluatorKind {
    /// Exact restricted predictions when the model is linear and the
    /// reference Gaussian; Monte-Carlo otherwise.
    #[default]
    Auto,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HammingNormalizer {
    #[default]
    Dimension,
    Tau,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityConfig {
    pub taus: Vec<usize>,
    pub alphas: Vec<f64>,
    pub evaluator: EvaluatorKind,
    pub samples: usize,
    pub seed: u64,
    pub metric: Metric,
    pub normalizer: HammingNormalizer,
    pub z: f64,
}

/// `0, 0.1, …, 1.0`.
pub fn default_alpha_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            taus: vec![3, 6, 9],
            alphas: default_alpha_grid(),
            evaluator: EvaluatorKind::Auto,
            samples: crate::measures::DEFAULT_SAMPLES,
            seed: 0,
            metric: Metric::AbsoluteDifference,
            normalizer: HammingNormalizer::Dimension,
            z: 1.96,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityCurve {
    pub tau: usize,
    pub alphas: Vec<f64>,
    pub mean: Vec<f64>,
    pub half_width: Vec<f64>,
    pub ci_lo: Vec<f64>,
    pub ci_hi: Vec<f64>,
    pub n_eval: usize,
}

fn solve_row<E: Evaluator + ?Sized>(eval: &E, cfg: &StabilityConfig, base: usize) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(cfg.taus.len());
    for &tau in &cfg.taus {
        let solutions = cfg
            .alphas
            .iter()
            .map(|&alpha| {
                let sc = SolverConfig {
                    tau,
                    alpha,
                    samples: cfg.samples,
                    seed: cfg.seed,
                    metric: cfg.metric,
                    ..SolverConfig::default()
                };
                exhaustive(eval, &sc).map(|r| r.subset)
            })
            .collect::<Result<Vec<_>>>()?;
        let norm = match cfg.normalizer {
            HammingNormalizer::Dimension => None,
            HammingNormalizer::Tau => Some(tau),
        };
        out.push(
            solutions
                .iter()
                .map(|s| hamming_normalized(s, &solutions[base], norm))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok(out)
}

/// For every evaluation row and `τ`, solves the unified problem at each
/// `α` and measures the distance to the `α = 0` solution.
pub fn stability_experiment(
    model: &Model,
    eval_x: &DMatrix<f64>,
    reference: &ReferenceSpec,
    cfg: &StabilityConfig,
) -> Result<Vec<StabilityCurve>> {
    let base = cfg
        .alphas
        .iter()
        .position(|&a| a == 0.0)
        .ok_or_else(|| Error::Config("the alpha grid must include 0".into()))?;
    let n = eval_x.nrows();
    if n == 0 {
        return Err(Error::DegenerateInput("no evaluation rows".into()));
    }
    let closed_form = match (cfg.evaluator, model.as_linear(), reference) {
        (EvaluatorKind::Auto, Some(lin), ReferenceSpec::Gaussian(g)) => Some((lin, g)),
        _ => None,
    };
    let rows = (0..n)
        .into_par_iter()
        .map(|i| {
            let x: Vec<f64> = eval_x.row(i).iter().copied().collect();
            match closed_form {
                Some((lin, g)) => solve_row(&Cached::new(LinearGaussian::new(lin, g, &x)?), cfg, base),
                None => {
                    let mc = MonteCarlo::new(
                        model as &dyn Predictor,
                        reference,
                        &x,
                        cfg.samples,
                        task_seed(cfg.seed, i),
                    )?;
                    solve_row(&Cached::new(mc), cfg, base)
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mut curves = Vec::with_capacity(cfg.taus.len());
    for (t, &tau) in cfg.taus.iter().enumerate() {
        let mut curve = StabilityCurve {
            tau,
            alphas: cfg.alphas.clone(),
            mean: vec![],
            half_width: vec![],
            ci_lo: vec![],
            ci_hi: vec![],
            n_eval: n,
        };
        for a in 0..cfg.alphas.len() {
            let values: Vec<f64> = rows.iter().map(|r| r[t][a]).collect();
            let mean = values.iter().sum::<f64>() / n as f64;
            let half = if n > 1 {
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                cfg.z * (var / n as f64).sqrt()
            } else {
                0.0
            };
            curve.mean.push(mean);
            curve.half_width.push(half);
            curve.ci_lo.push((mean - half).clamp(0.0, 1.0));
            curve.ci_hi.push((mean + half).clamp(0.0, 1.0));
        }
        curves.push(curve);
    }
    Ok(curves)
}

/// Writes `stability_<tau>.csv` into `dir` and returns its path.
pub fn write_stability_csv(curve: &StabilityCurve, dir: &Path) -> Result<PathBuf> {
    let path = dir.join(format!("stability_{}.csv", curve.tau));
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_io(&path, e))?;
    let io = |e| csv_io(&path, e);
    w.write_record(["alpha", "mean", "ci_lo", "ci_hi"]).map_err(io)?;
    for a in 0..curve.alphas.len() {
        w.write_record([
            curve.alphas[a].to_string(),
            curve.mean[a].to_string(),
            curve.ci_lo[a].to_string(),
            curve.ci_hi[a].to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub(crate) fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, format!("{other:?}")),
    }
}

use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::mask::{binarize, binarize_top_k, edge_count, tv_on_grid, tv_subgradient};
use super::{finish, ExplanationResult, SoftMask, Strategy};
use crate::error::{Error, Result};
use crate::measures::{unified_objective, Cached, Evaluator, Metric, MonteCarlo, DEFAULT_SAMPLES};
use crate::model::Predictor;
use crate::reference::ReferenceSpec;
use crate::rng::{derive_seed, rng_from_seed, task_seed};
use crate::subset::Subset;

/// Which data terms the relaxed objective uses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataTerms {
    /// `α·ρ(f(x), f_S) + (1-α)·ρ(f_{S_c}, f_∅)`.
    #[default]
    Unified,
    /// Only the sufficiency term `ρ(f(x), f_S)`, whatever `α`.
    SufficiencyOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RelaxedConfig {
    pub iterations: usize,
    pub lambda_l1: f64,
    pub lambda_tv: f64,
    /// Relaxed indicator draws per step, also used for the final report.
    pub samples: usize,
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub temperature: f64,
    pub temperature_decay: f64,
    pub decay_every: usize,
    pub threshold: f64,
    pub init_mean: f64,
    pub init_std: f64,
    pub seed: u64,
    pub metric: Metric,
    pub data_terms: DataTerms,
    /// `(h, w)` layout of the features; required when `lambda_tv > 0`.
    pub grid: Option<(usize, usize)>,
    /// Keep only the largest entries when binarizing.
    pub max_size: Option<usize>,
}

impl Default for RelaxedConfig {
    fn default() -> Self {
        Self {
            iterations: 1000,
            lambda_l1: 2.0,
            lambda_tv: 20.0,
            samples: DEFAULT_SAMPLES,
            step_size: 0.1,
            beta1: 0.9,
            beta2: 0.99,
            temperature: 0.5,
            temperature_decay: 0.99,
            decay_every: 10,
            threshold: 0.5,
            init_mean: 0.5,
            init_std: 1.0 / 6.0,
            seed: 0,
            metric: Metric::AbsoluteDifference,
            data_terms: DataTerms::Unified,
            grid: None,
            max_size: None,
        }
    }
}

const ADAM_EPS: f64 = 1e-8;
const INIT_CLAMP: f64 = 1e-3;
const UNIFORM_CLAMP: f64 = 1e-12;

impl RelaxedConfig {
    pub fn validate(&self, dim: usize) -> Result<(usize, usize)> {
        let positive = [
            ("step_size", self.step_size),
            ("temperature", self.temperature),
            ("temperature_decay", self.temperature_decay),
            ("init_std", self.init_std),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("lambda_l1", self.lambda_l1), ("lambda_tv", self.lambda_tv)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.iterations == 0 || self.samples == 0 || self.decay_every == 0 {
            return Err(Error::Config(
                "iterations, samples and decay_every must be at least 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config(format!(
                "threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        match self.grid {
            Some((h, w)) if h * w != dim => Err(Error::Config(format!("grid {h}x{w} does not match dimension {dim}"))),
            Some(shape) => Ok(shape),
            None if self.lambda_tv > 0.0 => Err(Error::Config("total-variation penalty needs a grid shape".into())),
            None => Ok((1, dim)),
        }
    }

    pub fn hash(&self) -> String {
        crate::digest::config_hash(self)
    }
}

/// Final soft mask and the per-iteration objective estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskRun {
    pub mask: SoftMask,
    pub trace: Vec<f64>,
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Derivative of `ρ(a, b)` with respect to `a`.
fn slope(metric: Metric, a: f64, b: f64) -> f64 {
    let diff = a - b;
    match metric {
        Metric::AbsoluteDifference if diff > 0.0 => 1.0,
        Metric::AbsoluteDifference if diff < 0.0 => -1.0,
        Metric::AbsoluteDifference => 0.0,
        Metric::SquaredDifference => 2.0 * diff,
    }
}

/// Stochastic optimization of the penalized relaxed objective over a
/// sigmoid-parameterized mask.
pub fn optimize_mask(
    model: &dyn Predictor,
    x: &[f64],
    reference: &ReferenceSpec,
    cfg: &RelaxedConfig,
    alpha: f64,
) -> Result<MaskRun> {
    let d = x.len();
    Error::check_dim(model.dimension(), d)?;
    Error::check_dim(d, reference.dimension())?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let (h, w) = cfg.validate(d)?;
    if !model.is_differentiable() {
        return Err(Error::Capability("relaxed mask search needs model gradients".into()));
    }

    let mut init_rng = rng_from_seed(derive_seed(cfg.seed, 1));
    let mut noise_rng = rng_from_seed(derive_seed(cfg.seed, 2));
    let baseline_seed = derive_seed(cfg.seed, 3);

    let mut theta: Vec<f64> = (0..d)
        .map(|_| {
            let z: f64 = init_rng.sample(StandardNormal);
            let s = (cfg.init_mean + cfg.init_std * z).clamp(INIT_CLAMP, 1.0 - INIT_CLAMP);
            (s / (1.0 - s)).ln()
        })
        .collect();
    let mut m1 = vec![0.0; d];
    let mut m2 = vec![0.0; d];

    let edges = edge_count(h, w).max(1) as f64;
    let fx = model.evaluate(x);
    let k = cfg.samples;
    let use_nec = cfg.data_terms == DataTerms::Unified && alpha < 1.0;
    let use_suf = cfg.data_terms == DataTerms::SufficiencyOnly || alpha > 0.0;
    let (w_suf, w_nec) = match cfg.data_terms {
        DataTerms::Unified => (alpha, 1.0 - alpha),
        DataTerms::SufficiencyOnly => (1.0, 0.0),
    };

    let mut trace = Vec::with_capacity(cfg.iterations);
    let mut z = vec![0.0; d];
    let mut dz = vec![0.0; d];
    let mut point = vec![0.0; d];
    for t in 0..cfg.iterations {
        let temp = cfg.temperature * cfg.temperature_decay.powi((t / cfg.decay_every) as i32);
        let baselines = reference.completions(&Subset::empty(d), x, k, task_seed(baseline_seed, t))?;

        let mut f_suf = 0.0;
        let mut f_nec = 0.0;
        let mut f_base = 0.0;
        let mut g_suf = vec![0.0; d];
        let mut g_nec = vec![0.0; d];
        for b in baselines.chunks(d) {
            for i in 0..d {
                let u: f64 = noise_rng.random::<f64>().clamp(UNIFORM_CLAMP, 1.0 - UNIFORM_CLAMP);
                z[i] = sigmoid((theta[i] + u.ln() - (1.0 - u).ln()) / temp);
                dz[i] = z[i] * (1.0 - z[i]) / temp;
            }
            if use_suf {
                for i in 0..d {
                    point[i] = x[i] * z[i] + (1.0 - z[i]) * b[i];
                }
                f_suf += model.evaluate(&point);
                let grad = model.gradient(&point)?;
                for i in 0..d {
                    g_suf[i] += grad[i] * (x[i] - b[i]) * dz[i];
                }
            }
            if use_nec {
                for i in 0..d {
                    point[i] = x[i] * (1.0 - z[i]) + z[i] * b[i];
                }
                f_nec += model.evaluate(&point);
                f_base += model.evaluate(b);
                let grad = model.gradient(&point)?;
                for i in 0..d {
                    g_nec[i] += grad[i] * (b[i] - x[i]) * dz[i];
                }
            }
        }
        let kf = k as f64;
        let (f_suf, f_nec, f_base) = (f_suf / kf, f_nec / kf, f_base / kf);

        let s: Vec<f64> = theta.iter().map(|&v| sigmoid(v)).collect();
        let mut data = 0.0;
        let mut grad = vec![0.0; d];
        if use_suf {
            data += w_suf * cfg.metric.distance(fx, f_suf);
            let c = w_suf * slope(cfg.metric, f_suf, fx) / kf;
            grad.iter_mut().zip(&g_suf).for_each(|(g, v)| *g += c * v);
        }
        if use_nec {
            data += w_nec * cfg.metric.distance(f_nec, f_base);
            let c = w_nec * slope(cfg.metric, f_nec, f_base) / kf;
            grad.iter_mut().zip(&g_nec).for_each(|(g, v)| *g += c * v);
        }

        let penalty = cfg.lambda_l1 * s.iter().sum::<f64>() / d as f64 + cfg.lambda_tv * tv_on_grid(&s, h, w) / edges;
        let mut grad_s = vec![cfg.lambda_l1 / d as f64; d];
        if cfg.lambda_tv > 0.0 {
            tv_subgradient(&s, h, w, cfg.lambda_tv / edges, &mut grad_s);
        }
        for i in 0..d {
            grad[i] += grad_s[i] * s[i] * (1.0 - s[i]);
        }
        trace.push(data + penalty);

        let step = (t + 1) as i32;
        let bias1 = 1.0 - cfg.beta1.powi(step);
        let bias2 = 1.0 - cfg.beta2.powi(step);
        for i in 0..d {
            m1[i] = cfg.beta1 * m1[i] + (1.0 - cfg.beta1) * grad[i];
            m2[i] = cfg.beta2 * m2[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            theta[i] -= cfg.step_size * (m1[i] / bias1) / ((m2[i] / bias2).sqrt() + ADAM_EPS);
        }
    }
    let values = theta.iter().map(|&v| sigmoid(v)).collect();
    Ok(MaskRun {
        mask: SoftMask::new(values, cfg.grid)?,
        trace,
    })
}

/// Optimizes a mask, binarizes it and scores the result with `eval`.
pub fn relaxed<E: Evaluator + ?Sized>(
    eval: &E,
    model: &dyn Predictor,
    x: &[f64],
    reference: &ReferenceSpec,
    cfg: &RelaxedConfig,
    alpha: f64,
) -> Result<(SoftMask, ExplanationResult)> {
    let started = Instant::now();
    let run = optimize_mask(model, x, reference, cfg, alpha)?;
    let subset = match cfg.max_size {
        Some(k) => binarize_top_k(&run.mask, cfg.threshold, k)?,
        None => binarize(&run.mask, cfg.threshold)?,
    };
    let (objective, _) = unified_objective(eval, &subset, cfg.metric, alpha)?;
    let hash = crate::digest::config_hash(&(cfg, alpha));
    let result = finish(
        eval,
        Strategy::RelaxedMask,
        subset,
        objective,
        run.trace,
        cfg.metric,
        alpha,
        hash,
        started,
    )?;
    Ok((run.mask, result))
}

/// Relaxed mask search, reported with Monte-Carlo restricted predictions.
pub fn solve_relaxed_mask(
    model: &dyn Predictor,
    x: &[f64],
    reference: &ReferenceSpec,
    cfg: &RelaxedConfig,
    alpha: f64,
) -> Result<(SoftMask, ExplanationResult)> {
    let eval = Cached::new(MonteCarlo::new(model, reference, x, cfg.samples, cfg.seed)?);
    relaxed(&eval, model, x, reference, cfg, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LinearModel, Model};
    use crate::reference::ConstantBaseline;

    fn zero(d: usize) -> ReferenceSpec {
        ConstantBaseline::new(vec![0.0; d]).unwrap().into()
    }

    fn short(grid: Option<(usize, usize)>) -> RelaxedConfig {
        RelaxedConfig {
            iterations: 300,
            grid,
            ..Default::default()
        }
    }

    #[test]
    fn tv_without_grid_is_config_error() {
        let m = LinearModel::new(vec![1.0; 4], 0.0).unwrap();
        let r = solve_relaxed_mask(&m, &[1.0; 4], &zero(4), &short(None), 1.0);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn non_differentiable_is_capability_error() {
        struct Step;
        impl Predictor for Step {
            fn dimension(&self) -> usize {
                2
            }
            fn task(&self) -> crate::model::Task {
                crate::model::Task::Regression
            }
            fn evaluate(&self, x: &[f64]) -> f64 {
                f64::from(u8::from(x[0] > 0.0))
            }
        }
        let cfg = RelaxedConfig {
            lambda_tv: 0.0,
            ..short(None)
        };
        let r = solve_relaxed_mask(&Step, &[1.0, 1.0], &zero(2), &cfg, 1.0);
        assert!(matches!(r, Err(Error::Capability(_))));
    }

    #[test]
    fn constant_model_mask_shrinks() {
        let m = LinearModel::constant(16, 3.0);
        let cfg = RelaxedConfig {
            iterations: 1000,
            ..short(Some((4, 4)))
        };
        let (mask, result) = solve_relaxed_mask(&m, &[1.0; 16], &zero(16), &cfg, 0.5).unwrap();
        assert!(mask.mean() <= 0.05, "mean {}", mask.mean());
        assert!(result.subset.is_empty());
    }

    #[test]
    fn heavy_l1_empties_mask() {
        let m = LinearModel::new((0..9).map(|i| i as f64).collect(), 0.0).unwrap();
        let cfg = RelaxedConfig {
            lambda_l1: 2000.0,
            ..short(Some((3, 3)))
        };
        for alpha in [0.0, 0.5, 1.0] {
            let (_, r) = solve_relaxed_mask(&m, &[1.0; 9], &zero(9), &cfg, alpha).unwrap();
            assert!(r.subset.is_empty());
        }
    }

    #[test]
    fn recovers_dominant_feature_without_penalty() {
        let m = LinearModel::new(vec![10.0, 0.0, 0.0, 0.0], 0.0).unwrap();
        let cfg = RelaxedConfig {
            lambda_tv: 0.0,
            ..short(None)
        };
        let (mask, r) = solve_relaxed_mask(&m, &[1.0; 4], &zero(4), &cfg, 1.0).unwrap();
        assert!(r.subset.contains(0));
        assert!(mask.values()[0] > 0.9);
        assert_eq!(r.report.delta_suf, 0.0);
    }

    #[test]
    fn deterministic_replay() {
        let m: Model = crate::model::MlpModel::random(
            &[9, 4, 1],
            crate::model::Activation::Tanh,
            crate::model::OutputKind::Linear,
            1.0,
            3,
        )
        .unwrap()
        .into();
        let g: ReferenceSpec =
            crate::reference::GaussianJoint::new(nalgebra::DVector::zeros(9), nalgebra::DMatrix::identity(9, 9))
                .unwrap()
                .into();
        let cfg = RelaxedConfig {
            iterations: 50,
            seed: 11,
            ..short(Some((3, 3)))
        };
        let a = solve_relaxed_mask(&m, &[0.5; 9], &g, &cfg, 0.5).unwrap();
        let b = solve_relaxed_mask(&m, &[0.5; 9], &g, &cfg, 0.5).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(
            serde_json::to_string(&a.1).unwrap(),
            serde_json::to_string(&b.1).unwrap()
        );
    }

    #[test]
    fn top_k_respects_budget() {
        let m = LinearModel::new(vec![5.0, 4.0, 3.0, 2.0], 0.0).unwrap();
        let cfg = RelaxedConfig {
            lambda_tv: 0.0,
            lambda_l1: 0.0,
            max_size: Some(2),
            ..short(None)
        };
        let (_, r) = solve_relaxed_mask(&m, &[1.0; 4], &zero(4), &cfg, 1.0).unwrap();
        assert!(r.subset.len() <= 2);
    }

    #[test]
    fn sufficiency_only_ignores_alpha() {
        // a linear model makes both terms coincide
        let m: Model = crate::model::MlpModel::random(
            &[4, 3, 1],
            crate::model::Activation::Tanh,
            crate::model::OutputKind::Linear,
            1.0,
            5,
        )
        .unwrap()
        .into();
        let g: ReferenceSpec =
            crate::reference::GaussianJoint::new(nalgebra::DVector::zeros(4), nalgebra::DMatrix::identity(4, 4))
                .unwrap()
                .into();
        let x = [1.0, 0.5, -1.0, 2.0];
        let cfg = RelaxedConfig { iterations: 60, seed: 4, lambda_tv: 0.0, ..short(None) };
        let only = RelaxedConfig { data_terms: DataTerms::SufficiencyOnly, ..cfg.clone() };
        let unified = optimize_mask(&m, &x, &g, &cfg, 1.0).unwrap();
        for alpha in [0.0, 0.3] {
            let run = optimize_mask(&m, &x, &g, &only, alpha).unwrap();
            assert_eq!(run.mask, unified.mask);
            assert_eq!(run.trace, unified.trace);
        }
        assert_ne!(optimize_mask(&m, &x, &g, &cfg, 0.0).unwrap().mask, unified.mask);
    }
}

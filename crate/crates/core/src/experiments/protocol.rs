use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::csv_io;
use crate::error::{Error, Result};
use crate::measures::{necessity, sufficiency, Evaluator, Metric, MonteCarlo};
use crate::model::Predictor;
use crate::reference::ReferenceSpec;
use crate::rng::{derive_seed, rng_from_seed, task_seed};
use crate::solvers::{optimize_mask, RelaxedConfig};
use crate::subset::Subset;

/// Floor added before taking logarithms of deviations and sizes.
pub const LOG_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionScores {
    pub method: String,
    pub scores: Vec<f64>,
}

impl AttributionScores {
    pub fn new(method: impl Into<String>, scores: Vec<f64>) -> Result<Self> {
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::Domain("attribution scores must be finite".into()));
        }
        Ok(Self {
            method: method.into(),
            scores,
        })
    }
}

/// The top 1% (rounded up) of nonzero scores become 1; every other score is
/// divided by the smallest of them and clamped to `[0, 1]`.
pub fn normalize_scores(scores: &AttributionScores) -> Result<AttributionScores> {
    let mut nonzero: Vec<usize> = (0..scores.scores.len()).filter(|&i| scores.scores[i] != 0.0).collect();
    if nonzero.is_empty() {
        return Err(Error::DegenerateInput(format!(
            "method '{}' produced only zero scores",
            scores.method
        )));
    }
    let s = &scores.scores;
    nonzero.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    let top = nonzero.len().div_ceil(100);
    let m = s[nonzero[top - 1]];
    if m <= 0.0 {
        return Err(Error::DegenerateInput(format!(
            "method '{}' has no positive top scores",
            scores.method
        )));
    }
    let mut out: Vec<f64> = s.iter().map(|&v| (v / m).clamp(0.0, 1.0)).collect();
    for &i in &nonzero[..top] {
        out[i] = 1.0;
    }
    Ok(AttributionScores {
        method: scores.method.clone(),
        scores: out,
    })
}

/// `score_i = ρ(f(x), f_{[d] \ {i}}(x))`.
pub fn occlusion_scores<E: Evaluator + ?Sized>(eval: &E, metric: Metric) -> Result<AttributionScores> {
    let d = eval.dimension();
    let full = Subset::full(d);
    let scores = (0..d)
        .map(|i| {
            let kept = Subset::new(d, full.indices().iter().copied().filter(|&j| j != i).collect())?;
            Ok(sufficiency(eval, &kept, metric)?.0)
        })
        .collect::<Result<Vec<_>>>()?;
    AttributionScores::new("occlusion", scores)
}

/// `score_i = |∂f/∂x_i · x_i|`.
pub fn grad_input_scores(model: &dyn Predictor, x: &[f64]) -> Result<AttributionScores> {
    let grad = model.gradient(x)?;
    AttributionScores::new("grad-input", grad.iter().zip(x).map(|(g, v)| (g * v).abs()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreMethod {
    Occlusion,
    GradInput,
    /// Every feature scored 1.
    FullMask,
    /// Independent `U(0, 1)` scores.
    Random,
    /// Soft mask of the relaxed solver.
    Relaxed,
}

impl ScoreMethod {
    pub fn name(self) -> &'static str {
        match self {
            ScoreMethod::Occlusion => "occlusion",
            ScoreMethod::GradInput => "grad-input",
            ScoreMethod::FullMask => "full-mask",
            ScoreMethod::Random => "random",
            ScoreMethod::Relaxed => "relaxed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ComparisonConfig {
    pub methods: Vec<ScoreMethod>,
    pub thresholds: Vec<f64>,
    pub metric: Metric,
    pub samples: usize,
    pub seed: u64,
    /// `α` passed to the relaxed solver.
    pub relaxed_alpha: f64,
    pub relaxed: RelaxedConfig,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        Self {
            methods: vec![
                ScoreMethod::Occlusion,
                ScoreMethod::GradInput,
                ScoreMethod::FullMask,
                ScoreMethod::Random,
            ],
            thresholds: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            metric: Metric::AbsoluteDifference,
            samples: crate::measures::DEFAULT_SAMPLES,
            seed: 0,
            relaxed_alpha: 1.0,
            relaxed: RelaxedConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    pub threshold: f64,
    pub neglog_suf: f64,
    pub neglog_nec: f64,
    pub neglog_l0: f64,
}

fn neglog(v: f64) -> f64 {
    -(v + LOG_FLOOR).ln()
}

fn scores_for(
    method: ScoreMethod,
    model: &dyn Predictor,
    x: &[f64],
    reference: &ReferenceSpec,
    eval: &MonteCarlo<'_>,
    cfg: &ComparisonConfig,
    seed: u64,
) -> Result<AttributionScores> {
    let d = x.len();
    match method {
        ScoreMethod::Occlusion => occlusion_scores(eval, cfg.metric),
        ScoreMethod::GradInput => grad_input_scores(model, x),
        ScoreMethod::FullMask => AttributionScores::new("full-mask", vec![1.0; d]),
        ScoreMethod::Random => {
            let mut rng = rng_from_seed(derive_seed(seed, 0x52));
            AttributionScores::new("random", (0..d).map(|_| rng.random::<f64>()).collect())
        }
        ScoreMethod::Relaxed => {
            let rc = RelaxedConfig {
                seed: derive_seed(seed, 0x4d),
                metric: cfg.metric,
                ..cfg.relaxed.clone()
            };
            let run = optimize_mask(model, x, reference, &rc, cfg.relaxed_alpha)?;
            AttributionScores::new("relaxed", run.mask.values().to_vec())
        }
    }
}

/// Mean `-log(Δ_suf + η)`, `-log(Δ_nec + η)` and `-log(|S| + η)` over the rows
/// of `samples`, per method and threshold, where `S` keeps the features whose
/// normalized score reaches the threshold.
pub fn comparison_protocol(
    model: &dyn Predictor,
    samples: &nalgebra::DMatrix<f64>,
    reference: &ReferenceSpec,
    cfg: &ComparisonConfig,
) -> Result<Vec<ComparisonRow>> {
    if let Some(t) = cfg.thresholds.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::Domain(format!("threshold {t} outside [0, 1]")));
    }
    let n = samples.nrows();
    if n == 0 {
        return Err(Error::DegenerateInput("no samples to explain".into()));
    }
    let per_row = (0..n)
        .into_par_iter()
        .map(|i| {
            let x: Vec<f64> = samples.row(i).iter().copied().collect();
            let seed = task_seed(cfg.seed, i);
            let eval = MonteCarlo::new(model, reference, &x, cfg.samples, seed)?;
            let mut cells = Vec::with_capacity(cfg.methods.len() * cfg.thresholds.len());
            for &method in &cfg.methods {
                let normalized = normalize_scores(&scores_for(method, model, &x, reference, &eval, cfg, seed)?)?;
                for &t in &cfg.thresholds {
                    let kept = Subset::from_mask(&normalized.scores.iter().map(|&v| v >= t).collect::<Vec<_>>());
                    let suf = sufficiency(&eval, &kept, cfg.metric)?.0;
                    let nec = necessity(&eval, &kept, cfg.metric)?.0;
                    cells.push([neglog(suf), neglog(nec), neglog(kept.len() as f64)]);
                }
            }
            Ok(cells)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (m, method) in cfg.methods.iter().enumerate() {
        for (k, &t) in cfg.thresholds.iter().enumerate() {
            let cell = m * cfg.thresholds.len() + k;
            let mean = |c: usize| per_row.iter().map(|r| r[cell][c]).sum::<f64>() / n as f64;
            rows.push(ComparisonRow {
                method: method.name().to_string(),
                threshold: t,
                neglog_suf: mean(0),
                neglog_nec: mean(1),
                neglog_l0: mean(2),
            });
        }
    }
    Ok(rows)
}

pub fn write_comparison_csv(rows: &[ComparisonRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(["method", "threshold", "neglog_suf", "neglog_nec", "neglog_l0"])
        .map_err(|e| csv_io(path, e))?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            r.threshold.to_string(),
            r.neglog_suf.to_string(),
            r.neglog_nec.to_string(),
            r.neglog_l0.to_string(),
        ])
        .map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

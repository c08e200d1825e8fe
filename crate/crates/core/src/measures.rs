//! Restricted predictions and the sufficiency, necessity and unified
//! deviation measures.
//!
//! All measures go through an [`Evaluator`], which hands out `f(x)` and
//! `f_S(x)` for arbitrary `S`. [`MonteCarlo`] estimates `f_S(x)` by averaging
//! the model over completions drawn from a reference; [`LinearGaussian`]
//! computes it exactly for a linear model under Gaussian conditioning.

use std::collections::HashMap;
use std::sync::Mutex;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LinearModel, Predictor};
use crate::reference::{GaussianJoint, ReferenceSpec};
use crate::rng::{derive_seed, rng_from_seed};
use crate::subset::Subset;

/// Default number of completions per restricted prediction.
pub const DEFAULT_SAMPLES: usize = 10;

/// Distance on the reals used to compare predictions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    #[default]
    AbsoluteDifference,
    /// Not a metric (no triangle inequality); theory checks refuse it.
    SquaredDifference,
}

impl Metric {
    pub fn distance(self, a: f64, b: f64) -> f64 {
        match self {
            Metric::AbsoluteDifference => (a - b).abs(),
            Metric::SquaredDifference => (a - b) * (a - b),
        }
    }

    pub fn satisfies_triangle_inequality(self) -> bool {
        matches!(self, Metric::AbsoluteDifference)
    }

    /// First-order propagation of a standard error through the distance.
    fn propagate(self, a: f64, b: f64, stderr: f64) -> f64 {
        match self {
            Metric::AbsoluteDifference => stderr,
            Metric::SquaredDifference => 2.0 * (a - b).abs() * stderr,
        }
    }
}

/// Estimate of `f_S(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestrictedPrediction {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
    pub seed: u64,
}

impl RestrictedPrediction {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            stderr: 0.0,
            samples: 1,
            seed: 0,
        }
    }
}

/// The three deviations of one subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub delta_suf: f64,
    pub delta_nec: f64,
    pub delta_uni: f64,
    pub alpha: f64,
    pub stderr_suf: f64,
    pub stderr_nec: f64,
    pub stderr_uni: f64,
    /// `f(x)`
    pub prediction: f64,
    /// `f_S(x)`
    pub restricted: f64,
    /// `f_{S_c}(x)`
    pub restricted_complement: f64,
    /// `f_∅(x)`
    pub baseline: f64,
    pub samples: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

/// Independent sampling streams. Each term of the unified deviation draws its
/// completions from its own stream, derived from the base seed by role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stream {
    /// `f_S(x)` inside the sufficiency term.
    Sufficiency,
    /// `f_{S_c}(x)` inside the necessity term.
    Necessity,
    /// `f_∅(x)`.
    Baseline,
    /// Free-standing estimates (attribution baselines, cross-checks).
    Plain,
}

impl Stream {
    fn label(self) -> u64 {
        match self {
            Stream::Sufficiency => 0x5355_4646,
            Stream::Necessity => 0x4e45_4343,
            Stream::Baseline => 0x4241_5345,
            Stream::Plain => 0,
        }
    }

    pub fn seed(self, base: u64) -> u64 {
        match self {
            Stream::Plain => base,
            other => derive_seed(base, other.label()),
        }
    }
}

/// Source of `f(x)` and `f_S(x)` for one explained input.
pub trait Evaluator: Sync {
    fn dimension(&self) -> usize;

    /// `f(x)`
    fn prediction(&self) -> f64;

    fn restricted(&self, retained: &Subset, stream: Stream) -> Result<RestrictedPrediction>;

    /// Nominal number of completions behind each estimate (1 when exact).
    fn samples(&self) -> usize {
        1
    }

    /// Base seed of the sampling streams (0 when exact).
    fn seed(&self) -> u64 {
        0
    }
}

impl<E: Evaluator + ?Sized> Evaluator for &E {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn prediction(&self) -> f64 {
        (**self).prediction()
    }
    fn restricted(&self, retained: &Subset, stream: Stream) -> Result<RestrictedPrediction> {
        (**self).restricted(retained, stream)
    }
    fn samples(&self) -> usize {
        (**self).samples()
    }
    fn seed(&self) -> u64 {
        (**self).seed()
    }
}

/// Monte-Carlo estimate of `f_S(x)` from `samples` completions.
pub struct MonteCarlo<'a> {
    model: &'a dyn Predictor,
    reference: &'a ReferenceSpec,
    x: Vec<f64>,
    fx: f64,
    samples: usize,
    seed: u64,
}

impl<'a> MonteCarlo<'a> {
    pub fn new(
        model: &'a dyn Predictor,
        reference: &'a ReferenceSpec,
        x: &[f64],
        samples: usize,
        seed: u64,
    ) -> Result<Self> {
        let d = model.dimension();
        Error::check_dim(d, x.len())?;
        Error::check_dim(d, reference.dimension())?;
        if samples == 0 {
            return Err(Error::Domain("sample count must be at least 1".into()));
        }
        Ok(Self {
            model,
            reference,
            x: x.to_vec(),
            fx: model.evaluate(x),
            samples,
            seed,
        })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// `f_S(x)` estimated with an explicit seed.
    pub fn estimate(&self, retained: &Subset, seed: u64) -> Result<RestrictedPrediction> {
        Error::check_dim(self.x.len(), retained.dim())?;
        if retained.is_full() {
            return Ok(RestrictedPrediction {
                value: self.fx,
                stderr: 0.0,
                samples: 1,
                seed,
            });
        }
        let k = if self.reference.is_deterministic() {
            1
        } else {
            self.samples
        };
        let rows = self.reference.completions(retained, &self.x, k, seed)?;
        let d = self.x.len();
        let values: Vec<f64> = rows.chunks(d).map(|r| self.model.evaluate(r)).collect();
        let (mean, stderr) = mean_and_stderr(&values);
        Ok(RestrictedPrediction {
            value: mean,
            stderr,
            samples: k,
            seed,
        })
    }
}

impl Evaluator for MonteCarlo<'_> {
    fn dimension(&self) -> usize {
        self.x.len()
    }

    fn prediction(&self) -> f64 {
        self.fx
    }

    fn restricted(&self, retained: &Subset, stream: Stream) -> Result<RestrictedPrediction> {
        self.estimate(retained, stream.seed(self.seed))
    }

    fn samples(&self) -> usize {
        if self.reference.is_deterministic() {
            1
        } else {
            self.samples
        }
    }

    fn seed(&self) -> u64 {
        self.seed
    }
}

/// Sample mean and its standard error (`n - 1` denominator).
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Exact `f_S(x) = b + β_S·x_S + β_{S_c}·E[X_{S_c} | X_S = x_S]` for a linear
/// model and a Gaussian reference.
pub struct LinearGaussian<'a> {
    model: &'a LinearModel,
    joint: &'a GaussianJoint,
    x: Vec<f64>,
    fx: f64,
}

impl<'a> LinearGaussian<'a> {
    pub fn new(model: &'a LinearModel, joint: &'a GaussianJoint, x: &[f64]) -> Result<Self> {
        Error::check_dim(model.dimension(), x.len())?;
        Error::check_dim(model.dimension(), joint.dimension())?;
        Ok(Self {
            model,
            joint,
            x: x.to_vec(),
            fx: model.evaluate(x),
        })
    }

    pub fn value(&self, retained: &Subset) -> Result<f64> {
        Error::check_dim(self.x.len(), retained.dim())?;
        if retained.is_full() {
            return Ok(self.fx);
        }
        let kept: Vec<f64> = retained.indices().iter().map(|&i| self.x[i]).collect();
        let cond = self.joint.conditional(retained, &kept)?;
        let beta = &self.model.weights;
        let kept_part: f64 = retained.indices().iter().map(|&i| beta[i] * self.x[i]).sum();
        let free = retained.complement();
        let free_beta = DVector::from_iterator(free.len(), free.indices().iter().map(|&i| beta[i]));
        Ok(self.model.intercept + kept_part + free_beta.dot(&cond.mean))
    }
}

impl Evaluator for LinearGaussian<'_> {
    fn dimension(&self) -> usize {
        self.x.len()
    }

    fn prediction(&self) -> f64 {
        self.fx
    }

    fn restricted(&self, retained: &Subset, _stream: Stream) -> Result<RestrictedPrediction> {
        self.value(retained).map(RestrictedPrediction::exact)
    }
}

/// Memoises another evaluator. Valid because every evaluator is a pure
/// function of `(subset, stream)`.
pub struct Cached<E> {
    inner: E,
    memo: Mutex<HashMap<(Vec<usize>, Stream), RestrictedPrediction>>,
}

impl<E: Evaluator> Cached<E> {
    pub fn new(inner: E) -> Self {
        Self {
            inner,
            memo: Mutex::new(HashMap::new()),
        }
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }
}

impl<E: Evaluator> Evaluator for Cached<E> {
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn prediction(&self) -> f64 {
        self.inner.prediction()
    }

    fn restricted(&self, retained: &Subset, stream: Stream) -> Result<RestrictedPrediction> {
        let key = (retained.indices().to_vec(), stream);
        if let Some(hit) = self.memo.lock().expect("memo lock").get(&key) {
            return Ok(*hit);
        }
        let value = self.inner.restricted(retained, stream)?;
        self.memo.lock().expect("memo lock").insert(key, value);
        Ok(value)
    }

    fn samples(&self) -> usize {
        self.inner.samples()
    }

    fn seed(&self) -> u64 {
        self.inner.seed()
    }
}

/// Stream for the `f_{S_c}` term; an empty complement is `f_∅` itself.
fn complement_stream(complement: &Subset) -> Stream {
    if complement.is_empty() {
        Stream::Baseline
    } else {
        Stream::Necessity
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha must lie in [0, 1], got {alpha}")))
    }
}

/// `Δ_suf(S) = ρ(f(x), f_S(x))` and its standard error.
pub fn sufficiency<E: Evaluator + ?Sized>(eval: &E, retained: &Subset, metric: Metric) -> Result<(f64, f64)> {
    let fs = eval.restricted(retained, Stream::Sufficiency)?;
    let fx = eval.prediction();
    Ok((metric.distance(fx, fs.value), metric.propagate(fx, fs.value, fs.stderr)))
}

/// `Δ_nec(S) = ρ(f_{S_c}(x), f_∅(x))` and its standard error.
pub fn necessity<E: Evaluator + ?Sized>(eval: &E, retained: &Subset, metric: Metric) -> Result<(f64, f64)> {
    let complement = retained.complement();
    let fsc = eval.restricted(&complement, complement_stream(&complement))?;
    let f0 = eval.restricted(&Subset::empty(retained.dim()), Stream::Baseline)?;
    let se = fsc.stderr.hypot(f0.stderr);
    Ok((
        metric.distance(fsc.value, f0.value),
        metric.propagate(fsc.value, f0.value, se),
    ))
}

/// All three deviations of `retained` under `alpha`.
pub fn deviations<E: Evaluator + ?Sized>(
    eval: &E,
    retained: &Subset,
    metric: Metric,
    alpha: f64,
) -> Result<DeviationReport> {
    check_alpha(alpha)?;
    let dim = retained.dim();
    let fx = eval.prediction();
    let fs = eval.restricted(retained, Stream::Sufficiency)?;
    let complement = retained.complement();
    let fsc = eval.restricted(&complement, complement_stream(&complement))?;
    let f0 = eval.restricted(&Subset::empty(dim), Stream::Baseline)?;
    let delta_suf = metric.distance(fx, fs.value);
    let delta_nec = metric.distance(fsc.value, f0.value);
    let stderr_suf = metric.propagate(fx, fs.value, fs.stderr);
    let stderr_nec = metric.propagate(fsc.value, f0.value, fsc.stderr.hypot(f0.stderr));
    Ok(DeviationReport {
        delta_suf,
        delta_nec,
        delta_uni: alpha * delta_suf + (1.0 - alpha) * delta_nec,
        alpha,
        stderr_suf,
        stderr_nec,
        stderr_uni: (alpha * stderr_suf).hypot((1.0 - alpha) * stderr_nec),
        prediction: fx,
        restricted: fs.value,
        restricted_complement: fsc.value,
        baseline: f0.value,
        samples: eval.samples(),
        seed: eval.seed(),
        config_hash: None,
    })
}

/// Objective of the unified problem, `α·Δ_suf + (1-α)·Δ_nec`, with its
/// standard error. Skips whichever term carries zero weight.
pub fn unified_objective<E: Evaluator + ?Sized>(
    eval: &E,
    retained: &Subset,
    metric: Metric,
    alpha: f64,
) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    let (suf, se_suf) = if alpha > 0.0 {
        sufficiency(eval, retained, metric)?
    } else {
        (0.0, 0.0)
    };
    let (nec, se_nec) = if alpha < 1.0 {
        necessity(eval, retained, metric)?
    } else {
        (0.0, 0.0)
    };
    Ok((
        alpha * suf + (1.0 - alpha) * nec,
        (alpha * se_suf).hypot((1.0 - alpha) * se_nec),
    ))
}

/// `f_S(x)` from `k` completions drawn with `seed`.
pub fn restricted_prediction(
    model: &dyn Predictor,
    x: &[f64],
    retained: &Subset,
    reference: &ReferenceSpec,
    k: usize,
    seed: u64,
) -> Result<RestrictedPrediction> {
    MonteCarlo::new(model, reference, x, k, seed)?.estimate(retained, seed)
}

pub fn delta_suf(
    model: &dyn Predictor,
    x: &[f64],
    retained: &Subset,
    reference: &ReferenceSpec,
    metric: Metric,
    k: usize,
    seed: u64,
) -> Result<f64> {
    let eval = MonteCarlo::new(model, reference, x, k, seed)?;
    Ok(sufficiency(&eval, retained, metric)?.0)
}

pub fn delta_nec(
    model: &dyn Predictor,
    x: &[f64],
    retained: &Subset,
    reference: &ReferenceSpec,
    metric: Metric,
    k: usize,
    seed: u64,
) -> Result<f64> {
    let eval = MonteCarlo::new(model, reference, x, k, seed)?;
    Ok(necessity(&eval, retained, metric)?.0)
}

#[allow(clippy::too_many_arguments)]
pub fn delta_uni(
    model: &dyn Predictor,
    x: &[f64],
    retained: &Subset,
    reference: &ReferenceSpec,
    metric: Metric,
    alpha: f64,
    k: usize,
    seed: u64,
) -> Result<DeviationReport> {
    let eval = MonteCarlo::new(model, reference, x, k, seed)?;
    deviations(&eval, retained, metric, alpha)
}

/// How supersets are visited by the super-sufficiency/necessity checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupersetMode {
    /// Every superset; requires `d - |S| <= 20`.
    Exhaustive,
    /// `count` uniformly drawn supersets; a `true` answer only means no
    /// violation was found.
    Sampled { count: usize, seed: u64 },
}

pub const MAX_EXHAUSTIVE_FREE: usize = 20;

/// Outcome of a superset check: whether every visited superset met the
/// threshold, and the first one that did not.
#[derive(Debug, Clone, PartialEq)]
pub struct SupersetCheck {
    pub holds: bool,
    pub witness: Option<Subset>,
}

fn check_supersets<F>(retained: &Subset, mode: SupersetMode, mut within: F) -> Result<SupersetCheck>
where
    F: FnMut(&Subset) -> Result<bool>,
{
    let free = retained.complement();
    let free = free.indices();
    let violation = |s: Subset| SupersetCheck {
        holds: false,
        witness: Some(s),
    };
    match mode {
        SupersetMode::Exhaustive => {
            if free.len() > MAX_EXHAUSTIVE_FREE {
                return Err(Error::Budget(format!(
                    "exhaustive superset check needs d - |S| <= {MAX_EXHAUSTIVE_FREE}, got {}",
                    free.len()
                )));
            }
            for extra in crate::subset::all_subsets(free.len()) {
                let mut sup = retained.clone();
                for &k in extra.indices() {
                    sup = sup.with(free[k]);
                }
                if !within(&sup)? {
                    return Ok(violation(sup));
                }
            }
        }
        SupersetMode::Sampled { count, seed } => {
            if !within(retained)? {
                return Ok(violation(retained.clone()));
            }
            let mut rng = rng_from_seed(seed);
            for _ in 0..count {
                let mut sup = retained.clone();
                for &j in free {
                    if rng.random::<bool>() {
                        sup = sup.with(j);
                    }
                }
                if !within(&sup)? {
                    return Ok(violation(sup));
                }
            }
        }
    }
    Ok(SupersetCheck {
        holds: true,
        witness: None,
    })
}

/// Whether every superset of `retained` (itself included) is
/// `eps`-sufficient.
pub fn super_sufficient<E: Evaluator + ?Sized>(
    eval: &E,
    retained: &Subset,
    eps: f64,
    metric: Metric,
    mode: SupersetMode,
) -> Result<SupersetCheck> {
    check_supersets(retained, mode, |s| Ok(sufficiency(eval, s, metric)?.0 <= eps))
}

/// Whether every superset of `retained` (itself included) is
/// `eps`-necessary.
pub fn super_necessary<E: Evaluator + ?Sized>(
    eval: &E,
    retained: &Subset,
    eps: f64,
    metric: Metric,
    mode: SupersetMode,
) -> Result<SupersetCheck> {
    check_supersets(retained, mode, |s| Ok(necessity(eval, s, metric)?.0 <= eps))
}

#[allow(clippy::too_many_arguments)]
pub fn is_super_sufficient(
    model: &dyn Predictor,
    x: &[f64],
    retained: &Subset,
    eps: f64,
    reference: &ReferenceSpec,
    metric: Metric,
    k: usize,
    seed: u64,
    mode: SupersetMode,
) -> Result<SupersetCheck> {
    let eval = Cached::new(MonteCarlo::new(model, reference, x, k, seed)?);
    super_sufficient(&eval, retained, eps, metric, mode)
}

#[allow(clippy::too_many_arguments)]
pub fn is_super_necessary(
    model: &dyn Predictor,
    x: &[f64],
    retained: &Subset,
    eps: f64,
    reference: &ReferenceSpec,
    metric: Metric,
    k: usize,
    seed: u64,
    mode: SupersetMode,
) -> Result<SupersetCheck> {
    let eval = Cached::new(MonteCarlo::new(model, reference, x, k, seed)?);
    super_necessary(&eval, retained, eps, metric, mode)
}

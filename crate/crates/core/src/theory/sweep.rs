//! Seeded sweeps of every check over random linear-Gaussian instances.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    check_corollary1, check_lemma1, check_lemma2, check_theorem1, theorem2, CheckReport, CheckStatus,
    LinearGaussianSetup, MAX_ENUMERATED_DIM,
};
use crate::error::{Error, Result};
use crate::measures::{deviations, Cached, Evaluator, LinearGaussian, Metric, Stream};
use crate::model::LinearModel;
use crate::reference::GaussianJoint;
use crate::rng::{rng_from_seed, task_seed};
use crate::subset::{all_subsets, Subset};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstanceSource {
    /// Standard-normal means and weights, `Σ = AAᵀ + 0.05·I` with uniform `A`.
    #[default]
    Random,
    /// The synthetic regression generator of the stability experiment.
    Synthetic,
    /// Random features with all weights zero.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub lemma1: f64,
    pub lemma2: f64,
    pub theorem1: f64,
    pub theorem2: f64,
    pub corollary1: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            lemma1: 1e-12,
            lemma2: 1e-9,
            theorem1: 1e-9,
            theorem2: 1e-9,
            corollary1: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub instances: usize,
    pub seed: u64,
    pub min_dim: usize,
    pub max_dim: usize,
    pub source: InstanceSource,
    pub checks: Vec<String>,
    /// `ε` for the lemma2/theorem1 checks, as fractions of `ρ(f(x), f_∅(x))`.
    pub eps_fractions: Vec<f64>,
    pub lemma1_alphas: Vec<f64>,
    pub theorem1_alphas: Vec<f64>,
    pub corollary1_alpha: f64,
    /// Defaults to `ceil(d / 2)`.
    pub corollary1_tau: Option<usize>,
    /// Monte-Carlo cross-check size for corollary1; 0 disables it.
    pub mc_samples: usize,
    pub metric: Metric,
    pub tolerances: Tolerances,
    /// Inverts every verdict; exists to exercise the failure path.
    pub self_test_negate: bool,
}

pub const CHECKS: [&str; 5] = ["lemma1", "lemma2", "theorem1", "theorem2", "corollary1"];

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            instances: 200,
            seed: 0,
            min_dim: 2,
            max_dim: 10,
            source: InstanceSource::Random,
            checks: CHECKS.iter().map(|s| s.to_string()).collect(),
            eps_fractions: vec![0.05, 0.2, 0.45],
            lemma1_alphas: vec![0.25, 0.5, 0.75],
            theorem1_alphas: vec![0.0, 0.5, 1.0],
            corollary1_alpha: 0.5,
            corollary1_tau: None,
            mc_samples: 1000,
            metric: Metric::AbsoluteDifference,
            tolerances: Tolerances::default(),
            self_test_negate: false,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.min_dim < 1 || self.min_dim > self.max_dim {
            return Err(Error::Config(format!(
                "need 1 <= min_dim <= max_dim, got {}..{}",
                self.min_dim, self.max_dim
            )));
        }
        if self.max_dim > crate::solvers::MAX_EXHAUSTIVE_DIM {
            return Err(Error::Budget(format!(
                "max_dim {} exceeds the exhaustive limit {}",
                self.max_dim,
                crate::solvers::MAX_EXHAUSTIVE_DIM
            )));
        }
        if let Some(bad) = self.checks.iter().find(|c| !CHECKS.contains(&c.as_str())) {
            return Err(Error::Config(format!("unknown check '{bad}'")));
        }
        Ok(())
    }

    fn enabled(&self, check: &str) -> bool {
        self.checks.iter().any(|c| c == check)
    }
}

/// Counts by status.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub holds: usize,
    pub violated: usize,
    pub uninformative: usize,
    pub vacuous: usize,
}

pub fn summarize(reports: &[CheckReport]) -> Summary {
    let mut s = Summary::default();
    for r in reports {
        match r.status {
            CheckStatus::Holds => s.holds += 1,
            CheckStatus::Violated => s.violated += 1,
            CheckStatus::Uninformative => s.uninformative += 1,
        }
        s.vacuous += usize::from(r.vacuous);
    }
    s
}

pub(crate) fn random_instance(
    source: InstanceSource,
    dim: usize,
    seed: u64,
) -> Result<(LinearGaussianSetup, Vec<f64>)> {
    if source == InstanceSource::Synthetic {
        let joint = crate::experiments::synthetic_joint(dim, seed)?;
        let model = LinearModel::new(crate::experiments::synthetic_weights(dim), 0.0)?;
        let x = joint.sample(1, seed ^ 1)?;
        return Ok((
            LinearGaussianSetup::new(joint, model)?,
            x.row(0).iter().copied().collect(),
        ));
    }
    let mut rng = rng_from_seed(seed);
    let normal = |rng: &mut crate::rng::SeededRng| -> f64 { rng.sample(StandardNormal) };
    let mean = DVector::from_fn(dim, |_, _| normal(&mut rng));
    let a = DMatrix::from_fn(dim, dim, |_, _| rng.random::<f64>());
    let cov = &a * a.transpose() + DMatrix::identity(dim, dim) * 0.05;
    let weights: Vec<f64> = match source {
        InstanceSource::Degenerate => vec![0.0; dim],
        _ => (0..dim).map(|_| normal(&mut rng)).collect(),
    };
    let joint = GaussianJoint::new(mean, cov)?;
    let x = joint.sample(1, rng.random())?;
    let model = LinearModel::new(weights, 0.0)?;
    Ok((
        LinearGaussianSetup::new(joint, model)?,
        x.row(0).iter().copied().collect(),
    ))
}

/// How far a report is from failing; positive means violated.
fn margin(r: &CheckReport) -> f64 {
    match r.status {
        CheckStatus::Uninformative => f64::NEG_INFINITY,
        _ if r.relation == ">=" => r.rhs - r.lhs - r.tolerance,
        _ => r.lhs - r.rhs - r.tolerance,
    }
}

/// Keeps the case closest to (or furthest into) violation.
fn worst(name: &str, cases: Vec<CheckReport>) -> CheckReport {
    let n = cases.len();
    let informative = cases.iter().filter(|r| r.status != CheckStatus::Uninformative).count();
    let mut pick = cases
        .into_iter()
        .enumerate()
        .max_by(|a, b| margin(&a.1).total_cmp(&margin(&b.1)).then(b.0.cmp(&a.0)))
        .map(|(_, r)| r)
        .unwrap_or_else(|| CheckReport::uninformative(name, "no cases"));
    let note = format!("worst of {n} cases ({informative} informative)");
    pick.detail = Some(match pick.detail.take() {
        Some(d) => format!("{note}; {d}"),
        None => note,
    });
    pick
}

fn instance_reports(spec: &SweepSpec, index: usize) -> Result<Vec<CheckReport>> {
    let seed = task_seed(spec.seed, index);
    let mut rng = rng_from_seed(seed);
    let dim = rng.random_range(spec.min_dim..=spec.max_dim);
    let (setup, x) = random_instance(spec.source, dim, seed)?;
    let eval = Cached::new(LinearGaussian::new(&setup.model, &setup.joint, &x)?);
    let metric = spec.metric;
    let tol = &spec.tolerances;
    let label = format!("instance {index} (d={dim}, {:?})", spec.source).to_lowercase();
    let gap = metric.distance(
        eval.prediction(),
        eval.restricted(&Subset::empty(dim), Stream::Baseline)?.value,
    );

    let mut out = Vec::new();
    for &check in CHECKS.iter().filter(|c| spec.enabled(c)) {
        if gap == 0.0 {
            out.push(CheckReport::uninformative(
                check,
                "f(x) equals f_empty(x); every bound is 0 <= 0",
            ));
            continue;
        }
        let enumerable = dim <= MAX_ENUMERATED_DIM;
        let report = match check {
            "lemma1" => {
                let mut cases = Vec::new();
                for s in all_subsets(dim) {
                    for &alpha in &spec.lemma1_alphas {
                        let r = deviations(&eval, &s, metric, alpha)?;
                        cases.push(check_lemma1(&r, alpha, tol.lemma1)?.with_detail(format!("S={s} alpha={alpha}")));
                    }
                }
                worst(check, cases)
            }
            "theorem2" => {
                let cases = all_subsets(dim)
                    .map(|s| theorem2(&eval, &s, metric, tol.theorem2))
                    .collect::<Result<Vec<_>>>()?;
                worst(check, cases)
            }
            "lemma2" if enumerable => {
                let mut cases = Vec::new();
                for &frac in &spec.eps_fractions {
                    let r = check_lemma2(&eval, metric, frac * gap, tol.lemma2)?;
                    cases.push(CheckReport {
                        detail: Some(format!("eps={}*gap; {}", frac, r.detail.clone().unwrap_or_default())),
                        ..r
                    });
                }
                let vacuous = cases.iter().all(|r| r.vacuous);
                CheckReport {
                    vacuous,
                    ..worst(check, cases)
                }
            }
            "theorem1" if enumerable => {
                let mut cases = Vec::new();
                for &frac in &spec.eps_fractions {
                    for &alpha in &spec.theorem1_alphas {
                        let r = check_theorem1(&eval, metric, frac * gap, alpha, tol.theorem1)?;
                        cases.push(CheckReport {
                            detail: Some(format!(
                                "eps={frac}*gap alpha={alpha}; {}",
                                r.detail.clone().unwrap_or_default()
                            )),
                            ..r
                        });
                    }
                }
                worst(check, cases)
            }
            "lemma2" | "theorem1" => CheckReport::uninformative(
                check,
                format!("d = {dim} above the enumeration limit {MAX_ENUMERATED_DIM}"),
            ),
            "corollary1" => {
                let tau = spec.corollary1_tau.unwrap_or(dim.div_ceil(2)).min(dim);
                check_corollary1(
                    &setup,
                    &x,
                    spec.corollary1_alpha,
                    tau,
                    metric,
                    spec.mc_samples,
                    seed,
                    tol.corollary1,
                )?
            }
            _ => unreachable!("checks are validated"),
        };
        out.push(report);
    }
    Ok(out
        .into_iter()
        .map(|r| {
            let r = r.with_instance(label.clone(), seed);
            if spec.self_test_negate {
                r.negated()
            } else {
                r
            }
        })
        .collect())
}

/// All reports of a sweep, in instance order regardless of thread count.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<CheckReport>> {
    spec.validate()?;
    let per_instance = (0..spec.instances)
        .into_par_iter()
        .map(|i| instance_reports(spec, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(per_instance.into_iter().flatten().collect())
}

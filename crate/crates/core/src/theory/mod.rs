//! Numeric verifiers for the sufficiency/necessity bounds and the
//! two-player Shapley connection.

mod sweep;

pub use sweep::{run_sweep, summarize, InstanceSource, Summary, SweepSpec, Tolerances};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{
    deviations, necessity, sufficiency, Cached, DeviationReport, Evaluator, LinearGaussian, Metric, MonteCarlo, Stream,
};
use crate::model::{LinearModel, Predictor};
use crate::reference::{GaussianJoint, ReferenceSpec};
use crate::solvers::{exhaustive, SolverConfig};
use crate::subset::Subset;

/// Largest dimension for the checks that classify every subset.
pub const MAX_ENUMERATED_DIM: usize = 8;

/// Standard errors of slack allowed on Monte-Carlo paths.
pub const MC_SIGMAS: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Holds,
    Violated,
    Uninformative,
}

/// Outcome of one check on one instance: `lhs relation rhs` up to
/// `tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub instance: String,
    pub status: CheckStatus,
    pub lhs: f64,
    pub relation: String,
    pub rhs: f64,
    pub tolerance: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub vacuous: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl CheckReport {
    fn at_most(check: &str, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self::new(check, lhs, "<=", rhs, tolerance, lhs <= rhs + tolerance)
    }

    fn at_least(check: &str, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self::new(check, lhs, ">=", rhs, tolerance, lhs >= rhs - tolerance)
    }

    fn new(check: &str, lhs: f64, relation: &str, rhs: f64, tolerance: f64, ok: bool) -> Self {
        Self {
            check: check.to_string(),
            instance: String::new(),
            status: if ok { CheckStatus::Holds } else { CheckStatus::Violated },
            lhs,
            relation: relation.to_string(),
            rhs,
            tolerance,
            seed: 0,
            vacuous: false,
            detail: None,
        }
    }

    fn uninformative(check: &str, reason: impl Into<String>) -> Self {
        Self {
            status: CheckStatus::Uninformative,
            detail: Some(reason.into()),
            ..Self::new(check, f64::NAN, "", f64::NAN, 0.0, true)
        }
    }

    pub fn with_instance(mut self, instance: impl Into<String>, seed: u64) -> Self {
        self.instance = instance.into();
        self.seed = seed;
        self
    }

    fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    /// Flips holds/violated; used to prove the harness can fail.
    pub fn negated(mut self) -> Self {
        self.status = match self.status {
            CheckStatus::Holds => CheckStatus::Violated,
            CheckStatus::Violated => CheckStatus::Holds,
            CheckStatus::Uninformative => CheckStatus::Uninformative,
        };
        self
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

fn require_metric(metric: Metric) -> Result<()> {
    if metric.satisfies_triangle_inequality() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{metric:?} is not a metric; the bounds need the triangle inequality"
        )))
    }
}

/// The game on the partition `{S, S_c}` with `v(T) = -ρ(f(x), f_T(x))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPlayerGame {
    pub v_empty: f64,
    pub v_first: f64,
    pub v_second: f64,
    pub v_full: f64,
    /// Combined standard error of the three estimated values.
    pub stderr: f64,
}

impl TwoPlayerGame {
    pub fn new<E: Evaluator + ?Sized>(eval: &E, first: &Subset, metric: Metric) -> Result<Self> {
        let fx = eval.prediction();
        let second = first.complement();
        let fs = eval.restricted(first, Stream::Sufficiency)?;
        let stream = if second.is_empty() {
            Stream::Baseline
        } else {
            Stream::Necessity
        };
        let fsc = eval.restricted(&second, stream)?;
        let f0 = eval.restricted(&Subset::empty(first.dim()), Stream::Baseline)?;
        Ok(Self {
            v_empty: -metric.distance(fx, f0.value),
            v_first: -metric.distance(fx, fs.value),
            v_second: -metric.distance(fx, fsc.value),
            v_full: 0.0,
            stderr: (fs.stderr.powi(2) + fsc.stderr.powi(2) + f0.stderr.powi(2)).sqrt(),
        })
    }

    /// Shapley value of the first player.
    pub fn shapley_first(&self) -> f64 {
        0.5 * (self.v_full - self.v_second) + 0.5 * (self.v_first - self.v_empty)
    }

    /// Shapley value of the second player.
    pub fn shapley_second(&self) -> f64 {
        0.5 * (self.v_full - self.v_first) + 0.5 * (self.v_second - self.v_empty)
    }
}

/// Two-player Shapley value of `retained` against its complement.
pub fn two_player_shapley(
    model: &dyn Predictor,
    x: &[f64],
    retained: &Subset,
    reference: &ReferenceSpec,
    metric: Metric,
    k: usize,
    seed: u64,
) -> Result<f64> {
    let eval = MonteCarlo::new(model, reference, x, k, seed)?;
    Ok(TwoPlayerGame::new(&eval, retained, metric)?.shapley_first())
}

/// Shapley lower bound `φ_S >= ρ(f, f_∅) - Δ_uni(S, ½)`. The allowed slack
/// is `tol` plus six combined standard errors.
pub fn theorem2<E: Evaluator + ?Sized>(eval: &E, retained: &Subset, metric: Metric, tol: f64) -> Result<CheckReport> {
    const NAME: &str = "theorem2";
    require_metric(metric)?;
    let game = TwoPlayerGame::new(eval, retained, metric)?;
    let base = -game.v_empty;
    if base == 0.0 {
        return Ok(CheckReport::uninformative(NAME, "f(x) equals f_empty(x)"));
    }
    let report = deviations(eval, retained, metric, 0.5)?;
    let phi = game.shapley_first();
    let rhs = base - report.delta_uni;
    let tolerance = tol * (1.0 + base.abs()) + MC_SIGMAS * game.stderr.hypot(report.stderr_uni);
    Ok(CheckReport::at_least(NAME, phi, rhs, tolerance).with_detail(format!("S={retained}")))
}

pub fn check_theorem2(
    model: &dyn Predictor,
    x: &[f64],
    retained: &Subset,
    reference: &ReferenceSpec,
    metric: Metric,
    k: usize,
    seed: u64,
) -> Result<CheckReport> {
    let eval = MonteCarlo::new(model, reference, x, k, seed)?;
    theorem2(&eval, retained, metric, 0.0)
}

/// `Δ_suf <= ε/α` and `Δ_nec <= ε/(1-α)` with `ε = Δ_uni`; reports the
/// tighter of the two.
pub fn check_lemma1(report: &DeviationReport, alpha: f64, tol: f64) -> Result<CheckReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let eps = report.delta_uni;
    let suf = (report.delta_suf, eps / alpha);
    let nec = (report.delta_nec, eps / (1.0 - alpha));
    let (lhs, rhs) = if suf.0 - suf.1 >= nec.0 - nec.1 { suf } else { nec };
    Ok(CheckReport::at_most("lemma1", lhs, rhs, tol * (1.0 + rhs.abs())))
}

/// Sufficiency and necessity deviations of every subset, indexed by bitmask.
struct SubsetTable {
    dim: usize,
    suf: Vec<f64>,
    nec: Vec<f64>,
}

impl SubsetTable {
    fn build<E: Evaluator + ?Sized>(eval: &E, metric: Metric) -> Result<Self> {
        let dim = eval.dimension();
        if dim > MAX_ENUMERATED_DIM {
            return Err(Error::Budget(format!(
                "subset classification supports d <= {MAX_ENUMERATED_DIM}, got {dim}"
            )));
        }
        let n = 1usize << dim;
        let mut suf = Vec::with_capacity(n);
        let mut nec = Vec::with_capacity(n);
        for bits in 0..n as u64 {
            let s = Subset::from_bits(dim, bits);
            suf.push(sufficiency(eval, &s, metric)?.0);
            nec.push(necessity(eval, &s, metric)?.0);
        }
        Ok(Self { dim, suf, nec })
    }

    /// `holds[i]` for every superset of `i`, computed from the full set down.
    fn super_closure(holds: &[bool]) -> Vec<bool> {
        let n = holds.len();
        let dim = n.trailing_zeros() as usize;
        let mut out = holds.to_vec();
        for bits in (0..n).rev() {
            if !out[bits] {
                continue;
            }
            out[bits] = (0..dim).filter(|j| bits & (1 << j) == 0).all(|j| out[bits | (1 << j)]);
        }
        out
    }

    fn classify(&self, eps: f64) -> Classes {
        let sufficient: Vec<bool> = self.suf.iter().map(|&v| v <= eps).collect();
        let necessary: Vec<bool> = self.nec.iter().map(|&v| v <= eps).collect();
        Classes {
            super_sufficient: Self::super_closure(&sufficient),
            super_necessary: Self::super_closure(&necessary),
            sufficient,
            necessary,
        }
    }

    fn subset(&self, bits: usize) -> Subset {
        Subset::from_bits(self.dim, bits as u64)
    }
}

struct Classes {
    sufficient: Vec<bool>,
    necessary: Vec<bool>,
    super_sufficient: Vec<bool>,
    super_necessary: Vec<bool>,
}

/// Both bounds need `ε < ρ(f, f_∅)/2`; returns the gap `ρ(f, f_∅)`.
fn gate<E: Evaluator + ?Sized>(
    eval: &E,
    metric: Metric,
    eps: f64,
    tol: f64,
) -> Result<std::result::Result<f64, String>> {
    let f0 = eval.restricted(&Subset::empty(eval.dimension()), Stream::Baseline)?;
    let gap = metric.distance(eval.prediction(), f0.value);
    if 2.0 * eps + tol * (1.0 + gap) >= gap {
        return Ok(Err(format!("eps = {eps} is not below half of rho(f, f_empty) = {gap}")));
    }
    Ok(Ok(gap))
}

/// Every ε-sufficient `A` and ε-necessary `B`, with `A` super-sufficient or
/// `B` super-necessary, must intersect.
pub fn check_lemma2<E: Evaluator + ?Sized>(eval: &E, metric: Metric, eps: f64, tol: f64) -> Result<CheckReport> {
    const NAME: &str = "lemma2";
    require_metric(metric)?;
    let table = SubsetTable::build(eval, metric)?;
    if let Err(reason) = gate(eval, metric, eps, tol)? {
        return Ok(CheckReport::uninformative(NAME, reason));
    }
    let classes = table.classify(eps);
    let n = table.suf.len();
    let mut qualifying = 0u64;
    let mut disjoint = 0u64;
    let mut witness = None;
    for a in (0..n).filter(|&a| classes.sufficient[a]) {
        for b in (0..n).filter(|&b| classes.necessary[b]) {
            if !(classes.super_sufficient[a] || classes.super_necessary[b]) {
                continue;
            }
            qualifying += 1;
            if a & b == 0 {
                disjoint += 1;
                witness.get_or_insert((a, b));
            }
        }
    }
    let mut report = CheckReport::at_most(NAME, disjoint as f64, 0.0, 0.0);
    report.vacuous = qualifying == 0;
    let detail = match witness {
        Some((a, b)) => format!(
            "{qualifying} qualifying pairs; disjoint A={} B={}",
            table.subset(a),
            table.subset(b)
        ),
        None => format!("{qualifying} qualifying pairs"),
    };
    Ok(report.with_detail(detail))
}

/// For every ε-super-sufficient `S_suf` and ε-super-necessary `S_nec`, the
/// union `S*` is ε-unified-optimal-feasible with
/// `max(|S_suf|, |S_nec|) <= |S*| < |S_suf| + |S_nec|`, and nested pairs
/// collapse to the larger set.
pub fn check_theorem1<E: Evaluator + ?Sized>(
    eval: &E,
    metric: Metric,
    eps: f64,
    alpha: f64,
    tol: f64,
) -> Result<CheckReport> {
    const NAME: &str = "theorem1";
    require_metric(metric)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let table = SubsetTable::build(eval, metric)?;
    if let Err(reason) = gate(eval, metric, eps, tol)? {
        return Ok(CheckReport::uninformative(NAME, reason));
    }
    let classes = table.classify(eps);
    let n = table.suf.len();
    let sufs: Vec<usize> = (0..n).filter(|&s| classes.super_sufficient[s]).collect();
    let necs: Vec<usize> = (0..n).filter(|&s| classes.super_necessary[s]).collect();
    if sufs.is_empty() || necs.is_empty() {
        return Ok(CheckReport::uninformative(
            NAME,
            "no super-sufficient or super-necessary set",
        ));
    }
    let bound = eps + tol * (1.0 + eps.abs());
    let mut failures = 0u64;
    let mut worst = f64::NEG_INFINITY;
    let mut witness = None;
    for &a in &sufs {
        for &b in &necs {
            let star = a | b;
            let uni = alpha * table.suf[star] + (1.0 - alpha) * table.nec[star];
            worst = worst.max(uni);
            let (ta, tb, ts) = (a.count_ones(), b.count_ones(), star.count_ones());
            let nested_ok = (a & !b != 0 || star == b) && (b & !a != 0 || star == a);
            let ok = uni <= bound && ta.max(tb) <= ts && ts < ta + tb && nested_ok;
            if !ok {
                failures += 1;
                witness.get_or_insert((a, b));
            }
        }
    }
    let canonical = (
        sufs.iter()
            .copied()
            .min_by_key(|s| (s.count_ones(), table.subset(*s)))
            .expect("non-empty"),
        necs.iter()
            .copied()
            .min_by_key(|s| (s.count_ones(), table.subset(*s)))
            .expect("non-empty"),
    );
    let report = CheckReport::at_most(NAME, failures as f64, 0.0, 0.0);
    let mut detail = format!(
        "{} pairs; max unified deviation of a union {worst}; minimal S_suf={} S_nec={}",
        sufs.len() * necs.len(),
        table.subset(canonical.0),
        table.subset(canonical.1)
    );
    if let Some((a, b)) = witness {
        detail.push_str(&format!(
            "; failing pair S_suf={} S_nec={}",
            table.subset(a),
            table.subset(b)
        ));
    }
    Ok(report.with_detail(detail))
}

/// A jointly Gaussian feature vector with a linear response
/// `Y = β·X + b + noise`, so that `E[Y | X] = β·X + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianSetup {
    pub joint: GaussianJoint,
    pub model: LinearModel,
}

impl LinearGaussianSetup {
    pub fn new(joint: GaussianJoint, model: LinearModel) -> Result<Self> {
        Error::check_dim(joint.dimension(), model.dimension())?;
        Ok(Self { joint, model })
    }
}

/// `E[Y | X_S = x_S]` through the regression of `Y` on `X_S`:
/// `E[Y] + Cov(Y, X_S) Var(X_S)^{-1} (x_S - μ_S)`.
pub fn conditional_expectation_oracle(setup: &LinearGaussianSetup, retained: &Subset, x: &[f64]) -> Result<f64> {
    let d = setup.joint.dimension();
    Error::check_dim(d, x.len())?;
    Error::check_dim(d, retained.dim())?;
    let mean = setup.joint.mean();
    let cov = setup.joint.cov();
    let beta = DVector::from_column_slice(&setup.model.weights);
    let mean_y = beta.dot(mean) + setup.model.intercept;
    if retained.is_empty() {
        return Ok(mean_y);
    }
    let idx = retained.indices();
    let cov_yx = cov * &beta;
    let k = idx.len();
    let block = nalgebra::DMatrix::from_fn(k, k, |r, c| cov[(idx[r], idx[c])]);
    let shift = DVector::from_iterator(k, idx.iter().map(|&i| x[i] - mean[i]));
    let solved = block
        .lu()
        .solve(&shift)
        .ok_or_else(|| Error::Conditioning(format!("covariance block of {retained} is singular")))?;
    let gain: f64 = idx.iter().zip(solved.iter()).map(|(&i, s)| cov_yx[i] * s).sum();
    Ok(mean_y + gain)
}

/// Solves the unified problem exactly and checks that the optimum bounds the
/// conditional-expectation gaps `ρ(E[Y|x], E[Y|x_S*])` and
/// `ρ(E[Y|x_{S*_c}], E[Y])` by `ε/α` and `ε/(1-α)`. When `samples > 0` the
/// closed-form values are also compared with Monte-Carlo estimates.
#[allow(clippy::too_many_arguments)]
pub fn check_corollary1(
    setup: &LinearGaussianSetup,
    x: &[f64],
    alpha: f64,
    tau: usize,
    metric: Metric,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<CheckReport> {
    const NAME: &str = "corollary1";
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let d = setup.joint.dimension();
    let eval = Cached::new(LinearGaussian::new(&setup.model, &setup.joint, x)?);
    let cfg = SolverConfig {
        tau,
        alpha,
        metric,
        ..SolverConfig::default()
    };
    let best = exhaustive(&eval, &cfg)?;
    let star = best.subset.clone();
    let eps = best.objective;

    let oracle = |s: &Subset| conditional_expectation_oracle(setup, s, x);
    let targets = [Subset::full(d), star.clone(), star.complement(), Subset::empty(d)];
    let exact: Vec<f64> = targets.iter().map(oracle).collect::<Result<_>>()?;
    let (e_full, e_star, e_comp, e_mean) = (exact[0], exact[1], exact[2], exact[3]);

    let suf = (metric.distance(e_full, e_star), eps / alpha);
    let nec = (metric.distance(e_comp, e_mean), eps / (1.0 - alpha));
    let (lhs, rhs) = if suf.0 - suf.1 >= nec.0 - nec.1 { suf } else { nec };
    let mut report = CheckReport::at_most(NAME, lhs, rhs, tol * (1.0 + rhs.abs()));
    let mut notes = vec![format!("S*={star} eps={eps}")];

    let mut identity_gap: f64 = 0.0;
    for (s, &value) in targets.iter().zip(&exact) {
        let closed_form = eval.inner().value(s)?;
        identity_gap = identity_gap.max((closed_form - value).abs() / (1.0 + value.abs()));
    }
    if identity_gap > tol {
        report.status = CheckStatus::Violated;
        notes.push(format!(
            "restricted prediction differs from the oracle by {identity_gap:e}"
        ));
    }

    if samples > 0 {
        let reference: ReferenceSpec = setup.joint.clone().into();
        let mc = MonteCarlo::new(&setup.model, &reference, x, samples, seed)?;
        for (s, &value) in targets.iter().zip(&exact).skip(1) {
            let est = mc.restricted(s, Stream::Plain)?;
            let gap = (est.value - value).abs();
            if gap > MC_SIGMAS * est.stderr + tol * (1.0 + value.abs()) {
                report.status = CheckStatus::Violated;
                notes.push(format!(
                    "Monte-Carlo f at {s} is {} standard errors from the oracle",
                    gap / est.stderr
                ));
            }
        }
    }
    Ok(report.with_detail(notes.join("; ")))
}

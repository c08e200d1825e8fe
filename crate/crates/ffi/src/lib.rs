//! C interface to `sufnec`.
//!
//! Models and references are opaque handles created by `*_new`/`*_load`
//! functions and released with the matching `*_free`. Every fallible call
//! returns a [`SufnecStatus`]; on failure [`sufnec_last_error`] describes the
//! problem until the next call on the same thread.
//!
//! Feature indices are 0-based. Matrices are row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use nalgebra::{DMatrix, DVector};
use sufnec::measures::{deviations, MonteCarlo};
use sufnec::reference::EmpiricalMode;
use sufnec::solvers::{solve_exhaustive, solve_greedy, solve_relaxed_mask, RelaxedConfig, SolverConfig, Strategy};
use sufnec::theory::two_player_shapley;
use sufnec::{
    ConstantBaseline, EmpiricalReference, Error, GaussianJoint, LinearModel, Metric, Model, Predictor, ReferenceSpec,
    Subset,
};

/// Result of a call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SufnecStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidString = 2,
    Shape = 3,
    Singular = 4,
    Conditioning = 5,
    Capability = 6,
    Domain = 7,
    Budget = 8,
    Config = 9,
    DegenerateInput = 10,
    Io = 11,
    Parse = 12,
    BufferTooSmall = 13,
    Panic = 14,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SufnecMetric {
    AbsoluteDifference = 0,
    SquaredDifference = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SufnecStrategy {
    Exhaustive = 0,
    GreedyForward = 1,
    RelaxedMask = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SufnecEmpiricalMode {
    JointRowResample = 0,
    PerFeatureMarginal = 1,
}

/// Opaque predictor.
pub struct SufnecModel(Model);

/// Opaque reference distribution.
pub struct SufnecReference(ReferenceSpec);

/// Deviations of one subset, with Monte-Carlo standard errors.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SufnecDeviations {
    pub prediction: f64,
    pub delta_suf: f64,
    pub delta_nec: f64,
    pub delta_uni: f64,
    pub stderr_suf: f64,
    pub stderr_nec: f64,
    pub stderr_uni: f64,
}

/// Solver settings. `grid_height * grid_width` must equal the dimension when
/// the relaxed strategy is used; 0 for both means no grid.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SufnecSolverOptions {
    pub tau: usize,
    pub alpha: f64,
    pub samples: usize,
    pub seed: u64,
    pub strategy: SufnecStrategy,
    pub metric: SufnecMetric,
    pub grid_height: usize,
    pub grid_width: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(SufnecStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Shape { .. } => SufnecStatus::Shape,
            Error::Singular(_) => SufnecStatus::Singular,
            Error::Conditioning(_) => SufnecStatus::Conditioning,
            Error::Capability(_) => SufnecStatus::Capability,
            Error::Domain(_) => SufnecStatus::Domain,
            Error::Budget(_) => SufnecStatus::Budget,
            Error::Config(_) => SufnecStatus::Config,
            Error::DegenerateInput(_) => SufnecStatus::DegenerateInput,
            Error::Io { .. } => SufnecStatus::Io,
            Error::Parse { .. } => SufnecStatus::Parse,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SufnecStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SufnecStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SufnecStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SufnecStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn text<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Failure(SufnecStatus::InvalidString, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, Failure> {
    ptr.as_ref().ok_or_else(|| null(what))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn metric(m: SufnecMetric) -> Metric {
    match m {
        SufnecMetric::AbsoluteDifference => Metric::AbsoluteDifference,
        SufnecMetric::SquaredDifference => Metric::SquaredDifference,
    }
}

struct Problem<'a> {
    model: &'a Model,
    reference: &'a ReferenceSpec,
    x: &'a [f64],
}

unsafe fn problem<'a>(
    model: *const SufnecModel,
    reference: *const SufnecReference,
    x: *const f64,
    dim: usize,
) -> Result<Problem<'a>, Failure> {
    let model = &handle(model, "model")?.0;
    let reference = &handle(reference, "reference")?.0;
    let x = slice(x, dim, "x")?;
    for expected in [model.dimension(), reference.dimension()] {
        if expected != dim {
            return Err(Error::Shape { expected, got: dim }.into());
        }
    }
    Ok(Problem { model, reference, x })
}

unsafe fn subset(indices: *const usize, len: usize, dim: usize) -> Result<Subset, Failure> {
    Ok(Subset::new(dim, slice(indices, len, "subset")?.to_vec())?)
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn sufnec_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Linear model `w·x + b`.
///
/// # Safety
/// `weights` points to `dim` doubles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn sufnec_model_linear_new(
    weights: *const f64,
    dim: usize,
    intercept: f64,
    out: *mut *mut SufnecModel,
) -> SufnecStatus {
    guard(|| {
        let w = slice(weights, dim, "weights")?.to_vec();
        emit(out, SufnecModel(Model::Linear(LinearModel::new(w, intercept)?)))
    })
}

/// Model from its JSON document.
///
/// # Safety
/// `json` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn sufnec_model_from_json(json: *const c_char, out: *mut *mut SufnecModel) -> SufnecStatus {
    guard(|| emit(out, SufnecModel(Model::from_json(text(json, "json")?)?)))
}

/// # Safety
/// `path` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn sufnec_model_load(path: *const c_char, out: *mut *mut SufnecModel) -> SufnecStatus {
    guard(|| emit(out, SufnecModel(Model::load(text(path, "path")?)?)))
}

/// Input dimension, or 0 for a null handle.
///
/// # Safety
/// `model` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sufnec_model_dimension(model: *const SufnecModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.dimension())
}

/// # Safety
/// `model` is a live handle, `x` points to `dim` doubles and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn sufnec_model_predict(
    model: *const SufnecModel,
    x: *const f64,
    dim: usize,
    out: *mut f64,
) -> SufnecStatus {
    guard(|| {
        let model = &handle(model, "model")?.0;
        let x = slice(x, dim, "x")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = model.predict(x)?;
        Ok(())
    })
}

/// # Safety
/// `model` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sufnec_model_free(model: *mut SufnecModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Gaussian reference `N(mean, cov)`.
///
/// # Safety
/// `mean` points to `dim` doubles, `cov` to `dim * dim`; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn sufnec_reference_gaussian_new(
    mean: *const f64,
    cov: *const f64,
    dim: usize,
    out: *mut *mut SufnecReference,
) -> SufnecStatus {
    guard(|| {
        let mean = DVector::from_column_slice(slice(mean, dim, "mean")?);
        let cov = DMatrix::from_row_slice(dim, dim, slice(cov, dim * dim, "cov")?);
        emit(out, SufnecReference(GaussianJoint::new(mean, cov)?.into()))
    })
}

/// Gaussian reference from its JSON document.
///
/// # Safety
/// `json` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn sufnec_reference_gaussian_from_json(
    json: *const c_char,
    out: *mut *mut SufnecReference,
) -> SufnecStatus {
    guard(|| {
        emit(
            out,
            SufnecReference(GaussianJoint::from_json(text(json, "json")?)?.into()),
        )
    })
}

/// Fixed baseline values.
///
/// # Safety
/// `values` points to `dim` doubles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn sufnec_reference_constant_new(
    values: *const f64,
    dim: usize,
    out: *mut *mut SufnecReference,
) -> SufnecStatus {
    guard(|| {
        let values = slice(values, dim, "values")?.to_vec();
        emit(out, SufnecReference(ConstantBaseline::new(values)?.into()))
    })
}

/// Rows of a data matrix as the reference.
///
/// # Safety
/// `data` points to `rows * cols` doubles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn sufnec_reference_empirical_new(
    data: *const f64,
    rows: usize,
    cols: usize,
    mode: SufnecEmpiricalMode,
    out: *mut *mut SufnecReference,
) -> SufnecStatus {
    guard(|| {
        let data = DMatrix::from_row_slice(rows, cols, slice(data, rows * cols, "data")?);
        let mode = match mode {
            SufnecEmpiricalMode::JointRowResample => EmpiricalMode::JointRowResample,
            SufnecEmpiricalMode::PerFeatureMarginal => EmpiricalMode::PerFeatureMarginal,
        };
        emit(out, SufnecReference(EmpiricalReference::new(data, mode)?.into()))
    })
}

/// Dimension, or 0 for a null handle.
///
/// # Safety
/// `reference` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sufnec_reference_dimension(reference: *const SufnecReference) -> usize {
    reference.as_ref().map_or(0, |r| r.0.dimension())
}

/// # Safety
/// `reference` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sufnec_reference_free(reference: *mut SufnecReference) {
    if !reference.is_null() {
        drop(Box::from_raw(reference));
    }
}

/// Sufficiency, necessity and unified deviations of the subset given by
/// `indices`.
///
/// # Safety
/// Handles are live, `x` points to `dim` doubles, `indices` to `len` indices
/// and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn sufnec_deviations(
    model: *const SufnecModel,
    reference: *const SufnecReference,
    x: *const f64,
    dim: usize,
    indices: *const usize,
    len: usize,
    metric_kind: SufnecMetric,
    alpha: f64,
    samples: usize,
    seed: u64,
    out: *mut SufnecDeviations,
) -> SufnecStatus {
    guard(|| {
        let p = problem(model, reference, x, dim)?;
        let s = subset(indices, len, dim)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let eval = MonteCarlo::new(p.model, p.reference, p.x, samples, seed)?;
        let r = deviations(&eval, &s, metric(metric_kind), alpha)?;
        *out = SufnecDeviations {
            prediction: r.prediction,
            delta_suf: r.delta_suf,
            delta_nec: r.delta_nec,
            delta_uni: r.delta_uni,
            stderr_suf: r.stderr_suf,
            stderr_nec: r.stderr_nec,
            stderr_uni: r.stderr_uni,
        };
        Ok(())
    })
}

/// Defaults matching the command-line solver.
#[no_mangle]
pub extern "C" fn sufnec_solver_options_default() -> SufnecSolverOptions {
    let d = SolverConfig::default();
    SufnecSolverOptions {
        tau: d.tau,
        alpha: d.alpha,
        samples: d.samples,
        seed: d.seed,
        strategy: SufnecStrategy::Exhaustive,
        metric: SufnecMetric::AbsoluteDifference,
        grid_height: 0,
        grid_width: 0,
    }
}

/// Solves the unified problem and writes the chosen 0-based indices into
/// `indices`. `*len` receives the subset size even when `capacity` is too
/// small, in which case the call fails with `BUFFER_TOO_SMALL`.
///
/// # Safety
/// Handles are live, `x` points to `dim` doubles, `indices` to `capacity`
/// writable slots; `len` and `objective` are writable (`objective` may be
/// null).
#[no_mangle]
pub unsafe extern "C" fn sufnec_solve(
    model: *const SufnecModel,
    reference: *const SufnecReference,
    x: *const f64,
    dim: usize,
    options: *const SufnecSolverOptions,
    indices: *mut usize,
    capacity: usize,
    len: *mut usize,
    objective: *mut f64,
) -> SufnecStatus {
    guard(|| {
        let p = problem(model, reference, x, dim)?;
        let o = *handle(options, "options")?;
        if len.is_null() {
            return Err(null("len"));
        }
        let cfg = SolverConfig {
            tau: o.tau,
            alpha: o.alpha,
            samples: o.samples,
            seed: o.seed,
            strategy: match o.strategy {
                SufnecStrategy::Exhaustive => Strategy::Exhaustive,
                SufnecStrategy::GreedyForward => Strategy::GreedyForward,
                SufnecStrategy::RelaxedMask => Strategy::RelaxedMask,
            },
            metric: metric(o.metric),
        };
        let result = match cfg.strategy {
            Strategy::Exhaustive => solve_exhaustive(p.model, p.x, p.reference, &cfg)?,
            Strategy::GreedyForward => solve_greedy(p.model, p.x, p.reference, &cfg)?,
            Strategy::RelaxedMask => {
                cfg.validate(dim)?;
                let rc = RelaxedConfig {
                    samples: cfg.samples,
                    seed: cfg.seed,
                    metric: cfg.metric,
                    grid: (o.grid_height > 0 || o.grid_width > 0).then_some((o.grid_height, o.grid_width)),
                    max_size: Some(cfg.tau),
                    ..RelaxedConfig::default()
                };
                solve_relaxed_mask(p.model, p.x, p.reference, &rc, cfg.alpha)?.1
            }
        };
        let chosen = result.subset.indices();
        *len = chosen.len();
        if !objective.is_null() {
            *objective = result.objective;
        }
        if chosen.len() > capacity {
            return Err(Failure(
                SufnecStatus::BufferTooSmall,
                format!("subset has {} indices, buffer holds {capacity}", chosen.len()),
            ));
        }
        if !chosen.is_empty() {
            if indices.is_null() {
                return Err(null("indices"));
            }
            std::ptr::copy_nonoverlapping(chosen.as_ptr(), indices, chosen.len());
        }
        Ok(())
    })
}

/// Shapley value of the subset in the two-player game against its
/// complement.
///
/// # Safety
/// Handles are live, `x` points to `dim` doubles, `indices` to `len` indices
/// and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn sufnec_two_player_shapley(
    model: *const SufnecModel,
    reference: *const SufnecReference,
    x: *const f64,
    dim: usize,
    indices: *const usize,
    len: usize,
    metric_kind: SufnecMetric,
    samples: usize,
    seed: u64,
    out: *mut f64,
) -> SufnecStatus {
    guard(|| {
        let p = problem(model, reference, x, dim)?;
        let s = subset(indices, len, dim)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = two_player_shapley(p.model, p.x, &s, p.reference, metric(metric_kind), samples, seed)?;
        Ok(())
    })
}

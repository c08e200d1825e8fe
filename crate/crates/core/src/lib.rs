//! Sufficient, necessary and unified feature-subset explanations for
//! black-box predictors.
//!
//! The average restricted prediction `f_S(x)` keeps the features in `S` at
//! their observed values and draws the rest from a reference distribution.
//! From it the crate builds the sufficiency deviation `ρ(f(x), f_S(x))`, the
//! necessity deviation `ρ(f_{S_c}(x), f_∅(x))` and their convex combination,
//! and solves the cardinality-constrained minimisation of each.

pub mod cli;
pub mod data;
pub mod digest;
pub mod error;
pub mod experiments;
pub mod measures;
pub mod model;
pub mod reference;
pub mod rng;
pub mod solvers;
pub mod subset;
pub mod theory;

pub use error::{Error, Result};
pub use measures::{DeviationReport, Evaluator, Metric, RestrictedPrediction};
pub use model::{LinearModel, MlpModel, Model, Predictor};
pub use reference::{ConstantBaseline, EmpiricalReference, GaussianJoint, ReferenceSpec};
pub use subset::Subset;

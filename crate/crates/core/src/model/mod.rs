//! Predictors: the black-box function being explained, plus the two concrete
//! differentiable models used throughout the crate.

mod io;
mod linear;
mod mlp;

pub use io::Model;
pub use linear::{fit_least_squares, LinearModel};
pub use mlp::{Activation, DenseLayer, MlpModel, OutputKind, MAX_HIDDEN_LAYERS};

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Regression,
    /// Outputs lie in `[0, 1]`.
    BinaryProbability,
}

/// A scalar-output function on `R^d`.
///
/// Implementations must be pure: identical inputs give identical outputs, and
/// evaluation through `&self` must be safe from many threads at once.
pub trait Predictor: Send + Sync {
    fn dimension(&self) -> usize;

    fn task(&self) -> Task;

    /// Evaluates the model without checking the input length.
    fn evaluate(&self, x: &[f64]) -> f64;

    fn predict(&self, x: &[f64]) -> Result<f64> {
        crate::Error::check_dim(self.dimension(), x.len())?;
        Ok(self.evaluate(x))
    }

    /// Analytic gradient of [`Predictor::evaluate`] at `x`.
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let _ = x;
        Err(crate::Error::Capability("model does not provide gradients".into()))
    }

    fn is_differentiable(&self) -> bool {
        false
    }
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn task(&self) -> Task {
        (**self).task()
    }
    fn evaluate(&self, x: &[f64]) -> f64 {
        (**self).evaluate(x)
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        (**self).gradient(x)
    }
    fn is_differentiable(&self) -> bool {
        (**self).is_differentiable()
    }
}

impl<P: Predictor + ?Sized> Predictor for Box<P> {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn task(&self) -> Task {
        (**self).task()
    }
    fn evaluate(&self, x: &[f64]) -> f64 {
        (**self).evaluate(x)
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        (**self).gradient(x)
    }
    fn is_differentiable(&self) -> bool {
        (**self).is_differentiable()
    }
}

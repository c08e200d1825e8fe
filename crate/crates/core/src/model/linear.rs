use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Predictor, Task};
use crate::error::{Error, Result};

/// `f(x) = weights · x + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn new(weights: Vec<f64>, intercept: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Config("linear model needs at least one weight".into()));
        }
        if weights
            .iter()
            .chain(std::iter::once(&intercept))
            .any(|w| !w.is_finite())
        {
            return Err(Error::Config("linear model weights must be finite".into()));
        }
        Ok(Self { weights, intercept })
    }

    /// Model that ignores its input.
    pub fn constant(dimension: usize, value: f64) -> Self {
        Self {
            weights: vec![0.0; dimension],
            intercept: value,
        }
    }
}

impl Predictor for LinearModel {
    fn dimension(&self) -> usize {
        self.weights.len()
    }

    fn task(&self) -> Task {
        Task::Regression
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(x)
            .fold(self.intercept, |acc, (w, v)| acc + w * v)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.dimension(), x.len())?;
        Ok(self.weights.clone())
    }

    fn is_differentiable(&self) -> bool {
        true
    }
}

/// Ordinary least squares through a Householder QR of the design matrix,
/// followed by one step of iterative refinement.
///
/// With `intercept` set, a ones column is appended to `x`.
pub fn fit_least_squares(x: &DMatrix<f64>, y: &[f64], intercept: bool) -> Result<LinearModel> {
    let (n, d) = x.shape();
    Error::check_dim(n, y.len())?;
    let cols = d + usize::from(intercept);
    if n <= cols {
        return Err(Error::Singular(format!(
            "need more samples than columns (n = {n}, columns = {cols})"
        )));
    }
    let design = if intercept {
        x.clone().insert_column(d, 1.0)
    } else {
        x.clone()
    };
    let target = DVector::from_column_slice(y);

    let qr = design.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let max_diag = (0..cols).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if max_diag == 0.0 || (0..cols).any(|i| r[(i, i)].abs() <= 1e-12 * max_diag) {
        return Err(Error::Singular("design matrix is rank deficient".into()));
    }
    let solve = |rhs: &DVector<f64>| -> Result<DVector<f64>> {
        let qty = q.tr_mul(rhs);
        r.solve_upper_triangular(&qty)
            .ok_or_else(|| Error::Singular("triangular solve failed".into()))
    };

    let mut beta = solve(&target)?;
    let residual = &target - &design * &beta;
    beta += solve(&residual)?;

    let (weights, b) = if intercept {
        (beta.rows(0, d).iter().copied().collect(), beta[d])
    } else {
        (beta.iter().copied().collect(), 0.0)
    };
    LinearModel::new(weights, b)
}

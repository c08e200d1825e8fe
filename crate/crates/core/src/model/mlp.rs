use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Predictor, Task};
use crate::error::{Error, Result};

pub const MAX_HIDDEN_LAYERS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the pre-activation `z`.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputKind {
    Linear,
    Logistic,
}

/// Fully connected layer, `weights` is `outputs × inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl DenseLayer {
    pub fn new(weights: DMatrix<f64>, bias: DVector<f64>) -> Result<Self> {
        if weights.nrows() != bias.len() {
            return Err(Error::Shape {
                expected: weights.nrows(),
                got: bias.len(),
            });
        }
        Ok(Self { weights, bias })
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }
}

/// Small multilayer perceptron with a single scalar output.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<DenseLayer>,
    activation: Activation,
    output: OutputKind,
}

impl MlpModel {
    pub fn new(layers: Vec<DenseLayer>, activation: Activation, output: OutputKind) -> Result<Self> {
        let Some(last) = layers.last() else {
            return Err(Error::Config("mlp needs at least one layer".into()));
        };
        if layers.len() - 1 > MAX_HIDDEN_LAYERS {
            return Err(Error::Config(format!(
                "mlp supports at most {MAX_HIDDEN_LAYERS} hidden layers, got {}",
                layers.len() - 1
            )));
        }
        if last.outputs() != 1 {
            return Err(Error::Shape {
                expected: 1,
                got: last.outputs(),
            });
        }
        for pair in layers.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::Shape {
                    expected: pair[0].outputs(),
                    got: pair[1].inputs(),
                });
            }
        }
        if layers
            .iter()
            .any(|l| l.weights.iter().chain(l.bias.iter()).any(|v| !v.is_finite()))
        {
            return Err(Error::Config("mlp parameters must be finite".into()));
        }
        Ok(Self {
            layers,
            activation,
            output,
        })
    }

    /// Gaussian-initialised network with layer widths `dims = [d, h1, .., 1]`.
    pub fn random(dims: &[usize], activation: Activation, output: OutputKind, scale: f64, seed: u64) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Config("mlp dims need an input and an output".into()));
        }
        let mut rng = crate::rng::rng_from_seed(seed);
        let layers = dims
            .windows(2)
            .map(|w| {
                let std = scale / (w[0] as f64).sqrt();
                let weights = DMatrix::from_fn(w[1], w[0], |_, _| std * rng.sample::<f64, _>(StandardNormal));
                let bias = DVector::from_fn(w[1], |_, _| 0.1 * rng.sample::<f64, _>(StandardNormal));
                DenseLayer::new(weights, bias)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers, activation, output)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn output(&self) -> OutputKind {
        self.output
    }

    /// Layer widths `[d, h1, .., 1]`.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].inputs())
            .chain(self.layers.iter().map(DenseLayer::outputs))
            .collect()
    }

    /// Returns pre-activations for every layer.
    fn forward(&self, x: &[f64]) -> Vec<DVector<f64>> {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = DVector::from_column_slice(x);
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let z = &layer.weights * &a + &layer.bias;
            if i < last {
                a = z.map(|v| self.activation.apply(v));
            }
            pre.push(z);
        }
        pre
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl Predictor for MlpModel {
    fn dimension(&self) -> usize {
        self.layers[0].inputs()
    }

    fn task(&self) -> Task {
        match self.output {
            OutputKind::Linear => Task::Regression,
            OutputKind::Logistic => Task::BinaryProbability,
        }
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        let pre = self.forward(x);
        let z = pre[pre.len() - 1][0];
        match self.output {
            OutputKind::Linear => z,
            OutputKind::Logistic => sigmoid(z),
        }
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.dimension(), x.len())?;
        let pre = self.forward(x);
        let last = self.layers.len() - 1;
        let out_scale = match self.output {
            OutputKind::Linear => 1.0,
            OutputKind::Logistic => {
                let s = sigmoid(pre[last][0]);
                s * (1.0 - s)
            }
        };
        let mut delta = self.layers[last].weights.row(0).transpose() * out_scale;
        for i in (0..last).rev() {
            let act = self.activation;
            delta.zip_apply(&pre[i], |d, z| *d *= act.derivative(z));
            delta = self.layers[i].weights.tr_mul(&delta);
        }
        Ok(delta.iter().copied().collect())
    }

    fn is_differentiable(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn zero_mlp(out_bias: f64) -> MlpModel {
        let hidden = DenseLayer::new(DMatrix::zeros(1, 3), DVector::zeros(1)).unwrap();
        let out = DenseLayer::new(DMatrix::zeros(1, 1), DVector::from_element(1, out_bias)).unwrap();
        MlpModel::new(vec![hidden, out], Activation::Tanh, OutputKind::Linear).unwrap()
    }

    #[test]
    fn zero_weights_output_bias() {
        let m = zero_mlp(0.7);
        assert_eq!(m.predict(&[1.0, -4.0, 2.0]).unwrap(), 0.7);
        assert_eq!(m.gradient(&[1.0, -4.0, 2.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn depth_cap_enforced() {
        let dims = [4, 3, 3, 3, 3, 1];
        assert!(matches!(
            MlpModel::random(&dims, Activation::Tanh, OutputKind::Linear, 1.0, 0),
            Err(Error::Config(_))
        ));
        assert!(MlpModel::random(&dims[1..], Activation::Tanh, OutputKind::Linear, 1.0, 0).is_ok());
    }

    #[test]
    fn mismatched_layers_rejected() {
        let a = DenseLayer::new(DMatrix::zeros(2, 3), DVector::zeros(2)).unwrap();
        let b = DenseLayer::new(DMatrix::zeros(1, 4), DVector::zeros(1)).unwrap();
        assert!(matches!(
            MlpModel::new(vec![a, b], Activation::Relu, OutputKind::Linear),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn logistic_output_in_unit_interval() {
        let m = MlpModel::random(&[5, 8, 1], Activation::Relu, OutputKind::Logistic, 3.0, 9).unwrap();
        for k in 0..50 {
            let x: Vec<f64> = (0..5).map(|i| ((i * 7 + k) as f64).sin() * 10.0).collect();
            let y = m.predict(&x).unwrap();
            assert!((0.0..=1.0).contains(&y));
        }
        assert_eq!(m.task(), Task::BinaryProbability);
    }

    fn central_difference(m: &MlpModel, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut hi = x.to_vec();
                let mut lo = x.to_vec();
                hi[i] += h;
                lo[i] -= h;
                (m.evaluate(&hi) - m.evaluate(&lo)) / (2.0 * h)
            })
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn gradient_matches_finite_differences(
            seed in any::<u64>(),
            logistic in any::<bool>(),
            depth in 1usize..=3,
            x in prop::collection::vec(-2.0f64..2.0, 4),
        ) {
            let mut dims = vec![4];
            dims.extend(std::iter::repeat_n(6, depth));
            dims.push(1);
            let output = if logistic { OutputKind::Logistic } else { OutputKind::Linear };
            let m = MlpModel::random(&dims, Activation::Tanh, output, 1.0, seed).unwrap();
            let g = m.gradient(&x).unwrap();
            let fd = central_difference(&m, &x, 1e-5);
            let scale = g.iter().fold(1e-3f64, |a, v| a.max(v.abs()));
            for (a, b) in g.iter().zip(&fd) {
                prop_assert!((a - b).abs() <= 1e-5 * scale, "analytic {a} fd {b}");
            }
        }
    }
}

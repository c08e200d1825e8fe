//! JSON model documents.
//!
//! ```json
//! {"type": "linear", "dims": [3], "weights": [1.0, 2.0, 3.0], "intercept": 0.0}
//! {"type": "mlp", "dims": [3, 4, 1], "weights": [[..12 values..], [..4..]],
//!  "biases": [[..4..], [..1..]], "activation": "tanh", "output": "linear"}
//! ```
//!
//! Layer weights are stored row-major (`outputs × inputs`).

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Activation, DenseLayer, LinearModel, MlpModel, OutputKind, Predictor, Task};
use crate::error::{Error, Result};

/// A predictor that can be stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Linear(LinearModel),
    Mlp(MlpModel),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum Document {
    Linear {
        dims: Vec<usize>,
        weights: Vec<f64>,
        #[serde(default)]
        intercept: f64,
    },
    Mlp {
        dims: Vec<usize>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
        activation: Activation,
        output: OutputKind,
    },
}

impl Model {
    pub fn to_json(&self) -> String {
        let doc = match self {
            Model::Linear(m) => Document::Linear {
                dims: vec![m.weights.len()],
                weights: m.weights.clone(),
                intercept: m.intercept,
            },
            Model::Mlp(m) => Document::Mlp {
                dims: m.dims(),
                weights: m
                    .layers()
                    .iter()
                    .map(|l| l.weights.transpose().iter().copied().collect())
                    .collect(),
                biases: m.layers().iter().map(|l| l.bias.iter().copied().collect()).collect(),
                activation: m.activation(),
                output: m.output(),
            },
        };
        serde_json::to_string_pretty(&doc).expect("model document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Document = serde_json::from_str(text).map_err(|e| Error::parse("<model json>", e))?;
        match doc {
            Document::Linear {
                dims,
                weights,
                intercept,
            } => {
                if dims != [weights.len()] {
                    return Err(Error::Config(format!(
                        "linear dims {dims:?} do not match {} weights",
                        weights.len()
                    )));
                }
                Ok(Model::Linear(LinearModel::new(weights, intercept)?))
            }
            Document::Mlp {
                dims,
                weights,
                biases,
                activation,
                output,
            } => {
                if dims.len() < 2 || weights.len() != dims.len() - 1 || biases.len() != weights.len() {
                    return Err(Error::Config("mlp dims, weights and biases disagree".into()));
                }
                let layers = dims
                    .windows(2)
                    .zip(weights.iter().zip(&biases))
                    .map(|(w, (wv, bv))| {
                        let (inputs, outputs) = (w[0], w[1]);
                        Error::check_dim(inputs * outputs, wv.len())?;
                        Error::check_dim(outputs, bv.len())?;
                        DenseLayer::new(
                            DMatrix::from_row_slice(outputs, inputs, wv),
                            DVector::from_column_slice(bv),
                        )
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Model::Mlp(MlpModel::new(layers, activation, output)?))
            }
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::parse(path, message),
            other => other,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    fn inner(&self) -> &dyn Predictor {
        match self {
            Model::Linear(m) => m,
            Model::Mlp(m) => m,
        }
    }

    pub fn as_linear(&self) -> Option<&LinearModel> {
        match self {
            Model::Linear(m) => Some(m),
            Model::Mlp(_) => None,
        }
    }
}

impl From<LinearModel> for Model {
    fn from(m: LinearModel) -> Self {
        Model::Linear(m)
    }
}

impl From<MlpModel> for Model {
    fn from(m: MlpModel) -> Self {
        Model::Mlp(m)
    }
}

impl Predictor for Model {
    fn dimension(&self) -> usize {
        self.inner().dimension()
    }
    fn task(&self) -> Task {
        self.inner().task()
    }
    fn evaluate(&self, x: &[f64]) -> f64 {
        self.inner().evaluate(x)
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.inner().gradient(x)
    }
    fn is_differentiable(&self) -> bool {
        self.inner().is_differentiable()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_unknown_keys() {
        let text = r#"{"type":"linear","dims":[1],"weights":[1.0],"extra":1}"#;
        assert!(Model::from_json(text).is_err());
    }

    #[test]
    fn rejects_inconsistent_dims() {
        let text = r#"{"type":"linear","dims":[2],"weights":[1.0]}"#;
        assert!(matches!(Model::from_json(text), Err(Error::Config(_))));
    }

    #[test]
    fn mlp_weights_are_row_major() {
        let text = r#"{"type":"mlp","dims":[2,2,1],
            "weights":[[1.0,2.0,3.0,4.0],[1.0,0.0]],
            "biases":[[0.0,0.0],[0.0]],"activation":"relu","output":"linear"}"#;
        let m = Model::from_json(text).unwrap();
        // first hidden unit = relu(1*x0 + 2*x1)
        assert_eq!(m.predict(&[1.0, 1.0]).unwrap(), 3.0);
    }

    proptest! {
        #[test]
        fn json_round_trip_is_bit_exact(seed in any::<u64>(), intercept in -1e6f64..1e6) {
            let mlp = MlpModel::random(&[3, 5, 2, 1], Activation::Tanh, OutputKind::Logistic, 1.3, seed).unwrap();
            let m = Model::from(mlp);
            let text = m.to_json();
            let back = Model::from_json(&text).unwrap();
            prop_assert_eq!(&back, &m);
            prop_assert_eq!(back.to_json(), text);

            let lin = Model::from(LinearModel::new(vec![intercept / 3.0, 1e-300, -0.1], intercept).unwrap());
            prop_assert_eq!(Model::from_json(&lin.to_json()).unwrap(), lin);
        }
    }
}

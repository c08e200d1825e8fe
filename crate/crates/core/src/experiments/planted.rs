use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Activation, DenseLayer, MlpModel, OutputKind};
use crate::reference::{ConstantBaseline, ReferenceSpec};
use crate::rng::{derive_seed, rng_from_seed};
use crate::subset::Subset;

/// A grid image whose class probability depends only on one square patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantedSpec {
    pub height: usize,
    pub width: usize,
    pub patch: usize,
    /// Top-left corner of the patch; drawn from the seed when absent.
    pub origin: Option<(usize, usize)>,
    pub signal: f64,
    pub noise: f64,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        Self {
            height: 16,
            width: 16,
            patch: 4,
            origin: None,
            signal: 1.0,
            noise: 0.1,
            hidden: 4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedTask {
    pub model: MlpModel,
    pub x: Vec<f64>,
    pub reference: ReferenceSpec,
    pub patch: Subset,
    pub grid: (usize, usize),
}

/// Builds the classifier, one input with the patch switched on, and an
/// all-zero baseline.
pub fn planted_task(spec: &PlantedSpec) -> Result<PlantedTask> {
    let (h, w, p) = (spec.height, spec.width, spec.patch);
    if p == 0 || p > h || p > w || spec.hidden == 0 {
        return Err(Error::Config(format!("patch {p} does not fit a {h}x{w} grid")));
    }
    let d = h * w;
    let mut rng = rng_from_seed(spec.seed);
    let (r0, c0) = match spec.origin {
        Some((r, c)) if r + p <= h && c + p <= w => (r, c),
        Some(o) => return Err(Error::Config(format!("patch origin {o:?} out of bounds"))),
        None => (rng.random_range(0..=h - p), rng.random_range(0..=w - p)),
    };
    let patch: Vec<usize> = (r0..r0 + p)
        .flat_map(|r| (c0..c0 + p).map(move |c| r * w + c))
        .collect();

    let mut noise_rng = rng_from_seed(derive_seed(spec.seed, 0x1));
    let mut x: Vec<f64> = (0..d)
        .map(|_| spec.noise * noise_rng.sample::<f64, _>(StandardNormal))
        .collect();
    for &i in &patch {
        x[i] += spec.signal;
    }

    // each hidden unit sees 3·(weighted patch mean)/signal - 1.5
    let mut weights = DMatrix::zeros(spec.hidden, d);
    for u in 0..spec.hidden {
        let raw: Vec<f64> = patch.iter().map(|_| rng.random_range(0.5..1.5)).collect();
        let total: f64 = raw.iter().sum();
        for (&i, r) in patch.iter().zip(&raw) {
            weights[(u, i)] = 3.0 * r / (total * spec.signal);
        }
    }
    let hidden = DenseLayer {
        weights,
        bias: DVector::from_element(spec.hidden, -1.5),
    };
    let output = DenseLayer {
        weights: DMatrix::from_element(1, spec.hidden, 5.0 / spec.hidden as f64),
        bias: DVector::zeros(1),
    };
    let model = MlpModel::new(vec![hidden, output], Activation::Tanh, OutputKind::Logistic)?;
    Ok(PlantedTask {
        model,
        x,
        reference: ConstantBaseline::new(vec![0.0; d])?.into(),
        patch: Subset::new(d, patch)?,
        grid: (h, w),
    })
}

/// Uniformly random subset of the given size.
pub fn random_mask(dim: usize, size: usize, seed: u64) -> Result<Subset> {
    if size > dim {
        return Err(Error::Domain(format!("mask size {size} exceeds dimension {dim}")));
    }
    let mut rng = rng_from_seed(seed);
    Subset::new(dim, rand::seq::index::sample(&mut rng, dim, size).into_vec())
}

//! JSON configuration files layered over defaults, with `key=value`
//! overrides.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::experiments::{ComparisonConfig, StabilityConfig};
use crate::reference::{ConstantBaseline, EmpiricalMode, EmpiricalReference, GaussianJoint, ReferenceSpec};
use crate::solvers::{RelaxedConfig, SolverConfig};
use crate::theory::SweepSpec;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SUFNEC_OUT_DIR";

fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{assignment}' is not of the form key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(Error::Config(format!("empty segment in override key '{key}'")));
        }
        if !node.is_object() {
            *node = Value::Object(Default::default());
        }
        let map = node.as_object_mut().expect("object");
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert(Value::Null);
    }
    Ok(())
}

/// Defaults, then the file, then each override in order.
pub fn load<T: Serialize + DeserializeOwned + Default>(file: Option<&Path>, overrides: &[String]) -> Result<T> {
    let mut value = serde_json::to_value(T::default()).expect("defaults serialize");
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parsed: Value = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
        if !parsed.is_object() {
            return Err(Error::parse(path, "configuration must be a JSON object"));
        }
        merge(&mut value, parsed);
    }
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
}

/// Where a command gets its reference distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ReferenceConfig {
    Gaussian {
        path: PathBuf,
    },
    Empirical {
        path: PathBuf,
        #[serde(default)]
        mode: EmpiricalMode,
    },
    Constant {
        values: Vec<f64>,
    },
    /// Column means of a CSV file as a constant baseline.
    ColumnMeans {
        path: PathBuf,
    },
}

impl ReferenceConfig {
    pub fn load(&self) -> Result<ReferenceSpec> {
        Ok(match self {
            ReferenceConfig::Gaussian { path } => GaussianJoint::load(path)?.into(),
            ReferenceConfig::Empirical { path, mode } => EmpiricalReference::load_csv(path, *mode)?.into(),
            ReferenceConfig::Constant { values } => ConstantBaseline::new(values.clone())?.into(),
            ReferenceConfig::ColumnMeans { path } => {
                let table = crate::data::Table::read_csv(path)?.without_column("y");
                ConstantBaseline::column_means(&table.values)?.into()
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenDataConfig {
    pub dim: usize,
    pub n_train: usize,
    pub n_eval: usize,
    pub seed: u64,
    pub fit_intercept: bool,
    pub out_dir: Option<PathBuf>,
}

impl Default for GenDataConfig {
    fn default() -> Self {
        let spec = crate::experiments::SyntheticRegressionSpec::default();
        Self {
            dim: spec.dim,
            n_train: spec.n_train,
            n_eval: spec.n_eval,
            seed: spec.seed,
            fit_intercept: false,
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExplainConfig {
    pub model: Option<PathBuf>,
    pub reference: Option<ReferenceConfig>,
    /// CSV whose row `row` is explained; ignored when `x` is given.
    pub data: Option<PathBuf>,
    pub row: usize,
    pub x: Option<Vec<f64>>,
    pub solver: SolverConfig,
    /// Used when `solver.strategy` is `relaxed-mask`; `α` comes from `solver`.
    pub relaxed: RelaxedConfig,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub sweep: SweepSpec,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityRunConfig {
    pub model: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub reference: Option<ReferenceConfig>,
    pub stability: StabilityConfig,
    pub svg: bool,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareRunConfig {
    pub model: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub reference: Option<ReferenceConfig>,
    /// Use only the first `rows` rows of `data`.
    pub rows: Option<usize>,
    pub comparison: ComparisonConfig,
    pub svg: bool,
    pub out_dir: Option<PathBuf>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_parse_json_then_fall_back_to_strings() {
        let cfg: ExplainConfig = load(
            None,
            &[
                "solver.tau=5".into(),
                "solver.strategy=greedy-forward".into(),
                "model=some/model.json".into(),
                "x=[1, 2.5]".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.solver.tau, 5);
        assert_eq!(cfg.solver.strategy, crate::solvers::Strategy::GreedyForward);
        assert_eq!(cfg.model, Some(PathBuf::from("some/model.json")));
        assert_eq!(cfg.x, Some(vec![1.0, 2.5]));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            load::<ExplainConfig>(None, &["solver.tua=3".into()]),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            load::<GenDataConfig>(None, &["nope=1".into()]),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            load::<GenDataConfig>(None, &["dim".into()]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn file_layers_under_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"dim": 4, "seed": 9}"#).unwrap();
        let cfg: GenDataConfig = load(Some(&path), &["seed=2".into()]).unwrap();
        assert_eq!((cfg.dim, cfg.seed, cfg.n_eval), (4, 2, 100));
        std::fs::write(&path, "[1]").unwrap();
        assert!(matches!(
            load::<GenDataConfig>(Some(&path), &[]),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn reference_variants() {
        let r: ReferenceConfig = serde_json::from_str(r#"{"type": "constant", "values": [0, 1]}"#).unwrap();
        assert_eq!(r.load().unwrap().dimension(), 2);
        assert!(serde_json::from_str::<ReferenceConfig>(r#"{"type": "constant", "values": [0], "x": 1}"#).is_err());
    }
}

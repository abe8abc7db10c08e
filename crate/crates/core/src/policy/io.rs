use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{OptimizerState, PolicyParams, PolicyShape};

pub const PARAMS_FORMAT: &str = "crfrl-policy";
pub const PARAMS_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorRecord {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// On-disk parameter container: a JSON document with the architecture, every
/// named tensor and, optionally, the optimizer state for resuming training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    format: String,
    version: u32,
    shape: PolicyShape,
    tensors: Vec<TensorRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    optimizer: Option<OptimizerState>,
}

impl ParamsFile {
    pub fn new(params: &PolicyParams, optimizer: Option<&OptimizerState>) -> Self {
        Self {
            format: PARAMS_FORMAT.into(),
            version: PARAMS_VERSION,
            shape: params.shape(),
            tensors: params
                .tensors()
                .into_iter()
                .map(|(name, shape, data)| TensorRecord {
                    name,
                    shape,
                    data: data.to_vec(),
                })
                .collect(),
            optimizer: optimizer.cloned(),
        }
    }

    pub fn into_params(self) -> Result<(PolicyParams, Option<OptimizerState>)> {
        if self.format != PARAMS_FORMAT {
            return Err(Error::Format(format!("unknown params format {:?}", self.format)));
        }
        if self.version != PARAMS_VERSION {
            return Err(Error::Format(format!(
                "unsupported params version {} (this build reads version {PARAMS_VERSION})",
                self.version
            )));
        }
        let mut params = PolicyParams::zeros(self.shape);
        let expected: Vec<(String, Vec<usize>)> = params
            .tensors()
            .into_iter()
            .map(|(n, s, _)| (n, s))
            .collect();
        if expected.len() != self.tensors.len() {
            return Err(Error::Shape(format!(
                "params file has {} tensors, architecture needs {}",
                self.tensors.len(),
                expected.len()
            )));
        }
        for ((name, shape), record) in expected.iter().zip(&self.tensors) {
            if &record.name != name || &record.shape != shape {
                return Err(Error::Shape(format!(
                    "tensor {:?} {:?} does not match expected {name:?} {shape:?}",
                    record.name, record.shape
                )));
            }
            if record.data.len() != shape.iter().product::<usize>() {
                return Err(Error::Shape(format!("tensor {name} has the wrong number of values")));
            }
        }
        for ((_, slot), record) in params.tensors_mut().into_iter().zip(&self.tensors) {
            slot.copy_from_slice(&record.data);
        }
        if let Err(name) = params.all_finite() {
            return Err(Error::NonFinite(format!("tensor {name}")));
        }
        if let Some(opt) = &self.optimizer {
            let ok = opt.first_moment.len() == expected.len()
                && opt.second_moment.len() == expected.len()
                && self
                    .tensors
                    .iter()
                    .zip(opt.first_moment.iter().zip(&opt.second_moment))
                    .all(|(t, (m, v))| m.len() == t.data.len() && v.len() == t.data.len());
            if !ok {
                return Err(Error::Shape("optimizer moments do not match tensors".into()));
            }
        }
        Ok((params, self.optimizer))
    }
}

pub fn save_params(path: &Path, params: &PolicyParams, optimizer: Option<&OptimizerState>) -> Result<()> {
    let text = serde_json::to_string(&ParamsFile::new(params, optimizer))
        .map_err(|e| Error::Format(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_params(path: &Path) -> Result<(PolicyParams, Option<OptimizerState>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ParamsFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        msg: e.to_string(),
    })?;
    file.into_params()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::AdamConfig;

    fn shape() -> PolicyShape {
        PolicyShape {
            rounds: 2,
            embed_dim: 5,
            num_features: 4,
            num_labels: 3,
        }
    }

    #[test]
    fn round_trip_with_optimizer() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        let mut params = PolicyParams::init(shape(), 77);
        let mut opt = OptimizerState::new(&params, AdamConfig::default());
        let grads = PolicyParams::init(shape(), 78);
        opt.step(&mut params, &grads).unwrap();
        save_params(&path, &params, Some(&opt)).unwrap();
        let (loaded, loaded_opt) = load_params(&path).unwrap();
        assert_eq!(loaded, params);
        assert_eq!(loaded_opt, Some(opt));
    }

    #[test]
    fn unknown_version_is_rejected() {
        let mut file = ParamsFile::new(&PolicyParams::init(shape(), 1), None);
        file.version = 2;
        assert!(matches!(file.into_params(), Err(Error::Format(_))));
        let mut file = ParamsFile::new(&PolicyParams::init(shape(), 1), None);
        file.format = "other".into();
        assert!(matches!(file.into_params(), Err(Error::Format(_))));
    }

    #[test]
    fn tampered_shapes_are_rejected() {
        let mut file = ParamsFile::new(&PolicyParams::init(shape(), 1), None);
        file.tensors[2].data.pop();
        assert!(file.into_params().is_err());
        let mut file = ParamsFile::new(&PolicyParams::init(shape(), 1), None);
        file.shape.embed_dim = 6;
        assert!(matches!(file.into_params(), Err(Error::Shape(_))));
    }
}

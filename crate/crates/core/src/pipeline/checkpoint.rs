//! Checkpoint document: a flat map from `network/layer{k}/{W|b}` keys to
//! arrays, plus the architecture widths and the run configuration.
//!
//! Floats are written in shortest round-trip decimal form, so loading a
//! checkpoint reproduces every parameter bit for bit.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{BundleDims, ModelBundle};
use super::RunConfig;
use crate::numkit::{Activation, SeededRng};
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "careflow-checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub dims: BundleDims,
    pub config: RunConfig,
    pub activations: BTreeMap<String, Vec<Activation>>,
    pub tensors: BTreeMap<String, Tensor>,
}

impl Checkpoint {
    pub fn from_bundle(bundle: &ModelBundle, config: &RunConfig) -> Self {
        let mut activations = BTreeMap::new();
        let mut tensors = BTreeMap::new();
        for (name, net) in bundle.networks() {
            activations.insert(name.clone(), net.layers().iter().map(|l| l.activation).collect());
            for (k, layer) in net.layers().iter().enumerate() {
                tensors.insert(
                    format!("{name}/layer{k}/W"),
                    Tensor {
                        shape: vec![layer.weight.rows(), layer.weight.cols()],
                        data: layer.weight.as_slice().to_vec(),
                    },
                );
                tensors.insert(
                    format!("{name}/layer{k}/b"),
                    Tensor {
                        shape: vec![layer.bias.len()],
                        data: layer.bias.clone(),
                    },
                );
            }
        }
        Self {
            format: CHECKPOINT_FORMAT.into(),
            dims: bundle.dims,
            config: config.clone(),
            activations,
            tensors,
        }
    }

    /// Rebuilds the bundle, checking every shape and activation.
    pub fn to_bundle(&self) -> Result<ModelBundle> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Config(format!("unsupported checkpoint format `{}`", self.format)));
        }
        let mut bundle = ModelBundle::init(self.dims, &mut SeededRng::new(0))?;
        let names: Vec<String> = bundle.networks().into_iter().map(|(n, _)| n).collect();
        let expected_keys: usize = bundle.networks().iter().map(|(_, n)| 2 * n.layers().len()).sum();
        if self.tensors.len() != expected_keys {
            return Err(Error::Config(format!(
                "checkpoint has {} tensors, expected {expected_keys}",
                self.tensors.len()
            )));
        }
        for (name, net) in names.iter().zip(bundle.networks_mut()) {
            let acts = self
                .activations
                .get(name)
                .ok_or_else(|| Error::Config(format!("checkpoint lacks activations for {name}")))?;
            if acts.len() != net.layers().len() {
                return Err(Error::Config(format!("{name}: expected {} layers", net.layers().len())));
            }
            for (k, layer) in net.layers_mut().iter_mut().enumerate() {
                if acts[k] != layer.activation {
                    return Err(Error::Config(format!("{name}/layer{k}: activation mismatch")));
                }
                let w = self.tensor(&format!("{name}/layer{k}/W"), &[layer.weight.rows(), layer.weight.cols()])?;
                layer.weight.as_mut_slice().copy_from_slice(&w.data);
                let b = self.tensor(&format!("{name}/layer{k}/b"), &[layer.bias.len()])?;
                layer.bias.copy_from_slice(&b.data);
            }
        }
        if !bundle.is_finite() {
            return Err(Error::NonFinite {
                context: "checkpoint parameters".into(),
            });
        }
        Ok(bundle)
    }

    fn tensor(&self, key: &str, shape: &[usize]) -> Result<&Tensor> {
        let t = self
            .tensors
            .get(key)
            .ok_or_else(|| Error::Config(format!("checkpoint lacks tensor {key}")))?;
        if t.shape != shape || t.data.len() != shape.iter().product::<usize>() {
            return Err(Error::shape(
                "checkpoint tensor",
                format!("{key} {shape:?}"),
                format!("{:?}", t.shape),
            ));
        }
        Ok(t)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

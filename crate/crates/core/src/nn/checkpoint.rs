//! JSON parameter checkpoints. Floats are written in shortest round-trip
//! form, so a save/load cycle reproduces every weight bit for bit.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::network::{Network, Parameters};
use super::spec::{InputShape, ModelSpec};
use crate::error::{contract, validation, Error, Result};

pub const CHECKPOINT_FORMAT: &str = "sentiment-forecast/checkpoint-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaggedArray {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    format: String,
    spec_fingerprint: String,
    pub seed: u64,
    pub spec: ModelSpec,
    pub input: InputShape,
    layers: Vec<Vec<TaggedArray>>,
}

impl Checkpoint {
    pub fn from_network(network: &Network, seed: u64) -> Checkpoint {
        let layers = network
            .params()
            .layers
            .iter()
            .map(|l| {
                l.iter()
                    .map(|a| TaggedArray { rows: a.nrows(), cols: a.ncols(), data: a.iter().copied().collect() })
                    .collect()
            })
            .collect();
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            spec_fingerprint: network.spec().fingerprint(),
            seed,
            spec: network.spec().clone(),
            input: network.input_shape(),
            layers,
        }
    }

    pub fn into_network(self) -> Result<Network> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(validation(format!("unsupported checkpoint format {:?}", self.format)));
        }
        if self.spec.fingerprint() != self.spec_fingerprint {
            return Err(validation("checkpoint spec fingerprint mismatch"));
        }
        let layers = self
            .layers
            .into_iter()
            .map(|l| {
                l.into_iter()
                    .map(|t| Array2::from_shape_vec((t.rows, t.cols), t.data).map_err(|e| contract(e.to_string())))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Network::new(self.spec, self.input, Parameters { layers })
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        Ok(serde_json::to_vec(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io_util::write_atomic(path, &self.to_json()?)
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}

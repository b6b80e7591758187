//! Parameter checkpoints as JSON: a format tag plus one record per tensor
//! with its name, shape header and row-major data.

use serde::{Deserialize, Serialize};

use super::Parameters;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "uasn-checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub tensors: Vec<TensorRecord>,
}

impl Checkpoint {
    pub fn capture<P: Parameters + ?Sized>(params: &P) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            tensors: params
                .tensors()
                .into_iter()
                .map(|t| TensorRecord { name: t.name, shape: t.shape, data: t.data.to_vec() })
                .collect(),
        }
    }

    /// Copy the stored values into `params`; names and shapes must match exactly.
    pub fn restore<P: Parameters + ?Sized>(&self, params: &mut P) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Parse(format!("unsupported checkpoint format {:?}", self.format)));
        }
        let layout: Vec<(String, Vec<usize>)> = params.tensors().into_iter().map(|t| (t.name, t.shape)).collect();
        if layout.len() != self.tensors.len() {
            return Err(Error::Shape(format!(
                "checkpoint has {} tensors, model has {}",
                self.tensors.len(),
                layout.len()
            )));
        }
        for ((name, shape), rec) in layout.iter().zip(&self.tensors) {
            if *name != rec.name || *shape != rec.shape {
                return Err(Error::Shape(format!(
                    "tensor {}{:?} does not match {}{:?}",
                    rec.name, rec.shape, name, shape
                )));
            }
            if rec.data.len() != shape.iter().product::<usize>() {
                return Err(Error::Shape(format!("tensor {} has {} values for shape {:?}", rec.name, rec.data.len(), shape)));
            }
        }
        for (dst, rec) in params.tensors_mut().into_iter().zip(&self.tensors) {
            dst.copy_from_slice(&rec.data);
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Checkpoint> {
        Ok(serde_json::from_str(text)?)
    }
}

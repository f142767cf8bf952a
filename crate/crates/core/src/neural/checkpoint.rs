//! JSON checkpoints: an object mapping each tensor name to
//! `{"dims": [...], "data": [...]}` with row-major data.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Parameterized;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredTensor {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

pub type Checkpoint = BTreeMap<String, StoredTensor>;

pub fn to_checkpoint<P: Parameterized>(model: &P) -> Checkpoint {
    model
        .tensors()
        .into_iter()
        .map(|t| {
            (
                t.name,
                StoredTensor {
                    dims: t.dims,
                    data: t.data.to_vec(),
                },
            )
        })
        .collect()
}

/// Copies every tensor of `model` from `ckpt`; names and dims must match.
pub fn load_checkpoint<P: Parameterized>(model: &mut P, ckpt: &Checkpoint) -> Result<()> {
    for t in model.tensors_mut() {
        let stored = ckpt
            .get(&t.name)
            .ok_or_else(|| Error::Contract(format!("checkpoint lacks tensor `{}`", t.name)))?;
        if stored.dims != t.dims || stored.data.len() != t.data.len() {
            return Err(Error::Contract(format!(
                "tensor `{}` has dims {:?} in checkpoint but {:?} in model",
                t.name, stored.dims, t.dims
            )));
        }
        t.data.copy_from_slice(&stored.data);
    }
    Ok(())
}

pub fn save<P: Parameterized>(model: &P, path: &Path) -> Result<()> {
    let text = serde_json::to_string(&to_checkpoint(model))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load<P: Parameterized>(model: &mut P, path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ckpt: Checkpoint = serde_json::from_str(&text)?;
    load_checkpoint(model, &ckpt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{Activation, SequenceModel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_through_file() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model = SequenceModel::new(3, Some(2), &[4, 2], Activation::Relu, Activation::Identity, &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save(&model, &path).unwrap();
        let mut other = SequenceModel::new(3, Some(2), &[4, 2], Activation::Relu, Activation::Identity, &mut rng);
        assert_ne!(other, model);
        load(&mut other, &path).unwrap();
        assert_eq!(other, model);
    }

    #[test]
    fn mismatched_dims_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let small = SequenceModel::new(3, None, &[2], Activation::Relu, Activation::Identity, &mut rng);
        let mut big = SequenceModel::new(3, None, &[5], Activation::Relu, Activation::Identity, &mut rng);
        assert!(load_checkpoint(&mut big, &to_checkpoint(&small)).is_err());
    }
}

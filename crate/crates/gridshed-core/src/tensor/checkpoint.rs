//! Checkpoints: a JSON manifest next to a flat little-endian f64 blob.
//! Round-trips are byte-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{flatten_params, unflatten_params, FeedForward, LayerSpec};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub architecture: Vec<LayerSpec>,
    pub seed: u64,
    pub step_count: u64,
    /// Free-form fields for model-specific metadata (e.g. the GNN's shift
    /// operator and aggregation node).
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

/// Write `<stem>.json` + `<stem>.bin`.
pub fn save_checkpoint(stem: impl AsRef<Path>, net: &FeedForward, meta: &Checkpoint) -> Result<()> {
    let stem = stem.as_ref();
    if meta.architecture != net.specs {
        return Err(Error::InvalidInput("checkpoint architecture differs from network".into()));
    }
    if let Some(dir) = stem.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(with_ext(stem, "json"), serde_json::to_string_pretty(meta)?)?;
    let flat = flatten_params(&net.params);
    let mut bytes = Vec::with_capacity(flat.len() * 8);
    for v in flat {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(with_ext(stem, "bin"), bytes)?;
    Ok(())
}

/// Read a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(stem: impl AsRef<Path>) -> Result<(FeedForward, Checkpoint)> {
    let stem = stem.as_ref();
    let meta: Checkpoint = serde_json::from_str(&std::fs::read_to_string(with_ext(stem, "json"))?)?;
    let bytes = std::fs::read(with_ext(stem, "bin"))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::InvalidInput("parameter blob is not a multiple of 8 bytes".into()));
    }
    let flat: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let params = unflatten_params(&meta.architecture, &flat)?;
    Ok((FeedForward::new(meta.architecture.clone(), params), meta))
}

fn with_ext(stem: &Path, ext: &str) -> std::path::PathBuf {
    let mut p = stem.to_path_buf();
    let name = match p.file_name() {
        Some(n) => format!("{}.{}", n.to_string_lossy(), ext),
        None => format!("checkpoint.{}", ext),
    };
    p.set_file_name(name);
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn checkpoint_roundtrip_is_byte_exact() {
        let mut rng = crate::rng::substream(4, "ckpt", 0);
        let specs = vec![
            LayerSpec::Dense { inputs: 4, outputs: 3 },
            LayerSpec::Relu,
            LayerSpec::Dense { inputs: 3, outputs: 1 },
            LayerSpec::Sigmoid,
        ];
        let net = FeedForward::init(specs.clone(), &mut rng);
        let meta = Checkpoint { architecture: specs, seed: 4, step_count: 17, extra: Default::default() };
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("model");
        save_checkpoint(&stem, &net, &meta).unwrap();
        let (back, meta2) = load_checkpoint(&stem).unwrap();
        assert_eq!(back.params, net.params);
        assert_eq!(meta2.step_count, 17);

        // predictions identical bit for bit
        let x = Tensor::new(vec![1, 4], vec![0.3, -0.7, 1.1, 0.0]);
        let a = net.forward(&x).unwrap().output().data.clone();
        let b = back.forward(&x).unwrap().output().data.clone();
        assert_eq!(a, b);
    }
}
